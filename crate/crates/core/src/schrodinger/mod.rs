//! The discrete Schrödinger operator `L = -Δ + V`, its spectral calculus,
//! the operators built from it, and the kernel-condition checks.
//!
//! Operators are lists of dense scalar matrices acting on grid functions.
//! A vector-valued operator such as `∇L^{-1/2}` carries one matrix per
//! component; a complex operator carries its real and imaginary parts. In
//! both cases `|Tf|` is the Euclidean norm over the stored matrices.

mod container;
mod kernel;
mod operators;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Side};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::potential::PotentialField;

pub use container::{read_operator, write_operator, OperatorHeader};
pub use kernel::{
    extract_kernel, kernel_size_check, kernel_smoothness_check, KernelCheckParams,
    KernelCheckReport, KernelConfig, KernelMatrix, SizeMode, SmoothnessMode,
};
pub use operators::{
    adjoint_pairing_error, boundedness_rule, build_operator, predicted_scz_type, Boundedness,
    OperatorName, OperatorParams, SczType,
};

/// Relative residual allowed when certifying an eigendecomposition.
const SPECTRAL_TOLERANCE: f64 = 1e-8;
/// `λ_min` must exceed this fraction of `λ_max`.
const POSITIVITY_MARGIN: f64 = 1e-10;

/// Eigen-data of `L`, plus a memo of matrix functions already formed.
pub struct Spectrum {
    values: Vec<f64>,
    basis: Mat<f64>,
    cache: Mutex<HashMap<String, Arc<Vec<Mat<f64>>>>>,
}

impl Spectrum {
    /// Eigenvalues in ascending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Eigenvector `k` as a grid function.
    pub fn eigenvector(&self, grid: &Grid, k: usize) -> GridFunction {
        GridFunction::from_raw(grid.clone(), self.basis.col_as_slice(k).to_vec())
    }

    pub fn lambda_min(&self) -> f64 {
        self.values[0]
    }
}

impl fmt::Debug for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectrum")
            .field("len", &self.values.len())
            .field("lambda_min", &self.values.first())
            .field("lambda_max", &self.values.last())
            .finish()
    }
}

/// A dense operator on grid functions, possibly vector- or complex-valued.
#[derive(Clone)]
pub struct DiscreteOperator {
    grid: Grid,
    components: Arc<Vec<Mat<f64>>>,
    complex: bool,
    spectrum: Option<Arc<Spectrum>>,
    potential: Option<String>,
    provenance: String,
}

impl fmt::Debug for DiscreteOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteOperator")
            .field("grid", &self.grid)
            .field("provenance", &self.provenance)
            .field("components", &self.components.len())
            .field("complex", &self.complex)
            .field("spectrum", &self.spectrum)
            .finish()
    }
}

/// The functional-calculus tags accepted by [`matrix_function`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatrixFn {
    InvSqrt,
    Inv,
    PowerIAlpha(f64),
    InvGamma(f64),
}

impl MatrixFn {
    /// Parses `inv_sqrt`, `inv`, `power_i_alpha:<α>` or `inv_gamma:<γ>`.
    pub fn parse(s: &str) -> Result<Self> {
        let (tag, arg) = match s.split_once(':') {
            Some((t, a)) => (t.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            a.and_then(|a| a.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::param(format!("'{s}' needs a numeric argument")))
        };
        match tag {
            "inv_sqrt" => Ok(MatrixFn::InvSqrt),
            "inv" => Ok(MatrixFn::Inv),
            "power_i_alpha" => Ok(MatrixFn::PowerIAlpha(number(arg)?)),
            "inv_gamma" => Ok(MatrixFn::InvGamma(number(arg)?)),
            _ => Err(Error::Unknown {
                kind: "matrix function",
                name: s.to_string(),
            }),
        }
    }

    /// Canonical tag; `inv_gamma:1` shares its key with `inv`.
    fn key(&self) -> String {
        match *self {
            MatrixFn::InvSqrt => "inv_sqrt".into(),
            MatrixFn::Inv => "inv".into(),
            MatrixFn::InvGamma(g) if g == 1.0 => "inv".into(),
            MatrixFn::InvGamma(g) if g == 0.5 => "inv_sqrt".into(),
            MatrixFn::InvGamma(g) => format!("inv_gamma:{g}"),
            MatrixFn::PowerIAlpha(a) => format!("power_i_alpha:{a}"),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, MatrixFn::PowerIAlpha(_))
    }

    /// Scalar multipliers per eigenvalue: one list for real functions,
    /// `(cos, sin)` lists for `λ^{iα}`.
    fn multipliers(&self, lambda: &[f64]) -> Vec<Vec<f64>> {
        match *self {
            MatrixFn::PowerIAlpha(a) => vec![
                lambda.iter().map(|l| (a * l.ln()).cos()).collect(),
                lambda.iter().map(|l| (a * l.ln()).sin()).collect(),
            ],
            _ => {
                let key = self.key();
                let f: Box<dyn Fn(f64) -> f64> = match key.as_str() {
                    "inv" => Box::new(|l| 1.0 / l),
                    "inv_sqrt" => Box::new(|l| 1.0 / l.sqrt()),
                    _ => {
                        let g = match *self {
                            MatrixFn::InvGamma(g) => g,
                            _ => unreachable!(),
                        };
                        Box::new(move |l: f64| l.powf(-g))
                    }
                };
                vec![lambda.iter().map(|&l| f(l)).collect()]
            }
        }
    }
}

impl fmt::Display for MatrixFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixFn::InvSqrt => f.write_str("inv_sqrt"),
            MatrixFn::Inv => f.write_str("inv"),
            MatrixFn::PowerIAlpha(a) => write!(f, "power_i_alpha:{a}"),
            MatrixFn::InvGamma(g) => write!(f, "inv_gamma:{g}"),
        }
    }
}

/// `idx + e_a` on the torus, for each axis `a`.
pub(crate) fn forward_neighbors(grid: &Grid) -> Vec<Vec<usize>> {
    let n = grid.n_per_axis() as i64;
    (0..grid.dim())
        .map(|a| {
            (0..grid.len())
                .map(|i| {
                    let c = grid.coords(i);
                    let mut v = [c[0] as i64, c[1] as i64, c[2] as i64];
                    v[a] = (v[a] + 1) % n;
                    grid.index(&v[..grid.dim()])
                })
                .collect()
        })
        .collect()
}

/// `(D_a M)[x, ·] = (M[x + e_a, ·] - M[x, ·]) / h`.
pub(crate) fn row_diff(m: &Mat<f64>, fwd: &[usize], h: f64) -> Mat<f64> {
    let n = m.nrows();
    let mut out = Mat::<f64>::zeros(n, m.ncols());
    for j in 0..m.ncols() {
        let src = m.col_as_slice(j);
        let dst = out.col_as_slice_mut(j);
        for x in 0..n {
            dst[x] = (src[fwd[x]] - src[x]) / h;
        }
    }
    out
}

/// `M D_aᵀ`: column `y` becomes `(M[·, y + e_a] - M[·, y]) / h`.
pub(crate) fn col_diff(m: &Mat<f64>, fwd: &[usize], h: f64) -> Mat<f64> {
    let n = m.nrows();
    let mut out = Mat::<f64>::zeros(n, m.ncols());
    for y in 0..m.ncols() {
        let (a, b) = (m.col_as_slice(fwd[y]), m.col_as_slice(y));
        let dst = out.col_as_slice_mut(y);
        for x in 0..n {
            dst[x] = (a[x] - b[x]) / h;
        }
    }
    out
}

pub(crate) fn scale_rows(mut m: Mat<f64>, v: &[f64]) -> Mat<f64> {
    for j in 0..m.ncols() {
        for (x, e) in m.col_as_slice_mut(j).iter_mut().enumerate() {
            *e *= v[x];
        }
    }
    m
}

pub(crate) fn scale_cols(mut m: Mat<f64>, v: &[f64]) -> Mat<f64> {
    for (y, &s) in v.iter().enumerate() {
        for e in m.col_as_slice_mut(y) {
            *e *= s;
        }
    }
    m
}

fn transpose(m: &Mat<f64>) -> Mat<f64> {
    m.transpose().to_owned()
}

fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `U diag(f) Uᵀ`, made exactly symmetric.
fn spectral_product(basis: &Mat<f64>, f: &[f64]) -> Mat<f64> {
    let n = basis.nrows();
    let mut scaled = basis.clone();
    for (k, &fk) in f.iter().enumerate() {
        for e in scaled.col_as_slice_mut(k) {
            *e *= fk;
        }
    }
    let mut out = Mat::<f64>::zeros(n, n);
    matmul(
        out.as_mut(),
        Accum::Replace,
        scaled.as_ref(),
        basis.transpose(),
        1.0,
        faer::get_global_parallelism(),
    );
    symmetrize(&mut out);
    out
}

fn matvec(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj != 0.0 {
            for (o, &e) in out.iter_mut().zip(m.col_as_slice(j)) {
                *o += e * vj;
            }
        }
    }
    out
}

/// Assembles `L = (2d I - Σ shifts)/h² + diag(V)`, diagonalizes it and
/// certifies `λ_min > 0`.
pub fn build_l(v: &PotentialField) -> Result<DiscreteOperator> {
    let grid = v.grid().clone();
    let n = grid.len();
    let d = grid.dim();
    let h2 = grid.spacing() * grid.spacing();
    let fwd = forward_neighbors(&grid);
    let mut m = Mat::<f64>::zeros(n, n);
    for x in 0..n {
        m[(x, x)] += 2.0 * d as f64 / h2 + v.values()[x];
        for f in &fwd {
            let y = f[x];
            m[(x, y)] -= 1.0 / h2;
            m[(y, x)] -= 1.0 / h2;
        }
    }

    let evd = m
        .as_ref()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..n).map(|k| s[k]).collect();
    let basis = evd.U().to_owned();
    if values.iter().any(|l| !l.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    // A singular L shows up as round-off around zero; demand a margin.
    if values[0] <= POSITIVITY_MARGIN * values[n - 1].abs().max(1.0) {
        return Err(Error::NotPositive(values[0]));
    }

    // Probe the reconstruction L v = U Λ Uᵀ v on a few fixed vectors.
    let norm_l = values[n - 1].abs().max(1.0);
    for seed in 0..3u64 {
        let probe: Vec<f64> = (0..n)
            .map(|i| (((i as u64 + 1) * (2 * seed + 3)) as f64 * 0.618_033_988_75).fract() - 0.5)
            .collect();
        let lv = matvec(&m, &probe);
        let coeffs: Vec<f64> = (0..n)
            .map(|k| {
                basis
                    .col_as_slice(k)
                    .iter()
                    .zip(&probe)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    * values[k]
            })
            .collect();
        let recon = matvec(&basis, &coeffs);
        let res = lv.iter().zip(&recon).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = norm_l * probe.iter().map(|a| a * a).sum::<f64>().sqrt();
        if res > SPECTRAL_TOLERANCE * scale {
            return Err(Error::Eigen(format!("reconstruction residual {:e}", res / scale)));
        }
    }

    Ok(DiscreteOperator {
        grid,
        components: Arc::new(vec![m]),
        complex: false,
        spectrum: Some(Arc::new(Spectrum {
            values,
            basis,
            cache: Mutex::new(HashMap::new()),
        })),
        potential: Some(v.descriptor().to_string()),
        provenance: "L".into(),
    })
}

/// `f(L)` through the cached eigendecomposition.
pub fn matrix_function(l: &DiscreteOperator, func: MatrixFn) -> Result<DiscreteOperator> {
    let spectrum = l
        .spectrum
        .as_ref()
        .ok_or_else(|| Error::param(format!("'{}' carries no spectral data", l.provenance)))?;
    if let MatrixFn::InvGamma(g) = func {
        if !(g > 0.0) {
            return Err(Error::param(format!("inv_gamma needs gamma > 0 (got {g})")));
        }
    }
    let key = func.key();
    let cached = spectrum.cache.lock().expect("cache poisoned").get(&key).cloned();
    let comps = match cached {
        Some(c) => c,
        None => {
            let built: Vec<Mat<f64>> = func
                .multipliers(&spectrum.values)
                .iter()
                .map(|f| spectral_product(&spectrum.basis, f))
                .collect();
            let built = Arc::new(built);
            spectrum
                .cache
                .lock()
                .expect("cache poisoned")
                .insert(key.clone(), built.clone());
            built
        }
    };
    Ok(DiscreteOperator {
        grid: l.grid.clone(),
        components: comps,
        complex: func.is_complex(),
        spectrum: None,
        potential: l.potential.clone(),
        provenance: format!("{key}(L)"),
    })
}

impl DiscreteOperator {
    /// Wraps explicit matrices; each must be `len × len`.
    pub fn from_components(
        grid: &Grid,
        components: Vec<Mat<f64>>,
        complex: bool,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let n = grid.len();
        if components.is_empty() || components.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::param(format!("operator matrices must be {n}×{n}")));
        }
        if complex && components.len() != 2 {
            return Err(Error::param("a complex operator has exactly two parts"));
        }
        Ok(DiscreteOperator {
            grid: grid.clone(),
            components: Arc::new(components),
            complex,
            spectrum: None,
            potential: None,
            provenance: provenance.into(),
        })
    }

    pub(crate) fn derived(&self, components: Vec<Mat<f64>>, complex: bool, provenance: String) -> Self {
        DiscreteOperator {
            grid: self.grid.clone(),
            components: Arc::new(components),
            complex,
            spectrum: None,
            potential: self.potential.clone(),
            provenance,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Descriptor of the potential the operator was built from, when known.
    pub fn potential(&self) -> Option<&str> {
        self.potential.as_deref()
    }

    pub fn with_potential(mut self, descriptor: impl Into<String>) -> Self {
        self.potential = Some(descriptor.into());
        self
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }

    /// Number of vector components (a complex operator counts once).
    pub fn component_count(&self) -> usize {
        if self.complex {
            1
        } else {
            self.components.len()
        }
    }

    /// Stored real matrices: the components, or `(re, im)`.
    pub fn matrices(&self) -> &[Mat<f64>] {
        &self.components
    }

    pub fn spectrum(&self) -> Option<&Spectrum> {
        self.spectrum.as_deref()
    }

    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.spectrum.as_deref().map(|s| s.values())
    }

    /// Applies every stored matrix to `f`.
    pub fn apply(&self, f: &GridFunction) -> Result<Vec<GridFunction>> {
        self.grid.check_same(f.grid())?;
        Ok(self
            .components
            .par_iter()
            .map(|m| GridFunction::from_raw(self.grid.clone(), matvec(m, f.values())))
            .collect())
    }

    /// `|Tf|`: the Euclidean norm over stored matrices, pointwise.
    pub fn apply_magnitude(&self, f: &GridFunction) -> Result<GridFunction> {
        let parts = self.apply(f)?;
        Ok(magnitude(&self.grid, &parts))
    }

    /// `|Tf|` for a batch of inputs, through one matrix product per component.
    pub fn apply_magnitude_batch(&self, fs: &[GridFunction]) -> Result<Vec<GridFunction>> {
        for f in fs {
            self.grid.check_same(f.grid())?;
        }
        let n = self.grid.len();
        let m = fs.len();
        if m == 0 {
            return Ok(Vec::new());
        }
        let input = Mat::<f64>::from_fn(n, m, |i, j| fs[j].values()[i]);
        let mut acc = vec![vec![0.0; n]; m];
        let mut out = Mat::<f64>::zeros(n, m);
        for comp in self.components.iter() {
            matmul(
                out.as_mut(),
                Accum::Replace,
                comp.as_ref(),
                input.as_ref(),
                1.0,
                faer::get_global_parallelism(),
            );
            for (j, a) in acc.iter_mut().enumerate() {
                for (x, v) in out.col_as_slice(j).iter().enumerate() {
                    a[x] += v * v;
                }
            }
        }
        Ok(acc
            .into_iter()
            .map(|a| GridFunction::from_raw(self.grid.clone(), a.into_iter().map(f64::sqrt).collect()))
            .collect())
    }

    /// Literal matrix adjoint: each component transposed, imaginary part
    /// negated.
    pub fn adjoint(&self) -> DiscreteOperator {
        let comps = self
            .components
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let t = transpose(m);
                if self.complex && i == 1 {
                    -t
                } else {
                    t
                }
            })
            .collect();
        self.derived(comps, self.complex, format!("adj({})", self.provenance))
    }

    /// `max |M - Mᵀ|` over stored matrices.
    pub fn asymmetry(&self) -> f64 {
        let n = self.grid.len();
        self.components
            .iter()
            .map(|m| {
                let mut worst = 0.0f64;
                for j in 0..n {
                    for i in (j + 1)..n {
                        worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
                    }
                }
                worst
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn magnitude(grid: &Grid, parts: &[GridFunction]) -> GridFunction {
    let n = grid.len();
    let mut acc = vec![0.0; n];
    for p in parts {
        for (a, v) in acc.iter_mut().zip(p.values()) {
            *a += v * v;
        }
    }
    GridFunction::from_raw(grid.clone(), acc.into_iter().map(f64::sqrt).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(g: &Grid, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::from_fn(g, |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn one_dimensional_spectrum() {
        let g = make_grid(1, 4, 1.0).unwrap();
        let l = build_l(&PotentialField::constant(&g, 1.0).unwrap()).unwrap();
        let ev = l.eigenvalues().unwrap();
        for (a, b) in ev.iter().zip([1.0, 3.0, 3.0, 5.0]) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(l.asymmetry(), 0.0);
        let inv = matrix_function(&l, MatrixFn::Inv).unwrap();
        let spec = l.spectrum().unwrap();
        for (k, &lam) in ev.iter().enumerate() {
            let u = spec.eigenvector(&g, k);
            let iu = &inv.apply(&u).unwrap()[0];
            for (a, b) in iu.values().iter().zip(u.values()) {
                assert!((a - b / lam).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_shift_moves_the_spectrum() {
        let g = make_grid(2, 4, 0.5).unwrap();
        let v = PotentialField::oscillator(&g).unwrap();
        let a = build_l(&v).unwrap();
        let b = build_l(&v.shifted(2.5).unwrap()).unwrap();
        for (x, y) in a.eigenvalues().unwrap().iter().zip(b.eigenvalues().unwrap()) {
            assert!((x + 2.5 - y).abs() < 1e-10);
        }
    }

    #[test]
    fn functional_calculus_identities() {
        let g = make_grid(2, 6, 0.5).unwrap();
        let l = build_l(&PotentialField::oscillator(&g).unwrap()).unwrap();
        let half = matrix_function(&l, MatrixFn::InvSqrt).unwrap();
        let inv = matrix_function(&l, MatrixFn::Inv).unwrap();
        let f = random(&g, 3);
        let twice = half.apply(&half.apply(&f).unwrap()[0]).unwrap();
        let once = inv.apply(&f).unwrap();
        for (a, b) in twice[0].values().iter().zip(once[0].values()) {
            assert!((a - b).abs() < 1e-8);
        }
        let g1 = matrix_function(&l, MatrixFn::InvGamma(1.0)).unwrap();
        assert_eq!(g1.matrices()[0], inv.matrices()[0]);

        let id = matrix_function(&l, MatrixFn::PowerIAlpha(0.0)).unwrap();
        assert!(id.is_complex());
        let n = g.len();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id.matrices()[0][(i, j)] - want).abs() < 1e-12);
                assert!(id.matrices()[1][(i, j)].abs() < 1e-12);
            }
        }
        for alpha in [0.5, 2.0] {
            let u = matrix_function(&l, MatrixFn::PowerIAlpha(alpha)).unwrap();
            let uf = u.apply_magnitude(&f).unwrap();
            let lhs = uf.inner(&uf).unwrap().sqrt();
            let rhs = f.inner(&f).unwrap().sqrt();
            assert!((lhs - rhs).abs() < 1e-8 * rhs);
        }
    }

    #[test]
    fn spectral_consistency_for_gamma_powers() {
        let g = make_grid(2, 4, 0.5).unwrap();
        let l = build_l(&PotentialField::constant(&g, 0.5).unwrap()).unwrap();
        let spec = l.spectrum().unwrap();
        let op = matrix_function(&l, MatrixFn::InvGamma(0.75)).unwrap();
        for (k, &lam) in spec.values().iter().enumerate() {
            let u = spec.eigenvector(&g, k);
            let out = &op.apply(&u).unwrap()[0];
            for (a, b) in out.values().iter().zip(u.values()) {
                assert!((a - lam.powf(-0.75) * b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn parse_and_errors() {
        assert_eq!(MatrixFn::parse("inv_gamma:0.5").unwrap(), MatrixFn::InvGamma(0.5));
        assert_eq!(MatrixFn::parse("power_i_alpha:2").unwrap(), MatrixFn::PowerIAlpha(2.0));
        assert!(matches!(MatrixFn::parse("exp"), Err(Error::Unknown { .. })));
        assert!(MatrixFn::parse("inv_gamma").is_err());
        let g = make_grid(1, 4, 1.0).unwrap();
        let zero = PotentialField::new(GridFunction::from_fn(&g, |i| if i == 0 { 1e-30 } else { 0.0 }), "tiny");
        assert!(matches!(build_l(&zero.unwrap()), Err(Error::NotPositive(_))));
        let l = build_l(&PotentialField::constant(&g, 1.0).unwrap()).unwrap();
        let inv = matrix_function(&l, MatrixFn::Inv).unwrap();
        assert!(matrix_function(&inv, MatrixFn::Inv).is_err());
    }

    #[test]
    fn batch_application_matches_single() {
        let g = make_grid(2, 4, 0.5).unwrap();
        let l = build_l(&PotentialField::constant(&g, 1.0).unwrap()).unwrap();
        let op = matrix_function(&l, MatrixFn::PowerIAlpha(1.0)).unwrap();
        let fs: Vec<_> = (0..3).map(|s| random(&g, s)).collect();
        let batch = op.apply_magnitude_batch(&fs).unwrap();
        for (f, b) in fs.iter().zip(&batch) {
            let single = op.apply_magnitude(f).unwrap();
            for (a, c) in single.values().iter().zip(b.values()) {
                assert!((a - c).abs() < 1e-12);
            }
        }
    }
}
