//! Kernel extraction and the size/smoothness checks.
//!
//! Every check returns the smallest constant making its inequality hold over
//! a deterministic set of sampled configurations. Annuli `R < |x₀ - y| < 2R`
//! are contiguous slices of the offset table around `x₀`, with `R` on the
//! radius ladder below the half-side cap and the outer radius truncated at
//! the cap.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DiscreteOperator;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::potential::CriticalRadiusField;

/// `K_c(x, y)` with `(Tf)(x) = h^d Σ_y K(x, y) f(y)`; rows are contiguous.
#[derive(Clone)]
pub struct KernelMatrix {
    grid: Grid,
    components: Vec<Vec<f64>>,
    complex: bool,
    provenance: String,
}

impl fmt::Debug for KernelMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelMatrix")
            .field("grid", &self.grid)
            .field("provenance", &self.provenance)
            .field("components", &self.components.len())
            .field("complex", &self.complex)
            .finish()
    }
}

/// Rescales the operator matrices by `h^{-d}`.
pub fn extract_kernel(t: &DiscreteOperator) -> KernelMatrix {
    let grid = t.grid().clone();
    let n = grid.len();
    let inv_cell = 1.0 / grid.cell_measure();
    let components = t
        .matrices()
        .par_iter()
        .map(|m| {
            let mut rows = vec![0.0; n * n];
            for y in 0..n {
                for (x, &v) in m.col_as_slice(y).iter().enumerate() {
                    rows[x * n + y] = v * inv_cell;
                }
            }
            rows
        })
        .collect();
    KernelMatrix {
        grid,
        components,
        complex: t.is_complex(),
        provenance: t.provenance().to_string(),
    }
}

impl KernelMatrix {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }

    /// 1 for scalar and complex operators, `d` for `R1`, `d²` for `R2`.
    pub fn component_count(&self) -> usize {
        if self.complex {
            1
        } else {
            self.components.len()
        }
    }

    /// Stored real part `c` at `(x, y)`.
    pub fn entry(&self, c: usize, x: usize, y: usize) -> f64 {
        self.components[c][x * self.grid.len() + y]
    }

    /// `|K(x, y)|`, Euclidean over stored parts.
    pub fn magnitude(&self, x: usize, y: usize) -> f64 {
        let i = x * self.grid.len() + y;
        self.components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt()
    }

    /// `|K(x, y) - K(x₀, y)|`.
    pub fn difference(&self, x: usize, x0: usize, y: usize) -> f64 {
        let n = self.grid.len();
        let (i, j) = (x * n + y, x0 * n + y);
        self.components
            .iter()
            .map(|c| (c[i] - c[j]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `h^d Σ_y K_c(x, y) f(y)` for every stored part.
    pub fn apply(&self, f: &GridFunction) -> Result<Vec<GridFunction>> {
        self.grid.check_same(f.grid())?;
        let n = self.grid.len();
        let cell = self.grid.cell_measure();
        Ok(self
            .components
            .iter()
            .map(|c| {
                let vals = (0..n)
                    .into_par_iter()
                    .map(|x| {
                        c[x * n..(x + 1) * n]
                            .iter()
                            .zip(f.values())
                            .map(|(k, v)| k * v)
                            .sum::<f64>()
                            * cell
                    })
                    .collect();
                GridFunction::from_raw(self.grid.clone(), vals)
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeMode {
    Pointwise,
    Integral,
    FarField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessMode {
    Pointwise,
    Integral,
    AnnulusSum,
}

impl SizeMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pointwise" => Ok(SizeMode::Pointwise),
            "integral" => Ok(SizeMode::Integral),
            "far-field" | "far_field" => Ok(SizeMode::FarField),
            _ => Err(Error::Unknown {
                kind: "size mode",
                name: s.into(),
            }),
        }
    }
}

impl SmoothnessMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pointwise" => Ok(SmoothnessMode::Pointwise),
            "integral" => Ok(SmoothnessMode::Integral),
            "annulus-sum" | "annulus_sum" => Ok(SmoothnessMode::AnnulusSum),
            _ => Err(Error::Unknown {
                kind: "smoothness mode",
                name: s.into(),
            }),
        }
    }
}

/// Parameters shared by the checks; unused fields are ignored per mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCheckParams {
    /// Integrability exponent for the integral forms (`> 1`, finite).
    pub s: f64,
    /// Decay order `N`.
    pub n: f64,
    /// Smoothness exponent `δ ∈ (0, 1]`.
    pub delta: f64,
    /// Number of base points `x₀` sampled.
    pub center_budget: usize,
    /// Number of perturbed points `x` per base point and scale.
    pub point_budget: usize,
}

impl Default for KernelCheckParams {
    fn default() -> Self {
        KernelCheckParams {
            s: 2.0,
            n: 1.0,
            delta: 1.0,
            center_budget: 64,
            point_budget: 8,
        }
    }
}

/// A configuration attaining the reported constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub x: usize,
    pub x0: usize,
    pub y: Option<usize>,
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCheckReport {
    pub mode: String,
    pub s: Option<f64>,
    pub n: Option<f64>,
    pub delta: Option<f64>,
    pub constant: f64,
    pub configurations: usize,
    pub skipped: usize,
    pub worst: Option<KernelConfig>,
    /// Series terms of the worst configuration (`annulus_sum` only).
    pub terms: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
struct Partial {
    best: f64,
    worst: Option<KernelConfig>,
    terms: Vec<f64>,
    configurations: usize,
    skipped: usize,
}

impl Partial {
    fn offer(&mut self, value: f64, config: KernelConfig) {
        self.configurations += 1;
        if value > self.best || self.worst.is_none() {
            self.best = value;
            self.worst = Some(config);
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        self.configurations += other.configurations;
        self.skipped += other.skipped;
        if other.worst.is_some() && (self.worst.is_none() || other.best > self.best) {
            self.best = other.best;
            self.worst = other.worst;
            self.terms = other.terms;
        }
        self
    }
}

/// Evenly spaced base points.
fn sample_centers(grid: &Grid, budget: usize) -> Vec<usize> {
    let n = grid.len();
    if budget >= n {
        return (0..n).collect();
    }
    (0..budget).map(|i| i * n / budget).collect()
}

/// Offset-table positions `[lo, hi)` thinned to at most `budget` entries,
/// always keeping the last one.
fn sample_positions(lo: usize, hi: usize, budget: usize) -> Vec<usize> {
    if hi <= lo || budget == 0 {
        return Vec::new();
    }
    let len = hi - lo;
    if len <= budget {
        return (lo..hi).collect();
    }
    let mut out: Vec<usize> = (0..budget).map(|i| lo + i * (len - 1) / (budget - 1).max(1)).collect();
    out.dedup();
    out
}

fn positions_to_indices(grid: &Grid, center: usize, count: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    grid.walk(center, count, |_, idx| out.push(idx));
    out
}

fn check_s(s: f64) -> Result<()> {
    if s > 1.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("integral forms need a finite s > 1 (got {s})")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("delta must lie in (0, 1] (got {delta})")))
    }
}

fn check_n(n: f64) -> Result<()> {
    if n >= 0.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("N must be non-negative (got {n})")))
    }
}

/// `(h^d Σ_{y ∈ annulus} g(y)^s)^{1/s}`.
fn annulus_norm(cell: f64, ys: &[usize], s: f64, g: impl Fn(usize) -> f64) -> f64 {
    (ys.iter().map(|&y| g(y).powf(s)).sum::<f64>() * cell).powf(1.0 / s)
}

/// Ladder radii `R` below the cap; annuli reaching past the cap are
/// truncated there.
fn annulus_radii(grid: &Grid) -> Vec<f64> {
    let cap = grid.radius_cap();
    grid.ladder().iter().copied().filter(|&r| r < cap * (1.0 - 1e-12)).collect()
}

fn finish(
    mode: &str,
    s: Option<f64>,
    n: Option<f64>,
    delta: Option<f64>,
    total: Partial,
) -> Result<KernelCheckReport> {
    if total.configurations == 0 {
        return Err(Error::param(format!(
            "{mode}: no admissible configurations on this grid ({} skipped)",
            total.skipped
        )));
    }
    Ok(KernelCheckReport {
        mode: mode.to_string(),
        s,
        n,
        delta,
        constant: total.best,
        configurations: total.configurations,
        skipped: total.skipped,
        worst: total.worst,
        terms: total.terms,
    })
}

fn reduce(parts: Vec<Partial>) -> Partial {
    parts.into_iter().fold(Partial::default(), Partial::merge)
}

/// Size conditions: pointwise `|K| ≤ C_N |x-y|^{-d} (1+|x-y|/ρ(x))^{-N}`,
/// the annulus-averaged integral form, or the far-field form with
/// `(ρ(x₀)/R)^N` for `R > 2ρ(x₀)`.
pub fn kernel_size_check(
    k: &KernelMatrix,
    rho: &CriticalRadiusField,
    mode: SizeMode,
    params: &KernelCheckParams,
) -> Result<KernelCheckReport> {
    k.grid.check_same(rho.grid())?;
    check_n(params.n)?;
    let grid = &k.grid;
    let d = grid.dim() as i32;
    let cell = grid.cell_measure();
    let centers = sample_centers(grid, params.center_budget);
    let nn = params.n;

    match mode {
        SizeMode::Pointwise => {
            let parts = centers
                .par_iter()
                .map(|&x| {
                    let mut p = Partial::default();
                    let rx = rho.at(x);
                    for y in 0..grid.len() {
                        if y == x {
                            continue;
                        }
                        let r = grid.distance(x, y);
                        let v = k.magnitude(x, y) * r.powi(d) * (1.0 + r / rx).powf(nn);
                        p.offer(v, KernelConfig { x, x0: x, y: Some(y), radius: None });
                    }
                    p
                })
                .collect();
            finish("size/pointwise", None, Some(nn), None, reduce(parts))
        }
        SizeMode::Integral | SizeMode::FarField => {
            check_s(params.s)?;
            let s = params.s;
            let s_conj = s / (s - 1.0);
            let radii = annulus_radii(grid);
            let far = mode == SizeMode::FarField;
            let parts = centers
                .par_iter()
                .map(|&x0| {
                    let mut p = Partial::default();
                    let r0 = rho.at(x0);
                    for &big_r in &radii {
                        if far && big_r <= 2.0 * r0 {
                            continue;
                        }
                        let lo = grid.count_within(big_r);
                        let hi = grid.count_strictly_within(2.0 * big_r);
                        if hi <= lo {
                            p.skipped += 1;
                            continue;
                        }
                        let ring: Vec<usize> = positions_to_indices(grid, x0, hi)[lo..].to_vec();
                        let reach = if far {
                            grid.count_within(r0)
                        } else {
                            grid.count_strictly_within(big_r / 2.0)
                        };
                        let near = positions_to_indices(grid, x0, reach.max(1));
                        for pos in sample_positions(0, near.len(), params.point_budget) {
                            let x = near[pos];
                            let norm = annulus_norm(cell, &ring, s, |y| k.magnitude(x, y));
                            let decay = if far {
                                (big_r / r0).powf(nn)
                            } else {
                                (1.0 + big_r / rho.at(x)).powf(nn)
                            };
                            let v = norm * big_r.powf(d as f64 / s_conj) * decay;
                            p.offer(v, KernelConfig { x, x0, y: None, radius: Some(big_r) });
                        }
                    }
                    p
                })
                .collect();
            let name = if far { "size/far_field" } else { "size/integral" };
            finish(name, Some(s), Some(nn), None, reduce(parts))
        }
    }
}

/// Smoothness conditions: pointwise
/// `|K(x,y) - K(x₀,y)| ≤ C |x-x₀|^δ / |x-y|^{d+δ}` for `|x-x₀| < |x-y|/2`,
/// the annulus-averaged integral form for `|x-x₀| < r < ρ(x₀)`, `r < R/2`,
/// or the dyadic series over `B(x₀, 2^{k+1} r) \ B(x₀, 2^k r)`.
pub fn kernel_smoothness_check(
    k: &KernelMatrix,
    rho: &CriticalRadiusField,
    mode: SmoothnessMode,
    params: &KernelCheckParams,
) -> Result<KernelCheckReport> {
    k.grid.check_same(rho.grid())?;
    let grid = &k.grid;
    let h = grid.spacing();
    let d = grid.dim() as f64;
    let cell = grid.cell_measure();
    let centers = sample_centers(grid, params.center_budget);
    let cap = grid.radius_cap();

    match mode {
        SmoothnessMode::Pointwise => {
            check_delta(params.delta)?;
            let delta = params.delta;
            let reach = grid.count_within(2.0 * h);
            let parts = centers
                .par_iter()
                .map(|&x0| {
                    let mut p = Partial::default();
                    let near = positions_to_indices(grid, x0, reach);
                    for pos in sample_positions(1, near.len(), params.point_budget) {
                        let x = near[pos];
                        let r = grid.distance(x, x0);
                        for y in 0..grid.len() {
                            let dy = grid.distance(x, y);
                            if r >= dy / 2.0 {
                                continue;
                            }
                            let v = k.difference(x, x0, y) * dy.powf(d + delta) / r.powf(delta);
                            p.offer(v, KernelConfig { x, x0, y: Some(y), radius: None });
                        }
                    }
                    p
                })
                .collect();
            finish("smoothness/pointwise", None, None, Some(delta), reduce(parts))
        }
        SmoothnessMode::Integral => {
            check_delta(params.delta)?;
            check_s(params.s)?;
            let (s, delta) = (params.s, params.delta);
            let s_conj = s / (s - 1.0);
            let radii = annulus_radii(grid);
            let parts = centers
                .par_iter()
                .map(|&x0| {
                    let mut p = Partial::default();
                    let r0 = rho.at(x0);
                    let reach = grid.count_strictly_within(r0);
                    let near = positions_to_indices(grid, x0, reach.max(1));
                    let xs: Vec<usize> = sample_positions(1, near.len(), params.point_budget)
                        .into_iter()
                        .map(|i| near[i])
                        .collect();
                    if xs.is_empty() {
                        p.skipped += 1;
                    }
                    for &big_r in &radii {
                        let lo = grid.count_within(big_r);
                        let hi = grid.count_strictly_within(2.0 * big_r);
                        if hi <= lo {
                            p.skipped += 1;
                            continue;
                        }
                        let ring: Vec<usize> = positions_to_indices(grid, x0, hi)[lo..].to_vec();
                        for &x in &xs {
                            let r = grid.distance(x, x0);
                            if 2.0 * r >= big_r {
                                continue;
                            }
                            let norm = annulus_norm(cell, &ring, s, |y| k.difference(x, x0, y));
                            let v = norm * big_r.powf(d / s_conj) * (big_r / r).powf(delta);
                            p.offer(v, KernelConfig { x, x0, y: None, radius: Some(big_r) });
                        }
                    }
                    p
                })
                .collect();
            finish("smoothness/integral", Some(s), None, Some(delta), reduce(parts))
        }
        SmoothnessMode::AnnulusSum => {
            check_s(params.s)?;
            let s = params.s;
            let s_conj = s / (s - 1.0);
            let parts = centers
                .par_iter()
                .map(|&x0| {
                    let mut p = Partial::default();
                    let r0 = rho.at(x0);
                    let scales: Vec<f64> = grid
                        .ladder()
                        .iter()
                        .copied()
                        .filter(|&r| r >= h * (1.0 - 1e-12) && r <= r0 * (1.0 + 1e-12))
                        .collect();
                    if scales.is_empty() {
                        p.skipped += 1;
                    }
                    for &r in &scales {
                        if 4.0 * r > cap * (1.0 + 1e-12) {
                            p.skipped += 1;
                            continue;
                        }
                        let mut shells = Vec::new();
                        let mut kk = 1;
                        while 2f64.powi(kk + 1) * r <= cap * (1.0 + 1e-12) {
                            let inner = 2f64.powi(kk) * r;
                            let lo = grid.count_within(inner);
                            let hi = grid.count_within(2.0 * inner);
                            shells.push((inner, lo, hi));
                            kk += 1;
                        }
                        let all = positions_to_indices(grid, x0, shells.last().map_or(1, |t| t.2));
                        let reach = grid.count_within(r);
                        for pos in sample_positions(1, reach, params.point_budget) {
                            let x = all[pos];
                            let terms: Vec<f64> = shells
                                .iter()
                                .map(|&(inner, lo, hi)| {
                                    inner.powf(d / s_conj)
                                        * annulus_norm(cell, &all[lo..hi], s, |y| {
                                            k.difference(x, x0, y)
                                        })
                                })
                                .collect();
                            let total: f64 = terms.iter().sum();
                            let was = p.worst;
                            p.offer(total, KernelConfig { x, x0, y: None, radius: Some(r) });
                            if p.worst != was {
                                p.terms = terms;
                            }
                        }
                    }
                    p
                })
                .collect();
            finish("smoothness/annulus_sum", Some(s), None, None, reduce(parts))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_l, build_operator, matrix_function, MatrixFn, OperatorName, OperatorParams};
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::{critical_radius, PotentialField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize) -> (Grid, PotentialField, DiscreteOperator, CriticalRadiusField) {
        let g = make_grid(3, n, 0.25).unwrap();
        let v = PotentialField::constant(&g, 1.0).unwrap();
        let l = build_l(&v).unwrap();
        let rho = critical_radius(&v);
        (g, v, l, rho)
    }

    #[test]
    fn identity_kernel() {
        let (g, v, l, rho) = setup(6);
        let id = build_operator(OperatorName::Identity, &OperatorParams::default(), &v, &l).unwrap();
        let k = extract_kernel(&id);
        let inv_cell = 1.0 / g.cell_measure();
        assert_eq!(k.entry(0, 3, 3), inv_cell);
        assert_eq!(k.entry(0, 3, 4), 0.0);
        let params = KernelCheckParams::default();
        let r = kernel_size_check(&k, &rho, SizeMode::Pointwise, &params).unwrap();
        assert_eq!(r.constant, 0.0);
        let r = kernel_smoothness_check(&k, &rho, SmoothnessMode::Pointwise, &params).unwrap();
        assert_eq!(r.constant, 0.0);
    }

    #[test]
    fn kernel_reproduces_the_operator() {
        let (g, v, l, _) = setup(6);
        let r1 = build_operator(OperatorName::R1, &OperatorParams::default(), &v, &l).unwrap();
        let k = extract_kernel(&r1);
        assert_eq!(k.component_count(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = GridFunction::from_fn(&g, |_| rng.random_range(-1.0..1.0));
        let a = r1.apply(&f).unwrap();
        let b = k.apply(&f).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.values().iter().zip(y.values()) {
                assert!((p - q).abs() <= 1e-10 * (1.0 + p.abs()));
            }
        }
        let inv = extract_kernel(&matrix_function(&l, MatrixFn::Inv).unwrap());
        for x in [0, 5, 77] {
            for y in [0, 9, 100] {
                assert_eq!(inv.entry(0, x, y), inv.entry(0, y, x));
                assert!(inv.entry(0, x, y) > 0.0);
            }
        }
    }

    #[test]
    fn size_constants_grow_with_n_and_downgrade() {
        let (_, v, l, rho) = setup(6);
        let r1 = build_operator(OperatorName::R1, &OperatorParams::default(), &v, &l).unwrap();
        let k = extract_kernel(&r1);
        let mut prev = 0.0;
        for n in [1.0, 2.0, 3.0] {
            let p = KernelCheckParams { n, ..Default::default() };
            let c = kernel_size_check(&k, &rho, SizeMode::Pointwise, &p).unwrap().constant;
            assert!(c.is_finite() && c >= prev);
            prev = c;
        }

        // Hölder on each annulus: C_t ≤ C_s · max (|A| / R^d)^{1/t - 1/s}.
        let g = k.grid().clone();
        let (t, s) = (1.5, 3.0);
        let factor = annulus_radii(&g)
            .iter()
            .map(|&r| {
                let m = (g.count_strictly_within(2.0 * r) - g.count_within(r)) as f64 * g.cell_measure();
                (m / r.powi(3)).powf(1.0 / t - 1.0 / s)
            })
            .fold(0.0f64, f64::max);
        let at = |s| {
            let p = KernelCheckParams { s, n: 1.0, ..Default::default() };
            kernel_size_check(&k, &rho, SizeMode::Integral, &p).unwrap().constant
        };
        assert!(at(t) <= at(s) * factor * (1.0 + 1e-12));
    }

    #[test]
    fn smoothness_modes_run() {
        let g = make_grid(2, 16, 0.25).unwrap();
        let v = PotentialField::constant(&g, 1.0).unwrap();
        let l = build_l(&v).unwrap();
        let rho = critical_radius(&v);
        let op = build_operator(OperatorName::LinvGradVHalf, &OperatorParams::default(), &v, &l).unwrap();
        let k = extract_kernel(&op);
        let p = KernelCheckParams { s: 4.0, delta: 1.0, ..Default::default() };
        let integral = kernel_smoothness_check(&k, &rho, SmoothnessMode::Integral, &p).unwrap();
        assert!(integral.constant.is_finite() && integral.constant > 0.0);
        let sum = kernel_smoothness_check(&k, &rho, SmoothnessMode::AnnulusSum, &p).unwrap();
        assert!(sum.constant.is_finite() && sum.constant > 0.0);
        assert!(!sum.terms.is_empty());
        assert!((sum.terms.iter().sum::<f64>() - sum.constant).abs() <= 1e-12 * sum.constant);
        assert!(kernel_smoothness_check(&k, &rho, SmoothnessMode::Integral, &KernelCheckParams { delta: 1.5, ..p }).is_err());
        assert!(kernel_size_check(&k, &rho, SizeMode::Integral, &KernelCheckParams { s: 1.0, ..p }).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(SizeMode::parse("far-field").unwrap(), SizeMode::FarField);
        assert_eq!(SmoothnessMode::parse("annulus-sum").unwrap(), SmoothnessMode::AnnulusSum);
        assert!(SizeMode::parse("bogus").is_err());
    }
}
