//! Variable exponents `p(·)`, the modular and the Luxemburg norm.
//!
//! The norm solves `modular(f / λ) = 1`. In `t = ln λ` the log-modular
//! `g(t) = ln(h^d Σ exp(p_i (ln|f_i| - t)))` is a log-sum-exp of affine maps,
//! hence convex and strictly decreasing, so Newton's method started left of the
//! root climbs monotonically onto it. A bisection fallback guards the
//! pathological cases (e.g. huge dynamic range in `p`).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::spec::FieldSpec;
use crate::weights::WeightField;

/// Pair budget above which the log-Hölder scan subsamples.
pub const LOG_HOLDER_PAIR_BUDGET: usize = 100_000;

/// Relative-step stopping rule for the norm root finder.
const ROOT_REL_TOL: f64 = 1e-15;
const NEWTON_MAX_ITERS: usize = 200;

/// A variable exponent with `1 < p⁻ ≤ p⁺ < ∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentField {
    grid: Grid,
    p: Arc<Vec<f64>>,
    /// Cached conjugate `p / (p - 1)`; [`ExponentField::conjugate`] swaps the
    /// two, so conjugating twice returns the original values bit for bit.
    conj: Arc<Vec<f64>>,
    p_inf: f64,
    conj_inf: f64,
    descriptor: String,
}

impl ExponentField {
    pub fn new(grid: &Grid, values: Vec<f64>, p_inf: f64) -> Result<Self> {
        Self::with_descriptor(grid, values, p_inf, "array".to_string())
    }

    fn with_descriptor(
        grid: &Grid,
        values: Vec<f64>,
        p_inf: f64,
        descriptor: String,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(format!(
                "exponent has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v.is_finite() && v > 1.0))
        {
            return Err(Error::param(format!(
                "exponent must lie in (1, inf); found {v} at point {i}"
            )));
        }
        if !(p_inf.is_finite() && p_inf > 1.0) {
            return Err(Error::param(format!("p_inf must lie in (1, inf); got {p_inf}")));
        }
        let conj = values.iter().map(|&p| conjugate_exponent(p)).collect();
        Ok(ExponentField {
            grid: grid.clone(),
            p: Arc::new(values),
            conj: Arc::new(conj),
            p_inf,
            conj_inf: conjugate_exponent(p_inf),
            descriptor,
        })
    }

    pub fn constant(grid: &Grid, p0: f64) -> Result<Self> {
        Self::with_descriptor(grid, vec![p0; grid.len()], p0, format!("const:{p0}"))
    }

    /// `p(x) = a + b / ln(e + |x - x0|)`, with `p_inf = a`.
    pub fn radial(grid: &Grid, a: f64, b: f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| a + b / (std::f64::consts::E + grid.distance_from_center(i)).ln())
            .collect();
        Self::with_descriptor(grid, values, a, format!("radial:{a},{b}"))
    }

    /// Builds from a descriptor. File exponents take `p_inf` from the point
    /// farthest from the center.
    pub fn from_spec(grid: &Grid, spec: &FieldSpec) -> Result<Self> {
        match spec {
            FieldSpec::Const(p) => Self::constant(grid, *p),
            FieldSpec::Radial { a, b } => Self::radial(grid, *a, *b),
            FieldSpec::File(path) => {
                let f = crate::gridio::read_any(path, Some(grid))?;
                let far = (0..grid.len())
                    .max_by(|&a, &b| {
                        grid.distance_from_center(a)
                            .total_cmp(&grid.distance_from_center(b))
                            .then(b.cmp(&a))
                    })
                    .unwrap_or(0);
                let p_inf = f.values()[far];
                Self::with_descriptor(grid, f.into_values(), p_inf, spec.to_string())
            }
            other => Err(Error::param(format!("'{other}' is not an exponent spec"))),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn p_minus(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn p_plus(&self) -> f64 {
        self.p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn p_inf(&self) -> f64 {
        self.p_inf
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn is_constant(&self) -> bool {
        self.p.iter().all(|&p| p == self.p[0])
    }

    /// Pointwise conjugate `p' = p / (p - 1)`.
    pub fn conjugate(&self) -> ExponentField {
        let descriptor = match self.descriptor.strip_prefix("conj(") {
            Some(inner) => inner[..inner.len() - 1].to_string(),
            None => format!("conj({})", self.descriptor),
        };
        ExponentField {
            grid: self.grid.clone(),
            p: self.conj.clone(),
            conj: self.p.clone(),
            p_inf: self.conj_inf,
            conj_inf: self.p_inf,
            descriptor,
        }
    }

    /// Values of the cached conjugate.
    pub fn conjugate_values(&self) -> &[f64] {
        &self.conj
    }

    /// `s · p(·)`; fails when the result leaves `(1, ∞)`.
    pub fn scaled(&self, s: f64) -> Result<ExponentField> {
        Self::with_descriptor(
            &self.grid,
            self.p.iter().map(|&p| s * p).collect::<Vec<_>>(),
            s * self.p_inf,
            format!("{s}*({})", self.descriptor),
        )
    }
}

fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `h^d Σ (|f| / λ)^{p(x)}`.
pub fn modular(f: &GridFunction, p: &ExponentField, lambda: f64) -> Result<f64> {
    f.grid().check_same(p.grid())?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("lambda must be positive (got {lambda})")));
    }
    let s: f64 = f
        .values()
        .iter()
        .zip(p.values())
        .map(|(&v, &e)| (v.abs() / lambda).powf(e))
        .sum();
    Ok(s * f.grid().cell_measure())
}

/// Luxemburg norm `inf{λ > 0 : modular(f/λ) ≤ 1}`.
pub fn luxemburg_norm(f: &GridFunction, p: &ExponentField) -> Result<f64> {
    f.grid().check_same(p.grid())?;
    Ok(luxemburg_raw(
        f.values().iter().zip(p.values()).map(|(&v, &e)| (v, e)),
        f.grid().cell_measure(),
        None,
    ))
}

/// `‖f w‖_{p(·)}`.
pub fn weighted_norm(f: &GridFunction, p: &ExponentField, w: &WeightField) -> Result<f64> {
    f.grid().check_same(w.grid())?;
    let fw = f.mul(w.field())?;
    luxemburg_norm(&fw, p)
}

/// Luxemburg norm of the `(value, exponent)` pairs with cell measure `cell`.
///
/// `hint`, if given, should be a lower bound of the norm (e.g. the norm of a
/// restriction); it only affects the starting point.
pub(crate) fn luxemburg_raw(
    pairs: impl Iterator<Item = (f64, f64)>,
    cell: f64,
    hint: Option<f64>,
) -> f64 {
    let terms: Vec<(f64, f64)> = pairs
        .filter(|(v, _)| *v != 0.0)
        .map(|(v, e)| (v.abs().ln(), e))
        .collect();
    if terms.is_empty() {
        return 0.0;
    }
    let ln_cell = cell.ln();
    let a_max = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let p_min = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);

    // g(t) and g'(t), evaluated with a shifted log-sum-exp.
    let eval = |t: f64| -> (f64, f64) {
        let m = terms
            .iter()
            .map(|&(a, e)| e * (a - t))
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut s, mut sp) = (0.0, 0.0);
        for &(a, e) in &terms {
            let w = (e * (a - t) - m).exp();
            s += w;
            sp += e * w;
        }
        (ln_cell + m + s.ln(), -sp / s)
    };

    // Left end: the spec bracket ‖f‖_∞ (h^d)^{1/p⁻} / 2, or the caller's hint,
    // pushed left until g ≥ 0.
    let mut t = match hint {
        Some(h) if h > 0.0 && h.is_finite() => h.ln(),
        _ => a_max + ln_cell / p_min - std::f64::consts::LN_2,
    };
    let (mut g, mut dg) = eval(t);
    while g < 0.0 {
        t -= std::f64::consts::LN_2;
        (g, dg) = eval(t);
    }
    for _ in 0..NEWTON_MAX_ITERS {
        if g == 0.0 {
            return t.exp();
        }
        let step = -g / dg;
        let next = t + step;
        let (gn, dgn) = eval(next);
        if gn < 0.0 {
            // Rounding overshoot: the root sits in [t, next].
            return bisect_log(&eval, t, next).exp();
        }
        t = next;
        g = gn;
        dg = dgn;
        if step.abs() <= ROOT_REL_TOL * t.abs().max(1.0) {
            return t.exp();
        }
    }
    // Fallback: bracket to the right and bisect.
    let mut hi = t + std::f64::consts::LN_2;
    while eval(hi).0 > 0.0 {
        hi += std::f64::consts::LN_2;
    }
    bisect_log(&eval, t, hi).exp()
}

fn bisect_log(eval: &impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid).0 >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Result of [`log_holder_check`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogHolderReport {
    pub local_constant: f64,
    pub decay_constant: f64,
    pub pairs_examined: usize,
    pub passes: bool,
}

/// Best constants in `|p(x)-p(y)| ln(e + 1/|x-y|) ≤ C` and
/// `|p(x)-p_∞| ln(e + |x|) ≤ C`, distances in length units.
pub fn log_holder_check(p: &ExponentField, threshold: f64) -> LogHolderReport {
    let grid = p.grid();
    let n = grid.len();
    let total = n * (n - 1) / 2;
    let stride = total.div_ceil(LOG_HOLDER_PAIR_BUDGET).max(1);
    let e = std::f64::consts::E;
    let vals = p.values();

    // Row i holds pairs (i, j>i) at linear positions start(i) .. start(i)+n-1-i.
    let row_start = |i: usize| i * n - i * (i + 1) / 2;
    let (local, pairs) = (0..n.saturating_sub(1))
        .into_par_iter()
        .map(|i| {
            let start = row_start(i);
            let first = start.div_ceil(stride) * stride;
            let mut best = 0.0f64;
            let mut count = 0usize;
            let mut k = first;
            while k < start + (n - 1 - i) {
                let j = i + 1 + (k - start);
                let dist = grid.distance(i, j);
                let c = (vals[i] - vals[j]).abs() * (e + 1.0 / dist).ln();
                best = best.max(c);
                count += 1;
                k += stride;
            }
            (best, count)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));

    let decay = (0..n)
        .map(|i| (vals[i] - p.p_inf()).abs() * (e + grid.distance_from_center(i)).ln())
        .fold(0.0f64, f64::max);
    LogHolderReport {
        local_constant: local,
        decay_constant: decay,
        pairs_examined: pairs,
        passes: local <= threshold && decay <= threshold,
    }
}

/// `‖fg‖_{s(·)} / (‖f‖_{p(·)} ‖g‖_{q(·)})`, requiring `1/s = 1/p + 1/q`.
pub fn holder_product_check(
    f: &GridFunction,
    g: &GridFunction,
    p: &ExponentField,
    q: &ExponentField,
    s: &ExponentField,
) -> Result<f64> {
    for other in [g.grid(), p.grid(), q.grid(), s.grid()] {
        f.grid().check_same(other)?;
    }
    let residual = (0..f.grid().len())
        .map(|i| (1.0 / s.values()[i] - 1.0 / p.values()[i] - 1.0 / q.values()[i]).abs())
        .fold(0.0f64, f64::max);
    if residual > 1e-9 {
        return Err(Error::ExponentRelation {
            max_residual: residual,
        });
    }
    let denom = luxemburg_norm(f, p)? * luxemburg_norm(g, q)?;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(luxemburg_norm(&f.mul(g)?, s)? / denom)
}

/// Number of random perturbations added to the near-extremizer in
/// [`dual_norm_estimate`].
pub const DUAL_PERTURBATIONS: usize = 32;
const DUAL_SEED: u64 = 0x0d0a_1e57;

/// `sup |∫ f g|` over a finite family of `g` with `‖g w⁻¹‖_{p'(·)} ≤ 1`.
///
/// The family is the near-extremizer `g* = sign(f) |f w / λ|^{p-1} w` (with
/// `λ = ‖f w‖_p`), normalized, plus [`DUAL_PERTURBATIONS`] multiplicative
/// perturbations `g* (1 + u/2)`, `u ~ U[-1, 1]`, each renormalized.
pub fn dual_norm_estimate(f: &GridFunction, p: &ExponentField, w: &WeightField) -> Result<f64> {
    f.grid().check_same(p.grid())?;
    f.grid().check_same(w.grid())?;
    let fw = f.mul(w.field())?;
    let lambda = luxemburg_norm(&fw, p)?;
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let pc = p.conjugate();
    let cell = f.grid().cell_measure();
    // G = g / w lives in L^{p'}; ∫ f g = ∫ (f w) G.
    let base: Vec<f64> = fw
        .values()
        .iter()
        .zip(p.values())
        .map(|(&v, &e)| v.signum() * (v.abs() / lambda).powf(e - 1.0))
        .collect();
    let pairing = |gv: &[f64]| -> f64 {
        let norm = luxemburg_raw(gv.iter().copied().zip(pc.values().iter().copied()), cell, None);
        if norm == 0.0 {
            return 0.0;
        }
        let s: f64 = fw.values().iter().zip(gv).map(|(a, b)| a * b).sum();
        (s * cell / norm).abs()
    };
    let mut best = pairing(&base);
    let mut rng = ChaCha8Rng::seed_from_u64(DUAL_SEED);
    let mut trial = vec![0.0; base.len()];
    for _ in 0..DUAL_PERTURBATIONS {
        for (t, &b) in trial.iter_mut().zip(&base) {
            *t = b * (1.0 + 0.5 * rng.random_range(-1.0..=1.0));
        }
        best = best.max(pairing(&trial));
    }
    Ok(best)
}

/// `sup_{t>0} t |{|f| > t}|^{1/r}`, exact over the level sets.
pub fn weak_quasinorm(f: &GridFunction, r: f64) -> Result<f64> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::param(format!("weak exponent must exceed 1 (got {r})")));
    }
    let mut v: Vec<f64> = f
        .values()
        .iter()
        .map(|x| x.abs())
        .filter(|&x| x > 0.0)
        .collect();
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    let cell = f.grid().cell_measure();
    let mut best = 0.0f64;
    let mut k = 0;
    while k < v.len() {
        // For t just below v[k], the level set is every value ≥ v[k].
        let mut end = k + 1;
        while end < v.len() && v[end] == v[k] {
            end += 1;
        }
        best = best.max(v[k] * (end as f64 * cell).powf(1.0 / r));
        k = end;
    }
    Ok(best)
}
