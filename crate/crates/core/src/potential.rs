//! Potentials, reverse-Hölder constants and the critical radius function.
//!
//! `ρ(x) = sup{ r > 0 : r^{2-d} ∫_{B(x,r)} V ≤ 1 }`, evaluated on the radius
//! ladder with one geometric bisection step between neighbours.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::spec::FieldSpec;

/// A non-negative, not identically zero potential.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    values: GridFunction,
    descriptor: String,
}

impl PotentialField {
    pub fn new(values: GridFunction, descriptor: impl Into<String>) -> Result<Self> {
        if let Some((i, &v)) = values.values().iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::param(format!("potential is negative ({v}) at point {i}")));
        }
        if values.is_zero() {
            return Err(Error::param("potential vanishes identically"));
        }
        Ok(PotentialField {
            values,
            descriptor: descriptor.into(),
        })
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(GridFunction::constant(grid, c), format!("const:{c}"))
    }

    /// `|x - x0|^a` around the grid center.
    pub fn power(grid: &Grid, a: f64) -> Result<Self> {
        let x0 = grid.center_index();
        let v = GridFunction::from_fn(grid, |i| {
            let r = grid.distance(i, x0);
            if r == 0.0 {
                if a > 0.0 {
                    0.0
                } else if a == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                r.powf(a)
            }
        });
        if !v.values().iter().all(|x| x.is_finite()) {
            return Err(Error::param("power potential with a < 0 is singular at the center"));
        }
        Self::new(v, format!("power:{a}"))
    }

    /// `|x - x0|^2`.
    pub fn oscillator(grid: &Grid) -> Result<Self> {
        let mut v = Self::power(grid, 2.0)?;
        v.descriptor = "oscillator".into();
        Ok(v)
    }

    /// `c` where the axis-0 coordinate is below `n/2`, zero elsewhere.
    pub fn halfspace(grid: &Grid, c: f64) -> Result<Self> {
        let half = grid.n_per_axis() / 2;
        let v = GridFunction::from_fn(grid, |i| if grid.coords(i)[0] < half { c } else { 0.0 });
        Self::new(v, format!("halfspace:{c}"))
    }

    pub fn from_spec(grid: &Grid, spec: &FieldSpec) -> Result<Self> {
        match spec {
            FieldSpec::Const(c) => Self::constant(grid, *c),
            FieldSpec::Power(a) => Self::power(grid, *a),
            FieldSpec::Oscillator => Self::oscillator(grid),
            FieldSpec::Halfspace(c) => Self::halfspace(grid, *c),
            FieldSpec::File(path) => {
                Self::new(crate::gridio::read_any(path, Some(grid))?, spec.to_string())
            }
            other => Err(Error::param(format!("'{other}' is not a potential spec"))),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.values.grid()
    }

    pub fn field(&self) -> &GridFunction {
        &self.values
    }

    pub fn values(&self) -> &[f64] {
        self.values.values()
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    /// `V + c` for `c ≥ 0`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Self::new(self.values.map(|v| v + c), format!("{}+{c}", self.descriptor))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.scale(c), format!("{c}*{}", self.descriptor))
    }
}

/// `ρ` on the grid with cap/floor bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalRadiusField {
    rho: GridFunction,
    capped: Vec<bool>,
    floored: Vec<bool>,
    /// Outside the `d > 2` regime the defining formula is applied literally.
    low_dimension: bool,
}

impl CriticalRadiusField {
    /// Wraps externally supplied radii. Values above the cap are clamped and
    /// flagged.
    pub fn from_values(rho: GridFunction) -> Result<Self> {
        let grid = rho.grid().clone();
        let cap = grid.radius_cap();
        if let Some((i, &v)) = rho.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(Error::param(format!("critical radius must be positive; {v} at {i}")));
        }
        let capped: Vec<bool> = rho.values().iter().map(|&v| v >= cap).collect();
        let vals = rho.values().iter().map(|&v| v.min(cap)).collect();
        Ok(CriticalRadiusField {
            rho: GridFunction::new(grid.clone(), vals)?,
            floored: vec![false; capped.len()],
            capped,
            low_dimension: grid.dim() <= 2,
        })
    }

    pub fn constant(grid: &Grid, r: f64) -> Result<Self> {
        Self::from_values(GridFunction::constant(grid, r))
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn field(&self) -> &GridFunction {
        &self.rho
    }

    pub fn values(&self) -> &[f64] {
        self.rho.values()
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.rho.values()[idx]
    }

    pub fn capped(&self) -> &[bool] {
        &self.capped
    }

    /// Points where even the singleton ball has `F > 1`; `ρ` is set to `h/2`.
    pub fn floored(&self) -> &[bool] {
        &self.floored
    }

    pub fn capped_fraction(&self) -> f64 {
        self.capped.iter().filter(|&&c| c).count() as f64 / self.capped.len() as f64
    }

    pub fn floored_fraction(&self) -> f64 {
        self.floored.iter().filter(|&&c| c).count() as f64 / self.floored.len() as f64
    }

    pub fn low_dimension(&self) -> bool {
        self.low_dimension
    }

    /// `β ρ`, clamped to the cap.
    pub fn scaled(&self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param(format!("scale must be positive (got {beta})")));
        }
        let mut out = Self::from_values(self.rho.scale(beta))?;
        for (o, &f) in out.floored.iter_mut().zip(&self.floored) {
            *o = f;
        }
        Ok(out)
    }
}

/// Which balls [`rh_constant`] inspects: every `center_stride`-th center and
/// all ladder radii from `h` up to the cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BallSampling {
    pub center_stride: usize,
}

impl Default for BallSampling {
    fn default() -> Self {
        BallSampling { center_stride: 1 }
    }
}

/// `max_B (avg_B V^q)^{1/q} / avg_B V` over the sampled balls (0/0 → 1).
pub fn rh_constant(v: &PotentialField, q: f64, sampling: BallSampling) -> Result<f64> {
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::param(format!("reverse-Hölder exponent must exceed 1 (got {q})")));
    }
    let grid = v.grid();
    let vals = v.values();
    let vq: Vec<f64> = vals.iter().map(|x| x.powf(q)).collect();
    let ladder = grid.ladder();
    let counts = grid.ladder_counts();
    let h = grid.spacing();
    let first = ladder.iter().position(|&r| r >= h * (1.0 - 1e-12)).unwrap_or(0);
    let max_count = *counts.last().expect("ladder is never empty");
    let stride = sampling.center_stride.max(1);

    let best = (0..grid.len())
        .into_par_iter()
        .filter(|c| c % stride == 0)
        .map(|center| {
            let (mut s1, mut sq) = (0.0, 0.0);
            let mut k = first;
            let mut best = 0.0f64;
            grid.walk(center, max_count, |pos, idx| {
                s1 += vals[idx];
                sq += vq[idx];
                while k < counts.len() && counts[k] == pos + 1 {
                    let m = (pos + 1) as f64;
                    let ratio = if s1 == 0.0 {
                        1.0
                    } else {
                        (sq / m).powf(1.0 / q) / (s1 / m)
                    };
                    best = best.max(ratio);
                    k += 1;
                }
            });
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Upper bound on `F(x, r')` for all `r' ≥ r` is not available, but a lower
/// bound is: `S(r) · min_{r' ∈ [r, cap]} r'^{2-d}`. Once it exceeds one, no
/// larger radius can satisfy `F ≤ 1`.
fn f_lower_bound_factor(dim: usize, r: f64, cap: f64) -> f64 {
    if dim >= 2 {
        cap.powi(2 - dim as i32)
    } else {
        r
    }
}

/// Computes `ρ` from `V` on the ladder, refined by one geometric bisection.
pub fn critical_radius(v: &PotentialField) -> CriticalRadiusField {
    let grid = v.grid();
    let dim = grid.dim();
    let vals = v.values();
    let cell = grid.cell_measure();
    let ladder = grid.ladder();
    let counts = grid.ladder_counts();
    let cap = grid.radius_cap();
    let max_count = *counts.last().expect("ladder is never empty");
    let f_of = |r: f64, s: f64| r.powi(2 - dim as i32) * cell * s;

    let per_point: Vec<(f64, bool, bool)> = (0..grid.len())
        .into_par_iter()
        .map_init(Vec::new, |cum: &mut Vec<f64>, center| {
            // Cumulative sums along the offset walk, stopped early once F must
            // stay above one.
            cum.clear();
            let mut s = 0.0;
            let mut k = 0;
            let mut stop = false;
            grid.walk(center, max_count, |pos, idx| {
                if stop {
                    return;
                }
                s += vals[idx];
                cum.push(s);
                while k < counts.len() && counts[k] <= pos + 1 {
                    k += 1;
                }
                let r = grid.offset_distance(pos);
                if r > 0.0 && cell * s * f_lower_bound_factor(dim, r, cap) > 1.0 {
                    stop = true;
                }
            });
            let s_at = |count: usize| -> Option<f64> { cum.get(count - 1).copied() };

            let mut best: Option<usize> = None;
            for (k, (&r, &c)) in ladder.iter().zip(counts).enumerate() {
                match s_at(c) {
                    Some(s) if f_of(r, s) <= 1.0 => best = Some(k),
                    Some(_) => {}
                    None => break,
                }
            }
            match best {
                None => (ladder[0], false, true),
                Some(k) if k + 1 == ladder.len() => (ladder[k], true, false),
                Some(k) => {
                    let mid = (ladder[k] * ladder[k + 1]).sqrt();
                    let ok = s_at(grid.count_within(mid)).is_some_and(|s| f_of(mid, s) <= 1.0);
                    (if ok { mid } else { ladder[k] }, false, false)
                }
            }
        })
        .collect();

    let rho = per_point.iter().map(|t| t.0).collect();
    CriticalRadiusField {
        rho: GridFunction::from_raw(grid.clone(), rho),
        capped: per_point.iter().map(|t| t.1).collect(),
        floored: per_point.iter().map(|t| t.2).collect(),
        low_dimension: dim <= 2,
    }
}

/// `c` lattice `{1, 1.25, …, 16}` for [`verify_rho_bounds`].
pub fn c_lattice() -> Vec<f64> {
    (0..=60).map(|i| 1.0 + 0.25 * i as f64).collect()
}

/// `N` lattice `{1, 1.5, …, 12}` for [`verify_rho_bounds`].
pub fn n_lattice() -> Vec<f64> {
    (0..=22).map(|i| 1.0 + 0.5 * i as f64).collect()
}

/// Witness for the two-sided comparability of `ρ` at pairs of points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoBoundsReport {
    pub c_rho: f64,
    pub n_rho: f64,
    /// Position of `c_rho` in [`c_lattice`].
    pub c_index: usize,
    /// Position of `n_rho` in [`n_lattice`].
    pub n_index: usize,
    /// Worst relative slack; `≤ 0` means every sampled pair satisfies both bounds.
    pub max_violation: f64,
    pub pairs: usize,
}

/// Deterministic pair sample: all ordered pairs when they fit in the budget,
/// otherwise an R2 low-discrepancy sequence.
pub(crate) fn sample_pairs(n: usize, budget: usize) -> Vec<(usize, usize)> {
    if n * (n - 1) <= budget {
        return (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
    }
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_3;
    let mut out = Vec::with_capacity(budget);
    let mut k = 1u64;
    while out.len() < budget {
        let u = (0.5 + A1 * k as f64).fract();
        let v = (0.5 + A2 * k as f64).fract();
        let i = ((u * n as f64) as usize).min(n - 1);
        let j = ((v * n as f64) as usize).min(n - 1);
        if i != j {
            out.push((i, j));
        }
        k += 1;
    }
    out
}

/// Finds the smallest `N`, then smallest `c`, on the search lattice with
/// `c⁻¹ ρ(x)(1+|x-y|/ρ(x))^{-N} ≤ ρ(y) ≤ c ρ(x)(1+|x-y|/ρ(x))^{N/(N+1)}`
/// on every sampled pair.
pub fn verify_rho_bounds(rho: &CriticalRadiusField, pair_budget: usize) -> Result<RhoBoundsReport> {
    if pair_budget < 1000 {
        return Err(Error::param(format!("pair budget must be at least 1000 (got {pair_budget})")));
    }
    let grid = rho.grid();
    let r = rho.values();
    // (ln a, ln t) with a = ρ(y)/ρ(x), t = 1 + |x-y|/ρ(x).
    let logs: Vec<(f64, f64)> = sample_pairs(grid.len(), pair_budget)
        .into_iter()
        .map(|(x, y)| {
            let t = 1.0 + grid.distance(x, y) / r[x];
            ((r[y] / r[x]).ln(), t.ln())
        })
        .collect();
    let required_ln_c = |n: f64| -> f64 {
        let e = n / (n + 1.0);
        logs.iter()
            .map(|&(la, lt)| (la - e * lt).max(-la - n * lt))
            .fold(0.0f64, f64::max)
    };
    let violation = |c: f64, n: f64| -> f64 {
        let e = n / (n + 1.0);
        logs.iter()
            .map(|&(la, lt)| {
                let up = (la - e * lt - c.ln()).exp() - 1.0;
                let lo = (-la - n * lt - c.ln()).exp() - 1.0;
                up.max(lo)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let cs = c_lattice();
    let ns = n_lattice();
    let mut best_infeasible = (cs[cs.len() - 1], ns[0], f64::INFINITY);
    for (ni, &n) in ns.iter().enumerate() {
        let need = required_ln_c(n);
        if let Some(ci) = cs.iter().position(|&c| c.ln() >= need - 1e-12) {
            return Ok(RhoBoundsReport {
                c_rho: cs[ci],
                n_rho: n,
                c_index: ci,
                n_index: ni,
                max_violation: violation(cs[ci], n).min(0.0),
                pairs: logs.len(),
            });
        }
        let v = violation(cs[cs.len() - 1], n);
        if v < best_infeasible.2 {
            best_infeasible = (cs[cs.len() - 1], n, v);
        }
    }
    Err(Error::LatticeExhausted {
        c: best_infeasible.0,
        n: best_infeasible.1,
        violation: best_infeasible.2,
    })
}

/// `max |V(x)-V(y)| ρ(x)^{α+2} / |x-y|^α` over pairs with `0 < |x-y| < ρ(x)`.
pub fn local_smoothness_check(
    v: &PotentialField,
    rho: &CriticalRadiusField,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param(format!("alpha must lie in (0, 1] (got {alpha})")));
    }
    let grid = v.grid();
    grid.check_same(rho.grid())?;
    let vals = v.values();
    let best = (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let rx = rho.at(x);
            let count = grid.count_strictly_within(rx);
            let mut best = 0.0f64;
            grid.walk(x, count, |pos, y| {
                if pos == 0 {
                    return;
                }
                let d = grid.offset_distance(pos);
                best = best.max((vals[x] - vals[y]).abs() * rx.powf(alpha + 2.0) / d.powf(alpha));
            });
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}
