//! Weights and Muckenhoupt-type constants.
//!
//! Every estimator evaluates a per-ball quantity over a [`BallFamily`] and
//! reports the supremum together with the maximizing ball. The rho-adapted
//! classes divide by `(1 + r/ρ(x))^θ`; per-ball products are cached in
//! [`BallProducts`] so θ sweeps cost one pass.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{luxemburg_raw, ExponentField};
use crate::grid::{Grid, GridFunction};
use crate::maximal::BallFamily;
use crate::potential::CriticalRadiusField;
use crate::spec::FieldSpec;

/// A strictly positive, finite weight with its reciprocal.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightField {
    values: GridFunction,
    inverse: GridFunction,
    descriptor: String,
}

impl WeightField {
    pub fn new(values: GridFunction, descriptor: impl Into<String>) -> Result<Self> {
        if let Some((index, &value)) = values
            .values()
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::NonPositiveWeight { index, value });
        }
        let inverse = values.map(|v| 1.0 / v);
        if let Some((index, _)) = inverse
            .values()
            .iter()
            .enumerate()
            .find(|(_, &v)| !v.is_finite())
        {
            return Err(Error::NonPositiveWeight {
                index,
                value: values.values()[index],
            });
        }
        Ok(WeightField {
            values,
            inverse,
            descriptor: descriptor.into(),
        })
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(GridFunction::constant(grid, c), format!("const:{c}"))
    }

    /// `(1 + |x - center|)^a`.
    pub fn power(grid: &Grid, a: f64, center: usize) -> Self {
        let v = GridFunction::from_fn(grid, |i| (1.0 + grid.distance(i, center)).powf(a));
        Self::new(v, format!("power:{a}")).expect("power weights are positive")
    }

    /// `exp(a |x - center|)`, the out-of-class surrogate used by negative
    /// controls.
    pub fn exponential(grid: &Grid, a: f64, center: usize) -> Result<Self> {
        let v = GridFunction::from_fn(grid, |i| (a * grid.distance(i, center)).exp());
        Self::new(v, format!("exp:{a}"))
    }

    pub fn from_spec(grid: &Grid, spec: &FieldSpec) -> Result<Self> {
        let x0 = grid.center_index();
        match spec {
            FieldSpec::Const(c) => Self::constant(grid, *c),
            FieldSpec::Power(a) => Ok(Self::power(grid, *a, x0)),
            FieldSpec::Exp(a) => Self::exponential(grid, *a, x0),
            FieldSpec::File(path) => {
                Self::new(crate::gridio::read_any(path, Some(grid))?, spec.to_string())
            }
            other => Err(Error::param(format!("'{other}' is not a weight spec"))),
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

    /// `w⁻¹`; inverting twice returns the original values exactly.
    pub fn inverse(&self) -> WeightField {
        WeightField {
            values: self.inverse.clone(),
            inverse: self.values.clone(),
            descriptor: match self
                .descriptor
                .strip_prefix("inv(")
                .and_then(|d| d.strip_suffix(')'))
            {
                Some(inner) => inner.to_string(),
                None => format!("inv({})", self.descriptor),
            },
        }
    }

    /// `w^δ`.
    pub fn powf(&self, delta: f64) -> Result<WeightField> {
        Self::new(
            self.values.map(|v| v.powf(delta)),
            format!("({})^{delta}", self.descriptor),
        )
    }
}

/// `(1 + |x - center|)^a`.
pub fn power_weight(grid: &Grid, a: f64, center: usize) -> WeightField {
    WeightField::power(grid, a, center)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightClass {
    Ap,
    A1rho,
    Aprho,
    Apvar,
    #[serde(rename = "Apvar_rho")]
    ApvarRho,
    #[serde(rename = "Apvar_loc")]
    ApvarLoc,
}

impl fmt::Display for WeightClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightClass::Ap => "Ap",
            WeightClass::A1rho => "A1rho",
            WeightClass::Aprho => "Aprho",
            WeightClass::Apvar => "Apvar",
            WeightClass::ApvarRho => "Apvar_rho",
            WeightClass::ApvarLoc => "Apvar_loc",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstBall {
    pub center: usize,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightClassReport {
    pub class_tag: WeightClass,
    pub theta: f64,
    pub constant: f64,
    pub ball_count: usize,
    pub worst_ball: WorstBall,
}

/// Per-ball values (before the θ divisor) for every ball of a family.
#[derive(Clone, Debug)]
pub struct BallProducts {
    class_tag: WeightClass,
    family: BallFamily,
    /// Indexed `[center][k]` with `k < family.radii_at(center)`.
    values: Vec<Vec<f64>>,
}

impl BallProducts {
    fn build<F>(class_tag: WeightClass, family: &BallFamily, per_center: F) -> Self
    where
        F: Fn(usize, usize, &mut Vec<f64>) + Sync,
    {
        let values = (0..family.grid().len())
            .into_par_iter()
            .map(|c| {
                let mut out = Vec::with_capacity(family.radii_at(c));
                per_center(c, family.radii_at(c), &mut out);
                out
            })
            .collect();
        BallProducts {
            class_tag,
            family: family.clone(),
            values,
        }
    }

    /// Supremum of `value / (1 + r/ρ(x))^θ`. Ties go to the smaller radius,
    /// then the lower center index.
    pub fn report(&self, rho: Option<&CriticalRadiusField>, theta: f64) -> WeightClassReport {
        let ladder = self.family.grid().ladder();
        let mut best = (f64::NEG_INFINITY, usize::MAX, 0usize);
        let mut count = 0;
        for (c, vals) in self.values.iter().enumerate() {
            let rx = rho.map(|r| r.at(c));
            for (k, &v) in vals.iter().enumerate() {
                count += 1;
                let value = match rx {
                    Some(rx) if theta != 0.0 => v / (1.0 + ladder[k] / rx).powf(theta),
                    _ => v,
                };
                if value > best.0 || (value == best.0 && k < best.1) {
                    best = (value, k, c);
                }
            }
        }
        WeightClassReport {
            class_tag: self.class_tag,
            theta,
            constant: best.0,
            ball_count: count,
            worst_ball: WorstBall {
                center: best.2,
                radius: ladder[best.1.min(ladder.len() - 1)],
            },
        }
    }

    pub fn family(&self) -> &BallFamily {
        &self.family
    }
}

/// θ ladder `{0, 0.5, 1, …, 8}` used by sweeps.
pub fn theta_ladder() -> Vec<f64> {
    (0..=16).map(|i| 0.5 * i as f64).collect()
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("p must exceed 1 (got {p})")))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("theta must be non-negative (got {theta})")))
    }
}

/// Sums of `a` and `b` over every admitted ball at `center`.
fn ladder_pair_sums(grid: &Grid, a: &[f64], b: &[f64], center: usize, kk: usize) -> Vec<(f64, f64)> {
    let counts = grid.ladder_counts();
    let mut out = Vec::with_capacity(kk);
    let (mut sa, mut sb) = (0.0, 0.0);
    let mut k = 0;
    grid.walk(center, counts[kk - 1], |pos, idx| {
        sa += a[idx];
        sb += b[idx];
        while k < kk && counts[k] == pos + 1 {
            out.push((sa, sb));
            k += 1;
        }
    });
    out
}

/// Classical `A_p` products `(∫_B w)^{1/p} (∫_B w^{-1/(p-1)})^{1/p'} / |B|`.
pub fn ap_products(w: &WeightField, p: f64, family: &BallFamily) -> Result<BallProducts> {
    check_p(p)?;
    w.grid().check_same(family.grid())?;
    let grid = w.grid();
    let sigma: Vec<f64> = w.values().iter().map(|v| v.powf(-1.0 / (p - 1.0))).collect();
    let cell = grid.cell_measure();
    let counts = grid.ladder_counts();
    let pp = p / (p - 1.0);
    Ok(BallProducts::build(WeightClass::Ap, family, |c, kk, out| {
        for (k, (sw, ss)) in ladder_pair_sums(grid, w.values(), &sigma, c, kk)
            .into_iter()
            .enumerate()
        {
            let measure = counts[k] as f64 * cell;
            out.push((sw * cell).powf(1.0 / p) * (ss * cell).powf(1.0 / pp) / measure);
        }
    }))
}

pub fn ap_constant(w: &WeightField, p: f64, family: &BallFamily) -> Result<WeightClassReport> {
    Ok(ap_products(w, p, family)?.report(None, 0.0))
}

/// `sup [avg_B w] / [(1 + r/ρ(x))^θ min_B w]`.
pub fn a1_rho_constant(
    w: &WeightField,
    rho: &CriticalRadiusField,
    theta: f64,
    family: &BallFamily,
) -> Result<WeightClassReport> {
    check_theta(theta)?;
    Ok(a1_products(w, family)?.report(Some(rho), theta))
}

pub fn a1_products(w: &WeightField, family: &BallFamily) -> Result<BallProducts> {
    w.grid().check_same(family.grid())?;
    let grid = w.grid();
    let counts = grid.ladder_counts();
    let wv = w.values();
    Ok(BallProducts::build(WeightClass::A1rho, family, |c, kk, out| {
        let (mut s, mut m) = (0.0, f64::INFINITY);
        let mut k = 0;
        grid.walk(c, counts[kk - 1], |pos, idx| {
            s += wv[idx];
            m = m.min(wv[idx]);
            while k < kk && counts[k] == pos + 1 {
                out.push(s / counts[k] as f64 / m);
                k += 1;
            }
        });
    }))
}

/// `A_p^ρ`: the `A_p` product over `|B| (1 + r/ρ(x))^θ`.
pub fn ap_rho_constant(
    w: &WeightField,
    rho: &CriticalRadiusField,
    p: f64,
    theta: f64,
    family: &BallFamily,
) -> Result<WeightClassReport> {
    check_theta(theta)?;
    let mut r = ap_products(w, p, family)?.report(Some(rho), theta);
    r.class_tag = WeightClass::Aprho;
    Ok(r)
}

/// Variable-exponent products `‖w χ_B‖_{p(·)} ‖w⁻¹ χ_B‖_{p'(·)} / |B|`.
pub fn apvar_products(
    w: &WeightField,
    p: &ExponentField,
    family: &BallFamily,
) -> Result<BallProducts> {
    w.grid().check_same(family.grid())?;
    w.grid().check_same(p.grid())?;
    let grid = w.grid();
    let cell = grid.cell_measure();
    let counts = grid.ladder_counts();
    let wv = w.values();
    // The stored inverse keeps (w, p) ↔ (w⁻¹, p') an exact symmetry.
    let wi = w.inverse.values();
    let pv = p.values();
    let pc = p.conjugate_values();
    Ok(BallProducts::build(WeightClass::Apvar, family, |c, kk, out| {
        let mut pts = Vec::with_capacity(counts[kk - 1]);
        grid.walk(c, counts[kk - 1], |_, idx| pts.push(idx));
        let (mut hint_w, mut hint_i) = (None, None);
        for (k, &m) in counts.iter().enumerate().take(kk) {
            let members = &pts[..m];
            let nw = luxemburg_raw(members.iter().map(|&i| (wv[i], pv[i])), cell, hint_w);
            let ni = luxemburg_raw(members.iter().map(|&i| (wi[i], pc[i])), cell, hint_i);
            hint_w = Some(nw);
            hint_i = Some(ni);
            out.push(nw * ni / (counts[k] as f64 * cell));
        }
    }))
}

pub fn apvar_constant(
    w: &WeightField,
    p: &ExponentField,
    family: &BallFamily,
) -> Result<WeightClassReport> {
    Ok(apvar_products(w, p, family)?.report(None, 0.0))
}

pub fn apvar_rho_constant(
    w: &WeightField,
    p: &ExponentField,
    rho: &CriticalRadiusField,
    theta: f64,
    family: &BallFamily,
) -> Result<WeightClassReport> {
    check_theta(theta)?;
    let mut r = apvar_products(w, p, family)?.report(Some(rho), theta);
    r.class_tag = WeightClass::ApvarRho;
    Ok(r)
}

/// `A_{p(·)}^ρ` constants along a θ sweep, from one pass over the family.
pub fn apvar_rho_sweep(
    w: &WeightField,
    p: &ExponentField,
    rho: &CriticalRadiusField,
    thetas: &[f64],
    family: &BallFamily,
) -> Result<Vec<WeightClassReport>> {
    for &t in thetas {
        check_theta(t)?;
    }
    let products = apvar_products(w, p, family)?;
    Ok(thetas
        .iter()
        .map(|&t| {
            let mut r = products.report(Some(rho), t);
            r.class_tag = WeightClass::ApvarRho;
            r
        })
        .collect())
}

/// `A_{p(·)}` restricted to the critical family `𝔅_{βρ}`.
pub fn apvar_loc_constant(
    w: &WeightField,
    p: &ExponentField,
    family: &BallFamily,
) -> Result<WeightClassReport> {
    if family.rho().is_none() {
        return Err(Error::param("the local class needs a critical ball family"));
    }
    let mut r = apvar_products(w, p, family)?.report(None, 0.0);
    r.class_tag = WeightClass::ApvarLoc;
    Ok(r)
}

/// Smallest θ on the sweep whose constant is at most `threshold`.
pub fn min_feasible_theta(reports: &[WeightClassReport], threshold: f64) -> Option<f64> {
    reports
        .iter()
        .filter(|r| r.constant <= threshold)
        .map(|r| r.theta)
        .reduce(f64::min)
}
