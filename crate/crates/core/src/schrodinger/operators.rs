//! The operator registry, predicted kernel types and boundedness rules.
//!
//! Gradients are forward differences `D_a`. Where `∇` stands to the right of
//! the formula (`L^{-1/2}∇`, `L^{-γ}∇V^{γ-1/2}`, …) the matrix used is the
//! literal adjoint `D_aᵀ = -(backward difference)`, so every registered
//! adjoint pair is an exact transpose pair.

use std::fmt;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{
    col_diff, forward_neighbors, matrix_function, row_diff, scale_cols, scale_rows,
    DiscreteOperator, MatrixFn,
};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::potential::PotentialField;

macro_rules! registry {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Registered operator names.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum OperatorName { $($variant),* }

        impl OperatorName {
            pub const ALL: &'static [OperatorName] = &[$(OperatorName::$variant),*];

            pub fn as_str(&self) -> &'static str {
                match self { $(OperatorName::$variant => $name),* }
            }

            pub fn parse(s: &str) -> Result<Self> {
                match s.trim() {
                    $($name => Ok(OperatorName::$variant),)*
                    other => Err(Error::Unknown { kind: "operator", name: other.to_string() }),
                }
            }
        }
    };
}

registry! {
    Identity => "identity",
    R1 => "R1",
    R1Adj => "R1*",
    R2 => "R2",
    R2Adj => "R2*",
    MGamma => "M_gamma",
    MGammaAdj => "M_gamma*",
    NGamma => "N_gamma",
    NGammaAdj => "N_gamma*",
    VHalfLinvHalf => "V_half_Linv_half",
    LinvHalfVHalf => "Linv_half_V_half",
    VLinv => "V_Linv",
    LinvV => "Linv_V",
    VHalfGradLinv => "V_half_grad_Linv",
    LinvGradVHalf => "Linv_grad_V_half",
    LIAlpha => "L_i_alpha",
    LIAlphaAdj => "L_i_alpha*",
}

impl OperatorName {
    /// The registered adjoint partner.
    pub fn adjoint(&self) -> OperatorName {
        use OperatorName::*;
        match self {
            Identity => Identity,
            R1 => R1Adj,
            R1Adj => R1,
            R2 => R2Adj,
            R2Adj => R2,
            MGamma => MGammaAdj,
            MGammaAdj => MGamma,
            NGamma => NGammaAdj,
            NGammaAdj => NGamma,
            VHalfLinvHalf => LinvHalfVHalf,
            LinvHalfVHalf => VHalfLinvHalf,
            VLinv => LinvV,
            LinvV => VLinv,
            VHalfGradLinv => LinvGradVHalf,
            LinvGradVHalf => VHalfGradLinv,
            LIAlpha => LIAlphaAdj,
            LIAlphaAdj => LIAlpha,
        }
    }

    /// Formula in words, for reports.
    pub fn formula(&self) -> &'static str {
        use OperatorName::*;
        match self {
            Identity => "I",
            R1 => "∇L^{-1/2}",
            R1Adj => "L^{-1/2}∇",
            R2 => "∇²L^{-1}",
            R2Adj => "L^{-1}∇²",
            MGamma => "L^{-γ}V^γ",
            MGammaAdj => "V^γL^{-γ}",
            NGamma => "L^{-γ}∇V^{γ-1/2}",
            NGammaAdj => "V^{γ-1/2}∇L^{-γ}",
            VHalfLinvHalf => "V^{1/2}L^{-1/2}",
            LinvHalfVHalf => "L^{-1/2}V^{1/2}",
            VLinv => "VL^{-1}",
            LinvV => "L^{-1}V",
            VHalfGradLinv => "V^{1/2}∇L^{-1}",
            LinvGradVHalf => "L^{-1}∇V^{1/2}",
            LIAlpha => "L^{iα}",
            LIAlphaAdj => "L^{-iα}",
        }
    }
}

impl fmt::Display for OperatorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Optional parameters: `γ` for `M_γ`/`N_γ`, `α` for `L^{iα}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams {
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for OperatorParams {
    fn default() -> Self {
        OperatorParams {
            gamma: 1.0,
            alpha: 1.0,
        }
    }
}

/// `v^e`, with the exact shortcuts `sqrt` and the identity.
fn vpow(v: &[f64], e: f64) -> Vec<f64> {
    if e == 1.0 {
        v.to_vec()
    } else if e == 0.5 {
        v.iter().map(|x| x.sqrt()).collect()
    } else {
        v.iter().map(|x| x.powf(e)).collect()
    }
}

fn check_gamma(name: OperatorName, gamma: f64, dim: usize) -> Result<()> {
    use OperatorName::*;
    let ok = match name {
        NGamma | NGammaAdj => gamma > 0.5 && gamma <= 1.0,
        MGamma | MGammaAdj => gamma > 0.0 && gamma < dim as f64 / 2.0,
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::param(format!(
            "gamma = {gamma} is outside the admissible range for {name}"
        )))
    }
}

/// Builds a registered operator from `V` and `L = build_l(V)`.
pub fn build_operator(
    name: OperatorName,
    params: &OperatorParams,
    v: &PotentialField,
    l: &DiscreteOperator,
) -> Result<DiscreteOperator> {
    use OperatorName::*;
    l.grid().check_same(v.grid())?;
    let grid = l.grid();
    check_gamma(name, params.gamma, grid.dim())?;
    if !params.alpha.is_finite() {
        return Err(Error::param("alpha must be finite"));
    }
    let h = grid.spacing();
    let fwd = forward_neighbors(grid);
    let vals = v.values();
    let func = |f: MatrixFn| -> Result<Mat<f64>> {
        Ok(matrix_function(l, f)?.matrices()[0].clone())
    };
    let tag = |base: &str| match name {
        MGamma | MGammaAdj | NGamma | NGammaAdj => format!("{base}(gamma={})", params.gamma),
        LIAlpha | LIAlphaAdj => format!("{base}(alpha={})", params.alpha),
        _ => base.to_string(),
    };

    let direct = |n: OperatorName| -> Result<(Vec<Mat<f64>>, bool)> {
        Ok(match n {
            Identity => (vec![Mat::<f64>::identity(grid.len(), grid.len())], false),
            R1 => {
                let m = func(MatrixFn::InvSqrt)?;
                (fwd.iter().map(|f| row_diff(&m, f, h)).collect(), false)
            }
            R2 => {
                let m = func(MatrixFn::Inv)?;
                let first: Vec<_> = fwd.iter().map(|f| row_diff(&m, f, h)).collect();
                let mut comps = Vec::with_capacity(fwd.len() * fwd.len());
                for fa in &fwd {
                    for mb in &first {
                        comps.push(row_diff(mb, fa, h));
                    }
                }
                (comps, false)
            }
            MGamma => {
                let m = func(MatrixFn::InvGamma(params.gamma))?;
                (vec![scale_cols(m, &vpow(vals, params.gamma))], false)
            }
            NGamma | LinvGradVHalf => {
                let gamma = if n == NGamma { params.gamma } else { 1.0 };
                let m = func(MatrixFn::InvGamma(gamma))?;
                let w = vpow(vals, gamma - 0.5);
                (fwd.iter().map(|f| scale_cols(col_diff(&m, f, h), &w)).collect(), false)
            }
            VHalfLinvHalf => (vec![scale_rows(func(MatrixFn::InvSqrt)?, &vpow(vals, 0.5))], false),
            VLinv => (vec![scale_rows(func(MatrixFn::Inv)?, vals)], false),
            VHalfGradLinv => {
                let m = func(MatrixFn::Inv)?;
                let w = vpow(vals, 0.5);
                (fwd.iter().map(|f| scale_rows(row_diff(&m, f, h), &w)).collect(), false)
            }
            LIAlpha => {
                let op = matrix_function(l, MatrixFn::PowerIAlpha(params.alpha))?;
                (op.matrices().to_vec(), true)
            }
            _ => unreachable!("adjoint names are built by transposition"),
        })
    };

    let is_primary = matches!(
        name,
        Identity | R1 | R2 | MGamma | NGamma | VHalfLinvHalf | VLinv | VHalfGradLinv
            | LinvGradVHalf | LIAlpha
    );
    if is_primary {
        let (comps, complex) = direct(name)?;
        Ok(l.derived(comps, complex, tag(name.as_str())))
    } else {
        let partner = name.adjoint();
        let (comps, complex) = direct(partner)?;
        let op = l.derived(comps, complex, String::new()).adjoint();
        Ok(l.derived(op.matrices().to_vec(), complex, tag(name.as_str())))
    }
}

/// Worst relative pairing defect `|⟨T_c f, g⟩ - ⟨f, T*_c g⟩|` over components
/// and input pairs, relative to `‖T_c f‖‖g‖ + ‖f‖‖T*_c g‖`.
pub fn adjoint_pairing_error(
    t: &DiscreteOperator,
    t_star: &DiscreteOperator,
    pairs: &[(GridFunction, GridFunction)],
) -> Result<f64> {
    if t.matrices().len() != t_star.matrices().len() || t.is_complex() != t_star.is_complex() {
        return Err(Error::param("operators do not have matching component structure"));
    }
    let mut worst = 0.0f64;
    for (f, g) in pairs {
        let tf = t.apply(f)?;
        let tsg = t_star.apply(g)?;
        for (c, (a, b)) in tf.iter().zip(&tsg).enumerate() {
            // For the imaginary part, ⟨Tf, g⟩ pairs with the conjugate.
            let sign = if t.is_complex() && c == 1 { -1.0 } else { 1.0 };
            let lhs = a.inner(g)?;
            let rhs = sign * f.inner(b)?;
            let scale = a.inner(a)?.sqrt() * g.inner(g)?.sqrt()
                + f.inner(f)?.sqrt() * b.inner(b)?.sqrt();
            if scale > 0.0 {
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// A kernel type `(s, δ)`; `s = None` is the pointwise type `(∞, δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SczType {
    pub s: Option<f64>,
    pub delta: f64,
}

impl SczType {
    fn new(s: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::param(format!("smoothness {delta} outside (0, 1]")));
        }
        if s.is_infinite() {
            return Ok(SczType { s: None, delta });
        }
        if !(s > 1.0) {
            return Err(Error::param(format!("kernel exponent {s} must exceed 1")));
        }
        Ok(SczType { s: Some(s), delta })
    }

    /// `s`, with `∞` for the pointwise type.
    pub fn s_value(&self) -> f64 {
        self.s.unwrap_or(f64::INFINITY)
    }

    /// `s'`; 1 for the pointwise type.
    pub fn s_conjugate(&self) -> f64 {
        match self.s {
            None => 1.0,
            Some(s) => s / (s - 1.0),
        }
    }
}

impl fmt::Display for SczType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.s {
            None => write!(f, "(∞, {})", self.delta),
            Some(s) => write!(f, "({s}, {})", self.delta),
        }
    }
}

/// `min{1, 2 - d/q}`.
fn smoothness(q: f64, d: f64) -> f64 {
    (2.0 - d / q).min(1.0)
}

/// Kernel type predicted for an operator whose kernel the theory types
/// directly. `extra` is `γ` for `M_γ`/`N_γ` and, for `R2`, the exponent `α`
/// of the local smoothness condition on `V`.
pub fn predicted_scz_type(
    name: OperatorName,
    q: f64,
    d: usize,
    extra: Option<f64>,
) -> Result<SczType> {
    use OperatorName::*;
    let df = d as f64;
    if !(q > df / 2.0) || q.is_nan() {
        return Err(Error::param(format!("q must exceed d/2 (got q = {q}, d = {d})")));
    }
    let uncovered = || Error::UncoveredType {
        operator: name.to_string(),
        q,
        d,
    };
    let delta = smoothness(q, df);
    let gamma = || -> Result<f64> {
        let g = extra.unwrap_or(1.0);
        check_gamma(name, g, d)?;
        Ok(g)
    };
    match name {
        Identity => SczType::new(f64::INFINITY, 1.0),
        R1 if q >= df => {
            let delta = 1.0 - df / q;
            if delta <= 0.0 {
                Err(uncovered())
            } else {
                SczType::new(f64::INFINITY, delta)
            }
        }
        R1Adj if q >= df => SczType::new(f64::INFINITY, 1.0),
        R1Adj => SczType::new(1.0 / (1.0 / q - 1.0 / df), delta),
        R2Adj => SczType::new(q, delta),
        R2 => match extra {
            Some(alpha) if alpha > 0.0 && alpha <= 1.0 => SczType::new(f64::INFINITY, alpha),
            _ => Err(uncovered()),
        },
        MGamma | LinvV => {
            let g = if name == LinvV { 1.0 } else { gamma()? };
            SczType::new(q / g, delta / 2.0)
        }
        NGamma | LinvGradVHalf => {
            let g = if name == LinvGradVHalf { 1.0 } else { gamma()? };
            let inv_s = (1.0 / q - 1.0 / df).max(0.0) + (2.0 * g - 1.0) / (2.0 * q);
            SczType::new(1.0 / inv_s, delta)
        }
        LinvHalfVHalf => SczType::new(2.0 * q, delta),
        LIAlpha | LIAlphaAdj => SczType::new(f64::INFINITY, delta),
        _ => Err(uncovered()),
    }
}

/// How boundedness on `L^{p(·)}(w)` follows for an operator: directly from
/// its own type, or as the adjoint of a typed operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Boundedness {
    /// Needs `p⁻ > s'` and `w^{s'} ∈ A^ρ_{p(·)/s'}`.
    Direct(SczType),
    /// Needs `p⁺ < s` and `w^{-s'} ∈ A^ρ_{p'(·)/s'}`.
    Adjoint(SczType),
}

impl Boundedness {
    pub fn scz_type(&self) -> SczType {
        match self {
            Boundedness::Direct(t) | Boundedness::Adjoint(t) => *t,
        }
    }

    /// Whether an exponent with bounds `[p⁻, p⁺]` is admissible.
    pub fn admits(&self, p_minus: f64, p_plus: f64) -> bool {
        let t = self.scz_type();
        match self {
            Boundedness::Direct(_) => p_minus > t.s_conjugate(),
            Boundedness::Adjoint(_) => p_minus > 1.0 && p_plus < t.s_value(),
        }
    }

    /// `(e, s')` such that the weight condition is on `w^e` in the class with
    /// exponent `p/s'` (direct) or `p'/s'` (adjoint).
    pub fn weight_power(&self) -> (f64, f64) {
        let sp = self.scz_type().s_conjugate();
        match self {
            Boundedness::Direct(_) => (sp, sp),
            Boundedness::Adjoint(t) if t.s.is_none() => (1.0, 1.0),
            Boundedness::Adjoint(_) => (-sp, sp),
        }
    }
}

/// The route to boundedness for `name` when `V ∈ RH_q`.
pub fn boundedness_rule(
    name: OperatorName,
    q: f64,
    d: usize,
    extra: Option<f64>,
) -> Result<Boundedness> {
    match predicted_scz_type(name, q, d, extra) {
        Ok(t) => Ok(Boundedness::Direct(t)),
        Err(Error::UncoveredType { .. }) => {
            let partner = name.adjoint();
            let extra = match name {
                OperatorName::R2 => None,
                _ => extra,
            };
            predicted_scz_type(partner, q, d, extra)
                .map(Boundedness::Adjoint)
                .map_err(|_| Error::UncoveredType {
                    operator: name.to_string(),
                    q,
                    d,
                })
        }
        Err(e) => Err(e),
    }
}
