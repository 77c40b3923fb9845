//! Localized maximal operators.
//!
//! All suprema run over ladder radii. A [`BallFamily`] stores, per center, how
//! many ladder radii it admits: every radius for the full ladder family, and
//! the radii `r ≤ β ρ(x)` (at least the singleton `h/2`) for the critical
//! family `𝔅_{βρ}`. Its largest ball at `x` is the critical ball `B(x, βρ(x))`
//! snapped to the ladder.
//!
//! Uncentered suprema (`x ∈ B`) are computed by a scatter: walking the balls of
//! one center nearest-first, the point at walk position `j` lies in exactly the
//! balls whose count exceeds `j`, so it receives the suffix maximum of the
//! per-ball values.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::potential::CriticalRadiusField;
use crate::weights::WeightField;

/// Relative slack when comparing ladder radii with `β ρ(x)`.
const FAMILY_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct BallFamily {
    grid: Grid,
    /// Number of admitted ladder radii per center (always ≥ 1).
    kmax: Vec<u8>,
    rho: Option<CriticalRadiusField>,
    beta: f64,
}

impl BallFamily {
    /// All centers with every ladder radius up to the cap.
    pub fn ladder(grid: &Grid) -> Self {
        BallFamily {
            grid: grid.clone(),
            kmax: vec![grid.ladder().len() as u8; grid.len()],
            rho: None,
            beta: f64::INFINITY,
        }
    }

    /// `𝔅_{βρ}`: ladder radii `r ≤ β ρ(x)` at each center `x`.
    pub fn critical(rho: &CriticalRadiusField, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param(format!("family scale must be positive (got {beta})")));
        }
        let grid = rho.grid().clone();
        let ladder = grid.ladder();
        let kmax = rho
            .values()
            .iter()
            .map(|&r| {
                let limit = beta * r * (1.0 + FAMILY_EPS);
                ladder.partition_point(|&lr| lr <= limit).max(1) as u8
            })
            .collect();
        Ok(BallFamily {
            grid,
            kmax,
            rho: Some(rho.clone()),
            beta,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rho(&self) -> Option<&CriticalRadiusField> {
        self.rho.as_ref()
    }

    /// `β`; infinite for the full ladder family.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Number of ladder radii admitted at `center`.
    pub fn radii_at(&self, center: usize) -> usize {
        self.kmax[center] as usize
    }

    /// Radius of the largest admitted ball at `center`.
    pub fn critical_radius_at(&self, center: usize) -> f64 {
        self.grid.ladder()[self.radii_at(center) - 1]
    }

    pub fn ball_count(&self) -> usize {
        self.kmax.iter().map(|&k| k as usize).sum()
    }

    /// Every `(center, radius)` in enumeration order.
    pub fn balls(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let ladder = self.grid.ladder();
        (0..self.grid.len())
            .flat_map(move |c| (0..self.radii_at(c)).map(move |k| (c, ladder[k])))
    }
}

/// Per-center gather: calls `per_center(center, out)` which must push one value
/// per admitted ball, then scatters suffix maxima to the ball members.
fn scatter_suffix_max<F>(family: &BallFamily, per_center: F) -> Vec<f64>
where
    F: Fn(usize, &mut Vec<f64>) + Sync,
{
    let grid = &family.grid;
    let counts = grid.ladder_counts();
    let n = grid.len();
    (0..n)
        .into_par_iter()
        .fold(
            || (vec![0.0f64; n], Vec::new()),
            |(mut acc, mut vals): (Vec<f64>, Vec<f64>), center| {
                vals.clear();
                per_center(center, &mut vals);
                let kk = vals.len();
                for k in (0..kk.saturating_sub(1)).rev() {
                    vals[k] = vals[k].max(vals[k + 1]);
                }
                let mut k = 0;
                grid.walk(center, counts[kk - 1], |pos, idx| {
                    while counts[k] <= pos {
                        k += 1;
                    }
                    if vals[k] > acc[idx] {
                        acc[idx] = vals[k];
                    }
                });
                (acc, vals)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(
            || vec![0.0; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    if y > *x {
                        *x = y;
                    }
                }
                a
            },
        )
}

/// Plain scatter of one value per center over its critical ball.
fn scatter_critical<F>(family: &BallFamily, value: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    scatter_suffix_max(family, |c, out| {
        out.resize(family.radii_at(c) - 1, 0.0);
        out.push(value(c));
    })
}

/// Prefix sums of `vals` at every admitted ladder count around `center`.
fn ladder_sums(grid: &Grid, vals: &[f64], center: usize, kk: usize, out: &mut Vec<f64>) {
    let counts = grid.ladder_counts();
    let mut s = 0.0;
    let mut k = 0;
    grid.walk(center, counts[kk - 1], |pos, idx| {
        s += vals[idx];
        while k < kk && counts[k] == pos + 1 {
            out.push(s);
            k += 1;
        }
    });
}

/// `M^θ_ρ f(x) = sup_r (1 + r/ρ(x))^{-θ} avg_{B(x,r)} |f|`, centered, over the
/// full ladder.
pub fn m_theta(f: &GridFunction, rho: &CriticalRadiusField, theta: f64) -> Result<GridFunction> {
    f.grid().check_same(rho.grid())?;
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::param(format!("theta must be non-negative (got {theta})")));
    }
    let grid = f.grid();
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let ladder = grid.ladder();
    let counts = grid.ladder_counts();
    let kk = ladder.len();
    let out = (0..grid.len())
        .into_par_iter()
        .map_init(Vec::new, |sums: &mut Vec<f64>, x| {
            sums.clear();
            ladder_sums(grid, &abs, x, kk, sums);
            let rx = rho.at(x);
            (0..kk)
                .map(|k| (1.0 + ladder[k] / rx).powf(-theta) * sums[k] / counts[k] as f64)
                .fold(0.0f64, f64::max)
        })
        .collect();
    Ok(GridFunction::from_raw(grid.clone(), out))
}

/// `M_ρ f(x)`: sup of `avg_B |f|` over family balls containing `x`.
pub fn m_local(f: &GridFunction, family: &BallFamily) -> Result<GridFunction> {
    f.grid().check_same(family.grid())?;
    let grid = f.grid();
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let counts = grid.ladder_counts();
    let out = scatter_suffix_max(family, |c, out| {
        let kk = family.radii_at(c);
        ladder_sums(grid, &abs, c, kk, out);
        for (k, v) in out.iter_mut().enumerate() {
            *v /= counts[k] as f64;
        }
    });
    Ok(GridFunction::from_raw(grid.clone(), out))
}

/// `avg_B |f - f_B|` for each admitted ball at `center`.
fn oscillations(grid: &Grid, vals: &[f64], center: usize, kk: usize, out: &mut Vec<f64>) {
    let counts = grid.ladder_counts();
    let mut sums = Vec::with_capacity(kk);
    ladder_sums(grid, vals, center, kk, &mut sums);
    for (k, &s) in sums.iter().enumerate() {
        let m = counts[k] as f64;
        let mean = s / m;
        let mut acc = 0.0;
        grid.walk(center, counts[k], |_, idx| acc += (vals[idx] - mean).abs());
        out.push(acc / m);
    }
}

/// The two terms of `M♯_ρ f`: the oscillation supremum and the critical-ball
/// average supremum.
pub fn sharp_parts(f: &GridFunction, family: &BallFamily) -> Result<(GridFunction, GridFunction)> {
    f.grid().check_same(family.grid())?;
    let grid = f.grid();
    let vals = f.values();
    let abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    let counts = grid.ladder_counts();
    let osc = scatter_suffix_max(family, |c, out| {
        oscillations(grid, vals, c, family.radii_at(c), out)
    });
    let crit = scatter_critical(family, |c| {
        let kk = family.radii_at(c);
        let mut s = 0.0;
        grid.walk(c, counts[kk - 1], |_, idx| s += abs[idx]);
        s / counts[kk - 1] as f64
    });
    Ok((
        GridFunction::from_raw(grid.clone(), osc),
        GridFunction::from_raw(grid.clone(), crit),
    ))
}

/// `M♯_ρ f(x) = sup_{x∈B∈𝔅} avg_B|f - f_B| + sup_{x∈B(z,βρ(z))} avg_B |f|`.
pub fn sharp(f: &GridFunction, family: &BallFamily) -> Result<GridFunction> {
    let (osc, crit) = sharp_parts(f, family)?;
    osc.add(&crit)
}

/// `‖f‖_{BMO_ρ(w)}`: the larger of `sup_B (max_B w) avg_B|f - f_B|` and
/// `sup_{critical B} (max_B w) avg_B |f|`.
pub fn bmo_rho_seminorm(f: &GridFunction, w: &WeightField, family: &BallFamily) -> Result<f64> {
    f.grid().check_same(family.grid())?;
    f.grid().check_same(w.grid())?;
    let grid = f.grid();
    let vals = f.values();
    let wv = w.values();
    let counts = grid.ladder_counts();
    let best = (0..grid.len())
        .into_par_iter()
        .map_init(Vec::new, |osc: &mut Vec<f64>, c| {
            let kk = family.radii_at(c);
            osc.clear();
            oscillations(grid, vals, c, kk, osc);
            // Prefix maxima of w and sums of |f| at the admitted counts.
            let (mut wmax, mut sabs) = (0.0f64, 0.0);
            let mut k = 0;
            let mut best = 0.0f64;
            grid.walk(c, counts[kk - 1], |pos, idx| {
                wmax = wmax.max(wv[idx]);
                sabs += vals[idx].abs();
                while k < kk && counts[k] == pos + 1 {
                    best = best.max(wmax * osc[k]);
                    if k + 1 == kk {
                        best = best.max(wmax * sabs / counts[k] as f64);
                    }
                    k += 1;
                }
            });
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::{critical_radius, PotentialField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(grid: &Grid, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::from_fn(grid, |_| rng.random_range(-1.0..1.0))
    }

    fn osc_rho(grid: &Grid) -> CriticalRadiusField {
        critical_radius(&PotentialField::oscillator(grid).unwrap())
    }

    fn ball_stats(grid: &Grid, f: &GridFunction, c: usize, r: f64) -> (Vec<usize>, f64, f64, f64) {
        let b = grid.ball_at(c, r).unwrap();
        let m = b.points.len() as f64;
        let mean = b.points.iter().map(|&i| f.values()[i]).sum::<f64>() / m;
        let avg_abs = b.points.iter().map(|&i| f.values()[i].abs()).sum::<f64>() / m;
        let osc = b.points.iter().map(|&i| (f.values()[i] - mean).abs()).sum::<f64>() / m;
        (b.points, mean, avg_abs, osc)
    }

    #[test]
    fn family_shapes() {
        let g = make_grid(3, 8, 0.5).unwrap();
        let rho = osc_rho(&g);
        let fam = BallFamily::critical(&rho, 1.0).unwrap();
        for c in 0..g.len() {
            let r = fam.critical_radius_at(c);
            assert!(r <= rho.at(c) * (1.0 + 1e-12) || r == g.ladder()[0]);
        }
        let big = BallFamily::critical(&rho, 2.0).unwrap();
        assert!((0..g.len()).all(|c| big.radii_at(c) >= fam.radii_at(c)));
        assert_eq!(BallFamily::ladder(&g).ball_count(), g.len() * g.ladder().len());
        assert_eq!(fam.balls().count(), fam.ball_count());
    }

    #[test]
    fn m_theta_examples() {
        let g = make_grid(3, 8, 1.0).unwrap();
        let rho = CriticalRadiusField::constant(&g, 2.0).unwrap();
        let c = GridFunction::constant(&g, 3.0);
        for theta in [0.0, 1.0, 3.0] {
            let m = m_theta(&c, &rho, theta).unwrap();
            for &v in m.values() {
                assert!(v <= 3.0 + 1e-12);
                assert!(v >= 3.0 * (1.0 + 1.0 / 2.0f64).powf(-theta) - 1e-12);
            }
        }

        let spike_at = 100;
        let spike = GridFunction::indicator_point(&g, spike_at);
        let m = m_theta(&spike, &rho, 0.0).unwrap();
        let brute = g
            .ladder()
            .iter()
            .map(|&r| ball_stats(&g, &spike, spike_at, r).2)
            .fold(0.0f64, f64::max);
        assert_eq!(m.values()[spike_at], brute);

        let f = random(&g, 1);
        let m0 = m_theta(&f, &rho, 0.0).unwrap();
        let m2 = m_theta(&f, &rho, 2.0).unwrap();
        for (a, b) in m2.values().iter().zip(m0.values()) {
            assert!(*a <= b + 1e-12);
        }
    }

    #[test]
    fn m_local_matches_brute_force() {
        let g = make_grid(3, 8, 0.5).unwrap();
        let rho = osc_rho(&g);
        let fam = BallFamily::critical(&rho, 1.0).unwrap();
        let f = random(&g, 2);
        let fast = m_local(&f, &fam).unwrap();
        let mut brute = vec![0.0f64; g.len()];
        for (c, r) in fam.balls() {
            let (pts, _, avg, _) = ball_stats(&g, &f, c, r);
            for p in pts {
                brute[p] = brute[p].max(avg);
            }
        }
        for (a, b) in fast.values().iter().zip(&brute) {
            assert!((a - b).abs() < 1e-12);
        }
        // |f| ≤ M_ρ f through the singleton ball.
        for (a, v) in fast.values().iter().zip(f.values()) {
            assert!(v.abs() <= a + 1e-12);
        }
        let c = m_local(&GridFunction::constant(&g, 2.5), &fam).unwrap();
        assert!(c.values().iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn m_local_vanishes_away_from_support() {
        let g = make_grid(2, 16, 1.0).unwrap();
        let rho = CriticalRadiusField::constant(&g, 1.0).unwrap();
        let fam = BallFamily::critical(&rho, 1.0).unwrap();
        let spike = GridFunction::indicator_point(&g, g.index(&[3, 3]));
        let m = m_local(&spike, &fam).unwrap();
        assert_eq!(m.values()[g.index(&[10, 10])], 0.0);
        assert!(m.values()[g.index(&[4, 4])] > 0.0);
    }

    #[test]
    fn sharp_matches_brute_force() {
        let g = make_grid(3, 8, 0.5).unwrap();
        let rho = osc_rho(&g);
        let fam = BallFamily::critical(&rho, 1.0).unwrap();
        let f = random(&g, 3);
        let fast = sharp(&f, &fam).unwrap();
        let mut osc = vec![0.0f64; g.len()];
        let mut crit = vec![0.0f64; g.len()];
        for (c, r) in fam.balls() {
            let (pts, _, avg, o) = ball_stats(&g, &f, c, r);
            let is_crit = r == fam.critical_radius_at(c);
            for p in pts {
                osc[p] = osc[p].max(o);
                if is_crit {
                    crit[p] = crit[p].max(avg);
                }
            }
        }
        for i in 0..g.len() {
            assert!((fast.values()[i] - (osc[i] + crit[i])).abs() < 1e-12);
        }
        let c = sharp(&GridFunction::constant(&g, 1.5), &fam).unwrap();
        assert!(c.values().iter().all(|&v| (v - 1.5).abs() < 1e-12));
        let z = sharp(&GridFunction::zeros(&g), &fam).unwrap();
        assert!(z.is_zero());
    }

    #[test]
    fn bmo_examples() {
        let g = make_grid(3, 8, 0.5).unwrap();
        let rho = osc_rho(&g);
        let fam = BallFamily::critical(&rho, 1.0).unwrap();
        let one = WeightField::constant(&g, 1.0).unwrap();
        let c = GridFunction::constant(&g, 2.0);
        assert!((bmo_rho_seminorm(&c, &one, &fam).unwrap() - 2.0).abs() < 1e-12);

        let f = random(&g, 4);
        let w = WeightField::power(&g, 1.0, g.center_index());
        let mut brute = 0.0f64;
        for (cen, r) in fam.balls() {
            let (pts, _, avg, o) = ball_stats(&g, &f, cen, r);
            let wmax = pts.iter().map(|&i| w.values()[i]).fold(0.0f64, f64::max);
            brute = brute.max(wmax * o);
            if r == fam.critical_radius_at(cen) {
                brute = brute.max(wmax * avg);
            }
        }
        let fast = bmo_rho_seminorm(&f, &w, &fam).unwrap();
        assert!((fast - brute).abs() < 1e-12 * brute);
    }

    #[test]
    fn sublinear_and_monotone() {
        let g = make_grid(3, 8, 0.5).unwrap();
        let rho = osc_rho(&g);
        let f = random(&g, 5);
        let h = random(&g, 6);
        let fh = f.add(&h).unwrap();
        let fam1 = BallFamily::critical(&rho, 1.0).unwrap();
        let fam2 = BallFamily::critical(&rho, 2.0).unwrap();
        type Op = fn(&GridFunction, &BallFamily) -> Result<GridFunction>;
        for op in [m_local as Op, sharp as Op] {
            let a = op(&fh, &fam1).unwrap();
            let b = op(&f, &fam1).unwrap();
            let c = op(&h, &fam1).unwrap();
            for i in 0..g.len() {
                assert!(a.values()[i] <= b.values()[i] + c.values()[i] + 1e-12);
            }
        }
        let m1 = m_local(&f, &fam1).unwrap();
        let m2 = m_local(&f, &fam2).unwrap();
        let (o1, _) = sharp_parts(&f, &fam1).unwrap();
        let (o2, _) = sharp_parts(&f, &fam2).unwrap();
        for i in 0..g.len() {
            assert!(m1.values()[i] <= m2.values()[i] + 1e-15);
            assert!(o1.values()[i] <= o2.values()[i] + 1e-15);
        }
        let t1 = m_theta(&f, &rho, 1.0).unwrap();
        let t3 = m_theta(&f, &rho, 3.0).unwrap();
        for i in 0..g.len() {
            assert!(t3.values()[i] <= t1.values()[i] + 1e-15);
        }
    }
}
