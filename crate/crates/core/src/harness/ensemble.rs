//! Seeded test-function families.
//!
//! Random parameters are drawn in physical units relative to the grid
//! center, independently of the grid, so one seed describes the same
//! functions at every refinement level (Fourier modes excepted: they live
//! on the torus).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::EnsembleKind;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};

/// Highest integer frequency per axis of a Fourier member.
const FOURIER_MODES: i64 = 2;

/// Members of one kind, labelled `kind#i`.
pub fn generate_ensemble(kind: EnsembleKind, size: usize, seed: u64, grid: &Grid) -> Result<Vec<GridFunction>> {
    generate_ensemble_in(kind, size, seed, grid, 0.3 * grid.side())
}

/// As [`generate_ensemble`], with random centers in the box of half-width
/// `extent` around the grid center.
pub fn generate_ensemble_in(
    kind: EnsembleKind,
    size: usize,
    seed: u64,
    grid: &Grid,
    extent: f64,
) -> Result<Vec<GridFunction>> {
    if size == 0 {
        return Err(Error::param("ensemble size must be at least 1"));
    }
    if !(extent > 0.0 && extent.is_finite()) {
        return Err(Error::param(format!("ensemble extent must be positive (got {extent})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ kind_salt(kind));
    Ok((0..size)
        .map(|_| match kind {
            EnsembleKind::FourierDecay => fourier(grid, &mut rng),
            EnsembleKind::Bumps => {
                let c = random_node(grid, &mut rng, extent);
                let radius = rng.random_range(0.15..0.5) * extent;
                let amp = rng.random_range(0.5..2.0);
                bump(grid, c, radius.max(grid.spacing()), amp)
            }
            EnsembleKind::Indicators => {
                let c = random_node(grid, &mut rng, extent);
                let radius = rng.random_range(0.1..0.5) * extent;
                GridFunction::from_fn(grid, |i| if grid.distance(i, c) <= radius { 1.0 } else { 0.0 })
            }
            EnsembleKind::Spikes => {
                let c = random_node(grid, &mut rng, extent);
                GridFunction::indicator_point(grid, c)
            }
        })
        .collect())
}

/// Members labelled `kind#i`, the kinds sharing `size` as evenly as possible.
pub fn mixed_ensemble(
    kinds: &[EnsembleKind],
    size: usize,
    seed: u64,
    grid: &Grid,
    extent: f64,
) -> Result<Vec<(String, GridFunction)>> {
    if kinds.is_empty() {
        return Err(Error::param("no ensemble kinds given"));
    }
    let mut out = Vec::with_capacity(size);
    for (j, &kind) in kinds.iter().enumerate() {
        let count = size / kinds.len() + usize::from(j < size % kinds.len());
        if count == 0 {
            continue;
        }
        let members = generate_ensemble_in(kind, count, seed, grid, extent)?;
        out.extend(
            members
                .into_iter()
                .enumerate()
                .map(|(i, f)| (format!("{}#{i}", kind.as_str()), f)),
        );
    }
    Ok(out)
}

fn kind_salt(kind: EnsembleKind) -> u64 {
    match kind {
        EnsembleKind::FourierDecay => 0x9e37_79b9_7f4a_7c15,
        EnsembleKind::Bumps => 0xbf58_476d_1ce4_e5b9,
        EnsembleKind::Indicators => 0x94d0_49bb_1331_11eb,
        EnsembleKind::Spikes => 0x2545_f491_4f6c_dd1d,
    }
}

/// Grid node nearest to a uniform random point of the centered box.
fn random_node(grid: &Grid, rng: &mut ChaCha8Rng, extent: f64) -> usize {
    let center = grid.coords(grid.center_index());
    // Always draw three coordinates so the stream does not depend on `d`.
    let offs: [f64; 3] = std::array::from_fn(|_| rng.random_range(-extent..extent));
    let coords: Vec<i64> = (0..grid.dim())
        .map(|ax| center[ax] as i64 + (offs[ax] / grid.spacing()).round() as i64)
        .collect();
    grid.index(&coords)
}

fn bump(grid: &Grid, center: usize, radius: f64, amp: f64) -> GridFunction {
    GridFunction::from_fn(grid, |i| {
        let t = grid.distance(i, center) / radius;
        if t < 1.0 {
            amp * (1.0 - 1.0 / (1.0 - t * t)).exp()
        } else {
            0.0
        }
    })
}

/// `Σ_k c_k cos(2π k·x / side + φ_k)` over `|k_i| ≤ 2`, `k ≠ 0`, with
/// `|c_k| = (1+|k|)^{-(d+1)}` and random phases and signs.
fn fourier(grid: &Grid, rng: &mut ChaCha8Rng) -> GridFunction {
    let d = grid.dim();
    let span = (2 * FOURIER_MODES + 1) as usize;
    let mut modes = Vec::new();
    for flat in 0..span.pow(d as u32) {
        let mut k = [0i64; 3];
        let mut r = flat;
        for kk in k.iter_mut().take(d) {
            *kk = (r % span) as i64 - FOURIER_MODES;
            r /= span;
        }
        let norm = k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        modes.push((k, sign * (1.0 + norm).powf(-(d as f64 + 1.0)), phase));
    }
    let n = grid.n_per_axis() as f64;
    GridFunction::from_fn(grid, |i| {
        let c = grid.coords(i);
        modes
            .iter()
            .map(|(k, amp, ph)| {
                let arg: f64 = (0..d).map(|ax| k[ax] as f64 * c[ax] as f64).sum::<f64>() / n;
                amp * (std::f64::consts::TAU * arg + ph).cos()
            })
            .sum()
    })
}

/// `Σ |c_k|` for a Fourier member on a grid of dimension `d`.
pub fn fourier_coefficient_sum(d: usize) -> f64 {
    let span = 2 * FOURIER_MODES + 1;
    let mut s = 0.0;
    for flat in 0..span.pow(d as u32) {
        let mut r = flat;
        let mut n2 = 0i64;
        for _ in 0..d {
            let v = r % span - FOURIER_MODES;
            n2 += v * v;
            r /= span;
        }
        if n2 > 0 {
            s += (1.0 + (n2 as f64).sqrt()).powf(-(d as f64 + 1.0));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn spikes_are_single_cells() {
        let g = make_grid(3, 4, 1.0).unwrap();
        let e = generate_ensemble(EnsembleKind::Spikes, 3, 1, &g).unwrap();
        assert_eq!(e.len(), 3);
        for f in &e {
            assert_eq!(f.values().iter().filter(|&&v| v != 0.0).count(), 1);
            assert_eq!(f.max_abs(), 1.0);
        }
    }

    #[test]
    fn deterministic_bit_for_bit() {
        let g = make_grid(2, 12, 0.5).unwrap();
        for kind in [
            EnsembleKind::FourierDecay,
            EnsembleKind::Bumps,
            EnsembleKind::Indicators,
            EnsembleKind::Spikes,
        ] {
            let a = generate_ensemble(kind, 5, 7, &g).unwrap();
            let b = generate_ensemble(kind, 5, 7, &g).unwrap();
            assert_eq!(a, b);
            let c = generate_ensemble(kind, 5, 8, &g).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn fourier_sup_bounded_by_coefficient_sum() {
        for d in 1..=3 {
            let g = make_grid(d, 8, 0.5).unwrap();
            let bound = fourier_coefficient_sum(d);
            for f in generate_ensemble(EnsembleKind::FourierDecay, 6, 3, &g).unwrap() {
                assert!(f.max_abs() <= bound + 1e-12);
                assert!(f.max_abs() > 0.0);
            }
        }
    }

    #[test]
    fn members_are_nonzero_and_grid_independent_in_physical_units() {
        let g1 = make_grid(3, 10, 0.25).unwrap();
        let g2 = make_grid(3, 12, 0.25).unwrap();
        let a = mixed_ensemble(&[EnsembleKind::Bumps, EnsembleKind::Spikes], 7, 5, &g1, 0.6).unwrap();
        let b = mixed_ensemble(&[EnsembleKind::Bumps, EnsembleKind::Spikes], 7, 5, &g2, 0.6).unwrap();
        assert_eq!(a.len(), 7);
        assert_eq!(a.iter().filter(|(l, _)| l.starts_with("bumps")).count(), 4);
        for ((la, fa), (lb, fb)) in a.iter().zip(&b) {
            assert_eq!(la, lb);
            assert!(fa.max_abs() > 0.0);
            // Same physical function: equal integrals.
            assert!((fa.integral() - fb.integral()).abs() <= 1e-12 * fa.integral().abs().max(1.0));
        }
        assert!(generate_ensemble(EnsembleKind::Bumps, 0, 1, &g1).is_err());
    }
}
