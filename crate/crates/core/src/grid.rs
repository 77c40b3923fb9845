//! Periodic lattice, scalar fields on it, and closed Euclidean balls.
//!
//! Every integral in the crate uses the quadrature `h^d * sum(values)` and
//! every ball is a point set under the minimal-image distance of the torus.
//! Balls are materialised through a shared offset table sorted by distance, so
//! the ball of radius `r` around any center is a prefix of that table.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Relative slack used when deciding whether a lattice offset lies inside a
/// closed ball. Ladder radii such as `sqrt(2) * h` square to values a few ulps
/// away from the integer lattice norms.
const RADIUS_REL_EPS: f64 = 1e-12;
const RADIUS_ABS_EPS: f64 = 1e-9;

#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

struct GridInner {
    dim: usize,
    n: usize,
    spacing: f64,
    coords: Vec<[u32; 3]>,
    offsets: Vec<[i32; 3]>,
    /// Squared offset lengths in index units, ascending.
    dist2: Vec<u32>,
    ladder: Vec<f64>,
    ladder_counts: Vec<usize>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.dim == other.0.dim
                && self.0.n == other.0.n
                && self.0.spacing.to_bits() == other.0.spacing.to_bits())
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid(d={}, n={}, h={})", self.0.dim, self.0.n, self.0.spacing)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={},n={},h={}", self.0.dim, self.0.n, self.0.spacing)
    }
}

/// Builds a periodic grid with `n_per_axis^dim` points and spacing `h`.
pub fn make_grid(dim: usize, n_per_axis: usize, spacing: f64) -> Result<Grid> {
    Grid::new(dim, n_per_axis, spacing)
}

impl Grid {
    pub fn new(dim: usize, n: usize, spacing: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::param(format!("dimension must be 1, 2 or 3 (got {dim})")));
        }
        if n < 4 {
            return Err(Error::param(format!("n_per_axis must be at least 4 (got {n})")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::param(format!("spacing must be positive (got {spacing})")));
        }
        let len = n.pow(dim as u32);
        let coords = (0..len)
            .map(|idx| {
                let mut c = [0u32; 3];
                let mut rest = idx;
                for a in (0..dim).rev() {
                    c[a] = (rest % n) as u32;
                    rest /= n;
                }
                c
            })
            .collect();

        // Unique residues per axis: (-(n-1)/2 ..= n/2). Their absolute values
        // are already minimal-image lengths.
        let lo = -(((n - 1) / 2) as i32);
        let hi = (n / 2) as i32;
        let cap2 = (n * n) as f64 / 4.0;
        let mut entries: Vec<(u32, [i32; 3])> = Vec::new();
        let axis: Vec<i32> = (lo..=hi).collect();
        let zero = [0i32];
        let ax = |a: usize| -> &[i32] {
            if a < dim {
                &axis
            } else {
                &zero
            }
        };
        for &o0 in ax(0) {
            for &o1 in ax(1) {
                for &o2 in ax(2) {
                    let d2 = (o0 * o0 + o1 * o1 + o2 * o2) as u32;
                    if d2 as f64 <= cap2 {
                        entries.push((d2, [o0, o1, o2]));
                    }
                }
            }
        }
        entries.sort_unstable();
        let (dist2, offsets): (Vec<u32>, Vec<[i32; 3]>) = entries.into_iter().unzip();

        let cap = n as f64 * spacing / 2.0;
        let mut ladder = vec![spacing / 2.0];
        let mut k = 0i32;
        loop {
            let r = ladder_radius(spacing, k);
            if r > cap * (1.0 + RADIUS_REL_EPS) {
                break;
            }
            ladder.push(r);
            k += 1;
        }
        let mut inner = GridInner {
            dim,
            n,
            spacing,
            coords,
            offsets,
            dist2,
            ladder,
            ladder_counts: Vec::new(),
        };
        inner.ladder_counts = inner.ladder.iter().map(|&r| inner.count_within(r)).collect();
        Ok(Grid(Arc::new(inner)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.0.n
    }

    pub fn spacing(&self) -> f64 {
        self.0.spacing
    }

    pub fn len(&self) -> usize {
        self.0.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Side length `n * h` of the periodic box.
    pub fn side(&self) -> f64 {
        self.0.n as f64 * self.0.spacing
    }

    /// Largest admissible ball radius: half the side length.
    pub fn radius_cap(&self) -> f64 {
        self.side() / 2.0
    }

    /// Measure `h^d` of a single cell.
    pub fn cell_measure(&self) -> f64 {
        self.0.spacing.powi(self.0.dim as i32)
    }

    pub fn total_measure(&self) -> f64 {
        self.cell_measure() * self.len() as f64
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let c = self.0.coords[idx];
        [c[0] as usize, c[1] as usize, c[2] as usize]
    }

    /// Row-major index of the given axis coordinates (wrapped periodically).
    pub fn index(&self, coords: &[i64]) -> usize {
        let n = self.0.n as i64;
        coords
            .iter()
            .take(self.0.dim)
            .fold(0usize, |acc, &c| acc * self.0.n + c.rem_euclid(n) as usize)
    }

    /// Minimal-image Euclidean distance between two grid points.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        (self.distance2_index(a, b) as f64).sqrt() * self.0.spacing
    }

    pub(crate) fn distance2_index(&self, a: usize, b: usize) -> u64 {
        let ca = &self.0.coords[a];
        let cb = &self.0.coords[b];
        let n = self.0.n as i64;
        let mut d2 = 0u64;
        for ax in 0..self.0.dim {
            let mut d = (ca[ax] as i64 - cb[ax] as i64).abs();
            if 2 * d > n {
                d = n - d;
            }
            d2 += (d * d) as u64;
        }
        d2
    }

    /// The grid point at index `n/2` along every axis, used as the origin for
    /// radial profiles.
    pub fn center_index(&self) -> usize {
        let c = vec![(self.0.n / 2) as i64; self.0.dim];
        self.index(&c)
    }

    pub fn distance_from_center(&self, idx: usize) -> f64 {
        self.distance(idx, self.center_index())
    }

    /// Geometric radius ladder `{h/2, h, sqrt(2) h, 2h, ...}` up to the cap.
    /// The leading sub-cell radius yields singleton balls.
    pub fn ladder(&self) -> &[f64] {
        &self.0.ladder
    }

    /// Point counts of the balls with the ladder radii.
    pub fn ladder_counts(&self) -> &[usize] {
        &self.0.ladder_counts
    }

    /// Number of points in any closed ball of radius `r` (translation invariant).
    pub fn count_within(&self, r: f64) -> usize {
        self.0.count_within(r)
    }

    /// Number of points at distance strictly less than `r`.
    pub fn count_strictly_within(&self, r: f64) -> usize {
        let t = (r / self.0.spacing).powi(2) * (1.0 - RADIUS_REL_EPS) - RADIUS_ABS_EPS;
        self.0.dist2.partition_point(|&d2| (d2 as f64) < t)
    }

    /// Distance (length units) of the `k`-th entry of the sorted offset table.
    pub(crate) fn offset_distance(&self, k: usize) -> f64 {
        (self.0.dist2[k] as f64).sqrt() * self.0.spacing
    }

    /// Fills `out` with the indices of the first `count` points of the ball
    /// around `center`, in offset-table order (nearest first).
    pub(crate) fn ball_indices(&self, center: usize, count: usize, out: &mut Vec<usize>) {
        out.clear();
        let base = &self.0.coords[center];
        let n = self.0.n as i32;
        let dim = self.0.dim;
        for o in &self.0.offsets[..count] {
            let mut idx = 0usize;
            for a in 0..dim {
                let mut v = base[a] as i32 + o[a];
                if v < 0 {
                    v += n;
                } else if v >= n {
                    v -= n;
                }
                idx = idx * self.0.n + v as usize;
            }
            out.push(idx);
        }
    }

    /// Visits the first `count` points around `center` in offset-table order,
    /// calling `visit(position, index)`.
    #[inline]
    pub(crate) fn walk(&self, center: usize, count: usize, mut visit: impl FnMut(usize, usize)) {
        let base = &self.0.coords[center];
        let n = self.0.n as i32;
        let stride = self.0.n;
        match self.0.dim {
            1 => {
                for (k, o) in self.0.offsets[..count].iter().enumerate() {
                    visit(k, wrap(base[0] as i32 + o[0], n));
                }
            }
            2 => {
                for (k, o) in self.0.offsets[..count].iter().enumerate() {
                    let i = wrap(base[0] as i32 + o[0], n) * stride + wrap(base[1] as i32 + o[1], n);
                    visit(k, i);
                }
            }
            _ => {
                for (k, o) in self.0.offsets[..count].iter().enumerate() {
                    let i = (wrap(base[0] as i32 + o[0], n) * stride
                        + wrap(base[1] as i32 + o[1], n))
                        * stride
                        + wrap(base[2] as i32 + o[2], n);
                    visit(k, i);
                }
            }
        }
    }

    /// Closed ball `B(center, radius)`; rejects radii above the half-side cap.
    pub fn ball_at(&self, center: usize, radius: f64) -> Result<Ball> {
        if center >= self.len() {
            return Err(Error::param(format!("center {center} out of range")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(format!("radius must be positive (got {radius})")));
        }
        let cap = self.radius_cap();
        if radius > cap * (1.0 + RADIUS_REL_EPS) {
            return Err(Error::RadiusCap { radius, cap });
        }
        let count = self.count_within(radius);
        let mut points = Vec::with_capacity(count);
        self.ball_indices(center, count, &mut points);
        Ok(Ball {
            grid: self.clone(),
            center,
            radius,
            measure: count as f64 * self.cell_measure(),
            points,
        })
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl GridInner {
    fn count_within(&self, r: f64) -> usize {
        let t = (r / self.spacing).powi(2) * (1.0 + RADIUS_REL_EPS) + RADIUS_ABS_EPS;
        self.dist2.partition_point(|&d2| (d2 as f64) <= t)
    }
}

#[inline]
fn wrap(v: i32, n: i32) -> usize {
    (if v < 0 {
        v + n
    } else if v >= n {
        v - n
    } else {
        v
    }) as usize
}

/// `h * sqrt(2)^k`, exact at even `k`.
fn ladder_radius(h: f64, k: i32) -> f64 {
    let even = h * 2f64.powi(k / 2);
    if k % 2 == 0 {
        even
    } else {
        even * std::f64::consts::SQRT_2
    }
}

/// Closed ball under the minimal-image distance.
#[derive(Clone, Debug)]
pub struct Ball {
    pub grid: Grid,
    pub center: usize,
    pub radius: f64,
    /// Member indices, nearest first.
    pub points: Vec<usize>,
    pub measure: f64,
}

impl Ball {
    pub fn contains(&self, idx: usize) -> bool {
        self.points.contains(&idx)
    }
}

/// Real scalar field on a grid.
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite value at point {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    /// Skips validation; callers guarantee finite values of the right length.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        GridFunction { grid, values }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        GridFunction {
            values: vec![c; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: &Grid, f: impl FnMut(usize) -> f64) -> Self {
        GridFunction {
            values: (0..grid.len()).map(f).collect(),
            grid: grid.clone(),
        }
    }

    /// Indicator of a single cell.
    pub fn indicator_point(grid: &Grid, idx: usize) -> Self {
        Self::from_fn(grid, |i| if i == idx { 1.0 } else { 0.0 })
    }

    pub fn indicator_ball(ball: &Ball) -> Self {
        let mut v = vec![0.0; ball.grid.len()];
        for &p in &ball.points {
            v[p] = 1.0;
        }
        GridFunction::from_raw(ball.grid.clone(), v)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.grid.cell_measure() * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `h^d * sum(f * g)`.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.grid.cell_measure()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }
}

/// Mean of `f` over the ball: `(1/|B|) h^d sum_{y in B} f(y)`.
pub fn average_over(f: &GridFunction, ball: &Ball) -> Result<f64> {
    f.grid().check_same(&ball.grid)?;
    let sum: f64 = ball.points.iter().map(|&p| f.values()[p]).sum();
    Ok(sum / ball.points.len() as f64)
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => unreachable!("dimension checked at grid construction"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_sizes() {
        let g = make_grid(3, 8, 1.0).unwrap();
        assert_eq!(g.len(), 512);
        assert_eq!(g.side(), 8.0);
        let g = make_grid(1, 4, 0.5).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.side(), 2.0);
    }

    #[test]
    fn make_grid_rejects_bad_parameters() {
        assert!(matches!(make_grid(3, 3, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(make_grid(4, 8, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(make_grid(0, 8, 1.0), Err(Error::Parameter(_))));
        assert!(matches!(make_grid(2, 8, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn row_major_enumeration() {
        let g = make_grid(3, 4, 1.0).unwrap();
        assert_eq!(g.coords(1), [0, 0, 1]);
        assert_eq!(g.coords(4), [0, 1, 0]);
        assert_eq!(g.coords(16), [1, 0, 0]);
        assert_eq!(g.index(&[1, 2, 3]), 16 + 8 + 3);
        assert_eq!(g.index(&[-1, 0, 0]), 48);
    }

    #[test]
    fn ball_counts() {
        let g = make_grid(3, 8, 1.0).unwrap();
        let b = g.ball_at(17, 1.5).unwrap();
        assert_eq!(b.points.len(), 19);
        assert_eq!(b.measure, 19.0);
        assert_eq!(b.points[0], 17);

        let g1 = make_grid(1, 8, 1.0).unwrap();
        let b = g1.ball_at(3, 0.5).unwrap();
        assert_eq!(b.points, vec![3]);
        assert_eq!(b.measure, 1.0);
    }

    #[test]
    fn radius_cap_enforced() {
        let g = make_grid(2, 8, 1.0).unwrap();
        match g.ball_at(0, 4.5) {
            Err(Error::RadiusCap { cap, .. }) => assert_eq!(cap, 4.0),
            other => panic!("expected cap error, got {other:?}"),
        }
        assert!(g.ball_at(0, 4.0).is_ok());
    }

    #[test]
    fn cap_ball_has_no_duplicate_points() {
        for (d, n) in [(1, 4), (2, 6), (3, 5), (3, 8)] {
            let g = make_grid(d, n, 1.0).unwrap();
            let b = g.ball_at(0, g.radius_cap()).unwrap();
            let mut p = b.points.clone();
            p.sort_unstable();
            p.dedup();
            assert_eq!(p.len(), b.points.len());
        }
        let g = make_grid(1, 4, 1.0).unwrap();
        assert_eq!(g.ball_at(0, 2.0).unwrap().points.len(), 4);
    }

    #[test]
    fn averages() {
        let g = make_grid(3, 8, 1.0).unwrap();
        let b = g.ball_at(100, 1.5).unwrap();
        let c = GridFunction::constant(&g, 2.5);
        assert_eq!(average_over(&c, &b).unwrap(), 2.5);
        let spike = GridFunction::indicator_point(&g, 100);
        assert!((average_over(&spike, &b).unwrap() - 1.0 / 19.0).abs() < 1e-15);
        let other = make_grid(3, 6, 1.0).unwrap();
        let c_other = GridFunction::constant(&other, 1.0);
        assert!(matches!(
            average_over(&c_other, &b),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn ladder_shape() {
        let g = make_grid(3, 16, 0.5).unwrap();
        let l = g.ladder();
        assert_eq!(l[0], 0.25);
        assert_eq!(l[1], 0.5);
        assert_eq!(l[3], 1.0);
        assert_eq!(*l.last().unwrap(), 4.0);
        assert_eq!(g.ladder_counts()[0], 1);
        assert_eq!(g.ladder_counts()[1], 7);
    }

    #[test]
    fn measure_tracks_continuum_volume() {
        for (d, n) in [(1, 32), (2, 32), (3, 16)] {
            let g = make_grid(d, n, 0.5).unwrap();
            for &r in g.ladder() {
                let count = g.count_within(r);
                assert!(count > 0);
                if r >= 2.0 * g.spacing() {
                    let ratio = count as f64 * g.cell_measure() / (unit_ball_volume(d) * r.powi(d as i32));
                    assert!((0.25..=4.0).contains(&ratio), "d={d} r={r} ratio={ratio}");
                }
            }
        }
    }

    #[test]
    fn translation_invariant_and_monotone_balls() {
        let g = make_grid(2, 8, 1.0).unwrap();
        let mut prev = 0;
        for &r in g.ladder() {
            let counts: Vec<usize> = (0..g.len())
                .map(|c| g.ball_at(c, r).unwrap().points.len())
                .collect();
            assert!(counts.iter().all(|&c| c == counts[0]));
            assert!(counts[0] >= prev);
            prev = counts[0];
        }
        let small = g.ball_at(9, 1.0).unwrap();
        let big = g.ball_at(9, 2.0).unwrap();
        assert!(small.points.iter().all(|p| big.contains(*p)));
    }

    #[test]
    fn periodic_distance_is_a_metric() {
        let g = make_grid(2, 6, 1.0).unwrap();
        for a in 0..g.len() {
            assert_eq!(g.distance(a, a), 0.0);
            for b in 0..g.len() {
                assert_eq!(g.distance(a, b), g.distance(b, a));
                for c in (0..g.len()).step_by(5) {
                    assert!(g.distance(a, c) <= g.distance(a, b) + g.distance(b, c) + 1e-12);
                }
            }
        }
        assert_eq!(g.distance(g.index(&[0, 0]), g.index(&[5, 0])), 1.0);
    }
}
