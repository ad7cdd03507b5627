//! Uniform grids on `[0, 1]`, Wiener paths and grid-function arithmetic.
//!
//! Everything downstream integrates with the composite trapezoid rule on the
//! same uniform grid, so the quadrature helpers here are the single source of
//! weights for path functionals and Nyström matrices alike.

use std::ops::{Add, Neg, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Uniform partition of `[0, 1]` into `n` subintervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooCoarse(n));
        }
        Ok(Self { n })
    }

    /// Number of subintervals.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `t_i = i / n`; computed by division so that `t_n == 1.0` exactly.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    /// Composite trapezoid weights: `h/2` at the endpoints, `h` inside.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.step();
        if i == 0 || i == self.n {
            0.5 * h
        } else {
            h
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.weight(i)).collect()
    }

    /// Index of the node closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = (t.clamp(0.0, 1.0) * self.n as f64).round() as usize;
        i.min(self.n)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }
}

/// Convenience constructor matching [`Grid::new`].
pub fn make_grid(n: usize) -> Result<Grid> {
    Grid::new(n)
}

/// Real values attached to the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: (0..=grid.n()).map(|i| f(grid.node(i))).collect(),
        }
    }

    /// Nodes `t_i` themselves.
    pub fn identity(grid: Grid) -> Self {
        Self::from_fn(grid, |t| t)
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Value at the node nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        self.values[self.grid.nearest_index(t)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(sup_distance(&self.values, &other.values))
    }

    /// Trapezoid-weighted inner product `Σ w_i u_i v_i`.
    pub fn weighted_dot(&self, other: &GridFunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (a, b))| self.grid.weight(i) * a * b)
            .sum())
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;

    /// Panics on grid mismatch; use [`GridFunction::zip_with`] for a fallible version.
    fn add(self, rhs: &GridFunction) -> GridFunction {
        self.zip_with(rhs, |a, b| a + b)
            .expect("grid mismatch in add")
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;

    fn sub(self, rhs: &GridFunction) -> GridFunction {
        self.zip_with(rhs, |a, b| a - b)
            .expect("grid mismatch in sub")
    }
}

impl Neg for &GridFunction {
    type Output = GridFunction;

    fn neg(self) -> GridFunction {
        self.map(|v| -v)
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// A discretized Wiener trajectory, pinned at `ω_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: Grid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if values[0] != 0.0 {
            return Err(Error::PathNotPinned(values[0]));
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Path with `ω_i = g(t_i)`; `g(0)` must be 0.
    pub fn from_fn(grid: Grid, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, (0..=grid.n()).map(|i| g(grid.node(i))).collect())
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Increments `ω_{i+1} - ω_i`, `i = 0..n`.
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    pub fn as_grid_function(&self) -> GridFunction {
        GridFunction::from_vec_unchecked(self.grid, self.values.clone())
    }

    pub fn sup_distance(&self, other: &SamplePath) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(sup_distance(&self.values, &other.values))
    }
}

/// Seed and stream selector for the path generator.
///
/// Paths are drawn from ChaCha8 with the 64-bit `stream_id` selecting an
/// independent keystream, and Gaussian increments via the ziggurat sampler
/// of `rand_distr::StandardNormal`. Reproducible within one build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Same seed, stream shifted by `offset`.
    pub fn offset(&self, offset: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: self.stream_id.wrapping_add(offset),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Samples a Wiener path with independent `N(0, h)` increments.
pub fn sample_wiener(grid: Grid, rng: RngSpec) -> SamplePath {
    let mut gen = rng.rng();
    let sd = grid.step().sqrt();
    let mut values = Vec::with_capacity(grid.len());
    let mut w = 0.0;
    values.push(w);
    for _ in 0..grid.n() {
        let z: f64 = StandardNormal.sample(&mut gen);
        w += sd * z;
        values.push(w);
    }
    SamplePath::from_vec_unchecked(grid, values)
}

/// Cameron-Martin shift `ω + g`.
pub fn shift_path(path: &SamplePath, g: &GridFunction) -> Result<SamplePath> {
    path.grid.check_same(&g.grid)?;
    if g.values[0] != 0.0 {
        return Err(Error::ShiftNotPinned(g.values[0]));
    }
    let values = path
        .values
        .iter()
        .zip(&g.values)
        .map(|(w, s)| w + s)
        .collect();
    Ok(SamplePath::from_vec_unchecked(path.grid, values))
}

/// Composite trapezoid rule for `∫_0^1 v dt`.
pub fn quad_trapezoid(v: &GridFunction) -> f64 {
    trapezoid(v.grid, &v.values)
}

pub(crate) fn trapezoid(grid: Grid, v: &[f64]) -> f64 {
    let n = grid.n();
    let interior: f64 = v[1..n].iter().sum();
    grid.step() * (0.5 * (v[0] + v[n]) + interior)
}

/// Running trapezoid integral `t_i ↦ ∫_0^{t_i} v dt`; the last entry equals
/// [`quad_trapezoid`] up to summation order.
pub fn cumulative_trapezoid(v: &GridFunction) -> GridFunction {
    GridFunction::from_vec_unchecked(v.grid, cumtrapz(v.grid, &v.values))
}

pub(crate) fn cumtrapz(grid: Grid, v: &[f64]) -> Vec<f64> {
    let half_h = 0.5 * grid.step();
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(acc);
    for w in v.windows(2) {
        acc += half_h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_nodes_and_step() {
        let g = make_grid(2).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.5, 1.0]);
        assert_eq!(make_grid(4).unwrap().step(), 0.25);
        assert_eq!(make_grid(1), Err(Error::GridTooCoarse(1)));
        assert_eq!(make_grid(0), Err(Error::GridTooCoarse(0)));
    }

    #[test]
    fn grid_is_uniform_and_closed() {
        let g = Grid::new(37).unwrap();
        let t = g.nodes();
        assert_eq!(t[0], 0.0);
        assert_eq!(t[37], 1.0);
        for w in t.windows(2) {
            assert!(w[1] > w[0]);
            assert_abs_diff_eq!(w[1] - w[0], g.step(), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn wiener_is_pinned() {
        let g = Grid::new(64).unwrap();
        for seed in 0..5 {
            let p = sample_wiener(g, RngSpec::new(seed, 3));
            assert_eq!(p.get(0), 0.0);
        }
    }

    #[test]
    fn wiener_is_reproducible_and_streams_differ() {
        let g = Grid::new(32).unwrap();
        let a = sample_wiener(g, RngSpec::new(7, 1));
        let b = sample_wiener(g, RngSpec::new(7, 1));
        let c = sample_wiener(g, RngSpec::new(7, 2));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn wiener_terminal_moments() {
        // Var(W_1) = 1, Var(W_{1/2}) = 1/2.
        let g = Grid::new(512).unwrap();
        let n_paths = 20_000;
        let (mut s1, mut s1sq, mut shalf_sq) = (0.0, 0.0, 0.0);
        for i in 0..n_paths {
            let p = sample_wiener(g, RngSpec::new(11, i));
            let w1 = p.get(512);
            let wh = p.get(256);
            s1 += w1;
            s1sq += w1 * w1;
            shalf_sq += wh * wh;
        }
        let n = n_paths as f64;
        let mean = s1 / n;
        assert!(mean.abs() < 3.0 / n.sqrt());
        let var1 = s1sq / n - mean * mean;
        assert!((var1 - 1.0).abs() < 3.0 * (2.0 / (n - 1.0)).sqrt());
        let var_half = shalf_sq / n;
        assert!((var_half - 0.5).abs() < 3.0 * 0.5 * (2.0 / (n - 1.0)).sqrt());
    }

    #[test]
    fn wiener_increment_moments() {
        // 32 simultaneous checks: each at the Bonferroni level that keeps the
        // family-wise error equal to a single 3σ test (z* ≈ 3.93).
        let g = Grid::new(16).unwrap();
        let h = g.step();
        let z_star = 3.93;
        let n_paths = 20_000usize;
        let mut sum = [0.0; 16];
        let mut sum_sq = [0.0; 16];
        for i in 0..n_paths {
            let p = sample_wiener(g, RngSpec::new(5, i as u64));
            for (k, d) in p.increments().enumerate() {
                sum[k] += d;
                sum_sq[k] += d * d;
            }
        }
        let n = n_paths as f64;
        for k in 0..16 {
            let mean = sum[k] / n;
            let var = (sum_sq[k] - n * mean * mean) / (n - 1.0);
            let z_mean = mean / (h / n).sqrt();
            let z_var = (var - h) / (h * (2.0 / (n - 1.0)).sqrt());
            assert!(z_mean.abs() < z_star, "mean of increment {k}: z = {z_mean}");
            assert!(
                z_var.abs() < z_star,
                "variance of increment {k}: z = {z_var}"
            );
        }
    }

    #[test]
    fn shift_examples() {
        let g = Grid::new(8).unwrap();
        let w = sample_wiener(g, RngSpec::new(1, 0));
        assert_eq!(shift_path(&w, &GridFunction::zeros(g)).unwrap(), w);

        let t = GridFunction::identity(g);
        let shifted = shift_path(&SamplePath::zero(g), &t).unwrap();
        assert_eq!(shifted.values(), t.values());

        let bad = GridFunction::constant(g, 1.0);
        assert!(matches!(
            shift_path(&w, &bad),
            Err(Error::ShiftNotPinned(_))
        ));
        let other = GridFunction::zeros(Grid::new(4).unwrap());
        assert!(matches!(
            shift_path(&w, &other),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn shift_inverse_is_bit_exact_for_dyadic_values() {
        // Dyadic path values and shifts on a power-of-two grid add without rounding.
        let g = Grid::new(64).unwrap();
        let w = SamplePath::from_fn(g, |t| (t * 4.0).floor() / 8.0 - t * 0.25).unwrap();
        let s = GridFunction::from_fn(g, |t| t * t);
        let back = shift_path(&shift_path(&w, &s).unwrap(), &-&s).unwrap();
        assert_eq!(back, w);
    }

    proptest! {
        #[test]
        fn shift_inverse_within_one_ulp(seed in 0u64..1000, scale in -10.0f64..10.0) {
            let g = Grid::new(32).unwrap();
            let w = sample_wiener(g, RngSpec::new(seed, 0));
            let s = GridFunction::from_fn(g, |t| scale * (3.0 * t).sin());
            let back = shift_path(&shift_path(&w, &s).unwrap(), &-&s).unwrap();
            for i in 0..g.len() {
                let mag = w.get(i).abs().max(s.get(i).abs());
                prop_assert!((back.get(i) - w.get(i)).abs() <= 2.0 * f64::EPSILON * mag);
            }
        }
    }

    #[test]
    fn trapezoid_examples() {
        for n in [2, 3, 17, 512] {
            let g = Grid::new(n).unwrap();
            assert_abs_diff_eq!(
                quad_trapezoid(&GridFunction::constant(g, 1.0)),
                1.0,
                epsilon = 1e-14
            );
            assert_abs_diff_eq!(
                quad_trapezoid(&GridFunction::identity(g)),
                0.5,
                epsilon = 1e-15
            );
        }
        let g = Grid::new(512).unwrap();
        let sq = GridFunction::from_fn(g, |t| t * t);
        assert!((quad_trapezoid(&sq) - 1.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn trapezoid_is_second_order() {
        let exact = 1.0 - (1.0f64).cos();
        let err = |n| {
            let g = Grid::new(n).unwrap();
            (quad_trapezoid(&GridFunction::from_fn(g, f64::sin)) - exact).abs()
        };
        for n in [16, 32, 64, 128] {
            let ratio = err(n) / err(2 * n);
            assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio} at n = {n}");
        }
    }

    #[test]
    fn cumulative_matches_total() {
        let g = Grid::new(100).unwrap();
        let v = GridFunction::from_fn(g, |t| (5.0 * t).cos());
        let c = cumulative_trapezoid(&v);
        assert_eq!(c.get(0), 0.0);
        assert_abs_diff_eq!(c.get(100), quad_trapezoid(&v), epsilon = 1e-14);
    }
}
