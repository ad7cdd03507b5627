//! The Dirichlet Green's function `K(t,s) = min(t,s) - ts` of `-d²/dt²`, the
//! integral operator it induces, the free solution `Y(ω)` and Nyström
//! discretizations of Hilbert-Schmidt kernels.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{cumtrapz, trapezoid, Grid, GridFunction, SamplePath};

/// Value assigned to `∂_t K(t, t)`, where the kernel jumps by `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalConvention {
    /// Average of the one-sided limits: `1/2 - t`.
    #[default]
    Midpoint,
    /// Limit `s ↑ t`: `-t`.
    FromBelow,
    /// Limit `s ↓ t`: `1 - t`.
    FromAbove,
}

/// Green's function of `-d²/dt²` on `[0,1]` with Dirichlet conditions.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreenKernel {
    pub diagonal: DiagonalConvention,
}

impl GreenKernel {
    pub fn new(diagonal: DiagonalConvention) -> Self {
        Self { diagonal }
    }

    #[inline]
    pub fn k(&self, t: f64, s: f64) -> f64 {
        t.min(s) - t * s
    }

    #[inline]
    pub fn dk(&self, t: f64, s: f64) -> f64 {
        if s > t {
            1.0 - s
        } else if s < t {
            -s
        } else {
            match self.diagonal {
                DiagonalConvention::Midpoint => 0.5 - t,
                DiagonalConvention::FromBelow => -t,
                DiagonalConvention::FromAbove => 1.0 - t,
            }
        }
    }
}

fn check_unit_square(t: f64, s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfDomain { t, s });
    }
    Ok(())
}

/// `K(t, s) = min(t, s) - t s`.
pub fn eval_k(t: f64, s: f64) -> Result<f64> {
    check_unit_square(t, s)?;
    Ok(GreenKernel::default().k(t, s))
}

/// `∂_t K(t, s) = 1_{s>t} - s`, midpoint value `1/2 - t` on the diagonal.
pub fn eval_dk(t: f64, s: f64) -> Result<f64> {
    check_unit_square(t, s)?;
    Ok(GreenKernel::default().dk(t, s))
}

/// `t_i ↦ Σ_j w_j K(t_i, t_j) v_j` in `O(n)`.
///
/// Splits the kernel into its lower part `(1 - t_i) t_j` and upper part
/// `t_i (1 - t_j)`; the sum equals the trapezoid Nyström product up to
/// rounding, and both endpoint values are exactly zero.
pub fn apply_kop(v: &GridFunction) -> GridFunction {
    let grid = v.grid();
    let n = grid.n();
    let vals = v.values();
    // upper[i] = Σ_{j > i} w_j (1 - t_j) v_j
    let mut upper = vec![0.0; n + 1];
    for j in (0..n).rev() {
        let t = grid.node(j + 1);
        upper[j] = upper[j + 1] + grid.weight(j + 1) * (1.0 - t) * vals[j + 1];
    }
    let mut out = vec![0.0; n + 1];
    let mut lower = 0.0;
    for i in 0..=n {
        let t = grid.node(i);
        lower += grid.weight(i) * t * vals[i];
        out[i] = (1.0 - t) * lower + t * upper[i];
    }
    out[0] = 0.0;
    out[n] = 0.0;
    GridFunction::from_vec_unchecked(grid, out)
}

/// `t ↦ ∫_0^1 ∂_t K(t, s) v_s ds = ∫_t^1 v - ∫_0^1 s v_s ds`, both integrals
/// by the trapezoid rule so the kink at `s = t` falls on a node.
pub fn apply_kop_derivative(v: &GridFunction) -> GridFunction {
    let grid = v.grid();
    let vals = v.values();
    let c = cumtrapz(grid, vals);
    let total = c[grid.n()];
    let sv: Vec<f64> = vals
        .iter()
        .enumerate()
        .map(|(i, &x)| grid.node(i) * x)
        .collect();
    let moment = trapezoid(grid, &sv);
    let out = c.iter().map(|&ci| total - ci - moment).collect();
    GridFunction::from_vec_unchecked(grid, out)
}

/// `Y(ω)` and its exact derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeSolution {
    pub y: GridFunction,
    pub yp: GridFunction,
}

/// Solution of the problem with `f = 0`:
/// `Y_t = -t ∫_0^1 ω + ∫_0^t ω`, `Y'_t = ω_t - ∫_0^1 ω`.
pub fn free_solution(path: &SamplePath) -> FreeSolution {
    let (y, yp) = free_solution_values(path.grid(), path.values());
    let grid = path.grid();
    FreeSolution {
        y: GridFunction::from_vec_unchecked(grid, y),
        yp: GridFunction::from_vec_unchecked(grid, yp),
    }
}

pub(crate) fn free_solution_values(grid: Grid, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let c = cumtrapz(grid, w);
    let q = c[grid.n()];
    let y = c
        .iter()
        .enumerate()
        .map(|(i, &ci)| ci - grid.node(i) * q)
        .collect();
    let yp = w.iter().map(|&wi| wi - q).collect();
    (y, yp)
}

/// The pair `(𝒦g, (𝒦g)')` computed as `-(Y, Y')(∫_0^· g)`.
///
/// This is the Green operator the path solvers iterate with: a solution then
/// satisfies `X = Y(ω - ∫_0^· f)` to rounding, so the maps `T` and `S` invert
/// each other exactly on the grid. It agrees with [`apply_kop`] and
/// [`apply_kop_derivative`] to `O(h²)`.
pub fn green_potential(g: &GridFunction) -> (GridFunction, GridFunction) {
    let grid = g.grid();
    let (kg, dkg) = green_potential_values(grid, g.values());
    (
        GridFunction::from_vec_unchecked(grid, kg),
        GridFunction::from_vec_unchecked(grid, dkg),
    )
}

pub(crate) fn green_potential_values(grid: Grid, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let c = cumtrapz(grid, g);
    let (y, yp) = free_solution_values(grid, &c);
    (
        y.into_iter().map(|v| -v).collect(),
        yp.into_iter().map(|v| -v).collect(),
    )
}

/// Nyström image of an integral operator: `L_{ij} = ℓ(t_i, t_j) w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    grid: Grid,
    kernel: DMatrix<f64>,
    weights: Vec<f64>,
}

impl KernelMatrix {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Raw kernel samples `ℓ(t_i, t_j)`.
    pub fn kernel_values(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// The matrix `ℓ(t_i, t_j) w_j`.
    pub fn entries(&self) -> DMatrix<f64> {
        let mut m = self.kernel.clone();
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col *= self.weights[j];
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction> {
        if v.grid() != self.grid {
            return Err(Error::GridMismatch {
                left: self.grid.n(),
                right: v.grid().n(),
            });
        }
        let wv = DVector::from_iterator(
            self.dim(),
            v.values().iter().zip(&self.weights).map(|(a, w)| a * w),
        );
        let out = &self.kernel * wv;
        Ok(GridFunction::from_vec_unchecked(
            self.grid,
            out.as_slice().to_vec(),
        ))
    }

    /// Quadrature estimate of `∫∫ ℓ(t,s)² dt ds`, the squared Hilbert-Schmidt norm.
    pub fn hs_norm_sq(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                let k = self.kernel[(i, j)];
                acc += self.weights[i] * self.weights[j] * k * k;
            }
        }
        acc
    }

    /// Symmetric kernel samples, to a relative tolerance of `1e-13`.
    pub fn kernel_is_symmetric(&self) -> bool {
        let n = self.dim();
        let scale = self.kernel.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (self.kernel[(i, j)] - self.kernel[(j, i)]).abs() > 1e-13 * scale {
                    return false;
                }
            }
        }
        true
    }

    /// `W^{1/2} ℓ W^{1/2}`; similar to [`Self::entries`], symmetric when `ℓ` is.
    pub(crate) fn symmetrized(&self) -> DMatrix<f64> {
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            sw[i] * self.kernel[(i, j)] * sw[j]
        })
    }
}

/// Samples `kernel` on the grid with trapezoid weights.
pub fn nystrom(kernel: impl Fn(f64, f64) -> f64, grid: Grid) -> KernelMatrix {
    let t = grid.nodes();
    let n = grid.len();
    KernelMatrix {
        grid,
        kernel: DMatrix::from_fn(n, n, |i, j| kernel(t[i], t[j])),
        weights: grid.weights(),
    }
}

/// One eigenpair of a Nyström matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: Complex64,
    /// Eigenvector normalized to unit weighted `L²` norm.
    pub vector: Vec<Complex64>,
}

impl EigenPair {
    /// Real part of the eigenvector as a grid function.
    pub fn real_vector(&self, grid: Grid) -> GridFunction {
        GridFunction::from_vec_unchecked(grid, self.vector.iter().map(|z| z.re).collect())
    }
}

/// All eigenvalues of the Nyström matrix, sorted by decreasing modulus.
///
/// Symmetric kernels go through a symmetric eigensolver on the weighted
/// similarity transform; everything else through a real Schur decomposition.
pub fn kop_eigenvalues(m: &KernelMatrix) -> Result<Vec<Complex64>> {
    let mut values: Vec<Complex64> = if m.kernel_is_symmetric() {
        symmetric_eigen(&m.symmetrized())?
            .0
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect()
    } else {
        general_eigenvalues(m.entries())?
    };
    sort_by_modulus(&mut values);
    Ok(values)
}

fn sort_by_modulus(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal))
    });
}

fn symmetric_eigen(s: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let eig = nalgebra::SymmetricEigen::try_new(s.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenFailure("symmetric QR iteration did not converge".into()))?;
    Ok((eig.eigenvalues, eig.eigenvectors))
}

pub(crate) fn general_eigenvalues(m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let schur = nalgebra::Schur::try_new(m, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::EigenFailure("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Leading `count` eigenpairs by modulus.
pub fn kop_eigensystem(m: &KernelMatrix, count: usize) -> Result<Vec<EigenPair>> {
    let count = count.min(m.dim());
    let w = m.weights();
    if m.kernel_is_symmetric() {
        let (vals, vecs) = symmetric_eigen(&m.symmetrized())?;
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| {
            vals[b]
                .abs()
                .partial_cmp(&vals[a].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(
                    vals[b]
                        .partial_cmp(&vals[a])
                        .unwrap_or(std::cmp::Ordering::Equal),
                )
        });
        return Ok(order
            .into_iter()
            .take(count)
            .map(|k| {
                // v = W^{-1/2} y has unit weighted norm because y has unit norm.
                let v: Vec<f64> = vecs
                    .column(k)
                    .iter()
                    .zip(w)
                    .map(|(y, wi)| y / wi.sqrt())
                    .collect();
                EigenPair {
                    value: Complex64::new(vals[k], 0.0),
                    vector: orient(v.into_iter().map(|x| Complex64::new(x, 0.0)).collect()),
                }
            })
            .collect());
    }

    let entries = m.entries();
    let values = {
        let mut v = general_eigenvalues(entries.clone())?;
        sort_by_modulus(&mut v);
        v
    };
    let mut pairs = Vec::with_capacity(count);
    for &lambda in values.iter().take(count) {
        let v = inverse_iteration(&entries, lambda, w)?;
        pairs.push(EigenPair {
            value: lambda,
            vector: v,
        });
    }
    Ok(pairs)
}

/// Eigenvector for an eigenvalue estimate by shifted inverse iteration.
fn inverse_iteration(m: &DMatrix<f64>, lambda: Complex64, w: &[f64]) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let scale = lambda.norm().max(m.amax()).max(1e-300);
    let shift = lambda + Complex64::new(scale * 1e-10, scale * 1e-10);
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        let base = Complex64::new(m[(i, j)], 0.0);
        if i == j {
            base - shift
        } else {
            base
        }
    });
    let lu = shifted.lu();
    let mut v = DVector::from_element(n, Complex64::new(1.0, 0.0));
    for _ in 0..3 {
        v = lu.solve(&v).ok_or_else(|| {
            Error::EigenFailure("singular shifted matrix in inverse iteration".into())
        })?;
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::EigenFailure("inverse iteration broke down".into()));
        }
        v /= Complex64::new(norm, 0.0);
    }
    let wnorm: f64 = v
        .iter()
        .zip(w)
        .map(|(z, wi)| wi * z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(orient(v.iter().map(|z| z / wnorm).collect()))
}

/// Rotates the vector so its largest entry is real and positive.
fn orient(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| {
            a.norm()
                .partial_cmp(&b.norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
    v
}
