//! Carleman-Fredholm determinant `det₂(I + L)` for the kernel
//! `ℓ(t,s) = -a(t) K(t,s) - b(t) ∂_t K(t,s)`, and the resolvent kernel of
//! `I + L`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::conditions::{
    shoot_fundamental, Fundamental, Linearization, LinearizedCoefficients, RESONANCE_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::green::{kop_eigenvalues, nystrom, GreenKernel, KernelMatrix};
use crate::grid::{Grid, GridFunction};

/// Imaginary part of the eigenvalue product tolerated, relative to its modulus.
const IMAG_TOLERANCE: f64 = 1e-6;

/// Coefficients `a`, `b` of the Hilbert-Schmidt operator `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct HSOperatorSpec {
    pub a: GridFunction,
    pub b: GridFunction,
}

impl HSOperatorSpec {
    pub fn new(a: GridFunction, b: GridFunction) -> Result<Self> {
        a.grid().check_same(&b.grid())?;
        Ok(Self { a, b })
    }

    pub fn constant(grid: Grid, a: f64, b: f64) -> Self {
        Self {
            a: GridFunction::constant(grid, a),
            b: GridFunction::constant(grid, b),
        }
    }

    pub fn zero(grid: Grid) -> Self {
        Self::constant(grid, 0.0, 0.0)
    }

    pub fn grid(&self) -> Grid {
        self.a.grid()
    }

    /// `ℓ(t_i, s)` with the midpoint convention for `∂_t K` on the diagonal.
    pub fn kernel_at(&self, i: usize, s: f64) -> f64 {
        let t = self.grid().node(i);
        let g = GreenKernel::default();
        -self.a.get(i) * g.k(t, s) - self.b.get(i) * g.dk(t, s)
    }

    /// Nyström matrix of `L` with trapezoid weights.
    pub fn nystrom(&self) -> KernelMatrix {
        let grid = self.grid();
        let g = GreenKernel::default();
        nystrom(
            |t, s| {
                let i = grid.nearest_index(t);
                -self.a.get(i) * g.k(t, s) - self.b.get(i) * g.dk(t, s)
            },
            grid,
        )
    }

    fn coefficients(&self) -> LinearizedCoefficients {
        LinearizedCoefficients {
            a: self.a.clone(),
            b: self.b.clone(),
            source: Linearization::AroundY,
        }
    }
}

impl From<LinearizedCoefficients> for HSOperatorSpec {
    fn from(c: LinearizedCoefficients) -> Self {
        Self { a: c.a, b: c.b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Det2Route {
    ClosedForm,
    EigenProduct,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Det2Result {
    pub value: f64,
    pub route: Det2Route,
    /// `u₂(1)`, for the closed-form route.
    pub margin_u2_1: Option<f64>,
    /// `|Im Π| / |Π|`, for the eigenvalue route.
    pub imag_residue: Option<f64>,
}

/// `det₂(I + L) = u₂(1) · exp(∫_0^1 (t a(t) + b(t)) (1 - t) dt)`, where `u₂`
/// solves `u'' + b u' + a u = 0`, `u(0) = 0`, `u'(0) = 1`.
pub fn det2_closed_form(spec: &HSOperatorSpec) -> Result<Det2Result> {
    let fund = shoot_fundamental(&spec.coefficients())?;
    let grid = spec.grid();
    let u2_1 = fund.u2.get(grid.n());
    Ok(Det2Result {
        value: u2_1 * closed_form_exponent(spec).exp(),
        route: Det2Route::ClosedForm,
        margin_u2_1: Some(u2_1),
        imag_residue: None,
    })
}

/// `∫_0^1 (t a + b)(1 - t) dt` with `a`, `b` linear between nodes, by
/// Simpson's rule per cell (exact for that cubic integrand).
fn closed_form_exponent(spec: &HSOperatorSpec) -> f64 {
    let grid = spec.grid();
    let h = grid.step();
    let g = |t: f64, a: f64, b: f64| (t * a + b) * (1.0 - t);
    (0..grid.n())
        .map(|i| {
            let (t0, t1) = (grid.node(i), grid.node(i + 1));
            let (a0, a1) = (spec.a.get(i), spec.a.get(i + 1));
            let (b0, b1) = (spec.b.get(i), spec.b.get(i + 1));
            let mid = g(0.5 * (t0 + t1), 0.5 * (a0 + a1), 0.5 * (b0 + b1));
            h / 6.0 * (g(t0, a0, b0) + 4.0 * mid + g(t1, a1, b1))
        })
        .sum()
}

/// `Π (1 + λ_k) e^{-λ_k}` over all eigenvalues of the Nyström matrix of `L`.
///
/// The product is accumulated in complex arithmetic; a relative imaginary
/// part above `1e-6` is reported as an eigen-solver failure.
pub fn det2_eigen_product(spec: &HSOperatorSpec) -> Result<Det2Result> {
    let eig = kop_eigenvalues(&spec.nystrom())?;
    let prod = eig.iter().fold(Complex64::new(1.0, 0.0), |acc, &l| {
        acc * (1.0 + l) * (-l).exp()
    });
    let imag = if prod.norm() > 0.0 {
        prod.im.abs() / prod.norm()
    } else {
        0.0
    };
    if imag > IMAG_TOLERANCE {
        return Err(Error::EigenFailure(format!(
            "eigenvalue product has relative imaginary part {imag:e}"
        )));
    }
    Ok(Det2Result {
        value: prod.re,
        route: Det2Route::EigenProduct,
        margin_u2_1: None,
        imag_residue: Some(imag),
    })
}

/// `det(I + L) · exp(-tr L)` on the Nyström matrix.
pub fn det2_matrix(spec: &HSOperatorSpec) -> Result<Det2Result> {
    let l = spec.nystrom().entries();
    let m = l.nrows();
    let trace = l.trace();
    let det = (DMatrix::identity(m, m) + l).lu().determinant();
    Ok(Det2Result {
        value: det * (-trace).exp(),
        route: Det2Route::Matrix,
        margin_u2_1: None,
        imag_residue: None,
    })
}

/// The kernel `γ` of `(I + L)^{-1} = I - Γ`, sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventKernel {
    grid: Grid,
    /// `γ(t_i, t_j)`; on the diagonal, the mean of the two one-sided limits.
    pub values: DMatrix<f64>,
}

impl ResolventKernel {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// `γ(t_i, t_j) w_j`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let w = self.grid.weights();
        let mut m = self.values.clone();
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col *= w[j];
        }
        m
    }

    /// `(I - Γ) y`: the solution `u` of `(I + L) u = y`.
    pub fn solve(&self, y: &GridFunction) -> Result<GridFunction> {
        self.grid.check_same(&y.grid())?;
        let yv = nalgebra::DVector::from_column_slice(y.values());
        let u = &yv - self.matrix() * &yv;
        GridFunction::new(self.grid, u.as_slice().to_vec())
    }
}

fn reject_resonant(fund: &Fundamental, grid: Grid) -> Result<f64> {
    let u2_1 = fund.u2.get(grid.n());
    if u2_1.abs() < RESONANCE_THRESHOLD {
        return Err(Error::ResonantOperator { margin: u2_1 });
    }
    Ok(u2_1)
}

/// Resolvent kernel from the fundamental solutions.
///
/// With `M = u₁(1)/u₂(1)`, `φ = u₁ - M u₂`, `ψ = -φ` and `W = u₁u₂' - u₂u₁'`:
///
/// ```text
/// γ(t, s) =  (a ψ + b ψ')(t) u₂(s) / W(s)    for s < t
/// γ(t, s) = -(a u₂ + b u₂')(t) φ(s) / W(s)   for s > t
/// ```
pub fn resolvent_kernel(spec: &HSOperatorSpec) -> Result<ResolventKernel> {
    let grid = spec.grid();
    let fund = shoot_fundamental(&spec.coefficients())?;
    let u2_1 = reject_resonant(&fund, grid)?;
    let m = fund.u1.get(grid.n()) / u2_1;
    let w = fund.wronskian();
    let len = grid.len();
    let phi: Vec<f64> = (0..len)
        .map(|j| fund.u1.get(j) - m * fund.u2.get(j))
        .collect();
    let below: Vec<f64> = (0..len)
        .map(|i| {
            let psi = -phi[i];
            let psip = m * fund.u2p.get(i) - fund.u1p.get(i);
            spec.a.get(i) * psi + spec.b.get(i) * psip
        })
        .collect();
    let above: Vec<f64> = (0..len)
        .map(|i| -(spec.a.get(i) * fund.u2.get(i) + spec.b.get(i) * fund.u2p.get(i)))
        .collect();
    let values = DMatrix::from_fn(len, len, |i, j| {
        let lo = below[i] * fund.u2.get(j) / w.get(j);
        let hi = above[i] * phi[j] / w.get(j);
        match j.cmp(&i) {
            std::cmp::Ordering::Less => lo,
            std::cmp::Ordering::Greater => hi,
            std::cmp::Ordering::Equal => 0.5 * (lo + hi),
        }
    });
    Ok(ResolventKernel { grid, values })
}

/// Largest absolute row sum of `(I + L)(I - Γ) - I` and of `(I - Γ)(I + L) - I`.
pub fn resolvent_defect(spec: &HSOperatorSpec, gamma: &ResolventKernel) -> Result<(f64, f64)> {
    spec.grid().check_same(&gamma.grid())?;
    let l = spec.nystrom().entries();
    let g = gamma.matrix();
    let m = l.nrows();
    let id = DMatrix::<f64>::identity(m, m);
    let right = (&id + &l) * (&id - &g) - &id;
    let left = (&id - &g) * (&id + &l) - &id;
    Ok((inf_norm(&right), inf_norm(&left)))
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖(I + L)^{-1}‖` on `L²(0,1)`, estimated as `1/σ_min` of the Nyström
/// matrix in the trapezoid-weighted inner product.
pub fn inverse_bound_estimate(spec: &HSOperatorSpec) -> Result<f64> {
    let grid = spec.grid();
    let fund = shoot_fundamental(&spec.coefficients())?;
    reject_resonant(&fund, grid)?;
    let km = spec.nystrom();
    let sw: Vec<f64> = km.weights().iter().map(|w| w.sqrt()).collect();
    let m = km.dim();
    let l = km.entries();
    let sym = DMatrix::from_fn(m, m, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        sw[i] * (id + l[(i, j)]) / sw[j]
    });
    let sv = sym.singular_values();
    Ok(1.0 / sv.min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::condition_l_margin;
    use std::f64::consts::PI;

    /// `(sin √μ / √μ) e^{μ/6}`, the product `Π (1 - μ/(k²π²)) e^{μ/(k²π²)}`.
    fn constant_det2(mu: f64) -> f64 {
        let r = mu.sqrt();
        (r.sin() / r) * (mu / 6.0).exp()
    }

    /// The same product, truncated at `kmax` factors.
    fn truncated_product(mu: f64, kmax: usize) -> f64 {
        let mut log = 0.0;
        for k in 1..=kmax {
            let x = mu / ((k * k) as f64 * PI * PI);
            log += (1.0 - x).ln() + x;
        }
        log.exp()
    }

    #[test]
    fn identity_has_unit_determinant() {
        let g = Grid::new(64).unwrap();
        let z = HSOperatorSpec::zero(g);
        assert_eq!(det2_closed_form(&z).unwrap().value, 1.0);
        assert!((det2_eigen_product(&z).unwrap().value - 1.0).abs() < 1e-15);
        assert!((det2_matrix(&z).unwrap().value - 1.0).abs() < 1e-15);
        let gamma = resolvent_kernel(&z).unwrap();
        assert!(gamma.values.iter().all(|&v| v == 0.0));
        assert!((inverse_bound_estimate(&z).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_resonance_value() {
        let mu = PI * PI / 4.0;
        let g = Grid::new(1024).unwrap();
        let spec = HSOperatorSpec::constant(g, mu, 0.0);
        let closed = det2_closed_form(&spec).unwrap().value;
        let exact = 2.0 / PI * (PI * PI / 24.0).exp();
        assert!((closed - exact).abs() < 1e-5, "{closed} vs {exact}");
        // tail of Σ log((1-x)e^x) ≈ -Σ x²/2 beyond k = 10⁶ is below 1e-19
        let prod = truncated_product(mu, 1_000_000);
        assert!((prod - exact).abs() < 1e-12);
        let eig = det2_eigen_product(&spec).unwrap().value;
        assert!((eig - closed).abs() < 1e-3, "{eig} vs {closed}");
    }

    #[test]
    fn constant_coefficient_law() {
        let g = Grid::new(512).unwrap();
        for k in 1..=160 {
            let mu = k as f64 * 0.1 * PI * PI;
            let d = det2_closed_form(&HSOperatorSpec::constant(g, mu, 0.0)).unwrap();
            // relative to the envelope e^{μ/6}/√μ of the oscillating law
            let scale = ((mu / 6.0).exp() / mu.sqrt()).max(1.0);
            let err = (d.value - constant_det2(mu)).abs() / scale;
            assert!(err < 1e-5, "μ = {mu}: {err}");
        }
        for k in 1..=4 {
            let mu = (k * k) as f64 * PI * PI;
            let d = det2_closed_form(&HSOperatorSpec::constant(g, mu, 0.0)).unwrap();
            let scale = if k <= 2 {
                1.0
            } else {
                (mu / 6.0).exp() / mu.sqrt()
            };
            assert!(d.value.abs() < 1e-6 * scale, "zero at k = {k}: {}", d.value);
        }
    }

    #[test]
    fn sign_coherence_with_shooting_margin() {
        let g = Grid::new(256).unwrap();
        for k in 0..60 {
            let mu = -20.0 + 3.0 * k as f64;
            let spec = HSOperatorSpec::constant(g, mu, 0.7);
            let d = det2_closed_form(&spec).unwrap();
            let m = condition_l_margin(&spec.coefficients()).unwrap();
            assert_eq!(d.value.signum(), m.signum());
            assert_eq!(d.margin_u2_1, Some(m));
        }
    }

    #[test]
    fn matrix_route_equals_eigen_route() {
        let g = Grid::new(128).unwrap();
        let a = GridFunction::from_fn(g, |t| 6.0 + 4.0 * (5.0 * t).sin());
        let b = GridFunction::from_fn(g, |t| 1.0 - 2.0 * t);
        let spec = HSOperatorSpec::new(a, b).unwrap();
        let e = det2_eigen_product(&spec).unwrap();
        let m = det2_matrix(&spec).unwrap();
        assert!((e.value - m.value).abs() < 1e-10 * m.value.abs().max(1.0));
        assert!(e.imag_residue.unwrap() < 1e-10);
    }

    #[test]
    fn damped_routes_agree() {
        let g = Grid::new(512).unwrap();
        let spec = HSOperatorSpec::constant(g, 4.0, 1.0);
        let c = det2_closed_form(&spec).unwrap().value;
        let m = det2_matrix(&spec).unwrap().value;
        assert!((c - m).abs() < 1e-3, "{c} vs {m}");
    }

    #[test]
    fn wrong_exponent_is_ruled_out() {
        // ∫ (t a + (1 - t) b) for a ≡ μ, b ≡ 0 is μ/2.
        let mu = PI * PI / 4.0;
        let alt = 2.0 / PI * (mu / 2.0).exp();
        let g = Grid::new(256).unwrap();
        let m = det2_matrix(&HSOperatorSpec::constant(g, mu, 0.0))
            .unwrap()
            .value;
        assert!((alt - m).abs() > 1.0);
        assert!((constant_det2(mu) - m).abs() < 1e-3);
    }

    #[test]
    fn continuity_in_coefficients() {
        let g = Grid::new(256).unwrap();
        let base = HSOperatorSpec::constant(g, 5.0, 0.5);
        let d0 = det2_closed_form(&base).unwrap().value;
        let bump = GridFunction::from_fn(g, |t| (3.0 * t).cos());
        let mut slopes = Vec::new();
        for eps in [1e-2, 1e-3, 1e-4] {
            let spec = HSOperatorSpec::new(&base.a + &bump.scale(eps), base.b.clone()).unwrap();
            let d = det2_closed_form(&spec).unwrap().value;
            slopes.push((d - d0) / eps);
        }
        assert!((slopes[1] - slopes[2]).abs() < 1e-2 * slopes[2].abs());
        assert!((slopes[0] - slopes[2]).abs() < 1e-1 * slopes[2].abs());
    }

    #[test]
    fn resolvent_inverts_undamped() {
        let g = Grid::new(512).unwrap();
        let spec = HSOperatorSpec::constant(g, 4.0, 0.0);
        let gamma = resolvent_kernel(&spec).unwrap();
        let (r, l) = resolvent_defect(&spec, &gamma).unwrap();
        assert!(r < 1e-3 && l < 1e-3, "{r} {l}");

        let y = GridFunction::from_fn(g, |t| (PI * t).sin());
        let u = gamma.solve(&y).unwrap();
        let lu = spec.nystrom().apply(&u).unwrap();
        let back = &u + &lu;
        assert!(back.sup_distance(&y).unwrap() < 1e-3);
    }

    #[test]
    fn resolvent_inverts_variable_damped() {
        // With b ≠ 0 both ℓ and γ jump across the diagonal, and the product of
        // two averaged diagonal values costs O(h) in the composition.
        let defect = |n: usize| {
            let g = Grid::new(n).unwrap();
            let a = GridFunction::from_fn(g, |t| 8.0 + 6.0 * (4.0 * t).sin());
            let b = GridFunction::from_fn(g, |t| 1.5 * (2.0 * t).cos());
            let spec = HSOperatorSpec::new(a, b).unwrap();
            let gamma = resolvent_kernel(&spec).unwrap();
            let (r, l) = resolvent_defect(&spec, &gamma).unwrap();
            r.max(l)
        };
        let (d1, d2) = (defect(256), defect(512));
        assert!(d2 < 2.5e-3, "{d2}");
        assert!((d1 / d2 - 2.0).abs() < 0.2, "{d1} {d2}");
    }

    #[test]
    fn resolvent_small_operator_is_first_order() {
        // For L = εL₀, Γ = εL₀ + O(ε²).
        let g = Grid::new(128).unwrap();
        let eps = 1e-5;
        let spec = HSOperatorSpec::constant(g, 3.0 * eps, 2.0 * eps);
        let gamma = resolvent_kernel(&spec).unwrap();
        let l = spec.nystrom();
        let diff = (&gamma.values - l.kernel_values()).amax();
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn resonant_spec_rejected() {
        let g = Grid::new(256).unwrap();
        let spec = HSOperatorSpec::constant(g, PI * PI, 0.0);
        assert!(matches!(
            resolvent_kernel(&spec),
            Err(Error::ResonantOperator { .. })
        ));
        assert!(inverse_bound_estimate(&spec).is_err());
    }

    #[test]
    fn inverse_bound_grid_stable() {
        let mu = PI * PI / 4.0;
        let e1 =
            inverse_bound_estimate(&HSOperatorSpec::constant(Grid::new(256).unwrap(), mu, 0.0))
                .unwrap();
        let e2 =
            inverse_bound_estimate(&HSOperatorSpec::constant(Grid::new(512).unwrap(), mu, 0.0))
                .unwrap();
        assert!((e1 / e2 - 1.0).abs() < 0.1);
        // 1 / (1 - μ/π²) on the first eigenfunction
        assert!((e2 - 4.0 / 3.0).abs() < 1e-3, "{e2}");
    }
}
