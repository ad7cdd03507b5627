//! Path-by-path solution of `X = 𝒦 f(·, X, X') + Y(ω)`.
//!
//! Both iterative solvers work with the discrete Green operator of
//! [`green_potential`]: an iterate is always of the form
//! `(X, X') = (Y, Y')(ω - ∫_0^· v)` for some source `v`, so a converged
//! solution satisfies `X = Y(S(ω))` and `T(S(ω)) = ω` up to the fixed-point
//! residual.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::conditions::{condition_l_margin, Linearization, LinearizedCoefficients};
use crate::error::{Error, Result};
use crate::green::{apply_kop, apply_kop_derivative, free_solution_values, GreenKernel};
use crate::grid::{cumtrapz, sup_distance, Grid, GridFunction, SamplePath};
use crate::nonlinearity::Nonlinearity;

/// Reciprocal condition estimates below this mark a linear system singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Picard,
    Newton,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: GridFunction,
    pub xp: GridFunction,
    pub method: Method,
    pub iterations: usize,
    /// `sup |X - 𝒦f(X, X') - Y|`, taken jointly over `X` and `X'`.
    pub residual_sup: f64,
    pub converged: bool,
    /// `u₂(1)` for the problem linearized around `X`.
    pub condition_l_margin: Option<f64>,
    /// Smallest singular value of the system matrix (linear solves only).
    pub sigma_min: Option<f64>,
    /// Per-iteration step sizes (Picard) or residuals (Newton).
    pub history: Vec<f64>,
}

impl SolveReport {
    pub fn grid(&self) -> Grid {
        self.x.grid()
    }
}

fn eval_source(f: &dyn Nonlinearity, grid: Grid, x: &[f64], xp: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let t = grid.node(i);
        let v = f.f(t, x[i], xp[i]);
        if !v.is_finite() && x[i].is_finite() && xp[i].is_finite() {
            return Err(Error::NonFinite {
                t,
                x: x[i],
                y: xp[i],
                value: v,
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// `(Y, Y')(ω - ∫_0^· v)`.
fn potential(grid: Grid, w: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let c = cumtrapz(grid, v);
    let shifted: Vec<f64> = w.iter().zip(&c).map(|(a, b)| a - b).collect();
    free_solution_values(grid, &shifted)
}

/// `(Y + 𝒦v, Y' + (𝒦v)')` by trapezoid sums.
fn nystrom_map(grid: Grid, y: &[f64], yp: &[f64], v: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let v = GridFunction::from_vec_unchecked(grid, v);
    let kv = apply_kop(&v);
    let dkv = apply_kop_derivative(&v);
    (
        y.iter().zip(kv.values()).map(|(a, b)| a + b).collect(),
        yp.iter().zip(dkv.values()).map(|(a, b)| a + b).collect(),
    )
}

fn finish(grid: Grid, mut x: Vec<f64>, xp: Vec<f64>) -> (GridFunction, GridFunction) {
    x[0] = 0.0;
    x[grid.n()] = 0.0;
    (
        GridFunction::from_vec_unchecked(grid, x),
        GridFunction::from_vec_unchecked(grid, xp),
    )
}

fn margin_around(f: &dyn Nonlinearity, x: &GridFunction, xp: &GridFunction) -> Option<f64> {
    let coeffs = LinearizedCoefficients::along(f, x, xp, Linearization::AroundX).ok()?;
    condition_l_margin(&coeffs).ok()
}

/// Discretization of `v ↦ (𝒦v, (𝒦v)')` used by the Picard map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GreenScheme {
    /// `-(Y, Y')(∫_0^· v)`: keeps `T∘S = I` and `Y∘S = X` exact on the grid.
    #[default]
    PathConsistent,
    /// Trapezoid Nyström sums with `K` and `∂_t K`; the same discretization
    /// as [`linear_solve`], differing from the default by `O(h²)`.
    Nystrom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: GreenScheme,
}

/// Picard iteration from `X¹ ≡ 0` with the path-consistent Green operator.
pub fn picard_solve(
    path: &SamplePath,
    f: &dyn Nonlinearity,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    picard_solve_with(
        path,
        f,
        &PicardOptions {
            tol,
            max_iter,
            scheme: GreenScheme::PathConsistent,
        },
    )
}

/// Picard iteration from `X¹ ≡ 0`.
///
/// Stops as soon as two successive iterates are within `tol`; the earlier of
/// the two is returned, so `residual_sup` is exactly its fixed-point defect.
/// Iterates that blow up by eight orders of magnitude end the run with
/// `converged = false`.
pub fn picard_solve_with(
    path: &SamplePath,
    f: &dyn Nonlinearity,
    opts: &PicardOptions,
) -> Result<SolveReport> {
    let (tol, max_iter) = (opts.tol, opts.max_iter);
    check_tolerances(tol, max_iter)?;
    let (y, yp) = match opts.scheme {
        GreenScheme::PathConsistent => (Vec::new(), Vec::new()),
        GreenScheme::Nystrom => free_solution_values(path.grid(), path.values()),
    };
    let grid = path.grid();
    let w = path.values();
    let mut x = vec![0.0; grid.len()];
    let mut xp = vec![0.0; grid.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    for k in 0..max_iter {
        let v = eval_source(f, grid, &x, &xp)?;
        let (nx, nxp) = match opts.scheme {
            GreenScheme::PathConsistent => potential(grid, w, &v),
            GreenScheme::Nystrom => nystrom_map(grid, &y, &yp, v),
        };
        let r = sup_distance(&nx, &x).max(sup_distance(&nxp, &xp));
        history.push(r);
        residual = r;
        if r <= tol {
            converged = true;
            iterations = k;
            break;
        }
        if !r.is_finite() || r > 1e8 * history[0].max(tol) {
            iterations = k;
            break;
        }
        x = nx;
        xp = nxp;
        iterations = k + 1;
    }

    let (x, xp) = finish(grid, x, xp);
    let margin = if converged {
        margin_around(f, &x, &xp)
    } else {
        None
    };
    Ok(SolveReport {
        x,
        xp,
        method: Method::Picard,
        iterations,
        residual_sup: residual,
        converged,
        condition_l_margin: margin,
        sigma_min: None,
        history,
    })
}

/// How Newton's linear systems are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NewtonLinearSolver {
    /// `O(n)` forward recursion exploiting the Volterra structure of the
    /// Jacobian plus one scalar boundary unknown.
    #[default]
    Sweep,
    /// Dense LU with partial pivoting; `O(n³)` per step.
    DenseLu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub linear_solver: NewtonLinearSolver,
    /// Initial `(X, X')`; `None` means `X ≡ 0`.
    pub warm_start: Option<(GridFunction, GridFunction)>,
}

impl NewtonOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            linear_solver: NewtonLinearSolver::Sweep,
            warm_start: None,
        }
    }
}

/// Newton's method with `X¹ ≡ 0` and the sweep linear solver.
pub fn newton_solve(
    path: &SamplePath,
    f: &dyn Nonlinearity,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    newton_solve_with(path, f, &NewtonOptions::new(tol, max_iter))
}

/// Damped Newton on the source `v = f(X, X')`, with `(X, X') = Φ(v)`.
///
/// The Jacobian of `v - f(Φ(v))` is `I - diag(a) 𝒦 - diag(b) 𝒦'` with
/// `a = f_x`, `b = f_y` frozen at the current iterate; it is the Nyström
/// operator of the linearized problem, acting on sources instead of states.
pub fn newton_solve_with(
    path: &SamplePath,
    f: &dyn Nonlinearity,
    opts: &NewtonOptions,
) -> Result<SolveReport> {
    check_tolerances(opts.tol, opts.max_iter)?;
    let grid = path.grid();
    let w = path.values();
    let mut v = match &opts.warm_start {
        Some((x0, xp0)) => {
            grid.check_same(&x0.grid())?;
            grid.check_same(&xp0.grid())?;
            eval_source(f, grid, x0.values(), xp0.values())?
        }
        None => {
            let zero = vec![0.0; grid.len()];
            eval_source(f, grid, &zero, &zero)?
        }
    };

    let mut history = Vec::new();
    let mut state = NewtonState::new(f, grid, w, v.clone())?;
    let mut converged = false;
    let mut iterations = 0;
    loop {
        history.push(state.residual);
        if state.residual <= opts.tol {
            converged = true;
            break;
        }
        if iterations == opts.max_iter || !state.residual.is_finite() {
            break;
        }
        iterations += 1;

        let (a, b) = derivatives(f, grid, &state.x, &state.xp);
        let rhs: Vec<f64> = state.g.iter().map(|g| -g).collect();
        let delta = match opts.linear_solver {
            NewtonLinearSolver::Sweep => sweep_solve(grid, &a, &b, &rhs),
            NewtonLinearSolver::DenseLu => dense_solve(grid, &a, &b, &rhs),
        }
        .map_err(|rcond| Error::ResonantIterate {
            iteration: iterations,
            rcond,
        })?;

        let merit0 = state.merit();
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda >= 1.0 / 1024.0 {
            let trial: Vec<f64> = v.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let next = NewtonState::new(f, grid, w, trial.clone())?;
            if next.merit() <= (1.0 - 1e-4 * lambda) * merit0 {
                accepted = Some((trial, next));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, next)) => {
                v = trial;
                state = next;
            }
            None => break,
        }
    }

    let margin = margin_around_slices(f, grid, &state.x, &state.xp);
    let residual = state.residual;
    let (x, xp) = finish(grid, state.x, state.xp);
    Ok(SolveReport {
        x,
        xp,
        method: Method::Newton,
        iterations,
        residual_sup: residual,
        converged,
        condition_l_margin: margin,
        sigma_min: None,
        history,
    })
}

struct NewtonState {
    x: Vec<f64>,
    xp: Vec<f64>,
    /// `v - f(Φ(v))`.
    g: Vec<f64>,
    residual: f64,
}

impl NewtonState {
    fn new(f: &dyn Nonlinearity, grid: Grid, w: &[f64], v: Vec<f64>) -> Result<Self> {
        let (x, xp) = potential(grid, w, &v);
        let fv = eval_source(f, grid, &x, &xp)?;
        let g: Vec<f64> = v.iter().zip(&fv).map(|(a, b)| a - b).collect();
        // Φ(f(X)) - X = -(Y, Y')(∫ g) since Φ is affine in the source.
        let (ex, exp) = potential(grid, &vec![0.0; grid.len()], &g);
        let residual =
            ex.iter().chain(&exp).fold(
                0.0_f64,
                |m, e| if e.is_nan() { f64::NAN } else { m.max(e.abs()) },
            );
        Ok(Self { x, xp, g, residual })
    }

    fn merit(&self) -> f64 {
        let m = self.g.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        if m.is_finite() {
            m
        } else {
            f64::INFINITY
        }
    }
}

fn derivatives(f: &dyn Nonlinearity, grid: Grid, x: &[f64], xp: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (0..grid.len())
        .map(|i| {
            let t = grid.node(i);
            (f.f_x(t, x[i], xp[i]), f.f_y(t, x[i], xp[i]))
        })
        .unzip()
}

fn margin_around_slices(f: &dyn Nonlinearity, grid: Grid, x: &[f64], xp: &[f64]) -> Option<f64> {
    if !x.iter().chain(xp).all(|v| v.is_finite()) {
        return None;
    }
    let x = GridFunction::from_vec_unchecked(grid, x.to_vec());
    let xp = GridFunction::from_vec_unchecked(grid, xp.to_vec());
    margin_around(f, &x, &xp)
}

/// Solves `δ + a∘(E - t E_n) + b∘(C - E_n) = r`, where `C = ∫δ` and `E = ∫C`
/// by cumulative trapezoid.
///
/// Node by node the system is lower triangular once `Q = E_n` is known, so
/// every unknown is carried as an affine function `p + q Q` and `Q` is fixed
/// by the closing condition `E_n = Q`. Returns the reciprocal condition
/// estimate on failure.
pub(crate) fn sweep_solve(
    grid: Grid,
    a: &[f64],
    b: &[f64],
    r: &[f64],
) -> std::result::Result<Vec<f64>, f64> {
    let n = grid.n();
    let h = grid.step();
    let mut d = Vec::with_capacity(n + 1);
    d.push((r[0], b[0]));
    let (mut c, mut e) = ((0.0, 0.0), (0.0, 0.0));
    for i in 1..=n {
        let t = grid.node(i);
        let prev = d[i - 1];
        let diag = 1.0 + 0.5 * b[i] * h + 0.25 * a[i] * h * h;
        if diag.abs() < SINGULAR_RCOND {
            return Err(diag.abs());
        }
        let coupled = |sel: fn((f64, f64)) -> f64| {
            let (cv, ev, dv) = (sel(c), sel(e), sel(prev));
            a[i] * (ev + h * cv + 0.25 * h * h * dv) + b[i] * (cv + 0.5 * h * dv)
        };
        let p = (r[i] - coupled(|z| z.0)) / diag;
        let q = (a[i] * t + b[i] - coupled(|z| z.1)) / diag;
        let cur = (p, q);
        let c_next = (
            c.0 + 0.5 * h * (prev.0 + cur.0),
            c.1 + 0.5 * h * (prev.1 + cur.1),
        );
        e = (
            e.0 + 0.5 * h * (c.0 + c_next.0),
            e.1 + 0.5 * h * (c.1 + c_next.1),
        );
        c = c_next;
        d.push(cur);
    }
    let s = 1.0 - e.1;
    let rcond = s.abs() / e.1.abs().max(1.0);
    if rcond.is_nan() || rcond < SINGULAR_RCOND {
        return Err(if rcond.is_nan() { 0.0 } else { rcond });
    }
    let q_end = e.0 / s;
    Ok(d.into_iter().map(|(p, q)| p + q * q_end).collect())
}

/// Dense Jacobian `I - diag(a) 𝒦 - diag(b) 𝒦'` in source coordinates.
pub(crate) fn source_jacobian(grid: Grid, a: &[f64], b: &[f64]) -> DMatrix<f64> {
    let m = grid.len();
    let zero = vec![0.0; m];
    let mut jac = DMatrix::identity(m, m);
    let mut unit = vec![0.0; m];
    for j in 0..m {
        unit[j] = 1.0;
        // (𝒦 e_j, 𝒦' e_j) = -(Y, Y')(∫ e_j)
        let (kx, kxp) = potential(grid, &zero, &unit);
        for i in 0..m {
            jac[(i, j)] -= a[i] * kx[i] + b[i] * kxp[i];
        }
        unit[j] = 0.0;
    }
    jac
}

fn dense_solve(grid: Grid, a: &[f64], b: &[f64], r: &[f64]) -> std::result::Result<Vec<f64>, f64> {
    let jac = source_jacobian(grid, a, b);
    let sv = jac.clone().singular_values();
    let rcond = sv.min() / sv.max();
    if rcond.is_nan() || rcond < SINGULAR_RCOND {
        return Err(if rcond.is_nan() { 0.0 } else { rcond });
    }
    let rhs = DVector::from_column_slice(r);
    jac.lu()
        .solve(&rhs)
        .map(|x| x.as_slice().to_vec())
        .ok_or(0.0)
}

fn check_tolerances(tol: f64, max_iter: usize) -> Result<()> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    Ok(())
}

/// The interior block `h K(t_i, t_j)` of the Nyström matrix; its boundary
/// rows and columns vanish.
fn green_interior(grid: Grid) -> DMatrix<f64> {
    let n = grid.n();
    let h = grid.step();
    let kernel = GreenKernel::default();
    DMatrix::from_fn(n - 1, n - 1, |i, j| {
        h * kernel.k(grid.node(i + 1), grid.node(j + 1))
    })
}

fn linear_interior(grid: Grid, mu: f64) -> DMatrix<f64> {
    let m = grid.n() - 1;
    DMatrix::identity(m, m) - green_interior(grid) * mu
}

/// Smallest singular value of `I - μ 𝒦ₙ` over the full `(n+1)²` system.
pub fn linear_sigma_min(grid: Grid, mu: f64) -> f64 {
    let eig = SymmetricEigen::new(linear_interior(grid, mu));
    eig.eigenvalues.iter().fold(1.0_f64, |m, v| m.min(v.abs()))
}

/// Eigenvalues of the interior Nyström block `h K(t_i, t_j)`; the singular
/// values of `I - μ𝒦ₙ` are `|1 - μ λ|` together with two unit values.
pub fn nystrom_green_spectrum(grid: Grid) -> Vec<f64> {
    let eig = SymmetricEigen::new(green_interior(grid));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Direct solve of `(I - μ𝒦ₙ) X = Y(ω)` with the trapezoid Nyström matrix.
///
/// The system matrix is symmetric, so `σ_min` comes from its eigenvalues.
/// A reciprocal condition number below [`SINGULAR_RCOND`] is an error;
/// anything above is solved and reported, however ill-conditioned.
pub fn linear_solve(path: &SamplePath, mu: f64) -> Result<SolveReport> {
    let grid = path.grid();
    let n = grid.n();
    let (y, yp) = free_solution_values(grid, path.values());
    let a = linear_interior(grid, mu);
    let eig = SymmetricEigen::new(a.clone());
    let sv = eig.eigenvalues.iter().map(|v| v.abs());
    let (smin, smax) = sv.fold((1.0_f64, 1.0_f64), |(lo, hi), s| (lo.min(s), hi.max(s)));
    if (smin / smax).is_nan() || smin / smax < SINGULAR_RCOND {
        return Err(Error::SingularSystem { sigma_min: smin });
    }
    let rhs = DVector::from_iterator(n - 1, y[1..n].iter().copied());
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem { sigma_min: smin })?;
    let mut x = vec![0.0; n + 1];
    x[1..n].copy_from_slice(sol.as_slice());
    let xg = GridFunction::from_vec_unchecked(grid, x);

    let kx = apply_kop(&xg).scale(mu);
    let dkx = apply_kop_derivative(&xg).scale(mu);
    let xp: Vec<f64> = yp.iter().zip(dkx.values()).map(|(a, b)| a + b).collect();
    let residual = (0..=n)
        .map(|i| (xg.get(i) - kx.get(i) - y[i]).abs())
        .fold(0.0, f64::max);
    let margin = condition_l_margin(&LinearizedCoefficients {
        source: Linearization::AroundX,
        ..LinearizedCoefficients::constant(grid, mu, 0.0)
    })
    .ok();
    Ok(SolveReport {
        x: xg,
        xp: GridFunction::from_vec_unchecked(grid, xp),
        method: Method::Linear,
        iterations: 1,
        residual_sup: residual,
        converged: true,
        condition_l_margin: margin,
        sigma_min: Some(smin),
        history: vec![residual],
    })
}

/// `T(ω)_t = ω_t + ∫_0^t f(s, Y_s(ω), Y'_s(ω)) ds`.
pub fn apply_t(path: &SamplePath, f: &dyn Nonlinearity) -> Result<SamplePath> {
    let grid = path.grid();
    let (y, yp) = free_solution_values(grid, path.values());
    let v = eval_source(f, grid, &y, &yp)?;
    let c = cumtrapz(grid, &v);
    SamplePath::new(
        grid,
        path.values().iter().zip(&c).map(|(w, c)| w + c).collect(),
    )
}

/// `S(ω)_t = ω_t - ∫_0^t f(s, X_s, X'_s) ds` for a solution `X` on this path.
pub fn apply_s(
    path: &SamplePath,
    report: &SolveReport,
    f: &dyn Nonlinearity,
) -> Result<SamplePath> {
    let grid = path.grid();
    grid.check_same(&report.grid())?;
    let v = eval_source(f, grid, report.x.values(), report.xp.values())?;
    let c = cumtrapz(grid, &v);
    SamplePath::new(
        grid,
        path.values().iter().zip(&c).map(|(w, c)| w - c).collect(),
    )
}

/// The structural identities of a solve on its own path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralDefects {
    /// `sup |T(S(ω)) - ω|`.
    pub t_of_s: f64,
    /// `sup |Y(S(ω)) - X|`.
    pub y_of_s: f64,
    /// `X_0 == 0 && X_n == 0`, bitwise.
    pub endpoints_zero: bool,
}

pub fn structural_defects(
    path: &SamplePath,
    report: &SolveReport,
    f: &dyn Nonlinearity,
) -> Result<StructuralDefects> {
    let s = apply_s(path, report, f)?;
    let t_of_s = apply_t(&s, f)?.sup_distance(path)?;
    let (y, _) = free_solution_values(path.grid(), s.values());
    let y_of_s = sup_distance(&y, report.x.values());
    let n = path.grid().n();
    Ok(StructuralDefects {
        t_of_s,
        y_of_s,
        endpoints_zero: report.x.get(0) == 0.0 && report.x.get(n) == 0.0,
    })
}

/// Defect of the integro-differential form
/// `X'_t + ∫_0^t f(s, X_s, X'_s) ds = X'_0 + ω_t`, plus `|X_0| + |X_1|`.
pub fn residual(
    path: &SamplePath,
    x: &GridFunction,
    xp: &GridFunction,
    f: &dyn Nonlinearity,
) -> Result<f64> {
    let grid = path.grid();
    grid.check_same(&x.grid())?;
    grid.check_same(&xp.grid())?;
    let v = eval_source(f, grid, x.values(), xp.values())?;
    let c = cumtrapz(grid, &v);
    let w = path.values();
    let x0p = xp.get(0);
    let sup = (0..grid.len())
        .map(|i| (xp.get(i) + c[i] - x0p - w[i]).abs())
        .fold(0.0, f64::max);
    Ok(sup + x.get(0).abs() + x.get(grid.n()).abs())
}

/// Defect of the integral form `sup |X - 𝒦f(X, X') - Y|` over `X` and `X'`.
pub fn integral_residual(
    path: &SamplePath,
    x: &GridFunction,
    xp: &GridFunction,
    f: &dyn Nonlinearity,
) -> Result<f64> {
    let grid = path.grid();
    grid.check_same(&x.grid())?;
    grid.check_same(&xp.grid())?;
    let v = eval_source(f, grid, x.values(), xp.values())?;
    let (nx, nxp) = potential(grid, path.values(), &v);
    Ok(sup_distance(&nx, x.values()).max(sup_distance(&nxp, xp.values())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::{free_solution, green_potential, kop_eigensystem, nystrom};
    use crate::grid::{sample_wiener, RngSpec};
    use crate::nonlinearity::{BandAffine, Constant, GaussIntegral, Linear, Sine, SineXY, Zero};
    use std::f64::consts::PI;

    fn path(n: usize, stream: u64) -> SamplePath {
        sample_wiener(Grid::new(n).unwrap(), RngSpec::new(11, stream))
    }

    #[test]
    fn picard_zero_nonlinearity_returns_free_solution() {
        let w = path(256, 0);
        let rep = picard_solve(&w, &Zero, 1e-12, 10).unwrap();
        let fs = free_solution(&w);
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.residual_sup, 0.0);
        assert_eq!(rep.x, fs.y);
        assert_eq!(rep.xp, fs.yp);
    }

    #[test]
    fn picard_contracts_for_small_sine() {
        for s in 0..5 {
            let w = path(512, s);
            let rep = picard_solve(&w, &Sine { amplitude: 0.2 }, 1e-10, 50).unwrap();
            assert!(rep.converged, "stream {s}: {:?}", rep.history);
            assert!(rep.residual_sup <= 1e-8);
            let h = &rep.history;
            for k in 2..h.len() {
                assert!(h[k] < h[k - 1], "non-monotone decay {h:?}");
            }
            let rate = h[h.len() - 1] / h[h.len() - 2];
            assert!(rate < 0.1, "contraction factor {rate}");
        }
    }

    #[test]
    fn picard_matches_linear_solve() {
        for s in 0..3 {
            let w = path(512, s);
            let opts = PicardOptions {
                tol: 1e-12,
                max_iter: 200,
                scheme: GreenScheme::Nystrom,
            };
            let p = picard_solve_with(&w, &Linear { mu: 4.0 }, &opts).unwrap();
            let l = linear_solve(&w, 4.0).unwrap();
            assert!(p.converged);
            let d = p.x.sup_distance(&l.x).unwrap();
            assert!(d < 1e-6, "picard vs linear: {d}");
            // the default scheme differs from the Nyström one by O(h²)
            let c = picard_solve(&w, &Linear { mu: 4.0 }, 1e-12, 200).unwrap();
            let gap = c.x.sup_distance(&l.x).unwrap();
            assert!(gap < 4.0 * 4.0 / (512.0 * 512.0), "scheme gap {gap}");
        }
    }

    #[test]
    fn endpoints_are_exactly_zero() {
        let w = path(300, 4);
        for rep in [
            picard_solve(&w, &Sine { amplitude: 0.5 }, 1e-10, 100).unwrap(),
            newton_solve(&w, &GaussIntegral::default(), 1e-10, 30).unwrap(),
            linear_solve(&w, 3.0).unwrap(),
        ] {
            assert_eq!(rep.x.get(0), 0.0);
            assert_eq!(rep.x.get(300), 0.0);
        }
    }

    #[test]
    fn picard_gives_up_on_divergence() {
        let w = path(256, 1);
        let rep = picard_solve(&w, &Linear { mu: 20.0 }, 1e-10, 500).unwrap();
        assert!(!rep.converged);
        assert!(rep.iterations < 500);
    }

    #[test]
    fn non_finite_source_is_an_error() {
        let w = path(64, 0);
        let bad = crate::nonlinearity::FnNonlinearity::new(
            "bad",
            |_, x, _| if x > 0.0 { f64::NAN } else { 0.0 },
            |_, _, _| 0.0,
            |_, _, _| 0.0,
        );
        // The first iterate is Y, which is positive somewhere on this path.
        let fs = free_solution(&w);
        assert!(fs.y.values().iter().any(|&v| v > 0.0));
        let err = picard_solve(&w, &bad, 1e-8, 10).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn rejects_bad_tolerances() {
        let w = path(16, 0);
        assert!(picard_solve(&w, &Zero, 0.0, 10).is_err());
        assert!(newton_solve(&w, &Zero, 1e-8, 0).is_err());
    }

    #[test]
    fn newton_zero_nonlinearity() {
        let w = path(128, 2);
        let rep = newton_solve(&w, &Zero, 1e-12, 5).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 1);
        assert_eq!(rep.x, free_solution(&w).y);
    }

    #[test]
    fn sweep_agrees_with_dense_lu() {
        let g = Grid::new(64).unwrap();
        let a: Vec<f64> = (0..65)
            .map(|i| 20.0 + 5.0 * (i as f64 * 0.3).sin())
            .collect();
        let b: Vec<f64> = (0..65).map(|i| 1.5 * (i as f64 * 0.11).cos()).collect();
        let r: Vec<f64> = (0..65).map(|i| (i as f64 * 0.7).sin()).collect();
        let s = sweep_solve(g, &a, &b, &r).unwrap();
        let d = dense_solve(g, &a, &b, &r).unwrap();
        let err = sup_distance(&s, &d);
        assert!(err < 1e-11, "sweep vs dense {err}");
        // and it really solves the system
        let jac = source_jacobian(g, &a, &b);
        let back = &jac * DVector::from_column_slice(&s);
        assert!(sup_distance(back.as_slice(), &r) < 1e-11);
    }

    #[test]
    fn sweep_flags_resonance() {
        // Source-space Jacobian for a ≡ μ, b ≡ 0 is singular where the
        // discrete problem u'' + μ u = 0 has a Dirichlet solution.
        let g = Grid::new(128).unwrap();
        let h = g.step();
        // -D2 u = μ (u_{i-1} + 2u_i + u_{i+1}) / 4 on sin(πt)
        let lam = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let mu = lam / (PI * h / 2.0).cos().powi(2);
        let a = vec![mu; 129];
        let b = vec![0.0; 129];
        let r = vec![1.0; 129];
        assert!(sweep_solve(g, &a, &b, &r).is_err());
        assert!(sweep_solve(g, &vec![mu * 0.9; 129], &b, &r).is_ok());
    }

    #[test]
    fn newton_dense_and_sweep_agree() {
        let w = path(96, 3);
        let f = SineXY { ax: 3.0, by: 1.0 };
        let mut opts = NewtonOptions::new(1e-11, 30);
        let s = newton_solve_with(&w, &f, &opts).unwrap();
        opts.linear_solver = NewtonLinearSolver::DenseLu;
        let d = newton_solve_with(&w, &f, &opts).unwrap();
        assert!(s.converged && d.converged);
        assert!(s.x.sup_distance(&d.x).unwrap() < 1e-10);
    }

    #[test]
    fn newton_in_band_where_picard_diverges() {
        let f = BandAffine { lo: 15.0, hi: 30.0 };
        for s in 0..5 {
            let w = path(512, 100 + s);
            let n = newton_solve(&w, &f, 1e-10, 50).unwrap();
            assert!(n.converged, "{:?}", n.history);
            assert!(n.residual_sup <= 1e-8);
            let p = picard_solve(&w, &f, 1e-10, 200).unwrap();
            assert!(!p.converged);
        }
    }

    #[test]
    fn newton_gauss_integral() {
        let f = GaussIntegral::default();
        for s in 0..10 {
            let w = path(512, 200 + s);
            let n = newton_solve(&w, &f, 1e-10, 50).unwrap();
            assert!(n.converged);
            assert!(n.residual_sup <= 1e-8);
            assert!(n.condition_l_margin.unwrap() > 0.0);
        }
    }

    #[test]
    fn newton_quadratic_convergence() {
        let w = path(256, 7);
        let rep = newton_solve(&w, &GaussIntegral::default(), 1e-13, 50).unwrap();
        let h = &rep.history;
        assert!(rep.converged);
        // once in the basin, each residual is about the square of the last
        let k = h.iter().position(|&r| r < 1e-2).unwrap();
        if k + 2 < h.len() {
            assert!(h[k + 1] < 10.0 * h[k] * h[k] + 1e-13, "{h:?}");
        }
    }

    #[test]
    fn warm_start_from_solution_is_immediate() {
        let w = path(200, 8);
        let f = GaussIntegral::default();
        let first = newton_solve(&w, &f, 1e-11, 50).unwrap();
        let mut opts = NewtonOptions::new(1e-9, 50);
        opts.warm_start = Some((first.x.clone(), first.xp.clone()));
        let again = newton_solve_with(&w, &f, &opts).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn linear_solve_zero_mu_is_free_solution() {
        let w = path(128, 9);
        let rep = linear_solve(&w, 0.0).unwrap();
        let fs = free_solution(&w);
        assert!(rep.x.sup_distance(&fs.y).unwrap() < 1e-15);
        assert_eq!(rep.sigma_min, Some(1.0));
    }

    #[test]
    fn linear_solve_matches_eigen_expansion() {
        // Same matrix, diagonalized: X = Σ_k ⟨Y, e_k⟩ / (1 - μ λ_k) e_k.
        let g = Grid::new(128).unwrap();
        let w = sample_wiener(g, RngSpec::new(3, 0));
        let mu = 4.0;
        let rep = linear_solve(&w, mu).unwrap();
        let y = free_solution(&w).y;
        let km = nystrom(|t, s| GreenKernel::default().k(t, s), g);
        let pairs = kop_eigensystem(&km, 127).unwrap();
        let mut x = GridFunction::zeros(g);
        for p in &pairs {
            let e = p.real_vector(g);
            let c = y.weighted_dot(&e).unwrap() / (1.0 - mu * p.value.re);
            x = &x + &e.scale(c);
        }
        let d = x.sup_distance(&rep.x).unwrap();
        assert!(d < 1e-4, "spectral vs direct {d}");
    }

    #[test]
    fn linear_sigma_min_near_resonance() {
        let g = Grid::new(256).unwrap();
        assert!(linear_sigma_min(g, PI * PI) < 1e-3);
        assert!(linear_sigma_min(g, PI * PI / 2.0) > 0.4);
        let spec = nystrom_green_spectrum(g);
        let h = g.step();
        for (k, lam) in spec.iter().take(5).enumerate() {
            let exact = h * h / (4.0 * ((k + 1) as f64 * PI * h / 2.0).sin().powi(2));
            assert!(
                (lam - exact).abs() < 1e-12 * exact.max(1.0),
                "{lam} vs {exact}"
            );
        }
    }

    #[test]
    fn t_and_s_examples() {
        let w = path(64, 10);
        assert_eq!(apply_t(&w, &Zero).unwrap(), w);
        let t1 = apply_t(&w, &Constant(1.0)).unwrap();
        let g = w.grid();
        for i in 0..=64 {
            assert!((t1.get(i) - w.get(i) - g.node(i)).abs() < 1e-15);
        }
        let rep = picard_solve(&w, &Zero, 1e-12, 5).unwrap();
        assert_eq!(apply_s(&w, &rep, &Zero).unwrap(), w);
    }

    #[test]
    fn t_inverts_s_and_y_of_s_is_x() {
        let tol = 1e-9;
        for s in 0..4 {
            let w = path(512, 300 + s);
            for (f, rep) in [
                (
                    Box::new(Sine { amplitude: 0.2 }) as Box<dyn Nonlinearity>,
                    picard_solve(&w, &Sine { amplitude: 0.2 }, tol, 100).unwrap(),
                ),
                (
                    Box::new(GaussIntegral::default()),
                    newton_solve(&w, &GaussIntegral::default(), tol, 50).unwrap(),
                ),
            ] {
                assert!(rep.converged);
                let sw = apply_s(&w, &rep, f.as_ref()).unwrap();
                let back = apply_t(&sw, f.as_ref()).unwrap();
                assert!(back.sup_distance(&w).unwrap() <= 10.0 * tol);
                let ys = free_solution(&sw).y;
                assert!(ys.sup_distance(&rep.x).unwrap() <= 10.0 * tol);
            }
        }
    }

    #[test]
    fn residual_forms() {
        let w = path(512, 12);
        let fs = free_solution(&w);
        assert!(residual(&w, &fs.y, &fs.yp, &Zero).unwrap() < 1e-12);

        let f = Sine { amplitude: 0.2 };
        let rep = picard_solve(&w, &f, 1e-8, 100).unwrap();
        let r_int = residual(&w, &rep.x, &rep.xp, &f).unwrap();
        assert!(r_int <= 1e-6);
        let r_integral = integral_residual(&w, &rep.x, &rep.xp, &f).unwrap();
        assert_eq!(r_integral, rep.residual_sup);

        let g = w.grid();
        let bump = GridFunction::from_fn(g, |t| (PI * t).sin());
        let bump_p = GridFunction::from_fn(g, |t| PI * (PI * t).cos());
        let base = residual(&w, &rep.x, &rep.xp, &f).unwrap();
        let r = |eps: f64| {
            residual(
                &w,
                &(&rep.x + &bump.scale(eps)),
                &(&rep.xp + &bump_p.scale(eps)),
                &f,
            )
            .unwrap()
                - base
        };
        let (r1, r2) = (r(1e-4), r(2e-4));
        assert!((r2 / r1 - 2.0).abs() < 0.05, "{r1} {r2}");
    }

    #[test]
    fn green_potential_consistent_with_solver_map() {
        let w = path(64, 13);
        let g = w.grid();
        let v = GridFunction::from_fn(g, |t| (3.0 * t).cos());
        let (kx, kxp) = green_potential(&v);
        let (px, pxp) = potential(g, &vec![0.0; 65], v.values());
        assert_eq!(kx.values(), &px[..]);
        assert_eq!(kxp.values(), &pxp[..]);
    }
}
