//! The anticipative Girsanov density
//!
//! ```text
//! η(ω) = det₂(I + D_H G(ω)) · exp(-δ(G)(ω) - |G(ω)|²/2),   G_t = f(t, Y_t, Y'_t),
//! ```
//!
//! and Monte Carlo checks of the identity `E[φ(X)] = E[η φ(Y)]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::carleman::{det2_closed_form, HSOperatorSpec};
use crate::conditions::LinearizedCoefficients;
use crate::error::{Error, Result};
use crate::green::free_solution_values;
use crate::grid::{sample_wiener, trapezoid, Grid, GridFunction, RngSpec, SamplePath};
use crate::nonlinearity::Nonlinearity;
use crate::solver::{newton_solve, picard_solve, structural_defects, StructuralDefects};
use crate::stats::SampleStats;

/// Stream offset separating the two ensembles of [`law_compare`].
pub const RHS_STREAM_OFFSET: u64 = 1 << 32;

/// `D_H G(ω)` as the kernel `-a K - b ∂_t K`, with `a = f_x`, `b = f_y`
/// along `(Y(ω), Y'(ω))`.
pub fn dhg_kernel(path: &SamplePath, f: &dyn Nonlinearity) -> HSOperatorSpec {
    LinearizedCoefficients::around_free_solution(f, path).into()
}

struct Integrand {
    u: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

fn integrand(path: &SamplePath, f: &dyn Nonlinearity) -> Integrand {
    let grid = path.grid();
    let (y, yp) = free_solution_values(grid, path.values());
    let mut out = Integrand {
        u: Vec::with_capacity(grid.len()),
        a: Vec::with_capacity(grid.len()),
        b: Vec::with_capacity(grid.len()),
    };
    for i in 0..grid.len() {
        let t = grid.node(i);
        out.u.push(f.f(t, y[i], yp[i]));
        out.a.push(f.f_x(t, y[i], yp[i]));
        out.b.push(f.f_y(t, y[i], yp[i]));
    }
    out
}

fn skorohod_from(grid: Grid, path: &SamplePath, g: &Integrand) -> f64 {
    let h = grid.step();
    let w = path.values();
    let mut forward = 0.0;
    let mut trace = 0.0;
    for i in 0..grid.n() {
        let t = grid.node(i);
        forward += g.u[i] * (w[i + 1] - w[i]);
        // ∂Y_i/∂Δω_i and ∂Y'_i/∂Δω_i for the trapezoid free solution
        let tail = 1.0 - t - 0.5 * h;
        trace += g.a[i] * (-t * tail) + g.b[i] * (-tail);
    }
    forward - h * trace
}

/// Skorohod integral `δ(G)` of `u_t = f(t, Y_t, Y'_t)`.
///
/// Forward Riemann sum minus its trace correction
/// `h Σ_i ∂u_{t_i}/∂(ω_{i+1} - ω_i)`. The correction is taken from the grid
/// free solution itself, so the estimator is the exact divergence of the
/// discretized integrand and has mean zero for every `f`. Its continuum
/// limit is `∫ D_{t+} u_t dt = -∫ (a_t t(1-t) + b_t (1-t)) dt`.
pub fn skorohod_g(path: &SamplePath, f: &dyn Nonlinearity) -> f64 {
    skorohod_from(path.grid(), path, &integrand(path, f))
}

/// One path's contribution to the change of measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GirsanovSample {
    pub path_index: u64,
    pub delta_g: f64,
    pub det2: f64,
    /// `|G|²_{H₀} = ∫ u_t² dt`, left-point sum to match the forward sum.
    pub g_norm_sq: f64,
    pub eta: f64,
}

impl GirsanovSample {
    /// `det₂ · exp(-δ - |G|²/2)` recomputed from the stored parts.
    pub fn assembled_eta(&self) -> f64 {
        self.det2 * (-self.delta_g - 0.5 * self.g_norm_sq).exp()
    }
}

/// `η(ω)`, with `det₂` by the closed form.
pub fn eta_density(path: &SamplePath, f: &dyn Nonlinearity) -> Result<GirsanovSample> {
    eta_density_indexed(path, f, 0)
}

fn eta_density_indexed(
    path: &SamplePath,
    f: &dyn Nonlinearity,
    path_index: u64,
) -> Result<GirsanovSample> {
    let grid = path.grid();
    let g = integrand(path, f);
    let delta_g = skorohod_from(grid, path, &g);
    let g_norm_sq = grid.step() * g.u[..grid.n()].iter().map(|u| u * u).sum::<f64>();
    let spec = HSOperatorSpec {
        a: GridFunction::new(grid, g.a)?,
        b: GridFunction::new(grid, g.b)?,
    };
    let det2 = det2_closed_form(&spec)?.value;
    let mut s = GirsanovSample {
        path_index,
        delta_g,
        det2,
        g_norm_sq,
        eta: 0.0,
    };
    s.eta = s.assembled_eta();
    Ok(s)
}

/// `η` on paths `rng.stream_id + i`, `i < paths`, in path order.
pub fn girsanov_ensemble(
    f: &dyn Nonlinearity,
    paths: usize,
    n: usize,
    rng: RngSpec,
) -> Result<Vec<GirsanovSample>> {
    let grid = Grid::new(n)?;
    (0..paths as u64)
        .into_par_iter()
        .map(|i| eta_density_indexed(&sample_wiener(grid, rng.offset(i)), f, i))
        .collect()
}

/// Scalar functional of a solution path.
#[derive(Clone)]
pub enum PathFunctional {
    /// `x(1/2)`, at the nearest node.
    Midpoint,
    /// `x(1/2)²`.
    MidpointSquared,
    /// `max_i |x_i|`.
    SupAbs,
    /// `∫ x² dt` by the trapezoid rule.
    L2Squared,
    Custom(String, Arc<dyn Fn(&GridFunction) -> f64 + Send + Sync>),
}

impl PathFunctional {
    /// `x(1/2)`, `sup |x|`, `∫ x²`.
    pub fn defaults() -> Vec<Self> {
        vec![Self::Midpoint, Self::SupAbs, Self::L2Squared]
    }

    pub fn name(&self) -> String {
        match self {
            Self::Midpoint => "x(0.5)".into(),
            Self::MidpointSquared => "x(0.5)^2".into(),
            Self::SupAbs => "max|x|".into(),
            Self::L2Squared => "int x^2".into(),
            Self::Custom(name, _) => name.clone(),
        }
    }

    pub fn eval(&self, x: &GridFunction) -> f64 {
        match self {
            Self::Midpoint => x.at(0.5),
            Self::MidpointSquared => x.at(0.5).powi(2),
            Self::SupAbs => x.sup_norm(),
            Self::L2Squared => {
                let sq: Vec<f64> = x.values().iter().map(|v| v * v).collect();
                trapezoid(x.grid(), &sq)
            }
            Self::Custom(_, f) => f(x),
        }
    }
}

impl fmt::Debug for PathFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PathFunctional({})", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    Picard,
    #[default]
    Newton,
}

#[derive(Debug, Clone)]
pub struct LawCompareConfig {
    pub functionals: Vec<PathFunctional>,
    pub paths: usize,
    pub n: usize,
    pub rng: RngSpec,
    pub solver: SolverKind,
    pub tol: f64,
    pub max_iter: usize,
    /// Exclusions allowed before the comparison is flagged invalid.
    pub max_excluded_fraction: f64,
}

impl LawCompareConfig {
    pub fn new(paths: usize, n: usize, rng: RngSpec) -> Self {
        Self {
            functionals: PathFunctional::defaults(),
            paths,
            n,
            rng,
            solver: SolverKind::Newton,
            tol: 1e-10,
            max_iter: 100,
            max_excluded_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawComparison {
    pub functional_name: String,
    /// `E[φ(X)]` over solved paths.
    pub lhs_mean: f64,
    pub lhs_stderr: f64,
    /// `E[η φ(Y)]` over an independent ensemble.
    pub rhs_mean: f64,
    pub rhs_stderr: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawReport {
    pub comparisons: Vec<LawComparison>,
    pub solved: usize,
    pub excluded: usize,
    /// `false` when more than the allowed fraction of solves failed.
    pub valid: bool,
    /// Every converged left-hand solve, in path order; `None` for exclusions.
    pub lhs_values: Vec<Option<Vec<f64>>>,
    pub rhs_values: Vec<Vec<f64>>,
    pub eta: Vec<GirsanovSample>,
    /// Structural identities over the converged left-hand solves.
    pub identities: IdentitySummary,
}

/// Worst structural defects over a set of solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentitySummary {
    pub solves: usize,
    pub max_t_of_s: f64,
    pub max_y_of_s: f64,
    pub endpoints_zero: bool,
}

impl Default for IdentitySummary {
    fn default() -> Self {
        Self {
            solves: 0,
            max_t_of_s: 0.0,
            max_y_of_s: 0.0,
            endpoints_zero: true,
        }
    }
}

impl IdentitySummary {
    pub fn record(&mut self, d: &StructuralDefects) {
        self.solves += 1;
        self.max_t_of_s = self.max_t_of_s.max(d.t_of_s);
        self.max_y_of_s = self.max_y_of_s.max(d.y_of_s);
        self.endpoints_zero &= d.endpoints_zero;
    }

    pub fn merge(&mut self, other: &IdentitySummary) {
        self.solves += other.solves;
        self.max_t_of_s = self.max_t_of_s.max(other.max_t_of_s);
        self.max_y_of_s = self.max_y_of_s.max(other.max_y_of_s);
        self.endpoints_zero &= other.endpoints_zero;
    }
}

/// Compares `E[φ(X)]` on one ensemble with `E[η φ(Y)]` on an independent
/// one (streams offset by [`RHS_STREAM_OFFSET`]).
pub fn law_compare(f: &dyn Nonlinearity, cfg: &LawCompareConfig) -> Result<LawReport> {
    let grid = Grid::new(cfg.n)?;
    let funcs = &cfg.functionals;

    let lhs: Vec<Option<(Vec<f64>, StructuralDefects)>> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = sample_wiener(grid, cfg.rng.offset(i));
            let rep = match cfg.solver {
                SolverKind::Picard => picard_solve(&path, f, cfg.tol, cfg.max_iter),
                SolverKind::Newton => newton_solve(&path, f, cfg.tol, cfg.max_iter),
            };
            match rep {
                Ok(r) if r.converged => {
                    let d = structural_defects(&path, &r, f)?;
                    let vals = funcs.iter().map(|p| p.eval(&r.x)).collect();
                    Ok(Some((vals, d)))
                }
                Ok(_) | Err(Error::ResonantIterate { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut identities = IdentitySummary::default();
    for d in lhs.iter().flatten().map(|(_, d)| d) {
        identities.record(d);
    }
    let lhs_values: Vec<Option<Vec<f64>>> = lhs.into_iter().map(|o| o.map(|(v, _)| v)).collect();

    let rhs_rng = cfg.rng.offset(RHS_STREAM_OFFSET);
    let rhs: Vec<(GirsanovSample, Vec<f64>)> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = sample_wiener(grid, rhs_rng.offset(i));
            let s = eta_density_indexed(&path, f, i)?;
            let (y, _) = free_solution_values(grid, path.values());
            let y = GridFunction::new(grid, y)?;
            Ok((s, funcs.iter().map(|p| s.eta * p.eval(&y)).collect()))
        })
        .collect::<Result<_>>()?;
    let (eta, rhs_values): (Vec<_>, Vec<_>) = rhs.into_iter().unzip();

    let solved: Vec<&Vec<f64>> = lhs_values.iter().flatten().collect();
    let excluded = cfg.paths - solved.len();
    let valid = (excluded as f64) <= cfg.max_excluded_fraction * cfg.paths as f64;
    let comparisons = if solved.len() < 2 {
        Vec::new()
    } else {
        funcs
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let l: Vec<f64> = solved.iter().map(|v| v[k]).collect();
                let r: Vec<f64> = rhs_values.iter().map(|v| v[k]).collect();
                let (ls, rs) = (SampleStats::from_slice(&l), SampleStats::from_slice(&r));
                LawComparison {
                    functional_name: p.name(),
                    lhs_mean: ls.mean,
                    lhs_stderr: ls.stderr,
                    rhs_mean: rs.mean,
                    rhs_stderr: rs.stderr,
                    z_score: (ls.mean - rs.mean).abs() / ls.stderr.hypot(rs.stderr),
                }
            })
            .collect()
    };
    Ok(LawReport {
        comparisons,
        solved: solved.len(),
        excluded,
        valid,
        lhs_values,
        rhs_values,
        eta,
        identities,
    })
}

/// `E[X(1/2)²]` for `f(x) = μx`:
/// `Σ_{k odd} 2 (λ_k / (1 - μλ_k))²`, `λ_k = 1/(k²π²)`, `k ≤ kmax`.
///
/// From the expansion `Y = -Σ_k λ_k ξ_k e_k` with `e_k = √2 sin(kπt)` and
/// `ξ_k` i.i.d. standard normal.
pub fn linear_midpoint_second_moment(mu: f64, kmax: usize) -> f64 {
    (1..=kmax)
        .step_by(2)
        .map(|k| {
            let lam = 1.0 / ((k * k) as f64 * PI * PI);
            2.0 * (lam / (1.0 - mu * lam)).powi(2)
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpMomentCheck {
    pub estimate: f64,
    pub stderr: f64,
    /// `2 exp(a² ‖f‖₀² / 2)`.
    pub bound: f64,
    pub pass: bool,
}

/// Monte Carlo `E[exp(a |δ(G)|)]` against `2 exp(a² ‖f‖₀² / 2)`.
///
/// Passes when the estimate is at most `bound · (1 + 3 · relative stderr)`.
pub fn exp_moment_check(
    f: &dyn Nonlinearity,
    a: f64,
    paths: usize,
    n: usize,
    rng: RngSpec,
) -> Result<ExpMomentCheck> {
    let sup_f = f
        .bounds()
        .sup_f
        .ok_or_else(|| Error::MissingBound(f.name()))?;
    if a.is_nan() || a <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "a must be positive, got {a}"
        )));
    }
    let grid = Grid::new(n)?;
    let xs: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|i| (a * skorohod_g(&sample_wiener(grid, rng.offset(i)), f).abs()).exp())
        .collect();
    let s = SampleStats::from_slice(&xs);
    let bound = 2.0 * (0.5 * a * a * sup_f * sup_f).exp();
    Ok(ExpMomentCheck {
        estimate: s.mean,
        stderr: s.stderr,
        bound,
        pass: s.mean <= bound * (1.0 + 3.0 * s.stderr / s.mean),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceVariance {
    pub mean: f64,
    pub variance: f64,
    pub mean_stderr: f64,
    pub variance_stderr: f64,
    /// `1/(2k⁴π⁴)`.
    pub target_variance: f64,
}

/// Moments of the Itô sum `(1/(k²π²)) Σ_i sin(kπ t_i)(ω_{i+1} - ω_i)`.
pub fn resonance_variance_check(
    k: u32,
    paths: usize,
    n: usize,
    rng: RngSpec,
) -> Result<ResonanceVariance> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let grid = Grid::new(n)?;
    let kpi = k as f64 * PI;
    let scale = 1.0 / (kpi * kpi);
    let weights: Vec<f64> = (0..n).map(|i| (kpi * grid.node(i)).sin()).collect();
    let xs: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|i| {
            let p = sample_wiener(grid, rng.offset(i));
            scale
                * p.increments()
                    .zip(&weights)
                    .map(|(d, w)| d * w)
                    .sum::<f64>()
        })
        .collect();
    let s = SampleStats::from_slice(&xs);
    Ok(ResonanceVariance {
        mean: s.mean,
        variance: s.variance,
        mean_stderr: s.stderr,
        variance_stderr: s.variance_stderr(),
        target_variance: 0.5 * scale * scale,
    })
}
