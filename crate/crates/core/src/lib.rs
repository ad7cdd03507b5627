//! Path-by-path numerics for the stochastic Dirichlet problem
//!
//! ```text
//! X''_t + f(t, X_t, X'_t) = dW_t/dt,   X_0 = X_1 = 0,
//! ```
//!
//! on a uniform grid over `[0, 1]`.

pub mod carleman;
pub mod conditions;
pub mod error;
pub mod girsanov;
pub mod green;
pub mod grid;
pub mod nonlinearity;
pub mod solver;
pub mod stats;

pub use carleman::{
    det2_closed_form, det2_eigen_product, det2_matrix, inverse_bound_estimate, resolvent_defect,
    resolvent_kernel, Det2Result, Det2Route, HSOperatorSpec, ResolventKernel,
};
pub use conditions::{
    alpha, beta, check_nonresonance_band, check_primo, check_secondo, condition_l_margin,
    is_resonant, shoot_fundamental, BandCheck, Criterion, Fundamental, Linearization,
    LinearizedCoefficients, PrimoCheck, ProbeBox,
};
pub use error::{Error, Result};
pub use girsanov::{
    dhg_kernel, eta_density, exp_moment_check, girsanov_ensemble, law_compare,
    linear_midpoint_second_moment, resonance_variance_check, skorohod_g, ExpMomentCheck,
    GirsanovSample, IdentitySummary, LawCompareConfig, LawComparison, LawReport, PathFunctional,
    ResonanceVariance, SolverKind,
};
pub use green::{
    apply_kop, apply_kop_derivative, eval_dk, eval_k, free_solution, green_potential,
    kop_eigensystem, kop_eigenvalues, nystrom, DiagonalConvention, EigenPair, FreeSolution,
    GreenKernel, KernelMatrix,
};
pub use grid::{
    cumulative_trapezoid, make_grid, quad_trapezoid, sample_wiener, shift_path, Grid, GridFunction,
    RngSpec, SamplePath,
};
pub use nonlinearity::{Bounds, Lipschitz, Nonlinearity};
pub use solver::{
    apply_s, apply_t, integral_residual, linear_sigma_min, linear_solve, newton_solve,
    newton_solve_with, nystrom_green_spectrum, picard_solve, picard_solve_with, residual,
    structural_defects, GreenScheme, Method, NewtonLinearSolver, NewtonOptions, PicardOptions,
    SolveReport, StructuralDefects,
};
pub use stats::SampleStats;
