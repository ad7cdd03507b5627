//! One function per scenario. Each returns the files to write and the pass
//! conditions that `--assert` turns into the exit code.

use std::f64::consts::PI;

use rayon::prelude::*;
use stochbvp_core::{
    alpha, beta, check_nonresonance_band, check_primo, condition_l_margin, det2_closed_form,
    det2_eigen_product, det2_matrix, dhg_kernel, eta_density, exp_moment_check, is_resonant,
    law_compare, newton_solve, nystrom_green_spectrum, picard_solve, resonance_variance_check,
    sample_wiener, structural_defects, Error, Grid, HSOperatorSpec, IdentitySummary,
    LawCompareConfig, LinearizedCoefficients, Method, Nonlinearity, ProbeBox, RngSpec, SamplePath,
    SampleStats, SolveReport, SolverKind,
};

use crate::config::{ExperimentConfig, Scenario, SolverChoice};
use crate::output::{bar_plot, line_plot, num, Csv, Series};

/// Identities must hold to this multiple of the solver tolerance.
pub const IDENTITY_FACTOR: f64 = 10.0;
/// Fraction of paths a solver may fail on before a scenario is invalid.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;
pub const Z_LIMIT: f64 = 3.0;
/// `|det₂| ` below this counts as a zero in the μ-sweep.
pub const DET2_ZERO_TOL: f64 = 1e-6;
pub const SIGMA_DIP: f64 = 1e-3;
pub const SIGMA_FLOOR: f64 = 0.4;
pub const ROUTE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioOutput {
    /// `(file name, contents)`, relative to the output directory.
    pub files: Vec<(String, String)>,
    pub checks: Vec<Check>,
    /// Informational lines for the manifest.
    pub notes: Vec<String>,
}

impl ScenarioOutput {
    fn csv(&mut self, name: String, csv: &Csv) {
        self.files.push((name, csv.render()));
    }
}

pub fn run_scenario(cfg: &ExperimentConfig) -> Result<ScenarioOutput, Error> {
    let mut out = match cfg.scenario {
        Scenario::Solve => solve(cfg)?,
        Scenario::LinearSweep => linear_sweep(cfg)?,
        Scenario::GirsanovCheck => girsanov_check(cfg)?,
        Scenario::Det2Compare => det2_compare(cfg)?,
        Scenario::AlphaTable => alpha_table(cfg),
        Scenario::ConditionCheck => condition_check(cfg)?,
        Scenario::ExpMoment => exp_moment(cfg)?,
        Scenario::ResonanceVariance => resonance_variance(cfg)?,
    };
    if !cfg.svg {
        out.files.retain(|(name, _)| !name.ends_with(".svg"));
    }
    Ok(out)
}

fn rng(cfg: &ExperimentConfig) -> RngSpec {
    RngSpec::new(cfg.seed, 0)
}

fn base(cfg: &ExperimentConfig) -> String {
    cfg.scenario.as_str().to_string()
}

fn bool_cell(b: bool) -> String {
    b.to_string()
}

fn opt_num(x: Option<f64>) -> String {
    num(x.unwrap_or(f64::NAN))
}

fn methods(choice: SolverChoice) -> Vec<Method> {
    match choice {
        SolverChoice::Picard => vec![Method::Picard],
        SolverChoice::Newton => vec![Method::Newton],
        SolverChoice::Both => vec![Method::Newton, Method::Picard],
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Picard => "picard",
        Method::Newton => "newton",
        Method::Linear => "linear",
    }
}

fn run_solver(
    m: Method,
    path: &SamplePath,
    f: &dyn Nonlinearity,
    cfg: &ExperimentConfig,
) -> Result<SolveReport, Error> {
    match m {
        Method::Picard => picard_solve(path, f, cfg.tol, cfg.max_iter),
        _ => newton_solve(path, f, cfg.tol, cfg.max_iter),
    }
}

fn status(r: &Result<SolveReport, Error>) -> &'static str {
    match r {
        Ok(r) if r.converged => "converged",
        Ok(_) => "not-converged",
        Err(Error::ResonantIterate { .. }) => "resonant",
        Err(Error::NonFinite { .. }) => "non-finite",
        Err(_) => "error",
    }
}

fn identity_checks(ids: &IdentitySummary, tol: f64) -> Vec<Check> {
    let lim = IDENTITY_FACTOR * tol;
    vec![
        Check::new(
            "endpoints_zero",
            ids.endpoints_zero,
            format!("X_0 = X_n = 0 on {} converged solve(s)", ids.solves),
        ),
        Check::new(
            "t_of_s",
            ids.max_t_of_s <= lim,
            format!("max |T(S w) - w| = {:e} (limit {lim:e})", ids.max_t_of_s),
        ),
        Check::new(
            "y_of_s",
            ids.max_y_of_s <= lim,
            format!("max |Y(S w) - X| = {:e} (limit {lim:e})", ids.max_y_of_s),
        ),
    ]
}

struct SolveRow {
    status: &'static str,
    report: Option<SolveReport>,
    defects: Option<stochbvp_core::StructuralDefects>,
}

fn solve(cfg: &ExperimentConfig) -> Result<ScenarioOutput, Error> {
    let f = cfg.f_spec.build();
    let f = f.as_ref();
    let grid = Grid::new(cfg.n)?;
    let ms = methods(cfg.solver);
    let rows: Vec<Vec<SolveRow>> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = sample_wiener(grid, rng(cfg).offset(i));
            ms.iter()
                .map(|&m| {
                    let r = run_solver(m, &path, f, cfg);
                    let st = status(&r);
                    match r {
                        Ok(rep) => {
                            let defects = if rep.converged {
                                Some(structural_defects(&path, &rep, f)?)
                            } else {
                                None
                            };
                            Ok(SolveRow {
                                status: st,
                                report: Some(rep),
                                defects,
                            })
                        }
                        Err(Error::ResonantIterate { .. } | Error::NonFinite { .. }) => {
                            Ok(SolveRow {
                                status: st,
                                report: None,
                                defects: None,
                            })
                        }
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>, Error>>()
        })
        .collect::<Result<_, _>>()?;

    let mut csv = Csv::new(&[
        "path",
        "method",
        "status",
        "iterations",
        "residual",
        "margin_l",
        "t_of_s",
        "y_of_s",
        "x_mid",
    ]);
    let mut ids = IdentitySummary::default();
    let mut converged = vec![0usize; ms.len()];
    for (i, per_path) in rows.iter().enumerate() {
        for (j, row) in per_path.iter().enumerate() {
            if let Some(d) = &row.defects {
                ids.record(d);
                converged[j] += 1;
            }
            let rep = row.report.as_ref();
            csv.row(vec![
                i.to_string(),
                method_name(ms[j]).into(),
                row.status.into(),
                rep.map_or(0, |r| r.iterations).to_string(),
                opt_num(rep.map(|r| r.residual_sup)),
                opt_num(rep.and_then(|r| r.condition_l_margin)),
                opt_num(row.defects.map(|d| d.t_of_s)),
                opt_num(row.defects.map(|d| d.y_of_s)),
                opt_num(rep.filter(|r| r.converged).map(|r| r.x.at(0.5))),
            ]);
        }
    }

    let mut out = ScenarioOutput::default();
    out.csv(format!("{}.csv", base(cfg)), &csv);

    let first = rows.first().and_then(|r| r[0].report.as_ref());
    let path0 = sample_wiener(grid, rng(cfg));
    let y0 = stochbvp_core::free_solution(&path0);
    let mut pcsv = Csv::new(&["t", "omega", "y", "x", "xp"]);
    for k in 0..grid.len() {
        pcsv.row(vec![
            num(grid.node(k)),
            num(path0.get(k)),
            num(y0.y.get(k)),
            opt_num(first.map(|r| r.x.get(k))),
            opt_num(first.map(|r| r.xp.get(k))),
        ]);
    }
    out.csv(format!("{}_path.csv", base(cfg)), &pcsv);
    if let Some(r) = first {
        out.files.push((
            format!("{}.svg", base(cfg)),
            line_plot(
                "path 0",
                "t",
                &[
                    Series {
                        label: "Y",
                        points: (0..grid.len())
                            .map(|k| (grid.node(k), y0.y.get(k)))
                            .collect(),
                    },
                    Series {
                        label: "X",
                        points: (0..grid.len())
                            .map(|k| (grid.node(k), r.x.get(k)))
                            .collect(),
                    },
                ],
            ),
        ));
    }

    for (j, &m) in ms.iter().enumerate() {
        let failed = cfg.paths - converged[j];
        let line = format!(
            "{}: {}/{} path(s) converged",
            method_name(m),
            converged[j],
            cfg.paths
        );
        // With solver=both, Picard is run for comparison only.
        if cfg.solver == SolverChoice::Both && m == Method::Picard {
            out.notes.push(line);
        } else {
            out.checks.push(Check::new(
                &format!("{}_converged", method_name(m)),
                failed as f64 <= MAX_EXCLUDED_FRACTION * cfg.paths as f64,
                line,
            ));
        }
    }
    out.checks.extend(identity_checks(&ids, cfg.tol));
    Ok(out)
}

/// μ grid of the sweep: `mu_steps + 1` equispaced points plus the exact
/// resonances `π²/2`, `k²π²` inside the range.
pub fn sweep_mus(mu_max: f64, steps: usize) -> Vec<f64> {
    let mut mus: Vec<f64> = (0..=steps)
        .map(|i| mu_max * i as f64 / steps as f64)
        .collect();
    mus.push(PI * PI / 2.0);
    let mut k = 1.0;
    while k * k * PI * PI <= mu_max {
        mus.push(k * k * PI * PI);
        k += 1.0;
    }
    mus.retain(|&m| m <= mu_max);
    mus.sort_by(f64::total_cmp);
    mus.dedup();
    mus
}

/// `Π (1 - μλ) e^{μλ}` over a fixed spectrum of the Green operator.
pub fn det2_from_spectrum(spectrum: &[f64], mu: f64) -> f64 {
    spectrum
        .iter()
        .map(|&l| (1.0 - mu * l) * (mu * l).exp())
        .product()
}

fn det2_const(grid: Grid, mu: f64) -> Result<f64, Error> {
    Ok(det2_closed_form(&HSOperatorSpec::constant(grid, mu, 0.0))?.value)
}

/// Zero of `det₂` for constant `a = μ` in a sign-changing bracket.
fn bisect(grid: Grid, mut lo: f64, mut hi: f64) -> Result<f64, Error> {
    let mut flo = det2_const(grid, lo)?;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = det2_const(grid, mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepZero {
    pub mu: f64,
    pub bracket: (f64, f64),
    /// `true` when a sweep point itself is within [`DET2_ZERO_TOL`].
    pub on_grid: bool,
}

/// Zeros of a sampled curve: runs of near-zero samples, and sign changes
/// between consecutive samples away from zero (refined by `refine`).
pub fn locate_zeros(
    mus: &[f64],
    vals: &[f64],
    mut refine: impl FnMut(f64, f64) -> Result<f64, Error>,
) -> Result<Vec<SweepZero>, Error> {
    let mut zeros = Vec::new();
    let mut i = 0;
    while i < mus.len() {
        if vals[i].abs() < DET2_ZERO_TOL {
            let start = i;
            let mut best = i;
            while i < mus.len() && vals[i].abs() < DET2_ZERO_TOL {
                if vals[i].abs() < vals[best].abs() {
                    best = i;
                }
                i += 1;
            }
            zeros.push(SweepZero {
                mu: mus[best],
                bracket: (mus[start.saturating_sub(1)], mus[i.min(mus.len() - 1)]),
                on_grid: true,
            });
            continue;
        }
        if i + 1 < mus.len()
            && vals[i + 1].abs() >= DET2_ZERO_TOL
            && (vals[i] > 0.0) != (vals[i + 1] > 0.0)
        {
            zeros.push(SweepZero {
                mu: refine(mus[i], mus[i + 1])?,
                bracket: (mus[i], mus[i + 1]),
                on_grid: false,
            });
        }
        i += 1;
    }
    Ok(zeros)
}

fn linear_sweep(cfg: &ExperimentConfig) -> Result<ScenarioOutput, Error> {
    let grid = Grid::new(cfg.n)?;
    let spectrum = nystrom_green_spectrum(grid);
    let mus = sweep_mus(cfg.mu_max, cfg.mu_steps);
    let mut csv = Csv::new(&["mu", "sigma_min", "det2_closed", "det2_eigen", "u2_at_1"]);
    let mut sigmas = Vec::with_capacity(mus.len());
    let mut dets = Vec::with_capacity(mus.len());
    for &mu in &mus {
        let sigma = spectrum
            .iter()
            .fold(1.0_f64, |m, &l| m.min((1.0 - mu * l).abs()));
        let closed = det2_closed_form(&HSOperatorSpec::constant(grid, mu, 0.0))?;
        let eigen = det2_from_spectrum(&spectrum, mu);
        csv.row(vec![
            num(mu),
            num(sigma),
            num(closed.value),
            num(eigen),
            opt_num(closed.margin_u2_1),
        ]);
        sigmas.push(sigma);
        dets.push(closed.value);
    }
    let zeros = locate_zeros(&mus, &dets, |lo, hi| bisect(grid, lo, hi))?;
    let mut zcsv = Csv::new(&[
        "mu_zero",
        "bracket_lo",
        "bracket_hi",
        "on_grid",
        "nearest_k2pi2",
    ]);
    for z in &zeros {
        let k = (z.mu.sqrt() / PI).round().max(1.0);
        zcsv.row(vec![
            num(z.mu),
            num(z.bracket.0),
            num(z.bracket.1),
            bool_cell(z.on_grid),
            num(k * k * PI * PI),
        ]);
    }

    let mut out = ScenarioOutput::default();
    out.csv(format!("{}.csv", base(cfg)), &csv);
    out.csv(format!("{}_zeros.csv", base(cfg)), &zcsv);
    out.files.push((
        format!("{}.svg", base(cfg)),
        line_plot(
            "sigma_min and det2 exp(-mu/6) against mu",
            "mu",
            &[
                Series {
                    label: "sigma_min",
                    points: mus.iter().copied().zip(sigmas.iter().copied()).collect(),
                },
                Series {
                    label: "det2_closed exp(-mu/6)",
                    points: mus
                        .iter()
                        .zip(&dets)
                        .map(|(&m, &d)| (m, d * (-m / 6.0).exp()))
                        .collect(),
                },
            ],
        ),
    ));

    let at = |target: f64| mus.iter().position(|&m| m == target).map(|i| sigmas[i]);
    if let Some(s) = at(PI * PI) {
        out.checks.push(Check::new(
            "sigma_min_dips_at_pi2",
            s < SIGMA_DIP,
            format!("sigma_min(pi^2) = {s:e} (limit {SIGMA_DIP:e})"),
        ));
    }
    if let Some(s) = at(PI * PI / 2.0) {
        out.checks.push(Check::new(
            "sigma_min_at_half_pi2",
            s > SIGMA_FLOOR,
            format!("sigma_min(pi^2/2) = {s} (floor {SIGMA_FLOOR})"),
        ));
    }
    let expected: Vec<f64> = (1..)
        .map(|k: u32| (k * k) as f64 * PI * PI)
        .take_while(|&m| m <= cfg.mu_max)
        .collect();
    let matched = zeros.len() == expected.len()
        && zeros
            .iter()
            .zip(&expected)
            .all(|(z, e)| (z.mu - e).abs() <= ROUTE_TOL * e);
    let found: Vec<String> = zeros.iter().map(|z| format!("{:.6}", z.mu)).collect();
    let want: Vec<String> = expected.iter().map(|e| format!("{e:.6}")).collect();
    out.checks.push(Check::new(
        "det2_zeros",
        matched,
        format!("zeros [{}], expected [{}]", found.join(" "), want.join(" ")),
    ));
    Ok(out)
}

fn girsanov_check(cfg: &ExperimentConfig) -> Result<ScenarioOutput, Error> {
    let f = cfg.f_spec.build();
    let mut lc = LawCompareConfig::new(cfg.paths, cfg.n, rng(cfg));
    lc.solver = match cfg.solver {
        SolverChoice::Picard => SolverKind::Picard,
        _ => SolverKind::Newton,
    };
    lc.tol = cfg.tol;
    lc.max_iter = cfg.max_iter;
    lc.max_excluded_fraction = MAX_EXCLUDED_FRACTION;
    let rep = law_compare(f.as_ref(), &lc)?;

    let mut csv = Csv::new(&[
        "functional",
        "lhs_mean",
        "lhs_stderr",
        "rhs_mean",
        "rhs_stderr",
        "z_score",
    ]);
    for c in &rep.comparisons {
        csv.row(vec![
            c.functional_name.clone(),
            num(c.lhs_mean),
            num(c.lhs_stderr),
            num(c.rhs_mean),
            num(c.rhs_stderr),
            num(c.z_score),
        ]);
    }
    let etas: Vec<f64> = rep.eta.iter().map(|s| s.eta).collect();
    let es = SampleStats::from_slice(&etas);
    let z_eta = es.mean_z(1.0);
    let mut ecsv = Csv::new(&[
        "paths",
        "solved",
        "excluded",
        "eta_mean",
        "eta_stderr",
        "eta_z",
        "eta_min",
        "eta_max",
    ]);
    ecsv.row(vec![
        cfg.paths.to_string(),
        rep.solved.to_string(),
        rep.excluded.to_string(),
        num(es.mean),
        num(es.stderr),
        num(z_eta),
        num(es.min),
        num(es.max),
    ]);

    let mut out = ScenarioOutput::default();
    out.csv(format!("{}.csv", base(cfg)), &csv);
    out.csv(format!("{}_eta.csv", base(cfg)), &ecsv);
    out.files.push((
        format!("{}.svg", base(cfg)),
        bar_plot(
            "law comparison z-scores",
            &rep.comparisons
                .iter()
                .map(|c| (c.functional_name.clone(), c.z_score))
                .collect::<Vec<_>>(),
            Z_LIMIT,
        ),
    ));

    out.checks.push(Check::new(
        "exclusions",
        rep.valid,
        format!("{} of {} path(s) excluded", rep.excluded, cfg.paths),
    ));
    let zmax = rep
        .comparisons
        .iter()
        .map(|c| c.z_score)
        .fold(f64::NEG_INFINITY, f64::max);
    out.checks.push(Check::new(
        "law_z_scores",
        !rep.comparisons.is_empty() && rep.comparisons.iter().all(|c| c.z_score <= Z_LIMIT),
        format!("max z = {zmax:.3} (limit {Z_LIMIT})"),
    ));
    out.checks.push(Check::new(
        "eta_mean",
        z_eta.abs() <= Z_LIMIT,
        format!(
            "E[eta] = {:.6} +- {:.6}, z = {z_eta:.3}",
            es.mean, es.stderr
        ),
    ));
    out.checks.push(Check::new(
        "eta_positive",
        es.min > 0.0,
        format!("min eta = {:e}", es.min),
    ));
    out.checks.extend(identity_checks(&rep.identities, cfg.tol));
    Ok(out)
}

fn det2_compare(cfg: &ExperimentConfig) -> Result<ScenarioOutput, Error> {
    let grid = Grid::new(cfg.n)?;
    let f = cfg.f_spec.build();
    let mut cases: Vec<(String, HSOperatorSpec)> = [
        ("const a=pi^2/4", PI * PI / 4.0, 0.0),
        ("const a=4", 4.0, 0.0),
        ("const a=-4", -4.0, 0.0),
        ("const a=4 b=1", 4.0, 1.0),
        ("const a=2 b=-0.5", 2.0, -0.5),
    ]
    .into_iter()
    .map(|(name, a, b)| (name.to_string(), HSOperatorSpec::constant(grid, a, b)))
    .collect();
    for i in 0..cfg.paths.min(3) as u64 {
        let path = sample_wiener(grid, rng(cfg).offset(i));
        cases.push((
            format!("path {i} {}", cfg.f_spec),
            dhg_kernel(&path, f.as_ref()),
        ));
    }

    let mut csv = Csv::new(&[
        "case",
        "det2_closed",
        "det2_eigen",
        "det2_matrix",
        "abs_diff_closed_eigen",
        "abs_diff_closed_matrix",
        "u2_at_1",
    ]);
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    let mut bars = Vec::new();
    for (idx, (name, spec)) in cases.iter().enumerate() {
        let closed = det2_closed_form(spec)?;
        let eigen = match det2_eigen_product(spec) {
            Ok(r) => r.value,
            Err(e @ Error::EigenFailure(_)) => {
                failures.push(format!("{name}: {e}"));
                f64::NAN
            }
            Err(e) => return Err(e),
        };
        let matrix = det2_matrix(spec)?.value;
        let d_eig = (closed.value - eigen).abs();
        worst = if d_eig.is_nan() {
            f64::NAN
        } else {
            worst.max(d_eig)
        };
        bars.push((idx.to_string(), d_eig));
        csv.row(vec![
            name.replace(',', ";"),
            num(closed.value),
            num(eigen),
            num(matrix),
            num(d_eig),
            num((closed.value - matrix).abs()),
            opt_num(closed.margin_u2_1),
        ]);
    }
    let mut out = ScenarioOutput::default();
    out.csv(format!("{}.csv", base(cfg)), &csv);
    out.files.push((
        format!("{}.svg", base(cfg)),
        bar_plot("|closed - eigen| by case", &bars, ROUTE_TOL),
    ));
    out.notes.extend(failures);
    out.checks.push(Check::new(
        "closed_vs_eigen",
        worst <= ROUTE_TOL,
        format!("max |closed - eigen| = {worst:e} (limit {ROUTE_TOL:e})"),
    ));
    Ok(out)
}

/// Rows appended after the lattice: the `K = L` threshold and the
/// monotone `K = 0` case.
pub const ALPHA_SPECIAL_ROWS: &[(f64, f64)] = &[
    (4.0, 4.0),
    (3.99, 3.99),
    (4.01, 4.01),
    (1.0, 0.0),
    (2.5, 0.0),
];

fn alpha_table(cfg: &ExperimentConfig) -> ScenarioOutput {
    let mut csv = Csv::new(&["L", "K", "alpha", "beta", "two_alpha_gt_1"]);
    let mut push = |l: f64, k: f64| {
        let a = alpha(l, k);
        csv.row(vec![
            num(l),
            num(k),
            num(a),
            num(beta(l, k)),
            bool_cell(2.0 * a > 1.0),
        ]);
    };
    for &l in &cfg.lattice.l_values() {
        for &k in &cfg.lattice.k_values() {
            push(l, k);
        }
    }
    for &(l, k) in ALPHA_SPECIAL_ROWS {
        push(l, k);
    }

    let mut out = ScenarioOutput::default();
    out.csv(format!("{}.csv", base(cfg)), &csv);
    let ls: Vec<f64> = (1..=160).map(|i| i as f64 * 0.05).collect();
    out.files.push((
        format!("{}.svg", base(cfg)),
        line_plot(
            "2 alpha(L, L) - 1",
            "L",
            &[Series {
                label: "2 alpha(L, L) - 1",
                points: ls
                    .iter()
                    .map(|&l| (l, check_primo(l, l).criterion.margin))
                    .collect(),
            }],
        ),
    ));

    let a44 = alpha(4.0, 4.0);
    out.checks.push(Check::new(
        "alpha_4_4",
        a44 == 0.5,
        format!("alpha(4, 4) = {a44}"),
    ));
    let (lo, hi) = (2.0 * alpha(3.99, 3.99) - 1.0, 2.0 * alpha(4.01, 4.01) - 1.0);
    out.checks.push(Check::new(
        "primo_threshold",
        lo > 0.0 && hi < 0.0,
        format!("2 alpha(L, L) - 1 = {lo:e} at 3.99, {hi:e} at 4.01"),
    ));
    let ls: Vec<f64> = cfg
        .lattice
        .l_values()
        .into_iter()
        .filter(|&l| l > 0.0)
        .chain([1.0, 2.5])
        .collect();
    let bad: Vec<f64> = ls
        .iter()
        .copied()
        .filter(|&l| beta(l, 0.0) != f64::INFINITY)
        .collect();
    out.checks.push(Check::new(
        "beta_monotone_infinite",
        bad.is_empty(),
        format!(
            "beta(L, 0) = inf for {} L > 0; finite at {bad:?}",
            ls.len() - bad.len()
        ),
    ));
    out
}

fn condition_check(cfg: &ExperimentConfig) -> Result<ScenarioOutput, Error> {
    let f = cfg.f_spec.build();
    let f = f.as_ref();
    let grid = Grid::new(cfg.n)?;
    struct Row {
        status: &'static str,
        report: Option<SolveReport>,
        margin_y: f64,
        det2_y: f64,
        eta: f64,
    }
    let rows: Vec<Row> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = sample_wiener(grid, rng(cfg).offset(i));
            let r = newton_solve(&path, f, cfg.tol, cfg.max_iter);
            let st = status(&r);
            let report = match r {
                Ok(rep) => Some(rep),
                Err(Error::ResonantIterate { .. } | Error::NonFinite { .. }) => None,
                Err(e) => return Err(e),
            };
            let margin_y =
                condition_l_margin(&LinearizedCoefficients::around_free_solution(f, &path))?;
            let (det2_y, eta) = match eta_density(&path, f) {
                Ok(s) => (s.det2, s.eta),
                Err(Error::ResonantOperator { .. }) => (0.0, f64::NAN),
                Err(e) => return Err(e),
            };
            Ok(Row {
                status: st,
                report,
                margin_y,
                det2_y,
                eta,
            })
        })
        .collect::<Result<_, Error>>()?;

    let mut csv = Csv::new(&[
        "path",
        "status",
        "iterations",
        "residual",
        "margin_x",
        "margin_y",
        "det2_y",
        "eta",
    ]);
    let mut solved = 0;
    let mut resonant_x = 0;
    let mut min_abs_margin = f64::INFINITY;
    let mut eta_bad = 0;
    for (i, r) in rows.iter().enumerate() {
        let rep = r.report.as_ref();
        let margin_x = rep
            .filter(|r| r.converged)
            .and_then(|r| r.condition_l_margin);
        if rep.is_some_and(|r| r.converged) {
            solved += 1;
            match margin_x {
                Some(m) if !is_resonant(m) => min_abs_margin = min_abs_margin.min(m.abs()),
                _ => resonant_x += 1,
            }
        }
        if !r.eta.is_finite() {
            eta_bad += 1;
        }
        csv.row(vec![
            i.to_string(),
            r.status.into(),
            rep.map_or(0, |r| r.iterations).to_string(),
            opt_num(rep.map(|r| r.residual_sup)),
            opt_num(margin_x),
            num(r.margin_y),
            num(r.det2_y),
            num(r.eta),
        ]);
    }

    let mut crit = Csv::new(&["criterion", "value", "holds"]);
    let lip = f.lipschitz();
    if let (Some(k), Some(l)) = (lip.k, lip.l) {
        let p = check_primo(k, l);
        crit.row(vec![
            format!("primo K={k} L={l}"),
            num(p.criterion.margin),
            bool_cell(p.criterion.holds),
        ]);
    }
    let mut out = ScenarioOutput::default();
    if cfg.f_spec.name == "band-affine" {
        let (lo, hi) = (cfg.f_spec.params[0], cfg.f_spec.params[1]);
        let m = (lo.max(0.0).sqrt() / PI).floor() as u32;
        let band = check_nonresonance_band(f, m, lo, hi, &ProbeBox::default())?;
        crit.row(vec![
            format!("band m={m} [{lo}; {hi}] min_fx"),
            num(band.min_fx),
            bool_cell(band.holds),
        ]);
        crit.row(vec![
            format!("band m={m} [{lo}; {hi}] max_fx"),
            num(band.max_fx),
            bool_cell(band.holds),
        ]);
        out.checks.push(Check::new(
            "nonresonance_band",
            band.holds,
            format!(
                "f' in [{:.6}, {:.6}], band m = {m}, admissible = {}",
                band.min_fx, band.max_fx, band.band_admissible
            ),
        ));
    }
    out.csv(format!("{}.csv", base(cfg)), &csv);
    out.csv(format!("{}_criteria.csv", base(cfg)), &crit);
    out.files.push((
        format!("{}.svg", base(cfg)),
        line_plot(
            "condition (L) margin u2(1) by path",
            "path",
            &[
                Series {
                    label: "around X",
                    points: rows
                        .iter()
                        .enumerate()
                        .filter_map(|(i, r)| {
                            r.report
                                .as_ref()
                                .and_then(|r| r.condition_l_margin)
                                .map(|m| (i as f64, m))
                        })
                        .collect(),
                },
                Series {
                    label: "around Y",
                    points: rows
                        .iter()
                        .enumerate()
                        .map(|(i, r)| (i as f64, r.margin_y))
                        .collect(),
                },
            ],
        ),
    ));
    out.checks.push(Check::new(
        "newton_converged",
        (cfg.paths - solved) as f64 <= MAX_EXCLUDED_FRACTION * cfg.paths as f64,
        format!("{solved}/{} path(s) solved", cfg.paths),
    ));
    out.checks.push(Check::new(
        "condition_l",
        resonant_x == 0,
        format!("{resonant_x} resonant solve(s); min |u2(1)| = {min_abs_margin:e}"),
    ));
    out.checks.push(Check::new(
        "eta_finite",
        eta_bad == 0,
        format!("{eta_bad} path(s) with non-finite eta"),
    ));
    Ok(out)
}

fn exp_moment(cfg: &ExperimentConfig) -> Result<ScenarioOutput, Error> {
    let f = cfg.f_spec.build();
    let r = exp_moment_check(f.as_ref(), cfg.a, cfg.paths, cfg.n, rng(cfg))?;
    let mut csv = Csv::new(&["a", "sup_f", "estimate", "stderr", "bound", "pass"]);
    csv.row(vec![
        num(cfg.a),
        opt_num(f.bounds().sup_f),
        num(r.estimate),
        num(r.stderr),
        num(r.bound),
        bool_cell(r.pass),
    ]);
    let mut out = ScenarioOutput::default();
    out.csv(format!("{}.csv", base(cfg)), &csv);
    out.checks.push(Check::new(
        "exp_moment_bound",
        r.pass,
        format!(
            "E[exp(a|delta|)] = {:.6} +- {:.6}, bound {:.6}",
            r.estimate, r.stderr, r.bound
        ),
    ));
    Ok(out)
}

fn resonance_variance(cfg: &ExperimentConfig) -> Result<ScenarioOutput, Error> {
    let r = resonance_variance_check(cfg.k, cfg.paths, cfg.n, rng(cfg))?;
    let z_mean = r.mean / r.mean_stderr;
    let z_var = (r.variance - r.target_variance) / r.variance_stderr;
    let mut csv = Csv::new(&[
        "k",
        "mean",
        "mean_stderr",
        "variance",
        "variance_stderr",
        "target_variance",
        "z_mean",
        "z_variance",
    ]);
    csv.row(vec![
        cfg.k.to_string(),
        num(r.mean),
        num(r.mean_stderr),
        num(r.variance),
        num(r.variance_stderr),
        num(r.target_variance),
        num(z_mean),
        num(z_var),
    ]);
    let mut out = ScenarioOutput::default();
    out.csv(format!("{}.csv", base(cfg)), &csv);
    out.checks.push(Check::new(
        "mean_zero",
        z_mean.abs() <= Z_LIMIT,
        format!("z = {z_mean:.3}"),
    ));
    out.checks.push(Check::new(
        "variance",
        z_var.abs() <= Z_LIMIT,
        format!(
            "variance {:.7} vs {:.7}, z = {z_var:.3}",
            r.variance, r.target_variance
        ),
    ));
    Ok(out)
}
