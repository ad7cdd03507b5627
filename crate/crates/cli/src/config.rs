//! `key=value` configuration: parsing, merging and validation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::catalog::FSpec;

/// Seed used when a config does not set one.
pub const DEFAULT_SEED: u64 = 20_240_611;

pub const KEYS: &[&str] = &[
    "scenario",
    "n",
    "N",
    "paths",
    "seed",
    "f_spec",
    "tol",
    "max_iter",
    "output_dir",
    "assert",
    "a",
    "k",
    "mu_max",
    "mu_steps",
    "solver",
    "lattice",
    "svg",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Solve,
    LinearSweep,
    GirsanovCheck,
    Det2Compare,
    AlphaTable,
    ConditionCheck,
    ExpMoment,
    ResonanceVariance,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Solve,
        Scenario::LinearSweep,
        Scenario::GirsanovCheck,
        Scenario::Det2Compare,
        Scenario::AlphaTable,
        Scenario::ConditionCheck,
        Scenario::ExpMoment,
        Scenario::ResonanceVariance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Solve => "solve",
            Scenario::LinearSweep => "linear-sweep",
            Scenario::GirsanovCheck => "girsanov-check",
            Scenario::Det2Compare => "det2-compare",
            Scenario::AlphaTable => "alpha-table",
            Scenario::ConditionCheck => "condition-check",
            Scenario::ExpMoment => "exp-moment",
            Scenario::ResonanceVariance => "resonance-variance",
        }
    }

    /// Scenarios that report against `‖f‖₀`.
    pub fn needs_sup_f(self) -> bool {
        matches!(self, Scenario::GirsanovCheck | Scenario::ExpMoment)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|c| c.as_str()).collect();
                format!(
                    "unknown scenario {s:?}; expected one of {}",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Picard,
    Newton,
    Both,
}

impl SolverChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverChoice::Picard => "picard",
            SolverChoice::Newton => "newton",
            SolverChoice::Both => "both",
        }
    }
}

impl FromStr for SolverChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "picard" => Ok(SolverChoice::Picard),
            "newton" => Ok(SolverChoice::Newton),
            "both" => Ok(SolverChoice::Both),
            _ => Err(format!("solver must be picard, newton or both, got {s:?}")),
        }
    }
}

/// `L` and `K` ranges for the α/β table: `l_lo,l_hi,k_lo,k_hi,step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub l: (f64, f64),
    pub k: (f64, f64),
    pub step: f64,
}

impl Lattice {
    fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| lo + i as f64 * step).collect()
    }

    pub fn l_values(&self) -> Vec<f64> {
        Self::axis(self.l.0, self.l.1, self.step)
    }

    pub fn k_values(&self) -> Vec<f64> {
        Self::axis(self.k.0, self.k.1, self.step)
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.l.0, self.l.1, self.k.0, self.k.1, self.step
        )
    }
}

impl FromStr for Lattice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| {
                format!("lattice must be five numbers l_lo,l_hi,k_lo,k_hi,step, got {s:?}")
            })?;
        if v.len() != 5 || v.iter().any(|x| !x.is_finite()) {
            return Err(format!(
                "lattice must be five finite numbers l_lo,l_hi,k_lo,k_hi,step, got {s:?}"
            ));
        }
        if v[4] <= 0.0 || v[1] < v[0] || v[3] < v[2] {
            return Err(format!(
                "lattice needs step > 0 and ordered ranges, got {s:?}"
            ));
        }
        let lat = Lattice {
            l: (v[0], v[1]),
            k: (v[2], v[3]),
            step: v[4],
        };
        if lat.l_values().len() * lat.k_values().len() > 1_000_000 {
            return Err("lattice has more than 10^6 points".into());
        }
        Ok(lat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Grid subintervals.
    pub n: usize,
    /// Monte Carlo path count.
    pub paths: usize,
    pub seed: u64,
    pub f_spec: FSpec,
    pub tol: f64,
    pub max_iter: usize,
    pub output_dir: PathBuf,
    pub assert: bool,
    /// Exponent scale for `exp-moment`.
    pub a: f64,
    /// Mode for `resonance-variance`.
    pub k: u32,
    pub mu_max: f64,
    pub mu_steps: usize,
    pub solver: SolverChoice,
    pub lattice: Lattice,
    pub svg: bool,
}

impl ExperimentConfig {
    /// The config as `key=value` lines, readable back by [`parse_kv`].
    pub fn to_kv(&self) -> String {
        let pairs: [(&str, String); 16] = [
            ("scenario", self.scenario.to_string()),
            ("n", self.n.to_string()),
            ("N", self.paths.to_string()),
            ("seed", self.seed.to_string()),
            ("f_spec", self.f_spec.to_string()),
            ("tol", format!("{:?}", self.tol)),
            ("max_iter", self.max_iter.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("assert", self.assert.to_string()),
            ("a", format!("{:?}", self.a)),
            ("k", self.k.to_string()),
            ("mu_max", format!("{:?}", self.mu_max)),
            ("mu_steps", self.mu_steps.to_string()),
            ("solver", self.solver.as_str().to_string()),
            ("lattice", self.lattice.to_string()),
            ("svg", self.svg.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// A validated config plus any warnings raised while filling defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

/// Every violation found, in key order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violations(pub Vec<String>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for v in &self.0 {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped,
/// later duplicates win.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, Violations> {
    let mut map = BTreeMap::new();
    let mut bad = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            _ => bad.push(format!("line {}: expected key=value, got {line:?}", i + 1)),
        }
    }
    if bad.is_empty() {
        Ok(map)
    } else {
        Err(Violations(bad))
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

struct Reader<'a> {
    raw: &'a BTreeMap<String, String>,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn get<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> T {
        match self.raw.get(key) {
            None => default,
            Some(v) => parse(v).unwrap_or_else(|e| {
                self.errors.push(format!("{key}: {e}"));
                default
            }),
        }
    }

    fn positive_int(&mut self, key: &str, default: usize, min: usize) -> usize {
        self.get(key, default, |s| {
            let v: usize = s
                .parse()
                .map_err(|_| format!("expected a positive integer, got {s:?}"))?;
            if v < min {
                Err(format!("must be ≥ {min}, got {v}"))
            } else {
                Ok(v)
            }
        })
    }

    fn positive_real(&mut self, key: &str, default: f64) -> f64 {
        self.get(key, default, |s| {
            let v: f64 = s
                .parse()
                .map_err(|_| format!("expected a number, got {s:?}"))?;
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(format!("must be finite and > 0, got {s}"))
            }
        })
    }

    fn flag(&mut self, key: &str) -> bool {
        self.get(key, false, |s| {
            parse_bool(s).ok_or_else(|| format!("expected true or false, got {s:?}"))
        })
    }
}

/// Turns a raw map into a typed config, collecting every violation.
pub fn validate_config(raw: &BTreeMap<String, String>) -> Result<Validated, Violations> {
    let mut r = Reader {
        raw,
        errors: Vec::new(),
    };
    let mut warnings = Vec::new();

    for key in raw.keys() {
        if !KEYS.contains(&key.as_str()) {
            r.errors.push(format!("unknown key {key:?}"));
        }
    }
    if raw.contains_key("N") && raw.contains_key("paths") && raw["N"] != raw["paths"] {
        r.errors
            .push("N and paths are aliases but were given different values".into());
    }

    let scenario = match raw.get("scenario") {
        None => {
            r.errors.push("scenario is required".into());
            None
        }
        Some(s) => match s.parse::<Scenario>() {
            Ok(s) => Some(s),
            Err(e) => {
                r.errors.push(e);
                None
            }
        },
    };

    let n = r.get("n", 512, |s| {
        let v: i64 = s
            .parse()
            .map_err(|_| format!("expected an integer, got {s:?}"))?;
        if v < 2 {
            Err("n must be ≥ 2".to_string())
        } else {
            Ok(v as usize)
        }
    });
    let path_key = if raw.contains_key("N") { "N" } else { "paths" };
    let paths = r.positive_int(path_key, 10_000, 2);
    let seed = match raw.get("seed") {
        None => {
            warnings.push(format!(
                "warning: seed not set, using default seed {DEFAULT_SEED}"
            ));
            DEFAULT_SEED
        }
        Some(_) => r.get("seed", DEFAULT_SEED, |s| {
            s.parse::<u64>()
                .map_err(|_| format!("expected a non-negative integer, got {s:?}"))
        }),
    };
    let f_spec = r.get("f_spec", FSpec::parse("sine").unwrap(), FSpec::parse);
    let tol = r.positive_real("tol", 1e-10);
    let max_iter = r.positive_int("max_iter", 100, 1);
    let output_dir = r.get("output_dir", PathBuf::from("out"), |s| {
        if s.is_empty() {
            Err("must not be empty".into())
        } else {
            Ok(PathBuf::from(s))
        }
    });
    let assert = r.flag("assert");
    let a = r.positive_real("a", 1.0);
    let k = r.get("k", 1, |s| match s.parse::<u32>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected an integer ≥ 1, got {s:?}")),
    });
    let mu_max = r.positive_real("mu_max", 4.5 * PI * PI);
    let mu_steps = r.positive_int("mu_steps", 200, 1);
    let solver = r.get("solver", SolverChoice::Newton, |s| s.parse());
    let lattice = r.get("lattice", "-6,6,-1,6,0.5".parse().unwrap(), |s| s.parse());
    let svg = r.flag("svg");

    if let Some(sc) = scenario {
        if sc.needs_sup_f() && f_spec.build().bounds().sup_f.is_none() {
            r.errors.push(format!(
                "scenario {sc} needs a nonlinearity with a declared bound on |f|; {} has none",
                f_spec
            ));
        }
    }

    match (scenario, r.errors.is_empty()) {
        (Some(scenario), true) => Ok(Validated {
            config: ExperimentConfig {
                scenario,
                n,
                paths,
                seed,
                f_spec,
                tol,
                max_iter,
                output_dir,
                assert,
                a,
                k,
                mu_max,
                mu_steps,
                solver,
                lattice,
                svg,
            },
            warnings,
        }),
        _ => Err(Violations(r.errors)),
    }
}
