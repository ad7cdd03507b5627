//! Experiment harness around `stochbvp_core`: configuration, scenario
//! runs, CSV/SVG output and a run manifest.

pub mod catalog;
pub mod config;
pub mod output;
pub mod scenarios;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;

pub use config::{parse_kv, validate_config, ExperimentConfig, Scenario, Validated, Violations};
pub use scenarios::{run_scenario, Check, ScenarioOutput};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(Violations),
    Io { path: PathBuf, message: String },
    Numeric(stochbvp_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(v) => write!(f, "{v}"),
            CliError::Io { path, message } => {
                write!(f, "cannot write to {}: {message}", path.display())
            }
            CliError::Numeric(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<stochbvp_core::Error> for CliError {
    fn from(e: stochbvp_core::Error) -> Self {
        CliError::Numeric(e)
    }
}

/// What a run wrote and how its checks came out.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl RunOutcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Runs one scenario and writes its CSVs, optional SVGs and `manifest.txt`
/// into `cfg.output_dir`.
pub fn run(cfg: &ExperimentConfig, warnings: &[String]) -> Result<RunOutcome, CliError> {
    let start = Instant::now();
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.clone(),
        message: format!("cannot create output directory: {e}"),
    })?;
    let out = run_scenario(cfg)?;
    let mut files = Vec::new();
    for (name, contents) in &out.files {
        let path = dir.join(name);
        write_file(&path, contents)?;
        files.push(path);
    }

    let mut m = String::from("# stochbvp run manifest\n");
    m.push_str(&format!("# version: {VERSION}\n"));
    m.push_str(&format!(
        "# wall_time_s: {:.3}\n",
        start.elapsed().as_secs_f64()
    ));
    for w in warnings {
        m.push_str(&format!("# {w}\n"));
    }
    m.push_str(&cfg.to_kv());
    for (name, _) in &out.files {
        m.push_str(&format!("# file: {name}\n"));
    }
    for c in &out.checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        m.push_str(&format!("# check {tag} {}: {}\n", c.name, c.detail));
    }
    for n in &out.notes {
        m.push_str(&format!("# note: {n}\n"));
    }
    let all = out.checks.iter().all(|c| c.pass);
    m.push_str(&format!(
        "# result: {}\n",
        if all { "pass" } else { "fail" }
    ));
    let manifest = dir.join("manifest.txt");
    write_file(&manifest, &m)?;
    files.push(manifest);

    Ok(RunOutcome {
        files,
        checks: out.checks,
        notes: out.notes,
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "stochbvp",
    version,
    about = "Path-by-path experiments for X'' + f(t, X, X') = dW/dt, X(0) = X(1) = 0",
    after_help = "Flags override values read from --config. Exit codes: 0 success, \
                  1 usage or configuration error, 2 a check failed under --assert."
)]
struct Args {
    /// key=value config file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Grid subintervals.
    #[arg(long)]
    n: Option<String>,
    /// Monte Carlo path count.
    #[arg(long)]
    paths: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Catalog nonlinearity, optionally with parameters: `sine` or `sine:0.5`.
    #[arg(long = "f", value_name = "NAME")]
    f: Option<String>,
    /// Comma-separated parameters for --f (or for the config's f_spec).
    #[arg(long = "f-params", value_name = "P1,P2", allow_hyphen_values = true)]
    f_params: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long = "max-iter")]
    max_iter: Option<String>,
    /// Output directory.
    #[arg(long = "out", value_name = "DIR")]
    out: Option<String>,
    /// Turn the scenario's pass conditions into the exit code.
    #[arg(long)]
    assert: bool,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
    /// Any other config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the nonlinearity catalog and exit.
    #[arg(long = "list-f")]
    list_f: bool,
}

fn merged_config(args: &Args) -> Result<BTreeMap<String, String>, CliError> {
    let mut raw = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Usage(format!("cannot read config file {}: {e}", p.display()))
            })?;
            parse_kv(&text).map_err(CliError::Config)?
        }
        None => BTreeMap::new(),
    };
    let mut bad = Vec::new();
    for s in &args.set {
        match s.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                raw.insert(k.trim().to_string(), v.trim().to_string());
            }
            _ => bad.push(format!("--set expects KEY=VALUE, got {s:?}")),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Config(Violations(bad)));
    }
    let flags = [
        ("scenario", &args.scenario),
        ("n", &args.n),
        ("seed", &args.seed),
        ("f_spec", &args.f),
        ("tol", &args.tol),
        ("max_iter", &args.max_iter),
        ("output_dir", &args.out),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            raw.insert(k.to_string(), v.clone());
        }
    }
    if let Some(p) = &args.paths {
        raw.remove("paths");
        raw.insert("N".into(), p.clone());
    }
    if let Some(params) = &args.f_params {
        let current = raw.get("f_spec").map_or("sine", String::as_str);
        let name = current.split(':').next().unwrap_or(current).trim();
        raw.insert("f_spec".into(), format!("{name}:{params}"));
    }
    if args.assert {
        raw.insert("assert".into(), "true".into());
    }
    if args.svg {
        raw.insert("svg".into(), "true".into());
    }
    Ok(raw)
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    if args.list_f {
        let _ = write!(stdout, "{}", catalog::describe());
        return 0;
    }
    let result = merged_config(&args).and_then(|raw| {
        let v = validate_config(&raw).map_err(CliError::Config)?;
        for w in &v.warnings {
            let _ = writeln!(stderr, "{w}");
        }
        let outcome = run(&v.config, &v.warnings)?;
        Ok((v.config, outcome))
    });
    match result {
        Err(e) => {
            let _ = write!(stderr, "{e}");
            if !e.to_string().ends_with('\n') {
                let _ = writeln!(stderr);
            }
            e.exit_code()
        }
        Ok((cfg, outcome)) => {
            for c in &outcome.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                let _ = writeln!(stdout, "{tag} {}: {}", c.name, c.detail);
            }
            for n in &outcome.notes {
                let _ = writeln!(stdout, "note: {n}");
            }
            let _ = writeln!(
                stdout,
                "wrote {} file(s) to {}",
                outcome.files.len(),
                cfg.output_dir.display()
            );
            if cfg.assert && !outcome.all_pass() {
                let _ = writeln!(stderr, "assertion failed: at least one check did not pass");
                2
            } else {
                0
            }
        }
    }
}
