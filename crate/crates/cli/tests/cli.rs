use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stochbvp_cli::output::parse_csv;

fn stochbvp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochbvp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn help_and_version_exit_zero() {
    let o = stochbvp(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stdout).contains("--scenario"));
    assert_eq!(stochbvp(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let o = stochbvp(&["--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = stochbvp(&["--scenario", "teleport", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("unknown scenario \"teleport\""));
    let o = stochbvp(&["--config", "/definitely/not/here.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("cannot read config file"));
}

#[test]
fn violations_are_aggregated() {
    let dir = tempfile::tempdir().unwrap();
    let o = stochbvp(&[
        "--scenario",
        "solve",
        "--n",
        "1",
        "--tol",
        "0",
        "--set",
        "colour=blue",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    assert!(err.contains("3 problem(s)"), "{err}");
    assert!(err.contains("n must be ≥ 2"));
    assert!(err.contains("unknown key \"colour\""));
    assert!(listing(dir.path()).is_empty());
}

#[test]
fn girsanov_check_needs_bounded_f() {
    let dir = tempfile::tempdir().unwrap();
    let o = stochbvp(&[
        "--scenario",
        "girsanov-check",
        "--f",
        "linear",
        "--f-params",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("bound on |f|"));
}

#[test]
fn unwritable_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = stochbvp(&[
        "--scenario",
        "alpha-table",
        "--seed",
        "1",
        "--out",
        blocker.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("cannot create output directory"));
}

#[test]
fn missing_seed_warns_and_uses_default() {
    let dir = tempfile::tempdir().unwrap();
    let o = stochbvp(&[
        "--scenario",
        "alpha-table",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stderr).contains("warning: seed not set, using default seed 20240611"));
    let m = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(m.contains("seed=20240611"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            "# small solve\nscenario=solve\nn=64\nN=5\nseed=3\nf_spec=sine:0.5\noutput_dir={}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = stochbvp(&[
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "32",
        "--f-params",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let m = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(m.contains("\nn=32\n") && m.contains("f_spec=sine:0.1") && m.contains("N=5"));
    let (_, rows) = parse_csv(&fs::read_to_string(out.join("solve_path.csv")).unwrap());
    assert_eq!(rows.len(), 33);
}

#[test]
fn outputs_stay_inside_output_dir_and_have_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = stochbvp(&[
        "--scenario",
        "linear-sweep",
        "--n",
        "128",
        "--seed",
        "1",
        "--svg",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(listing(dir.path()), vec!["o"]);
    assert_eq!(
        listing(&out),
        vec![
            "linear-sweep.csv",
            "linear-sweep.svg",
            "linear-sweep_zeros.csv",
            "manifest.txt"
        ]
    );
    let (h, rows) = parse_csv(&fs::read_to_string(out.join("linear-sweep.csv")).unwrap());
    assert_eq!(
        h,
        vec!["mu", "sigma_min", "det2_closed", "det2_eigen", "u2_at_1"]
    );
    assert_eq!(rows.len(), 201 + 3);
    let (_, zeros) = parse_csv(&fs::read_to_string(out.join("linear-sweep_zeros.csv")).unwrap());
    assert_eq!(zeros.len(), 2);
}

#[test]
fn same_seed_same_bytes_and_manifest_replays() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |out: &Path| {
        vec![
            "--scenario".to_string(),
            "girsanov-check".into(),
            "--n".into(),
            "64".into(),
            "--paths".into(),
            "300".into(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let run = |out: &Path| {
        let v = args(out);
        let r: Vec<&str> = v.iter().map(String::as_str).collect();
        assert_eq!(stochbvp(&r).status.code(), Some(0));
    };
    run(&a);
    run(&b);
    for f in ["girsanov-check.csv", "girsanov-check_eta.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }

    // The manifest is itself a config file for the same run.
    let c = dir.path().join("c");
    let replay = fs::read_to_string(a.join("manifest.txt")).unwrap().replace(
        &format!("output_dir={}", a.display()),
        &format!("output_dir={}", c.display()),
    );
    let cfg = dir.path().join("replay.cfg");
    fs::write(&cfg, replay).unwrap();
    assert_eq!(
        stochbvp(&["--config", cfg.to_str().unwrap()]).status.code(),
        Some(0)
    );
    assert_eq!(
        fs::read(a.join("girsanov-check.csv")).unwrap(),
        fs::read(c.join("girsanov-check.csv")).unwrap()
    );
}

#[test]
fn assert_turns_failed_checks_into_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "--scenario",
        "solve",
        "--f",
        "band-affine",
        "--n",
        "128",
        "--paths",
        "10",
        "--seed",
        "2",
    ];
    let run = |extra: &[&str], out: &str| {
        let mut v: Vec<&str> = base.to_vec();
        v.extend_from_slice(extra);
        v.extend_from_slice(&["--out", out]);
        stochbvp(&v)
    };
    // Picard cannot solve in this band.
    let p = dir.path().join("p");
    let o = run(&["--set", "solver=picard", "--assert"], p.to_str().unwrap());
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stdout).contains("FAIL picard_converged"));
    let m = fs::read_to_string(p.join("manifest.txt")).unwrap();
    assert!(m.contains("# result: fail"));
    // Same failure without --assert is only reported.
    let o = run(
        &["--set", "solver=picard"],
        dir.path().join("q").to_str().unwrap(),
    );
    assert_eq!(o.status.code(), Some(0));
    // Newton passes.
    let o = run(&["--assert"], dir.path().join("n").to_str().unwrap());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stdout));
}

#[test]
fn alpha_table_columns_and_special_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = stochbvp(&[
        "--scenario",
        "alpha-table",
        "--seed",
        "0",
        "--set",
        "lattice=0,2,0,1,1",
        "--assert",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = parse_csv(&fs::read_to_string(dir.path().join("alpha-table.csv")).unwrap());
    assert_eq!(h, vec!["L", "K", "alpha", "beta", "two_alpha_gt_1"]);
    assert_eq!(rows.len(), 3 * 2 + 5);
    let r44 = rows
        .iter()
        .find(|r| r[0].parse::<f64>() == Ok(4.0) && r[1].parse::<f64>() == Ok(4.0))
        .unwrap();
    assert_eq!(r44[2].parse::<f64>().unwrap(), 0.5);
    assert_eq!(r44[4], "false");
}

#[test]
fn list_catalog() {
    let o = stochbvp(&["--list-f"]);
    assert_eq!(o.status.code(), Some(0));
    let s = text(&o.stdout);
    for name in ["zero", "linear", "sine", "gauss-integral", "band-affine"] {
        assert!(s.contains(name));
    }
}
