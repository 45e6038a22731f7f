use std::path::Path;
use std::process::{Command, Output};

use open_majorana::config::RunConfig;
use open_majorana::experiments::read_records;

fn majorana(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_majorana"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in\n{report}"))
        .parse()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn single_run_reports_ideal_efficiency() {
    let o = majorana(&["single", "--j", "1", "--gamma", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let eff = value(&stdout(&o), "efficiency");
    assert!((eff - 0.9984232).abs() < 1e-6, "{eff}");
    assert!(stdout(&o).contains("[metadata]"));
}

#[test]
fn invalid_spin_is_a_usage_error() {
    let o = majorana(&["single", "--j", "0.75"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("half-integer"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_and_preset_exit_2() {
    assert_eq!(code(&majorana(&["bogus"])), 2);
    let o = majorana(&["single", "--preset", "fig9"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("fig1"));
    assert_eq!(code(&majorana(&["single", "--channel", "Jw"])), 2);
}

#[test]
fn malformed_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "seed = 3\n[model]\nkapa = 0.2\n");
    let o = majorana(&["single", "--config", &cfg]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("kapa"), "{err}");
}

#[test]
fn integration_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.toml", "[integrator]\nmax_steps = 10\n");
    let o = majorana(&["single", "--config", &cfg]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn sweep_is_reproducible_and_writes_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small.toml",
        "[model]\nt0 = 60.0\n[sweep]\nj_list = [0.5, 1.0]\nchannels = [\"Jz\", \"Jx\"]\n\
         temperatures = [0.001]\ngamma_grid = [0.001, 0.1]\n",
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, workers) in [(&a, "1"), (&b, "2")] {
        let o = majorana(&[
            "sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", workers, "--no-timing",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let text_a = std::fs::read(&a).unwrap();
    assert_eq!(text_a, std::fs::read(&b).unwrap());
    let recs = read_records(text_a.as_slice()).unwrap();
    assert_eq!(recs.len(), 8);
    assert!(recs.iter().all(|r| !r.failed && r.wall_time_s == 0.0));

    let meta = RunConfig::from_path(&dir.path().join("a.csv.meta.toml")).unwrap();
    assert_eq!(meta.metadata.unwrap().subcommand, "sweep");
    assert_eq!(meta.model.t0, 60.0);
    assert_eq!(meta.sweep.j_list, vec![0.5, 1.0]);
}

#[test]
fn sweep_without_out_streams_csv() {
    let o = majorana(&["sweep", "--j", "0.5", "--gamma", "0.01", "--temp", "1", "--no-timing"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let recs = read_records(o.stdout.as_slice()).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!((recs[0].j, recs[0].gamma, recs[0].temperature), (0.5, 0.01, 1.0));
    assert!(stderr(&o).contains("[metadata]"));
}

#[test]
fn factorization_writes_report_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fact.toml");
    let o = majorana(&[
        "factorization", "--j", "1", "--gamma", "0.1", "--channel", "Jz", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = std::fs::read_to_string(&out).unwrap();
    assert!(value(&report, "unitary_residual") < 1e-6);
    assert!(value(&report, "lindblad_trace_distance") > 0.1);
    let checkpoints = std::fs::read_to_string(dir.path().join("fact.toml.checkpoints.csv")).unwrap();
    assert_eq!(checkpoints.lines().count(), 11);
    assert!(dir.path().join("fact.toml.meta.toml").exists());
}

#[test]
fn classical_noise_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cn.toml", "[classical_noise]\nn_traj = 40\nt_start = -2.0\nt_end = 2.0\n");
    let run = |seed: &str| {
        let o = majorana(&["classical-noise", "--config", &cfg, "--seed", seed]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        stdout(&o)
    };
    let a = run("5");
    assert_eq!(a, run("5"));
    assert_ne!(a, run("6"));
    assert!(value(&a, "statistical_error") > 0.0);
}
