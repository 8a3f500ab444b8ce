use std::fs;
use std::process::{Command, Output};

use fdcsi::scenario::{default_scenario, figure_preset, run_sweep, Figure};

fn fdcsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdcsi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn pout_prints_six_decimals() {
    let o = fdcsi(&[
        "pout",
        "--rho-tilde",
        "0",
        "--sigma-e-sq",
        "0",
        "--delta-db",
        "3.0103",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0.333333\n");
}

#[test]
fn usage_errors_exit_2() {
    let o = fdcsi(&[
        "pout",
        "--rho-tilde",
        "0",
        "--sigma-e-sq",
        "0",
        "--delta-db",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert_eq!(fdcsi(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(fdcsi(&["figure", "fig9"]).status.code(), Some(2));
    assert_eq!(
        fdcsi(&["throughput", "--scheme", "NOPE"]).status.code(),
        Some(2)
    );
}

#[test]
fn usage_error_writes_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig.csv");
    let o = fdcsi(&[
        "figure",
        "fig3",
        "--out",
        out.to_str().unwrap(),
        "--format",
        "png",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn numeric_failure_exits_1() {
    let o = fdcsi(&[
        "pout",
        "--rho-tilde",
        "1.5",
        "--sigma-e-sq",
        "0",
        "--delta-db",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("fig.svg");
    let o = fdcsi(&[
        "figure",
        "fig2",
        "--format",
        "svg",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn figure_csv_matches_library_serialization() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3.csv");
    let o = fdcsi(&[
        "figure",
        "fig3",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let file = fs::read_to_string(&out).unwrap();
    let lib = run_sweep(&figure_preset(Figure::Fig3)).unwrap().to_csv();
    assert_eq!(file, lib);
    assert_eq!(stdout(&fdcsi(&["figure", "fig3"])), lib);
}

#[test]
fn figure_csv_shows_full_duplex_gain() {
    let csv = stdout(&fdcsi(&["figure", "fig3"]));
    let value = |scheme: &str, inr: &str| -> f64 {
        csv.lines()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .find(|f| f[0] == scheme && f[2] == inr)
            .map(|f| f[3].parse().unwrap())
            .unwrap()
    };
    let ratio = value("FDCSI", "10") / value("PROBE", "10");
    assert!((ratio - 1.53).abs() <= 0.03, "{ratio}");
}

#[test]
fn svg_is_deterministic_with_one_line_per_scheme() {
    let a = fdcsi(&["figure", "fig3", "--format", "svg"]);
    let b = fdcsi(&["figure", "fig3", "--format", "svg"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let svg = stdout(&a);
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 5);
    for name in ["PCSI", "PROBE", "FDCSI", "FDDATA@0.1", "FDDATA@0.2"] {
        assert!(svg.contains(&format!(">{name}</text>")));
    }
}

#[test]
fn sweep_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("s.json");
    let mut cfg = default_scenario();
    cfg.sweep.values = vec![0.0, 10.0];
    fs::write(&cfg_path, cfg.to_json()).unwrap();
    let o = fdcsi(&["sweep", "--config", cfg_path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), run_sweep(&cfg).unwrap().to_csv());

    cfg.schemes.clear();
    fs::write(&cfg_path, cfg.to_json()).unwrap();
    let o = fdcsi(&["sweep", "--config", cfg_path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1);
    let o = fdcsi(&[
        "sweep",
        "--config",
        cfg_path.to_str().unwrap(),
        "--format",
        "svg",
    ]);
    assert_eq!(o.status.code(), Some(2));

    fs::write(&cfg_path, "{\"name\": 3}").unwrap();
    let o = fdcsi(&["sweep", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seeded_monte_carlo_columns() {
    let args = ["figure", "fig4", "--mc", "--samples", "2000", "--seed", "5"];
    let a = fdcsi(&args);
    let b = fdcsi(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(!stdout(&a).contains("NA"));
    let c = fdcsi(&["figure", "fig4", "--mc", "--samples", "2000", "--seed", "6"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn throughput_report() {
    let o = fdcsi(&["throughput", "--scheme", "FDDATA@0.2", "--inr-db", "-5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("scheme: FDDATA@0.2\n"));
    assert!(text.contains("downlink_mnats_per_s: "));
}

#[test]
fn rate_and_ase() {
    let o = fdcsi(&[
        "rate",
        "--gamma-hat-db",
        "0",
        "--snr-db",
        "0",
        "--delta-db",
        "0",
        "--gamma-gap-db",
        "0",
    ]);
    assert_eq!(stdout(&o), format!("{:.6}\n", 2f64.ln()));
    let o = fdcsi(&[
        "ase",
        "--rho-tilde",
        "1",
        "--sigma-e-sq",
        "0",
        "--delta-db",
        "0",
        "--snr-db",
        "0",
        "--gamma-gap-db",
        "0",
    ]);
    assert_eq!(stdout(&o), "0.596347\n");
}

#[test]
fn pilot_sim_matches_prediction() {
    let o = fdcsi(&[
        "pilot-sim",
        "--inr-db",
        "0",
        "--blocks",
        "20000",
        "--n-bs",
        "2",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let err: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("relative_error: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err < 0.05, "{text}");
}

#[test]
fn mc_validate_exit_status_tracks_pass_counts() {
    let o = fdcsi(&["mc-validate", "--samples", "20000", "--seed", "3"]);
    let text = stdout(&o);
    let passed = |metric: &str| -> usize {
        let line = text.lines().find(|l| l.starts_with(metric)).unwrap();
        line.split(&[' ', '/'][..]).nth(1).unwrap().parse().unwrap()
    };
    assert_eq!(text.lines().count(), 1 + 36 + 2);
    let all_pass = passed("pout:") == 36 && passed("rate:") == 36;
    assert_eq!(o.status.success(), all_pass);
    assert_eq!(o.status.code().unwrap() == 1, !all_pass);
}
