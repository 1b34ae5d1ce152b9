use std::path::Path;
use std::process::{Command, Output};

use gcnsbm_cli::config::parse_config;
use gcnsbm_cli::spec::{Command as Cmd, RunSpec};
use gcnsbm_cli::table::read_csv;

fn gcnsbm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcnsbm"))
        .args(args)
        .current_dir(dir)
        .env_remove("GCNSBM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn flags_override_config() {
    let cfg = parse_config("lambda = 1\nreps = 3\n[sim]\nreps = 5\nc = 0:1:0.5\n", "run.cfg").unwrap();
    let flags = vec![("reps".to_string(), "2".to_string())];
    let s = RunSpec::build(Cmd::Sim, &cfg, &flags).unwrap();
    assert_eq!(s.settings.reps, 2);
    assert_eq!(s.panels[0].1.lambda, vec![1.0]);
    assert_eq!(s.panels[0].1.c, vec![0.0, 0.5, 1.0]);
    // The section wins over global keys, and other sections are ignored.
    let s = RunSpec::build(Cmd::Sim, &cfg, &[]).unwrap();
    assert_eq!(s.settings.reps, 5);
    let s = RunSpec::build(Cmd::Se, &cfg, &[]).unwrap();
    assert_eq!(s.settings.reps, 3);
    assert_eq!(s.panels[0].1.c, vec![1.0]);
}

#[test]
fn empty_config_equals_flags_alone() {
    let flags = vec![
        ("lambda".to_string(), "0.5,1".to_string()),
        ("c-grid".to_string(), "0:2:0.5".to_string()),
    ];
    let a = RunSpec::build(Cmd::Se, &parse_config("", "e").unwrap(), &flags).unwrap();
    let b = RunSpec::build(Cmd::Se, &[], &flags).unwrap();
    assert_eq!(a, b);
}

#[test]
fn preset_then_override() {
    let flags = vec![
        ("preset".to_string(), "fig1-top".to_string()),
        ("r".to_string(), "1".to_string()),
    ];
    let s = RunSpec::build(Cmd::Se, &[], &flags).unwrap();
    assert_eq!(s.points().len(), 3 * 5);
    assert!(s.points().iter().all(|p| p.r == 1.0 && p.lambda == 0.5));
}

#[test]
fn misspelled_key_suggests() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "alpha = 4\nlamda = 1\n").unwrap();
    let out = gcnsbm(dir.path(), &["se", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("line 2") && err.contains("lambda"), "{err}");

    let out = gcnsbm(dir.path(), &["se", "--lamda", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("--lambda"));
}

#[test]
fn rates_prints_both_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcnsbm(dir.path(), &["rates", "--model", "csbm", "--alpha", "4", "--mu", "3"]);
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    assert!(stdout.contains("gcn rate 0.250000") && stdout.contains("bayes-optimal rate 1"), "{stdout}");
    let rows = read_csv(&dir.path().join("rates.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].value, Some(1.0));
}

#[test]
fn se_accuracy_peaks_at_finite_c() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcnsbm(
        dir.path(),
        &[
            "se", "--lambda", "1.5", "--mu", "3", "--r", "1000", "--c-grid", "0:4:0.5", "--mc-count", "50000",
            "--output", "t.csv",
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let rows = read_csv(&dir.path().join("t.csv")).unwrap();
    let acc: Vec<f64> = rows.iter().map(|r| r.acc_test.unwrap()).collect();
    let best = (0..acc.len()).max_by(|&a, &b| acc[a].total_cmp(&acc[b])).unwrap();
    assert!(best > 0 && best + 1 < acc.len(), "{acc:?}");
}

#[test]
fn plot_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcnsbm(
        dir.path(),
        &["sweep", "--n", "400", "--reps", "2", "--c", "0,1", "--mc-count", "5000", "--output", "s.csv"],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let a = gcnsbm(dir.path(), &["plot", "--input", "s.csv", "--output", "a.svg"]);
    let b = gcnsbm(dir.path(), &["plot", "--input", "s.csv", "--output", "b.svg"]);
    assert!(a.status.success() && b.status.success());
    let a = std::fs::read(dir.path().join("a.svg")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.svg")).unwrap());
    assert!(text(&a).contains("<circle"));
}

#[test]
fn failed_point_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcnsbm(dir.path(), &["sim", "--n", "50", "--reps", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let rows = read_csv(&dir.path().join("sim.csv")).unwrap();
    assert!(rows.iter().all(|r| r.failure.contains("at least 100 nodes")));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gcnsbm"))
        .args(["cstar", "--preset", "fig4-left", "--format", "json"])
        .current_dir(dir.path())
        .env("GCNSBM_OUT_DIR", dir.path().join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", text(&out.stderr));
    let json = std::fs::read_to_string(dir.path().join("out/cstar-fig4-left.json")).unwrap();
    assert!(json.contains("\"c_star\""));
}

#[test]
fn fig4_right_needs_features() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcnsbm(dir.path(), &["sim", "--preset", "fig4-right"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("features"));
}

#[test]
fn simulation_on_ingested_features() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("f1,f2,f3,label\n");
    for i in 0..300 {
        let y = if i % 2 == 0 { 1 } else { 0 };
        let s = if y == 1 { 1.0 } else { -1.0 };
        csv.push_str(&format!("{},{},{},{}\n", s + (i as f64 * 0.37).sin(), (i as f64 * 1.3).cos(), (i % 7) as f64, y));
    }
    std::fs::write(dir.path().join("x.csv"), csv).unwrap();
    let out = gcnsbm(
        dir.path(),
        &["sim", "--features", "x.csv", "--label-column", "3", "--reps", "1", "--d", "10", "--output", "f.csv"],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let rows = read_csv(&dir.path().join("f.csv")).unwrap();
    assert_eq!(rows[0].n, Some(300));
    assert_eq!(rows[0].alpha, 100.0);
    assert!(rows[0].acc_test.unwrap() > 0.6);
}
