use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsim")).args(args).output().expect("spawn fsim")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Data rows of a CSV written by `plot`: skips the metadata and header lines.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# seed="));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&fsim(&[])), 1);
    assert_eq!(code(&fsim(&["fit", "--bogus"])), 1);
    assert_eq!(code(&fsim(&["generate", "--link", "g9", "--n", "10", "--out", "x"])), 1);
    assert_eq!(code(&fsim(&["--help"])), 0);
}

#[test]
fn bad_data_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "logarea.t0,W\n1,2\n").unwrap();
    let out = fsim(&["fit", "--data", p(&csv), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("logarea.t1"));

    let missing = fsim(&["fit", "--data", p(&dir.path().join("none.csv")), "--out", p(dir.path())]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn unparseable_cell_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("s");
    assert_eq!(code(&fsim(&["synth-ecology", "--n", "5", "--seed", "1", "--out", p(&synth)])), 0);
    let text = fs::read_to_string(synth.join("data.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<&str> = lines[3].split(',').collect();
    cells[0] = "oops";
    lines[3] = cells.join(",");
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, lines.join("\n")).unwrap();
    let out = fsim(&["fit", "--data", p(&bad), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("oops") && err.contains('3'), "{err}");
}

#[test]
fn true_strategy_without_truth_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("s");
    fsim(&["synth-ecology", "--n", "30", "--out", p(&synth)]);
    let out = fsim(&["fit", "--data", p(&synth.join("data.csv")), "--strategy", "true", "--out", p(dir.path())]);
    assert_eq!(code(&out), 1);
}

#[test]
fn generate_fit_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let out = fsim(&["generate", "--link", "g3", "--n", "80", "--dim", "7", "--seed", "3", "--out", p(&gen)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let data = fs::read_to_string(gen.join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 81);
    assert!(data.starts_with("y,x.00,"));

    let fit_dir = dir.path().join("fit");
    let out = fsim(&[
        "fit",
        "--data",
        p(&gen.join("data.csv")),
        "--form",
        "functional",
        "--truth",
        p(&gen.join("truth.json")),
        "--strategy",
        "true,equal",
        "--grid-size",
        "4",
        "--budget",
        "400",
        "--out",
        p(&fit_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(fit_dir.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["candidates"].as_array().unwrap().len(), 2);
    assert_eq!(fit["index"].as_array().unwrap().len(), 80);

    let plots = dir.path().join("plots");
    let out = fsim(&[
        "plot",
        "--fit",
        p(&fit_dir.join("fit.json")),
        "--truth",
        p(&gen.join("truth.json")),
        "--svg",
        "--out",
        p(&plots),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["g.csv", "g2.csv"] {
        let r = rows(&plots.join(name));
        assert_eq!(r.len(), 1000);
        assert!(r.iter().all(|row| row.len() == 3));
    }
    assert_eq!(rows(&plots.join("beta.csv")).len(), 101);
    assert_eq!(rows(&plots.join("index_scatter.csv")).len(), 80);
    assert_eq!(rows(&plots.join("curvature_scatter.csv")).len(), 80);
    assert!(fs::read_dir(&plots)
        .unwrap()
        .any(|e| e.unwrap().path().extension().is_some_and(|x| x == "svg")));

    let bare = dir.path().join("bare");
    assert_eq!(code(&fsim(&["plot", "--fit", p(&fit_dir.join("fit.json")), "--out", p(&bare)])), 0);
    assert!(!bare.join("index_scatter.csv").exists());
    assert!(rows(&bare.join("g.csv")).iter().all(|row| row.len() == 2));
}

#[test]
fn simulate_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"links":["g2"],"n_values":[40],"strategies":["equal"],"method":"gcv","reps":2,"seed":5,"grid_size":3,"budget":200,"compare_rescale":true}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("sim");
    let out = fsim(&["simulate", "--config", p(&cfg), "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().next().unwrap().contains("rase2_original"));
    assert!(out_dir.join("table.json").exists());

    fs::write(&cfg, r#"{"links":["g2"],"n_values":[40],"strategies":["equal"],"method":"gcv","colour":1}"#).unwrap();
    assert_ne!(code(&fsim(&["simulate", "--config", p(&cfg), "--out", p(&out_dir)])), 0);
}

#[test]
fn seeded_commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert_eq!(code(&fsim(&["synth-ecology", "--n", "40", "--seed", "11", "--out", p(d)])), 0);
    }
    for f in ["data.csv", "truth.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}
