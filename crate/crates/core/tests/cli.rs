use std::path::Path;
use std::process::{Command, Output};

use medix::bounds::{estimate_sigma_robust, monte_carlo_coverage, BoundKind, CoverageScenario};
use medix::experiments::RunConfig;
use medix::filter::medix_filter_gradients;
use medix::rng::Philox;
use medix::stats::io::write_csv;
use medix::stats::GradientMatrix;
use medix::synth::Tail;
use tempfile::TempDir;

fn medix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medix")).args(args).env_remove("MEDIX_OUT_DIR").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn out_arg(dir: &TempDir) -> String {
    dir.path().to_str().unwrap().to_string()
}

#[test]
fn sweep_writes_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let o = medix(&["sweep", "--out", &out_arg(&dir), "--steps", "0,10,40,90", "--n-in", "200", "--dim", "6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&read(dir.path(), "sweep.csv"));
    assert_eq!(r.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["0", "10", "40", "90"]);
    let dev: Vec<f64> = r.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(dev[0] < dev[3]);
    assert!(dir.path().join("sweep.svg").exists());
    assert!(String::from_utf8_lossy(&o.stdout).contains("spearman"));
}

#[test]
fn bounds_table_at_even_contamination() {
    let dir = TempDir::new().unwrap();
    let o = medix(&["bounds", "--out", &out_arg(&dir), "--pi", "0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&read(dir.path(), "bounds.csv"));
    let kinds: Vec<&str> = r.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(kinds, ["inlier", "inlier_proof_form", "outlier", "inlier_heavy_tail"]);
    // both contamination terms equal ½ at π = ½
    assert!(r.iter().all(|r| r[8] == "0.5"));
}

#[test]
fn coverage_csv_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let o = medix(&[
        "bounds", "--out", &out_arg(&dir), "--seed", "4", "--pi", "0.3", "--m", "300", "--dim", "10", "--separation", "8",
        "--coverage-trials", "6",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sc = CoverageScenario {
        tail: Tail::Gaussian,
        eps_dev: None,
        ..CoverageScenario::gaussian(1.0, 8.0, 0.3, 300, 10, 0.1)
    };
    let report = monte_carlo_coverage(&sc, BoundKind::Inlier, 6, 4).unwrap();
    let lib = TempDir::new().unwrap();
    let path = lib.path().join("cov.csv");
    report.write_csv(&path).unwrap();
    assert_eq!(read(dir.path(), "bounds_coverage_inlier.csv"), std::fs::read_to_string(path).unwrap());
}

#[test]
fn hyper_sweep_grid_size() {
    let dir = TempDir::new().unwrap();
    let o = medix(&["hyper-sweep", "--out", &out_arg(&dir), "--eps", "5e-5,5e-4,5e-3,5e-2", "--k", "15,30,60,120"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(rows(&read(dir.path(), "hyper_sweep.csv")).len(), 16);
}

#[test]
fn out_dir_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_medix"))
        .args(["bounds"])
        .env("MEDIX_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("bounds.csv").exists());

    // an explicit flag wins over the variable
    let other = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_medix"))
        .args(["bounds", "--out", &out_arg(&other)])
        .env("MEDIX_OUT_DIR", dir.path().join("unused"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(other.path().join("bounds.csv").exists());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "bound_pi = 0.2\nm = 2000\ndim = 7\n").unwrap();
    let o = medix(&["bounds", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&dir), "--pi", "0.4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&read(dir.path(), "bounds.csv"));
    assert_eq!((r[0][1].as_str(), r[0][2].as_str(), r[0][3].as_str()), ("0.4", "2000", "7"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "bound_pi = \"lots\"\n").unwrap();
    let out = out_arg(&dir);
    for args in [
        vec!["bounds", "--out", &out, "--pi", "1.5"],
        vec!["bounds", "--out", &out, "--config", bad.to_str().unwrap()],
        vec!["bounds", "--out", &out, "--config", "/nonexistent/medix.toml"],
        vec!["bounds", "--out", &out, "--tail", "student_t:3"],
        vec!["hyper-sweep", "--out", &out, "--eps", "-1"],
        vec!["hyper-sweep", "--out", &out, "--k", "0"],
        vec!["sweep", "--out", &out, "--steps", "10,5"],
        vec!["filter", "--out", &out],
        vec!["bounds", "--no-such-flag"],
    ] {
        let o = medix(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn stage_failures_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let scores = dir.path().join("s.csv");
    std::fs::write(&scores, "value\n1.0\n").unwrap();
    let s = scores.to_str().unwrap();
    let o = medix(&["metrics", "--out", &out_arg(&dir), "--scores-in", s, "--scores-out", s]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    // a stop threshold nothing can beat leaves the detector without negatives
    let o = medix(&["synth2d", "--out", &out_arg(&dir), "--stop-rule", "loo", "--eps-stop", "1e9"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("detector"));
}

#[test]
fn metrics_from_score_files() {
    let dir = TempDir::new().unwrap();
    let (si, so) = (dir.path().join("in.csv"), dir.path().join("out.csv"));
    std::fs::write(&si, "id,score\n0,0.9\n1,0.8\n2,0.1\n").unwrap();
    std::fs::write(&so, "score\n0.85\n0.0\n").unwrap();
    let o = medix(&[
        "metrics", "--out", &out_arg(&dir), "--scores-in", si.to_str().unwrap(), "--scores-out", so.to_str().unwrap(),
        "--tpr", "0.5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // threshold 0.8 admits the 0.85 outlier; AUROC = (1 + 0 + 1 + 1 + 0 + 1)/6
    assert_eq!(rows(&read(dir.path(), "metrics.csv"))[0][..3], ["0.5", "0.5", "0.6666666666666666"]);
}

#[test]
fn filter_subcommand_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let (gp, rp) = (dir.path().join("g.csv"), dir.path().join("r.csv"));
    let mut rng = Philox::new(8, 0);
    let data: Vec<f64> = (0..50 * 3).map(|i| if i >= 40 * 3 { 5.0 } else { 0.0 } + rng.standard_normal()).collect();
    let g = GradientMatrix::new(50, 3, data).unwrap();
    write_csv(&g, &gp).unwrap();
    write_csv(&GradientMatrix::new(1, 3, vec![0.0; 3]).unwrap(), &rp).unwrap();
    let o = medix(&[
        "filter", "--out", &out_arg(&dir), "--gradients", gp.to_str().unwrap(), "--reference", rp.to_str().unwrap(), "--k", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let cfg = RunConfig { k: Some(2), ..RunConfig::default() }.filter_config(50, estimate_sigma_robust(&g)).unwrap();
    let expected = medix_filter_gradients(&g, &[0.0; 3], &cfg).unwrap();
    assert!(!expected.outlier_ids.is_empty());
    let flagged: Vec<usize> = rows(&read(dir.path(), "filter_flags.csv"))
        .iter()
        .filter(|r| r[1] == "1")
        .map(|r| r[0].parse().unwrap())
        .collect();
    assert_eq!(flagged, expected.outlier_ids);
    assert_eq!(read(dir.path(), "filter.json"), expected.to_json().unwrap() + "\n");
}

#[test]
fn all_ood_wild_set_leaves_inlier_error_undefined() {
    let dir = TempDir::new().unwrap();
    let o = medix(&["synth2d", "--out", &out_arg(&dir), "--pi", "1.0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path(), "synth2d_metrics.csv");
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let r = &rows(&csv)[0];
    let col = |name: &str| r[header.iter().position(|h| *h == name).unwrap()].clone();
    assert_eq!(col("pi"), "1");
    assert_eq!(col("err_in"), "");
    assert!(!col("err_out").is_empty());
}

#[test]
fn identical_runs_write_identical_files() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let o = medix(&["synth2d", "--seed", "3", "--out", &out_arg(d)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["synth2d_metrics.csv", "synth2d_points.csv", "synth2d_trace.csv", "synth2d_flagged.svg"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}
