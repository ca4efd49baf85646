mod common;

use std::fs;

use common::{fodkit, path_str};
use fodkit::experiment::{two_way_anova, TermOrder};

const SUITE: &str = r#"
[[setting]]
label = "crossing-60"
separation_deg = 60
b = 3000
snr = 30
n_gradients = 41
l_max = 6
l_max_super = 12
replicates = 6
seed = 11
estimators = ["bjs", "shridge"]

[[setting]]
label = "single"
fibers = 1
b = 1000
snr = 40
n_gradients = 41
l_max = 6
l_max_super = 8
replicates = 4
seed = 12
estimators = ["bjs"]
"#;

#[test]
fn simulate_writes_one_row_per_setting_and_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.toml");
    fs::write(&suite, SUITE).unwrap();
    let run = fodkit(&["simulate", path_str(&suite), "--threads", "2"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = String::from_utf8(run.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("label,estimator,"));
    assert!(rows[1].starts_with("crossing-60,bjs,40,6,"));
    assert!(rows[2].starts_with("crossing-60,shridge,"));
    assert!(rows[3].starts_with("single,bjs,"));
}

#[test]
fn simulate_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.toml");
    fs::write(&suite, SUITE).unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("a.csv", "1"), ("b.csv", "1"), ("c.csv", "3")] {
        let out = dir.path().join(name);
        let run = fodkit(&["simulate", path_str(&suite), "--threads", threads, "--out", path_str(&out)]);
        assert!(run.status.success());
        assert!(run.stdout.is_empty());
        outputs.push(fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let reseeded = dir.path().join("d.csv");
    assert!(fodkit(&["simulate", path_str(&suite), "--seed", "99", "--out", path_str(&reseeded)]).status.success());
    assert_ne!(outputs[0], fs::read(reseeded).unwrap());
}

#[test]
fn invalid_suite_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.json");
    fs::write(&suite, r#"{"setting": [{"separation_deg": 45, "b": 3000, "snr": 0, "n_gradients": 41, "l_max": 6, "l_max_super": 12, "replicates": 1, "seed": 1}]}"#).unwrap();
    let run = fodkit(&["simulate", path_str(&suite)]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("snr"));
}

#[test]
fn bench_reports_every_requested_estimator() {
    let run = fodkit(&["bench", "--voxels", "20", "--estimators", "bjs,shridge", "--lmax", "6", "--lmax-super", "8", "--n-gradients", "41"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = String::from_utf8(run.stdout).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "bjs");
    assert_eq!(rows[1][0], "shridge");
    assert!(rows.iter().all(|r| r[1] == "20" && r[2] == "1" && r[5] == "0"));
    assert!(!fodkit(&["bench", "--voxels", "2", "--estimators", "lasso"]).status.success());
}

fn scores_csv() -> (String, Vec<f64>, Vec<&'static str>, Vec<&'static str>) {
    let mut text = String::from("subject_id,score,handedness,gender\n");
    let (mut y, mut h, mut g) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..30 {
        let hand = if k % 3 == 0 { "left" } else { "right" };
        let sex = if k % 2 == 0 { "F" } else { "M" };
        let score = ((k * 37) % 17) as f64 / 10.0 - 0.8 + if hand == "left" { -0.3 } else { 0.1 };
        text.push_str(&format!("s{k:03},{score},{hand},{sex}\n"));
        y.push(score);
        h.push(hand);
        g.push(sex);
    }
    (text, y, h, g)
}

#[test]
fn anova_command_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let (text, y, h, g) = scores_csv();
    let input = dir.path().join("scores.csv");
    let table = dir.path().join("anova.csv");
    let residuals = dir.path().join("residuals.csv");
    fs::write(&input, text).unwrap();
    let run = fodkit(&[
        "anova",
        path_str(&input),
        "--order",
        "gender-first",
        "--out",
        path_str(&table),
        "--residuals",
        path_str(&residuals),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let expected = two_way_anova(&y, &h, &g, TermOrder::GenderFirst).unwrap();
    assert_eq!(fs::read_to_string(&table).unwrap(), expected.to_csv());
    assert_eq!(String::from_utf8(run.stdout).unwrap(), expected.to_table());
    let rows = fs::read_to_string(&residuals).unwrap();
    assert_eq!(rows.lines().count(), 31);
    assert!(rows.lines().nth(1).unwrap().starts_with("s000,"));
}

#[test]
fn anova_with_an_empty_cell_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("scores.csv");
    fs::write(&input, "subject_id,score,handedness,gender\na,0.1,left,F\nb,0.2,left,M\nc,0.3,right,F\nd,0.1,right,F\ne,0.5,left,M\n").unwrap();
    let run = fodkit(&["anova", path_str(&input)]);
    assert!(!run.status.success());
    assert!(String::from_utf8_lossy(&run.stderr).contains("cell"));
}
