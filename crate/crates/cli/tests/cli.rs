use std::path::Path;
use std::process::{Command, Output};

fn qadv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qadv"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

const SMALL: &str = r#"
t_grid = [10, 20]
[mc]
seed = 5
num_datasets = 10
rademacher_datasets = 2
[mc.sigma]
exhaustive_max_t = 10
num_sigma = 8
"#;

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qadv(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(qadv(dir.path(), &["bound"]).status.code(), Some(1));
    assert_eq!(qadv(dir.path(), &["bound", "--T", "10", "--p", "3"]).status.code(), Some(1));
    assert_eq!(qadv(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(qadv(dir.path(), &["--version"]).status.code(), Some(0));
}

#[test]
fn stochastic_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = qadv(dir.path(), &["rademacher", "--T", "4"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    assert_eq!(qadv(dir.path(), &["train", "--T", "4"]).status.code(), Some(1));
}

#[test]
fn invalid_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qadv(dir.path(), &["experiment", "--config", "missing.toml"]).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "delta = 2.0\n[mc]\nseed = 1\n").unwrap();
    assert_eq!(qadv(dir.path(), &["experiment", "--config", "bad.toml"]).status.code(), Some(2));
    assert_eq!(qadv(dir.path(), &["bound", "--T", "0"]).status.code(), Some(2));
    assert_eq!(qadv(dir.path(), &["attack", "--x", "0.1", "--class", "5"]).status.code(), Some(2));
}

#[test]
fn bound_reports_base_and_adversarial_terms() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&qadv(
        dir.path(),
        &["bound", "--I2", "1", "--K", "2", "--T", "100", "--delta", "0.8", "--floor", "0.05", "--epsilon", "0.08", "--p", "1"],
    ));
    let base = 2.0 * 0.04f64.sqrt() + (2.0 * 2.5f64.ln() / 100.0).sqrt();
    assert!((v["base"].as_f64().unwrap() - base).abs() < 1e-12);
    let inc = v["adversarial"]["adversarial_increment"].as_f64().unwrap();
    assert!((inc - 2.0 * 0.02f64.sqrt() * 0.08).abs() < 1e-12);
    assert_eq!(v["adversarial"]["valid"], true);
    assert_eq!(v["general"]["valid"], true);
}

#[test]
fn mi_and_attack_on_default_embedding() {
    let dir = tempfile::tempdir().unwrap();
    let mi = json(&qadv(dir.path(), &["mi"]));
    assert!((mi["floor_analytic"].as_f64().unwrap() - 0.025).abs() < 1e-15);
    let i2 = mi["I2"].as_f64().unwrap();
    assert!(i2 > 0.0 && i2 <= 2.0);

    let a = json(&qadv(dir.path(), &["attack", "--x", "-0.4", "--class", "0", "--p", "inf", "--epsilon", "0.01"]));
    let (loss, clean, gain) = (a["loss"].as_f64().unwrap(), a["clean_loss"].as_f64().unwrap(), a["gain"].as_f64().unwrap());
    assert!((loss - clean - gain).abs() < 1e-12);
    assert!(gain >= 0.0);
    assert_eq!(a["lambda_star"].as_array().unwrap().len(), 2);
}

#[test]
fn rademacher_csv_has_clean_and_adversarial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = qadv(
        dir.path(),
        &["rademacher", "--seed", "3", "--T", "6,30", "--num-datasets", "2", "--num-sigma", "8"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "T,mode,value,stderr,num_sigma,num_datasets,epsilon,p");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("6,exact_binary,"));
    assert!(lines[2].starts_with("6,qubit_multistart,"));
    assert!(lines[3].contains(",8,2,"));
}

#[test]
fn train_writes_a_loadable_povm() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&qadv(
        dir.path(),
        &["train", "--seed", "2", "--T", "12", "--max-iters", "10", "--restarts", "2", "--povm-out", "povm.json"],
    ));
    let curve: Vec<f64> = v["curve"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(curve.windows(2).all(|w| w[1] <= w[0]));
    let a = json(&qadv(dir.path(), &["attack", "--x", "0.2", "--class", "1", "--povm", "povm.json"]));
    assert!(a["loss"].as_f64().unwrap() <= 1.0 + 1e-9);
}

#[test]
fn experiment_outputs_and_plot_rerender() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let out = qadv(
        dir.path(),
        &["experiment", "--config", "small.toml", "--csv", "a.csv", "--json", "a.json", "--svg", "a.svg"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wall time"));
    let csv = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 5);
    assert_eq!(report["gen_error_convention"], "mean_abs");
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);

    let plot = qadv(dir.path(), &["plot", "--csv", "a.csv", "--svg", "b.svg"]);
    assert!(plot.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("a.svg")).unwrap(),
        std::fs::read(dir.path().join("b.svg")).unwrap()
    );
}

#[test]
fn seed_flag_overrides_config_and_t_grid_flag_applies() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let run = |seed: &str, csv: &str| {
        let out = qadv(
            dir.path(),
            &["experiment", "--config", "small.toml", "--seed", seed, "--T-grid", "12", "--csv", csv],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(dir.path().join(csv)).unwrap()
    };
    let (a, b) = (run("1", "a.csv"), run("2", "b.csv"));
    assert_eq!(a.lines().count(), 2);
    assert!(a.lines().nth(1).unwrap().starts_with("12,"));
    assert_ne!(a, b);
}

#[test]
fn thread_count_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qadv"))
        .current_dir(dir.path())
        .env("QADV_THREADS", "zero")
        .arg("mi")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
