use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_simplex-margin");

const SMALL_HARD: &str = "experiment=hard-margin\nlosses=square\ndeltas=0.2\nrepeats=2\nn_train=60\n\
                          n_test=100\nmax_epochs=20\nnum_features=30\n";

fn run(dir: &Path, config: &str, extra: &[&str], env_seed: Option<&str>) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(BIN);
    cmd.arg("run").arg("--config").arg(&cfg).args(extra);
    match env_seed {
        Some(s) => cmd.env("SIMPLEX_MARGIN_SEED", s),
        None => cmd.env_remove("SIMPLEX_MARGIN_SEED"),
    };
    cmd.output().unwrap()
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn properties_pass_with_exit_zero_and_fail_with_exit_one_under_fault() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(dir.path(), "experiment=properties\n", &["--out", &out_arg(dir.path(), "a")], None);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let report = fs::read_to_string(dir.path().join("a/properties_report.csv")).unwrap();
    assert!(report.starts_with("#schema=properties-report/v1\ncheck,status,checked,violations,detail\n"));
    assert!(!report.contains("FAIL"));

    let bad = run(
        dir.path(),
        "experiment=properties\ninject_fault=broken-gradient\n",
        &["--out", &out_arg(dir.path(), "b")],
        None,
    );
    assert_eq!(bad.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&bad.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL") && l.contains("loss-gradients")));
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "o");
    let cases = [
        ("experiment=hard-margin\ndeltas=0.1,0.7\n", "deltas"),
        ("experiment=soft-margin\nalphas=1,x\n", "alphas"),
        ("experiment=hard-margin\nrepeats=0\n", "repeats"),
        ("experiment=hard-margin\nlossses=square\n", "lossses"),
        ("experiment=nonsense\n", "experiment"),
        ("experiment=properties\nno equals sign\n", "line 2"),
        ("experiment=soft-margin\nnum_classes=9\n", "num_classes"),
    ];
    for (cfg, field) in cases {
        let o = run(dir.path(), cfg, &["--out", &out], None);
        assert_eq!(o.status.code(), Some(2), "{cfg}");
        assert!(stderr(&o).contains(&format!("'{field}'")), "{cfg}: {}", stderr(&o));
    }
    let o = run(dir.path(), "experiment=properties\n", &["--out", &out], Some("not-a-number"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SIMPLEX_MARGIN_SEED"));

    let missing = Command::new(BIN)
        .args(["run", "--config", "/nonexistent/config.cfg"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = run(
        dir.path(),
        "experiment=properties\n",
        &["--out", &blocker.join("sub").to_string_lossy()],
        None,
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn seed_flag_beats_env_which_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str| fs::read(dir.path().join(name).join("hard_margin_curves.csv")).unwrap();
    let cfg = format!("{SMALL_HARD}seed=3\n");
    let go = |name: &str, extra: &[&str], env: Option<&str>| {
        let mut args = vec!["--out".to_string(), out_arg(dir.path(), name)];
        args.extend(extra.iter().map(|s| s.to_string()));
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = run(dir.path(), &cfg, &args, env);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    };
    go("config3", &[], None);
    go("env3", &[], Some("3"));
    go("env4", &[], Some("4"));
    go("flag3", &["--seed", "3"], Some("4"));
    go("flag4", &["--seed", "4"], None);
    assert_eq!(read("config3"), read("env3"));
    assert_ne!(read("config3"), read("env4"));
    assert_eq!(read("flag3"), read("config3"));
    assert_eq!(read("flag4"), read("env4"));
}

#[test]
fn hard_margin_outputs_follow_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        SMALL_HARD,
        &["--out", &out_arg(dir.path(), "o"), "--svg", "--repeats", "3"],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let curves = fs::read_to_string(dir.path().join("o/hard_margin_curves.csv")).unwrap();
    let lines: Vec<&str> = curves.lines().collect();
    assert_eq!(lines[0], "#schema=hard-margin-curves/v1");
    assert_eq!(lines[1], "loss,delta,epoch,train_surrogate,test_surrogate,test_zero_one");
    // Epochs 0..=20 for one loss and one gap.
    assert_eq!(lines.len(), 2 + 21);
    let runs = fs::read_to_string(dir.path().join("o/hard_margin_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 2 + 3, "--repeats overrides the config");
    let svg = fs::read_to_string(dir.path().join("o/hard_margin.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}
