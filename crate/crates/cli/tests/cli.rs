use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ncpfr(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ncpfr"));
    cmd.args(args).current_dir(dir).env_remove("NCPFR_THREADS");
    if let Some(t) = threads {
        cmd.env("NCPFR_THREADS", t);
    }
    cmd.output().expect("spawn ncpfr")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn summary(dir: &Path, out: &str, command: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(out).join(format!("{command}.summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn pressure_on_a3_passes_with_exact_p0_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a3.toml", "polynomial = { family = \"quadratic\", a = 3.0 }\n");
    let o = ncpfr(&["pressure", "--config", &cfg, "--out", "out"], dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/pressure.csv")).unwrap();
    let s = summary(dir.path(), "out", "pressure");
    let hash = s["config_hash"].as_str().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), format!("# ncpfr pressure; config_hash={hash}"));
    assert_eq!(lines.next().unwrap(), "t [1],P [log base N],residual [log base N]");
    assert!(lines.next().unwrap().starts_with("0,1,"));
    assert_eq!(s["pass"], Value::Bool(true));
}

#[test]
fn contraction_on_a12_reports_c_hat_and_plots_its_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a12.toml", "polynomial = { family = \"quadratic\", a = 12.0 }\n");
    let o = ncpfr(&["contraction", "--config", &cfg, "--out", "out"], dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("contraction: c_hat="), "{stdout}");
    assert!(stdout.trim_end().ends_with("pass"));
    let s = summary(dir.path(), "out", "contraction");
    let svg = std::fs::read_to_string(dir.path().join("out/contraction.svg")).unwrap();
    assert!(svg.contains(&format!("data: contraction.csv; config_hash={}", s["config_hash"].as_str().unwrap())));
    let csv = std::fs::read_to_string(dir.path().join("out/contraction.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 7);
    let artifacts: Vec<&str> = s["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(
        artifacts,
        ["contraction.config.toml", "contraction.csv", "contraction.svg", "contraction.summary.json"]
    );
}

#[test]
fn reruns_are_bitwise_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "n_range = [2, 5]\nt_grid = [0.0, 1.0]\nseed = 3\npolynomial = { family = \"scaled_cheb3\", c = 10.0 }\n",
    );
    for (out, threads) in [("one", "1"), ("two", "2"), ("again", "1")] {
        let o = ncpfr(&["lipschitz", "--config", &cfg, "--out", out], dir.path(), Some(threads));
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    // The resolved config differs only in `out`.
    for file in ["lipschitz.csv", "lipschitz.svg", "lipschitz.summary.json"] {
        let a = std::fs::read(dir.path().join("one").join(file)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("two").join(file)).unwrap(), "{file}");
        assert_eq!(a, std::fs::read(dir.path().join("again").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn flags_override_the_config_and_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.toml", "n_range = [2, 4]\nseed = 3\n");
    let a = ncpfr(&["weak-pfr", "--config", &cfg, "--out", "a"], dir.path(), None);
    let b = ncpfr(&["weak-pfr", "--config", &cfg, "--out", "b", "--seed", "4"], dir.path(), None);
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    let (sa, sb) = (summary(dir.path(), "a", "weak-pfr"), summary(dir.path(), "b", "weak-pfr"));
    assert_ne!(sa["config_hash"], sb["config_hash"]);
    let resolved = std::fs::read_to_string(dir.path().join("b/weak-pfr.config.toml")).unwrap();
    assert!(resolved.contains("seed = 4"));
}

#[test]
fn failed_assertions_exit_1_and_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "strict.toml",
        "polynomial = { family = \"quadratic\", a = 12.0 }\nn_range = [2, 5]\n[tolerances]\nc_max = 0.01\n",
    );
    let o = ncpfr(&["contraction", "--config", &cfg, "--out", "out"], dir.path(), None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed: t=0: c_hat"));
    assert_eq!(summary(dir.path(), "out", "contraction")["pass"], Value::Bool(false));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write(dir.path(), "k.toml", "sead = 1\n");
    let bad_poly = write(dir.path(), "p.toml", "polynomial = { family = \"quadratic\", a = 1.0 }\n");
    let cases: Vec<Vec<&str>> = vec![
        vec!["pressure", "--config", &bad_key],
        vec!["pressure", "--config", &bad_poly],
        vec!["pressure", "--config", "missing.toml"],
        vec!["lipschitz", "--max-d", "16"],
        vec!["lipschitz", "--precision", "quad"],
        vec!["no-such-command"],
    ];
    for args in cases {
        let o = ncpfr(&args, dir.path(), None);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = ncpfr(&["pressure", "--out", "x"], dir.path(), Some("zero"));
    assert_eq!(code(&o), 2);
}

#[test]
fn every_subcommand_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "small.toml",
        "n_range = [2, 4]\nt_grid = [0.0, 1.0]\nrandom_intervals = 50\nx = { mode = \"grid\", points = [-0.62, 0.1, 0.55] }\n",
    );
    for command in [
        "pressure",
        "lipschitz",
        "contraction",
        "hilbert-norm",
        "test-conditions",
        "flow-check",
        "renorm",
        "weak-pfr",
    ] {
        let o = ncpfr(&[command, "--config", &cfg, "--out", "out"], dir.path(), None);
        assert!(matches!(code(&o), 0 | 1), "{command}: {}", String::from_utf8_lossy(&o.stderr));
        let s = summary(dir.path(), "out", command);
        assert_eq!(s["pass"].as_bool().unwrap(), code(&o) == 0, "{command}");
        for file in s["artifacts"].as_array().unwrap() {
            let name = file.as_str().unwrap();
            let text = std::fs::read_to_string(dir.path().join("out").join(name)).unwrap();
            if name.ends_with(".csv") {
                assert!(text.starts_with(&format!("# ncpfr {command}; config_hash=")), "{name}");
                assert!(text.lines().nth(1).unwrap().contains(" ["), "{name}");
            }
            if name.ends_with(".svg") {
                assert!(text.contains(".csv; config_hash="), "{name}");
            }
        }
    }
}
