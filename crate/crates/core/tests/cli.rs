use std::path::Path;
use std::process::{Command, Output};

use dsgda::config::ExperimentConfig;
use dsgda::experiment::sweep;

const SMALL: &str = r#"
T = 200
seeds = 3
stride = 50

[problem]
family = "quadratic"

[data]
m = 4
n = 20
seed = 2

[sweep]
topology = ["full", "ring"]
eta = [0.01, 0.02]
"#;

fn dsgda(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsgda")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn bounds_from_preset_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dsgda(&["bounds", "--preset", "scsc_quadratic"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("bound_name,"));
    assert!(text.contains("scsc_stability_fixed"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown_key = write(dir.path(), "bad.toml", &SMALL.replace("seeds = 3", "seeds = 3\nbogus = 1"));
    let zero_t = write(dir.path(), "zero.toml", &SMALL.replace("T = 200", "T = 0"));
    for args in [
        vec!["run", "--config", unknown_key.as_str()],
        vec!["run", "--config", zero_t.as_str()],
        vec!["run", "--preset", "no_such_preset"],
        vec!["topology", "--topology", "hypercube"],
    ] {
        let out = dsgda(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unknown_key_is_named_in_the_message() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.toml", &SMALL.replace("seeds = 3", "seeds = 3\nbogus = 1"));
    let out = dsgda(&["run", "--config", &path], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn invalid_worker_count_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dsgda"))
        .args(["topology", "--m", "4"])
        .env("DSGDA_WORKERS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dsgda(&["compare", "--stability", "absent.csv", "--bounds", "absent.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_then_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    for out_dir in ["a", "b"] {
        let out = dsgda(&["sweep", "--config", &cfg, "--output", out_dir], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["sweep.csv", "sweep_bounds.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical sweeps");
    }
    let sweep_rows = std::fs::read_to_string(dir.path().join("a/sweep.csv")).unwrap();
    assert_eq!(sweep_rows.lines().count(), 1 + 4);
    let out = dsgda(
        &["compare", "--stability", "a/sweep.csv", "--bounds", "a/sweep_bounds.csv", "--format", "markdown"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with('|'));
}

#[test]
fn compare_rejects_mismatched_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.csv", "eta,topology,eps_mean,eps_stderr\n0.01,full,1e-3,1e-4\n");
    let b = write(dir.path(), "b.csv", "n,bound,value\n50,scsc_stability_fixed,1\n");
    let out = dsgda(&["compare", "--stability", &s, "--bounds", &b], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stability_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dsgda(&["stability", "--config", &cfg, "--seeds", "2", "--output", "st/stab.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("st/stab.csv").exists());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("st/stab.json")).unwrap()).unwrap();
    assert!(json.is_object());
}

#[test]
fn empty_sweep_axes_give_one_row() {
    let text = SMALL.split("[sweep]").next().unwrap();
    let cfg = ExperimentConfig::from_toml_str(text, Path::new("inline.toml")).unwrap();
    let res = sweep(&cfg).unwrap();
    assert_eq!(res.rows.len(), 1);
    assert!(res.axes.is_empty());
}
