use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
schema_version = 1
mode = "scratch"
seed = 3
workers = 2

[network]
hidden = [8]

[target]
max_episodes = 40
"#;

const SMALL_CTL: &str = r#"
schema_version = 1
mode = "single_fidelity_ctl"
seed = 3
workers = 2
force_transfer = true

[network]
hidden = [8]

[source]
max_episodes = 40

[target]
max_episodes = 40
"#;

fn mflight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mflight")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--config", s(config), "--out", s(out)];
    args.extend_from_slice(extra);
    mflight(&args)
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.toml");
    let out = train(&missing, &dir.path().join("run"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.toml"));
    assert!(!dir.path().join("run").exists());
}

#[test]
fn unknown_key_and_bad_override_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &format!("{SMALL}\n[ppo]\nnot_a_key = 0.2\n"));
    assert_eq!(train(&cfg, &dir.path().join("a"), &[]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "d.toml", SMALL);
    assert_eq!(train(&cfg, &dir.path().join("b"), &["--set", "ctl.gamma_cut"]).status.code(), Some(2));
    let old = write_config(dir.path(), "e.toml", &SMALL.replace("schema_version = 1", "schema_version = 7"));
    assert_eq!(train(&old, &dir.path().join("c"), &[]).status.code(), Some(4));
}

#[test]
fn scratch_run_logs_every_episode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let run = dir.path().join("run");
    let out = train(&cfg, &run, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(run.join("episodes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 40);
    for f in ["config.toml", "updates.csv", "summary.toml", "final.ckpt", "target_mean_shape.dat"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    assert!(!run.join("source.ckpt").exists());
}

#[test]
fn explicit_default_override_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL_CTL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(train(&cfg, &a, &[]).status.success());
    assert!(train(&cfg, &b, &["--set", "ctl.gamma_cut=0.3"]).status.success());
    for f in ["episodes.csv", "updates.csv", "summary.toml", "final.ckpt", "source.ckpt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn evaluation_is_reproducible_and_rejects_corrupt_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let run = dir.path().join("run");
    assert!(train(&cfg, &run, &[]).status.success());
    let ckpt = run.join("final.ckpt");
    let eval = |out: &Path, ck: &Path| {
        mflight(&["evaluate", "--checkpoint", s(ck), "--config", s(&cfg), "--episodes", "30", "--out", s(out)])
    };
    let (e1, e2) = (dir.path().join("e1"), dir.path().join("e2"));
    assert!(eval(&e1, &ckpt).status.success());
    assert!(eval(&e2, &ckpt).status.success());
    for f in ["histogram.csv", "evaluation.toml", "mean_shape.dat", "mean_shape_cp.csv"] {
        assert_eq!(fs::read(e1.join(f)).unwrap(), fs::read(e2.join(f)).unwrap(), "{f} differs");
    }
    let bad = dir.path().join("bad.ckpt");
    fs::write(&bad, fs::read_to_string(&ckpt).unwrap().replacen("v1", "v2", 1)).unwrap();
    let e3 = dir.path().join("e3");
    let out = eval(&e3, &bad);
    assert_eq!(out.status.code(), Some(4));
    assert!(!e3.exists());
}

#[test]
fn run_compared_with_itself_saves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let run = dir.path().join("run");
    assert!(train(&cfg, &run, &[]).status.success());
    let table = dir.path().join("cmp.csv");
    let out = mflight(&["compare", s(&run), s(&run), "--out", s(&table)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = text.lines().skip(3).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",0.00")));

    let summary = run.join("summary.toml");
    fs::write(&summary, fs::read_to_string(&summary).unwrap().replace("schema_version = 1", "schema_version = 2")).unwrap();
    let out = mflight(&["compare", s(&run), s(&run), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn defaults_parse_back() {
    let out = mflight(&["defaults"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let table: toml::Table = text.parse().unwrap();
    assert_eq!(table["ctl"]["gamma_cut"].as_float(), Some(0.3));
}
