use std::fs;
use std::path::{Path, PathBuf};

use rail::checkpoint::{checkpoint_path, load_checkpoint};
use rail::cli::main_with_args;
use rail::config::load_config;
use rail::dataset::{dataset_dir, read_dataset};
use rail::parallel;
use rail::report::read_report;
use rail::telemetry::{read_telemetry, TELEMETRY_FILE};
use rail_core::trainer::{evaluate, EvalDriver};
use tempfile::tempdir;

fn smoke() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn rail(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with_args(std::iter::once("rail").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = rail(args);
    assert_eq!(code, 0, "{args:?}\n{out}\n{err}");
    out
}

fn pipeline(out: &Path, penalty: &str) {
    let o = out.to_str().unwrap();
    let c = smoke();
    let c = c.to_str().unwrap();
    ok(&["generate-demos", "--config", c, "--out", o]);
    ok(&["train", "--config", c, "--out", o, "--penalty", penalty]);
    let ckpt = checkpoint_path(out, 3);
    ok(&["evaluate", "--checkpoint", ckpt.to_str().unwrap(), "--out", o, "--rollouts", "3"]);
    ok(&["evaluate", "--expert", "--config", c, "--out", o]);
}

#[test]
fn generate_reports_zero_expert_events() {
    let dir = tempdir().unwrap();
    let out = ok(&["generate-demos", "--config", smoke().to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.contains("wrote 2 scenes, 80 records"), "{out}");
    assert!(out.contains("collision 0 offroad 0 hard_brake 0"), "{out}");
}

#[test]
fn same_seed_reruns_are_byte_identical() {
    // the output directory is part of the embedded config, so both runs
    // write to the same path
    let root = tempdir().unwrap();
    let run = root.path().join("run");
    let a = root.path().join("a");
    pipeline(&run, "binary");
    fs::rename(&run, &a).unwrap();
    pipeline(&run, "binary");
    let files = [
        "demos/records.csv",
        "demos/manifest.toml",
        TELEMETRY_FILE,
        "checkpoint_000002.json",
        "checkpoint_000003.json",
        "policy_report.json",
        "policy_rmse.csv",
        "policy_speed_hist.csv",
        "expert_report.json",
        "expert_rmse.csv",
    ];
    for f in files {
        let x = fs::read(a.join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        assert!(x == fs::read(run.join(f)).unwrap(), "{f} differs between reruns");
    }
}

#[test]
fn train_writes_telemetry_and_checkpoints() {
    let dir = tempdir().unwrap();
    pipeline(dir.path(), "smooth");
    let (h, rows) = read_telemetry(&dir.path().join(TELEMETRY_FILE)).unwrap();
    assert_eq!(rows.iter().map(|r| r.iteration).collect::<Vec<_>>(), vec![0, 1, 2]);
    let ckpt = load_checkpoint(&checkpoint_path(dir.path(), 3)).unwrap();
    assert_eq!(ckpt.config_hash, h.config_hash);
    assert_eq!(ckpt.state.telemetry, rows);
    assert_eq!(ckpt.config.penalty.mode, rail_core::penalty::PenaltyMode::Smooth);
    let report = read_report(&dir.path().join("policy_report.json")).unwrap();
    assert!(report.report.valid);
    assert_eq!(report.report.rollouts, 3);
    assert_eq!(report.report.horizon, 10);
    let expert = read_report(&dir.path().join("expert_report.json")).unwrap();
    assert_eq!(expert.report.final_rmse_position(), 0.0);
    assert_eq!(expert.report.collision_rate + expert.report.offroad_rate, 0.0);
}

#[test]
fn resume_matches_straight_run() {
    let dir = tempdir().unwrap();
    pipeline(dir.path(), "binary");
    let straight = fs::read(checkpoint_path(dir.path(), 3)).unwrap();
    let telemetry = fs::read(dir.path().join(TELEMETRY_FILE)).unwrap();
    let two = checkpoint_path(dir.path(), 2);
    let keep = fs::read(&two).unwrap();
    fs::remove_file(checkpoint_path(dir.path(), 3)).unwrap();
    ok(&["train", "--resume", two.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(fs::read(checkpoint_path(dir.path(), 3)).unwrap(), straight);
    assert_eq!(fs::read(dir.path().join(TELEMETRY_FILE)).unwrap(), telemetry);
    assert_eq!(fs::read(&two).unwrap(), keep);
}

#[test]
fn parallel_evaluation_matches_serial() {
    let cfg = load_config(&smoke()).unwrap();
    let serial = evaluate(EvalDriver::Expert, &cfg.sim, &cfg.expert, &cfg.penalty, 6, 21).unwrap();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let par = parallel::evaluate(&pool, EvalDriver::Expert, &cfg.sim, &cfg.expert, &cfg.penalty, 6, 21).unwrap();
        assert_eq!(par, serial);
    }
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    let d = dir.path();
    let o = d.to_str().unwrap();

    let bad = d.join("bad.toml");
    fs::write(&bad, "[sim]\nwheels = 5\n").unwrap();
    let (code, _, err) = rail(&["generate-demos", "--config", bad.to_str().unwrap(), "--out", o]);
    assert_eq!(code, 2, "{err}");

    let (code, _, _) = rail(&["generate-demos", "--penalty", "loud"]);
    assert_eq!(code, 2);

    ok(&["generate-demos", "--config", smoke().to_str().unwrap(), "--out", o]);
    let manifest = dataset_dir(d).join("manifest.toml");
    let text = fs::read_to_string(&manifest).unwrap();
    fs::write(&manifest, text.replace("schema_version = 1", "schema_version = 2")).unwrap();
    let (code, _, err) = rail(&["train", "--config", smoke().to_str().unwrap(), "--out", o]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("schema version 2"), "{err}");
    fs::write(&manifest, text).unwrap();
    read_dataset(&dataset_dir(d)).unwrap();

    let (code, _, _) = rail(&["evaluate", "--checkpoint", d.join("missing.json").to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn verify_theory_command() {
    let dir = tempdir().unwrap();
    let spec = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/theory_truncation.json");
    let out = dir.path().join("t");
    let stdout = ok(&["verify-theory", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("PASS mass_on_undesired"), "{stdout}");
    assert!(!stdout.contains("FAIL"), "{stdout}");
    assert!(out.join("theory_report.json").exists());
    let trace = fs::read_to_string(out.join("theory_trace.csv")).unwrap();
    assert!(trace.starts_with("# schema_version=1 config_hash="));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"game\": 3}").unwrap();
    let (code, _, _) = rail(&["verify-theory", broken.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn compare_command() {
    let dir = tempdir().unwrap();
    pipeline(dir.path(), "none");
    let p = dir.path().join("policy_report.json");
    let e = dir.path().join("expert_report.json");
    let cmp = dir.path().join("cmp");
    let stdout = ok(&[
        "compare",
        p.to_str().unwrap(),
        e.to_str().unwrap(),
        "--reference",
        e.to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert!(stdout.contains("collision_rate"), "{stdout}");
    let csv = fs::read_to_string(cmp.join("compare.csv")).unwrap();
    assert!(csv.contains("rmse_position,"), "{csv}");
    let (code, _, _) = rail(&["compare", p.to_str().unwrap(), "--reference", e.to_str().unwrap()]);
    assert_eq!(code, 2);
}
