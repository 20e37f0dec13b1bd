use std::fs;
use std::process::Command;

use sdnsync::harness::{run_experiment, ExperimentConfig, PolicyKind};
use sdnsync::Topology;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdnsync"))
}

fn small_config(out: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.generation.num_domains = 4;
    cfg.generation.switches_range = [2, 4];
    cfg.env.horizon = 30;
    cfg.agent.episodes = 3;
    cfg.agent.batch_size = 16;
    cfg.agent.hidden_layers = vec![16];
    cfg.run.seeds = vec![7, 8];
    cfg.run.eval_episodes = 2;
    cfg.run.out_dir = out.to_path_buf();
    cfg
}

fn read_all(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&small_config(a.path())).unwrap();
    run_experiment(&small_config(b.path())).unwrap();
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    assert_eq!(fa.len(), 7);
    assert_eq!(fa, fb);
}

#[test]
fn summary_has_one_row_per_policy() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&small_config(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("policy,seeds,spr_detect_rate_mean,spr_detect_rate_std"));
    assert!(lines[1].starts_with("ddrl,2,"));
    assert_eq!(summary.get(PolicyKind::Random).unwrap().per_seed.len(), 2);
    let episodes = fs::read_to_string(dir.path().join("episodes_ddrl_7.csv")).unwrap();
    assert_eq!(episodes.lines().count(), 1 + 3 + 2);
}

#[test]
fn cli_rejects_invalid_config_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"env": {"budget_fraction": 1.5}}"#).unwrap();
    let out = bin().args(["compare", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("env.budget_fraction"), "{err}");
}

#[test]
fn cli_describe_actions_is_stable() {
    let run = || bin().args(["describe-actions", "--seed", "3"]).output().unwrap();
    let (a, b) = (run(), run());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let first = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(first, "0\tsync={0,1}, site=0");
}

#[test]
fn cli_generated_topology_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate-topology", "--seed", "5", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let json = fs::read_to_string(dir.path().join("topology_5.json")).unwrap();
    let topo = Topology::from_json(&json).unwrap();
    assert_eq!(topo, ExperimentConfig::default().topology(5).unwrap());
}

#[test]
fn cli_train_then_evaluate_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, small_config(dir.path()).to_json()).unwrap();
    let status = bin()
        .args(["train", "--seed", "7", "--config"])
        .arg(&cfg_path)
        .status()
        .unwrap();
    assert!(status.success());
    let ckpt = dir.path().join("checkpoint_7.json");
    assert!(ckpt.exists());
    let out = bin()
        .args(["evaluate", "--seed", "7", "--config"])
        .arg(&cfg_path)
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // greedy evaluation of the restored agent reproduces the eval rows of training
    let trained = fs::read_to_string(dir.path().join("episodes_ddrl_7.csv")).unwrap();
    let evaluated = fs::read_to_string(dir.path().join("eval_ddrl_7.csv")).unwrap();
    let eval_rows: Vec<&str> = trained.lines().filter(|l| l.contains(",eval,")).collect();
    assert_eq!(evaluated.lines().skip(1).collect::<Vec<_>>(), eval_rows);
}
