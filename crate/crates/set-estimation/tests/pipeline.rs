//! End-to-end checks of the installed binary: exit codes, determinism of
//! generated artifacts, and failure behavior on bad inputs.

use std::path::{Path, PathBuf};
use std::process::Command;

use set_estimation::checkpoint::{write_checkpoint, Checkpoint};
use set_estimation::set::{SetConfig, SetModel};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_set-estimation")
}

fn tmp(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run_ok(args: &[&str]) {
    let (code, _, err) = run(args);
    assert_eq!(code, 0, "command {args:?} failed: {err}");
}

const SMALL_CFG: &str = "steps=50\nh=4\nn_blocks=1\nn_heads=2\nd_model=16\n\
                         max_episode_len=100\niters=100\nbatch=8\ntrials=3\n";

fn write_cfg(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn s(p: &Path, name: &str) -> String {
    p.join(name).to_string_lossy().into_owned()
}

#[test]
fn generation_is_deterministic_across_processes() {
    let dir = tmp("gen-determinism");
    let cfg = write_cfg(&dir, "steps=40\n");
    run_ok(&["gen", "--task", "all", "--n", "4", "--seed", "5", "--out", &s(&dir, "a.dat"),
             "--config", &cfg]);
    run_ok(&["gen", "--task", "all", "--n", "4", "--seed", "5", "--out", &s(&dir, "b.dat"),
             "--config", &cfg]);
    run_ok(&["gen", "--task", "all", "--n", "4", "--seed", "6", "--out", &s(&dir, "c.dat"),
             "--config", &cfg]);
    let a = std::fs::read(dir.join("a.dat")).unwrap();
    let b = std::fs::read(dir.join("b.dat")).unwrap();
    let c = std::fs::read(dir.join("c.dat")).unwrap();
    assert_eq!(a, b, "same seed, same bytes");
    assert_ne!(a, c, "different seed, different data");
}

#[test]
fn full_pipeline_is_byte_reproducible() {
    let mut artifacts: Vec<Vec<Vec<u8>>> = Vec::new();
    for round in ["pipeline-a", "pipeline-b"] {
        let dir = tmp(round);
        let cfg = write_cfg(&dir, SMALL_CFG);
        run_ok(&["gen", "--task", "all", "--n", "6", "--seed", "0", "--out", &s(&dir, "mix.dat"),
                 "--config", &cfg]);
        run_ok(&["train", "--model", "set", "--data", &s(&dir, "mix.dat"), "--config", &cfg,
                 "--out", &s(&dir, "set.ckpt"), "--loss-out", &s(&dir, "loss.csv")]);
        run_ok(&["eval", "--ckpt", &s(&dir, "set.ckpt"), "--data", &s(&dir, "mix.dat"),
                 "--mode", "teacher-forced", "--report", &s(&dir, "report.csv"),
                 "--config", &cfg]);
        artifacts.push(
            ["mix.dat", "set.ckpt", "loss.csv", "report.csv"]
                .iter()
                .map(|f| std::fs::read(dir.join(f)).unwrap())
                .collect(),
        );
    }
    for (i, name) in ["dataset", "checkpoint", "loss trace", "report"].iter().enumerate() {
        assert_eq!(artifacts[0][i], artifacts[1][i], "{name} differs between runs");
    }
}

#[test]
fn mlp_training_round_trips_too() {
    let dir = tmp("pipeline-mlp");
    let cfg = write_cfg(&dir, "steps=40\nh_mlp=3\nmlp_layers=2\nmlp_width=16\n\
                               iters=30\nbatch=8\ntrials=2\n");
    run_ok(&["gen", "--task", "jump", "--n", "3", "--seed", "2", "--out", &s(&dir, "j.dat"),
             "--config", &cfg]);
    run_ok(&["train", "--model", "mlp", "--data", &s(&dir, "j.dat"), "--config", &cfg,
             "--out", &s(&dir, "mlp.ckpt")]);
    run_ok(&["eval", "--ckpt", &s(&dir, "mlp.ckpt"), "--data", &s(&dir, "j.dat"),
             "--mode", "closed-loop", "--report", &s(&dir, "mlp.csv"), "--config", &cfg]);
    let report = std::fs::read_to_string(dir.join("mlp.csv")).unwrap();
    assert!(report.starts_with("model,dataset,mode,dim,rms,trials\n"));
    assert!(report.contains("mlp,j,closed-loop,v_x,"));
}

#[test]
fn transfer_ablate_and_plots_run_from_the_binary() {
    let dir = tmp("pipeline-transfer");
    let cfg = write_cfg(&dir, "steps=40\nh=4\nn_blocks=1\nn_heads=2\nd_model=16\n\
                               max_episode_len=100\niters=30\nbatch=8\ntrials=2\n\
                               n_traj=6\nablation_seeds=0\n");
    let ckpts = dir.join("ckpts");
    let datas = dir.join("datas");
    std::fs::create_dir_all(&ckpts).unwrap();
    std::fs::create_dir_all(&datas).unwrap();
    for mix in ["jump", "backflip", "sideflip", "all"] {
        let data = s(&dir, &format!("train-{mix}.dat"));
        run_ok(&["gen", "--task", mix, "--n", "4", "--seed", "1", "--out", &data,
                 "--config", &cfg]);
        run_ok(&["train", "--model", "set", "--data", &data, "--config", &cfg,
                 "--out", &s(&ckpts, &format!("{mix}.ckpt"))]);
    }
    for task in ["jump", "backflip", "sideflip"] {
        run_ok(&["gen", "--task", task, "--n", "2", "--seed", "9", "--out",
                 &s(&datas, &format!("{task}.dat")), "--config", &cfg]);
    }

    let grid = s(&dir, "grid.csv");
    run_ok(&["transfer", "--ckpt-dir", &s(&dir, "ckpts"), "--data-dir", &s(&dir, "datas"),
             "--out", &grid]);
    let text = std::fs::read_to_string(&grid).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 3 * 4, "header plus 48 grid cells");
    run_ok(&["plot", "--in", &grid, "--kind", "heatmap", "--out", &s(&dir, "grid.svg")]);
    assert!(std::fs::read_to_string(dir.join("grid.svg")).unwrap().starts_with("<svg"));

    let rows = s(&dir, "ablation.csv");
    run_ok(&["ablate", "--which", "context", "--config", &cfg, "--out", &rows]);
    let text = std::fs::read_to_string(&rows).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 4, "two variants, one seed, four dims");
    assert!(text.contains("context,h4,0,v_x,"));
    assert!(text.contains("context,h1,0,v_x,"));
}

#[test]
fn dimension_mismatched_checkpoint_is_a_data_error() {
    let dir = tmp("pipeline-dims");
    let cfg = write_cfg(&dir, "steps=30\n");
    run_ok(&["gen", "--task", "walk", "--n", "1", "--seed", "0", "--out", &s(&dir, "w.dat"),
             "--config", &cfg]);
    let narrow = SetConfig {
        h: 4,
        n_blocks: 1,
        n_heads: 2,
        d_model: 16,
        dropout: 0.0,
        max_episode_len: 100,
        d_o: 46,
        d_p: 4,
    };
    let model = SetModel::init(narrow, 0).unwrap();
    write_checkpoint(&dir.join("narrow.ckpt"), &Checkpoint::Set(model)).unwrap();
    let (code, _, err) = run(&["eval", "--ckpt", &s(&dir, "narrow.ckpt"),
                               "--data", &s(&dir, "w.dat"),
                               "--report", &s(&dir, "r.csv")]);
    assert_eq!(code, 2, "stderr: {err}");
    assert!(!dir.join("r.csv").exists(), "no report on failure");
}

#[test]
fn usage_and_data_errors_use_distinct_exit_codes() {
    let dir = tmp("pipeline-errors");
    assert_eq!(run(&["no-such-command"]).0, 1);
    assert_eq!(run(&["gen", "--task", "walk", "--n", "1"]).0, 1, "missing required flags");
    assert_eq!(run(&["gen", "--task", "cartwheel", "--n", "1", "--seed", "0",
                     "--out", &s(&dir, "x.dat")]).0, 1);
    assert_eq!(run(&["eval", "--ckpt", "a", "--data", "b", "--mode", "open",
                     "--report", "c"]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);

    std::fs::write(dir.join("bad.dat"), b"garbage").unwrap();
    assert_eq!(run(&["train", "--model", "set", "--data", &s(&dir, "bad.dat"),
                     "--out", &s(&dir, "x.ckpt")]).0, 2);
    assert_eq!(run(&["eval", "--ckpt", &s(&dir, "missing.ckpt"), "--data", &s(&dir, "bad.dat"),
                     "--report", &s(&dir, "r.csv")]).0, 2);
    assert_eq!(run(&["plot", "--in", &s(&dir, "missing.csv"), "--kind", "loss-curve",
                     "--out", &s(&dir, "p.svg")]).0, 2);
}

#[test]
fn gradcheck_command_passes() {
    let (code, out, err) = run(&["gradcheck"]);
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("gradients match finite differences"));
}
