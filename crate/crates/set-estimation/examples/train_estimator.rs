//! Trains a small transformer and the MLP baseline on the same data and
//! prints their loss traces. Scaled down so it finishes in about a minute;
//! raise the sizes toward the defaults for real runs.

use std::time::Instant;

use set_estimation::dataset::{gen_dataset, task_mixture};
use set_estimation::mlp::{mlp_train, MlpConfig};
use set_estimation::set::{set_train, SetConfig, TrainConfig};
use set_estimation::trajgen::GenParams;

fn main() -> set_estimation::Result<()> {
    let mut gp = GenParams::default();
    gp.steps = 120;
    let data = gen_dataset(24, &task_mixture("all")?, 0, &gp)?;

    let set_cfg = SetConfig {
        h: 8,
        n_blocks: 2,
        n_heads: 4,
        d_model: 48,
        max_episode_len: 200,
        ..SetConfig::default()
    };
    let tc = TrainConfig {
        iters: 120,
        batch: 16,
        lr: 3e-4,
        seed: 0,
    };

    let start = Instant::now();
    let (set_model, set_trace) = set_train(&data, set_cfg, tc)?;
    println!(
        "transformer: loss {:.4} -> {:.4} over {} iterations ({:.1}s)",
        set_trace[0],
        set_trace.last().unwrap(),
        set_trace.len(),
        start.elapsed().as_secs_f64()
    );

    let mlp_cfg = MlpConfig { width: 64, ..MlpConfig::default() };
    let start = Instant::now();
    let (_, mlp_trace) = mlp_train(&data, mlp_cfg, tc)?;
    println!(
        "baseline:    loss {:.4} -> {:.4} over {} iterations ({:.1}s)",
        mlp_trace[0],
        mlp_trace.last().unwrap(),
        mlp_trace.len(),
        start.elapsed().as_secs_f64()
    );

    for mark in [0, 29, 59, 89, 119] {
        println!("  iteration {mark:>3}: transformer {:.4}, baseline {:.4}", set_trace[mark], mlp_trace[mark]);
    }
    println!("{} transformer parameters", set_model.n_scalars());
    Ok(())
}
