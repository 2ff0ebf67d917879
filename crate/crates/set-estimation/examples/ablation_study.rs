//! Runs both paired ablations at a small scale: context length (full
//! window against a single step) and dataset size (full against a tenth).

use set_estimation::dataset::{gen_dataset, task_mixture};
use set_estimation::eval::{run_ablation, AblationKind, DIM_NAMES};
use set_estimation::set::{SetConfig, TrainConfig};
use set_estimation::trajgen::GenParams;

fn main() -> set_estimation::Result<()> {
    let mut gp = GenParams::default();
    gp.steps = 100;
    let train_data = gen_dataset(30, &task_mixture("all")?, 0, &gp)?;
    let eval_data = gen_dataset(6, &task_mixture("all")?, 10_000, &gp)?;

    let cfg = SetConfig {
        h: 8,
        n_blocks: 2,
        n_heads: 4,
        d_model: 48,
        max_episode_len: 200,
        ..SetConfig::default()
    };
    let tc = TrainConfig { iters: 100, batch: 16, lr: 3e-4, seed: 0 };

    for kind in [AblationKind::Context, AblationKind::DatasetSize] {
        let rows = run_ablation(kind, &train_data, &eval_data, &cfg, &tc, &[0])?;
        for row in &rows {
            print!("{:<13}{:<7}seed {}", row.ablation, row.variant, row.seed);
            for (d, name) in DIM_NAMES.iter().enumerate() {
                print!("  {name} {:.4}", row.rms[d]);
            }
            println!();
        }
    }
    println!("(one seed at toy scale; the acceptance suite runs three seeds)");
    Ok(())
}
