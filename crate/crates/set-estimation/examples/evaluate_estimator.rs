//! Trains a small transformer, then scores it against the constant-mean
//! floor in both evaluation modes. Teacher forcing feeds true states back;
//! closed loop feeds the model its own outputs, the deployment condition.

use set_estimation::checkpoint::{read_set_checkpoint, write_checkpoint, Checkpoint};
use set_estimation::dataset::{gen_dataset, task_mixture};
use set_estimation::eval::{evaluate, MeanEstimator, Mode, SetEstimator, DIM_NAMES};
use set_estimation::set::{set_train, SetConfig, TrainConfig};
use set_estimation::trajgen::GenParams;

fn main() -> set_estimation::Result<()> {
    let mut gp = GenParams::default();
    gp.steps = 120;
    let train_data = gen_dataset(24, &task_mixture("all")?, 0, &gp)?;
    let held_out = gen_dataset(8, &task_mixture("all")?, 10_000, &gp)?;

    let cfg = SetConfig {
        h: 8,
        n_blocks: 2,
        n_heads: 4,
        d_model: 48,
        max_episode_len: 200,
        ..SetConfig::default()
    };
    let tc = TrainConfig { iters: 150, batch: 16, lr: 3e-4, seed: 0 };
    let (model, _) = set_train(&train_data, cfg, tc)?;

    // Checkpoints survive the disk round trip with f32 precision.
    let dir = std::env::temp_dir().join("set-estimation-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("small.ckpt");
    write_checkpoint(&path, &Checkpoint::Set(model))?;
    let model = read_set_checkpoint(&path)?;
    std::fs::remove_file(&path)?;

    let mean = MeanEstimator::from_data(&train_data);
    println!("held-out rms by estimator and mode:");
    println!("{:<22}{:>9}{:>9}{:>9}{:>9}", "", DIM_NAMES[0], DIM_NAMES[1], DIM_NAMES[2], DIM_NAMES[3]);
    for (label, report) in [
        ("mean, any mode", evaluate(&mean, &held_out, Mode::TeacherForced, "mean", "held-out")?),
        ("set, teacher-forced", evaluate(&SetEstimator(&model), &held_out, Mode::TeacherForced, "set", "held-out")?),
        ("set, closed-loop", evaluate(&SetEstimator(&model), &held_out, Mode::ClosedLoop, "set", "held-out")?),
    ] {
        print!("{label:<22}");
        for v in &report.rms {
            print!("{v:>9.4}");
        }
        println!();
    }
    println!("(a briefly trained model; the defaults train far past this)");
    Ok(())
}
