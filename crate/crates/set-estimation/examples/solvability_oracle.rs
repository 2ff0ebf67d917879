//! Inverts noiseless trajectories analytically: the oracle recovers height
//! and velocity from observations alone, which is what makes the privileged
//! state learnable in the first place.

use set_estimation::eval::{evaluate, Mode, OracleEstimator, DIM_NAMES};
use set_estimation::dataset::gen_dataset;
use set_estimation::trajgen::{GenParams, Task};

fn main() -> set_estimation::Result<()> {
    let mut gp = GenParams::default().noiseless();
    gp.steps = 200;
    let oracle = OracleEstimator { gp: gp.clone() };

    for task in [Task::Walk, Task::Jump, Task::Backflip, Task::Sideflip] {
        let ds = gen_dataset(2, &[(task, 1.0)], 11, &gp)?;
        let report = evaluate(&oracle, &ds, Mode::TeacherForced, "oracle", task.name())?;
        print!("{:<9}", task.name());
        for (d, name) in DIM_NAMES.iter().enumerate() {
            print!("  {name} {:.2e}", report.rms[d]);
        }
        println!();
    }

    // With observation noise the same inversion degrades gracefully.
    let mut noisy = GenParams::default();
    noisy.steps = 200;
    let ds = gen_dataset(2, &[(Task::Jump, 1.0)], 11, &noisy)?;
    let report = evaluate(&oracle, &ds, Mode::TeacherForced, "oracle", "noisy jump")?;
    println!("noisy jump v_x rms {:.3} (noiseless inversion applied to noisy data)", report.rms[1]);
    Ok(())
}
