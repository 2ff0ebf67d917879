//! Trains one small transformer per task mixture, scores every model on
//! every task, and renders the grid as an annotated SVG heatmap.

use set_estimation::dataset::{gen_dataset, task_mixture, Dataset};
use set_estimation::eval::{transfer_csv, transfer_matrix, Estimator, Mode, SetEstimator};
use set_estimation::plot::{render_plot, PlotKind};
use set_estimation::set::{set_train, SetConfig, SetModel, TrainConfig};
use set_estimation::trajgen::GenParams;

fn main() -> set_estimation::Result<()> {
    let mut gp = GenParams::default();
    gp.steps = 100;
    let cfg = SetConfig {
        h: 8,
        n_blocks: 2,
        n_heads: 4,
        d_model: 48,
        max_episode_len: 200,
        ..SetConfig::default()
    };
    let tc = TrainConfig { iters: 100, batch: 16, lr: 3e-4, seed: 0 };

    let mixes = ["jump", "backflip", "sideflip", "all"];
    let mut models: Vec<(&str, SetModel)> = Vec::new();
    for name in mixes {
        let data = gen_dataset(18, &task_mixture(name)?, 0, &gp)?;
        let (model, _) = set_train(&data, cfg.clone(), tc)?;
        println!("trained on {name}");
        models.push((name, model));
    }

    let tasks = ["jump", "backflip", "sideflip"];
    let datasets: Vec<(&str, Dataset)> = tasks
        .iter()
        .map(|t| Ok((*t, gen_dataset(6, &task_mixture(t)?, 10_000, &gp)?)))
        .collect::<set_estimation::Result<_>>()?;

    let ests: Vec<SetEstimator> = models.iter().map(|(_, m)| SetEstimator(m)).collect();
    let mpairs: Vec<(&str, &dyn Estimator)> = models
        .iter()
        .zip(&ests)
        .map(|((name, _), est)| (*name, est as &dyn Estimator))
        .collect();
    let dpairs: Vec<(&str, &Dataset)> = datasets.iter().map(|(n, d)| (*n, d)).collect();
    let grid = transfer_matrix(&mpairs, &dpairs, Mode::TeacherForced)?;

    for task in tasks {
        let pooled = |ts: &str| {
            let rms = &grid.cell(ts, task).unwrap().rms;
            (rms.iter().map(|v| v * v).sum::<f64>() / rms.len() as f64).sqrt()
        };
        println!(
            "{task:<9} own {:.4}  others {}",
            pooled(task),
            tasks
                .iter()
                .filter(|t| **t != task)
                .map(|t| format!("{:.4}", pooled(t)))
                .collect::<Vec<_>>()
                .join(" ")
        );
    }

    let dir = std::env::temp_dir().join("set-estimation-example");
    std::fs::create_dir_all(&dir)?;
    let svg_path = dir.join("transfer.svg");
    std::fs::write(&svg_path, render_plot(&transfer_csv(&grid), PlotKind::Heatmap)?)?;
    println!("heatmap written to {}", svg_path.display());
    Ok(())
}
