//! Command-line front end. Every subcommand is a thin wrapper over the
//! library: generate datasets, train either estimator, score checkpoints,
//! build transfer grids, run ablations, replay the reset monitor, check
//! gradients, and render CSVs to SVG.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data or format
//! errors. All outputs are deterministic; nothing embeds a timestamp.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::checkpoint::{read_checkpoint, read_set_checkpoint, write_checkpoint, Checkpoint};
use crate::dataset::{gen_dataset, read_dataset, task_mixture, write_dataset, Dataset};
use crate::error::{Error, Result};
use crate::eval::{
    ablation_csv, eval_csv, evaluate, loss_csv, run_ablation, transfer_csv, transfer_matrix,
    AblationKind, Estimator, MlpEstimator, Mode, SetEstimator, DIM_NAMES,
};
use crate::mlp::{mlp_train, MlpConfig, MlpModel};
use crate::nn::{grad_check, Graph, Tensor};
use crate::plot::{emit_plot_svg, PlotKind};
use crate::reset::run_monitor;
use crate::rng::Rng;
use crate::runconfig::RunConfig;
use crate::set::{set_train, SetConfig, SetModel, Window};
use crate::trajgen::{Task, D_O, D_P};

/// Task name plus the blockwise mixture it stands for.
#[derive(Clone)]
pub struct Mixture {
    pub name: String,
    pub parts: Vec<(Task, f64)>,
}

impl FromStr for Mixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mixture> {
        Ok(Mixture {
            name: s.to_string(),
            parts: task_mixture(s)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelSel {
    Set,
    Mlp,
}

impl FromStr for ModelSel {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelSel> {
        match s {
            "set" => Ok(ModelSel::Set),
            "mlp" => Ok(ModelSel::Mlp),
            other => Err(Error::Config(format!(
                "unknown model {other:?}, expected set or mlp"
            ))),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "set-estimation",
    about = "Trajectory generation, state-estimator training, and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a trajectory dataset.
    Gen {
        /// walk, jump, backflip, sideflip, or all (even three-way mixture).
        #[arg(long)]
        task: Mixture,
        /// Number of trajectories.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Output dataset path.
        #[arg(long)]
        out: PathBuf,
        /// Optional key=value run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train an estimator on a dataset and write a checkpoint.
    Train {
        /// set (transformer) or mlp (baseline).
        #[arg(long)]
        model: ModelSel,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Optional iter,loss CSV.
        #[arg(long)]
        loss_out: Option<PathBuf>,
    },
    /// Score a checkpoint on a dataset and write a report CSV.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// teacher-forced or closed-loop.
        #[arg(long, default_value = "teacher-forced")]
        mode: Mode,
        /// Output report CSV path.
        #[arg(long)]
        report: PathBuf,
        /// Cap on evaluated trajectories (defaults to the config value).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score every training mixture against every task.
    Transfer {
        /// Directory holding jump.ckpt, backflip.ckpt, sideflip.ckpt, all.ckpt.
        #[arg(long)]
        ckpt_dir: PathBuf,
        /// Directory holding jump.dat, backflip.dat, sideflip.dat.
        #[arg(long)]
        data_dir: PathBuf,
        /// Output grid CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "teacher-forced")]
        mode: Mode,
    },
    /// Train paired variants and compare them.
    Ablate {
        /// context or dataset-size.
        #[arg(long)]
        which: AblationKind,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output rows CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay the reset monitor over a dataset with a checkpoint's heights.
    ResetCheck {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output per-step CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare analytic gradients against finite differences.
    Gradcheck,
    /// Render a CSV report as a standalone SVG.
    Plot {
        /// Input CSV path.
        #[arg(long = "in")]
        input: PathBuf,
        /// loss-curve, error-bars, or heatmap.
        #[arg(long)]
        kind: PlotKind,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses arguments and runs one subcommand, mapping failures onto the
/// exit-code contract.
pub fn cli_dispatch<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn load_rc(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Gen { task, n, seed, out, config } => {
            let rc = load_rc(&config)?;
            let ds = gen_dataset(n, &task.parts, seed, &rc.gen)?;
            write_dataset(&out, &ds)?;
            println!(
                "dataset: {} ({} {} trajectories, {} steps each)",
                out.display(),
                ds.trajectories.len(),
                task.name,
                rc.gen.steps
            );
            Ok(())
        }
        Cmd::Train { model, data, config, out, loss_out } => {
            let rc = load_rc(&config)?;
            let ds = read_dataset(&data)?;
            let trace = match model {
                ModelSel::Set => {
                    let (m, trace) = set_train(&ds, rc.set.clone(), rc.train)?;
                    write_checkpoint(&out, &Checkpoint::Set(m))?;
                    trace
                }
                ModelSel::Mlp => {
                    let (m, trace) = mlp_train(&ds, rc.mlp.clone(), rc.train)?;
                    write_checkpoint(&out, &Checkpoint::Mlp(m))?;
                    trace
                }
            };
            if let Some(p) = loss_out {
                std::fs::write(&p, loss_csv(&trace))?;
                println!("loss trace: {}", p.display());
            }
            println!(
                "final loss {:.6e} after {} iterations",
                trace.last().copied().unwrap_or(f64::NAN),
                trace.len()
            );
            println!("checkpoint: {}", out.display());
            Ok(())
        }
        Cmd::Eval { ckpt, data, mode, report, trials, config } => {
            let rc = load_rc(&config)?;
            let ds = read_dataset(&data)?;
            let keep = trials.unwrap_or(rc.trials).min(ds.trajectories.len());
            let ds = Dataset {
                trajectories: ds.trajectories[..keep].to_vec(),
            };
            let dataset_id = file_stem(&data);
            let rep = match read_checkpoint(&ckpt)? {
                Checkpoint::Set(m) => evaluate(&SetEstimator(&m), &ds, mode, "set", &dataset_id)?,
                Checkpoint::Mlp(m) => evaluate(&MlpEstimator(&m), &ds, mode, "mlp", &dataset_id)?,
            };
            std::fs::write(&report, eval_csv(&[rep.clone()]))?;
            for (d, name) in DIM_NAMES.iter().enumerate() {
                println!("{name} rms {:.6e}", rep.rms[d]);
            }
            println!("report: {}", report.display());
            Ok(())
        }
        Cmd::Transfer { ckpt_dir, data_dir, out, mode } => {
            const MIXES: [&str; 4] = ["jump", "backflip", "sideflip", "all"];
            const TASKS: [&str; 3] = ["jump", "backflip", "sideflip"];
            let models: Vec<(&str, SetModel)> = MIXES
                .iter()
                .map(|m| Ok((*m, read_set_checkpoint(&ckpt_dir.join(format!("{m}.ckpt")))?)))
                .collect::<Result<_>>()?;
            let datas: Vec<(&str, Dataset)> = TASKS
                .iter()
                .map(|t| Ok((*t, read_dataset(&data_dir.join(format!("{t}.dat")))?)))
                .collect::<Result<_>>()?;
            let ests: Vec<SetEstimator> = models.iter().map(|(_, m)| SetEstimator(m)).collect();
            let mpairs: Vec<(&str, &dyn Estimator)> = models
                .iter()
                .zip(&ests)
                .map(|((name, _), est)| (*name, est as &dyn Estimator))
                .collect();
            let dpairs: Vec<(&str, &Dataset)> = datas.iter().map(|(n, d)| (*n, d)).collect();
            let grid = transfer_matrix(&mpairs, &dpairs, mode)?;
            std::fs::write(&out, transfer_csv(&grid))?;
            for task in TASKS {
                let pooled = |ts: &str| {
                    let rms = &grid.cell(ts, task).unwrap().rms;
                    (rms.iter().map(|v| v * v).sum::<f64>() / rms.len() as f64).sqrt()
                };
                let own = pooled(task);
                let others: Vec<f64> = TASKS
                    .iter()
                    .filter(|t| **t != task)
                    .map(|t| pooled(t))
                    .collect();
                let off = others.iter().sum::<f64>() / others.len() as f64;
                println!("{task}: own-mixture rms {own:.6e}, other-mixture mean {off:.6e}");
            }
            println!("grid: {}", out.display());
            Ok(())
        }
        Cmd::Ablate { which, config, out } => {
            let rc = load_rc(&config)?;
            let mixture = task_mixture("all")?;
            let train_ds = gen_dataset(rc.n_traj, &mixture, rc.train.seed, &rc.gen)?;
            let eval_ds = gen_dataset(rc.trials, &mixture, rc.train.seed + 10_000, &rc.gen)?;
            let rows = run_ablation(which, &train_ds, &eval_ds, &rc.set, &rc.train, &rc.ablation_seeds)?;
            std::fs::write(&out, ablation_csv(&rows))?;
            for row in &rows {
                let pooled =
                    (row.rms.iter().map(|v| v * v).sum::<f64>() / row.rms.len() as f64).sqrt();
                println!(
                    "{} {} seed {}: pooled rms {pooled:.6e}",
                    row.ablation, row.variant, row.seed
                );
            }
            println!("rows: {}", out.display());
            Ok(())
        }
        Cmd::ResetCheck { ckpt, data, out, config } => {
            let rc = load_rc(&config)?;
            let ds = read_dataset(&data)?;
            let cfg = rc.reset_config();
            let ckpt = read_checkpoint(&ckpt)?;
            let mut csv = String::from("traj,step,cos_sim,h_est,flag,trigger\n");
            for (i, traj) in ds.trajectories.iter().enumerate() {
                let report = match &ckpt {
                    Checkpoint::Set(m) => {
                        let est = SetEstimator(m);
                        let mut prev: Vec<Vec<f64>> = Vec::with_capacity(traj.steps);
                        run_monitor(
                            traj,
                            |t, _| {
                                let p = est.predict_step(traj, t, &prev)?;
                                let h = p[0];
                                prev.push(p);
                                Ok(h)
                            },
                            &cfg,
                        )?
                    }
                    Checkpoint::Mlp(m) => {
                        let est = MlpEstimator(m);
                        run_monitor(traj, |t, _| Ok(est.predict_step(traj, t, &[])?[0]), &cfg)?
                    }
                };
                let trigger = report
                    .trigger
                    .map(|t| t.to_string())
                    .unwrap_or_default();
                for t in 0..traj.steps {
                    csv.push_str(&format!(
                        "{i},{t},{:.9e},{:.9e},{},{trigger}\n",
                        report.cos_sim[t],
                        report.h_est[t],
                        u8::from(report.flags[t])
                    ));
                }
                match report.trigger {
                    Some(t) => println!("traj {i}: reset at step {t}"),
                    None => println!("traj {i}: no reset"),
                }
            }
            std::fs::write(&out, csv)?;
            println!("monitor log: {}", out.display());
            Ok(())
        }
        Cmd::Gradcheck => {
            let (set_err, mlp_err) = model_gradient_errors(0)?;
            println!("set max relative gradient error {set_err:.3e}");
            println!("mlp max relative gradient error {mlp_err:.3e}");
            if set_err >= 1e-4 || mlp_err >= 1e-4 {
                return Err(Error::Train("gradient check exceeded 1e-4".into()));
            }
            println!("gradients match finite differences");
            Ok(())
        }
        Cmd::Plot { input, kind, out } => {
            emit_plot_svg(&input, kind, &out)?;
            println!("svg: {}", out.display());
            Ok(())
        }
    }
}

/// Finite-difference check of both models at full observation width.
/// Returns the worst relative error for (transformer, baseline).
pub fn model_gradient_errors(seed: u64) -> Result<(f64, f64)> {
    let mut rng = Rng::new(seed ^ 0x9e37);
    let rows = |rng: &mut Rng, n: usize, d: usize| -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect()
    };

    let set_cfg = SetConfig {
        h: 3,
        n_blocks: 2,
        n_heads: 2,
        d_model: 16,
        dropout: 0.0,
        max_episode_len: 8,
        d_o: D_O,
        d_p: D_P,
    };
    let model = SetModel::init(set_cfg.clone(), seed)?;
    let obs = rows(&mut rng, 3, D_O);
    let privileged = rows(&mut rng, 2, D_P);
    let target = Tensor::new(vec![3, D_P], rows(&mut rng, 3, D_P).concat())?;
    let names = model.names().to_vec();
    let mut build = |g: &mut Graph, p: &[Tensor]| {
        let m = SetModel::from_parts(set_cfg.clone(), names.clone(), p.to_vec())?;
        let w = Window {
            obs: obs.iter().map(|r| r.as_slice()).collect(),
            privileged: privileged.iter().map(|r| r.as_slice()).collect(),
            timesteps: vec![2, 3, 4],
        };
        let preds = m.forward(g, &w, None)?;
        let tgt = g.input(target.clone());
        let diff = g.sub(preds, tgt)?;
        Ok(g.mean_sq(diff))
    };
    let set_err = grad_check(&mut build, model.params(), 1e-5)?;

    let mlp_cfg = MlpConfig {
        h_mlp: 3,
        layers: 2,
        width: 16,
        d_o: D_O,
        d_p: D_P,
    };
    let model = MlpModel::init(mlp_cfg.clone(), seed)?;
    let history = rows(&mut rng, 3, D_O);
    let stacked = model.stack(&history.iter().map(|r| r.as_slice()).collect::<Vec<_>>())?;
    let target = Tensor::new(vec![1, D_P], rows(&mut rng, 1, D_P).concat())?;
    let names = model.names().to_vec();
    let mut build = |g: &mut Graph, p: &[Tensor]| {
        let m = MlpModel::from_parts(mlp_cfg.clone(), names.clone(), p.to_vec())?;
        let out = m.forward(g, stacked.clone())?;
        let tgt = g.input(target.clone());
        let diff = g.sub(out, tgt)?;
        Ok(g.mean_sq(diff))
    };
    let mlp_err = grad_check(&mut build, model.params(), 1e-5)?;

    Ok((set_err, mlp_err))
}
