//! Streaming evaluation: per-dimension RMS error, cross-task transfer
//! grids, and the context and dataset-size ablations.
//!
//! Every estimator is driven step by step through each trajectory. Under
//! teacher forcing the privileged history it conditions on holds ground
//! truth; in closed loop it holds the estimator's own earlier outputs, so
//! errors compound the way they would on a robot.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mlp::MlpModel;
use crate::set::{set_train, SetConfig, SetModel, TrainConfig, Window};
use crate::trajgen::{oracle_first_frame, oracle_privileged, GenParams, Trajectory, D_P};

/// Privileged dimension labels in storage order.
pub const DIM_NAMES: [&str; D_P] = ["h", "v_x", "v_y", "v_z"];

/// How the fed-back privileged history is sourced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Condition on ground-truth privileged rows.
    TeacherForced,
    /// Condition on the estimator's own earlier predictions.
    ClosedLoop,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::TeacherForced => "teacher-forced",
            Mode::ClosedLoop => "closed-loop",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "teacher-forced" => Ok(Mode::TeacherForced),
            "closed-loop" => Ok(Mode::ClosedLoop),
            other => Err(Error::Config(format!(
                "unknown mode {other:?}, expected teacher-forced or closed-loop"
            ))),
        }
    }
}

/// A streaming state estimator. At step `t` it may read observation rows
/// `0..=t` of the trajectory and the privileged rows `prev[0..t]` supplied
/// by the evaluation driver.
pub trait Estimator: Sync {
    fn predict_step(&self, traj: &Trajectory, t: usize, prev: &[Vec<f64>]) -> Result<Vec<f64>>;
}

/// Transformer estimator: predicts from the trailing context window.
pub struct SetEstimator<'a>(pub &'a SetModel);

impl Estimator for SetEstimator<'_> {
    fn predict_step(&self, traj: &Trajectory, t: usize, prev: &[Vec<f64>]) -> Result<Vec<f64>> {
        let s0 = (t + 1).saturating_sub(self.0.cfg().h);
        let w = Window {
            obs: (s0..=t).map(|s| traj.obs_row(s)).collect(),
            privileged: (s0..t).map(|s| prev[s].as_slice()).collect(),
            timesteps: (s0..=t).collect(),
        };
        self.0.predict_last(&w)
    }
}

/// Baseline estimator: predicts from the trailing observation stack alone.
pub struct MlpEstimator<'a>(pub &'a MlpModel);

impl Estimator for MlpEstimator<'_> {
    fn predict_step(&self, traj: &Trajectory, t: usize, _prev: &[Vec<f64>]) -> Result<Vec<f64>> {
        let s0 = (t + 1).saturating_sub(self.0.cfg().h_mlp);
        let history: Vec<&[f64]> = (s0..=t).map(|s| traj.obs_row(s)).collect();
        self.0.predict(&history)
    }
}

/// Analytic inversion of the generator; exact on noiseless data in either
/// mode because it never reads the fed-back history.
pub struct OracleEstimator {
    pub gp: GenParams,
}

impl Estimator for OracleEstimator {
    fn predict_step(&self, traj: &Trajectory, t: usize, _prev: &[Vec<f64>]) -> Result<Vec<f64>> {
        if t == 0 {
            return Ok(oracle_first_frame(traj.obs_row(0), &self.gp)?.to_vec());
        }
        let history: Vec<&[f64]> = (0..=t).map(|s| traj.obs_row(s)).collect();
        Ok(oracle_privileged(&history, &self.gp)?.to_vec())
    }
}

/// Constant estimator. `zeros` scores raw signal power; `from_data` is the
/// best constant guess, the floor a learned model has to beat.
pub struct MeanEstimator {
    pub mean: Vec<f64>,
}

impl MeanEstimator {
    pub fn zeros() -> MeanEstimator {
        MeanEstimator { mean: vec![0.0; D_P] }
    }

    pub fn from_data(data: &Dataset) -> MeanEstimator {
        let mut sum = vec![0.0; D_P];
        let mut n = 0usize;
        for traj in &data.trajectories {
            for t in 0..traj.steps {
                for (s, v) in sum.iter_mut().zip(traj.priv_row(t)) {
                    *s += v;
                }
                n += 1;
            }
        }
        if n > 0 {
            for s in &mut sum {
                *s /= n as f64;
            }
        }
        MeanEstimator { mean: sum }
    }
}

impl Estimator for MeanEstimator {
    fn predict_step(&self, _traj: &Trajectory, _t: usize, _prev: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.mean.clone())
    }
}

/// Per-dimension RMS over paired rows.
pub fn rms_error(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::Shape {
            op: "rms_error",
            lhs: vec![pred.len()],
            rhs: vec![truth.len()],
        });
    }
    if pred.is_empty() {
        return Err(Error::Contract("rms over zero samples".into()));
    }
    let dims = pred[0].len();
    let mut sumsq = vec![0.0; dims];
    for (p, q) in pred.iter().zip(truth) {
        if p.len() != dims || q.len() != dims {
            return Err(Error::Shape {
                op: "rms_error",
                lhs: vec![p.len()],
                rhs: vec![q.len()],
            });
        }
        for d in 0..dims {
            let e = p[d] - q[d];
            sumsq[d] += e * e;
        }
    }
    Ok(sumsq
        .into_iter()
        .map(|s| (s / pred.len() as f64).sqrt())
        .collect())
}

/// Per-dimension RMS for one model over one dataset.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub mode: Mode,
    pub trials: usize,
    pub rms: Vec<f64>,
}

/// Drives the estimator through every trajectory and pools squared errors
/// over all steps. Trajectories run in parallel; partial sums recombine in
/// index order, so the result is bit-identical for any worker count.
pub fn evaluate(
    est: &dyn Estimator,
    data: &Dataset,
    mode: Mode,
    model: &str,
    dataset: &str,
) -> Result<EvalReport> {
    if data.trajectories.is_empty() {
        return Err(Error::Contract("evaluation needs at least one trajectory".into()));
    }
    let parts: Vec<([f64; D_P], usize)> = data
        .trajectories
        .par_iter()
        .map(|traj| {
            let mut prev: Vec<Vec<f64>> = Vec::with_capacity(traj.steps);
            let mut sumsq = [0.0; D_P];
            for t in 0..traj.steps {
                let p = est.predict_step(traj, t, &prev)?;
                if p.len() != D_P {
                    return Err(Error::Dim(format!(
                        "estimator returned {} dims, expected {D_P}",
                        p.len()
                    )));
                }
                let truth = traj.priv_row(t);
                for d in 0..D_P {
                    let e = p[d] - truth[d];
                    sumsq[d] += e * e;
                }
                prev.push(match mode {
                    Mode::TeacherForced => truth.to_vec(),
                    Mode::ClosedLoop => p,
                });
            }
            Ok((sumsq, traj.steps))
        })
        .collect::<Result<_>>()?;
    let mut total = [0.0; D_P];
    let mut count = 0usize;
    for (part, steps) in &parts {
        for d in 0..D_P {
            total[d] += part[d];
        }
        count += steps;
    }
    Ok(EvalReport {
        model: model.to_string(),
        dataset: dataset.to_string(),
        mode,
        trials: data.trajectories.len(),
        rms: total.iter().map(|s| (s / count as f64).sqrt()).collect(),
    })
}

/// One cell of the transfer grid.
#[derive(Clone, Debug)]
pub struct TransferCell {
    pub train_set: String,
    pub eval_task: String,
    pub rms: Vec<f64>,
}

/// Complete grid of training mixtures against evaluation tasks.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    pub cells: Vec<TransferCell>,
}

impl TransferMatrix {
    pub fn cell(&self, train_set: &str, eval_task: &str) -> Option<&TransferCell> {
        self.cells
            .iter()
            .find(|c| c.train_set == train_set && c.eval_task == eval_task)
    }
}

/// Evaluates every model against every dataset, rows in model order.
pub fn transfer_matrix(
    models: &[(&str, &dyn Estimator)],
    datasets: &[(&str, &Dataset)],
    mode: Mode,
) -> Result<TransferMatrix> {
    let mut cells = Vec::with_capacity(models.len() * datasets.len());
    for (train_set, est) in models {
        for (eval_task, data) in datasets {
            let report = evaluate(*est, data, mode, train_set, eval_task)?;
            cells.push(TransferCell {
                train_set: train_set.to_string(),
                eval_task: eval_task.to_string(),
                rms: report.rms,
            });
        }
    }
    Ok(TransferMatrix { cells })
}

/// Which paired comparison to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationKind {
    /// Full context window against a single-step window.
    Context,
    /// Full training set against a tenth of it.
    DatasetSize,
}

impl FromStr for AblationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<AblationKind> {
        match s {
            "context" => Ok(AblationKind::Context),
            "dataset-size" => Ok(AblationKind::DatasetSize),
            other => Err(Error::Config(format!(
                "unknown ablation {other:?}, expected context or dataset-size"
            ))),
        }
    }
}

/// One trained-and-scored ablation variant.
#[derive(Clone, Debug)]
pub struct AblationRow {
    pub ablation: &'static str,
    pub variant: String,
    pub seed: u64,
    pub rms: Vec<f64>,
}

/// Every tenth trajectory. Stride sampling keeps the task mixture of a
/// blockwise-generated dataset; a leading slice would be single-task.
pub fn tenth_subsample(data: &Dataset) -> Dataset {
    Dataset {
        trajectories: data.trajectories.iter().step_by(10).cloned().collect(),
    }
}

/// Trains paired variants per seed and scores them teacher-forced on the
/// held-out set. Rows come out variant-major within each seed.
pub fn run_ablation(
    kind: AblationKind,
    train_data: &Dataset,
    eval_data: &Dataset,
    cfg: &SetConfig,
    tc: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let tc = TrainConfig { seed, ..*tc };
        match kind {
            AblationKind::Context => {
                if cfg.h <= 1 {
                    return Err(Error::Contract("context ablation needs h > 1".into()));
                }
                let mut short = cfg.clone();
                short.h = 1;
                for (variant, cfg) in [(format!("h{}", cfg.h), cfg.clone()), ("h1".into(), short)] {
                    let (model, _) = set_train(train_data, cfg, tc)?;
                    let report =
                        evaluate(&SetEstimator(&model), eval_data, Mode::TeacherForced, &variant, "eval")?;
                    rows.push(AblationRow { ablation: "context", variant, seed, rms: report.rms });
                }
            }
            AblationKind::DatasetSize => {
                let tenth = tenth_subsample(train_data);
                for (variant, data) in [("full", train_data), ("tenth", &tenth)] {
                    let (model, _) = set_train(data, cfg.clone(), tc)?;
                    let report =
                        evaluate(&SetEstimator(&model), eval_data, Mode::TeacherForced, variant, "eval")?;
                    rows.push(AblationRow {
                        ablation: "dataset-size",
                        variant: variant.into(),
                        seed,
                        rms: report.rms,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// `model,dataset,mode,dim,rms,trials` rows, one per dimension.
pub fn eval_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("model,dataset,mode,dim,rms,trials\n");
    for r in reports {
        for (d, name) in DIM_NAMES.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{:.9e},{}\n",
                r.model, r.dataset, r.mode, name, r.rms[d], r.trials
            ));
        }
    }
    out
}

/// `train_set,eval_task,dim,rms` rows.
pub fn transfer_csv(m: &TransferMatrix) -> String {
    let mut out = String::from("train_set,eval_task,dim,rms\n");
    for c in &m.cells {
        for (d, name) in DIM_NAMES.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{:.9e}\n",
                c.train_set, c.eval_task, name, c.rms[d]
            ));
        }
    }
    out
}

/// `ablation,variant,seed,dim,rms` rows.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("ablation,variant,seed,dim,rms\n");
    for r in rows {
        for (d, name) in DIM_NAMES.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{:.9e}\n",
                r.ablation, r.variant, r.seed, name, r.rms[d]
            ));
        }
    }
    out
}

/// `iter,loss` rows from a training trace.
pub fn loss_csv(trace: &[f64]) -> String {
    let mut out = String::from("iter,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{l:.9e}\n"));
    }
    out
}
