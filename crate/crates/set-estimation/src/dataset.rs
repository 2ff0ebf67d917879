//! Trajectory collections: mixture generation and the on-disk container.
//!
//! A dataset is generated from a task mixture by deterministic proportional
//! allocation, so the same request always yields the same task counts, and
//! every trajectory derives its own seed from the global one by index.
//! Generation parallelism therefore cannot change the output: a pool of any
//! size produces the byte-identical dataset.
//!
//! On disk the container stores f32 and the phase labels; in memory
//! everything widens back to f64 for training.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::set::TrainData;
use crate::trajgen::{gen_trajectory, traj_seed, GenParams, Task, Trajectory, D_O, D_P};
use crate::wire::{push_f32s, ByteReader};

pub const MAGIC: [u8; 4] = *b"SETD";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn n_steps(&self) -> usize {
        self.trajectories.iter().map(|t| t.steps).sum()
    }
}

impl TrainData for Dataset {
    fn n_traj(&self) -> usize {
        self.trajectories.len()
    }

    fn len_of(&self, traj: usize) -> usize {
        self.trajectories[traj].steps
    }

    fn obs_row(&self, traj: usize, t: usize) -> &[f64] {
        self.trajectories[traj].obs_row(t)
    }

    fn priv_row(&self, traj: usize, t: usize) -> &[f64] {
        self.trajectories[traj].priv_row(t)
    }
}

/// Largest-remainder apportionment of n slots over the weights.
pub fn mixture_counts(n: usize, weights: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut by_frac: Vec<usize> = (0..weights.len()).collect();
    // Biggest fractional part first; ties go to the earlier entry.
    by_frac.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in by_frac.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Named mixtures accepted on the command line: a single task name, or
/// "all" for an even split over the three jumping tasks.
pub fn task_mixture(name: &str) -> Result<Vec<(Task, f64)>> {
    if name == "all" {
        let w = 1.0 / 3.0;
        return Ok(vec![(Task::Jump, w), (Task::Backflip, w), (Task::Sideflip, w)]);
    }
    Ok(vec![(name.parse::<Task>()?, 1.0)])
}

pub fn gen_dataset(
    n_traj: usize,
    mixture: &[(Task, f64)],
    seed: u64,
    gp: &GenParams,
) -> Result<Dataset> {
    if n_traj == 0 {
        return Err(Error::Param("dataset needs at least one trajectory".into()));
    }
    if mixture.is_empty() {
        return Err(Error::Param("empty task mixture".into()));
    }
    let weights: Vec<f64> = mixture.iter().map(|(_, w)| *w).collect();
    if weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Param("negative mixture weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Param(format!("mixture weights sum to {total}, expected 1")));
    }
    gp.validate()?;
    let counts = mixture_counts(n_traj, &weights);
    let mut tasks = Vec::with_capacity(n_traj);
    for ((task, _), count) in mixture.iter().zip(&counts) {
        tasks.extend(std::iter::repeat(*task).take(*count));
    }
    let trajectories = (0..n_traj)
        .into_par_iter()
        .map(|i| gen_trajectory(tasks[i], traj_seed(seed, i), gp))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { trajectories })
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.trajectories.len() as u32).to_le_bytes());
    out.extend_from_slice(&(D_O as u32).to_le_bytes());
    out.extend_from_slice(&(D_P as u32).to_le_bytes());
    for traj in &ds.trajectories {
        out.push(traj.task.id());
        out.extend_from_slice(&(traj.steps as u32).to_le_bytes());
        push_f32s(&mut out, &traj.o);
        push_f32s(&mut out, &traj.o_prime);
        out.extend_from_slice(&traj.phases);
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let buf = std::fs::read(path)?;
    let mut r = ByteReader::new(&buf);
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad dataset magic {magic:02x?}")));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let n_traj = r.u32()? as usize;
    let d_o = r.u32()? as usize;
    let d_p = r.u32()? as usize;
    if d_o != D_O || d_p != D_P {
        return Err(Error::Dim(format!(
            "dataset rows are {d_o}/{d_p} wide, this build expects {D_O}/{D_P}"
        )));
    }
    let mut trajectories = Vec::with_capacity(n_traj);
    for _ in 0..n_traj {
        let task = Task::from_id(r.u8()?)?;
        let steps = r.u32()? as usize;
        let o = r.f32s(steps * D_O)?;
        let o_prime = r.f32s(steps * D_P)?;
        let phases = r.take(steps)?.to_vec();
        trajectories.push(Trajectory { task, steps, o, o_prime, phases });
    }
    r.finish()?;
    Ok(Dataset { trajectories })
}
