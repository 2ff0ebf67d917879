//! Fall detection for airborne gaits.
//!
//! A flipping robot is upside down on purpose, so orientation alone cannot
//! distinguish a mid-flight pose from a crash. The trigger therefore fires
//! only when the body is both tilted past the cosine threshold and BELOW the
//! walking height, with the height supplied by a state estimator rather
//! than by privileged simulator state. [`run_monitor`] evaluates the rule
//! over a whole trajectory the way a deployed supervisor would: streaming,
//! with estimated heights, and with a short debounce so one noisy estimate
//! cannot reset the robot.

use crate::error::{Error, Result};
use crate::trajgen::{Trajectory, GRAV};

/// Consecutive positive steps required before a trigger is reported.
pub const DEBOUNCE: usize = 3;

#[derive(Clone, Copy, Debug)]
pub struct ResetConfig {
    /// Cosine-similarity threshold; tilt reads below it when falling.
    pub eps_r: f64,
    /// Height floor; estimated heights above it read as deliberate flight.
    pub h_walk: f64,
    /// World gravity direction.
    pub g: [f64; 3],
}

impl ResetConfig {
    /// Threshold at zero: anything tilted past a quarter turn counts.
    pub fn new(h_walk: f64) -> ResetConfig {
        ResetConfig { eps_r: 0.0, h_walk, g: [0.0, 0.0, -1.0] }
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// The instantaneous trigger rule.
pub fn should_reset(g_p: &[f64; 3], h_est: f64, cfg: &ResetConfig) -> Result<bool> {
    if !(-1.0..=1.0).contains(&cfg.eps_r) {
        return Err(Error::Param(format!("cosine threshold {} outside [-1, 1]", cfg.eps_r)));
    }
    let norm = dot(g_p, g_p).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Contract(format!("projected gravity has norm {norm}, expected 1")));
    }
    Ok(dot(g_p, &cfg.g) < cfg.eps_r && h_est < cfg.h_walk)
}

/// Per-step record of one monitored trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct ResetReport {
    /// Cosine similarity between observed gravity and the world direction.
    pub cos_sim: Vec<f64>,
    /// Estimated body height fed to the rule.
    pub h_est: Vec<f64>,
    /// Raw per-step rule outcomes, before debouncing.
    pub flags: Vec<bool>,
    /// First step of the first run of `DEBOUNCE` consecutive positives.
    pub trigger: Option<usize>,
}

/// Streams a trajectory through the trigger rule. `estimate_h` maps a step
/// index and its observation row to a height estimate; the observed gravity
/// is renormalized before the rule sees it because sensor noise perturbs
/// its length.
pub fn run_monitor<F>(traj: &Trajectory, mut estimate_h: F, cfg: &ResetConfig) -> Result<ResetReport>
where
    F: FnMut(usize, &[f64]) -> Result<f64>,
{
    let mut report = ResetReport {
        cos_sim: Vec::with_capacity(traj.steps),
        h_est: Vec::with_capacity(traj.steps),
        flags: Vec::with_capacity(traj.steps),
        trigger: None,
    };
    let mut run = 0usize;
    for t in 0..traj.steps {
        let o = traj.obs_row(t);
        let raw = [o[GRAV], o[GRAV + 1], o[GRAV + 2]];
        let norm = dot(&raw, &raw).sqrt();
        if norm < 1e-9 {
            return Err(Error::Contract(format!("zero gravity reading at step {t}")));
        }
        let g_p = [raw[0] / norm, raw[1] / norm, raw[2] / norm];
        let h = estimate_h(t, o)?;
        let flag = should_reset(&g_p, h, cfg)?;
        report.cos_sim.push(dot(&g_p, &cfg.g));
        report.h_est.push(h);
        report.flags.push(flag);
        if flag {
            run += 1;
            if run >= DEBOUNCE && report.trigger.is_none() {
                report.trigger = Some(t + 1 - run);
            }
        } else {
            run = 0;
        }
    }
    Ok(report)
}
