//! Deterministic synthetic trajectory generator and its inversion oracle.
//!
//! The generator produces legged-locomotion episodes whose privileged state
//! (CoM height plus 3D velocity) is recoverable in closed form from any two
//! consecutive noiseless observations, but never from one alone: joint
//! positions encode the gait phase, the phase advances at a rate affine in
//! forward velocity, and joint velocities carry a fixed amplitude so a
//! single frame reveals the phase but not its rate. Jumps and flips are
//! ballistic segments with exact flight-time bookkeeping in the foot
//! heights.
//!
//! Observation layout (47 channels):
//!   0..3   base angular velocity
//!   3..6   projected gravity (unit norm before sensor noise)
//!   6..18  12 joint positions
//!   18..30 12 joint velocities
//!   30..42 4 foot positions, (x, y, z) per foot
//!   42..47 commands: v*_x, v*_y, yaw rate, jump target height, jump signal
//!
//! Privileged state (4 channels): CoM height, v_x, v_y, v_z.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::rng::{mix, Rng};

pub const D_O: usize = 47;
pub const D_P: usize = 4;

pub const OMEGA: usize = 0;
pub const GRAV: usize = 3;
pub const JOINT_POS: usize = 6;
pub const JOINT_VEL: usize = 18;
pub const FEET: usize = 30;
pub const CMD: usize = 42;

pub const N_JOINTS: usize = 12;
pub const N_FEET: usize = 4;

/// Gait amplitude constants. Joint velocities use a fixed amplitude on
/// purpose: a frame then shows where the gait cycle is but not how fast it
/// is moving.
const A_Q: f64 = 0.3;
const A_QD: f64 = 2.0;
const A_H: f64 = 0.01;
const A_F: f64 = 0.05;
const A_LAT: f64 = 0.05;
const A_X: f64 = 0.04;

/// Tucked foot height at takeoff and the per-second untuck rate; foot
/// height in flight is z_tuck + rate * time-since-takeoff, so the flight
/// clock is readable from any single flight frame.
const Z_TUCK: f64 = -0.10;
const R_TUCK: f64 = 0.10;
/// Feet above this are airborne; stance feet stay below -0.19.
pub const FLIGHT_FOOT_Z: f64 = -0.15;

const X_OFF: [f64; N_FEET] = [0.15, 0.15, -0.15, -0.15];
const Y_OFF: [f64; N_FEET] = [0.10, -0.10, 0.10, -0.10];
/// Trot pairing for foot x and stance foot z.
const PH: [f64; N_FEET] = [0.0, PI, PI, 0.0];
/// Quadrature spacing for lateral sway, one quarter cycle per foot.
const ZETA: [f64; N_FEET] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    /// Never receives a jump signal.
    Walk,
    Jump,
    Backflip,
    Sideflip,
}

impl Task {
    pub fn id(self) -> u8 {
        match self {
            Task::Walk => 0,
            Task::Jump => 1,
            Task::Backflip => 2,
            Task::Sideflip => 3,
        }
    }

    pub fn from_id(id: u8) -> Result<Task> {
        match id {
            0 => Ok(Task::Walk),
            1 => Ok(Task::Jump),
            2 => Ok(Task::Backflip),
            3 => Ok(Task::Sideflip),
            other => Err(Error::Format(format!("unknown task id {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Walk => "walk",
            Task::Jump => "jump",
            Task::Backflip => "backflip",
            Task::Sideflip => "sideflip",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Task> {
        match s {
            "walk" => Ok(Task::Walk),
            "jump" => Ok(Task::Jump),
            "backflip" => Ok(Task::Backflip),
            "sideflip" => Ok(Task::Sideflip),
            other => Err(Error::Config(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub dt: f64,
    pub steps: usize,
    pub g: f64,
    /// Nominal walking CoM height.
    pub h_walk: f64,
    /// Velocity lag time constant.
    pub tau_v: f64,
    /// Gait frequency at zero velocity and its slopes in v_x and v_y.
    pub f0: f64,
    pub f_per_v: f64,
    pub f_lat_per_v: f64,
    /// Jump-goal tolerance that clears the jump signal.
    pub eps_h: f64,
    pub sigma_omega: f64,
    pub sigma_phi: f64,
    pub sigma_q: f64,
    pub sigma_qd: f64,
    pub sigma_p: f64,
    pub sigma_cmd: f64,
    pub h_jump_min: f64,
    pub h_jump_max: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            dt: 0.02,
            steps: 400,
            g: 9.81,
            h_walk: 0.25,
            tau_v: 0.2,
            f0: 1.5,
            f_per_v: 1.0,
            f_lat_per_v: 2.0,
            eps_h: 0.02,
            sigma_omega: 0.05,
            sigma_phi: 0.01,
            sigma_q: 0.01,
            sigma_qd: 0.1,
            sigma_p: 0.005,
            sigma_cmd: 0.0,
            h_jump_min: 0.4,
            h_jump_max: 0.7,
        }
    }
}

impl GenParams {
    pub fn noiseless(&self) -> GenParams {
        GenParams {
            sigma_omega: 0.0,
            sigma_phi: 0.0,
            sigma_q: 0.0,
            sigma_qd: 0.0,
            sigma_p: 0.0,
            sigma_cmd: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 || self.steps == 0 || self.g <= 0.0 {
            return Err(Error::Param("dt, steps, and g must be positive".into()));
        }
        if self.h_walk <= 0.0 || self.tau_v <= 0.0 || self.eps_h <= 0.0 {
            return Err(Error::Param(
                "h_walk, tau_v, and eps_h must be positive".into(),
            ));
        }
        if self.f0 <= 0.0 || self.f_per_v <= 0.0 || self.f_lat_per_v <= 0.0 {
            return Err(Error::Param("gait frequency terms must be positive".into()));
        }
        for (name, s) in [
            ("sigma_omega", self.sigma_omega),
            ("sigma_phi", self.sigma_phi),
            ("sigma_q", self.sigma_q),
            ("sigma_qd", self.sigma_qd),
            ("sigma_p", self.sigma_p),
            ("sigma_cmd", self.sigma_cmd),
        ] {
            if s < 0.0 {
                return Err(Error::Param(format!("{name} must be non-negative")));
            }
        }
        if self.h_jump_min <= self.h_walk {
            return Err(Error::Param(format!(
                "jump apex {} not above the walking height {}",
                self.h_jump_min, self.h_walk
            )));
        }
        if self.h_jump_max < self.h_jump_min {
            return Err(Error::Param("empty jump height range".into()));
        }
        Ok(())
    }
}

/// Phase labels stored per step.
pub const PHASE_STANCE: u8 = 0;
pub const PHASE_FLIGHT: u8 = 1;
/// Airborne after the jump goal was reached, before touchdown.
pub const PHASE_FALLING: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub task: Task,
    pub steps: usize,
    /// Row-major steps x 47.
    pub o: Vec<f64>,
    /// Row-major steps x 4: height, v_x, v_y, v_z. Never carries noise.
    pub o_prime: Vec<f64>,
    pub phases: Vec<u8>,
}

impl Trajectory {
    pub fn obs_row(&self, t: usize) -> &[f64] {
        &self.o[t * D_O..(t + 1) * D_O]
    }

    pub fn priv_row(&self, t: usize) -> &[f64] {
        &self.o_prime[t * D_P..(t + 1) * D_P]
    }
}

pub fn ballistic_height(h0: f64, vz0: f64, t: f64, g: f64) -> (f64, f64) {
    (h0 + vz0 * t - 0.5 * g * t * t, vz0 - g * t)
}

/// Folds a cumulative backward rotation into a pitch reading that rises to
/// pi/2, snaps to -pi/2, and climbs back to level once per half turn.
pub fn pitch_angle_wrapped(theta: f64) -> f64 {
    (theta + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
}

enum Mode {
    Stance,
    Flight {
        /// Steps since takeoff, 1-based.
        j: usize,
        /// Total airborne steps; touchdown happens at j = total + 1.
        total: usize,
        vz0: f64,
        omega_flip: f64,
        goal_reached: bool,
    },
}

pub fn gen_trajectory(task: Task, traj_seed: u64, gp: &GenParams) -> Result<Trajectory> {
    gp.validate()?;
    let mut params = Rng::substream(traj_seed, 1);
    let mut noise = Rng::substream(traj_seed, 2);

    let theta0 = params.range(0.0, TAU);
    let theta_lat0 = params.range(0.0, TAU);
    let vx_mean = params.range(0.5, 1.5);
    let vx_amp = params.range(0.3, vx_mean.min(2.0 - vx_mean));
    let vx_freq = params.range(0.2, 0.5);
    let vx_phase = params.range(0.0, TAU);
    let vy_amp = params.range(0.1, 0.5);
    let vy_freq = params.range(0.2, 0.5);
    let vy_phase = params.range(0.0, TAU);
    let wz_amp = params.range(0.3, 1.0);
    let wz_freq = params.range(0.2, 0.5);
    let wz_phase = params.range(0.0, TAU);
    let h_jump = params.range(gp.h_jump_min, gp.h_jump_max);
    let mut next_jump = 50 + params.below(101);
    // Joints 0 and 1 keep zero offset so the gait phase has a fixed
    // quadrature pair; the rest get per-trajectory offsets.
    let mut q_off = [0.0; N_JOINTS];
    for off in q_off.iter_mut().skip(2) {
        *off = params.range(-0.5, 0.5);
    }

    let alpha = 1.0 - (-gp.dt / gp.tau_v).exp();
    let mut vx = 0.0;
    let mut vy = 0.0;
    let mut wz = 0.0;
    let mut theta = theta0;
    let mut theta_lat = theta_lat0;
    let mut mode = Mode::Stance;
    let mut armed = false;
    let mut jump_sig = 0.0;

    let mut o = Vec::with_capacity(gp.steps * D_O);
    let mut o_prime = Vec::with_capacity(gp.steps * D_P);
    let mut phases = Vec::with_capacity(gp.steps);

    for k in 0..gp.steps {
        let t = k as f64 * gp.dt;
        let vx_cmd = vx_mean + vx_amp * (TAU * vx_freq * t + vx_phase).sin();
        let vy_cmd = vy_amp * (TAU * vy_freq * t + vy_phase).sin();
        let wz_cmd = wz_amp * (TAU * wz_freq * t + wz_phase).sin();

        if k > 0 {
            match mode {
                Mode::Stance if armed => {
                    let vz0 = (2.0 * gp.g * (h_jump - gp.h_walk)).sqrt();
                    // Airborne while ballistic height stays above h_walk.
                    let total = (2.0 * vz0 / gp.g / gp.dt).ceil() as usize - 1;
                    mode = Mode::Flight {
                        j: 1,
                        total,
                        vz0,
                        omega_flip: TAU / (total as f64 * gp.dt),
                        goal_reached: false,
                    };
                    armed = false;
                }
                Mode::Stance => {}
                Mode::Flight { j, total, .. } => {
                    if j + 1 > total {
                        mode = Mode::Stance;
                    } else if let Mode::Flight { j, .. } = &mut mode {
                        *j += 1;
                    }
                }
            }
            if matches!(mode, Mode::Stance) {
                vx += alpha * (vx_cmd - vx);
                vy += alpha * (vy_cmd - vy);
                wz += alpha * (wz_cmd - wz);
            }
            // The gait phase advances identically in stance and flight
            // (velocities freeze while airborne), so phase deltas stay
            // velocity-readable across mode boundaries.
            let f = gp.f0 + gp.f_per_v * vx;
            let f_lat = gp.f0 + gp.f_lat_per_v * vy;
            theta = (theta + TAU * f * gp.dt).rem_euclid(TAU);
            theta_lat = (theta_lat + TAU * f_lat * gp.dt).rem_euclid(TAU);
        }

        if task != Task::Walk && matches!(mode, Mode::Stance) && k == next_jump {
            jump_sig = 1.0;
            armed = true;
            next_jump += 50 + params.below(51);
        }

        let f = gp.f0 + gp.f_per_v * vx;
        let (h, vz, grav, flip_omega, phase) = match &mut mode {
            Mode::Stance => {
                let h = gp.h_walk + A_H * theta.sin();
                let vz = A_H * theta.cos() * TAU * f;
                (h, vz, [0.0, 0.0, -1.0], [0.0, 0.0], PHASE_STANCE)
            }
            Mode::Flight {
                j,
                total,
                vz0,
                omega_flip,
                goal_reached,
            } => {
                let tau_f = *j as f64 * gp.dt;
                let (h, vz) = ballistic_height(gp.h_walk, *vz0, tau_f, gp.g);
                if !*goal_reached && (h - h_jump).abs() < gp.eps_h {
                    *goal_reached = true;
                    jump_sig = 0.0;
                }
                let beta = *j as f64 * TAU / *total as f64;
                let (grav, flip) = match task {
                    Task::Walk | Task::Jump => ([0.0, 0.0, -1.0], [0.0, 0.0]),
                    Task::Backflip => {
                        ([-beta.sin(), 0.0, -beta.cos()], [0.0, *omega_flip])
                    }
                    Task::Sideflip => {
                        ([0.0, beta.sin(), -beta.cos()], [*omega_flip, 0.0])
                    }
                };
                let phase = if *goal_reached {
                    PHASE_FALLING
                } else {
                    PHASE_FLIGHT
                };
                (h, vz, grav, flip, phase)
            }
        };

        let mut row = [0.0; D_O];
        row[OMEGA] = flip_omega[0] + gp.sigma_omega * noise.normal();
        row[OMEGA + 1] = flip_omega[1] + gp.sigma_omega * noise.normal();
        row[OMEGA + 2] = wz + gp.sigma_omega * noise.normal();
        for (i, g_i) in grav.iter().enumerate() {
            row[GRAV + i] = g_i + gp.sigma_phi * noise.normal();
        }
        for i in 0..N_JOINTS {
            let ph = theta + i as f64 * FRAC_PI_2;
            row[JOINT_POS + i] = q_off[i] + A_Q * ph.sin() + gp.sigma_q * noise.normal();
            row[JOINT_VEL + i] = A_QD * ph.cos() + gp.sigma_qd * noise.normal();
        }
        for i in 0..N_FEET {
            let z = match &mode {
                Mode::Stance => -h + A_F * (theta + PH[i]).sin().max(0.0),
                Mode::Flight { j, .. } => Z_TUCK + R_TUCK * (*j as f64 * gp.dt),
            };
            row[FEET + 3 * i] =
                X_OFF[i] + A_X * (theta + PH[i]).sin() + gp.sigma_p * noise.normal();
            row[FEET + 3 * i + 1] =
                Y_OFF[i] + A_LAT * (theta_lat + ZETA[i]).sin() + gp.sigma_p * noise.normal();
            row[FEET + 3 * i + 2] = z + gp.sigma_p * noise.normal();
        }
        row[CMD] = vx_cmd + gp.sigma_cmd * noise.normal();
        row[CMD + 1] = vy_cmd + gp.sigma_cmd * noise.normal();
        row[CMD + 2] = wz_cmd + gp.sigma_cmd * noise.normal();
        row[CMD + 3] = h_jump;
        row[CMD + 4] = jump_sig;

        o.extend_from_slice(&row);
        o_prime.extend_from_slice(&[h, vx, vy, vz]);
        phases.push(phase);
    }

    Ok(Trajectory {
        task,
        steps: gp.steps,
        o,
        o_prime,
        phases,
    })
}

/// Seed for trajectory `index` of a dataset generated from `seed`.
pub fn traj_seed(seed: u64, index: usize) -> u64 {
    mix(seed ^ index as u64)
}

fn gait_phase(row: &[f64]) -> f64 {
    row[JOINT_POS].atan2(row[JOINT_POS + 1])
}

fn sway_phase(row: &[f64]) -> f64 {
    (row[FEET + 1] - Y_OFF[0]).atan2(row[FEET + 4] - Y_OFF[1])
}

fn airborne(row: &[f64]) -> bool {
    (0..N_FEET).all(|i| row[FEET + 3 * i + 2] > FLIGHT_FOOT_Z)
}

/// Analytic inversion of the generator: privileged state for the last frame
/// of a noiseless history. Velocity recovery needs two frames because the
/// observation encodes gait phase, not phase rate.
pub fn oracle_privileged(history: &[&[f64]], gp: &GenParams) -> Result<[f64; D_P]> {
    match history.len() {
        0 => return Err(Error::Contract("empty history".into())),
        1 => {
            return Err(Error::Unrecoverable(
                "velocity is not observable from a single frame".into(),
            ))
        }
        _ => {}
    }
    let last = history[history.len() - 1];
    let prev = history[history.len() - 2];
    if last.len() != D_O || prev.len() != D_O {
        return Err(Error::Dim(format!("observation rows must have {D_O} entries")));
    }

    let d_theta = (gait_phase(last) - gait_phase(prev)).rem_euclid(TAU);
    let f = d_theta / (TAU * gp.dt);
    let vx = (f - gp.f0) / gp.f_per_v;
    let d_lat = (sway_phase(last) - sway_phase(prev)).rem_euclid(TAU);
    let f_lat = d_lat / (TAU * gp.dt);
    let vy = (f_lat - gp.f0) / gp.f_lat_per_v;

    if airborne(last) {
        let tau_f = (last[FEET + 2] - Z_TUCK) / R_TUCK;
        let h_jump = last[CMD + 3];
        let vz0 = (2.0 * gp.g * (h_jump - gp.h_walk)).sqrt();
        let (h, vz) = ballistic_height(gp.h_walk, vz0, tau_f, gp.g);
        Ok([h, vx, vy, vz])
    } else {
        let theta = gait_phase(last);
        let h = gp.h_walk + A_H * theta.sin();
        let vz = A_H * theta.cos() * TAU * f;
        Ok([h, vx, vy, vz])
    }
}

/// Privileged state for the first frame of an episode, which starts from
/// rest by construction: velocities are zero and the height follows the
/// gait phase alone.
pub fn oracle_first_frame(row: &[f64], gp: &GenParams) -> Result<[f64; D_P]> {
    if row.len() != D_O {
        return Err(Error::Dim(format!("observation rows must have {D_O} entries")));
    }
    let theta = gait_phase(row);
    let h = gp.h_walk + A_H * theta.sin();
    let vz = A_H * theta.cos() * TAU * gp.f0;
    Ok([h, 0.0, 0.0, vz])
}
