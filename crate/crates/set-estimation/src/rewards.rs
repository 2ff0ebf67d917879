//! Reward library for the jumping gaits.
//!
//! Everything here is a pure function of a single [`RewardInputs`] snapshot,
//! so reward traces can be recomputed from logged trajectories without
//! touching the simulator. `total_reward` applies one gait's weight column
//! and hands back the weighted contribution of every term next to the total,
//! which is what the per-row logging in training monitors wants.
//!
//! The action-rate row is scored exactly as published: the raw term is
//! `-|dq|^2` and the weight is itself negative, so moving joints earns a
//! positive contribution under the flip gaits. See the pinned test.

use std::f64::consts::{PI, TAU};

use crate::trajgen::Task;

/// Forward-speed clamp bounds used by the jump terms.
pub const VX_CLIP_LO: f64 = -0.5;
pub const VX_CLIP_HI: f64 = 2.0;

/// Squared-exponential tracking kernel, exp(-|x|^2 / 0.25).
pub fn phi_kernel(x: &[f64]) -> f64 {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    (-sq / 0.25).exp()
}

/// min(hi, max(lo, x)).
pub fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Shortest signed equivalent of an angle, in (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI { y - TAU } else { y }
}

/// Reward column selector. Walking trajectories score under the jump column
/// with the jump signal held low, so every task maps somewhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gait {
    Jump,
    Backflip,
    Sideflip,
}

impl Gait {
    pub fn for_task(task: Task) -> Gait {
        match task {
            Task::Walk | Task::Jump => Gait::Jump,
            Task::Backflip => Gait::Backflip,
            Task::Sideflip => Gait::Sideflip,
        }
    }
}

/// Which flavor of the jump terms to evaluate: apex tracking on its own, or
/// apex tracking gated by roll magnitude for the side flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpVariant {
    Height,
    Roll,
}

/// Everything one reward evaluation reads. Velocities are body-frame with x
/// forward; `phi_pitch` is expected pre-wrapped (see
/// [`crate::trajgen::pitch_angle_wrapped`]) and `phi_roll` raw.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardInputs {
    /// Body height above ground, metres.
    pub h: f64,
    /// Linear velocity, x forward.
    pub v: [f64; 3],
    /// Yaw rate.
    pub omega_z: f64,
    /// Commanded planar velocity.
    pub v_cmd: [f64; 2],
    /// Commanded yaw rate.
    pub omega_cmd_z: f64,
    /// Apex height target while the jump signal is up.
    pub h_jump: f64,
    /// Height target during normal locomotion.
    pub h_walk: f64,
    /// High from jump onset until the apex goal is reached.
    pub jump_sig: bool,
    /// High from goal attainment until first foot contact.
    pub falling: bool,
    /// Wrapped pitch angle.
    pub phi_pitch: f64,
    /// Roll angle.
    pub phi_roll: f64,
    /// Yaw when the jump started.
    pub yaw_jump: f64,
    /// Yaw at landing.
    pub yaw_landing: f64,
    /// Seconds each foot has spent airborne.
    pub t_air: [f64; 4],
    /// Change in commanded joint targets since the previous step.
    pub dq_cmd: [f64; 12],
    /// Half-width of the apex acceptance band.
    pub eps_h: f64,
}

fn at_goal(inp: &RewardInputs) -> bool {
    inp.jump_sig && (inp.h_jump - inp.h).abs() < inp.eps_h
}

/// Apex tracking. While the signal is up the height kernel is scaled by the
/// clamped forward speed (height variant) or the roll magnitude (roll
/// variant); with the signal low the height variant tracks the walking
/// height and the roll variant is silent.
pub fn jump_height_reward(inp: &RewardInputs, variant: JumpVariant) -> f64 {
    match variant {
        JumpVariant::Height => {
            if inp.jump_sig {
                phi_kernel(&[inp.h_jump - inp.h]) * clip(inp.v[0], VX_CLIP_LO, VX_CLIP_HI)
            } else {
                phi_kernel(&[inp.h_walk - inp.h])
            }
        }
        JumpVariant::Roll => {
            if inp.jump_sig {
                phi_kernel(&[inp.h_jump - inp.h]) * inp.phi_roll.abs()
            } else {
                0.0
            }
        }
    }
}

/// One-shot bonus paid while the body sits inside the apex band with the
/// signal still up.
pub fn jump_goal_reward(inp: &RewardInputs, variant: JumpVariant) -> f64 {
    if !at_goal(inp) {
        return 0.0;
    }
    match variant {
        JumpVariant::Height => clip(inp.v[0], VX_CLIP_LO, VX_CLIP_HI),
        JumpVariant::Roll => inp.phi_roll.abs(),
    }
}

/// Signed pitch, paid only during the falling phase. The sign matters: a
/// body caught past the vertical reads negative and is penalized under
/// positive weights.
pub fn pitch_reward(inp: &RewardInputs) -> f64 {
    if inp.falling { inp.phi_pitch } else { 0.0 }
}

/// Unweighted values of the tracking and regularization terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxRewards {
    pub linear_vel: f64,
    pub angular_vel: f64,
    pub jump_forward: f64,
    pub feet_air: f64,
    pub action_rate: f64,
}

pub fn auxiliary_rewards(inp: &RewardInputs) -> AuxRewards {
    let dv = [inp.v_cmd[0] - inp.v[0], inp.v_cmd[1] - inp.v[1]];
    let yaw_err = wrap_angle(inp.yaw_landing - inp.yaw_jump);
    AuxRewards {
        linear_vel: phi_kernel(&dv),
        angular_vel: phi_kernel(&[inp.omega_cmd_z - inp.omega_z]),
        jump_forward: yaw_err * yaw_err,
        feet_air: inp.t_air.iter().map(|t| t - 0.5).sum(),
        action_rate: -inp.dq_cmd.iter().map(|d| d * d).sum::<f64>(),
    }
}

/// Per-term weights for one gait column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardWeights {
    pub linear_vel: f64,
    pub angular_vel: f64,
    pub jump_height: f64,
    pub jump_goal: f64,
    pub jump_height_roll: f64,
    pub jump_goal_roll: f64,
    pub pitch: f64,
    pub jump_forward: f64,
    pub feet_air: f64,
    pub action_rate: f64,
}

impl RewardWeights {
    pub fn for_gait(gait: Gait) -> RewardWeights {
        match gait {
            Gait::Jump => RewardWeights {
                linear_vel: 20.0,
                angular_vel: 6.66,
                jump_height: 5.0,
                jump_goal: 100.0,
                jump_height_roll: 0.0,
                jump_goal_roll: 0.0,
                pitch: 10.0,
                jump_forward: 0.0,
                feet_air: 5.0,
                action_rate: 0.0,
            },
            Gait::Backflip => RewardWeights {
                linear_vel: 20.0,
                angular_vel: 6.66,
                jump_height: 5.0,
                jump_goal: 100.0,
                jump_height_roll: 0.0,
                jump_goal_roll: 0.0,
                pitch: 50.0,
                jump_forward: 0.0,
                feet_air: 5.0,
                action_rate: -10.0,
            },
            Gait::Sideflip => RewardWeights {
                linear_vel: 20.0,
                angular_vel: 10.0,
                jump_height: 5.0,
                jump_goal: 100.0,
                jump_height_roll: 5.0,
                jump_goal_roll: 1.0,
                pitch: 0.0,
                jump_forward: -400.0,
                feet_air: 50.0,
                action_rate: -10.0,
            },
        }
    }
}

/// Weighted contribution of every term plus their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardBreakdown {
    pub linear_vel: f64,
    pub angular_vel: f64,
    pub jump_height: f64,
    pub jump_goal: f64,
    pub jump_height_roll: f64,
    pub jump_goal_roll: f64,
    pub pitch: f64,
    pub jump_forward: f64,
    pub feet_air: f64,
    pub action_rate: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub const TERM_NAMES: [&'static str; 10] = [
        "linear_vel",
        "angular_vel",
        "jump_height",
        "jump_goal",
        "jump_height_roll",
        "jump_goal_roll",
        "pitch",
        "jump_forward",
        "feet_air",
        "action_rate",
    ];

    /// Contributions in `TERM_NAMES` order.
    pub fn terms(&self) -> [f64; 10] {
        [
            self.linear_vel,
            self.angular_vel,
            self.jump_height,
            self.jump_goal,
            self.jump_height_roll,
            self.jump_goal_roll,
            self.pitch,
            self.jump_forward,
            self.feet_air,
            self.action_rate,
        ]
    }
}

pub fn total_reward(inp: &RewardInputs, gait: Gait) -> RewardBreakdown {
    let w = RewardWeights::for_gait(gait);
    let aux = auxiliary_rewards(inp);
    let linear_vel = w.linear_vel * aux.linear_vel;
    let angular_vel = w.angular_vel * aux.angular_vel;
    let jump_height = w.jump_height * jump_height_reward(inp, JumpVariant::Height);
    let jump_goal = w.jump_goal * jump_goal_reward(inp, JumpVariant::Height);
    let jump_height_roll = w.jump_height_roll * jump_height_reward(inp, JumpVariant::Roll);
    let jump_goal_roll = w.jump_goal_roll * jump_goal_reward(inp, JumpVariant::Roll);
    let pitch = w.pitch * pitch_reward(inp);
    let jump_forward = w.jump_forward * aux.jump_forward;
    let feet_air = w.feet_air * aux.feet_air;
    let action_rate = w.action_rate * aux.action_rate;
    let total = linear_vel
        + angular_vel
        + jump_height
        + jump_goal
        + jump_height_roll
        + jump_goal_roll
        + pitch
        + jump_forward
        + feet_air
        + action_rate;
    RewardBreakdown {
        linear_vel,
        angular_vel,
        jump_height,
        jump_goal,
        jump_height_roll,
        jump_goal_roll,
        pitch,
        jump_forward,
        feet_air,
        action_rate,
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use std::f64::consts::FRAC_PI_2;

    /// Walking at the target height with perfect command tracking.
    fn stance_perfect() -> RewardInputs {
        RewardInputs {
            h: 0.25,
            v: [0.8, 0.0, 0.0],
            omega_z: 0.3,
            v_cmd: [0.8, 0.0],
            omega_cmd_z: 0.3,
            h_jump: 0.5,
            h_walk: 0.25,
            t_air: [0.5; 4],
            eps_h: 0.02,
            ..Default::default()
        }
    }

    /// Every field active at once; used to compare gait columns.
    fn busy() -> RewardInputs {
        RewardInputs {
            h: 0.42,
            v: [1.3, -0.2, 0.9],
            omega_z: 0.7,
            v_cmd: [1.0, 0.1],
            omega_cmd_z: 0.4,
            h_jump: 0.45,
            h_walk: 0.25,
            jump_sig: true,
            falling: true,
            phi_pitch: -0.6,
            phi_roll: 1.1,
            yaw_jump: 0.2,
            yaw_landing: 1.5,
            t_air: [0.8, 0.7, 0.9, 0.6],
            dq_cmd: [0.05; 12],
            eps_h: 0.02,
        }
    }

    #[test]
    fn kernel_hits_pinned_values() {
        assert_eq!(phi_kernel(&[0.0]), 1.0);
        let e_inv = (-1.0f64).exp();
        assert!((phi_kernel(&[0.5]) - e_inv).abs() < 1e-12);
        assert!((phi_kernel(&[0.3, 0.4]) - e_inv).abs() < 1e-12);
    }

    #[test]
    fn kernel_stays_in_the_unit_interval() {
        let mut rng = Rng::new(9);
        for _ in 0..200 {
            let x = [rng.range(-3.0, 3.0), rng.range(-3.0, 3.0), rng.range(-3.0, 3.0)];
            let k = phi_kernel(&x);
            assert!(k > 0.0 && k <= 1.0, "kernel {k} out of range");
        }
    }

    #[test]
    fn clip_saturates_at_the_bounds() {
        assert_eq!(clip(3.0, VX_CLIP_LO, VX_CLIP_HI), 2.0);
        assert_eq!(clip(-1.0, VX_CLIP_LO, VX_CLIP_HI), -0.5);
        assert_eq!(clip(1.0, VX_CLIP_LO, VX_CLIP_HI), 1.0);
    }

    #[test]
    fn jump_height_follows_the_signal() {
        let mut inp = stance_perfect();
        inp.jump_sig = true;
        inp.h = inp.h_jump;
        inp.v[0] = 2.0;
        assert_eq!(jump_height_reward(&inp, JumpVariant::Height), 2.0);

        let walk = stance_perfect();
        assert_eq!(jump_height_reward(&walk, JumpVariant::Height), 1.0);

        let mut off = stance_perfect();
        off.jump_sig = true;
        off.h_jump = 0.5;
        off.h = 0.0;
        off.v[0] = 3.0;
        let want = (-1.0f64).exp() * 2.0;
        assert!((jump_height_reward(&off, JumpVariant::Height) - want).abs() < 1e-12);
    }

    #[test]
    fn roll_variant_needs_the_signal() {
        let mut inp = stance_perfect();
        inp.phi_roll = -0.4;
        assert_eq!(jump_height_reward(&inp, JumpVariant::Roll), 0.0);
        inp.jump_sig = true;
        inp.h = inp.h_jump;
        assert!((jump_height_reward(&inp, JumpVariant::Roll) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn goal_bonus_needs_the_signal_and_the_band() {
        let mut inp = stance_perfect();
        inp.jump_sig = true;
        inp.h = inp.h_jump;
        inp.v[0] = 1.0;
        assert_eq!(jump_goal_reward(&inp, JumpVariant::Height), 1.0);

        inp.jump_sig = false;
        assert_eq!(jump_goal_reward(&inp, JumpVariant::Height), 0.0);

        inp.jump_sig = true;
        inp.h = inp.h_jump - 0.05;
        assert_eq!(jump_goal_reward(&inp, JumpVariant::Height), 0.0);

        inp.h = inp.h_jump;
        inp.phi_roll = FRAC_PI_2;
        let got = jump_goal_reward(&inp, JumpVariant::Roll);
        assert!((got - 1.570796).abs() < 1e-6);
        assert_eq!(got, FRAC_PI_2);
    }

    #[test]
    fn pitch_reward_is_signed_and_gated() {
        let mut inp = stance_perfect();
        inp.falling = true;
        inp.phi_pitch = 0.3;
        assert_eq!(pitch_reward(&inp), 0.3);
        inp.falling = false;
        assert_eq!(pitch_reward(&inp), 0.0);
        inp.falling = true;
        inp.phi_pitch = -FRAC_PI_2;
        assert!((pitch_reward(&inp) + 1.570796).abs() < 1e-6);
    }

    #[test]
    fn tracking_terms_peak_at_perfect_commands() {
        let mut inp = stance_perfect();
        inp.yaw_jump = 0.0;
        inp.yaw_landing = FRAC_PI_2;
        let aux = auxiliary_rewards(&inp);
        assert_eq!(aux.linear_vel, 1.0);
        assert_eq!(aux.angular_vel, 1.0);
        assert_eq!(aux.feet_air, 0.0);
        assert!((aux.jump_forward - FRAC_PI_2 * FRAC_PI_2).abs() < 1e-12);
        assert!((aux.jump_forward - 2.467401).abs() < 1e-6);
    }

    #[test]
    fn yaw_error_wraps_to_the_short_way() {
        assert!((wrap_angle(3.0 * FRAC_PI_2) + FRAC_PI_2).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        let mut inp = stance_perfect();
        inp.yaw_jump = 0.1;
        inp.yaw_landing = 0.1 + TAU;
        assert!(auxiliary_rewards(&inp).jump_forward < 1e-12);
    }

    #[test]
    fn stance_walking_total_matches_hand_sum() {
        let b = total_reward(&stance_perfect(), Gait::Jump);
        assert!((b.total - 31.66).abs() < 1e-12, "total {}", b.total);
        assert!((b.linear_vel - 20.0).abs() < 1e-12);
        assert!((b.angular_vel - 6.66).abs() < 1e-12);
        assert!((b.jump_height - 5.0).abs() < 1e-12);
        assert_eq!(b.jump_goal, 0.0);
        assert_eq!(b.pitch, 0.0);
        assert_eq!(b.feet_air, 0.0);
        assert_eq!(b.action_rate, 0.0);
    }

    #[test]
    fn falling_pitch_contribution_uses_the_backflip_weight() {
        let mut inp = busy();
        inp.phi_pitch = 0.2;
        let b = total_reward(&inp, Gait::Backflip);
        assert!((b.pitch - 10.0).abs() < 1e-12, "pitch {}", b.pitch);
    }

    #[test]
    fn zero_yaw_drift_kills_the_forward_penalty() {
        let mut inp = busy();
        inp.yaw_jump = 0.7;
        inp.yaw_landing = 0.7;
        let b = total_reward(&inp, Gait::Sideflip);
        assert_eq!(b.jump_forward, 0.0);
    }

    #[test]
    fn jump_and_backflip_columns_differ_only_in_two_terms() {
        let inp = busy();
        let rj = total_reward(&inp, Gait::Jump);
        let rb = total_reward(&inp, Gait::Backflip);
        assert_eq!(rj.linear_vel, rb.linear_vel);
        assert_eq!(rj.angular_vel, rb.angular_vel);
        assert_eq!(rj.jump_height, rb.jump_height);
        assert_eq!(rj.jump_goal, rb.jump_goal);
        assert_eq!(rj.jump_height_roll, rb.jump_height_roll);
        assert_eq!(rj.jump_goal_roll, rb.jump_goal_roll);
        assert_eq!(rj.jump_forward, rb.jump_forward);
        assert_eq!(rj.feet_air, rb.feet_air);
        let expected_gap = (50.0 - 10.0) * pitch_reward(&inp)
            + (-10.0 - 0.0) * auxiliary_rewards(&inp).action_rate;
        assert!((rb.total - rj.total - expected_gap).abs() < 1e-12);
    }

    #[test]
    fn breakdown_sums_to_the_total() {
        for gait in [Gait::Jump, Gait::Backflip, Gait::Sideflip] {
            for inp in [stance_perfect(), busy()] {
                let b = total_reward(&inp, gait);
                let sum: f64 = b.terms().iter().sum();
                assert!((sum - b.total).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn weight_columns_are_pinned() {
        let rj = RewardWeights::for_gait(Gait::Jump);
        let rb = RewardWeights::for_gait(Gait::Backflip);
        let rs = RewardWeights::for_gait(Gait::Sideflip);
        assert_eq!((rj.linear_vel, rb.linear_vel, rs.linear_vel), (20.0, 20.0, 20.0));
        assert_eq!((rj.angular_vel, rb.angular_vel, rs.angular_vel), (6.66, 6.66, 10.0));
        assert_eq!((rj.jump_height, rb.jump_height, rs.jump_height), (5.0, 5.0, 5.0));
        assert_eq!((rj.jump_goal, rb.jump_goal, rs.jump_goal), (100.0, 100.0, 100.0));
        assert_eq!(
            (rj.jump_height_roll, rb.jump_height_roll, rs.jump_height_roll),
            (0.0, 0.0, 5.0)
        );
        assert_eq!((rj.jump_goal_roll, rb.jump_goal_roll, rs.jump_goal_roll), (0.0, 0.0, 1.0));
        assert_eq!((rj.pitch, rb.pitch, rs.pitch), (10.0, 50.0, 0.0));
        assert_eq!((rj.jump_forward, rb.jump_forward, rs.jump_forward), (0.0, 0.0, -400.0));
        assert_eq!((rj.feet_air, rb.feet_air, rs.feet_air), (5.0, 5.0, 50.0));
        assert_eq!((rj.action_rate, rb.action_rate, rs.action_rate), (0.0, -10.0, -10.0));
    }

    #[test]
    fn action_rate_scores_positive_under_negative_weight() {
        // Raw term -|dq|^2 times weight -10 comes out positive; the column
        // is applied exactly as published rather than silently corrected.
        let mut inp = stance_perfect();
        inp.dq_cmd = [0.1; 12];
        let b = total_reward(&inp, Gait::Backflip);
        assert!((b.action_rate - 1.2).abs() < 1e-12, "action rate {}", b.action_rate);
    }

    #[test]
    fn every_task_maps_to_a_column() {
        assert_eq!(Gait::for_task(Task::Walk), Gait::Jump);
        assert_eq!(Gait::for_task(Task::Jump), Gait::Jump);
        assert_eq!(Gait::for_task(Task::Backflip), Gait::Backflip);
        assert_eq!(Gait::for_task(Task::Sideflip), Gait::Sideflip);
    }
}
