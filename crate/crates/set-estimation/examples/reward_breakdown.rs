//! Itemizes the task rewards for two situations: steady walking scored by
//! the jump column, and a mid-backflip frame where the pitch and action
//! terms move the total.

use std::f64::consts::FRAC_PI_2;

use set_estimation::rewards::{total_reward, Gait, RewardBreakdown, RewardInputs};

fn print_breakdown(label: &str, inp: &RewardInputs, gait: Gait) {
    let b = total_reward(inp, gait);
    println!("{label} ({gait:?} column)");
    for (name, value) in RewardBreakdown::TERM_NAMES.iter().zip(b.terms()) {
        if value != 0.0 {
            println!("  {name:<13}{value:>10.3}");
        }
    }
    println!("  {:<13}{:>10.3}", "total", b.total);
}

fn main() {
    let stance = RewardInputs {
        h: 0.25,
        v: [0.8, 0.0, 0.0],
        omega_z: 0.3,
        v_cmd: [0.8, 0.0],
        omega_cmd_z: 0.3,
        h_jump: 0.5,
        h_walk: 0.25,
        t_air: [0.5; 4],
        eps_h: 0.02,
        ..RewardInputs::default()
    };
    print_breakdown("steady walking, perfect tracking", &stance, Gait::Jump);

    println!();
    let mid_flip = RewardInputs {
        h: 0.55,
        v: [0.1, 0.0, 0.2],
        v_cmd: [0.0, 0.0],
        h_jump: 0.55,
        h_walk: 0.25,
        jump_sig: true,
        falling: true,
        phi_pitch: 0.4,
        yaw_jump: FRAC_PI_2,
        yaw_landing: FRAC_PI_2,
        t_air: [0.3; 4],
        dq_cmd: [0.1; 12],
        eps_h: 0.02,
        ..RewardInputs::default()
    };
    print_breakdown("falling out of a backflip apex", &mid_flip, Gait::Backflip);
    println!();
    println!("note: the action-rate column weight is negative, so its");
    println!("negated-magnitude term contributes positively as written");
}
