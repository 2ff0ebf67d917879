//! Drives the full command-line pipeline in process: generate, train,
//! evaluate, plot. The same subcommands are available from the installed
//! binary; exit codes are 0 success, 1 usage, 2 data.

use set_estimation::cli::cli_dispatch;

fn run(args: &[&str]) {
    let mut full = vec!["set-estimation"];
    full.extend_from_slice(args);
    println!("$ set-estimation {}", args.join(" "));
    let code = cli_dispatch(full);
    assert_eq!(code, 0, "exit {code}");
    println!();
}

fn main() -> set_estimation::Result<()> {
    let dir = std::env::temp_dir().join("set-estimation-example-cli");
    std::fs::create_dir_all(&dir)?;
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();

    // Toy sizes so the whole tour takes seconds.
    std::fs::write(
        dir.join("run.cfg"),
        "steps=60\nh=6\nn_blocks=1\nn_heads=2\nd_model=32\nmax_episode_len=100\n\
         iters=40\nbatch=8\nlr=0.0003\ntrials=3\n",
    )?;
    let cfg = p("run.cfg");

    run(&["gen", "--task", "all", "--n", "8", "--seed", "0", "--out", &p("mix.dat"),
          "--config", &cfg]);
    run(&["train", "--model", "set", "--data", &p("mix.dat"), "--config", &cfg,
          "--out", &p("set.ckpt"), "--loss-out", &p("loss.csv")]);
    run(&["eval", "--ckpt", &p("set.ckpt"), "--data", &p("mix.dat"),
          "--mode", "teacher-forced", "--report", &p("report.csv"), "--config", &cfg]);
    run(&["reset-check", "--ckpt", &p("set.ckpt"), "--data", &p("mix.dat"),
          "--out", &p("monitor.csv"), "--config", &cfg]);
    run(&["plot", "--in", &p("loss.csv"), "--kind", "loss-curve", "--out", &p("loss.svg")]);

    println!("artifacts left in {}", dir.display());
    Ok(())
}
