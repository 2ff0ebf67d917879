//! Plain-text run configuration: `key=value` lines, one per tunable
//! default. Every key has a default, so an empty file is a valid config
//! and a file stating every key is self-documenting. Unknown or duplicate
//! keys are rejected rather than silently ignored.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mlp::MlpConfig;
use crate::reset::ResetConfig;
use crate::set::{SetConfig, TrainConfig};
use crate::trajgen::GenParams;

/// Everything a run can tune, grouped by the component that consumes it.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub set: SetConfig,
    pub mlp: MlpConfig,
    pub train: TrainConfig,
    pub gen: GenParams,
    /// Trajectories in a generated training set.
    pub n_traj: usize,
    /// Reset-trigger cosine threshold.
    pub eps_r: f64,
    /// Held-out trajectories per evaluation.
    pub trials: usize,
    /// Seeds for paired ablation runs.
    pub ablation_seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            set: SetConfig::default(),
            mlp: MlpConfig::default(),
            train: TrainConfig::default(),
            gen: GenParams::default(),
            n_traj: 2000,
            eps_r: 0.0,
            trials: 128,
            ablation_seeds: vec![0, 1, 2],
        }
    }
}

fn p_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("key {key}: expected an integer, got {v:?}")))
}

fn p_u64(key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| Error::Config(format!("key {key}: expected an integer, got {v:?}")))
}

fn p_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::Config(format!("key {key}: expected a number, got {v:?}")))
}

fn p_seeds(key: &str, v: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = v
        .split(',')
        .map(|s| p_u64(key, s.trim()))
        .collect::<Result<_>>()?;
    if seeds.is_empty() {
        return Err(Error::Config(format!("key {key}: needs at least one seed")));
    }
    Ok(seeds)
}

impl RunConfig {
    /// Parses `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut rc = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got {line:?}", ln + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("duplicate key {key:?}")));
            }
            rc.apply(key, value)?;
        }
        rc.validate()?;
        Ok(rc)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "h" => self.set.h = p_usize(key, v)?,
            "n_blocks" => self.set.n_blocks = p_usize(key, v)?,
            "n_heads" => self.set.n_heads = p_usize(key, v)?,
            "d_model" => self.set.d_model = p_usize(key, v)?,
            "dropout" => self.set.dropout = p_f64(key, v)?,
            "max_episode_len" => self.set.max_episode_len = p_usize(key, v)?,
            "h_mlp" => self.mlp.h_mlp = p_usize(key, v)?,
            "mlp_layers" => self.mlp.layers = p_usize(key, v)?,
            "mlp_width" => self.mlp.width = p_usize(key, v)?,
            "lr" => self.train.lr = p_f64(key, v)?,
            "iters" => self.train.iters = p_usize(key, v)?,
            "batch" => self.train.batch = p_usize(key, v)?,
            "seed" => self.train.seed = p_u64(key, v)?,
            "n_traj" => self.n_traj = p_usize(key, v)?,
            "ablation_seeds" => self.ablation_seeds = p_seeds(key, v)?,
            "dt" => self.gen.dt = p_f64(key, v)?,
            "steps" => self.gen.steps = p_usize(key, v)?,
            "g" => self.gen.g = p_f64(key, v)?,
            "h_walk" => self.gen.h_walk = p_f64(key, v)?,
            "tau_v" => self.gen.tau_v = p_f64(key, v)?,
            "f0" => self.gen.f0 = p_f64(key, v)?,
            "f_per_v" => self.gen.f_per_v = p_f64(key, v)?,
            "f_lat_per_v" => self.gen.f_lat_per_v = p_f64(key, v)?,
            "eps_h" => self.gen.eps_h = p_f64(key, v)?,
            "sigma_omega" => self.gen.sigma_omega = p_f64(key, v)?,
            "sigma_phi" => self.gen.sigma_phi = p_f64(key, v)?,
            "sigma_q" => self.gen.sigma_q = p_f64(key, v)?,
            "sigma_qd" => self.gen.sigma_qd = p_f64(key, v)?,
            "sigma_p" => self.gen.sigma_p = p_f64(key, v)?,
            "sigma_cmd" => self.gen.sigma_cmd = p_f64(key, v)?,
            "h_jump_min" => self.gen.h_jump_min = p_f64(key, v)?,
            "h_jump_max" => self.gen.h_jump_max = p_f64(key, v)?,
            "eps_r" => self.eps_r = p_f64(key, v)?,
            "trials" => self.trials = p_usize(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Cross-field checks, run once after all keys are applied.
    pub fn validate(&self) -> Result<()> {
        self.set.validate()?;
        self.mlp.validate()?;
        self.gen.validate()?;
        if !(-1.0..=1.0).contains(&self.eps_r) {
            return Err(Error::Config(format!(
                "eps_r must lie in [-1, 1], got {}",
                self.eps_r
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_traj == 0 {
            return Err(Error::Config("n_traj must be at least 1".into()));
        }
        Ok(())
    }

    /// Emits every key with its current value, parseable by `parse`.
    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.ablation_seeds.iter().map(|s| s.to_string()).collect();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("h", self.set.h.to_string());
        kv("n_blocks", self.set.n_blocks.to_string());
        kv("n_heads", self.set.n_heads.to_string());
        kv("d_model", self.set.d_model.to_string());
        kv("dropout", self.set.dropout.to_string());
        kv("max_episode_len", self.set.max_episode_len.to_string());
        kv("h_mlp", self.mlp.h_mlp.to_string());
        kv("mlp_layers", self.mlp.layers.to_string());
        kv("mlp_width", self.mlp.width.to_string());
        kv("lr", self.train.lr.to_string());
        kv("iters", self.train.iters.to_string());
        kv("batch", self.train.batch.to_string());
        kv("seed", self.train.seed.to_string());
        kv("n_traj", self.n_traj.to_string());
        kv("ablation_seeds", seeds.join(","));
        kv("dt", self.gen.dt.to_string());
        kv("steps", self.gen.steps.to_string());
        kv("g", self.gen.g.to_string());
        kv("h_walk", self.gen.h_walk.to_string());
        kv("tau_v", self.gen.tau_v.to_string());
        kv("f0", self.gen.f0.to_string());
        kv("f_per_v", self.gen.f_per_v.to_string());
        kv("f_lat_per_v", self.gen.f_lat_per_v.to_string());
        kv("eps_h", self.gen.eps_h.to_string());
        kv("sigma_omega", self.gen.sigma_omega.to_string());
        kv("sigma_phi", self.gen.sigma_phi.to_string());
        kv("sigma_q", self.gen.sigma_q.to_string());
        kv("sigma_qd", self.gen.sigma_qd.to_string());
        kv("sigma_p", self.gen.sigma_p.to_string());
        kv("sigma_cmd", self.gen.sigma_cmd.to_string());
        kv("h_jump_min", self.gen.h_jump_min.to_string());
        kv("h_jump_max", self.gen.h_jump_max.to_string());
        kv("eps_r", self.eps_r.to_string());
        kv("trials", self.trials.to_string());
        out
    }

    pub fn reset_config(&self) -> ResetConfig {
        let mut c = ResetConfig::new(self.gen.h_walk);
        c.eps_r = self.eps_r;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn empty_text_gives_the_defaults() {
        let rc = RunConfig::parse("").unwrap();
        assert_eq!(rc.set.h, 20);
        assert_eq!(rc.set.d_model, 128);
        assert_eq!(rc.mlp.h_mlp, 5);
        assert_eq!(rc.train.iters, 5000);
        assert_eq!(rc.gen.steps, 400);
        assert_eq!(rc.eps_r, 0.0);
        assert_eq!(rc.n_traj, 2000);
        assert_eq!(rc.trials, 128);
        assert_eq!(rc.ablation_seeds, vec![0, 1, 2]);
    }

    #[test]
    fn defaults_round_trip_through_text() {
        let text = RunConfig::default().to_text();
        let reparsed = RunConfig::parse(&text).unwrap();
        assert_eq!(reparsed.to_text(), text);
    }

    #[test]
    fn every_tunable_appears_in_the_text() {
        let text = RunConfig::default().to_text();
        assert_eq!(text.lines().count(), 34);
        for key in ["h=20", "n_blocks=6", "lr=0.0001", "iters=5000", "batch=64",
                    "sigma_omega=0.05", "h_jump_max=0.7", "eps_r=0", "trials=128",
                    "n_traj=2000", "ablation_seeds=0,1,2"] {
            assert!(text.lines().any(|l| l == key), "missing line {key:?}");
        }
    }

    #[test]
    fn values_override_defaults() {
        let rc = RunConfig::parse("h=8\nlr=0.001\nsteps=100\nmlp_width=32\n").unwrap();
        assert_eq!(rc.set.h, 8);
        assert_eq!(rc.train.lr, 1e-3);
        assert_eq!(rc.gen.steps, 100);
        assert_eq!(rc.mlp.width, 32);
        assert_eq!(rc.set.n_blocks, 6, "untouched keys keep their defaults");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("warmup=10\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("warmup"));
    }

    #[test]
    fn garbage_values_name_the_key() {
        let err = RunConfig::parse("iters=soon\n").unwrap_err();
        assert!(err.to_string().contains("iters"));
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = RunConfig::parse("h=4\nh=5\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn lines_without_equals_report_their_number() {
        let err = RunConfig::parse("h=4\nnonsense\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let rc = RunConfig::parse("# training\n\n  iters=7\n").unwrap();
        assert_eq!(rc.train.iters, 7);
    }

    #[test]
    fn seed_lists_parse_with_spaces() {
        let rc = RunConfig::parse("ablation_seeds=3, 4,5\n").unwrap();
        assert_eq!(rc.ablation_seeds, vec![3, 4, 5]);
        assert!(RunConfig::parse("ablation_seeds=3,x\n").is_err());
    }

    #[test]
    fn cross_field_validation_runs_after_parsing() {
        assert!(RunConfig::parse("d_model=10\n").is_err(), "heads must divide width");
        assert!(RunConfig::parse("eps_r=1.5\n").is_err());
        assert!(RunConfig::parse("trials=0\n").is_err());
    }

    #[test]
    fn reset_config_picks_up_both_knobs() {
        let rc = RunConfig::parse("eps_r=-0.5\nh_walk=0.3\n").unwrap();
        let c = rc.reset_config();
        assert_eq!(c.eps_r, -0.5);
        assert_eq!(c.h_walk, 0.3);
        assert_eq!(c.g, [0.0, 0.0, -1.0]);
    }

    #[test]
    fn files_parse_like_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "h=6\nd_model=48").unwrap();
        let rc = RunConfig::from_file(&path).unwrap();
        assert_eq!(rc.set.h, 6);
        assert_eq!(rc.set.d_model, 48);
        assert!(RunConfig::from_file(&dir.path().join("absent.cfg")).is_err());
    }
}
