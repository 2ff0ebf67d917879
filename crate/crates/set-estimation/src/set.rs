//! The transformer estimator.
//!
//! Each timestep contributes two tokens, the non-privileged observation o_t
//! and the privileged state o′_t, interleaved as (o_1, o′_1, o_2, o′_2, …).
//! Both tokens of a pair share one learned timestep embedding looked up by
//! absolute episode step. A causally masked GPT stack runs over the token
//! sequence and the privileged-state prediction for step t is read from the
//! hidden state at token o_t, so o′_t conditions on o_t and everything
//! earlier but nothing later. Windows shorter than the context length are
//! processed as-is; there are no padding tokens.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::adam::{Adam, AdamConfig};
use crate::nn::graph::{Graph, NodeId};
use crate::nn::tensor::Tensor;
use crate::rng::{mix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SetConfig {
    /// Context length in timestep pairs.
    pub h: usize,
    pub n_blocks: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub dropout: f64,
    pub max_episode_len: usize,
    pub d_o: usize,
    pub d_p: usize,
}

impl Default for SetConfig {
    fn default() -> Self {
        SetConfig {
            h: 20,
            n_blocks: 6,
            n_heads: 4,
            d_model: 128,
            dropout: 0.1,
            max_episode_len: 1000,
            d_o: 47,
            d_p: 4,
        }
    }
}

impl SetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h < 1 {
            return Err(Error::Config("context length must be at least 1".into()));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.n_blocks == 0 || self.d_o == 0 || self.d_p == 0 || self.max_episode_len == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0,1)", self.dropout)));
        }
        Ok(())
    }
}

/// Hyperparameters of one training run, shared with the MLP baseline.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub lr: f64,
    pub iters: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            iters: 5000,
            batch: 64,
            seed: 0,
        }
    }
}

/// One sampled training window: row slices plus absolute timesteps.
pub struct Window<'a> {
    pub obs: Vec<&'a [f64]>,
    pub privileged: Vec<&'a [f64]>,
    pub timesteps: Vec<usize>,
}

// Substream salts keeping init, sampling, and dropout independent.
const SALT_INIT: u64 = 1;
const SALT_SAMPLE: u64 = 2;
const SALT_DROPOUT: u64 = 3;

const PARAMS_PER_BLOCK: usize = 11;
const PARAMS_BEFORE_BLOCKS: usize = 7;

/// Parameter names and shapes in storage order. Linear layers contribute
/// name.w then name.b, layer norms name.g then name.b.
fn layout(cfg: &SetConfig) -> (Vec<String>, Vec<Vec<usize>>) {
    let d = cfg.d_model;
    let mut names = Vec::new();
    let mut shapes = Vec::new();
    let linear = |names: &mut Vec<String>, shapes: &mut Vec<Vec<usize>>,
                  name: &str, fan_in: usize, fan_out: usize| {
        names.push(format!("{name}.w"));
        shapes.push(vec![fan_in, fan_out]);
        names.push(format!("{name}.b"));
        shapes.push(vec![1, fan_out]);
    };
    let norm = |names: &mut Vec<String>, shapes: &mut Vec<Vec<usize>>, name: &str, width: usize| {
        names.push(format!("{name}.g"));
        shapes.push(vec![1, width]);
        names.push(format!("{name}.b"));
        shapes.push(vec![1, width]);
    };
    linear(&mut names, &mut shapes, "embed_o", cfg.d_o, d);
    linear(&mut names, &mut shapes, "embed_p", cfg.d_p, d);
    names.push("embed_t.table".into());
    shapes.push(vec![cfg.max_episode_len, d]);
    norm(&mut names, &mut shapes, "ln_e", d);
    for b in 0..cfg.n_blocks {
        norm(&mut names, &mut shapes, &format!("block{b}.ln1"), d);
        // The q/k/v projection carries no bias: a key bias cannot change the
        // row softmax at all, so it would be an untrainable dead parameter.
        names.push(format!("block{b}.attn.qkv.w"));
        shapes.push(vec![d, 3 * d]);
        linear(&mut names, &mut shapes, &format!("block{b}.attn.proj"), d, d);
        norm(&mut names, &mut shapes, &format!("block{b}.ln2"), d);
        linear(&mut names, &mut shapes, &format!("block{b}.mlp.fc"), d, 4 * d);
        linear(&mut names, &mut shapes, &format!("block{b}.mlp.out"), 4 * d, d);
    }
    norm(&mut names, &mut shapes, "ln_f", d);
    linear(&mut names, &mut shapes, "head", d, cfg.d_p);
    (names, shapes)
}

#[derive(Debug, Clone)]
pub struct SetModel {
    pub cfg: SetConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
}

impl SetModel {
    /// Seeded initialization: linear weights uniform within ±1/sqrt(fan_in),
    /// biases zero, the timestep table normal with sigma 0.02, layer norms
    /// at identity.
    pub fn init(cfg: SetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = Rng::substream(seed, SALT_INIT);
        let (names, shapes) = layout(&cfg);
        let params = names
            .iter()
            .zip(&shapes)
            .map(|(name, shape)| {
                let n = shape.iter().product();
                let data = if name.ends_with(".w") {
                    let lim = 1.0 / (shape[0] as f64).sqrt();
                    (0..n).map(|_| rng.range(-lim, lim)).collect()
                } else if name == "embed_t.table" {
                    (0..n).map(|_| 0.02 * rng.normal()).collect()
                } else if name.ends_with(".g") {
                    vec![1.0; n]
                } else {
                    vec![0.0; n]
                };
                Tensor::new(shape.clone(), data).expect("layout shape")
            })
            .collect();
        Ok(SetModel { cfg, names, params })
    }

    pub fn from_parts(cfg: SetConfig, names: Vec<String>, params: Vec<Tensor>) -> Result<Self> {
        cfg.validate()?;
        let (expected_names, expected_shapes) = layout(&cfg);
        if names != expected_names {
            return Err(Error::Format(format!(
                "parameter names do not match the architecture (got {}, expected {})",
                names.len(),
                expected_names.len()
            )));
        }
        for (i, (p, e)) in params.iter().zip(&expected_shapes).enumerate() {
            if p.shape() != e.as_slice() {
                return Err(Error::Dim(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    names[i],
                    p.shape(),
                    e
                )));
            }
        }
        Ok(SetModel { cfg, names, params })
    }

    pub fn cfg(&self) -> &SetConfig {
        &self.cfg
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    fn block_base(&self, b: usize) -> usize {
        PARAMS_BEFORE_BLOCKS + PARAMS_PER_BLOCK * b
    }

    /// Builds the forward graph over one window and returns the prediction
    /// node, shaped (#obs rows × D_p), one row per o token.
    ///
    /// `privileged` holds the o′ context and may have exactly as many rows
    /// as `obs` (training windows) or one fewer (prediction windows where
    /// the trailing o_t stands alone).
    pub fn forward(
        &self,
        g: &mut Graph,
        w: &Window,
        dropout_rng: Option<&mut Rng>,
    ) -> Result<NodeId> {
        let cfg = &self.cfg;
        let l = w.obs.len();
        let m = w.privileged.len();
        if l == 0 {
            return Err(Error::Contract("empty window".into()));
        }
        if l > cfg.h {
            return Err(Error::Contract(format!(
                "window has {l} pairs but the context length is {}",
                cfg.h
            )));
        }
        if m != l && m + 1 != l {
            return Err(Error::Contract(format!(
                "window has {l} observations but {m} privileged rows"
            )));
        }
        if w.timesteps.len() != l {
            return Err(Error::Contract("one timestep per observation required".into()));
        }
        if let Some(&t) = w.timesteps.iter().find(|&&t| t >= cfg.max_episode_len) {
            return Err(Error::Range(format!(
                "timestep {t} outside the learned range 0..{}",
                cfg.max_episode_len
            )));
        }
        if w.timesteps.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Contract("timesteps must be strictly increasing".into()));
        }
        if w.obs.iter().any(|r| r.len() != cfg.d_o) {
            return Err(Error::Dim(format!("observation rows must have {} entries", cfg.d_o)));
        }
        if w.privileged.iter().any(|r| r.len() != cfg.d_p) {
            return Err(Error::Dim(format!("privileged rows must have {} entries", cfg.d_p)));
        }

        let mut drop = dropout_rng;
        // Convenience for the three dropout sites.
        macro_rules! maybe_drop {
            ($g:expr, $x:expr) => {
                match drop.as_deref_mut() {
                    Some(r) => $g.dropout($x, cfg.dropout, r),
                    None => $x,
                }
            };
        }

        let flat =
            |rows: &[&[f64]], width: usize| -> Result<Tensor> {
                let mut v = Vec::with_capacity(rows.len() * width);
                for r in rows {
                    v.extend_from_slice(r);
                }
                Tensor::new(vec![rows.len(), width], v)
            };

        let w_eo = g.param(0, self.params[0].clone());
        let b_eo = g.param(1, self.params[1].clone());
        let w_ep = g.param(2, self.params[2].clone());
        let b_ep = g.param(3, self.params[3].clone());
        let table = g.param(4, self.params[4].clone());
        let ln_e_g = g.param(5, self.params[5].clone());
        let ln_e_b = g.param(6, self.params[6].clone());

        let embed_obs = |g: &mut Graph, rows: &[&[f64]], ts: &[usize]| -> Result<NodeId> {
            let x = g.input(flat(rows, cfg.d_o)?);
            let e = g.matmul(x, w_eo)?;
            let e = g.add_row_bias(e, b_eo)?;
            let te = g.gather_rows(table, ts)?;
            g.add(e, te)
        };

        // Token sequence: full pairs first, then a trailing lone o if the
        // privileged row for the last step is not available.
        let x = if m == 0 {
            embed_obs(g, &w.obs, &w.timesteps)?
        } else {
            let p_in = g.input(flat(&w.privileged, cfg.d_p)?);
            let e_p = g.matmul(p_in, w_ep)?;
            let e_p = g.add_row_bias(e_p, b_ep)?;
            let te_p = g.gather_rows(table, &w.timesteps[..m])?;
            let x_p = g.add(e_p, te_p)?;
            if m == l {
                let x_o = embed_obs(g, &w.obs, &w.timesteps)?;
                g.interleave(x_o, x_p)?
            } else {
                let x_o = embed_obs(g, &w.obs[..m], &w.timesteps[..m])?;
                let pairs = g.interleave(x_o, x_p)?;
                let tail = embed_obs(g, &w.obs[m..], &w.timesteps[m..])?;
                g.concat_rows(pairs, tail)?
            }
        };

        let x = g.layer_norm(x, ln_e_g, ln_e_b)?;
        let mut x = maybe_drop!(g, x);

        let d = cfg.d_model;
        let dh = d / cfg.n_heads;
        let alpha = 1.0 / (dh as f64).sqrt();
        for b in 0..cfg.n_blocks {
            let base = self.block_base(b);
            let p = |g: &mut Graph, off: usize| g.param(base + off, self.params[base + off].clone());
            let ln1_g = p(g, 0);
            let ln1_b = p(g, 1);
            let w_qkv = p(g, 2);
            let w_proj = p(g, 3);
            let b_proj = p(g, 4);
            let ln2_g = p(g, 5);
            let ln2_b = p(g, 6);
            let w_fc = p(g, 7);
            let b_fc = p(g, 8);
            let w_out = p(g, 9);
            let b_out = p(g, 10);

            let ln1 = g.layer_norm(x, ln1_g, ln1_b)?;
            let qkv = g.matmul(ln1, w_qkv)?;
            let mut heads = Vec::with_capacity(cfg.n_heads);
            for hd in 0..cfg.n_heads {
                let q = g.slice_cols(qkv, hd * dh, (hd + 1) * dh)?;
                let k = g.slice_cols(qkv, d + hd * dh, d + (hd + 1) * dh)?;
                let v = g.slice_cols(qkv, 2 * d + hd * dh, 2 * d + (hd + 1) * dh)?;
                let s = g.causal_scores(q, k, alpha)?;
                let pr = g.causal_softmax(s)?;
                heads.push(g.causal_mix(pr, v)?);
            }
            let cat = g.concat_cols(&heads)?;
            let proj = g.matmul(cat, w_proj)?;
            let proj = g.add_row_bias(proj, b_proj)?;
            let proj = maybe_drop!(g, proj);
            x = g.add(x, proj)?;

            let ln2 = g.layer_norm(x, ln2_g, ln2_b)?;
            let h1 = g.matmul(ln2, w_fc)?;
            let h1 = g.add_row_bias(h1, b_fc)?;
            let h1 = g.gelu(h1);
            let h2 = g.matmul(h1, w_out)?;
            let h2 = g.add_row_bias(h2, b_out)?;
            let h2 = maybe_drop!(g, h2);
            x = g.add(x, h2)?;
        }

        let base = self.block_base(cfg.n_blocks);
        let ln_f_g = g.param(base, self.params[base].clone());
        let ln_f_b = g.param(base + 1, self.params[base + 1].clone());
        let w_head = g.param(base + 2, self.params[base + 2].clone());
        let b_head = g.param(base + 3, self.params[base + 3].clone());
        let x = g.layer_norm(x, ln_f_g, ln_f_b)?;
        let out = g.matmul(x, w_head)?;
        let out = g.add_row_bias(out, b_head)?;
        // o tokens sit at the even positions.
        let evens: Vec<usize> = (0..l).map(|i| 2 * i).collect();
        g.gather_rows(out, &evens)
    }

    /// Prediction for the final observation of a history window. The
    /// privileged context must have exactly one row fewer than `obs`.
    pub fn predict_last(&self, w: &Window) -> Result<Vec<f64>> {
        if w.privileged.len() + 1 != w.obs.len() {
            return Err(Error::Contract(
                "prediction windows carry privileged context up to the previous step only".into(),
            ));
        }
        let mut g = Graph::new();
        let preds = self.forward(&mut g, w, None)?;
        let v = g.value(preds);
        Ok(v.row(v.rows() - 1).to_vec())
    }
}

/// Uniform window sampler over (trajectory, end-offset). Returns
/// (trajectory index, start, end) with end inclusive; the window covers
/// end+1-start ≤ h steps.
pub fn sample_window(rng: &mut Rng, lens: &[usize], h: usize) -> (usize, usize, usize) {
    let traj = rng.below(lens.len());
    let end = rng.below(lens[traj]);
    let start = (end + 1).saturating_sub(h);
    (traj, start, end)
}

/// Dataset view the trainers consume: per-trajectory flat row-major o and
/// o′ with their lengths. Implemented by the dataset module. Sync so batch
/// chunks can be processed on worker threads.
pub trait TrainData: Sync {
    fn n_traj(&self) -> usize;
    fn len_of(&self, traj: usize) -> usize;
    fn obs_row(&self, traj: usize, t: usize) -> &[f64];
    fn priv_row(&self, traj: usize, t: usize) -> &[f64];
}

/// Batch slice processed per worker. Fixed (not tied to thread count) so
/// gradient summation order, and therefore every trained parameter bit,
/// is identical on any machine.
pub(crate) const TRAIN_CHUNK: usize = 8;

/// Trains from scratch; returns the model and the per-iteration loss trace.
pub fn set_train(
    data: &dyn TrainData,
    cfg: SetConfig,
    tc: TrainConfig,
) -> Result<(SetModel, Vec<f64>)> {
    if data.n_traj() == 0 {
        return Err(Error::Contract("empty dataset".into()));
    }
    let lens: Vec<usize> = (0..data.n_traj()).map(|i| data.len_of(i)).collect();
    if lens.iter().any(|&l| l == 0) {
        return Err(Error::Contract("every trajectory needs at least one step".into()));
    }
    let mut model = SetModel::init(cfg, tc.seed)?;
    let sizes: Vec<usize> = model.params.iter().map(|p| p.len()).collect();
    let mut opt = Adam::new(AdamConfig::with_lr(tc.lr), &sizes);
    let mut sample_rng = Rng::substream(tc.seed, SALT_SAMPLE);
    let drop_base = mix(tc.seed ^ SALT_DROPOUT);
    let mut trace = Vec::with_capacity(tc.iters);
    let mut grads: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();

    for iter in 0..tc.iters {
        // Windows are drawn serially from one stream; gradient work is
        // farmed out per chunk and recombined in chunk order below.
        let samples: Vec<(usize, usize, usize)> = (0..tc.batch)
            .map(|_| sample_window(&mut sample_rng, &lens, model.cfg.h))
            .collect();
        let chunks = samples
            .par_chunks(TRAIN_CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut part: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
                let mut loss_sum = 0.0;
                for (j, &(traj, start, end)) in chunk.iter().enumerate() {
                    let b = ci * TRAIN_CHUNK + j;
                    let obs: Vec<&[f64]> =
                        (start..=end).map(|t| data.obs_row(traj, t)).collect();
                    let privileged: Vec<&[f64]> =
                        (start..=end).map(|t| data.priv_row(traj, t)).collect();
                    let timesteps: Vec<usize> = (start..=end).collect();
                    let mut target_flat = Vec::with_capacity(privileged.len() * model.cfg.d_p);
                    for r in &privileged {
                        target_flat.extend_from_slice(r);
                    }
                    let w = Window {
                        obs,
                        privileged,
                        timesteps,
                    };
                    let mut drop_rng = Rng::substream(drop_base, (iter * tc.batch + b) as u64);
                    let mut g = Graph::new();
                    let preds = model.forward(&mut g, &w, Some(&mut drop_rng))?;
                    let target =
                        g.input(Tensor::new(vec![w.obs.len(), model.cfg.d_p], target_flat)?);
                    let diff = g.sub(preds, target)?;
                    let loss = g.mean_sq(diff);
                    let lv = g.value(loss).data()[0];
                    if !lv.is_finite() {
                        return Err(Error::Train(format!("non-finite loss at iteration {iter}")));
                    }
                    loss_sum += lv;
                    g.backward(loss)?;
                    for (slot, gbuf) in part.iter_mut().enumerate() {
                        if let Some(pg) = g.param_grad(slot) {
                            for (d, s) in gbuf.iter_mut().zip(pg) {
                                *d += s;
                            }
                        }
                    }
                }
                Ok((loss_sum, part))
            })
            .collect::<Result<Vec<(f64, Vec<Vec<f64>>)>>>()?;
        for gbuf in &mut grads {
            gbuf.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut loss_sum = 0.0;
        for (chunk_loss, part) in &chunks {
            loss_sum += chunk_loss;
            for (gbuf, p) in grads.iter_mut().zip(part) {
                for (d, s) in gbuf.iter_mut().zip(p) {
                    *d += s;
                }
            }
        }
        let inv = 1.0 / tc.batch as f64;
        for gbuf in &mut grads {
            gbuf.iter_mut().for_each(|v| *v *= inv);
        }
        opt.step(&mut model.params, &model.names, &grads)?;
        trace.push(loss_sum * inv);
    }
    Ok((model, trace))
}
