//! Feedforward baseline estimator.
//!
//! The most recent H_mlp observations are stacked into one flat input,
//! zero-padded at the front when the episode is younger than the window.
//! Unlike the transformer it never sees privileged states as inputs and is
//! trained on the final window position only.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::adam::{Adam, AdamConfig};
use crate::nn::graph::{Graph, NodeId};
use crate::nn::tensor::Tensor;
use crate::rng::Rng;
use crate::set::{sample_window, TrainConfig, TrainData, TRAIN_CHUNK};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// Observation window length.
    pub h_mlp: usize,
    /// Number of hidden layers.
    pub layers: usize,
    pub width: usize,
    pub d_o: usize,
    pub d_p: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            h_mlp: 5,
            layers: 3,
            width: 256,
            d_o: 47,
            d_p: 4,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h_mlp < 1 || self.layers < 1 {
            return Err(Error::Config("window and depth must be at least 1".into()));
        }
        if self.width == 0 || self.d_o == 0 || self.d_p == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }
}

const SALT_INIT: u64 = 1;
const SALT_SAMPLE: u64 = 2;

fn layout(cfg: &MlpConfig) -> (Vec<String>, Vec<Vec<usize>>) {
    let mut names = Vec::new();
    let mut shapes = Vec::new();
    let mut fan_in = cfg.h_mlp * cfg.d_o;
    for i in 0..cfg.layers {
        names.push(format!("layer{i}.w"));
        shapes.push(vec![fan_in, cfg.width]);
        names.push(format!("layer{i}.b"));
        shapes.push(vec![1, cfg.width]);
        fan_in = cfg.width;
    }
    names.push("head.w".into());
    shapes.push(vec![fan_in, cfg.d_p]);
    names.push("head.b".into());
    shapes.push(vec![1, cfg.d_p]);
    (names, shapes)
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    pub cfg: MlpConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
}

impl MlpModel {
    /// Same init family as the transformer: weights uniform within
    /// ±1/sqrt(fan_in), biases zero.
    pub fn init(cfg: MlpConfig, seed: u64) -> Result<Self> {
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
                } else {
                    vec![0.0; n]
                };
                Tensor::new(shape.clone(), data).expect("layout shape")
            })
            .collect();
        Ok(MlpModel { cfg, names, params })
    }

    pub fn from_parts(cfg: MlpConfig, names: Vec<String>, params: Vec<Tensor>) -> Result<Self> {
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
        Ok(MlpModel { cfg, names, params })
    }

    pub fn cfg(&self) -> &MlpConfig {
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

    /// Flattens the most recent h_mlp observations, zero-padding the front.
    pub fn stack(&self, history: &[&[f64]]) -> Result<Tensor> {
        if history.is_empty() {
            return Err(Error::Contract("at least one observation required".into()));
        }
        if history.iter().any(|r| r.len() != self.cfg.d_o) {
            return Err(Error::Dim(format!(
                "observation rows must have {} entries",
                self.cfg.d_o
            )));
        }
        let h = self.cfg.h_mlp;
        let take = history.len().min(h);
        let mut flat = vec![0.0; h * self.cfg.d_o];
        let mut at = (h - take) * self.cfg.d_o;
        for row in &history[history.len() - take..] {
            flat[at..at + self.cfg.d_o].copy_from_slice(row);
            at += self.cfg.d_o;
        }
        Tensor::new(vec![1, h * self.cfg.d_o], flat)
    }

    /// Builds the forward graph for one stacked input row.
    pub fn forward(&self, g: &mut Graph, stacked: Tensor) -> Result<NodeId> {
        if stacked.shape() != [1, self.cfg.h_mlp * self.cfg.d_o] {
            return Err(Error::Dim(format!(
                "stacked input must be 1x{}",
                self.cfg.h_mlp * self.cfg.d_o
            )));
        }
        let mut x = g.input(stacked);
        for i in 0..self.cfg.layers {
            let w = g.param(2 * i, self.params[2 * i].clone());
            let b = g.param(2 * i + 1, self.params[2 * i + 1].clone());
            let y = g.matmul(x, w)?;
            let y = g.add_row_bias(y, b)?;
            x = g.gelu(y);
        }
        let base = 2 * self.cfg.layers;
        let w = g.param(base, self.params[base].clone());
        let b = g.param(base + 1, self.params[base + 1].clone());
        let y = g.matmul(x, w)?;
        g.add_row_bias(y, b)
    }

    /// Estimate for the most recent observation in `history`.
    pub fn predict(&self, history: &[&[f64]]) -> Result<Vec<f64>> {
        let stacked = self.stack(history)?;
        let mut g = Graph::new();
        let out = self.forward(&mut g, stacked)?;
        Ok(g.value(out).data().to_vec())
    }
}

/// Trains the baseline with the same window sampler as the transformer but
/// a loss on the final window position only.
pub fn mlp_train(
    data: &dyn TrainData,
    cfg: MlpConfig,
    tc: TrainConfig,
) -> Result<(MlpModel, Vec<f64>)> {
    if data.n_traj() == 0 {
        return Err(Error::Contract("empty dataset".into()));
    }
    let lens: Vec<usize> = (0..data.n_traj()).map(|i| data.len_of(i)).collect();
    if lens.iter().any(|&l| l == 0) {
        return Err(Error::Contract("every trajectory needs at least one step".into()));
    }
    let mut model = MlpModel::init(cfg, tc.seed)?;
    let sizes: Vec<usize> = model.params.iter().map(|p| p.len()).collect();
    let mut opt = Adam::new(AdamConfig::with_lr(tc.lr), &sizes);
    let mut sample_rng = Rng::substream(tc.seed, SALT_SAMPLE);
    let mut trace = Vec::with_capacity(tc.iters);
    let mut grads: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();

    for iter in 0..tc.iters {
        // Same chunked batch scheme as the transformer trainer: serial
        // window draws, fixed-size chunks in parallel, in-order recombine.
        let samples: Vec<(usize, usize, usize)> = (0..tc.batch)
            .map(|_| sample_window(&mut sample_rng, &lens, model.cfg.h_mlp))
            .collect();
        let chunks = samples
            .par_chunks(TRAIN_CHUNK)
            .map(|chunk| {
                let mut part: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
                let mut loss_sum = 0.0;
                for &(traj, start, end) in chunk {
                    let history: Vec<&[f64]> =
                        (start..=end).map(|t| data.obs_row(traj, t)).collect();
                    let stacked = model.stack(&history)?;
                    let mut g = Graph::new();
                    let out = model.forward(&mut g, stacked)?;
                    let target = g.input(Tensor::new(
                        vec![1, model.cfg.d_p],
                        data.priv_row(traj, end).to_vec(),
                    )?);
                    let diff = g.sub(out, target)?;
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

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> MlpConfig {
        MlpConfig {
            h_mlp: 3,
            layers: 2,
            width: 16,
            d_o: 5,
            d_p: 3,
        }
    }

    fn rand_rows(rng: &mut Rng, n: usize, w: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..w).map(|_| rng.range(-1.0, 1.0)).collect())
            .collect()
    }

    #[test]
    fn zero_weights_predict_head_bias() {
        let mut model = MlpModel::init(tiny_cfg(), 0).unwrap();
        let n = model.params.len();
        for p in model.params_mut().iter_mut().take(n - 1) {
            for v in p.data_mut() {
                *v = 0.0;
            }
        }
        let bias = vec![0.4, -0.9, 2.5];
        model.params_mut()[n - 1] = Tensor::new(vec![1, 3], bias.clone()).unwrap();
        let mut rng = Rng::new(1);
        let rows = rand_rows(&mut rng, 2, 5);
        let history: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let out = model.predict(&history).unwrap();
        for (a, b) in out.iter().zip(&bias) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn observations_outside_the_window_are_ignored() {
        let model = MlpModel::init(tiny_cfg(), 2).unwrap();
        let mut rng = Rng::new(3);
        let rows = rand_rows(&mut rng, 6, 5);
        let full: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let tail: Vec<&[f64]> = rows[3..].iter().map(|r| r.as_slice()).collect();
        assert_eq!(model.predict(&full).unwrap(), model.predict(&tail).unwrap());
    }

    #[test]
    fn short_history_matches_explicit_zero_padding() {
        let model = MlpModel::init(tiny_cfg(), 4).unwrap();
        let mut rng = Rng::new(5);
        let rows = rand_rows(&mut rng, 2, 5);
        let history: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let stacked = model.stack(&history).unwrap();
        let mut expect = vec![0.0; 5];
        expect.extend_from_slice(&rows[0]);
        expect.extend_from_slice(&rows[1]);
        assert_eq!(stacked.data(), expect.as_slice());
    }

    #[test]
    fn empty_history_is_contract_error() {
        let model = MlpModel::init(tiny_cfg(), 0).unwrap();
        assert!(matches!(model.predict(&[]), Err(Error::Contract(_))));
    }

    struct Constant {
        value: Vec<f64>,
        obs: Vec<Vec<f64>>,
    }

    impl TrainData for Constant {
        fn n_traj(&self) -> usize {
            4
        }
        fn len_of(&self, _: usize) -> usize {
            self.obs.len()
        }
        fn obs_row(&self, _: usize, t: usize) -> &[f64] {
            &self.obs[t]
        }
        fn priv_row(&self, _: usize, _: usize) -> &[f64] {
            &self.value
        }
    }

    #[test]
    fn overfits_a_constant_target() {
        let mut rng = Rng::new(11);
        let data = Constant {
            value: vec![-0.3, 0.8, 0.1],
            obs: rand_rows(&mut rng, 8, 5),
        };
        let tc = TrainConfig {
            lr: 1e-2,
            iters: 500,
            batch: 8,
            seed: 0,
        };
        let (model, trace) = mlp_train(&data, tiny_cfg(), tc).unwrap();
        assert!(trace[trace.len() - 1] < trace[0]);
        let history: Vec<&[f64]> = data.obs[..3].iter().map(|r| r.as_slice()).collect();
        let out = model.predict(&history).unwrap();
        for (a, b) in out.iter().zip(&data.value) {
            assert!((a - b).abs() < 1e-3, "{out:?}");
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let mut rng = Rng::new(13);
        let data = Constant {
            value: vec![0.5, 0.5, 0.5],
            obs: rand_rows(&mut rng, 8, 5),
        };
        let tc = TrainConfig {
            lr: 0.0,
            iters: 5,
            batch: 2,
            seed: 9,
        };
        let (trained, _) = mlp_train(&data, tiny_cfg(), tc).unwrap();
        let fresh = MlpModel::init(tiny_cfg(), 9).unwrap();
        for (a, b) in trained.params().iter().zip(fresh.params()) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn same_seed_reproduces_parameters_bit_exactly() {
        let mut rng = Rng::new(17);
        let data = Constant {
            value: vec![0.2, -0.4, 0.9],
            obs: rand_rows(&mut rng, 10, 5),
        };
        let tc = TrainConfig {
            lr: 1e-3,
            iters: 25,
            batch: 4,
            seed: 5,
        };
        let (m1, t1) = mlp_train(&data, tiny_cfg(), tc).unwrap();
        let (m2, t2) = mlp_train(&data, tiny_cfg(), tc).unwrap();
        assert_eq!(t1, t2);
        for (a, b) in m1.params().iter().zip(m2.params()) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = MlpModel::init(tiny_cfg(), 0).unwrap();
        let mut rng = Rng::new(19);
        let rows = rand_rows(&mut rng, 3, 5);
        let history: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let stacked = model.stack(&history).unwrap();
        let target = Tensor::new(vec![1, 3], vec![0.3, -0.6, 1.2]).unwrap();
        let mut build = |g: &mut Graph, p: &[Tensor]| {
            let m = MlpModel::from_parts(model.cfg.clone(), model.names().to_vec(), p.to_vec())?;
            let out = m.forward(g, stacked.clone())?;
            let tgt = g.input(target.clone());
            let diff = g.sub(out, tgt)?;
            Ok(g.mean_sq(diff))
        };
        let err = crate::nn::grad_check(&mut build, model.params(), 1e-5).unwrap();
        assert!(err < 1e-4, "err {err}");
    }
}
