//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Each builder method validates shapes, runs the forward computation
//! eagerly, and records what backward needs (inputs, plus per-op cached
//! intermediates). Nodes are appended in construction order, so the node
//! list is already a topological order and backward is a single reverse
//! sweep.
//!
//! The attention-specific kernels ([`Graph::causal_scores`],
//! [`Graph::causal_softmax`], [`Graph::causal_mix`]) never read row j of
//! their key/value inputs when computing output row i < j. Causality of a
//! model built from them is therefore exact at the bit level, not an
//! approximation that relies on multiplying by zero.

use crate::error::{Error, Result};
use crate::nn::tensor::{gemm, Tensor};
use crate::rng::Rng;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;
pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    /// A · B, or A · Bᵀ when `nt`.
    Matmul { nt: bool },
    Add,
    Sub,
    /// Matrix plus a broadcast row vector.
    AddRowBias,
    /// Rows of A and B alternated: a₀, b₀, a₁, b₁, …
    Interleave,
    /// Rows of A followed by rows of B.
    ConcatRows,
    /// Row lookup into a table (embedding fetch).
    GatherRows { idx: Vec<usize> },
    SliceCols { from: usize, to: usize },
    ConcatCols { widths: Vec<usize> },
    Scale { k: f64 },
    Gelu { t: Vec<f64> },
    /// alpha · Q·Kᵀ on the lower triangle; upper entries are left zero.
    CausalScores { alpha: f64 },
    /// Row-wise softmax over columns j ≤ i only.
    CausalSoftmax,
    /// tril(P) · V; output row i reads only rows j ≤ i of V.
    CausalMix,
    /// Full row-wise softmax.
    SoftmaxRows,
    /// Inputs: x, gain, bias. Caches normalized x and 1/std per row.
    LayerNorm { xhat: Vec<f64>, inv_std: Vec<f64> },
    /// Mask entries are 0 or 1/keep-probability.
    Dropout { mask: Vec<f64> },
    /// Scalar mean of squared entries.
    MeanSq,
    SumAll,
}

struct Node {
    op: Op,
    ins: Vec<NodeId>,
    val: Tensor,
    grad: Vec<f64>,
    /// Parameter slot this leaf is bound to, if any.
    param: Option<usize>,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].val
    }

    pub fn grad(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].grad
    }

    /// Gradient of the parameter bound to slot `slot`, if that parameter
    /// was bound in this graph. Zero-filled if it never reached the loss.
    pub fn param_grad(&self, slot: usize) -> Option<&[f64]> {
        self.nodes
            .iter()
            .find(|n| n.param == Some(slot))
            .map(|n| n.grad.as_slice())
    }

    fn push(&mut self, op: Op, ins: Vec<NodeId>, val: Tensor, param: Option<usize>) -> NodeId {
        let n = val.len();
        self.nodes.push(Node {
            op,
            ins,
            val,
            grad: vec![0.0; n],
            param,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Leaf, vec![], t, None)
    }

    /// Bind a parameter tensor under a caller-chosen slot number so its
    /// gradient can be collected after backward.
    pub fn param(&mut self, slot: usize, t: Tensor) -> NodeId {
        self.push(Op::Leaf, vec![], t, Some(slot))
    }

    fn shape_err(&self, op: &'static str, a: NodeId, b: NodeId) -> Error {
        Error::Shape {
            op,
            lhs: self.nodes[a.0].val.shape().to_vec(),
            rhs: self.nodes[b.0].val.shape().to_vec(),
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a.0].val, &self.nodes[b.0].val);
        if av.cols() != bv.rows() {
            return Err(self.shape_err("matmul", a, b));
        }
        let (m, n) = (av.rows(), bv.cols());
        let mut out = vec![0.0; m * n];
        gemm(1.0, av, false, bv, false, 0.0, &mut out);
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(Op::Matmul { nt: false }, vec![a, b], t, None))
    }

    /// A · Bᵀ.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a.0].val, &self.nodes[b.0].val);
        if av.cols() != bv.cols() {
            return Err(self.shape_err("matmul-nt", a, b));
        }
        let (m, n) = (av.rows(), bv.rows());
        let mut out = vec![0.0; m * n];
        gemm(1.0, av, false, bv, true, 0.0, &mut out);
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(Op::Matmul { nt: true }, vec![a, b], t, None))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a.0].val, &self.nodes[b.0].val);
        if av.shape() != bv.shape() {
            return Err(self.shape_err("add", a, b));
        }
        let out: Vec<f64> = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(av.shape().to_vec(), out)?;
        Ok(self.push(Op::Add, vec![a, b], t, None))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a.0].val, &self.nodes[b.0].val);
        if av.shape() != bv.shape() {
            return Err(self.shape_err("sub", a, b));
        }
        let out: Vec<f64> = av.data().iter().zip(bv.data()).map(|(x, y)| x - y).collect();
        let t = Tensor::new(av.shape().to_vec(), out)?;
        Ok(self.push(Op::Sub, vec![a, b], t, None))
    }

    pub fn add_row_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (xv, bv) = (&self.nodes[x.0].val, &self.nodes[bias.0].val);
        if bv.rows() != 1 || xv.cols() != bv.cols() {
            return Err(self.shape_err("add-row-bias", x, bias));
        }
        let (r, c) = (xv.rows(), xv.cols());
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for (j, b) in bv.data().iter().enumerate() {
                out.push(xv.data()[i * c + j] + b);
            }
        }
        let t = Tensor::new(vec![r, c], out)?;
        Ok(self.push(Op::AddRowBias, vec![x, bias], t, None))
    }

    pub fn interleave(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a.0].val, &self.nodes[b.0].val);
        if av.shape() != bv.shape() || av.shape().len() != 2 {
            return Err(self.shape_err("interleave", a, b));
        }
        let (r, c) = (av.rows(), av.cols());
        let mut out = Vec::with_capacity(2 * r * c);
        for i in 0..r {
            out.extend_from_slice(av.row(i));
            out.extend_from_slice(bv.row(i));
        }
        let t = Tensor::new(vec![2 * r, c], out)?;
        Ok(self.push(Op::Interleave, vec![a, b], t, None))
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.nodes[a.0].val, &self.nodes[b.0].val);
        if av.cols() != bv.cols() {
            return Err(self.shape_err("concat-rows", a, b));
        }
        let c = av.cols();
        let rows = av.rows() + bv.rows();
        let mut out = Vec::with_capacity(rows * c);
        out.extend_from_slice(av.data());
        out.extend_from_slice(bv.data());
        let t = Tensor::new(vec![rows, c], out)?;
        Ok(self.push(Op::ConcatRows, vec![a, b], t, None))
    }

    pub fn gather_rows(&mut self, table: NodeId, idx: &[usize]) -> Result<NodeId> {
        let tv = &self.nodes[table.0].val;
        let (n, c) = (tv.rows(), tv.cols());
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Range(format!(
                "row index {bad} out of range for table with {n} rows"
            )));
        }
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            out.extend_from_slice(tv.row(i));
        }
        let t = Tensor::new(vec![idx.len(), c], out)?;
        Ok(self.push(Op::GatherRows { idx: idx.to_vec() }, vec![table], t, None))
    }

    pub fn slice_cols(&mut self, x: NodeId, from: usize, to: usize) -> Result<NodeId> {
        let xv = &self.nodes[x.0].val;
        let (r, c) = (xv.rows(), xv.cols());
        if from >= to || to > c {
            return Err(Error::Shape {
                op: "slice-cols",
                lhs: xv.shape().to_vec(),
                rhs: vec![from, to],
            });
        }
        let w = to - from;
        let mut out = Vec::with_capacity(r * w);
        for i in 0..r {
            out.extend_from_slice(&xv.row(i)[from..to]);
        }
        let t = Tensor::new(vec![r, w], out)?;
        Ok(self.push(Op::SliceCols { from, to }, vec![x], t, None))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Contract("concat-cols needs at least one input".into()));
        }
        let r = self.nodes[parts[0].0].val.rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let pv = &self.nodes[p.0].val;
            if pv.rows() != r {
                return Err(self.shape_err("concat-cols", parts[0], p));
            }
            widths.push(pv.cols());
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(r * total);
        for i in 0..r {
            for &p in parts {
                out.extend_from_slice(self.nodes[p.0].val.row(i));
            }
        }
        let t = Tensor::new(vec![r, total], out)?;
        Ok(self.push(Op::ConcatCols { widths }, parts.to_vec(), t, None))
    }

    pub fn scale(&mut self, x: NodeId, k: f64) -> NodeId {
        let xv = &self.nodes[x.0].val;
        let out: Vec<f64> = xv.data().iter().map(|v| v * k).collect();
        let t = Tensor::new(xv.shape().to_vec(), out).expect("same shape");
        self.push(Op::Scale { k }, vec![x], t, None)
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].val;
        let mut t_cache = Vec::with_capacity(xv.len());
        let out: Vec<f64> = xv
            .data()
            .iter()
            .map(|&v| {
                let t = (GELU_C * (v + GELU_A * v * v * v)).tanh();
                t_cache.push(t);
                0.5 * v * (1.0 + t)
            })
            .collect();
        let t = Tensor::new(xv.shape().to_vec(), out).expect("same shape");
        self.push(Op::Gelu { t: t_cache }, vec![x], t, None)
    }

    /// alpha · Q·Kᵀ computed only for j ≤ i; entries above the diagonal are
    /// exactly zero and row j > i of K is never read for output row i.
    pub fn causal_scores(&mut self, q: NodeId, k: NodeId, alpha: f64) -> Result<NodeId> {
        let (qv, kv) = (&self.nodes[q.0].val, &self.nodes[k.0].val);
        if qv.cols() != kv.cols() || qv.rows() != kv.rows() {
            return Err(self.shape_err("causal-scores", q, k));
        }
        let s = qv.rows();
        let mut out = vec![0.0; s * s];
        for i in 0..s {
            let qi = qv.row(i);
            for j in 0..=i {
                let kj = kv.row(j);
                let dot: f64 = qi.iter().zip(kj).map(|(a, b)| a * b).sum();
                out[i * s + j] = alpha * dot;
            }
        }
        let t = Tensor::new(vec![s, s], out)?;
        Ok(self.push(Op::CausalScores { alpha }, vec![q, k], t, None))
    }

    /// Row-wise softmax over the prefix j ≤ i; the rest of each row stays 0.
    pub fn causal_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = &self.nodes[x.0].val;
        let s = xv.rows();
        if xv.cols() != s {
            return Err(Error::Shape {
                op: "causal-softmax",
                lhs: xv.shape().to_vec(),
                rhs: vec![s, s],
            });
        }
        let mut out = vec![0.0; s * s];
        for i in 0..s {
            let row = &xv.row(i)[..=i];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - m).exp();
                out[i * s + j] = e;
                denom += e;
            }
            for v in &mut out[i * s..=i * s + i] {
                *v /= denom;
            }
        }
        let t = Tensor::new(vec![s, s], out)?;
        Ok(self.push(Op::CausalSoftmax, vec![x], t, None))
    }

    /// tril(P) · V. Output row i sums rows j ≤ i of V only.
    pub fn causal_mix(&mut self, p: NodeId, v: NodeId) -> Result<NodeId> {
        let (pv, vv) = (&self.nodes[p.0].val, &self.nodes[v.0].val);
        let s = pv.rows();
        if pv.cols() != s || vv.rows() != s {
            return Err(self.shape_err("causal-mix", p, v));
        }
        let c = vv.cols();
        let mut out = vec![0.0; s * c];
        for i in 0..s {
            let pi = pv.row(i);
            let oi = &mut out[i * c..(i + 1) * c];
            for j in 0..=i {
                let w = pi[j];
                for (o, x) in oi.iter_mut().zip(vv.row(j)) {
                    *o += w * x;
                }
            }
        }
        let t = Tensor::new(vec![s, c], out)?;
        Ok(self.push(Op::CausalMix, vec![p, v], t, None))
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].val;
        let (r, c) = (xv.rows(), xv.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = xv.row(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (j, &v) in row.iter().enumerate() {
                let e = (v - m).exp();
                out[i * c + j] = e;
                denom += e;
            }
            for v in &mut out[i * c..(i + 1) * c] {
                *v /= denom;
            }
        }
        let t = Tensor::new(xv.shape().to_vec(), out).expect("same shape");
        self.push(Op::SoftmaxRows, vec![x], t, None)
    }

    /// Layer normalization over the last axis with learned gain and bias.
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId> {
        let (xv, gv, bv) = (
            &self.nodes[x.0].val,
            &self.nodes[gain.0].val,
            &self.nodes[bias.0].val,
        );
        let (r, c) = (xv.rows(), xv.cols());
        if gv.len() != c {
            return Err(self.shape_err("layer-norm", x, gain));
        }
        if bv.len() != c {
            return Err(self.shape_err("layer-norm", x, bias));
        }
        let mut xhat = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std[i] = inv;
            for j in 0..c {
                let xh = (row[j] - mean) * inv;
                xhat[i * c + j] = xh;
                out[i * c + j] = gv.data()[j] * xh + bv.data()[j];
            }
        }
        let t = Tensor::new(xv.shape().to_vec(), out)?;
        Ok(self.push(Op::LayerNorm { xhat, inv_std }, vec![x, gain, bias], t, None))
    }

    /// Inverted dropout with keep-scaling; identity when p is 0.
    pub fn dropout(&mut self, x: NodeId, p: f64, rng: &mut Rng) -> NodeId {
        if p <= 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let xv = &self.nodes[x.0].val;
        let mask: Vec<f64> = (0..xv.len())
            .map(|_| if rng.uniform() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let out: Vec<f64> = xv.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let t = Tensor::new(xv.shape().to_vec(), out).expect("same shape");
        self.push(Op::Dropout { mask }, vec![x], t, None)
    }

    /// Mean of squared entries, as a scalar node.
    pub fn mean_sq(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].val;
        let n = xv.len() as f64;
        let v = xv.data().iter().map(|v| v * v).sum::<f64>() / n;
        self.push(Op::MeanSq, vec![x], Tensor::scalar(v), None)
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x.0].val.data().iter().sum::<f64>();
        self.push(Op::SumAll, vec![x], Tensor::scalar(v), None)
    }

    /// Reverse sweep from a scalar loss. Leaves gradients in the nodes;
    /// parameters not connected to the loss keep zero gradients.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes[loss.0].val.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].val.shape()
            )));
        }
        self.nodes[loss.0].grad[0] = 1.0;
        for id in (0..self.nodes.len()).rev() {
            self.step_backward(id);
        }
        Ok(())
    }

    fn step_backward(&mut self, id: usize) {
        // Split off the current node; its inputs all precede it.
        let (before, rest) = self.nodes.split_at_mut(id);
        let node = &rest[0];
        let ins: Vec<usize> = node.ins.iter().map(|n| n.0).collect();
        let g = &node.grad;
        match &node.op {
            Op::Leaf => {}
            Op::Matmul { nt } => {
                let dc = Tensor::new(node.val.shape().to_vec(), g.clone()).expect("shape");
                let a_val = before[ins[0]].val.clone();
                let b_val = before[ins[1]].val.clone();
                if !*nt {
                    // C = A·B: dA += dC·Bᵀ, dB += Aᵀ·dC.
                    gemm(1.0, &dc, false, &b_val, true, 1.0, &mut before[ins[0]].grad);
                    gemm(1.0, &a_val, true, &dc, false, 1.0, &mut before[ins[1]].grad);
                } else {
                    // C = A·Bᵀ: dA += dC·B, dB += dCᵀ·A.
                    gemm(1.0, &dc, false, &b_val, false, 1.0, &mut before[ins[0]].grad);
                    gemm(1.0, &dc, true, &a_val, false, 1.0, &mut before[ins[1]].grad);
                }
            }
            Op::Add => {
                accumulate(before, ins[0], g);
                accumulate(before, ins[1], g);
            }
            Op::Sub => {
                accumulate(before, ins[0], g);
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                accumulate(before, ins[1], &neg);
            }
            Op::AddRowBias => {
                accumulate(before, ins[0], g);
                let c = before[ins[1]].val.len();
                let db = &mut before[ins[1]].grad;
                for (i, v) in g.iter().enumerate() {
                    db[i % c] += v;
                }
            }
            Op::Interleave => {
                let c = node.val.cols();
                let r = node.val.rows() / 2;
                for i in 0..r {
                    for (d, s) in before[ins[0]].grad[i * c..(i + 1) * c]
                        .iter_mut()
                        .zip(&g[2 * i * c..(2 * i + 1) * c])
                    {
                        *d += s;
                    }
                    for (d, s) in before[ins[1]].grad[i * c..(i + 1) * c]
                        .iter_mut()
                        .zip(&g[(2 * i + 1) * c..(2 * i + 2) * c])
                    {
                        *d += s;
                    }
                }
            }
            Op::ConcatRows => {
                let na = before[ins[0]].val.len();
                for (d, s) in before[ins[0]].grad.iter_mut().zip(&g[..na]) {
                    *d += s;
                }
                for (d, s) in before[ins[1]].grad.iter_mut().zip(&g[na..]) {
                    *d += s;
                }
            }
            Op::GatherRows { idx } => {
                let c = node.val.cols();
                let tg = &mut before[ins[0]].grad;
                for (row, &i) in idx.iter().enumerate() {
                    for (d, s) in tg[i * c..(i + 1) * c]
                        .iter_mut()
                        .zip(&g[row * c..(row + 1) * c])
                    {
                        *d += s;
                    }
                }
            }
            Op::SliceCols { from, to } => {
                let c = before[ins[0]].val.cols();
                let w = to - from;
                let xg = &mut before[ins[0]].grad;
                for i in 0..node.val.rows() {
                    for j in 0..w {
                        xg[i * c + from + j] += g[i * w + j];
                    }
                }
            }
            Op::ConcatCols { widths } => {
                let total: usize = widths.iter().sum();
                let rows = node.val.rows();
                let mut off = 0;
                for (&inp, &w) in ins.iter().zip(widths) {
                    let ig = &mut before[inp].grad;
                    for i in 0..rows {
                        for j in 0..w {
                            ig[i * w + j] += g[i * total + off + j];
                        }
                    }
                    off += w;
                }
            }
            Op::Scale { k } => {
                let k = *k;
                for (d, s) in before[ins[0]].grad.iter_mut().zip(g) {
                    *d += k * s;
                }
            }
            Op::Gelu { t } => {
                let xv = before[ins[0]].val.clone();
                for (i, (d, s)) in before[ins[0]].grad.iter_mut().zip(g).enumerate() {
                    let x = xv.data()[i];
                    let th = t[i];
                    let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
                    *d += s * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du);
                }
            }
            Op::CausalScores { alpha } => {
                let s = node.val.rows();
                let c = before[ins[0]].val.cols();
                let alpha = *alpha;
                let qv = before[ins[0]].val.clone();
                let kv = before[ins[1]].val.clone();
                for i in 0..s {
                    for j in 0..=i {
                        let gij = alpha * g[i * s + j];
                        if gij == 0.0 {
                            continue;
                        }
                        for (d, x) in before[ins[0]].grad[i * c..(i + 1) * c]
                            .iter_mut()
                            .zip(kv.row(j))
                        {
                            *d += gij * x;
                        }
                        for (d, x) in before[ins[1]].grad[j * c..(j + 1) * c]
                            .iter_mut()
                            .zip(qv.row(i))
                        {
                            *d += gij * x;
                        }
                    }
                }
            }
            Op::CausalSoftmax => {
                let s = node.val.rows();
                let p = node.val.clone();
                let xg = &mut before[ins[0]].grad;
                for i in 0..s {
                    let prow = &p.row(i)[..=i];
                    let grow = &g[i * s..i * s + i + 1];
                    let dot: f64 = prow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    for j in 0..=i {
                        xg[i * s + j] += prow[j] * (grow[j] - dot);
                    }
                }
            }
            Op::CausalMix => {
                let s = node.val.rows();
                let c = node.val.cols();
                let pv = before[ins[0]].val.clone();
                let vv = before[ins[1]].val.clone();
                for i in 0..s {
                    let gi = &g[i * c..(i + 1) * c];
                    for j in 0..=i {
                        let dot: f64 = gi.iter().zip(vv.row(j)).map(|(a, b)| a * b).sum();
                        before[ins[0]].grad[i * s + j] += dot;
                        let w = pv.row(i)[j];
                        for (d, x) in before[ins[1]].grad[j * c..(j + 1) * c]
                            .iter_mut()
                            .zip(gi)
                        {
                            *d += w * x;
                        }
                    }
                }
            }
            Op::SoftmaxRows => {
                let (r, c) = (node.val.rows(), node.val.cols());
                let p = node.val.clone();
                let xg = &mut before[ins[0]].grad;
                for i in 0..r {
                    let prow = p.row(i);
                    let grow = &g[i * c..(i + 1) * c];
                    let dot: f64 = prow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        xg[i * c + j] += prow[j] * (grow[j] - dot);
                    }
                }
            }
            Op::LayerNorm { xhat, inv_std } => {
                let (r, c) = (node.val.rows(), node.val.cols());
                let gain = before[ins[1]].val.clone();
                for i in 0..r {
                    let grow = &g[i * c..(i + 1) * c];
                    let xh = &xhat[i * c..(i + 1) * c];
                    for j in 0..c {
                        before[ins[1]].grad[j] += grow[j] * xh[j];
                        before[ins[2]].grad[j] += grow[j];
                    }
                    // dxhat = g ⊙ gain, then the standard whitening backward.
                    let mut m1 = 0.0;
                    let mut m2 = 0.0;
                    for j in 0..c {
                        let dxh = grow[j] * gain.data()[j];
                        m1 += dxh;
                        m2 += dxh * xh[j];
                    }
                    m1 /= c as f64;
                    m2 /= c as f64;
                    let inv = inv_std[i];
                    for j in 0..c {
                        let dxh = grow[j] * gain.data()[j];
                        before[ins[0]].grad[i * c + j] += inv * (dxh - m1 - xh[j] * m2);
                    }
                }
            }
            Op::Dropout { mask } => {
                for ((d, s), m) in before[ins[0]].grad.iter_mut().zip(g).zip(mask) {
                    *d += s * m;
                }
            }
            Op::MeanSq => {
                let n = before[ins[0]].val.len() as f64;
                let scale = 2.0 * g[0] / n;
                let xv = before[ins[0]].val.clone();
                for (d, x) in before[ins[0]].grad.iter_mut().zip(xv.data()) {
                    *d += scale * x;
                }
            }
            Op::SumAll => {
                let s = g[0];
                for d in before[ins[0]].grad.iter_mut() {
                    *d += s;
                }
            }
        }
    }
}

fn accumulate(nodes: &mut [Node], id: usize, g: &[f64]) {
    for (d, s) in nodes[id].grad.iter_mut().zip(g) {
        *d += s;
    }
}
