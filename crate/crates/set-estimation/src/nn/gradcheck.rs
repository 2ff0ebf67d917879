//! Central finite-difference gradient verification.

use crate::error::Result;
use crate::nn::graph::{Graph, NodeId};
use crate::nn::tensor::Tensor;

/// Builders receive a fresh graph and the current parameter values, bind
/// each parameter at slot i, and return the scalar loss node. Determinism
/// across calls is required (fixed dropout seed or none at all).
pub type LossBuilder<'a> = dyn FnMut(&mut Graph, &[Tensor]) -> Result<NodeId> + 'a;

/// Max over all parameter coordinates of
/// |analytic − fd| / max(1e-8, |analytic| + |fd|)
/// with central differences of step `eps`. Non-finite values surface as an
/// infinite result rather than an error.
pub fn grad_check(build: &mut LossBuilder, params: &[Tensor], eps: f64) -> Result<f64> {
    assert!(eps > 0.0);
    let mut graph = Graph::new();
    let loss = build(&mut graph, params)?;
    graph.backward(loss)?;
    let analytic: Vec<Vec<f64>> = (0..params.len())
        .map(|i| {
            graph
                .param_grad(i)
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![0.0; params[i].len()])
        })
        .collect();
    drop(graph);

    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = params.to_vec();
    for i in 0..params.len() {
        for j in 0..params[i].len() {
            let orig = params[i].data()[j];
            work[i].data_mut()[j] = orig + eps;
            let up = eval_loss(build, &work)?;
            work[i].data_mut()[j] = orig - eps;
            let down = eval_loss(build, &work)?;
            work[i].data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * eps);
            let a = analytic[i][j];
            let rel = if a.is_finite() && fd.is_finite() {
                (a - fd).abs() / (1e-8f64).max(a.abs() + fd.abs())
            } else {
                f64::INFINITY
            };
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

fn eval_loss(build: &mut LossBuilder, params: &[Tensor]) -> Result<f64> {
    let mut graph = Graph::new();
    let loss = build(&mut graph, params)?;
    Ok(graph.value(loss).data()[0])
}
