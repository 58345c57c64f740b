//! Capsule decomposition of a word embedding: expansion into `p` capsules
//! followed by `K` layers of dynamic routing by agreement.
//!
//! Routing treats the lower index `i` as the sender and the upper index `j`
//! as the receiver. Coupling logits start at zero each layer; the coupling
//! row of every sender is a softmax over receivers, so it always sums to
//! one. Gradients flow through the unrolled iterations.

use crate::error::{Error, Result};
use crate::numerics::{Graph, NodeId, ParamInit, RealMatrix, RealVector};

/// Expansion matrices, one per capsule, each mapping the embedding
/// dimension to the capsule dimension (applied as `E * W_i`).
#[derive(Debug, Clone)]
pub struct ExpansionParams {
    mats: Vec<RealMatrix>,
}

impl ExpansionParams {
    pub fn new(mats: Vec<RealMatrix>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::arg("expansion requires at least one matrix"));
        }
        let (rows, cols) = (mats[0].rows(), mats[0].cols());
        for m in &mats {
            if m.rows() != rows || m.cols() != cols {
                return Err(Error::arg("expansion matrices must share one shape"));
            }
        }
        Ok(ExpansionParams { mats })
    }

    pub fn capsule_count(&self) -> usize {
        self.mats.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.mats[0].rows()
    }

    pub fn capsule_dim(&self) -> usize {
        self.mats[0].cols()
    }

    pub fn mats(&self) -> &[RealMatrix] {
        &self.mats
    }

    pub fn seeded(p: usize, d_e: usize, d_c: usize, init: &mut ParamInit) -> Result<Self> {
        let mats = (0..p)
            .map(|_| init.matrix(d_e, d_c, d_e))
            .collect::<Result<Vec<_>>>()?;
        ExpansionParams::new(mats)
    }
}

/// The `p x p` grid of transform matrices for one routing layer;
/// `mats[i][j]` carries sender `i`'s prediction for receiver `j`.
#[derive(Debug, Clone)]
pub struct RoutingLayerParams {
    mats: Vec<Vec<RealMatrix>>,
}

impl RoutingLayerParams {
    pub fn new(mats: Vec<Vec<RealMatrix>>) -> Result<Self> {
        let p = mats.len();
        if p == 0 {
            return Err(Error::arg("routing layer requires at least one capsule"));
        }
        let dim = mats[0]
            .first()
            .ok_or_else(|| Error::arg("routing grid must be p x p"))?
            .rows();
        for row in &mats {
            if row.len() != p {
                return Err(Error::dim("routing grid row", p, row.len()));
            }
            for m in row {
                if m.rows() != dim || m.cols() != dim {
                    return Err(Error::arg("routing matrices must be square of capsule dim"));
                }
            }
        }
        Ok(RoutingLayerParams { mats })
    }

    pub fn capsule_count(&self) -> usize {
        self.mats.len()
    }

    pub fn capsule_dim(&self) -> usize {
        self.mats[0][0].rows()
    }

    pub fn mat(&self, i: usize, j: usize) -> &RealMatrix {
        &self.mats[i][j]
    }

    pub fn seeded(p: usize, d_c: usize, init: &mut ParamInit) -> Result<Self> {
        let mats = (0..p)
            .map(|_| {
                (0..p)
                    .map(|_| init.matrix(d_c, d_c, d_c))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        RoutingLayerParams::new(mats)
    }
}

/// Coupling logits and coefficients after one routing iteration. Rows index
/// the sender capsule; each coefficient row lies on the probability simplex.
#[derive(Debug, Clone)]
pub struct RoutingState {
    pub logits: RealMatrix,
    pub couplings: RealMatrix,
}

/// Per-iteration routing states plus the agreement score
/// `sum_ij c_ij (v_j . u_hat_ji)` for each iteration.
#[derive(Debug, Clone, Default)]
pub struct RoutingTrace {
    pub iterations: Vec<RoutingState>,
    pub agreements: Vec<f64>,
}

/// Size parameters of the decomposer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DecomposerConfig {
    /// Number of decomposed vectors (capsules per layer).
    pub capsules: usize,
    /// Number of routing layers.
    pub layers: usize,
    /// Routing iterations per layer.
    pub routing_iters: usize,
    /// Input embedding dimension.
    pub embed_dim: usize,
    /// Capsule dimension (defaults to the embedding dimension).
    pub capsule_dim: usize,
}

impl Default for DecomposerConfig {
    fn default() -> Self {
        DecomposerConfig {
            capsules: 10,
            layers: 3,
            routing_iters: 3,
            embed_dim: 64,
            capsule_dim: 64,
        }
    }
}

impl DecomposerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capsules == 0 || self.layers == 0 || self.routing_iters == 0 {
            return Err(Error::arg(
                "capsules, layers and routing_iters must all be at least 1",
            ));
        }
        if self.embed_dim == 0 || self.capsule_dim == 0 {
            return Err(Error::arg("dimensions must be positive"));
        }
        Ok(())
    }
}

/// Full parameter set of the decomposer: the expansion plus one routing
/// grid per layer.
#[derive(Debug, Clone)]
pub struct DecomposerParams {
    pub expansion: ExpansionParams,
    pub layers: Vec<RoutingLayerParams>,
}

impl DecomposerParams {
    pub fn seeded(cfg: &DecomposerConfig, init: &mut ParamInit) -> Result<Self> {
        cfg.validate()?;
        Ok(DecomposerParams {
            expansion: ExpansionParams::seeded(cfg.capsules, cfg.embed_dim, cfg.capsule_dim, init)?,
            layers: (0..cfg.layers)
                .map(|_| RoutingLayerParams::seeded(cfg.capsules, cfg.capsule_dim, init))
                .collect::<Result<Vec<_>>>()?,
        })
    }

    fn check_against(&self, cfg: &DecomposerConfig) -> Result<()> {
        cfg.validate()?;
        if self.expansion.capsule_count() != cfg.capsules
            || self.expansion.embed_dim() != cfg.embed_dim
            || self.expansion.capsule_dim() != cfg.capsule_dim
        {
            return Err(Error::arg("expansion parameters do not match the config"));
        }
        if self.layers.len() != cfg.layers {
            return Err(Error::dim("routing layer count", cfg.layers, self.layers.len()));
        }
        for layer in &self.layers {
            if layer.capsule_count() != cfg.capsules || layer.capsule_dim() != cfg.capsule_dim {
                return Err(Error::arg("routing parameters do not match the config"));
            }
        }
        Ok(())
    }
}

// ----- graph-level building blocks ------------------------------------------

/// Expands an embedding node into `p` capsule inputs: `u_i = e * W_i`.
pub(crate) fn expand_nodes(
    graph: &mut Graph,
    embedding: NodeId,
    mats: &[NodeId],
) -> Result<Vec<NodeId>> {
    mats.iter()
        .map(|&m| graph.vecmat(embedding, m))
        .collect()
}

/// One layer of dynamic routing over capsule nodes. When `trace` is given,
/// coupling states and agreement scores are recorded per iteration.
pub(crate) fn route_layer_nodes(
    graph: &mut Graph,
    inputs: &[NodeId],
    mats: &[Vec<NodeId>],
    iters: usize,
    mut trace: Option<&mut RoutingTrace>,
) -> Result<Vec<NodeId>> {
    let p = inputs.len();
    if p == 0 {
        return Err(Error::arg("routing requires at least one capsule"));
    }
    if iters == 0 {
        return Err(Error::arg(
            "routing needs at least one iteration to define the couplings",
        ));
    }
    if mats.len() != p || mats.iter().any(|row| row.len() != p) {
        return Err(Error::arg("routing grid must be p x p"));
    }

    // Predictions u_hat[i][j] = u_i * W'_ij.
    let mut predictions = Vec::with_capacity(p);
    for (i, &u) in inputs.iter().enumerate() {
        let mut row = Vec::with_capacity(p);
        for j in 0..p {
            row.push(graph.vecmat(u, mats[i][j])?);
        }
        predictions.push(row);
    }

    // Coupling logits start at zero for every sender.
    let zero_row = RealVector::zeros(p)?;
    let mut logits: Vec<NodeId> = (0..p).map(|_| graph.constant_vector(&zero_row)).collect();

    let mut outputs: Vec<NodeId> = Vec::new();
    for _ in 0..iters {
        // c_i = softmax(b_i) over receivers.
        let mut couplings = Vec::with_capacity(p);
        for &b in &logits {
            couplings.push(graph.softmax(b)?);
        }

        // x_j = sum_i c_ij u_hat[i][j], v_j = squash(x_j).
        outputs.clear();
        for j in 0..p {
            let coeffs: Vec<(NodeId, usize)> = (0..p).map(|i| (couplings[i], j)).collect();
            let vectors: Vec<NodeId> = (0..p).map(|i| predictions[i][j]).collect();
            let x = graph.weighted_sum(&coeffs, &vectors)?;
            outputs.push(graph.squash(x)?);
        }

        // b_ij += v_j . u_hat[i][j]
        let mut agreements = vec![vec![0.0; p]; p];
        let mut next_logits = Vec::with_capacity(p);
        for i in 0..p {
            let mut dots = Vec::with_capacity(p);
            for j in 0..p {
                let d = graph.dot(outputs[j], predictions[i][j])?;
                agreements[i][j] = graph.scalar_value(d);
                dots.push(d);
            }
            let delta = graph.stack(&dots)?;
            next_logits.push(graph.add(logits[i], delta)?);
        }

        if let Some(t) = trace.as_deref_mut() {
            let mut logit_values = Vec::with_capacity(p * p);
            let mut coupling_values = Vec::with_capacity(p * p);
            for i in 0..p {
                logit_values.extend_from_slice(graph.value(logits[i]));
                coupling_values.extend_from_slice(graph.value(couplings[i]));
            }
            let couplings_mat = RealMatrix::new(p, p, coupling_values)?;
            let mut agreement = 0.0;
            for i in 0..p {
                for j in 0..p {
                    agreement += couplings_mat.get(i, j) * agreements[i][j];
                }
            }
            t.iterations.push(RoutingState {
                logits: RealMatrix::new(p, p, logit_values)?,
                couplings: couplings_mat,
            });
            t.agreements.push(agreement);
        }

        logits = next_logits;
    }

    Ok(outputs)
}

/// Full decomposition on the graph: expansion, then `K` routing layers with
/// the outputs of one layer feeding the next.
pub(crate) fn decompose_nodes(
    graph: &mut Graph,
    embedding: NodeId,
    expansion: &[NodeId],
    layers: &[Vec<Vec<NodeId>>],
    iters: usize,
    mut traces: Option<&mut Vec<RoutingTrace>>,
) -> Result<Vec<NodeId>> {
    let mut capsules = expand_nodes(graph, embedding, expansion)?;
    for layer in layers {
        let mut trace = traces.as_deref_mut().map(|_| RoutingTrace::default());
        capsules = route_layer_nodes(graph, &capsules, layer, iters, trace.as_mut())?;
        if let (Some(all), Some(t)) = (traces.as_deref_mut(), trace) {
            all.push(t);
        }
    }
    Ok(capsules)
}

// ----- value-level API -------------------------------------------------------

fn bind_expansion(graph: &mut Graph, params: &ExpansionParams) -> Vec<NodeId> {
    params
        .mats()
        .iter()
        .map(|m| graph.constant_matrix(m))
        .collect()
}

fn bind_layer(graph: &mut Graph, params: &RoutingLayerParams) -> Vec<Vec<NodeId>> {
    (0..params.capsule_count())
        .map(|i| {
            (0..params.capsule_count())
                .map(|j| graph.constant_matrix(params.mat(i, j)))
                .collect()
        })
        .collect()
}

/// Expands an embedding into `p` capsule inputs.
pub fn expand(embedding: &RealVector, params: &ExpansionParams) -> Result<Vec<RealVector>> {
    if embedding.dim() != params.embed_dim() {
        return Err(Error::dim("expand input", params.embed_dim(), embedding.dim()));
    }
    let mut graph = Graph::new();
    let e = graph.constant_vector(embedding);
    let mats = bind_expansion(&mut graph, params);
    let out = expand_nodes(&mut graph, e, &mats)?;
    out.iter().map(|&id| graph.vector_value(id)).collect()
}

/// Result of one routing layer: the receiver outputs plus the per-iteration
/// trace of couplings and agreements.
#[derive(Debug, Clone)]
pub struct RoutingOutcome {
    pub outputs: Vec<RealVector>,
    pub trace: RoutingTrace,
}

/// Runs one layer of dynamic routing over concrete capsule values.
pub fn route_layer(
    inputs: &[RealVector],
    params: &RoutingLayerParams,
    iters: usize,
) -> Result<RoutingOutcome> {
    let p = params.capsule_count();
    if inputs.len() != p {
        return Err(Error::dim("route_layer inputs", p, inputs.len()));
    }
    for v in inputs {
        if v.dim() != params.capsule_dim() {
            return Err(Error::dim("route_layer capsule dim", params.capsule_dim(), v.dim()));
        }
    }
    let mut graph = Graph::new();
    let input_nodes: Vec<NodeId> = inputs.iter().map(|v| graph.constant_vector(v)).collect();
    let mats = bind_layer(&mut graph, params);
    let mut trace = RoutingTrace::default();
    let out = route_layer_nodes(&mut graph, &input_nodes, &mats, iters, Some(&mut trace))?;
    Ok(RoutingOutcome {
        outputs: out
            .iter()
            .map(|&id| graph.vector_value(id))
            .collect::<Result<Vec<_>>>()?,
        trace,
    })
}

/// Result of the full decomposition with one trace per layer.
#[derive(Debug, Clone)]
pub struct DecomposeOutcome {
    pub capsules: Vec<RealVector>,
    pub traces: Vec<RoutingTrace>,
}

/// Expands and routes an embedding through the whole capsule stack.
pub fn decompose(
    embedding: &RealVector,
    cfg: &DecomposerConfig,
    params: &DecomposerParams,
) -> Result<DecomposeOutcome> {
    params.check_against(cfg)?;
    if embedding.dim() != cfg.embed_dim {
        return Err(Error::dim("decompose input", cfg.embed_dim, embedding.dim()));
    }
    let mut graph = Graph::new();
    let e = graph.constant_vector(embedding);
    let expansion = bind_expansion(&mut graph, &params.expansion);
    let layers: Vec<Vec<Vec<NodeId>>> = params
        .layers
        .iter()
        .map(|l| bind_layer(&mut graph, l))
        .collect();
    let mut traces = Vec::new();
    let out = decompose_nodes(
        &mut graph,
        e,
        &expansion,
        &layers,
        cfg.routing_iters,
        Some(&mut traces),
    )?;
    Ok(DecomposeOutcome {
        capsules: out
            .iter()
            .map(|&id| graph.vector_value(id))
            .collect::<Result<Vec<_>>>()?,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::squash;
    use approx::assert_abs_diff_eq;

    fn identity_layer(p: usize, d: usize) -> RoutingLayerParams {
        let grid = (0..p)
            .map(|_| (0..p).map(|_| RealMatrix::identity(d).unwrap()).collect())
            .collect();
        RoutingLayerParams::new(grid).unwrap()
    }

    #[test]
    fn expand_with_zero_matrices_gives_zero_vectors() {
        let params = ExpansionParams::new(vec![
            RealMatrix::zeros(3, 2).unwrap(),
            RealMatrix::zeros(3, 2).unwrap(),
        ])
        .unwrap();
        let e = RealVector::new(vec![1.0, -2.0, 0.5]).unwrap();
        let out = expand(&e, &params).unwrap();
        assert_eq!(out.len(), 2);
        for v in out {
            assert_eq!(v.values(), &[0.0, 0.0]);
        }
    }

    #[test]
    fn expand_identity_single_capsule() {
        let params = ExpansionParams::new(vec![RealMatrix::identity(3).unwrap()]).unwrap();
        let e = RealVector::new(vec![0.1, 0.2, 0.3]).unwrap();
        let out = expand(&e, &params).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].values(), e.values());
    }

    #[test]
    fn expand_dimension_mismatch_rejected() {
        let params = ExpansionParams::new(vec![RealMatrix::zeros(3, 2).unwrap()]).unwrap();
        let e = RealVector::new(vec![1.0, 2.0]).unwrap();
        assert!(expand(&e, &params).is_err());
    }

    #[test]
    fn routing_zero_predictions_gives_uniform_couplings() {
        let p = 3;
        let grid = (0..p)
            .map(|_| (0..p).map(|_| RealMatrix::zeros(2, 2).unwrap()).collect())
            .collect();
        let params = RoutingLayerParams::new(grid).unwrap();
        let inputs = vec![RealVector::new(vec![1.0, 2.0]).unwrap(); p];
        let out = route_layer(&inputs, &params, 3).unwrap();
        for v in &out.outputs {
            assert_eq!(v.values(), &[0.0, 0.0]);
        }
        for state in &out.trace.iterations {
            for i in 0..p {
                for j in 0..p {
                    assert_abs_diff_eq!(state.couplings.get(i, j), 1.0 / p as f64, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn single_capsule_routing_is_squash() {
        let params = identity_layer(1, 2);
        let u = RealVector::new(vec![3.0, 4.0]).unwrap();
        let out = route_layer(std::slice::from_ref(&u), &params, 1).unwrap();
        let expected = squash(&u).unwrap();
        for (a, b) in out.outputs[0].values().iter().zip(expected.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        // Coupling of the single pair is forced to 1.
        assert_eq!(out.trace.iterations[0].couplings.get(0, 0), 1.0);
    }

    #[test]
    fn zero_iterations_rejected() {
        let params = identity_layer(2, 2);
        let inputs = vec![RealVector::new(vec![1.0, 0.0]).unwrap(); 2];
        assert!(route_layer(&inputs, &params, 0).is_err());
    }

    #[test]
    fn coupling_rows_sum_to_one_every_iteration() {
        let mut init = ParamInit::new(11);
        let params = RoutingLayerParams::seeded(3, 4, &mut init).unwrap();
        let inputs: Vec<RealVector> = (0..3).map(|i| init.vector(4, 1).map(|v| {
            RealVector::new(v.values().iter().map(|x| x * (i as f64 + 1.0)).collect()).unwrap()
        }).unwrap()).collect();
        let out = route_layer(&inputs, &params, 4).unwrap();
        assert_eq!(out.trace.iterations.len(), 4);
        for state in &out.trace.iterations {
            for i in 0..3 {
                let sum: f64 = (0..3).map(|j| state.couplings.get(i, j)).sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn decompose_single_layer_equals_route_of_expand() {
        let mut init = ParamInit::new(5);
        let cfg = DecomposerConfig {
            capsules: 2,
            layers: 1,
            routing_iters: 2,
            embed_dim: 3,
            capsule_dim: 3,
        };
        let params = DecomposerParams::seeded(&cfg, &mut init).unwrap();
        let e = RealVector::new(vec![0.5, -0.25, 1.0]).unwrap();

        let direct = decompose(&e, &cfg, &params).unwrap();
        let expanded = expand(&e, &params.expansion).unwrap();
        let routed = route_layer(&expanded, &params.layers[0], cfg.routing_iters).unwrap();
        for (a, b) in direct.capsules.iter().zip(&routed.outputs) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn default_config_produces_bounded_norms() {
        let mut init = ParamInit::new(3);
        let cfg = DecomposerConfig::default();
        assert_eq!((cfg.capsules, cfg.layers, cfg.routing_iters), (10, 3, 3));
        let params = DecomposerParams::seeded(&cfg, &mut init).unwrap();
        let e = init.vector(cfg.embed_dim, 1).unwrap();
        let out = decompose(&e, &cfg, &params).unwrap();
        assert_eq!(out.capsules.len(), 10);
        for v in &out.capsules {
            assert!(v.norm() < 1.0);
        }
    }

    #[test]
    fn decompose_is_deterministic() {
        let mut init = ParamInit::new(17);
        let cfg = DecomposerConfig {
            capsules: 3,
            layers: 2,
            routing_iters: 3,
            embed_dim: 4,
            capsule_dim: 4,
        };
        let params = DecomposerParams::seeded(&cfg, &mut init).unwrap();
        let e = RealVector::new(vec![0.3, 0.1, -0.2, 0.9]).unwrap();
        let a = decompose(&e, &cfg, &params).unwrap();
        let b = decompose(&e, &cfg, &params).unwrap();
        for (x, y) in a.capsules.iter().zip(&b.capsules) {
            assert_eq!(x.values(), y.values());
        }
    }
}
