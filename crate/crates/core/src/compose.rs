//! Recomposition of decomposed capsules into one context-specific sense
//! vector: dot-product attention against global and local context, additive
//! enrichment, then a squared-L2-norm softmax over capsules.

use crate::error::{Error, Result};
use crate::numerics::{softmax, Graph, NodeId, RealVector};

/// Per-capsule attention rows over context positions. Every row sums to one.
#[derive(Debug, Clone)]
pub struct AttentionWeights {
    /// One row per capsule over all sentence positions.
    pub global: Vec<RealVector>,
    /// One row per capsule over the local window positions.
    pub local: Vec<RealVector>,
}

/// The composed sense vector with its ingredients: composition weights on
/// the probability simplex and the context-specific capsules they weight.
#[derive(Debug, Clone)]
pub struct SenseRepresentation {
    /// The sense vector `q = sum_k weights[k] * context_specific[k]`.
    pub q: RealVector,
    /// Softmax of the squared norms of the context-specific capsules.
    pub weights: RealVector,
    /// Context-enriched capsules.
    pub context_specific: Vec<RealVector>,
}

// ----- graph-level building blocks ------------------------------------------

/// Attention row of one capsule over context nodes: softmax over positions
/// of the raw dot products (optionally scaled by `1/sqrt(d)`).
pub(crate) fn attention_row_nodes(
    graph: &mut Graph,
    capsule: NodeId,
    context: &[NodeId],
    scaled: bool,
) -> Result<NodeId> {
    if context.is_empty() {
        return Err(Error::arg("attention over an empty context"));
    }
    let dim = graph.value(capsule).len();
    let scale = 1.0 / (dim as f64).sqrt();
    let mut logits = Vec::with_capacity(context.len());
    for &c in context {
        let d = graph.dot(capsule, c)?;
        logits.push(if scaled { graph.scale(d, scale) } else { d });
    }
    let stacked = graph.stack(&logits)?;
    graph.softmax(stacked)
}

/// Context-specific capsule: the capsule plus attention-weighted sums of
/// the global and local context vectors. Either context may be absent
/// (ablations drop one branch).
pub(crate) fn enrich_capsule_nodes(
    graph: &mut Graph,
    capsule: NodeId,
    global: Option<(NodeId, &[NodeId])>,
    local: Option<(NodeId, &[NodeId])>,
) -> Result<NodeId> {
    let mut out = capsule;
    if let Some((weights, ctx)) = global {
        let pooled = graph.weighted_sum_by(weights, ctx)?;
        out = graph.add(out, pooled)?;
    }
    if let Some((weights, ctx)) = local {
        let pooled = graph.weighted_sum_by(weights, ctx)?;
        out = graph.add(out, pooled)?;
    }
    Ok(out)
}

/// Squared-norm softmax composition over context-specific capsules:
/// `weights = softmax(|s*_k|^2)`, `q = sum_k weights[k] * s*_k`.
pub(crate) fn l2norm_composition_nodes(
    graph: &mut Graph,
    capsules: &[NodeId],
) -> Result<(NodeId, NodeId)> {
    if capsules.is_empty() {
        return Err(Error::arg("composition requires at least one capsule"));
    }
    let norms = capsules
        .iter()
        .map(|&c| graph.sq_norm(c))
        .collect::<Result<Vec<_>>>()?;
    let stacked = graph.stack(&norms)?;
    let weights = graph.softmax(stacked)?;
    let q = graph.weighted_sum_by(weights, capsules)?;
    Ok((q, weights))
}

// ----- value-level API -------------------------------------------------------

/// Attention weights of one capsule over context positions.
pub fn context_attention(capsule: &RealVector, context: &[RealVector]) -> Result<RealVector> {
    if context.is_empty() {
        return Err(Error::arg("attention over an empty context"));
    }
    let logits = context
        .iter()
        .map(|c| capsule.dot(c))
        .collect::<Result<Vec<f64>>>()?;
    softmax(&RealVector::new(logits)?)
}

/// Applies precomputed attention rows to enrich each capsule with its
/// global and local context sums.
pub fn compose_context_specific(
    capsules: &[RealVector],
    global_ctx: &[RealVector],
    local_ctx: &[RealVector],
    weights: &AttentionWeights,
) -> Result<Vec<RealVector>> {
    if weights.global.len() != capsules.len() || weights.local.len() != capsules.len() {
        return Err(Error::dim(
            "attention rows",
            capsules.len(),
            weights.global.len().min(weights.local.len()),
        ));
    }
    let mut out = Vec::with_capacity(capsules.len());
    for (k, capsule) in capsules.iter().enumerate() {
        let g_row = &weights.global[k];
        let l_row = &weights.local[k];
        if g_row.dim() != global_ctx.len() {
            return Err(Error::dim("global attention row", global_ctx.len(), g_row.dim()));
        }
        if l_row.dim() != local_ctx.len() {
            return Err(Error::dim("local attention row", local_ctx.len(), l_row.dim()));
        }
        let mut values = capsule.values().to_vec();
        for (w, ctx) in g_row.values().iter().zip(global_ctx) {
            if ctx.dim() != values.len() {
                return Err(Error::dim("context vector", values.len(), ctx.dim()));
            }
            for (o, &x) in values.iter_mut().zip(ctx.values()) {
                *o += w * x;
            }
        }
        for (w, ctx) in l_row.values().iter().zip(local_ctx) {
            if ctx.dim() != values.len() {
                return Err(Error::dim("context vector", values.len(), ctx.dim()));
            }
            for (o, &x) in values.iter_mut().zip(ctx.values()) {
                *o += w * x;
            }
        }
        out.push(RealVector::new(values)?);
    }
    Ok(out)
}

/// Composes context-specific capsules into the final sense representation.
pub fn l2norm_composition(context_specific: &[RealVector]) -> Result<SenseRepresentation> {
    if context_specific.is_empty() {
        return Err(Error::arg("composition requires at least one capsule"));
    }
    let mut graph = Graph::new();
    let nodes: Vec<NodeId> = context_specific
        .iter()
        .map(|v| graph.constant_vector(v))
        .collect();
    let (q, weights) = l2norm_composition_nodes(&mut graph, &nodes)?;
    Ok(SenseRepresentation {
        q: graph.vector_value(q)?,
        weights: graph.vector_value(weights)?,
        context_specific: context_specific.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(values: &[f64]) -> RealVector {
        RealVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn attention_single_position_is_one() {
        let w = context_attention(&v(&[1.0, 2.0]), &[v(&[0.5, 0.5])]).unwrap();
        assert_eq!(w.values(), &[1.0]);
    }

    #[test]
    fn attention_identical_context_is_uniform() {
        let ctx = vec![v(&[0.3, -0.7]); 4];
        let w = context_attention(&v(&[1.0, 2.0]), &ctx).unwrap();
        for &x in w.values() {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn attention_basis_context() {
        // logits (1, 0) -> (e/(e+1), 1/(e+1))
        let w = context_attention(&v(&[1.0, 0.0]), &[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        assert_abs_diff_eq!(w.values()[0], 0.731059, epsilon = 1e-5);
        assert_abs_diff_eq!(w.values()[1], 0.268941, epsilon = 1e-5);
    }

    #[test]
    fn attention_empty_context_rejected() {
        assert!(context_attention(&v(&[1.0]), &[]).is_err());
    }

    #[test]
    fn enrichment_with_zero_context_is_identity() {
        let caps = vec![v(&[1.0, 2.0]), v(&[-1.0, 0.5])];
        let ctx = vec![v(&[0.0, 0.0]); 3];
        let weights = AttentionWeights {
            global: caps
                .iter()
                .map(|c| context_attention(c, &ctx).unwrap())
                .collect(),
            local: caps
                .iter()
                .map(|c| context_attention(c, &ctx).unwrap())
                .collect(),
        };
        let out = compose_context_specific(&caps, &ctx, &ctx, &weights).unwrap();
        for (a, b) in out.iter().zip(&caps) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn enrichment_single_shared_vector_adds_twice() {
        let caps = vec![v(&[1.0, 1.0])];
        let g = vec![v(&[0.5, -0.25])];
        let weights = AttentionWeights {
            global: vec![v(&[1.0])],
            local: vec![v(&[1.0])],
        };
        let out = compose_context_specific(&caps, &g, &g, &weights).unwrap();
        assert_eq!(out[0].values(), &[2.0, 0.5]);
    }

    #[test]
    fn composition_single_capsule() {
        let s = v(&[0.4, -0.3]);
        let rep = l2norm_composition(std::slice::from_ref(&s)).unwrap();
        assert_eq!(rep.weights.values(), &[1.0]);
        assert_eq!(rep.q.values(), s.values());
    }

    #[test]
    fn composition_equal_norms_averages() {
        let a = v(&[1.0, 0.0]);
        let b = v(&[0.0, -1.0]);
        let rep = l2norm_composition(&[a, b]).unwrap();
        assert_abs_diff_eq!(rep.weights.values()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.q.values()[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.q.values()[1], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn composition_weights_follow_squared_norms() {
        // |a|^2 = 1, |b|^2 = 2 -> softmax(1, 2)
        let a = v(&[1.0, 0.0]);
        let b = v(&[1.0, 1.0]);
        let rep = l2norm_composition(&[a, b]).unwrap();
        assert_abs_diff_eq!(rep.weights.values()[0], 0.268941, epsilon = 1e-5);
        assert_abs_diff_eq!(rep.weights.values()[1], 0.731059, epsilon = 1e-5);
    }

    #[test]
    fn composition_invariant_q_equals_weighted_sum() {
        let caps = vec![v(&[0.2, 0.9]), v(&[-1.4, 0.3]), v(&[0.0, 0.0])];
        let rep = l2norm_composition(&caps).unwrap();
        let mut manual = vec![0.0; 2];
        for (w, c) in rep.weights.values().iter().zip(&caps) {
            for (m, &x) in manual.iter_mut().zip(c.values()) {
                *m += w * x;
            }
        }
        for (a, b) in rep.q.values().iter().zip(&manual) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }
}
