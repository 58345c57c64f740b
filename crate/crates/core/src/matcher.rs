//! Word sense matching: pair features, the binary softmax classifier and
//! the cross-entropy matching loss.
//!
//! The classifier reads the ordered concatenation of the two sense vectors
//! together with their elementwise product and squared difference. A plain
//! affine map over the bare concatenation cannot express "same sense" (the
//! decision is relational), so the interaction features are part of the
//! classifier contract; see the tests for the order-sensitivity this keeps.

use serde::{Deserialize, Serialize};

use crate::context::Sentence;
use crate::error::{Error, Result};
use crate::numerics::functions::softmax_slice;
use crate::numerics::{binary_cross_entropy, Graph, NodeId, RealMatrix, RealVector};

/// Index of the "match" class in the 2-way softmax.
pub const MATCH_CLASS: usize = 1;

/// Two occurrences of one lemma plus the gold matching state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchingPair {
    pub left: Sentence,
    pub right: Sentence,
    pub lemma: String,
    /// `true` when both occurrences carry the same sense.
    pub gold: bool,
}

impl MatchingPair {
    pub fn new(left: Sentence, right: Sentence, lemma: impl Into<String>, gold: bool) -> Self {
        MatchingPair {
            left,
            right,
            lemma: lemma.into(),
            gold,
        }
    }
}

/// Matching state of two sense ids: 1 iff they are equal.
pub fn match_state(first: &str, second: &str) -> bool {
    first == second
}

/// Cross-entropy of a predicted matching probability against the gold state.
pub fn matching_loss(predicted: f64, gold: bool) -> Result<f64> {
    binary_cross_entropy(predicted, gold)
}

/// The binary softmax classifier over pair features.
#[derive(Debug, Clone)]
pub struct MatchClassifier {
    weight: RealMatrix,
    bias: RealVector,
}

impl MatchClassifier {
    pub fn new(weight: RealMatrix, bias: RealVector) -> Result<Self> {
        if weight.cols() != 2 || bias.dim() != 2 {
            return Err(Error::arg("match classifier maps pair features to 2 classes"));
        }
        if weight.rows() % 4 != 0 {
            return Err(Error::dim(
                "classifier feature rows (4 * capsule dim)",
                4 * (weight.rows() / 4).max(1),
                weight.rows(),
            ));
        }
        Ok(MatchClassifier { weight, bias })
    }

    pub fn weight(&self) -> &RealMatrix {
        &self.weight
    }

    pub fn bias(&self) -> &RealVector {
        &self.bias
    }

    pub fn feature_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Pair features `[a | b | a*b | (a-b)^2]` of two sense vectors.
pub fn pair_features(a: &RealVector, b: &RealVector) -> Result<RealVector> {
    if a.dim() != b.dim() {
        return Err(Error::dim("pair feature operands", a.dim(), b.dim()));
    }
    let mut values = Vec::with_capacity(4 * a.dim());
    values.extend_from_slice(a.values());
    values.extend_from_slice(b.values());
    for (x, y) in a.values().iter().zip(b.values()) {
        values.push(x * y);
    }
    for (x, y) in a.values().iter().zip(b.values()) {
        let d = x - y;
        values.push(d * d);
    }
    RealVector::new(values)
}

/// Graph form of [`pair_features`], identical layout.
pub(crate) fn pair_feature_nodes(graph: &mut Graph, a: NodeId, b: NodeId) -> Result<NodeId> {
    let heads = graph.concat(a, b)?;
    let product = graph.mul(a, b)?;
    let diff = graph.sub(a, b)?;
    let sq_diff = graph.mul(diff, diff)?;
    let tails = graph.concat(product, sq_diff)?;
    graph.concat(heads, tails)
}

/// Probability that the two occurrences match: the match-class entry of the
/// softmax over `features * W + bias`. Always strictly inside (0, 1).
pub fn match_probability(
    q_left: &RealVector,
    q_right: &RealVector,
    clf: &MatchClassifier,
) -> Result<f64> {
    let features = pair_features(q_left, q_right)?;
    if features.dim() != clf.feature_dim() {
        return Err(Error::dim("classifier input", clf.feature_dim(), features.dim()));
    }
    // Same accumulation order as the graph's vecmat so both paths agree
    // bit for bit.
    let mut logits = [clf.bias().values()[0], clf.bias().values()[1]];
    let w = clf.weight();
    for (i, &f) in features.values().iter().enumerate() {
        logits[0] += f * w.get(i, 0);
        logits[1] += f * w.get(i, 1);
    }
    let mut probs = [0.0; 2];
    softmax_slice(&logits, &mut probs);
    Ok(probs[MATCH_CLASS])
}
