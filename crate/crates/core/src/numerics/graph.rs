//! A tape of forward operations with reverse-mode gradient propagation.
//!
//! The graph is rebuilt per forward pass. Nodes are appended in execution
//! order, so the tape itself is a topological order and the backward pass
//! walks it once in reverse. Vectors are row vectors; matrices multiply on
//! the right (`out = v * M`).

use crate::error::{Error, Result};
use crate::numerics::functions::{softmax_slice, squash_slice, NORM_GUARD};
use crate::numerics::params::{ParamShape, ParameterStore};
use crate::numerics::{RealMatrix, RealVector};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    /// Constant leaf (no gradient consumers behind it).
    Leaf,
    /// Parameter leaf; the payload is the parameter's store index.
    Param(usize),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Elementwise product.
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// Row vector times matrix.
    VecMat(NodeId, NodeId),
    Dot(NodeId, NodeId),
    /// Scalars stacked into a vector.
    Stack(Vec<NodeId>),
    Softmax(NodeId),
    Squash(NodeId),
    /// `sum_t coeff_t * vec_t` where each coefficient is one entry of a
    /// vector node.
    WeightedSum {
        coeffs: Vec<(NodeId, usize)>,
        vectors: Vec<NodeId>,
    },
    Concat(NodeId, NodeId),
    SqNorm(NodeId),
    Pick(NodeId, usize),
    /// One row of a matrix node.
    Row(NodeId, usize),
    /// `logsumexp(z) - z[class]`; the canonical cross-entropy head.
    CrossEntropyLogits(NodeId, usize),
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
}

impl Node {
    fn len(&self) -> usize {
        self.value.len()
    }
}

/// Record of forward operations sufficient to push gradients from a scalar
/// back to every parameter leaf.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    /// (store index, node) for every parameter leaf, in creation order.
    param_leaves: Vec<(usize, NodeId)>,
    /// Per-node adjoints; allocated by `backward`.
    grads: Vec<Vec<f64>>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> NodeId {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    fn expect_vector(&self, id: NodeId, context: &str) -> Result<usize> {
        let n = self.node(id);
        if n.rows != 1 {
            return Err(Error::arg(format!("{context}: expected a vector operand")));
        }
        Ok(n.cols)
    }

    fn expect_scalar(&self, id: NodeId, context: &str) -> Result<()> {
        if self.node(id).len() != 1 {
            return Err(Error::arg(format!("{context}: expected a scalar operand")));
        }
        Ok(())
    }

    /// Value of a node as a flat slice.
    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.node(id).value
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.node(id).len(), 1);
        self.node(id).value[0]
    }

    pub fn vector_value(&self, id: NodeId) -> Result<RealVector> {
        RealVector::new(self.node(id).value.clone())
    }

    // ----- leaves ---------------------------------------------------------

    pub fn constant_vector(&mut self, v: &RealVector) -> NodeId {
        self.push(1, v.dim(), v.values().to_vec(), Op::Leaf)
    }

    pub fn constant_matrix(&mut self, m: &RealMatrix) -> NodeId {
        self.push(m.rows(), m.cols(), m.values().to_vec(), Op::Leaf)
    }

    pub fn constant_scalar(&mut self, x: f64) -> NodeId {
        self.push(1, 1, vec![x], Op::Leaf)
    }

    /// Binds a parameter from the store as a differentiable leaf. The value
    /// is copied; gradients flow back via [`Graph::accumulate_param_grads`].
    pub fn param(&mut self, store: &ParameterStore, name: &str) -> Result<NodeId> {
        let index = store
            .index_of(name)
            .ok_or_else(|| Error::arg(format!("unknown parameter '{name}'")))?;
        Ok(self.param_by_index(store, index))
    }

    pub fn param_by_index(&mut self, store: &ParameterStore, index: usize) -> NodeId {
        let (rows, cols) = match store.shape_at(index) {
            ParamShape::Vector(d) => (1, d),
            ParamShape::Matrix(r, c) => (r, c),
        };
        let id = self.push(rows, cols, store.value_at(index).to_vec(), Op::Param(index));
        self.param_leaves.push((index, id));
        id
    }

    // ----- elementwise ----------------------------------------------------

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (na, nb) = (self.node(a), self.node(b));
        if na.len() != nb.len() {
            return Err(Error::dim("graph add", na.len(), nb.len()));
        }
        let value: Vec<f64> = na
            .value
            .iter()
            .zip(nb.value.iter())
            .map(|(x, y)| x + y)
            .collect();
        let (rows, cols) = (na.rows, na.cols);
        Ok(self.push(rows, cols, value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (na, nb) = (self.node(a), self.node(b));
        if na.len() != nb.len() {
            return Err(Error::dim("graph sub", na.len(), nb.len()));
        }
        let value: Vec<f64> = na
            .value
            .iter()
            .zip(nb.value.iter())
            .map(|(x, y)| x - y)
            .collect();
        let (rows, cols) = (na.rows, na.cols);
        Ok(self.push(rows, cols, value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (na, nb) = (self.node(a), self.node(b));
        if na.len() != nb.len() {
            return Err(Error::dim("graph mul", na.len(), nb.len()));
        }
        let value: Vec<f64> = na
            .value
            .iter()
            .zip(nb.value.iter())
            .map(|(x, y)| x * y)
            .collect();
        let (rows, cols) = (na.rows, na.cols);
        Ok(self.push(rows, cols, value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let na = self.node(a);
        let value: Vec<f64> = na.value.iter().map(|x| x * factor).collect();
        let (rows, cols) = (na.rows, na.cols);
        self.push(rows, cols, value, Op::Scale(a, factor))
    }

    // ----- linear algebra ---------------------------------------------------

    /// `out = v * M` for a row vector `v` (dim r) and matrix `M` (r x c).
    pub fn vecmat(&mut self, v: NodeId, m: NodeId) -> Result<NodeId> {
        let dim = self.expect_vector(v, "vecmat")?;
        let nm = self.node(m);
        if nm.rows != dim {
            return Err(Error::dim("vecmat", dim, nm.rows));
        }
        let cols = nm.cols;
        let vv = &self.node(v).value;
        let mv = &self.node(m).value;
        let mut out = vec![0.0; cols];
        for (i, &vi) in vv.iter().enumerate() {
            let row = &mv[i * cols..(i + 1) * cols];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += vi * w;
            }
        }
        Ok(self.push(1, cols, out, Op::VecMat(v, m)))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let da = self.expect_vector(a, "dot")?;
        let db = self.expect_vector(b, "dot")?;
        if da != db {
            return Err(Error::dim("dot", da, db));
        }
        let value: f64 = self
            .node(a)
            .value
            .iter()
            .zip(self.node(b).value.iter())
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(1, 1, vec![value], Op::Dot(a, b)))
    }

    /// Stacks scalar nodes into one vector node.
    pub fn stack(&mut self, scalars: &[NodeId]) -> Result<NodeId> {
        if scalars.is_empty() {
            return Err(Error::arg("stack: empty input"));
        }
        for &s in scalars {
            self.expect_scalar(s, "stack")?;
        }
        let value: Vec<f64> = scalars.iter().map(|&s| self.node(s).value[0]).collect();
        Ok(self.push(1, scalars.len(), value, Op::Stack(scalars.to_vec())))
    }

    /// `sum_t coeffs[t] * vectors[t]` where `coeffs[t]` addresses one entry
    /// of a vector node. Coefficient rows of attention and routing live in
    /// softmax output nodes; this op consumes them without intermediate
    /// pick/stack chatter.
    pub fn weighted_sum(
        &mut self,
        coeffs: &[(NodeId, usize)],
        vectors: &[NodeId],
    ) -> Result<NodeId> {
        if coeffs.len() != vectors.len() || coeffs.is_empty() {
            return Err(Error::dim("weighted_sum arity", coeffs.len().max(1), vectors.len()));
        }
        let dim = self.expect_vector(vectors[0], "weighted_sum")?;
        let mut out = vec![0.0; dim];
        for (&(cn, ci), &vn) in coeffs.iter().zip(vectors) {
            let d = self.expect_vector(vn, "weighted_sum")?;
            if d != dim {
                return Err(Error::dim("weighted_sum operand", dim, d));
            }
            let c = self.node(cn).value[ci];
            for (o, &x) in out.iter_mut().zip(&self.node(vn).value) {
                *o += c * x;
            }
        }
        Ok(self.push(
            1,
            dim,
            out,
            Op::WeightedSum {
                coeffs: coeffs.to_vec(),
                vectors: vectors.to_vec(),
            },
        ))
    }

    /// Convenience form: every coefficient comes from the same vector node,
    /// entry `t` weighting `vectors[t]`.
    pub fn weighted_sum_by(&mut self, coeffs: NodeId, vectors: &[NodeId]) -> Result<NodeId> {
        let n = self.expect_vector(coeffs, "weighted_sum_by")?;
        if n != vectors.len() {
            return Err(Error::dim("weighted_sum_by arity", n, vectors.len()));
        }
        let pairs: Vec<(NodeId, usize)> = (0..n).map(|i| (coeffs, i)).collect();
        self.weighted_sum(&pairs, vectors)
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let da = self.expect_vector(a, "concat")?;
        let db = self.expect_vector(b, "concat")?;
        let mut value = Vec::with_capacity(da + db);
        value.extend_from_slice(&self.node(a).value);
        value.extend_from_slice(&self.node(b).value);
        Ok(self.push(1, da + db, value, Op::Concat(a, b)))
    }

    pub fn row(&mut self, m: NodeId, index: usize) -> Result<NodeId> {
        let nm = self.node(m);
        if index >= nm.rows {
            return Err(Error::arg(format!(
                "row {index} out of range for {}-row matrix",
                nm.rows
            )));
        }
        let cols = nm.cols;
        let value = nm.value[index * cols..(index + 1) * cols].to_vec();
        Ok(self.push(1, cols, value, Op::Row(m, index)))
    }

    pub fn pick(&mut self, v: NodeId, index: usize) -> Result<NodeId> {
        let dim = self.expect_vector(v, "pick")?;
        if index >= dim {
            return Err(Error::arg(format!("pick {index} out of range for dim {dim}")));
        }
        let value = vec![self.node(v).value[index]];
        Ok(self.push(1, 1, value, Op::Pick(v, index)))
    }

    // ----- nonlinearities ---------------------------------------------------

    pub fn softmax(&mut self, v: NodeId) -> Result<NodeId> {
        let dim = self.expect_vector(v, "softmax")?;
        let mut out = vec![0.0; dim];
        softmax_slice(&self.node(v).value, &mut out);
        Ok(self.push(1, dim, out, Op::Softmax(v)))
    }

    pub fn squash(&mut self, v: NodeId) -> Result<NodeId> {
        let dim = self.expect_vector(v, "squash")?;
        let mut out = vec![0.0; dim];
        squash_slice(&self.node(v).value, &mut out);
        Ok(self.push(1, dim, out, Op::Squash(v)))
    }

    pub fn sq_norm(&mut self, v: NodeId) -> Result<NodeId> {
        self.expect_vector(v, "sq_norm")?;
        let value: f64 = self.node(v).value.iter().map(|x| x * x).sum();
        Ok(self.push(1, 1, vec![value], Op::SqNorm(v)))
    }

    /// Scalar `logsumexp(z) - z[class]`, the cross-entropy of a softmax over
    /// logits `z` against a hard class label.
    pub fn cross_entropy_logits(&mut self, logits: NodeId, class: usize) -> Result<NodeId> {
        let dim = self.expect_vector(logits, "cross_entropy_logits")?;
        if class >= dim {
            return Err(Error::arg(format!(
                "class {class} out of range for {dim} logits"
            )));
        }
        let z = &self.node(logits).value;
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        let value = lse - z[class];
        Ok(self.push(1, 1, vec![value], Op::CrossEntropyLogits(logits, class)))
    }

    // ----- backward ---------------------------------------------------------

    /// Propagates gradients from a scalar node back through the tape. Each
    /// recorded operation is visited exactly once, in reverse order. `seed`
    /// is the adjoint of the output (1.0 for a plain loss, `1/batch` when
    /// averaging over a batch).
    pub fn backward(&mut self, output: NodeId, seed: f64) -> Result<()> {
        self.expect_scalar(output, "backward")?;
        self.grads.clear();
        self.grads
            .extend(self.nodes.iter().map(|n| vec![0.0; n.len()]));
        self.grads[output.0][0] = seed;

        for i in (0..self.nodes.len()).rev() {
            if self.grads[i].iter().all(|&g| g == 0.0) {
                continue;
            }
            // Take this node's adjoint out so input adjoints can be mutated.
            let g = std::mem::take(&mut self.grads[i]);
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf | Op::Param(_) => {}
                Op::Add(a, b) => {
                    for (ga, &gi) in self.grads[a.0].iter_mut().zip(&g) {
                        *ga += gi;
                    }
                    for (gb, &gi) in self.grads[b.0].iter_mut().zip(&g) {
                        *gb += gi;
                    }
                }
                Op::Sub(a, b) => {
                    for (ga, &gi) in self.grads[a.0].iter_mut().zip(&g) {
                        *ga += gi;
                    }
                    for (gb, &gi) in self.grads[b.0].iter_mut().zip(&g) {
                        *gb -= gi;
                    }
                }
                Op::Mul(a, b) => {
                    for k in 0..g.len() {
                        let (va, vb) = (self.nodes[a.0].value[k], self.nodes[b.0].value[k]);
                        self.grads[a.0][k] += g[k] * vb;
                        self.grads[b.0][k] += g[k] * va;
                    }
                }
                Op::Scale(a, factor) => {
                    for (ga, &gi) in self.grads[a.0].iter_mut().zip(&g) {
                        *ga += factor * gi;
                    }
                }
                Op::VecMat(v, m) => {
                    let cols = self.nodes[m.0].cols;
                    let dim = self.nodes[v.0].len();
                    for i in 0..dim {
                        let vi = self.nodes[v.0].value[i];
                        let row = i * cols;
                        let mut acc = 0.0;
                        for j in 0..cols {
                            let w = self.nodes[m.0].value[row + j];
                            acc += g[j] * w;
                            self.grads[m.0][row + j] += vi * g[j];
                        }
                        self.grads[v.0][i] += acc;
                    }
                }
                Op::Dot(a, b) => {
                    let gi = g[0];
                    for k in 0..self.nodes[a.0].len() {
                        let (va, vb) = (self.nodes[a.0].value[k], self.nodes[b.0].value[k]);
                        self.grads[a.0][k] += gi * vb;
                        self.grads[b.0][k] += gi * va;
                    }
                }
                Op::Stack(parts) => {
                    for (k, s) in parts.iter().enumerate() {
                        self.grads[s.0][0] += g[k];
                    }
                }
                Op::Softmax(a) => {
                    let y = &self.nodes[i].value;
                    let inner: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    for k in 0..y.len() {
                        self.grads[a.0][k] += y[k] * (g[k] - inner);
                    }
                }
                Op::Squash(a) => {
                    // v = x * s(n), s(n) = n / (1 + n^2), n = |x|
                    let x = &self.nodes[a.0].value;
                    let sq: f64 = x.iter().map(|v| v * v).sum();
                    let n = sq.sqrt();
                    let s = n / (1.0 + sq);
                    let ds = (1.0 - sq) / ((1.0 + sq) * (1.0 + sq));
                    let xg: f64 = x.iter().zip(&g).map(|(xi, gi)| xi * gi).sum();
                    let radial = xg * ds / (n + NORM_GUARD);
                    for k in 0..x.len() {
                        self.grads[a.0][k] += s * g[k] + radial * x[k];
                    }
                }
                Op::WeightedSum { coeffs, vectors } => {
                    for (&(cn, ci), &vn) in coeffs.iter().zip(&vectors) {
                        let c = self.nodes[cn.0].value[ci];
                        let mut acc = 0.0;
                        for k in 0..g.len() {
                            acc += g[k] * self.nodes[vn.0].value[k];
                            self.grads[vn.0][k] += c * g[k];
                        }
                        self.grads[cn.0][ci] += acc;
                    }
                }
                Op::Concat(a, b) => {
                    let da = self.nodes[a.0].len();
                    for k in 0..da {
                        self.grads[a.0][k] += g[k];
                    }
                    for k in 0..self.nodes[b.0].len() {
                        self.grads[b.0][k] += g[da + k];
                    }
                }
                Op::SqNorm(a) => {
                    let gi = g[0];
                    for k in 0..self.nodes[a.0].len() {
                        self.grads[a.0][k] += 2.0 * gi * self.nodes[a.0].value[k];
                    }
                }
                Op::Pick(a, index) => {
                    self.grads[a.0][index] += g[0];
                }
                Op::Row(m, index) => {
                    let cols = self.nodes[m.0].cols;
                    for k in 0..cols {
                        self.grads[m.0][index * cols + k] += g[k];
                    }
                }
                Op::CrossEntropyLogits(z, class) => {
                    let gi = g[0];
                    let logits = &self.nodes[z.0].value;
                    let mut soft = vec![0.0; logits.len()];
                    softmax_slice(logits, &mut soft);
                    for k in 0..soft.len() {
                        let delta = if k == class { 1.0 } else { 0.0 };
                        self.grads[z.0][k] += gi * (soft[k] - delta);
                    }
                }
            }
        }
        Ok(())
    }

    /// Gradient of the last `backward` call with respect to a node.
    pub fn grad(&self, id: NodeId) -> &[f64] {
        &self.grads[id.0]
    }

    /// Adds the gradients of all parameter leaves into the store's
    /// accumulators. A parameter bound more than once (shared weights)
    /// receives the sum of its leaf gradients.
    pub fn accumulate_param_grads(&self, store: &mut ParameterStore) -> Result<()> {
        if self.grads.len() != self.nodes.len() {
            return Err(Error::arg("accumulate_param_grads called before backward"));
        }
        for &(index, node) in &self.param_leaves {
            let grad = &self.grads[node.0];
            let target = store.grad_mut_at(index);
            if target.len() != grad.len() {
                return Err(Error::dim("parameter grad", target.len(), grad.len()));
            }
            for (t, &g) in target.iter_mut().zip(grad) {
                *t += g;
            }
        }
        Ok(())
    }
}
