//! Shared activation functions. The slice-level versions are the single
//! source of truth; the graph ops and the public vector API both call them.

use crate::error::{Error, Result};
use crate::numerics::RealVector;

/// Guard added to norms in gradient denominators so the zero vector never
/// produces a division by zero.
pub(crate) const NORM_GUARD: f64 = 1e-12;

/// Numerically stable softmax over a slice (max-subtraction form).
pub(crate) fn softmax_slice(input: &[f64], out: &mut [f64]) {
    debug_assert_eq!(input.len(), out.len());
    let max = input.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(input) {
        let e = (x - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Capsule squashing: scales `x` by `|x|^2 / (1 + |x|^2)` along `x / |x|`,
/// which is `x * |x| / (1 + |x|^2)`. The zero vector maps to itself.
pub(crate) fn squash_slice(input: &[f64], out: &mut [f64]) {
    debug_assert_eq!(input.len(), out.len());
    let sq: f64 = input.iter().map(|v| v * v).sum();
    let norm = sq.sqrt();
    let scale = norm / (1.0 + sq);
    for (o, &x) in out.iter_mut().zip(input) {
        *o = x * scale;
    }
}

/// Softmax of a vector: positive entries summing to one, invariant under
/// adding a constant to every input.
pub fn softmax(v: &RealVector) -> Result<RealVector> {
    let mut out = vec![0.0; v.dim()];
    softmax_slice(v.values(), &mut out);
    RealVector::new(out)
}

/// The squashing nonlinearity: output is parallel to the input with norm
/// `|x|^2 / (1 + |x|^2) < 1`; the zero vector maps to the zero vector.
pub fn squash(v: &RealVector) -> Result<RealVector> {
    let mut out = vec![0.0; v.dim()];
    squash_slice(v.values(), &mut out);
    RealVector::new(out)
}

/// Binary cross-entropy `-[y ln p + (1-y) ln(1-p)]` for `p` strictly inside
/// the unit interval.
pub fn binary_cross_entropy(p: f64, label: bool) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::arg(format!(
            "matching probability must lie strictly in (0, 1), got {p}"
        )));
    }
    Ok(if label { -p.ln() } else { -(1.0 - p).ln() })
}
