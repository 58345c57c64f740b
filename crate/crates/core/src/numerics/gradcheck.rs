//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::numerics::graph::{Graph, NodeId};
use crate::numerics::params::ParameterStore;

/// Worst observed relative error together with where it occurred.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_param: String,
    pub worst_entry: usize,
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = (analytic.abs() + numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Compares the analytic gradient of a scalar loss against central finite
/// differences for every entry of every parameter, returning the worst
/// relative error.
///
/// `build_loss` must deterministically construct the loss on the provided
/// graph; it is evaluated twice at the base point to detect nondeterminism
/// and twice more per parameter entry for the differences.
pub fn grad_check<F>(
    build_loss: F,
    params: &ParameterStore,
    epsilon: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&ParameterStore, &mut Graph) -> Result<NodeId>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::arg(format!(
            "grad_check epsilon must lie in (0, 1e-2], got {epsilon}"
        )));
    }

    let eval = |store: &ParameterStore| -> Result<f64> {
        let mut graph = Graph::new();
        let loss = build_loss(store, &mut graph)?;
        Ok(graph.scalar_value(loss))
    };

    let base = eval(params)?;
    let again = eval(params)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::arg(
            "loss function is not deterministic: two forward passes differ",
        ));
    }

    // Analytic gradients into a scratch store.
    let mut scratch = params.clone();
    scratch.zero_grads();
    {
        let mut graph = Graph::new();
        let loss = build_loss(&scratch, &mut graph)?;
        graph.backward(loss, 1.0)?;
        graph.accumulate_param_grads(&mut scratch)?;
    }

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_entry: 0,
    };

    for idx in 0..scratch.len() {
        for k in 0..scratch.value_at(idx).len() {
            let original = scratch.value_at(idx)[k];
            scratch.value_mut_at(idx)[k] = original + epsilon;
            let plus = eval(&scratch)?;
            scratch.value_mut_at(idx)[k] = original - epsilon;
            let minus = eval(&scratch)?;
            scratch.value_mut_at(idx)[k] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let analytic = scratch.grad_at(idx)[k];
            let err = relative_error(analytic, numeric);
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_param = scratch.name_at(idx).to_string();
                report.worst_entry = k;
            }
        }
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RealVector;

    #[test]
    fn quadratic_loss_checks_tightly() {
        // loss = 0.5 * |p|^2, analytic gradient p.
        let mut store = ParameterStore::new();
        store
            .insert_vector("p", RealVector::new(vec![0.7, -1.3, 2.1]).unwrap())
            .unwrap();
        let report = grad_check(
            |store, g| {
                let p = g.param(store, "p")?;
                let n = g.sq_norm(p)?;
                Ok(g.scale(n, 0.5))
            },
            &store,
            1e-4,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-7, "{report:?}");
    }

    #[test]
    fn softmax_cross_entropy_checks() {
        let mut store = ParameterStore::new();
        store
            .insert_vector("z", RealVector::new(vec![0.3, -0.8, 1.1, 0.0]).unwrap())
            .unwrap();
        let report = grad_check(
            |store, g| {
                let z = g.param(store, "z")?;
                g.cross_entropy_logits(z, 1)
            },
            &store,
            1e-5,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-5, "{report:?}");
    }

    #[test]
    fn frozen_parameter_has_zero_gradient() {
        let mut store = ParameterStore::new();
        store
            .insert_vector("used", RealVector::new(vec![0.4]).unwrap())
            .unwrap();
        store
            .insert_vector("frozen", RealVector::new(vec![5.0]).unwrap())
            .unwrap();
        let mut scratch = store.clone();
        let mut graph = Graph::new();
        let p = graph.param(&scratch, "used").unwrap();
        let loss = graph.sq_norm(p).unwrap();
        graph.backward(loss, 1.0).unwrap();
        graph.accumulate_param_grads(&mut scratch).unwrap();
        assert_eq!(scratch.grad("frozen").unwrap(), &[0.0]);

        // And grad_check agrees: max error over both params stays tiny.
        let report = grad_check(
            |store, g| {
                let p = g.param(store, "used")?;
                g.sq_norm(p)
            },
            &store,
            1e-4,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-7);
    }

    #[test]
    fn epsilon_validated() {
        let store = ParameterStore::new();
        assert!(grad_check(|_, g| Ok(g.constant_scalar(0.0)), &store, 0.0).is_err());
        assert!(grad_check(|_, g| Ok(g.constant_scalar(0.0)), &store, 0.1).is_err());
    }
}
