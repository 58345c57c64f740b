//! Named parameter tensors with matching gradient accumulators.

use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{RealMatrix, RealVector};

/// Shape of a stored parameter. Vectors are kept distinct from single-row
/// matrices so checkpoints can reconstruct the original type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ParamShape {
    Vector(usize),
    Matrix(usize, usize),
}

impl ParamShape {
    pub fn len(&self) -> usize {
        match self {
            ParamShape::Vector(d) => *d,
            ParamShape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
struct ParamEntry {
    shape: ParamShape,
    value: Vec<f64>,
    grad: Vec<f64>,
}

/// All learnable tensors of a model, addressed by name. Each parameter
/// carries a gradient accumulator of identical shape; accumulators are
/// zeroed by the optimizer after every step.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    entries: IndexMap<String, ParamEntry>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_vector(&mut self, name: &str, v: RealVector) -> Result<usize> {
        let shape = ParamShape::Vector(v.dim());
        self.insert_raw(name, shape, v.into_values())
    }

    pub fn insert_matrix(&mut self, name: &str, m: RealMatrix) -> Result<usize> {
        let shape = ParamShape::Matrix(m.rows(), m.cols());
        self.insert_raw(name, shape, m.values().to_vec())
    }

    pub(crate) fn insert_raw(
        &mut self,
        name: &str,
        shape: ParamShape,
        value: Vec<f64>,
    ) -> Result<usize> {
        if self.entries.contains_key(name) {
            return Err(Error::arg(format!("duplicate parameter name '{name}'")));
        }
        if value.len() != shape.len() {
            return Err(Error::dim(format!("parameter '{name}'"), shape.len(), value.len()));
        }
        let grad = vec![0.0; value.len()];
        let (idx, _) = self.entries.insert_full(
            name.to_string(),
            ParamEntry { shape, value, grad },
        );
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar entries across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(|e| e.value.len()).sum()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.get_index_of(name)
    }

    pub fn name_at(&self, index: usize) -> &str {
        self.entries.get_index(index).expect("parameter index").0
    }

    pub fn shape(&self, name: &str) -> Option<ParamShape> {
        self.entries.get(name).map(|e| e.shape)
    }

    pub fn shape_at(&self, index: usize) -> ParamShape {
        self.entries.get_index(index).expect("parameter index").1.shape
    }

    pub fn value(&self, name: &str) -> Option<&[f64]> {
        self.entries.get(name).map(|e| e.value.as_slice())
    }

    pub fn value_at(&self, index: usize) -> &[f64] {
        &self.entries.get_index(index).expect("parameter index").1.value
    }

    pub fn value_mut_at(&mut self, index: usize) -> &mut [f64] {
        &mut self
            .entries
            .get_index_mut(index)
            .expect("parameter index")
            .1
            .value
    }

    pub fn grad(&self, name: &str) -> Option<&[f64]> {
        self.entries.get(name).map(|e| e.grad.as_slice())
    }

    pub fn grad_at(&self, index: usize) -> &[f64] {
        &self.entries.get_index(index).expect("parameter index").1.grad
    }

    pub fn grad_mut_at(&mut self, index: usize) -> &mut [f64] {
        &mut self
            .entries
            .get_index_mut(index)
            .expect("parameter index")
            .1
            .grad
    }

    /// Fetches a matrix-shaped parameter as a `RealMatrix`.
    pub fn matrix(&self, name: &str) -> Result<RealMatrix> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| Error::arg(format!("unknown parameter '{name}'")))?;
        match entry.shape {
            ParamShape::Matrix(r, c) => RealMatrix::new(r, c, entry.value.clone()),
            ParamShape::Vector(_) => Err(Error::arg(format!("parameter '{name}' is not a matrix"))),
        }
    }

    /// Fetches a vector-shaped parameter as a `RealVector`.
    pub fn vector(&self, name: &str) -> Result<RealVector> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| Error::arg(format!("unknown parameter '{name}'")))?;
        match entry.shape {
            ParamShape::Vector(_) => RealVector::new(entry.value.clone()),
            ParamShape::Matrix(..) => Err(Error::arg(format!("parameter '{name}' is not a vector"))),
        }
    }

    pub fn zero_grads(&mut self) {
        for entry in self.entries.values_mut() {
            entry.grad.fill(0.0);
        }
    }

    /// Snapshot of all parameter values, in store order.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.entries.values().map(|e| e.value.clone()).collect()
    }

    /// Restores values from a snapshot taken on an identically laid-out store.
    pub fn restore(&mut self, snapshot: &[Vec<f64>]) -> Result<()> {
        if snapshot.len() != self.entries.len() {
            return Err(Error::dim("snapshot restore", self.entries.len(), snapshot.len()));
        }
        for (entry, saved) in self.entries.values_mut().zip(snapshot) {
            if entry.value.len() != saved.len() {
                return Err(Error::dim("snapshot entry", entry.value.len(), saved.len()));
            }
            entry.value.copy_from_slice(saved);
        }
        Ok(())
    }
}

/// Seeded initializer drawing from a zero-mean uniform distribution scaled
/// by `1/sqrt(fan_in)`.
pub struct ParamInit {
    rng: ChaCha8Rng,
}

impl ParamInit {
    pub fn new(seed: u64) -> Self {
        ParamInit {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, fan_in: usize) -> Result<RealMatrix> {
        let scale = 1.0 / (fan_in.max(1) as f64).sqrt();
        let values = (0..rows * cols)
            .map(|_| self.rng.gen_range(-scale..=scale))
            .collect();
        RealMatrix::new(rows, cols, values)
    }

    pub fn vector(&mut self, dim: usize, fan_in: usize) -> Result<RealVector> {
        let scale = 1.0 / (fan_in.max(1) as f64).sqrt();
        let values = (0..dim).map(|_| self.rng.gen_range(-scale..=scale)).collect();
        RealVector::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut store = ParameterStore::new();
        store
            .insert_vector("a", RealVector::zeros(2).unwrap())
            .unwrap();
        assert!(store
            .insert_vector("a", RealVector::zeros(2).unwrap())
            .is_err());
    }

    #[test]
    fn grads_match_param_shapes_and_zero() {
        let mut store = ParameterStore::new();
        let idx = store
            .insert_matrix("w", RealMatrix::zeros(2, 3).unwrap())
            .unwrap();
        assert_eq!(store.grad_at(idx).len(), 6);
        store.grad_mut_at(idx)[4] = 1.5;
        store.zero_grads();
        assert_eq!(store.grad_at(idx), &[0.0; 6]);
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let mut a = ParamInit::new(9);
        let mut b = ParamInit::new(9);
        assert_eq!(
            a.matrix(3, 4, 3).unwrap().values(),
            b.matrix(3, 4, 3).unwrap().values()
        );
    }

    #[test]
    fn snapshot_roundtrip() {
        let mut store = ParameterStore::new();
        store
            .insert_vector("v", RealVector::new(vec![1.0, 2.0]).unwrap())
            .unwrap();
        let snap = store.snapshot();
        store.value_mut_at(0)[0] = 99.0;
        store.restore(&snap).unwrap();
        assert_eq!(store.value_at(0), &[1.0, 2.0]);
    }
}
