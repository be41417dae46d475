use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Named, ordered parameter set. Order is fixed at construction and is
/// the serialization order of checkpoints.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<Param>,
    by_name: HashMap<String, usize>,
    grads_populated: bool,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter {name}"
        );
        let id = self.entries.len();
        self.by_name.insert(name.to_string(), id);
        let grad = Tensor::zeros(value.shape().to_vec());
        self.entries.push(Param {
            name: name.to_string(),
            value,
            grad,
        });
        ParamId(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.entries[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.entries {
            p.grad.data_mut().fill(0.0);
        }
        self.grads_populated = false;
    }

    /// Accumulate `scale * grads[i]` into each parameter's grad slot.
    /// `grads` is indexed like the store; `None` entries are untouched.
    pub fn accumulate_grads(&mut self, grads: &[Option<Tensor>], scale: f64) {
        debug_assert_eq!(grads.len(), self.entries.len());
        for (p, g) in self.entries.iter_mut().zip(grads) {
            if let Some(g) = g {
                crate::autodiff::kernels::axpy(scale, g.data(), p.grad.data_mut());
            }
        }
        self.grads_populated = true;
    }

    pub fn grads_populated(&self) -> bool {
        self.grads_populated
    }

    pub fn mark_grads_populated(&mut self) {
        self.grads_populated = true;
    }

    /// Bit-exact copy of another store's values (shapes must agree).
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Compatibility(format!(
                "parameter count mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for (p, q) in self.entries.iter_mut().zip(&other.entries) {
            if p.value.shape() != q.value.shape() || p.name != q.name {
                return Err(Error::Compatibility(format!(
                    "parameter {} incompatible with {}",
                    p.name, q.name
                )));
            }
            p.value = q.value.clone();
        }
        Ok(())
    }
}
