use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::numeric::{init_values, Init, Scalar, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry<T> {
    pub tensor: Tensor<T>,
    /// Non-trainable entries (running buffers such as cluster centroids) are
    /// checkpointed and counted but never touched by the optimizer.
    pub trainable: bool,
}

/// Ordered map of named parameters. Iteration follows insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterStore<T> {
    entries: IndexMap<String, ParamEntry<T>>,
    rng_seed: u64,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            entries: IndexMap::new(),
            rng_seed,
        }
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Registers a parameter initialized from `(rng_seed, path, shape)`.
    pub fn add(&mut self, path: &str, shape: &[usize], init: Init) -> Result<usize> {
        let numel = shape.iter().product();
        let values = init_values(self.rng_seed, path, numel, init);
        let mut tensor = Tensor::new(shape.to_vec(), values)?;
        tensor.requires_grad = true;
        self.insert(path, tensor, true)
    }

    pub fn add_buffer(&mut self, path: &str, shape: &[usize], init: Init) -> Result<usize> {
        let numel = shape.iter().product();
        let values = init_values(self.rng_seed, path, numel, init);
        self.insert(path, Tensor::new(shape.to_vec(), values)?, false)
    }

    pub fn insert(&mut self, path: &str, tensor: Tensor<T>, trainable: bool) -> Result<usize> {
        if self.entries.contains_key(path) {
            return Err(Error::ParamMismatch(format!("duplicate parameter path `{path}`")));
        }
        let (idx, _) = self
            .entries
            .insert_full(path.to_string(), ParamEntry { tensor, trainable });
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, path: &str) -> Option<usize> {
        self.entries.get_index_of(path)
    }

    pub fn get(&self, path: &str) -> Option<&Tensor<T>> {
        self.entries.get(path).map(|e| &e.tensor)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Tensor<T>> {
        self.entries.get_mut(path).map(|e| &mut e.tensor)
    }

    pub fn require(&self, path: &str) -> Result<&Tensor<T>> {
        self.get(path)
            .ok_or_else(|| Error::ParamMismatch(format!("no parameter `{path}`")))
    }

    pub fn entry(&self, idx: usize) -> (&str, &ParamEntry<T>) {
        let (k, v) = self.entries.get_index(idx).expect("parameter index in range");
        (k.as_str(), v)
    }

    pub fn entry_mut(&mut self, idx: usize) -> (&str, &mut ParamEntry<T>) {
        let (k, v) = self
            .entries
            .get_index_mut(idx)
            .expect("parameter index in range");
        (k.as_str(), v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamEntry<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn paths(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    /// Total number of scalars over all entries.
    pub fn total_count(&self) -> usize {
        self.entries.values().map(|e| e.tensor.numel()).sum()
    }

    pub fn trainable_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.trainable)
            .map(|e| e.tensor.numel())
            .sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParameterStore<U> {
        ParameterStore {
            entries: self
                .entries
                .iter()
                .map(|(k, e)| {
                    (
                        k.clone(),
                        ParamEntry {
                            tensor: e.tensor.cast(),
                            trainable: e.trainable,
                        },
                    )
                })
                .collect(),
            rng_seed: self.rng_seed,
        }
    }

    /// Copies values from `other`, which must have identical paths and shapes.
    pub fn copy_values_from(&mut self, other: &ParameterStore<T>) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::ParamMismatch(format!(
                "expected {} parameters, found {}",
                self.len(),
                other.len()
            )));
        }
        for ((pa, ea), (pb, eb)) in self.entries.iter_mut().zip(other.entries.iter()) {
            if pa != pb || ea.tensor.shape() != eb.tensor.shape() {
                return Err(Error::ParamMismatch(format!(
                    "`{pa}` {:?} does not match `{pb}` {:?}",
                    ea.tensor.shape(),
                    eb.tensor.shape()
                )));
            }
            ea.tensor.values_mut().copy_from_slice(eb.tensor.values());
        }
        Ok(())
    }
}

/// Dense gradients aligned with a [`ParameterStore`] by index.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn new(len: usize) -> Self {
        Self {
            grads: vec![None; len],
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&[T]> {
        self.grads.get(idx).and_then(|g| g.as_deref())
    }

    pub fn set(&mut self, idx: usize, grad: Vec<T>) {
        self.grads[idx] = Some(grad);
    }

    pub fn by_path<'a>(&'a self, store: &ParameterStore<T>, path: &str) -> Option<&'a [T]> {
        store.index_of(path).and_then(|i| self.get(i))
    }

    /// Global L2 norm over all present gradients.
    pub fn norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .map(|v| v.as_f64() * v.as_f64())
            .sum::<f64>()
            .sqrt()
    }
}
