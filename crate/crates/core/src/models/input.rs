use crate::data::{Batch, FeatureSpace};
use crate::error::{Error, Result};
use crate::numeric::{Graph, Init, NodeId, ParameterStore, Scalar};

/// Embedding tables for the sparse fields followed by the raw dense values:
/// `x = [e_1 | ... | e_F | dense]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputLayer {
    pub tables: Vec<(String, String)>,
    pub embed_dim: usize,
    pub n_dense: usize,
}

impl InputLayer {
    pub fn register<T: Scalar>(store: &mut ParameterStore<T>, space: &FeatureSpace, embed_dim: usize) -> Result<Self> {
        if space.sparse.is_empty() && space.dense.is_empty() {
            return Err(Error::Config("feature space has no model inputs".into()));
        }
        let mut tables = Vec::with_capacity(space.sparse.len());
        for f in &space.sparse {
            let path = format!("emb.{}", f.name);
            store.add(&path, &[f.vocab, embed_dim], Init::EMBEDDING)?;
            tables.push((path, f.name.clone()));
        }
        Ok(Self {
            tables,
            embed_dim,
            n_dense: space.dense.len(),
        })
    }

    pub fn output_dim(&self) -> usize {
        self.tables.len() * self.embed_dim + self.n_dense
    }

    /// Widths of the input fields in order: one per sparse field, one per dense value.
    pub fn field_widths(&self) -> Vec<usize> {
        let mut w = vec![self.embed_dim; self.tables.len()];
        w.extend(std::iter::repeat_n(1, self.n_dense));
        w
    }

    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, batch: &Batch) -> Result<NodeId> {
        if batch.n_sparse != self.tables.len() || batch.n_dense != self.n_dense {
            return Err(Error::ShapeMismatch {
                op: "input",
                left: vec![self.tables.len(), self.n_dense],
                right: vec![batch.n_sparse, batch.n_dense],
            });
        }
        let mut parts = Vec::with_capacity(self.tables.len() + 1);
        for (f, (path, name)) in self.tables.iter().enumerate() {
            let table = g.param(path)?;
            parts.push(g.embedding(table, &batch.sparse_column(f), name)?);
        }
        if self.n_dense > 0 {
            let dense = batch.dense.iter().map(|&v| T::lit(v)).collect();
            parts.push(g.input(batch.len(), self.n_dense, dense)?);
        }
        if parts.len() == 1 {
            Ok(parts[0])
        } else {
            g.concat(&parts)
        }
    }
}
