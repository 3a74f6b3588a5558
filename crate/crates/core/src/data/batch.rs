use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numeric::derive_seed;

/// Column-major-by-field block of encoded examples.
///
/// `sparse` is row-major `len x n_sparse`, `dense` row-major `len x n_dense`.
/// `ids` are example ids in the originating dataset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch {
    pub n_sparse: usize,
    pub n_dense: usize,
    pub sparse: Vec<u32>,
    pub dense: Vec<f64>,
    pub scenario: Vec<u32>,
    pub label: Vec<u8>,
    pub ids: Vec<usize>,
}

impl Batch {
    pub fn empty(n_sparse: usize, n_dense: usize) -> Self {
        Self {
            n_sparse,
            n_dense,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }

    pub fn sparse_row(&self, i: usize) -> &[u32] {
        &self.sparse[i * self.n_sparse..(i + 1) * self.n_sparse]
    }

    pub fn dense_row(&self, i: usize) -> &[f64] {
        &self.dense[i * self.n_dense..(i + 1) * self.n_dense]
    }

    /// Indices of field `f` as `usize`, one per example.
    pub fn sparse_column(&self, f: usize) -> Vec<usize> {
        (0..self.len()).map(|i| self.sparse[i * self.n_sparse + f] as usize).collect()
    }

    pub fn push_from(&mut self, other: &Batch, i: usize) {
        self.sparse.extend_from_slice(other.sparse_row(i));
        self.dense.extend_from_slice(other.dense_row(i));
        self.scenario.push(other.scenario[i]);
        self.label.push(other.label[i]);
        self.ids.push(other.ids[i]);
    }

    /// Rows at `positions` (positions within this block, not example ids).
    pub fn select(&self, positions: &[usize]) -> Batch {
        let mut out = Batch::empty(self.n_sparse, self.n_dense);
        out.sparse.reserve(positions.len() * self.n_sparse);
        out.dense.reserve(positions.len() * self.n_dense);
        for &p in positions {
            out.push_from(self, p);
        }
        out
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.label.iter().map(|&y| f64::from(y)).collect()
    }
}

/// Cuts `split` into batches. The order is a pure function of
/// `(shuffle_seed, epoch)`; every example appears exactly once and only the
/// last batch may be short.
pub fn make_batches(split: &Batch, batch_size: usize, shuffle_seed: u64, epoch: usize) -> Vec<Batch> {
    let batch_size = batch_size.max(1);
    let mut order: Vec<usize> = (0..split.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(shuffle_seed, &format!("batches/epoch-{epoch}")));
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(|c| split.select(c)).collect()
}

/// Sequential batches in stored order (evaluation).
pub fn sequential_batches(split: &Batch, batch_size: usize) -> Vec<Batch> {
    let order: Vec<usize> = (0..split.len()).collect();
    order.chunks(batch_size.max(1)).map(|c| split.select(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Batch {
        let mut b = Batch::empty(1, 1);
        for i in 0..n {
            b.sparse.push(i as u32);
            b.dense.push(i as f64);
            b.scenario.push((i % 2) as u32);
            b.label.push((i % 3 == 0) as u8);
            b.ids.push(100 + i);
        }
        b
    }

    #[test]
    fn sizes_4_4_2() {
        let sizes: Vec<_> = make_batches(&toy(10), 4, 1, 0).iter().map(Batch::len).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }

    #[test]
    fn order_is_deterministic_and_epoch_dependent() {
        let a = make_batches(&toy(50), 7, 9, 0);
        let b = make_batches(&toy(50), 7, 9, 0);
        let c = make_batches(&toy(50), 7, 9, 1);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn union_of_ids_equals_split() {
        let split = toy(37);
        let mut ids: Vec<usize> = make_batches(&split, 5, 3, 2).into_iter().flat_map(|b| b.ids).collect();
        ids.sort_unstable();
        assert_eq!(ids, split.ids);
    }
}
