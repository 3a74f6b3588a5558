use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Batch, ProcessedDataset};
use crate::error::{Error, Result};
use crate::numeric::derive_seed;

/// Example ids of each part, ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-scenario sizes for an 8:1:1 split.
///
/// Every part of every scenario is the floor or the ceiling of its exact
/// share. Totals are `floor(0.8 n)`, `floor(0.1 n)` and the remainder when
/// that is compatible; otherwise each total is itself the floor or ceiling
/// of its share. Rounding up is decided by a small max-flow over the
/// fractional remainders.
pub fn apportion_811(counts: &[usize]) -> Vec<[usize; 3]> {
    const TENTHS: [usize; 3] = [8, 1, 1];
    let frac = |c: usize, k: usize| (TENTHS[k] * c) % 10;
    let mut parts: Vec<[usize; 3]> = counts.iter().map(|&c| TENTHS.map(|t| t * c / 10)).collect();
    let deficit: Vec<usize> = counts.iter().zip(&parts).map(|(&c, p)| c - p.iter().sum::<usize>()).collect();
    let total: usize = deficit.iter().sum();
    if total == 0 {
        return parts;
    }
    // Column k must take floor(F_k) or ceil(F_k) extra examples, F_k being
    // the sum of its fractional parts.
    let col_frac: Vec<usize> = (0..3).map(|k| counts.iter().map(|&c| frac(c, k)).sum()).collect();
    let floors: Vec<usize> = col_frac.iter().map(|f| f / 10).collect();
    let ups = total - floors.iter().sum::<usize>();
    let n: usize = counts.iter().sum();
    let mut candidates: Vec<[usize; 3]> = Vec::new();
    let base: Vec<usize> = (0..3).map(|k| parts.iter().map(|p| p[k]).sum()).collect();
    if let (Some(tr), Some(va)) = ((n * 8 / 10).checked_sub(base[0]), (n / 10).checked_sub(base[1])) {
        if let Some(te) = total.checked_sub(tr + va) {
            candidates.push([tr, va, te]);
        }
    }
    let mut rounded: Vec<[usize; 3]> = Vec::new();
    for mask in 0u8..8 {
        if mask.count_ones() as usize != ups {
            continue;
        }
        let cap = [0, 1, 2].map(|k| floors[k] + usize::from(mask >> k & 1 == 1));
        if (0..3).all(|k| cap[k] * 10 <= col_frac[k] + 9 && cap[k] * 10 + 9 >= col_frac[k]) {
            rounded.push(cap);
        }
    }
    // Prefer rounding up the columns with the largest remainders.
    rounded.sort_by_key(|cap| std::cmp::Reverse((0..3).map(|k| (cap[k] > floors[k]) as usize * (col_frac[k] % 10)).sum::<usize>()));
    candidates.extend(rounded);
    for cap in candidates {
        if let Some(extra) = assign_extras(counts, &deficit, &cap, frac) {
            for (p, e) in parts.iter_mut().zip(extra) {
                for k in 0..3 {
                    p[k] += e[k];
                }
            }
            return parts;
        }
    }
    unreachable!("a controlled rounding of a two-way table always exists")
}

/// Bipartite flow: scenario `s` hands out `deficit[s]` single examples to
/// distinct parts with a non-zero fractional share; part `k` takes exactly
/// `cap[k]`. Augmenting paths by breadth-first search.
fn assign_extras(counts: &[usize], deficit: &[usize], cap: &[usize; 3], frac: impl Fn(usize, usize) -> usize) -> Option<Vec<[usize; 3]>> {
    let n = counts.len();
    let mut flow = vec![[0usize; 3]; n];
    let mut row_used = vec![0usize; n];
    let mut col_used = [0usize; 3];
    let allowed = |s: usize, k: usize| frac(counts[s], k) > 0;
    let total: usize = deficit.iter().sum();
    for _ in 0..total {
        // Nodes: rows 0..n, columns n..n+3. Search from rows with spare supply.
        let mut prev: Vec<Option<usize>> = vec![None; n + 3];
        let mut seen = vec![false; n + 3];
        let mut queue = std::collections::VecDeque::new();
        for s in 0..n {
            if row_used[s] < deficit[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        let mut end = None;
        while let Some(u) = queue.pop_front() {
            if u < n {
                for k in 0..3 {
                    let v = n + k;
                    if !seen[v] && allowed(u, k) && flow[u][k] == 0 {
                        seen[v] = true;
                        prev[v] = Some(u);
                        if col_used[k] < cap[k] {
                            end = Some(v);
                            break;
                        }
                        queue.push_back(v);
                    }
                }
                if end.is_some() {
                    break;
                }
            } else {
                let k = u - n;
                for s in 0..n {
                    if !seen[s] && flow[s][k] == 1 {
                        seen[s] = true;
                        prev[s] = Some(u);
                        queue.push_back(s);
                    }
                }
            }
        }
        let mut v = end?;
        col_used[v - n] += 1;
        loop {
            let u = prev[v].expect("path");
            if v >= n {
                flow[u][v - n] = 1;
            } else {
                flow[v][u - n] = 0;
            }
            v = u;
            if v < n && prev[v].is_none() {
                row_used[v] += 1;
                break;
            }
        }
    }
    (col_used == *cap).then_some(flow)
}

/// Stratified 8:1:1 split; shuffling within each scenario is a pure function
/// of `seed`.
pub fn split_811(ds: &ProcessedDataset, seed: u64) -> Result<SplitIndices> {
    if ds.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let s_count = ds.space.scenario_count();
    let mut by_scenario: Vec<Vec<usize>> = vec![Vec::new(); s_count];
    for (i, &s) in ds.examples.scenario.iter().enumerate() {
        by_scenario[s as usize].push(ds.examples.ids[i]);
    }
    let counts: Vec<usize> = by_scenario.iter().map(Vec::len).collect();
    for (s, &c) in counts.iter().enumerate() {
        if c > 0 && c < 10 {
            log::warn!("scenario {s} has only {c} examples; 8:1:1 split is best-effort");
        }
    }
    let sizes = apportion_811(&counts);
    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (s, ids) in by_scenario.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("split/scenario-{s}")));
        ids.shuffle(&mut rng);
        let [a, b, _] = sizes[s];
        out.train.extend_from_slice(&ids[..a]);
        out.val.extend_from_slice(&ids[a..a + b]);
        out.test.extend_from_slice(&ids[a + b..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Split by the manifest rule: predefined folds when present, else 8:1:1.
pub fn split_dataset(ds: &ProcessedDataset, seed: u64) -> Result<SplitIndices> {
    match &ds.fold {
        Some(folds) => {
            let mut out = SplitIndices {
                train: Vec::new(),
                val: Vec::new(),
                test: Vec::new(),
            };
            for (i, &f) in folds.iter().enumerate() {
                match f {
                    0 => out.train.push(i),
                    1 => out.val.push(i),
                    2 => out.test.push(i),
                    other => return Err(Error::Data(format!("fold index {other} outside 0..3"))),
                }
            }
            Ok(out)
        }
        None => split_811(ds, seed),
    }
}

/// Min/max of each dense column over the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseStats {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl DenseStats {
    pub fn fit(train: &Batch, names: &[String]) -> Self {
        let d = train.n_dense;
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for i in 0..train.len() {
            for (j, &v) in train.dense_row(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        for j in 0..d {
            if !min[j].is_finite() {
                min[j] = 0.0;
                max[j] = 0.0;
            }
        }
        Self {
            names: names.to_vec(),
            min,
            max,
        }
    }

    /// `(x - min) / (max - min)`; constant columns map to 0.
    pub fn apply(&self, batch: &mut Batch) {
        let d = batch.n_dense;
        if d == 0 {
            return;
        }
        for row in batch.dense.chunks_mut(d) {
            for (j, v) in row.iter_mut().enumerate() {
                let range = self.max[j] - self.min[j];
                *v = if range > 0.0 { (*v - self.min[j]) / range } else { 0.0 };
            }
        }
    }
}

/// Encoded, normalized train/val/test blocks.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Batch,
    pub val: Batch,
    pub test: Batch,
    pub dense_stats: DenseStats,
}

/// Splits, maps sparse values never seen in training to index 0 and
/// normalizes dense columns with training statistics.
pub fn prepare_splits(ds: &ProcessedDataset, seed: u64) -> Result<Splits> {
    let idx = split_dataset(ds, seed)?;
    let mut train = ds.examples.select(&idx.train);
    let mut val = ds.examples.select(&idx.val);
    let mut test = ds.examples.select(&idx.test);
    mask_unseen(&train, &mut val, &ds.space.sparse.iter().map(|f| f.vocab).collect::<Vec<_>>());
    mask_unseen(&train, &mut test, &ds.space.sparse.iter().map(|f| f.vocab).collect::<Vec<_>>());
    let dense_stats = DenseStats::fit(&train, &ds.space.dense);
    dense_stats.apply(&mut train);
    dense_stats.apply(&mut val);
    dense_stats.apply(&mut test);
    Ok(Splits {
        train,
        val,
        test,
        dense_stats,
    })
}

fn mask_unseen(train: &Batch, other: &mut Batch, vocab: &[usize]) {
    let f = train.n_sparse;
    let mut seen: Vec<Vec<bool>> = vocab.iter().map(|&v| vec![false; v]).collect();
    for row in train.sparse.chunks(f.max(1)).take(train.len()) {
        for (j, &v) in row.iter().enumerate() {
            seen[j][v as usize] = true;
        }
    }
    if f == 0 {
        return;
    }
    for row in other.sparse.chunks_mut(f) {
        for (j, v) in row.iter_mut().enumerate() {
            if !seen[j][*v as usize] {
                *v = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_examples_split_8_1_1() {
        assert_eq!(apportion_811(&[10]), vec![[8, 1, 1]]);
    }

    #[test]
    fn movielens_scenario_sizes_keep_exact_totals() {
        let parts = apportion_811(&[210_747, 395_556, 393_906]);
        let totals: Vec<usize> = (0..3).map(|k| parts.iter().map(|p| p[k]).sum()).collect();
        assert_eq!(totals, vec![800_167, 100_020, 100_022]);
    }

    #[test]
    fn incompatible_totals_fall_back_to_rounded_shares() {
        assert_eq!(apportion_811(&[556]), vec![[445, 56, 55]]);
    }

    proptest! {
        #[test]
        fn apportion_totals_and_tolerance(counts in prop::collection::vec(0usize..5000, 1..8)) {
            let parts = apportion_811(&counts);
            let n: usize = counts.iter().sum();
            let totals: Vec<usize> = (0..3).map(|k| parts.iter().map(|p| p[k]).sum()).collect();
            let exact = totals[0] == n * 8 / 10 && totals[1] == n / 10;
            let rounded = [8usize, 1, 1].iter().zip(&totals).all(|(r, &got)| got * 10 + 9 >= r * n && got * 10 <= r * n + 9);
            prop_assert!(exact || rounded, "totals {:?} of {}", totals, n);
            for (p, &c) in parts.iter().zip(&counts) {
                prop_assert_eq!(p[0] + p[1] + p[2], c);
                for (k, r) in [(0usize, 8usize), (1, 1), (2, 1)] {
                    prop_assert!(p[k] * 10 + 9 >= r * c && p[k] * 10 <= r * c + 9, "{:?} of {}", p, c);
                }
            }
        }
    }
}
