use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::ProcessedDataset;

/// Sample standard deviation (n - 1 denominator) over the mean. A single
/// value, an empty slice or a zero mean give 0.
pub fn coefficient_of_variation(counts: &[f64]) -> f64 {
    let n = counts.len();
    if n < 2 {
        return 0.0;
    }
    let mean = counts.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return 0.0;
    }
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt() / mean
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub a: usize,
    pub b: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub items: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub interactions: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub users: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub items: Option<Vec<usize>>,
    pub positive_rate: Vec<f64>,
    pub cov: f64,
    /// Unordered pairs `a < b`.
    pub intersections: Vec<Intersection>,
}

impl ScenarioStats {
    pub fn intersection(&self, i: usize, j: usize) -> Option<&Intersection> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.intersections.iter().find(|x| x.a == a && x.b == b)
    }
}

fn distinct_per_scenario(ds: &ProcessedDataset, field: usize) -> Vec<HashSet<u32>> {
    let mut sets = vec![HashSet::new(); ds.space.scenario_count()];
    let ex = &ds.examples;
    for i in 0..ex.len() {
        sets[ex.scenario[i] as usize].insert(ex.sparse[i * ex.n_sparse + field]);
    }
    sets
}

pub fn scenario_stats(ds: &ProcessedDataset) -> ScenarioStats {
    let s = ds.space.scenario_count();
    let counts = ds.scenario_counts();
    let mut pos = vec![0usize; s];
    for (i, &y) in ds.examples.label.iter().enumerate() {
        pos[ds.examples.scenario[i] as usize] += y as usize;
    }
    let user_sets = ds
        .space
        .user_feature
        .as_deref()
        .and_then(|u| ds.space.sparse_index(u))
        .map(|f| distinct_per_scenario(ds, f));
    let item_sets = ds
        .space
        .item_feature
        .as_deref()
        .and_then(|u| ds.space.sparse_index(u))
        .map(|f| distinct_per_scenario(ds, f));
    let mut intersections = Vec::new();
    for a in 0..s {
        for b in a + 1..s {
            intersections.push(Intersection {
                a,
                b,
                users: user_sets.as_ref().map(|u| u[a].intersection(&u[b]).count()),
                items: item_sets.as_ref().map(|u| u[a].intersection(&u[b]).count()),
            });
        }
    }
    let cf: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    ScenarioStats {
        positive_rate: counts
            .iter()
            .zip(&pos)
            .map(|(&c, &p)| if c == 0 { 0.0 } else { p as f64 / c as f64 })
            .collect(),
        users: user_sets.map(|u| u.iter().map(HashSet::len).collect()),
        items: item_sets.map(|u| u.iter().map(HashSet::len).collect()),
        cov: coefficient_of_variation(&cf),
        interactions: counts,
        intersections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_counts_have_zero_cov() {
        assert_eq!(coefficient_of_variation(&[5.0, 5.0, 5.0]), 0.0);
        assert_eq!(coefficient_of_variation(&[7.0]), 0.0);
    }

    proptest! {
        #[test]
        fn cov_is_scale_invariant(v in prop::collection::vec(1.0f64..1e6, 2..8), k in 0.01f64..100.0) {
            let a = coefficient_of_variation(&v);
            let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
            prop_assert!((a - coefficient_of_variation(&scaled)).abs() < 1e-9);
            prop_assert!(a >= 0.0);
        }
    }
}
