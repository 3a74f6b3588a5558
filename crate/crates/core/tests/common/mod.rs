#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swr::data::{Batch, FeatureSpace, SparseField};

pub fn toy_space() -> FeatureSpace {
    FeatureSpace {
        sparse: vec![
            SparseField {
                name: "user".into(),
                vocab: 5,
            },
            SparseField {
                name: "item".into(),
                vocab: 4,
            },
        ],
        dense: vec!["ctx".into()],
        scenario_name: "scenario".into(),
        scenario_labels: vec!["a".into(), "b".into(), "c".into()],
        user_feature: None,
        item_feature: None,
    }
}

/// `n` random rows over [`toy_space`], scenario ids cycling through 0..3.
pub fn toy_batch(n: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Batch::empty(2, 1);
    for i in 0..n {
        b.sparse.push(rng.random_range(0..5));
        b.sparse.push(rng.random_range(0..4));
        b.dense.push(rng.random::<f64>());
        b.scenario.push((i % 3) as u32);
        b.label.push(u8::from(rng.random::<bool>()));
        b.ids.push(i);
    }
    b
}
