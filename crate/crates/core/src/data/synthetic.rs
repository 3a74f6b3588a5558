//! Multi-scenario click data with a known structure.
//!
//! Each row's logit is
//! `b_s + shared(u, i) + sign_s * specific(u, i) + dense_scale * (ctx - 0.5)`
//! where `shared` combines user/item biases and a latent dot product common to
//! all scenarios, `specific` is a second user/item effect whose sign flips
//! with the scenario parity, and `b_s` is solved per scenario so that the
//! expected click rate equals the configured base rate.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Batch, FeatureSpace, IngestReport, ProcessedDataset, SparseField};
use crate::error::{Error, Result};
use crate::numeric::{derive_seed, sigmoid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Target click rate per scenario; its length is the scenario count.
    pub base_ctr: Vec<f64>,
    /// Relative scenario sizes (uniform when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_weights: Option<Vec<f64>>,
    pub n_users: usize,
    pub n_items: usize,
    pub latent_dim: usize,
    pub shared_scale: f64,
    pub specific_scale: f64,
    pub dense_scale: f64,
}

impl SyntheticSpec {
    pub fn uniform(scenarios: usize, base_ctr: f64) -> Self {
        Self {
            base_ctr: vec![base_ctr; scenarios],
            scenario_weights: None,
            n_users: 2000,
            n_items: 1000,
            latent_dim: 4,
            shared_scale: 1.0,
            specific_scale: 1.5,
            dense_scale: 0.5,
        }
    }

    /// Scenario `s` gets weight `ratio^s`, so ids are ordered by size.
    pub fn geometric(scenarios: usize, ratio: f64, base_ctr: f64) -> Self {
        Self {
            scenario_weights: Some((0..scenarios).map(|s| ratio.powi(s as i32)).collect()),
            ..Self::uniform(scenarios, base_ctr)
        }
    }

    pub fn scenario_count(&self) -> usize {
        self.base_ctr.len()
    }

    fn validate(&self) -> Result<()> {
        let s = self.scenario_count();
        if s < 2 {
            return Err(Error::Config("synthetic data needs at least 2 scenarios".into()));
        }
        if self.base_ctr.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Config("base click rates must lie in (0, 1)".into()));
        }
        if let Some(w) = &self.scenario_weights {
            if w.len() != s || w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Config("scenario_weights must be positive, one per scenario".into()));
            }
        }
        if self.n_users == 0 || self.n_items == 0 || self.latent_dim == 0 {
            return Err(Error::Config("n_users, n_items and latent_dim must be positive".into()));
        }
        Ok(())
    }
}

const USER_GROUPS: usize = 10;
const ITEM_CATS: usize = 20;

/// Intercept `b` with `mean(sigmoid(b + eta)) == target`, by bisection.
fn solve_intercept(etas: &[f64], target: f64) -> f64 {
    if etas.is_empty() {
        return (target / (1.0 - target)).ln();
    }
    let mean_at = |b: f64| etas.iter().map(|&e| sigmoid(b + e)).sum::<f64>() / etas.len() as f64;
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn gen_synthetic(spec: &SyntheticSpec, n_rows: usize, seed: u64) -> Result<ProcessedDataset> {
    spec.validate()?;
    let s_count = spec.scenario_count();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synthetic"));
    let k = spec.latent_dim;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let draw = |n: usize, scale: f64, rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| scale * unit.sample(rng)).collect() };
    let latent_scale = 1.0 / (k as f64).sqrt();
    let p = draw(spec.n_users * k, latent_scale.sqrt(), &mut rng);
    let q = draw(spec.n_items * k, latent_scale.sqrt(), &mut rng);
    let bu = draw(spec.n_users, 0.5, &mut rng);
    let bi = draw(spec.n_items, 0.5, &mut rng);
    let cu = draw(spec.n_users, std::f64::consts::FRAC_1_SQRT_2, &mut rng);
    let ci = draw(spec.n_items, std::f64::consts::FRAC_1_SQRT_2, &mut rng);

    let weights = spec.scenario_weights.clone().unwrap_or_else(|| vec![1.0; s_count]);
    let pick = WeightedIndex::new(&weights).map_err(|e| Error::Config(e.to_string()))?;

    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let s = pick.sample(&mut rng);
        let u = rng.random_range(0..spec.n_users);
        let i = rng.random_range(0..spec.n_items);
        let ctx: f64 = rng.random();
        let dot: f64 = (0..k).map(|j| p[u * k + j] * q[i * k + j]).sum();
        let shared = spec.shared_scale * (bu[u] + bi[i] + dot);
        let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
        let specific = sign * spec.specific_scale * (cu[u] + ci[i]);
        let eta = shared + specific + spec.dense_scale * (ctx - 0.5);
        rows.push((s, u, i, ctx, eta));
    }
    let intercepts: Vec<f64> = (0..s_count)
        .map(|s| {
            let etas: Vec<f64> = rows.iter().filter(|r| r.0 == s).map(|r| r.4).collect();
            solve_intercept(&etas, spec.base_ctr[s])
        })
        .collect();

    let mut ex = Batch::empty(4, 1);
    for (id, &(s, u, i, ctx, eta)) in rows.iter().enumerate() {
        let prob = sigmoid(intercepts[s] + eta);
        let y = u8::from(rng.random::<f64>() < prob);
        ex.sparse.extend_from_slice(&[
            u as u32 + 1,
            i as u32 + 1,
            (u % USER_GROUPS) as u32 + 1,
            (i % ITEM_CATS) as u32 + 1,
        ]);
        ex.dense.push(ctx);
        ex.scenario.push(s as u32);
        ex.label.push(y);
        ex.ids.push(id);
    }
    let field = |name: &str, vocab: usize| SparseField {
        name: name.to_string(),
        vocab,
    };
    Ok(ProcessedDataset {
        name: format!("synthetic-s{s_count}"),
        space: FeatureSpace {
            sparse: vec![
                field("user_id", spec.n_users + 1),
                field("item_id", spec.n_items + 1),
                field("user_group", USER_GROUPS + 1),
                field("item_cat", ITEM_CATS + 1),
            ],
            dense: vec!["ctx".to_string()],
            scenario_name: "scenario".to_string(),
            scenario_labels: (0..s_count).map(|s| s.to_string()).collect(),
            user_feature: Some("user_id".to_string()),
            item_feature: Some("item_id".to_string()),
        },
        examples: ex,
        fold: None,
        report: IngestReport {
            rows_read: n_rows,
            kept: n_rows,
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_hits_target() {
        let etas: Vec<f64> = (0..1000).map(|i| (i as f64 / 100.0).sin() * 2.0).collect();
        let b = solve_intercept(&etas, 0.3);
        let m = etas.iter().map(|&e| sigmoid(b + e)).sum::<f64>() / 1000.0;
        assert!((m - 0.3).abs() < 1e-9);
    }

    #[test]
    fn three_scenarios_give_ids_0_1_2() {
        let ds = gen_synthetic(&SyntheticSpec::uniform(3, 0.2), 3000, 5).unwrap();
        let mut ids: Vec<u32> = ds.examples.scenario.clone();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(gen_synthetic(&SyntheticSpec::uniform(3, 1.0), 10, 0).is_err());
        assert!(gen_synthetic(&SyntheticSpec::uniform(1, 0.5), 10, 0).is_err());
    }
}
