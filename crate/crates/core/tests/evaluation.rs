mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swr::data::{gen_synthetic, prepare_splits, SyntheticSpec};
use swr::evaluation::{auc, logloss, profile, welch_ttest, MeanStd, ScenarioReport, LOGLOSS_CLIP};
use swr::models::{analytic_param_count, build_model, Model, ModelConfig, ModelKind};
use swr::training::TrainConfig;

fn pairwise_auc(labels: &[u8], scores: &[f64]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

#[test]
fn rank_auc_matches_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        // Coarse score grids give heavy ties.
        let levels = [2u32, 5, 20, 1000, u32::MAX][case % 5];
        let labels: Vec<u8> = (0..2000).map(|_| u8::from(rng.random_bool(0.3))).collect();
        let scores: Vec<f64> = labels
            .iter()
            .map(|&y| {
                let raw: f64 = rng.random::<f64>() + 0.3 * f64::from(y);
                if levels == u32::MAX {
                    raw
                } else {
                    (raw * f64::from(levels)).floor() / f64::from(levels)
                }
            })
            .collect();
        let got = auc(&labels, &scores).unwrap();
        let want = pairwise_auc(&labels, &scores).unwrap();
        assert!((got - want).abs() < 1e-9, "case {case}: {got} vs {want}");
    }
}

#[test]
fn auc_edge_cases() {
    assert_eq!(auc(&[1, 1], &[0.2, 0.3]), None);
    assert_eq!(auc(&[], &[]), None);
    assert_eq!(auc(&[0, 1], &[0.5, 0.5]), Some(0.5));
    assert_eq!(auc(&[0, 1], &[0.1, 0.9]), Some(1.0));
    assert_eq!(auc(&[1, 0], &[0.1, 0.9]), Some(0.0));
}

#[test]
fn logloss_matches_direct_sum_with_clipping() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels: Vec<u8> = (0..500).map(|_| u8::from(rng.random_bool(0.4))).collect();
    let mut scores: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
    scores[0] = 0.0;
    scores[1] = 1.0;
    let want = labels
        .iter()
        .zip(&scores)
        .map(|(&y, &p)| {
            let p = p.clamp(LOGLOSS_CLIP, 1.0 - LOGLOSS_CLIP);
            -(f64::from(y) * p.ln() + (1.0 - f64::from(y)) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / 500.0;
    assert!((logloss(&labels, &scores) - want).abs() < 1e-12);
    assert!(logloss(&[1, 0], &[0.0, 1.0]).is_finite());
}

#[derive(serde::Deserialize)]
struct WelchCase {
    a: Vec<f64>,
    b: Vec<f64>,
    t: f64,
    df: f64,
    p: f64,
}

#[derive(serde::Deserialize)]
struct WelchFixture {
    cases: Vec<WelchCase>,
}

#[test]
fn welch_matches_scipy_reference() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/welch_scipy.json")).unwrap();
    let fixture: WelchFixture = serde_json::from_str(&text).unwrap();
    assert_eq!(fixture.cases.len(), 50);
    for (i, c) in fixture.cases.iter().enumerate() {
        let r = welch_ttest(&c.a, &c.b).unwrap();
        assert!((r.p - c.p).abs() < 1e-6, "case {i}: p {} vs {}", r.p, c.p);
        assert!((r.t - c.t).abs() < 1e-9 * c.t.abs().max(1.0), "case {i}: t");
        assert!((r.df - c.df).abs() < 1e-9 * c.df.max(1.0), "case {i}: df");
    }
}

#[test]
fn welch_degenerate_rules() {
    assert_eq!(welch_ttest(&[1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap().p, 1.0);
    let r = welch_ttest(&[2.0, 2.0], &[1.0, 1.0]).unwrap();
    assert_eq!(r.p, 0.0);
    assert_eq!(r.t, f64::INFINITY);
    assert!(welch_ttest(&[1.0], &[1.0, 2.0]).is_err());
    let same = welch_ttest(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]).unwrap();
    assert_eq!(same.t, 0.0);
    assert!((same.p - 1.0).abs() < 1e-12);
}

#[test]
fn report_pools_overall_and_weights_scenarios() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 3000;
    let scenario: Vec<u32> = (0..n).map(|i| [0, 0, 1, 2][i % 4]).collect();
    let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
    let scores: Vec<f64> = labels.iter().map(|&y| rng.random::<f64>() * 0.8 + 0.2 * f64::from(y)).collect();
    let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let r = ScenarioReport::from_predictions(&labels, &scores, &scenario, &names).unwrap();
    assert_eq!(r.overall.auc, auc(&labels, &scores));
    assert_eq!(r.scenarios.iter().map(|s| s.metrics.count).sum::<usize>(), n);
    let weighted: f64 = r.scenarios.iter().map(|s| s.metrics.auc.unwrap() * s.metrics.count as f64).sum::<f64>() / n as f64;
    assert!((r.weighted_auc.unwrap() - weighted).abs() < 1e-12);
    let back: ScenarioReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
    assert!(ScenarioReport::from_predictions(&labels, &scores, &scenario[..10], &names).is_err());
}

#[test]
fn mean_std_uses_sample_convention() {
    let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(m.mean, 2.5);
    assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(MeanStd::of(&[3.0]).unwrap().std, 0.0);
    assert!(MeanStd::of(&[]).is_none());
}

#[test]
fn profiler_count_equals_closed_form_for_every_kind() {
    let ds = gen_synthetic(&SyntheticSpec::uniform(3, 0.3), 1200, 8).unwrap();
    let splits = prepare_splits(&ds, 42).unwrap();
    let cfg = TrainConfig {
        batch_size: 256,
        ..TrainConfig::default()
    };
    for kind in ModelKind::ALL {
        let mc = ModelConfig::tiny(kind);
        let mut m: Model<f32> = build_model(&mc, &ds.space, 3, 1).unwrap();
        let rep = profile(&mut m, &splits, &cfg, 1).unwrap();
        assert_eq!(rep.param_count, analytic_param_count(&mc, &ds.space, 3), "{kind}");
        assert!(rep.train_seconds_per_epoch >= 0.0 && rep.infer_ms_per_batch >= 0.0);
    }
}
