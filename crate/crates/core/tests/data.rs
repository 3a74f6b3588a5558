use std::path::Path;

use swr::data::manifest::{bundled, DatasetManifest, BUNDLED};
use swr::data::{
    coefficient_of_variation, gen_synthetic, ingest, make_batches, prepare_splits, read_processed, read_stats, scenario_stats,
    split_811, split_dataset, top_k_scenarios, write_processed, ProcessedDataset, SyntheticSpec,
};
use swr::Error;

fn write(dir: &Path, name: &str, text: &str) {
    let path = dir.join(name);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

fn round_trip(ds: &ProcessedDataset) {
    let dir = tempfile::tempdir().unwrap();
    write_processed(ds, dir.path(), 42).unwrap();
    let back = read_processed(dir.path()).unwrap();
    assert_eq!(&back, ds);
}

/// Three users in scenario 0, 1 and 2 plus one with an age code outside the map.
fn movielens_fixture(dir: &Path) {
    write(dir, "users.dat", "1::F::1::10::48067\n2::M::25::16::70072\n3::M::56::7::55117\n4::F::18::3::02460\n5::M::99::1::11111\n");
    write(
        dir,
        "movies.dat",
        "10::Toy Story (1995)::Animation|Children's|Comedy\n20::Heat (1995)::Action|Crime|Thriller\n30::Casino (1995)::Drama|Thriller\n",
    );
    let mut ratings = String::new();
    for (u, m, r) in [(1, 10, 5), (1, 20, 3), (2, 10, 4), (2, 30, 2), (2, 20, 5), (3, 30, 4), (4, 20, 1), (5, 10, 5)] {
        ratings.push_str(&format!("{u}::{m}::{r}::97830{u}{m}\n"));
    }
    ratings.push_str("garbage line\n");
    write(dir, "ratings.dat", &ratings);
}

#[test]
fn bundled_manifests_parse() {
    for (name, _) in BUNDLED {
        let m = bundled(name).unwrap();
        assert_eq!(m.name, name);
        assert!(m.scenario_count() >= 2);
    }
    assert!(bundled("nope").is_none());
}

#[test]
fn movielens_ingest_maps_ages_and_binarizes_ratings() {
    let dir = tempfile::tempdir().unwrap();
    movielens_fixture(dir.path());
    let ds = ingest(&bundled("movielens").unwrap(), dir.path()).unwrap();
    assert_eq!(ds.len(), 7);
    assert_eq!(ds.report.dropped_unmapped_scenario, 1);
    assert_eq!(ds.report.unparseable, 1);
    assert_eq!(ds.scenario_counts(), vec![3, 3, 1]);
    assert_eq!(ds.examples.label, vec![1, 0, 1, 0, 1, 1, 0]);
    let stats = scenario_stats(&ds);
    assert_eq!(stats.interactions, vec![3, 3, 1]);
    assert_eq!(stats.users.as_ref().unwrap(), &vec![2, 1, 1]);
    assert_eq!(stats.items.as_ref().unwrap(), &vec![2, 3, 1]);
    let names: Vec<&str> = ds.space.sparse.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["user_id", "movie_id", "gender", "occupation", "zip", "genre"]);
    // First genre only: Animation, Action, Drama, plus OOV.
    assert_eq!(ds.space.sparse[5].vocab, 4);
    round_trip(&ds);
}

#[test]
fn processed_files_are_byte_deterministic() {
    let ds = gen_synthetic(&SyntheticSpec::uniform(3, 0.3), 500, 1).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_processed(&ds, a.path(), 42).unwrap();
    write_processed(&ds, b.path(), 42).unwrap();
    for f in ["data.csv", "stats.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    let stats = read_stats(a.path()).unwrap();
    assert_eq!(stats.rows, 500);
    assert_eq!(stats.scenarios.interactions.iter().sum::<usize>(), 500);
    round_trip(&ds);
}

#[test]
fn corrupted_processed_data_is_rejected() {
    let ds = gen_synthetic(&SyntheticSpec::uniform(3, 0.3), 50, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_processed(&ds, dir.path(), 42).unwrap();
    let path = dir.path().join("data.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
    let scen = cells.len() - 2;
    cells[scen] = "9".into();
    lines[1] = cells.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert!(matches!(read_processed(dir.path()), Err(Error::ScenarioOutOfRange { .. })));
}

#[test]
fn delimited_loader_with_folds_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cols = bundled("aliccp").unwrap();
    let names: Vec<&str> = cols.features.iter().map(|f| f.column()).collect();
    let header = format!("click,purchase,{}", names.join(","));
    for (i, file) in ["ali_ccp_train.csv", "ali_ccp_val.csv", "ali_ccp_test.csv"].iter().enumerate() {
        let mut text = header.clone() + "\n";
        for r in 0..4 {
            let vals: Vec<String> = names
                .iter()
                .map(|n| if *n == "301" { format!("{}", 1 + (r % 3)) } else { format!("{}", (r + i) % 3) })
                .collect();
            text.push_str(&format!("{},0,{}\n", r % 2, vals.join(",")));
        }
        write(dir.path(), file, &text);
    }
    let ds = ingest(&cols, dir.path()).unwrap();
    assert_eq!(ds.len(), 12);
    assert_eq!(ds.fold.as_deref().unwrap(), &[0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
    let idx = split_dataset(&ds, 0).unwrap();
    assert_eq!(idx.train, vec![0, 1, 2, 3]);
    assert_eq!(idx.test, vec![8, 9, 10, 11]);
    round_trip(&ds);
}

#[test]
fn tab_delimited_loader_renames_and_prefixes_items() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bookreviews_cleaned.txt", "user_id\tbook_id\trating\tlabels\n1\t7\t4\tx\n2\t8\t2\ty\n");
    write(dir.path(), "musicreviews_cleaned.txt", "user_id\tmusic_id\trating\tlabels\n1\t7\t5\tx\n");
    write(dir.path(), "moviereviews_cleaned.txt", "user_id\tmovie_id\trating\tlabels\n3\t7\t3\tz\n1\t9\t5\tz\n");
    let ds = ingest(&bundled("douban").unwrap(), dir.path()).unwrap();
    assert_eq!(ds.len(), 5);
    assert_eq!(ds.examples.label, vec![1, 0, 1, 0, 1]);
    assert_eq!(ds.scenario_counts(), vec![2, 1, 2]);
    // Item "7" of three platforms stays three distinct items.
    assert_eq!(ds.space.sparse[1].vocab, 6);
    round_trip(&ds);
}

#[test]
fn json_lines_loader_uses_file_constants() {
    let dir = tempfile::tempdir().unwrap();
    let line = |u: &str, a: &str, r: f64| format!("{{\"reviewerID\": \"{u}\", \"asin\": \"{a}\", \"overall\": {r}, \"reviewText\": \"ok\"}}\n");
    write(dir.path(), "reviews_Clothing_Shoes_and_Jewelry_5.json", &(line("A", "x", 5.0) + &line("B", "y", 2.0)));
    write(dir.path(), "reviews_Beauty_5.json", &(line("A", "z", 4.0) + "not json\n"));
    write(dir.path(), "reviews_Health_and_Personal_Care_5.json", &line("C", "x", 3.0));
    let ds = ingest(&bundled("amazon").unwrap(), dir.path()).unwrap();
    assert_eq!(ds.scenario_counts(), vec![2, 1, 1]);
    assert_eq!(ds.examples.label, vec![1, 0, 1, 0]);
    assert_eq!(ds.report.unparseable, 1);
    round_trip(&ds);
}

#[test]
fn mind_loader_expands_impressions() {
    let dir = tempfile::tempdir().unwrap();
    let news = "N1\tsports\tsoccer\tTitle\nN2\tnews\tworld\tTitle\nN3\tfinance\tmarkets\tTitle\n";
    write(dir.path(), "train/news.tsv", news);
    write(dir.path(), "dev/news.tsv", news);
    write(dir.path(), "train/behaviors.tsv", "1\tU1\t11/11/2019 9:05:58 AM\tN1 N2\tN1-1 N2-0 N3-0\n");
    write(dir.path(), "dev/behaviors.tsv", "2\tU2\t11/15/2019 8:55:22 AM\t\tN2-1\n");
    let ds = ingest(&bundled("mind").unwrap(), dir.path()).unwrap();
    assert_eq!(ds.len(), 4);
    assert_eq!(ds.examples.label, vec![1, 0, 0, 1]);
    let counts = ds.scenario_counts();
    assert_eq!((counts[13], counts[11], counts[2]), (1, 2, 1));
    round_trip(&ds);
}

#[test]
fn kuairand_loader_buckets_duration() {
    let dir = tempfile::tempdir().unwrap();
    let header = "user_id,video_id,date,hourmin,time_ms,is_click,is_like,duration_ms,tab\n";
    write(dir.path(), "log_standard_4_08_to_4_21_1k.csv", &format!("{header}0,10,20220408,1400,1,1,0,4000,1\n1,11,20220408,1500,2,0,0,70000,4\n"));
    write(dir.path(), "log_standard_4_22_to_5_08_1k.csv", &format!("{header}0,12,20220422,1600,3,0,0,bad,1\n"));
    let m = bundled("kuairand").unwrap();
    let ds = ingest(&m, dir.path()).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.report.unparseable, 1);
    let dur = ds.space.sparse_index("duration_ms").unwrap();
    assert_eq!(ds.examples.sparse[dur], 1);
    assert_eq!(ds.examples.sparse[ds.examples.n_sparse + dur], 6);
    round_trip(&ds);
}

#[test]
fn missing_declared_column_is_an_error_and_empty_file_warns() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bookreviews_cleaned.txt", "user_id\trating\n1\t4\n");
    write(dir.path(), "musicreviews_cleaned.txt", "");
    write(dir.path(), "moviereviews_cleaned.txt", "");
    let m = bundled("douban").unwrap();
    assert!(matches!(ingest(&m, dir.path()), Err(Error::MissingColumn(c)) if c == "item_id"));
    write(dir.path(), "bookreviews_cleaned.txt", "");
    let ds = ingest(&m, dir.path()).unwrap();
    assert!(ds.is_empty());
    assert!(!ds.report.warnings.is_empty());
}

#[test]
fn manifest_validation_rejects_bad_scenario_maps() {
    let mut v: serde_json::Value = serde_json::from_str(BUNDLED[0].1).unwrap();
    v["scenario_map"] = serde_json::json!({"1": 0, "25": 2});
    assert!(matches!(DatasetManifest::from_json(&v.to_string()), Err(Error::Config(_))));
    v["scenario_map"] = serde_json::json!({"1": 0});
    assert!(DatasetManifest::from_json(&v.to_string()).is_err());
}

#[test]
fn split_contract_holds_on_skewed_synthetic_data() {
    let ds = gen_synthetic(&SyntheticSpec::geometric(5, 0.45, 0.2), 9_973, 3).unwrap();
    let idx = split_811(&ds, 42).unwrap();
    let n = ds.len();
    let mut seen = vec![0u8; n];
    for &i in idx.train.iter().chain(&idx.val).chain(&idx.test) {
        seen[i] += 1;
    }
    assert!(seen.iter().all(|&c| c == 1), "disjoint and exhaustive");
    for (s, &c) in ds.scenario_counts().iter().enumerate() {
        for (part, share) in [(&idx.train, 0.8), (&idx.val, 0.1), (&idx.test, 0.1)] {
            let got = part.iter().filter(|&&i| ds.examples.scenario[i] as usize == s).count();
            assert!((got as f64 - share * c as f64).abs() < 1.0, "scenario {s}: {got} of {c}");
        }
    }
    assert_eq!(split_811(&ds, 42).unwrap(), idx);
    assert_ne!(split_811(&ds, 43).unwrap(), idx);
}

#[test]
fn dense_statistics_come_from_training_rows_only() {
    let ds = gen_synthetic(&SyntheticSpec::uniform(3, 0.3), 2_000, 4).unwrap();
    let splits = prepare_splits(&ds, 42).unwrap();
    let col = |b: &swr::data::Batch| b.dense.iter().step_by(b.n_dense).copied().collect::<Vec<f64>>();
    let train = col(&splits.train);
    assert_eq!(train.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
    assert_eq!(train.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
    let mut again = splits.val.clone();
    let raw = ds.examples.select(&split_811(&ds, 42).unwrap().val);
    again.dense = raw.dense.clone();
    splits.dense_stats.apply(&mut again);
    assert_eq!(again.dense, splits.val.dense);
}

#[test]
fn batches_cover_each_example_once_per_epoch() {
    let ds = gen_synthetic(&SyntheticSpec::uniform(3, 0.3), 1_003, 5).unwrap();
    let batches = make_batches(&ds.examples, 100, 9, 2);
    assert_eq!(batches.len(), 11);
    assert_eq!(batches.last().unwrap().len(), 3);
    let mut ids: Vec<usize> = batches.iter().flat_map(|b| b.ids.clone()).collect();
    ids.sort_unstable();
    assert_eq!(ids, (0..1_003).collect::<Vec<_>>());
    assert_eq!(make_batches(&ds.examples, 100, 9, 2), batches);
    assert_ne!(make_batches(&ds.examples, 100, 9, 3)[0].ids, batches[0].ids);
}

#[test]
fn top_k_keeps_largest_scenarios_renumbered() {
    let ds = gen_synthetic(&SyntheticSpec::geometric(7, 0.7, 0.3), 5_000, 6).unwrap();
    let counts = ds.scenario_counts();
    let top = top_k_scenarios(&ds, 3).unwrap();
    assert_eq!(top.space.scenario_count(), 3);
    assert_eq!(top.scenario_counts(), counts[..3].to_vec());
    assert_eq!(top.len(), counts[..3].iter().sum::<usize>());
    assert!(top_k_scenarios(&ds, 1).is_err());
    assert!(top_k_scenarios(&ds, 8).is_err());
}

#[test]
fn synthetic_rates_match_configuration() {
    let spec = SyntheticSpec {
        base_ctr: vec![0.1, 0.3, 0.5],
        ..SyntheticSpec::uniform(3, 0.3)
    };
    let ds = gen_synthetic(&spec, 100_000, 7).unwrap();
    let stats = scenario_stats(&ds);
    for (got, want) in stats.positive_rate.iter().zip(&spec.base_ctr) {
        assert!((got - want).abs() < 0.01, "{got} vs {want}");
    }
    let mut ids: Vec<u32> = ds.examples.scenario.clone();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids, vec![0, 1, 2]);
    assert_eq!(gen_synthetic(&spec, 1000, 7).unwrap(), gen_synthetic(&spec, 1000, 7).unwrap());
}

#[test]
fn coefficient_of_variation_reproduces_published_values() {
    let cases: [(&[f64], f64); 3] = [
        (&[210_747.0, 395_556.0, 393_906.0], 0.3186),
        (&[198_502.0, 278_677.0, 346_355.0], 0.2696),
        (&[2_407_352.0, 7_760_237.0, 895_385.0, 402_366.0, 183_403.0], 1.3552),
    ];
    for (counts, want) in cases {
        assert!((coefficient_of_variation(counts) - want).abs() < 5e-4);
    }
    assert_eq!(coefficient_of_variation(&[5.0, 5.0, 5.0]), 0.0);
    let scaled: Vec<f64> = cases[0].0.iter().map(|c| c * 3.0).collect();
    assert!((coefficient_of_variation(&scaled) - coefficient_of_variation(cases[0].0)).abs() < 1e-12);
}
