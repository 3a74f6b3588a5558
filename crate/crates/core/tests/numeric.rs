use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swr::numeric::{
    adam_step, checkpoint, dense_layer, grad_check, Activation, AdamConfig, AdamState, GradCheckOptions, Gradients, Graph,
    Init, NodeId, ParameterStore, Tensor,
};
use swr::Error;

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn store_with(entries: &[(&str, Vec<usize>, Vec<f64>)]) -> ParameterStore<f64> {
    let mut s = ParameterStore::new(0);
    for (path, shape, values) in entries {
        s.insert(path, Tensor::new(shape.clone(), values.clone()).unwrap(), true).unwrap();
    }
    s
}

/// `sum(out * r)` for a fixed random `r`, so every output entry matters.
fn project(g: &mut Graph<f64>, out: NodeId, seed: u64) -> swr::Result<NodeId> {
    let (r, c) = g.shape(out);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = g.input(r, c, random(&mut rng, r * c))?;
    let p = g.mul(out, w)?;
    g.sum_all(p)
}

const PRIMITIVE_TOL: f64 = 1e-6;

fn check(store: &mut ParameterStore<f64>, f: impl Fn(&mut Graph<f64>) -> swr::Result<NodeId>) -> f64 {
    let report = grad_check(store, f, GradCheckOptions::default()).unwrap();
    assert!(report.checked > 0);
    report.max_rel_err
}

#[test]
fn embedding_copies_rows_and_accumulates_duplicates() {
    let mut s = ParameterStore::<f64>::new(0);
    s.insert("t", Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap(), true)
        .unwrap();
    let mut g = Graph::new(&s);
    let t = g.param("t").unwrap();
    let e = g.embedding(t, &[2], "f").unwrap();
    assert_eq!(g.value(e), &[5.0, 6.0]);

    let e = g.embedding(t, &[0, 0], "f").unwrap();
    let up = g.input(2, 2, vec![1.0, 1.0, 2.0, 2.0]).unwrap();
    let p = g.mul(e, up).unwrap();
    let loss = g.sum_all(p).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(&grads.by_path(&s, "t").unwrap()[..2], &[3.0, 3.0]);
}

#[test]
fn embedding_out_of_range_names_feature() {
    let s = store_with(&[("t", vec![3, 2], vec![0.0; 6])]);
    let mut g = Graph::new(&s);
    let t = g.param("t").unwrap();
    let err = g.embedding(t, &[3], "movie_id").unwrap_err();
    assert!(matches!(err, Error::IndexOutOfRange { ref feature, index: 3, vocab: 3 } if feature == "movie_id"));
}

#[test]
fn embedding_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut s = store_with(&[("t", vec![100, 16], random(&mut rng, 1600))]);
    let idx: Vec<usize> = (0..30).map(|_| rng.random_range(0..100)).collect();
    let err = check(&mut s, |g| {
        let t = g.param("t")?;
        let e = g.embedding(t, &idx, "f")?;
        project(g, e, 2)
    });
    assert!(err < PRIMITIVE_TOL, "{err}");
}

#[test]
fn dense_layer_closed_forms() {
    let s = store_with(&[]);
    let mut g = Graph::new(&s);
    let x = g.input(1, 2, vec![1.0, -1.0]).unwrap();
    let w = g.input(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let b = g.input(1, 2, vec![0.0, 0.0]).unwrap();
    let id = dense_layer(&mut g, x, w, b, Activation::Identity).unwrap();
    assert_eq!(g.value(id), &[1.0, -1.0]);
    let r = dense_layer(&mut g, x, w, b, Activation::Relu).unwrap();
    assert_eq!(g.value(r), &[1.0, 0.0]);
    let bad = g.input(3, 2, vec![0.0; 6]).unwrap();
    assert!(matches!(
        dense_layer(&mut g, x, bad, b, Activation::Identity),
        Err(Error::ShapeMismatch { .. })
    ));
}

#[test]
fn dense_layer_gradients_for_every_activation() {
    for act in [Activation::Identity, Activation::Relu, Activation::Sigmoid] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = store_with(&[
            ("x", vec![4, 8], random(&mut rng, 32)),
            ("w", vec![8, 3], random(&mut rng, 24)),
            ("b", vec![3], random(&mut rng, 3)),
        ]);
        let err = check(&mut s, |g| {
            let (x, w, b) = (g.param("x")?, g.param("w")?, g.param("b")?);
            let out = dense_layer(g, x, w, b, act)?;
            project(g, out, 4)
        });
        assert!(err < PRIMITIVE_TOL, "{act:?}: {err}");
    }
}

#[test]
fn remaining_primitive_gradients() {
    type Case = (&'static str, fn(&mut Graph<f64>, NodeId, NodeId) -> swr::Result<NodeId>);
    let cases: [Case; 13] = [
        ("softmax", |g, a, _| g.softmax(a)),
        ("tanh", |g, a, _| g.tanh(a)),
        ("sub", |g, a, b| g.sub(a, b)),
        ("mul", |g, a, b| g.mul(a, b)),
        ("mul_row", |g, a, b| {
            let r = g.slice_cols(b, 0, 5)?;
            let r = g.gather_rows(r, &[0])?;
            g.mul(a, r)
        }),
        ("mul_col", |g, a, b| {
            let c = g.slice_cols(b, 1, 1)?;
            g.mul(a, c)
        }),
        ("add_scalar", |g, a, b| {
            let c = g.slice_cols(b, 2, 1)?;
            let c = g.gather_rows(c, &[1])?;
            g.add(a, c)
        }),
        ("affine", |g, a, _| g.affine(a, -1.5, 0.25)),
        ("concat_slice", |g, a, b| {
            let c = g.concat(&[a, b])?;
            g.slice_cols(c, 3, 4)
        }),
        ("gather_scatter", |g, a, b| {
            let p = g.gather_rows(a, &[0, 2])?;
            let q = g.gather_rows(b, &[1, 3])?;
            g.scatter_rows(4, &[(p, vec![3, 0]), (q, vec![1, 2])])
        }),
        ("reshape_matmul", |g, a, b| {
            let r = g.reshape(b, 5, 4)?;
            g.matmul(a, r)
        }),
        ("layer_norm", |g, a, _| g.layer_norm(a, 1e-5)),
        ("bce", |g, a, _| {
            let z = g.slice_cols(a, 0, 1)?;
            g.bce_with_logits(z, &[1.0, 0.0, 1.0, 0.0])
        }),
    ];
    for (name, f) in cases {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = store_with(&[("a", vec![4, 5], random(&mut rng, 20)), ("b", vec![4, 5], random(&mut rng, 20))]);
        let err = check(&mut s, |g| {
            let (a, b) = (g.param("a")?, g.param("b")?);
            let out = f(g, a, b)?;
            project(g, out, 8)
        });
        assert!(err < PRIMITIVE_TOL, "{name}: {err}");
    }
}

#[test]
fn clamp_and_relu_gradients_away_from_kinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let values: Vec<f64> = random(&mut rng, 20).into_iter().map(|v| if v.abs() < 0.05 { 0.3 } else { v }).collect();
    let mut s = store_with(&[("a", vec![4, 5], values)]);
    let err = check(&mut s, |g| {
        let a = g.param("a")?;
        let r = g.relu(a)?;
        let c = g.clamp(a, -0.5, 0.5)?;
        let sg = g.sigmoid(a)?;
        let t = g.add(r, c)?;
        let t = g.add(t, sg)?;
        project(g, t, 10)
    });
    assert!(err < PRIMITIVE_TOL, "{err}");
}

#[test]
fn softmax_closed_forms_and_stability() {
    let s = store_with(&[]);
    let mut g = Graph::new(&s);
    let x = g.input(1, 2, vec![0.0, 0.0]).unwrap();
    let y = g.softmax(x).unwrap();
    assert_eq!(g.value(y), &[0.5, 0.5]);
    let x = g.input(1, 2, vec![2f64.ln(), 0.0]).unwrap();
    let y = g.softmax(x).unwrap();
    assert!((g.value(y)[0] - 2.0 / 3.0).abs() < 1e-15 && (g.value(y)[1] - 1.0 / 3.0).abs() < 1e-15);

    // exp(-1e4) underflows to 0 in every precision, so the oracle is exact.
    let x = g.input(1, 3, vec![1e4, -1e4, 1e4]).unwrap();
    let y = g.softmax(x).unwrap();
    assert_eq!(g.value(y), &[0.5, 0.0, 0.5]);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let row = random(&mut rng, 6);
    let shifted: Vec<f64> = row.iter().map(|v| v + 123.0).collect();
    let a = g.input(1, 6, row).unwrap();
    let b = g.input(1, 6, shifted).unwrap();
    let (a, b) = (g.softmax(a).unwrap(), g.softmax(b).unwrap());
    let sum: f64 = g.value(a).iter().sum();
    assert!((sum - 1.0).abs() < 1e-6);
    for (p, q) in g.value(a).iter().zip(g.value(b)) {
        assert!((p - q).abs() < 1e-9);
    }
}

#[test]
fn adam_matches_scalar_oracle_on_quadratic() {
    let cfg = AdamConfig::default();
    let mut s = store_with(&[("theta", vec![1], vec![1.0])]);
    let mut state = AdamState::new(&s, cfg);
    let (mut theta, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    for t in 1..=5 {
        let grad = 2.0 * s.get("theta").unwrap().values()[0];
        let mut grads = Gradients::new(1);
        grads.set(0, vec![grad]);
        adam_step(&mut s, &mut state, &grads).unwrap();

        let gr = 2.0 * theta;
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * gr;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * gr * gr;
        let mh = m / (1.0 - cfg.beta1.powi(t));
        let vh = v / (1.0 - cfg.beta2.powi(t));
        theta -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        assert!((s.get("theta").unwrap().values()[0] - theta).abs() < 1e-12, "step {t}");
    }
    assert_eq!(state.t, 5);
}

#[test]
fn non_finite_values_are_reported_with_node() {
    let s = store_with(&[]);
    let mut g = Graph::new(&s);
    let x = g.input(1, 1, vec![f64::MAX]).unwrap();
    let err = g.affine(x, 10.0, 0.0).unwrap_err();
    assert!(matches!(err, Error::NonFinite { node: 1, .. }), "{err}");
}

#[test]
fn initialization_is_pure_in_seed_path_and_shape() {
    let mut a = ParameterStore::<f32>::new(5);
    let mut b = ParameterStore::<f32>::new(5);
    a.add("x.w", &[3, 4], Init::FanIn(3)).unwrap();
    a.add("y.w", &[2, 2], Init::FanIn(2)).unwrap();
    b.add("y.w", &[2, 2], Init::FanIn(2)).unwrap();
    b.add("x.w", &[3, 4], Init::FanIn(3)).unwrap();
    assert_eq!(a.get("x.w"), b.get("x.w"));
    assert_eq!(a.get("y.w"), b.get("y.w"));
    assert_eq!(a.total_count(), 16);
    let mut c = ParameterStore::<f32>::new(6);
    c.add("x.w", &[3, 4], Init::FanIn(3)).unwrap();
    assert_ne!(a.get("x.w"), c.get("x.w"));
}

#[test]
fn checkpoint_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = ParameterStore::<f32>::new(3);
    s.add("emb.user", &[7, 4], Init::EMBEDDING).unwrap();
    s.add_buffer("adl.centroids", &[2, 4], Init::ONES).unwrap();
    let path = dir.path().join("m.swr");
    checkpoint::save(&s, &path).unwrap();
    let back = checkpoint::load::<f32>(&path, 3).unwrap();
    assert_eq!(back, s);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"SWR1");
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(checkpoint::load::<f32>(&path, 3), Err(Error::Checkpoint(_))));
}
