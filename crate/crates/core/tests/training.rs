mod common;

use common::{synthetic_series, toy_net};
use wxgen::autodiff::{adam_step, AdamState, ConvKernel, Gradients, ParameterStore};
use wxgen::data::{fit_standardization, make_windows, to_model_space, TransformedSeries, DEFAULT_ZERO_FLOOR};
use wxgen::model::WeatherNet;
use wxgen::trainer::{batch_loss_and_gradient, evaluate_loss, train, TrainConfig, TrainError};

const LADDER: [usize; 8] = [4, 6, 6, 6, 8, 4, 4, 2];

fn setup(n_days: usize) -> (WeatherNet, TransformedSeries) {
    let series = to_model_space(&synthetic_series(n_days, 42), DEFAULT_ZERO_FLOOR);
    let mut net = toy_net(14, 3, 3, &LADDER, 7);
    net.set_standardization(fit_standardization(&series).unwrap(), DEFAULT_ZERO_FLOOR);
    (net, series)
}

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 32,
        lr: 3e-3,
        seed: 9,
        checkpoint_path: None,
    }
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let (net, series) = setup(200);
    let windows = make_windows(&series, net.window_len(), net.spec().t0()).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut n = net.clone();
            let h = train(&mut n, &windows, &cfg(3), |_| {}).unwrap();
            (n.params().flatten(), h.losses())
        })
    };
    let (p1, l1) = run(1);
    let (p4, l4) = run(4);
    assert_eq!(p1, p4);
    assert_eq!(l1, l4);
    assert_eq!(run(1).0, p1);
}

#[test]
fn loss_falls_by_a_fifth() {
    let (mut net, series) = setup(400);
    let windows = make_windows(&series, net.window_len(), net.spec().t0()).unwrap();
    let before = evaluate_loss(&net, &windows).unwrap();
    let mut seen = 0;
    let history = train(&mut net, &windows, &cfg(50), |_| seen += 1).unwrap();
    let after = evaluate_loss(&net, &windows).unwrap();
    assert_eq!(seen, 50);
    assert_eq!(history.epochs.len(), 50);
    assert!(after < 0.8 * before, "loss {before} -> {after}");
    assert!(history.best_loss().unwrap() <= history.epochs[0].loss);
}

#[test]
fn evaluate_loss_matches_batched_sum() {
    let (net, series) = setup(120);
    let windows = make_windows(&series, net.window_len(), net.spec().t0()).unwrap();
    let all: Vec<usize> = windows.starts().collect();
    let (sum, _) = batch_loss_and_gradient(&net, &windows, &all).unwrap();
    let mean = sum / (windows.len() * windows.horizon()) as f64;
    let eval = evaluate_loss(&net, &windows).unwrap();
    assert!((mean - eval).abs() < 1e-9 * eval.abs(), "{mean} vs {eval}");
}

#[test]
fn mismatched_windows_are_refused() {
    let (mut net, series) = setup(120);
    let windows = make_windows(&series, net.window_len() + 1, net.spec().t0()).unwrap();
    let err = train(&mut net, &windows, &cfg(1), |_| {}).unwrap_err();
    assert!(matches!(err, TrainError::WindowMismatch { .. }), "{err}");
    assert!(matches!(
        evaluate_loss(&net, &windows),
        Err(TrainError::WindowMismatch { .. })
    ));
}

#[test]
fn bad_configs_are_refused() {
    let (mut net, series) = setup(60);
    let windows = make_windows(&series, net.window_len(), net.spec().t0()).unwrap();
    for bad in [
        TrainConfig { epochs: 0, ..cfg(1) },
        TrainConfig {
            batch_size: 0,
            ..cfg(1)
        },
        TrainConfig { lr: -1.0, ..cfg(1) },
        TrainConfig { lr: f64::NAN, ..cfg(1) },
    ] {
        assert!(matches!(
            train(&mut net, &windows, &bad, |_| {}),
            Err(TrainError::Config(_))
        ));
    }
}

#[test]
fn best_epoch_checkpoint_is_written() {
    let (mut net, series) = setup(150);
    let windows = make_windows(&series, net.window_len(), net.spec().t0()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("best.ckpt");
    let config = TrainConfig {
        checkpoint_path: Some(path.clone()),
        ..cfg(6)
    };
    let history = train(&mut net, &windows, &config, |_| {}).unwrap();
    let saved = WeatherNet::load(&path).unwrap();
    assert_eq!(saved.stats(), net.stats());
    assert_eq!(saved.spec(), net.spec());
    let best = history.best_epoch().unwrap();
    let min = history.losses().into_iter().fold(f64::INFINITY, f64::min);
    assert_eq!(history.best_loss(), Some(min));
    if best == config.epochs {
        assert_eq!(saved.params().flatten(), net.params().flatten());
    }
    let mut csv = Vec::new();
    history.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 7);
}

#[test]
fn adam_matches_hand_computation() {
    let mut store = ParameterStore::new();
    store
        .insert("w", ConvKernel::new(1, 2, 1, vec![1.0, 2.0], None).unwrap())
        .unwrap();
    let mut state = AdamState::new(2, 0.1);
    let g1 = [0.5, -1.0];
    adam_step(&mut store, &Gradients::from_vec(g1.to_vec()), &mut state).unwrap();
    // First step: m_hat = g, v_hat = g^2, so each moves by lr * g / (|g| + eps).
    let expect1: Vec<f64> = [1.0, 2.0]
        .iter()
        .zip(g1)
        .map(|(p, g)| p - 0.1 * g / (g.abs() + 1e-8))
        .collect();
    assert_eq!(store.flatten(), expect1);

    let g2 = [0.25, 3.0];
    adam_step(&mut store, &Gradients::from_vec(g2.to_vec()), &mut state).unwrap();
    let expect2: Vec<f64> = (0..2)
        .map(|i| {
            let m = 0.9 * (0.1 * g1[i]) + 0.1 * g2[i];
            let v = 0.999 * (0.001 * g1[i] * g1[i]) + 0.001 * g2[i] * g2[i];
            let (mh, vh) = (m / (1.0 - 0.81), v / (1.0 - 0.999f64.powi(2)));
            expect1[i] - 0.1 * mh / (vh.sqrt() + 1e-8)
        })
        .collect();
    for (a, b) in store.flatten().iter().zip(&expect2) {
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }
    assert_eq!(state.step_count(), 2);
}
