mod oracles;

use fedcref::nn::{fedavg, init_model, train_local, TrainConfig};
use fedcref::data::generate_synthetic;
use ndarray::Axis;
use proptest::prelude::*;

#[test]
fn backward_matches_finite_differences() {
    let report = oracles::check_gradients(100, 2024).unwrap();
    assert!(report.checked > 1000, "only {} entries checked", report.checked);
    assert!(report.skipped_kinks * 10 < report.checked);
}

#[test]
fn reconstruction_errors_match_loop_oracle() {
    let mut r = oracles::rng(5);
    for _ in 0..20 {
        let model = oracles::random_small_model(&mut r);
        let x = oracles::random_batch(&mut r, 10, model.input_dim());
        let got = model.reconstruction_errors(x.view()).unwrap();
        for (a, b) in got.as_slice().iter().zip(oracles::naive_errors(&model, x.view())) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn evaluation_chunks_do_not_change_errors() {
    let mut r = oracles::rng(8);
    let model = init_model(&[6, 4, 3], 1).unwrap();
    let x = oracles::random_batch(&mut r, 1500, 6);
    let all = model.reconstruction_errors(x.view()).unwrap();
    let tail = model.reconstruction_errors(x.slice_axis(Axis(0), (1000..1500).into())).unwrap();
    assert_eq!(&all.as_slice()[1000..], tail.as_slice());
}

#[test]
fn training_on_one_class_reduces_loss() {
    let ds = generate_synthetic(2, 16, 300, 0.5, 4).unwrap();
    let x = ds.samples().slice_axis(Axis(0), (0..300).into()).to_owned();
    let model = init_model(&[16, 100, 64, 32], 3).unwrap();
    let trained = train_local(&model, x.view(), &TrainConfig::LOCAL, 1).unwrap();
    assert!(trained.loss(x.view()).unwrap() < model.loss(x.view()).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fedavg_is_linear_in_parameters(seed in any::<u64>(), w1 in 0.1f64..10.0, w2 in 0.1f64..10.0) {
        let a = init_model(&[5, 3, 2], seed).unwrap();
        let b = init_model(&[5, 3, 2], seed.wrapping_add(1)).unwrap();
        let avg = fedavg(&[&a, &b], &[w1, w2]).unwrap();
        let (p, q) = (w1 / (w1 + w2), w2 / (w1 + w2));
        for l in 0..a.weights().len() {
            let expected = &a.weights()[l] * p + &b.weights()[l] * q;
            for (x, y) in avg.weights()[l].iter().zip(expected.iter()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            let expected = &a.biases()[l] * p + &b.biases()[l] * q;
            for (x, y) in avg.biases()[l].iter().zip(expected.iter()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn fedavg_of_one_model_is_that_model(seed in any::<u64>(), w in 0.1f64..10.0) {
        let a = init_model(&[4, 2], seed).unwrap();
        prop_assert_eq!(fedavg(&[&a], &[w]).unwrap(), a);
    }
}
