mod common;

use common::random_tensor;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waveunet::ops::{self, Activation, Padding};
use waveunet::tensor::{ConvParams, Shape, Tensor, UpsampleWeights};

fn rand_t(seed: u64, shape: Shape) -> Tensor<f64> {
    random_tensor(&mut ChaCha8Rng::seed_from_u64(seed), shape, 1.0)
}

fn bits(t: &Tensor<f64>) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn learned_upsampling_saturates_to_left_neighbour() {
    let x = Tensor::new(Shape::new(1, 2, 2), vec![1.0f64, 1.0, 0.0, 0.0]).unwrap();
    let w = UpsampleWeights { w: vec![0.0, 2.0] };
    let y = ops::upsample_learned(&x, &w).unwrap();
    assert!((y.at(0, 1, 0) - 0.5).abs() < 1e-15);
    assert!((y.at(0, 1, 1) - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
    let w = UpsampleWeights { w: vec![50.0, 50.0] };
    let y = ops::upsample_learned(&x, &w).unwrap();
    assert!((y.at(0, 1, 0) - 1.0).abs() < 1e-15);
    // Sigmoid stays strictly inside (0, 1) for moderate weights.
    for v in [-30.0, -5.0, 0.0, 5.0, 30.0] {
        let s = ops::sigmoid(v);
        assert!(s > 0.0 && s < 1.0);
    }
}

#[test]
fn learned_upsampling_rejects_channel_mismatch() {
    let x = Tensor::<f64>::zeros(Shape::new(1, 3, 2));
    assert!(ops::upsample_learned(&x, &UpsampleWeights { w: vec![0.0; 3] }).is_err());
}

#[test]
fn same_padding_identity_kernel() {
    let x = rand_t(9, Shape::new(2, 11, 3));
    let mut filters = Tensor::<f64>::zeros(Shape::new(5, 3, 3));
    for c in 0..3 {
        filters.data_mut()[(2 * 3 + c) * 3 + c] = 1.0;
    }
    let p = ConvParams { filters, bias: vec![0.0; 3] };
    assert_eq!(bits(&ops::conv1d(&x, &p, Padding::Same).unwrap()), bits(&x));
}

#[test]
fn mse_examples() {
    let z = Tensor::new(Shape::new(1, 2, 1), vec![0.0f64, 0.0]).unwrap();
    let t = Tensor::new(Shape::new(1, 2, 1), vec![1.0f64, 3.0]).unwrap();
    assert_eq!(ops::mse_loss(&z, &t).unwrap(), 5.0);
    assert_eq!(ops::mse_loss(&t, &t).unwrap(), 0.0);
    let t1 = Tensor::new(Shape::new(1, 2, 1), vec![2.0f64, 4.0]).unwrap();
    assert_eq!(ops::mse_loss(&t1, &t).unwrap(), 1.0);
    assert!(ops::mse_loss(&z, &Tensor::zeros(Shape::new(1, 3, 1))).is_err());
}

#[test]
fn activation_examples() {
    let x = Tensor::new(Shape::new(1, 2, 1), vec![-1.0f64, 0.0]).unwrap();
    let l = ops::activation(&x, Activation::LeakyRelu(0.2));
    assert!((l.data()[0] + 0.2).abs() < 1e-15);
    assert_eq!(ops::activation(&x, Activation::Tanh).data()[1], 0.0);
    assert_eq!(ops::activation(&x, Activation::Sigmoid).data()[1], 0.5);
}

#[test]
fn concat_crop_channels() {
    let high = Tensor::<f32>::zeros(Shape::new(1, 13, 24));
    let local = Tensor::<f32>::zeros(Shape::new(1, 21, 1));
    let y = ops::concat_crop(&high, &local).unwrap();
    assert_eq!((y.frames(), y.channels()), (13, 25));
    let odd = Tensor::<f32>::zeros(Shape::new(1, 20, 1));
    assert!(ops::concat_crop(&high, &odd).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shape_algebra(n in 1usize..400, f in 0usize..8, c in 1usize..4, seed in 0u64..1000) {
        let f = 2 * f + 1;
        let x = rand_t(seed, Shape::new(1, n, c));
        let p = ConvParams { filters: rand_t(seed + 1, Shape::new(f, c, 2)), bias: vec![0.1, -0.1] };
        match ops::conv1d(&x, &p, Padding::Valid) {
            Ok(y) => { prop_assert!(n >= f); prop_assert_eq!(y.frames(), n - f + 1); }
            Err(_) => prop_assert!(n < f),
        }
        prop_assert_eq!(ops::conv1d(&x, &p, Padding::Same).unwrap().frames(), n);
        if n % 2 == 1 && n >= 3 {
            prop_assert_eq!(ops::decimate(&x, true).unwrap().frames(), (n + 1) / 2);
        }
        if n >= 2 {
            prop_assert_eq!(ops::upsample_linear(&x).unwrap().frames(), 2 * n - 1);
            let w = UpsampleWeights { w: vec![0.3; c] };
            prop_assert_eq!(ops::upsample_learned(&x, &w).unwrap().frames(), 2 * n - 1);
        } else {
            prop_assert!(ops::upsample_linear(&x).is_err());
        }
    }

    #[test]
    fn decimate_inverts_upsampling(n in 2usize..300, c in 1usize..4, seed in 0u64..1000) {
        let x = rand_t(seed, Shape::new(2, n, c));
        let up = ops::upsample_linear(&x).unwrap();
        prop_assert_eq!(bits(&ops::decimate(&up, true).unwrap()), bits(&x));
        // Borders survive exactly.
        for b in 0..2 {
            for ch in 0..c {
                prop_assert_eq!(up.at(b, 0, ch).to_bits(), x.at(b, 0, ch).to_bits());
                prop_assert_eq!(up.at(b, 2 * n - 2, ch).to_bits(), x.at(b, n - 1, ch).to_bits());
            }
        }
    }

    #[test]
    fn learned_with_zero_weights_is_linear(n in 2usize..300, c in 1usize..5, seed in 0u64..1000) {
        let x = rand_t(seed, Shape::new(1, n, c));
        let lin = ops::upsample_linear(&x).unwrap();
        let learned = ops::upsample_learned(&x, &UpsampleWeights::zeros(c)).unwrap();
        for (a, b) in lin.data().iter().zip(learned.data()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn ops_are_pure(n in 3usize..100, seed in 0u64..1000) {
        let n = n | 1;
        let x = rand_t(seed, Shape::new(2, n, 2));
        let p = ConvParams { filters: rand_t(seed + 1, Shape::new(3, 2, 3)), bias: vec![0.0; 3] };
        prop_assert_eq!(bits(&ops::conv1d(&x, &p, Padding::Valid).unwrap()), bits(&ops::conv1d(&x, &p, Padding::Valid).unwrap()));
        prop_assert_eq!(bits(&ops::upsample_linear(&x).unwrap()), bits(&ops::upsample_linear(&x).unwrap()));
        prop_assert_eq!(bits(&ops::decimate(&x, true).unwrap()), bits(&ops::decimate(&x, true).unwrap()));
        let a = ops::activation(&x, Activation::LeakyRelu(0.2));
        prop_assert_eq!(bits(&a), bits(&ops::activation(&x, Activation::LeakyRelu(0.2))));
    }
}
