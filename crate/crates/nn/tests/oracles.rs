mod support;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracles::{conv3d_naive, lstm_naive, maxpool3d_naive};
use vertseq_nn::*;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn conv3d_matches_naive_loops_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let c = rng.gen_range(1..=3);
        let o = rng.gen_range(1..=3);
        let dims: [usize; 3] = std::array::from_fn(|_| rng.gen_range(1..=6));
        let pad: [usize; 3] = std::array::from_fn(|_| rng.gen_range(0..=1));
        let k: [usize; 3] = std::array::from_fn(|a| rng.gen_range(1..=(dims[a] + 2 * pad[a]).min(3)));
        let stride: [usize; 3] = std::array::from_fn(|a| {
            let span = dims[a] + 2 * pad[a] - k[a];
            if span % 2 == 0 && rng.gen_bool(0.3) { 2 } else { 1 }
        });
        let xs = [c, dims[0], dims[1], dims[2]];
        let ks = [o, c, k[0], k[1], k[2]];
        let x = random_vec(&mut rng, xs.iter().product());
        let w = random_vec(&mut rng, ks.iter().product());
        let b = random_vec(&mut rng, o);
        let (want, want_shape) = conv3d_naive(&x, xs, &w, ks, &b, stride, pad);
        let got = conv3d(
            &Tensor::from_vec(&xs, x).unwrap(),
            &Tensor::from_vec(&ks, w).unwrap(),
            &Tensor::from_vec(&[o], b).unwrap(),
            &Conv3dSpec::new(stride, pad),
        )
        .unwrap();
        assert_eq!(got.shape(), &want_shape);
        for (g, e) in got.data().iter().zip(&want) {
            assert!((g - e).abs() <= 1e-6 * e.abs().max(1.0), "{g} vs {e}");
        }
    }
}

#[test]
fn conv3d_f32_matches_naive_within_relative_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs = [2, 5, 5, 4];
    let ks = [3, 2, 3, 3, 3];
    let x = random_vec(&mut rng, xs.iter().product());
    let w = random_vec(&mut rng, ks.iter().product());
    let b = random_vec(&mut rng, 3);
    let (want, _) = conv3d_naive(&x, xs, &w, ks, &b, [1, 1, 1], [0, 0, 0]);
    let got = conv3d(
        &Tensor::<f64>::from_vec(&xs, x).unwrap().cast::<f32>(),
        &Tensor::<f64>::from_vec(&ks, w).unwrap().cast::<f32>(),
        &Tensor::<f64>::from_vec(&[3], b).unwrap().cast::<f32>(),
        &Conv3dSpec::default(),
    )
    .unwrap();
    for (g, e) in got.data().iter().zip(&want) {
        assert!((*g as f64 - e).abs() <= 1e-5 * e.abs().max(1.0));
    }
}

#[test]
fn maxpool3d_matches_naive_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let c = rng.gen_range(1..=3);
        let dims: [usize; 3] = std::array::from_fn(|_| rng.gen_range(1..=6));
        let win: [usize; 3] = std::array::from_fn(|a| rng.gen_range(1..=dims[a].min(3)));
        let stride: [usize; 3] = std::array::from_fn(|_| rng.gen_range(1..=2));
        let xs = [c, dims[0], dims[1], dims[2]];
        let x = random_vec(&mut rng, xs.iter().product());
        let (want, shape) = maxpool3d_naive(&x, xs, win, stride);
        let got = maxpool3d(&Tensor::from_vec(&xs, x).unwrap(), win, stride).unwrap();
        assert_eq!(got.output.shape(), &shape);
        assert_eq!(got.output.data(), &want[..]);
    }
}

#[test]
fn maxpool_4x4x4_stride_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = random_vec(&mut rng, 64);
    let (want, _) = maxpool3d_naive(&x, [1, 4, 4, 4], [2, 2, 2], [2, 2, 2]);
    let got = maxpool3d(&Tensor::from_vec(&[1, 4, 4, 4], x).unwrap(), [2, 2, 2], [2, 2, 2]).unwrap();
    assert_eq!(got.output.data(), &want[..]);
}

#[test]
fn lstm_matches_unrolled_recurrence() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let k = rng.gen_range(1..=6);
        let d = rng.gen_range(1..=5);
        let hd = rng.gen_range(1..=4);
        let xs: Vec<Vec<f64>> = (0..k).map(|_| random_vec(&mut rng, d)).collect();
        let wih = random_vec(&mut rng, 4 * hd * d);
        let whh = random_vec(&mut rng, 4 * hd * hd);
        let b = random_vec(&mut rng, 4 * hd);
        let reverse = rng.gen_bool(0.5);
        let want = lstm_naive(&xs, &wih, &whh, &b, hd, reverse);
        let t_ih = Tensor::from_vec(&[4 * hd, d], wih).unwrap();
        let t_hh = Tensor::from_vec(&[4 * hd, hd], whh).unwrap();
        let t_b = Tensor::from_vec(&[4 * hd], b).unwrap();
        let w = LstmWeights { w_ih: &t_ih, w_hh: &t_hh, bias: &t_b };
        let inputs = Tensor::from_vec(&[k, d], xs.concat()).unwrap();
        let dir = if reverse { Direction::Backward } else { Direction::Forward };
        let got = lstm_sequence(&inputs, dir, w, None).unwrap();
        for t in 0..k {
            for j in 0..hd {
                assert!((got.data()[t * hd + j] - want[t][j]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn bilstm_concatenates_both_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (k, d, hd) = (3, 2, 2);
    let xs: Vec<Vec<f64>> = (0..k).map(|_| random_vec(&mut rng, d)).collect();
    let p: Vec<Vec<f64>> = [4 * hd * d, 4 * hd * hd, 4 * hd, 4 * hd * d, 4 * hd * hd, 4 * hd]
        .iter()
        .map(|&n| random_vec(&mut rng, n))
        .collect();
    let f = lstm_naive(&xs, &p[0], &p[1], &p[2], hd, false);
    let b = lstm_naive(&xs, &p[3], &p[4], &p[5], hd, true);
    let t: Vec<Tensor<f64>> = p
        .iter()
        .zip([[4 * hd, d], [4 * hd, hd], [4 * hd, 1], [4 * hd, d], [4 * hd, hd], [4 * hd, 1]])
        .map(|(v, s)| {
            let shape: Vec<usize> = if s[1] == 1 { vec![s[0]] } else { s.to_vec() };
            Tensor::from_vec(&shape, v.clone()).unwrap()
        })
        .collect();
    let fw = LstmWeights { w_ih: &t[0], w_hh: &t[1], bias: &t[2] };
    let bw = LstmWeights { w_ih: &t[3], w_hh: &t[4], bias: &t[5] };
    let inputs = Tensor::from_vec(&[k, d], xs.concat()).unwrap();
    let got = lstm_sequence(&inputs, Direction::Bidirectional, fw, Some(bw)).unwrap();
    for pos in 0..k {
        let want: Vec<f64> = f[pos].iter().chain(&b[pos]).copied().collect();
        let row = &got.data()[pos * 2 * hd..(pos + 1) * 2 * hd];
        for (g, e) in row.iter().zip(&want) {
            assert!((g - e).abs() < 1e-10);
        }
    }
}

proptest! {
    #[test]
    fn pooled_values_bound_their_windows(vals in proptest::collection::vec(-100.0f64..100.0, 64)) {
        let x = Tensor::from_vec(&[1, 4, 4, 4], vals.clone()).unwrap();
        let p = maxpool3d(&x, [2, 2, 2], [2, 2, 2]).unwrap();
        for (&m, &i) in p.output.data().iter().zip(&p.argmax) {
            prop_assert_eq!(vals[i], m);
        }
        let gmax = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p.output.data().iter().any(|&v| v == gmax));
    }

    #[test]
    fn conv_is_linear_in_input(
        a in proptest::collection::vec(-1.0f64..1.0, 27),
        b in proptest::collection::vec(-1.0f64..1.0, 27),
        s in -2.0f64..2.0,
    ) {
        let w = Tensor::from_vec(&[2, 1, 2, 2, 2], (0..16).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let zero = Tensor::zeros(&[2]);
        let spec = Conv3dSpec::same(1);
        let ta = Tensor::from_vec(&[1, 3, 3, 3], a.clone()).unwrap();
        let tb = Tensor::from_vec(&[1, 3, 3, 3], b.clone()).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + y).collect();
        let tm = Tensor::from_vec(&[1, 3, 3, 3], mix).unwrap();
        let ya = conv3d(&ta, &w, &zero, &spec).unwrap();
        let yb = conv3d(&tb, &w, &zero, &spec).unwrap();
        let ym = conv3d(&tm, &w, &zero, &spec).unwrap();
        for i in 0..ym.len() {
            prop_assert!((ym.data()[i] - (s * ya.data()[i] + yb.data()[i])).abs() < 1e-12);
        }
    }
}
