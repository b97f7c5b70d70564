//! Finite-difference checks of every backward pass (64-bit).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vertseq_nn::*;

const PROBES: usize = 150;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn split(flat: &[f64], sizes: &[usize]) -> Vec<Vec<f64>> {
    let mut off = 0;
    sizes
        .iter()
        .map(|&n| {
            let v = flat[off..off + n].to_vec();
            off += n;
            v
        })
        .collect()
}

#[test]
fn dense_sigmoid_bce() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (n, m) = (5, 3);
    let targets = [1.0, 0.0, 1.0];
    let sizes = [n, m * n, m];
    let flat = random_vec(&mut rng, n + m * n + m);
    let loss = |p: &[f64]| {
        let parts = split(p, &sizes);
        let w = Tensor::from_vec(&[m, n], parts[1].clone()).unwrap();
        let b = Tensor::from_vec(&[m], parts[2].clone()).unwrap();
        let z = dense(&parts[0], &w, &b).unwrap();
        let probs: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
        bce_mean(&probs, &targets)
    };
    let parts = split(&flat, &sizes);
    let w = Tensor::from_vec(&[m, n], parts[1].clone()).unwrap();
    let b = Tensor::from_vec(&[m], parts[2].clone()).unwrap();
    let z = dense(&parts[0], &w, &b).unwrap();
    let dz: Vec<f64> = z
        .iter()
        .zip(&targets)
        .map(|(&v, &y)| {
            let s = sigmoid(v);
            bce_grad(s, y) * sigmoid_grad_from_output(s) / m as f64
        })
        .collect();
    let g = dense_backward(&parts[0], &w, &dz).unwrap();
    let analytic: Vec<f64> = g.input.iter().chain(g.weight.data()).chain(g.bias.data()).copied().collect();
    let r = grad_check(loss, &flat, &analytic, PROBES, &mut rng);
    assert!(r.max_rel_error < 1e-6, "{r:?}");
}

#[test]
fn conv_relu_maxpool_composite() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let xs = [2, 4, 4, 4];
    let ks = [3, 2, 3, 3, 3];
    let nx: usize = xs.iter().product();
    let nk: usize = ks.iter().product();
    let sizes = [nx, nk, 3];
    let flat = random_vec(&mut rng, nx + nk + 3);
    let proj = random_vec(&mut rng, 3 * 2 * 2 * 2);
    let spec = Conv3dSpec::same(1);
    let forward = |p: &[f64]| {
        let parts = split(p, &sizes);
        let x = Tensor::from_vec(&xs, parts[0].clone()).unwrap();
        let k = Tensor::from_vec(&ks, parts[1].clone()).unwrap();
        let b = Tensor::from_vec(&[3], parts[2].clone()).unwrap();
        let mut y = conv3d(&x, &k, &b, &spec).unwrap();
        relu_inplace(y.data_mut());
        let pooled = maxpool3d(&y, [2, 2, 2], [2, 2, 2]).unwrap();
        (x, k, y, pooled)
    };
    let loss = |p: &[f64]| {
        let (_, _, _, pooled) = forward(p);
        pooled.output.data().iter().zip(&proj).map(|(a, b)| a * b).sum::<f64>()
    };
    let (x, k, y, pooled) = forward(&flat);
    let gp = Tensor::from_vec(pooled.output.shape(), proj.clone()).unwrap();
    let mut gy = maxpool3d_backward(&gp, &pooled.argmax, y.shape()).unwrap();
    relu_backward_inplace(y.data(), gy.data_mut());
    let g = conv3d_backward(&x, &k, &gy, &spec).unwrap();
    let analytic: Vec<f64> = g.input.data().iter().chain(g.weight.data()).chain(g.bias.data()).copied().collect();
    let r = grad_check(loss, &flat, &analytic, PROBES, &mut rng);
    assert!(r.max_rel_error < 1e-5, "{r:?}");
}

#[test]
fn strided_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let xs = [1, 5, 5, 3];
    let ks = [2, 1, 3, 3, 1];
    let nx: usize = xs.iter().product();
    let nk: usize = ks.iter().product();
    let sizes = [nx, nk, 2];
    let flat = random_vec(&mut rng, nx + nk + 2);
    let spec = Conv3dSpec::new([2, 2, 1], [0, 0, 0]);
    let proj = random_vec(&mut rng, 2 * 2 * 2 * 3);
    let loss = |p: &[f64]| {
        let parts = split(p, &sizes);
        let y = conv3d(
            &Tensor::from_vec(&xs, parts[0].clone()).unwrap(),
            &Tensor::from_vec(&ks, parts[1].clone()).unwrap(),
            &Tensor::from_vec(&[2], parts[2].clone()).unwrap(),
            &spec,
        )
        .unwrap();
        y.data().iter().zip(&proj).map(|(a, b)| a * b).sum::<f64>()
    };
    let parts = split(&flat, &sizes);
    let x = Tensor::from_vec(&xs, parts[0].clone()).unwrap();
    let k = Tensor::from_vec(&ks, parts[1].clone()).unwrap();
    let gy = Tensor::from_vec(&[2, 2, 2, 3], proj.clone()).unwrap();
    let g = conv3d_backward(&x, &k, &gy, &spec).unwrap();
    let analytic: Vec<f64> = g.input.data().iter().chain(g.weight.data()).chain(g.bias.data()).copied().collect();
    let r = grad_check(loss, &flat, &analytic, PROBES, &mut rng);
    assert!(r.max_rel_error < 1e-6, "{r:?}");
}

#[test]
fn lstm_bptt_both_directions() {
    for reverse in [false, true] {
        let mut rng = ChaCha8Rng::seed_from_u64(24 + reverse as u64);
        let (k, d, hd) = (4, 3, 2);
        let sizes = [k * d, 4 * hd * d, 4 * hd * hd, 4 * hd];
        let flat = random_vec(&mut rng, sizes.iter().sum());
        let proj = random_vec(&mut rng, k * hd);
        let tensors = |p: &[f64]| {
            let parts = split(p, &sizes);
            (
                Tensor::from_vec(&[k, d], parts[0].clone()).unwrap(),
                Tensor::from_vec(&[4 * hd, d], parts[1].clone()).unwrap(),
                Tensor::from_vec(&[4 * hd, hd], parts[2].clone()).unwrap(),
                Tensor::from_vec(&[4 * hd], parts[3].clone()).unwrap(),
            )
        };
        let loss = |p: &[f64]| {
            let (x, a, b, c) = tensors(p);
            let w = LstmWeights { w_ih: &a, w_hh: &b, bias: &c };
            let (h, _) = lstm_forward(&x, w, reverse).unwrap();
            h.data().iter().zip(&proj).map(|(u, v)| u * v).sum::<f64>()
        };
        let (x, a, b, c) = tensors(&flat);
        let w = LstmWeights { w_ih: &a, w_hh: &b, bias: &c };
        let (_, trace) = lstm_forward(&x, w, reverse).unwrap();
        let gh = Tensor::from_vec(&[k, hd], proj.clone()).unwrap();
        let (gx, gw) = lstm_backward(&trace, w, &gh).unwrap();
        let analytic: Vec<f64> = gx
            .data()
            .iter()
            .chain(gw.w_ih.data())
            .chain(gw.w_hh.data())
            .chain(gw.bias.data())
            .copied()
            .collect();
        let r = grad_check(loss, &flat, &analytic, PROBES, &mut rng);
        assert!(r.max_rel_error < 1e-6, "reverse={reverse} {r:?}");
    }
}

#[test]
fn forward_and_backward_are_bitwise_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let x = Tensor::<f32>::from_vec(&[2, 6, 6, 4], (0..288).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let k = Tensor::<f32>::from_vec(&[4, 2, 3, 3, 3], (0..216).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let b = Tensor::<f32>::zeros(&[4]);
    let spec = Conv3dSpec::same(1);
    let y1 = conv3d(&x, &k, &b, &spec).unwrap();
    let y2 = conv3d(&x, &k, &b, &spec).unwrap();
    assert_eq!(y1, y2);
    let g1 = conv3d_backward(&x, &k, &y1, &spec).unwrap();
    let g2 = conv3d_backward(&x, &k, &y2, &spec).unwrap();
    assert_eq!(g1.weight, g2.weight);
    assert_eq!(g1.input, g2.input);
}
