//! Naive reference implementations used only by tests.
#![allow(dead_code)]

/// Brute-force cross-correlation. `x` is `(c, h, w, z)`, `k` is
/// `(o, c, kh, kw, kz)`; zero padding `pad`, stride `stride`.
pub fn conv3d_naive(
    x: &[f64],
    xs: [usize; 4],
    k: &[f64],
    ks: [usize; 5],
    bias: &[f64],
    stride: [usize; 3],
    pad: [usize; 3],
) -> (Vec<f64>, [usize; 4]) {
    let [c, h, w, z] = xs;
    let [o, _, kh, kw, kz] = ks;
    let ho = (h + 2 * pad[0] - kh) / stride[0] + 1;
    let wo = (w + 2 * pad[1] - kw) / stride[1] + 1;
    let zo = (z + 2 * pad[2] - kz) / stride[2] + 1;
    let mut out = vec![0.0; o * ho * wo * zo];
    for oc in 0..o {
        for i in 0..ho {
            for j in 0..wo {
                for l in 0..zo {
                    let mut s = bias[oc];
                    for ic in 0..c {
                        for a in 0..kh {
                            for b in 0..kw {
                                for d in 0..kz {
                                    let yi = (i * stride[0] + a) as isize - pad[0] as isize;
                                    let xi = (j * stride[1] + b) as isize - pad[1] as isize;
                                    let zi = (l * stride[2] + d) as isize - pad[2] as isize;
                                    if yi < 0 || xi < 0 || zi < 0 {
                                        continue;
                                    }
                                    let (yi, xi, zi) = (yi as usize, xi as usize, zi as usize);
                                    if yi >= h || xi >= w || zi >= z {
                                        continue;
                                    }
                                    let kv = k[oc * c * kh * kw * kz
                                        + ic * kh * kw * kz
                                        + a * kw * kz
                                        + b * kz
                                        + d];
                                    let xv = x[ic * h * w * z + yi * w * z + xi * z + zi];
                                    s += kv * xv;
                                }
                            }
                        }
                    }
                    out[oc * ho * wo * zo + i * wo * zo + j * zo + l] = s;
                }
            }
        }
    }
    (out, [o, ho, wo, zo])
}

/// Brute-force window maximum.
pub fn maxpool3d_naive(
    x: &[f64],
    xs: [usize; 4],
    win: [usize; 3],
    stride: [usize; 3],
) -> (Vec<f64>, [usize; 4]) {
    let [c, h, w, z] = xs;
    let ho = (h - win[0]) / stride[0] + 1;
    let wo = (w - win[1]) / stride[1] + 1;
    let zo = (z - win[2]) / stride[2] + 1;
    let mut out = Vec::new();
    for ch in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                for l in 0..zo {
                    let mut m = f64::NEG_INFINITY;
                    for a in 0..win[0] {
                        for b in 0..win[1] {
                            for d in 0..win[2] {
                                let v = x[ch * h * w * z
                                    + (i * stride[0] + a) * w * z
                                    + (j * stride[1] + b) * z
                                    + l * stride[2]
                                    + d];
                                if v > m {
                                    m = v;
                                }
                            }
                        }
                    }
                    out.push(m);
                }
            }
        }
    }
    (out, [c, ho, wo, zo])
}

fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Unrolled scalar LSTM recurrence, gate blocks `[i, f, g, o]`.
/// Returns hidden states indexed by sequence position.
pub fn lstm_naive(
    xs: &[Vec<f64>],
    w_ih: &[f64],
    w_hh: &[f64],
    bias: &[f64],
    hidden: usize,
    reverse: bool,
) -> Vec<Vec<f64>> {
    let d = xs[0].len();
    let k = xs.len();
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut out = vec![vec![0.0; hidden]; k];
    let order: Vec<usize> = if reverse { (0..k).rev().collect() } else { (0..k).collect() };
    for t in order {
        let mut pre = vec![0.0; 4 * hidden];
        for r in 0..4 * hidden {
            let mut s = bias[r];
            for j in 0..d {
                s += w_ih[r * d + j] * xs[t][j];
            }
            for j in 0..hidden {
                s += w_hh[r * hidden + j] * h[j];
            }
            pre[r] = s;
        }
        let mut hn = vec![0.0; hidden];
        for j in 0..hidden {
            let i = sig(pre[j]);
            let f = sig(pre[hidden + j]);
            let g = pre[2 * hidden + j].tanh();
            let o = sig(pre[3 * hidden + j]);
            c[j] = f * c[j] + i * g;
            hn[j] = o * c[j].tanh();
        }
        h = hn;
        out[t] = h.clone();
    }
    out
}
