use vertseq_nn::{conv3d, conv3d_backward, relu_backward_inplace, relu_inplace, Conv3dGrads, Conv3dSpec, Scalar, Tensor};

use crate::error::Result;

pub(crate) fn conv_relu<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>, spec: &Conv3dSpec) -> Result<Tensor<T>> {
    let mut y = conv3d(x, w, b, spec)?;
    relu_inplace(y.data_mut());
    Ok(y)
}

/// Backward of [`conv_relu`] given its input `x` and activated output `y`.
pub(crate) fn conv_relu_backward<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    w: &Tensor<T>,
    mut grad: Tensor<T>,
    spec: &Conv3dSpec,
) -> Result<Conv3dGrads<T>> {
    relu_backward_inplace(y.data(), grad.data_mut());
    Ok(conv3d_backward(x, w, &grad, spec)?)
}

/// Bilinear resize of a row-major `h × w` image, pixel centres aligned and
/// borders clamped.
pub(crate) fn resize_bilinear(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(out_h * out_w);
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    for i in 0..out_h {
        let y = ((i as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let ty = y - y0 as f64;
        for j in 0..out_w {
            let x = ((j as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let tx = x - x0 as f64;
            let top = src[y0 * w + x0] * (1.0 - tx) + src[y0 * w + x1] * tx;
            let bot = src[y1 * w + x0] * (1.0 - tx) + src[y1 * w + x1] * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}
