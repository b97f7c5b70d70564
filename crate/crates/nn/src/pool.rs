use crate::error::{NnError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Result of [`maxpool3d`]: pooled values plus, per output cell, the flat
/// input index that produced it.
#[derive(Debug, Clone)]
pub struct Pooled<T> {
    pub output: Tensor<T>,
    pub argmax: Vec<usize>,
}

/// Max pooling over `(C, H, W, Z)`. Output extent per axis is
/// `(n − window) / stride + 1`; trailing voxels that do not fill a window are
/// dropped. Ties resolve to the first index in scan order.
pub fn maxpool3d<T: Scalar>(
    input: &Tensor<T>,
    window: [usize; 3],
    stride: [usize; 3],
) -> Result<Pooled<T>> {
    input.expect_ndim("maxpool3d", 4)?;
    let s = input.shape();
    let (c, dims) = (s[0], [s[1], s[2], s[3]]);
    if (0..3).any(|a| window[a] == 0 || stride[a] == 0) {
        return Err(NnError::Invalid("maxpool3d window and stride must be positive".into()));
    }
    if (0..3).any(|a| window[a] > dims[a]) {
        return Err(NnError::WindowTooLarge {
            op: "maxpool3d",
            window: window.to_vec(),
            input: dims.to_vec(),
        });
    }
    let out_dims: [usize; 3] = std::array::from_fn(|a| (dims[a] - window[a]) / stride[a] + 1);
    let [h, w, z] = dims;
    let [ho, wo, zo] = out_dims;
    let mut out = Tensor::zeros(&[c, ho, wo, zo]);
    let mut argmax = vec![0; out.len()];
    let data = input.data();
    let odata = out.data_mut();
    let mut o = 0;
    for ch in 0..c {
        for y in 0..ho {
            for x in 0..wo {
                for t in 0..zo {
                    let mut best_i = usize::MAX;
                    let mut best = T::neg_infinity();
                    for a in 0..window[0] {
                        for b in 0..window[1] {
                            let row = ((ch * h + y * stride[0] + a) * w + x * stride[1] + b) * z
                                + t * stride[2];
                            for (d, &v) in data[row..row + window[2]].iter().enumerate() {
                                if best_i == usize::MAX || v > best {
                                    best = v;
                                    best_i = row + d;
                                }
                            }
                        }
                    }
                    odata[o] = best;
                    argmax[o] = best_i;
                    o += 1;
                }
            }
        }
    }
    Ok(Pooled {
        output: out,
        argmax,
    })
}

/// Routes each output gradient to the input element recorded in `argmax`.
pub fn maxpool3d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    argmax: &[usize],
    input_shape: &[usize],
) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(NnError::DataLength {
            op: "maxpool3d_backward",
            len: argmax.len(),
            shape: grad_out.shape().to_vec(),
        });
    }
    let mut gin = Tensor::zeros(input_shape);
    let gd = gin.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        gd[i] += g;
    }
    Ok(gin)
}
