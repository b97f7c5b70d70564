//! 3D cross-correlation over `(C, H, W, Z)` tensors.
//!
//! Kernels are `(out_ch, in_ch, kh, kw, kz)`. The stride-1 path runs the
//! direct method on a zero-padded copy of the input: for a fixed kernel tap
//! the whole output volume is one contiguous `axpy` against a shifted window
//! of the padded input, with the output held in the padded row pitch and
//! cropped afterwards. Other strides fall back to plain loops.

use crate::error::{NnError, Result};
use crate::scalar::{axpy, dot, Scalar};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3dSpec {
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

impl Conv3dSpec {
    pub const fn new(stride: [usize; 3], pad: [usize; 3]) -> Self {
        Self { stride, pad }
    }

    /// Stride 1 with symmetric padding `p` on every axis.
    pub const fn same(p: usize) -> Self {
        Self {
            stride: [1, 1, 1],
            pad: [p, p, p],
        }
    }
}

impl Default for Conv3dSpec {
    fn default() -> Self {
        Self::same(0)
    }
}

#[derive(Debug, Clone)]
pub struct Conv3dGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

struct Geometry {
    cin: usize,
    cout: usize,
    input: [usize; 3],
    kernel: [usize; 3],
    output: [usize; 3],
}

fn geometry<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    spec: &Conv3dSpec,
) -> Result<Geometry> {
    input.expect_ndim("conv3d input", 4)?;
    weight.expect_ndim("conv3d weight", 5)?;
    let is = input.shape();
    let ws = weight.shape();
    if ws[1] != is[0] {
        return Err(NnError::ShapeMismatch {
            op: "conv3d channels",
            expected: vec![ws[1]],
            actual: vec![is[0]],
        });
    }
    let mut output = [0; 3];
    for ax in 0..3 {
        let extent = is[ax + 1] + 2 * spec.pad[ax];
        let k = ws[ax + 2];
        let s = spec.stride[ax];
        if s == 0 {
            return Err(NnError::Invalid("conv3d stride must be positive".into()));
        }
        if extent < k {
            return Err(NnError::WindowTooLarge {
                op: "conv3d",
                window: ws[2..].to_vec(),
                input: is[1..].to_vec(),
            });
        }
        if (extent - k) % s != 0 {
            return Err(NnError::NonIntegralOutput {
                op: "conv3d",
                extent,
                kernel: k,
                stride: s,
            });
        }
        output[ax] = (extent - k) / s + 1;
    }
    Ok(Geometry {
        cin: is[0],
        cout: ws[0],
        input: [is[1], is[2], is[3]],
        kernel: [ws[2], ws[3], ws[4]],
        output,
    })
}

fn padded_copy<T: Scalar>(input: &[T], g: &Geometry, pad: [usize; 3]) -> (Vec<T>, [usize; 3]) {
    let [h, w, z] = g.input;
    let dims = [h + 2 * pad[0], w + 2 * pad[1], z + 2 * pad[2]];
    let vol = dims[0] * dims[1] * dims[2];
    let mut out = vec![T::zero(); g.cin * vol];
    for c in 0..g.cin {
        for y in 0..h {
            for x in 0..w {
                let src = ((c * h + y) * w + x) * z;
                let dst = c * vol + ((y + pad[0]) * dims[1] + x + pad[1]) * dims[2] + pad[2];
                out[dst..dst + z].copy_from_slice(&input[src..src + z]);
            }
        }
    }
    (out, dims)
}

/// Forward cross-correlation. Output spatial size per axis is
/// `(n + 2·pad − k) / stride + 1`, which must divide exactly.
pub fn conv3d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    spec: &Conv3dSpec,
) -> Result<Tensor<T>> {
    let g = geometry(input, weight, spec)?;
    bias.expect_shape("conv3d bias", &[g.cout])?;
    let [ho, wo, zo] = g.output;
    let [kh, kw, kz] = g.kernel;
    let mut out = Tensor::zeros(&[g.cout, ho, wo, zo]);

    if spec.stride == [1, 1, 1] {
        let (padded, [hp, wp, zp]) = padded_copy(input.data(), &g, spec.pad);
        let plane = wp * zp;
        let vol = hp * plane;
        let run = (ho - 1) * plane + (wo - 1) * zp + zo;
        let mut acc = vec![T::zero(); run];
        let wdata = weight.data();
        let odata = out.data_mut();
        for oc in 0..g.cout {
            acc.iter_mut().for_each(|v| *v = T::zero());
            for ic in 0..g.cin {
                let src = &padded[ic * vol..(ic + 1) * vol];
                let kbase = (oc * g.cin + ic) * kh * kw * kz;
                for a in 0..kh {
                    for b in 0..kw {
                        for d in 0..kz {
                            let k = wdata[kbase + (a * kw + b) * kz + d];
                            let off = a * plane + b * zp + d;
                            axpy(k, &src[off..off + run], &mut acc);
                        }
                    }
                }
            }
            let bo = bias.data()[oc];
            for y in 0..ho {
                for x in 0..wo {
                    let s = y * plane + x * zp;
                    let dst = ((oc * ho + y) * wo + x) * zo;
                    for t in 0..zo {
                        odata[dst + t] = acc[s + t] + bo;
                    }
                }
            }
        }
        return Ok(out);
    }

    let [h, w, z] = g.input;
    let idata = input.data();
    let wdata = weight.data();
    let odata = out.data_mut();
    for oc in 0..g.cout {
        for y in 0..ho {
            for x in 0..wo {
                for t in 0..zo {
                    let mut s = bias.data()[oc];
                    for ic in 0..g.cin {
                        for a in 0..kh {
                            let Some(iy) = tap(y, a, spec.stride[0], spec.pad[0], h) else {
                                continue;
                            };
                            for b in 0..kw {
                                let Some(ix) = tap(x, b, spec.stride[1], spec.pad[1], w) else {
                                    continue;
                                };
                                for d in 0..kz {
                                    let Some(iz) = tap(t, d, spec.stride[2], spec.pad[2], z)
                                    else {
                                        continue;
                                    };
                                    s += wdata[(((oc * g.cin + ic) * kh + a) * kw + b) * kz + d]
                                        * idata[((ic * h + iy) * w + ix) * z + iz];
                                }
                            }
                        }
                    }
                    odata[((oc * ho + y) * wo + x) * zo + t] = s;
                }
            }
        }
    }
    Ok(out)
}

#[inline]
fn tap(o: usize, k: usize, stride: usize, pad: usize, n: usize) -> Option<usize> {
    let i = (o * stride + k).checked_sub(pad)?;
    (i < n).then_some(i)
}

/// Gradients of [`conv3d`] with respect to input, kernel and bias.
pub fn conv3d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    spec: &Conv3dSpec,
) -> Result<Conv3dGrads<T>> {
    let g = geometry(input, weight, spec)?;
    let [ho, wo, zo] = g.output;
    grad_out.expect_shape("conv3d grad_out", &[g.cout, ho, wo, zo])?;
    let [kh, kw, kz] = g.kernel;
    let [h, w, z] = g.input;
    let mut gin = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weight.shape());
    let mut gb = Tensor::zeros(&[g.cout]);
    let go = grad_out.data();
    let per_out = ho * wo * zo;
    for oc in 0..g.cout {
        gb.data_mut()[oc] = go[oc * per_out..(oc + 1) * per_out].iter().copied().sum();
    }

    if spec.stride == [1, 1, 1] {
        let (padded, [hp, wp, zp]) = padded_copy(input.data(), &g, spec.pad);
        let plane = wp * zp;
        let vol = hp * plane;
        let run = (ho - 1) * plane + (wo - 1) * zp + zo;
        let mut gpad = vec![T::zero(); run];
        let mut ginpad = vec![T::zero(); g.cin * vol];
        let wdata = weight.data();
        let gwdata = gw.data_mut();
        for oc in 0..g.cout {
            gpad.iter_mut().for_each(|v| *v = T::zero());
            for y in 0..ho {
                for x in 0..wo {
                    let s = y * plane + x * zp;
                    let src = ((oc * ho + y) * wo + x) * zo;
                    gpad[s..s + zo].copy_from_slice(&go[src..src + zo]);
                }
            }
            for ic in 0..g.cin {
                let src = &padded[ic * vol..(ic + 1) * vol];
                let dst = &mut ginpad[ic * vol..(ic + 1) * vol];
                let kbase = (oc * g.cin + ic) * kh * kw * kz;
                for a in 0..kh {
                    for b in 0..kw {
                        for d in 0..kz {
                            let ki = kbase + (a * kw + b) * kz + d;
                            let off = a * plane + b * zp + d;
                            axpy(wdata[ki], &gpad, &mut dst[off..off + run]);
                            gwdata[ki] += dot(&gpad, &src[off..off + run]);
                        }
                    }
                }
            }
        }
        let gdata = gin.data_mut();
        for c in 0..g.cin {
            for y in 0..h {
                for x in 0..w {
                    let src = c * vol + ((y + spec.pad[0]) * wp + x + spec.pad[1]) * zp + spec.pad[2];
                    let dst = ((c * h + y) * w + x) * z;
                    gdata[dst..dst + z].copy_from_slice(&ginpad[src..src + z]);
                }
            }
        }
        return Ok(Conv3dGrads {
            input: gin,
            weight: gw,
            bias: gb,
        });
    }

    let idata = input.data();
    let wdata = weight.data();
    {
        let gdata = gin.data_mut();
        let gwdata = gw.data_mut();
        for oc in 0..g.cout {
            for y in 0..ho {
                for x in 0..wo {
                    for t in 0..zo {
                        let gv = go[((oc * ho + y) * wo + x) * zo + t];
                        for ic in 0..g.cin {
                            for a in 0..kh {
                                let Some(iy) = tap(y, a, spec.stride[0], spec.pad[0], h) else {
                                    continue;
                                };
                                for b in 0..kw {
                                    let Some(ix) = tap(x, b, spec.stride[1], spec.pad[1], w)
                                    else {
                                        continue;
                                    };
                                    for d in 0..kz {
                                        let Some(iz) =
                                            tap(t, d, spec.stride[2], spec.pad[2], z)
                                        else {
                                            continue;
                                        };
                                        let ki = (((oc * g.cin + ic) * kh + a) * kw + b) * kz + d;
                                        let ii = ((ic * h + iy) * w + ix) * z + iz;
                                        gwdata[ki] += gv * idata[ii];
                                        gdata[ii] += gv * wdata[ki];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Conv3dGrads {
        input: gin,
        weight: gw,
        bias: gb,
    })
}
