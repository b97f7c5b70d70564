//! Single-layer LSTM with zero initial state.
//!
//! Gate rows are stacked `[i; f; g; o]` in both weight matrices:
//! `c_t = f ⊙ c_{t-1} + i ⊙ g`, `h_t = o ⊙ tanh(c_t)`.

use crate::dense::{sigmoid, sigmoid_grad_from_output};
use crate::error::{NnError, Result};
use crate::scalar::{axpy, dot, Scalar};
use crate::tensor::Tensor;

/// Borrowed weights of one LSTM direction.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a, T> {
    /// `(4H, D)`
    pub w_ih: &'a Tensor<T>,
    /// `(4H, H)`
    pub w_hh: &'a Tensor<T>,
    /// `(4H)`
    pub bias: &'a Tensor<T>,
}

impl<'a, T: Scalar> LstmWeights<'a, T> {
    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.shape()[1]
    }

    fn validate(&self) -> Result<()> {
        self.w_hh.expect_ndim("lstm w_hh", 2)?;
        self.w_ih.expect_ndim("lstm w_ih", 2)?;
        let h = self.hidden();
        self.w_hh.expect_shape("lstm w_hh", &[4 * h, h])?;
        self.w_ih.expect_shape("lstm w_ih", &[4 * h, self.input_dim()])?;
        self.bias.expect_shape("lstm bias", &[4 * h])
    }
}

#[derive(Debug, Clone)]
pub struct LstmGrads<T> {
    pub w_ih: Tensor<T>,
    pub w_hh: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
    Bidirectional,
}

#[derive(Debug, Clone)]
struct Step<T> {
    pos: usize,
    gates: Vec<T>,
    c_prev: Vec<T>,
    h_prev: Vec<T>,
    tanh_c: Vec<T>,
}

/// Forward-pass record needed by [`lstm_backward`].
#[derive(Debug, Clone)]
pub struct LstmTrace<T> {
    steps: Vec<Step<T>>,
    inputs: Tensor<T>,
}

/// Runs the recurrence over `inputs` of shape `(k, D)`, front to back or, with
/// `reverse`, back to front. Row `t` of the `(k, H)` result is the hidden state
/// emitted at sequence position `t`.
pub fn lstm_forward<T: Scalar>(
    inputs: &Tensor<T>,
    w: LstmWeights<'_, T>,
    reverse: bool,
) -> Result<(Tensor<T>, LstmTrace<T>)> {
    w.validate()?;
    inputs.expect_ndim("lstm inputs", 2)?;
    let (k, d) = (inputs.shape()[0], inputs.shape()[1]);
    if d != w.input_dim() {
        return Err(NnError::ShapeMismatch {
            op: "lstm inputs",
            expected: vec![k, w.input_dim()],
            actual: inputs.shape().to_vec(),
        });
    }
    let hd = w.hidden();
    let mut out = Tensor::zeros(&[k, hd]);
    let mut h = vec![T::zero(); hd];
    let mut c = vec![T::zero(); hd];
    let mut steps = Vec::with_capacity(k);
    let wih = w.w_ih.data();
    let whh = w.w_hh.data();
    for s in 0..k {
        let pos = if reverse { k - 1 - s } else { s };
        let x = &inputs.data()[pos * d..(pos + 1) * d];
        let mut gates: Vec<T> = (0..4 * hd)
            .map(|r| {
                dot(&wih[r * d..(r + 1) * d], x) + dot(&whh[r * hd..(r + 1) * hd], &h) + w.bias.data()[r]
            })
            .collect();
        for j in 0..hd {
            gates[j] = sigmoid(gates[j]);
            gates[hd + j] = sigmoid(gates[hd + j]);
            gates[2 * hd + j] = gates[2 * hd + j].tanh();
            gates[3 * hd + j] = sigmoid(gates[3 * hd + j]);
        }
        let c_prev = c.clone();
        let h_prev = h.clone();
        let mut tanh_c = vec![T::zero(); hd];
        for j in 0..hd {
            c[j] = gates[hd + j] * c_prev[j] + gates[j] * gates[2 * hd + j];
            tanh_c[j] = c[j].tanh();
            h[j] = gates[3 * hd + j] * tanh_c[j];
        }
        out.data_mut()[pos * hd..(pos + 1) * hd].copy_from_slice(&h);
        steps.push(Step {
            pos,
            gates,
            c_prev,
            h_prev,
            tanh_c,
        });
    }
    Ok((
        out,
        LstmTrace {
            steps,
            inputs: inputs.clone(),
        },
    ))
}

/// Backpropagation through time. `grad_hidden` is `(k, H)` aligned with the
/// forward output; returns the `(k, D)` input gradient and weight gradients.
pub fn lstm_backward<T: Scalar>(
    trace: &LstmTrace<T>,
    w: LstmWeights<'_, T>,
    grad_hidden: &Tensor<T>,
) -> Result<(Tensor<T>, LstmGrads<T>)> {
    let hd = w.hidden();
    let (k, d) = (trace.inputs.shape()[0], trace.inputs.shape()[1]);
    grad_hidden.expect_shape("lstm grad_hidden", &[k, hd])?;
    let mut gx = Tensor::zeros(&[k, d]);
    let mut g_ih = Tensor::zeros(w.w_ih.shape());
    let mut g_hh = Tensor::zeros(w.w_hh.shape());
    let mut g_b = Tensor::zeros(w.bias.shape());
    let mut dh_next = vec![T::zero(); hd];
    let mut dc_next = vec![T::zero(); hd];
    let mut dz = vec![T::zero(); 4 * hd];
    let one = T::one();
    for step in trace.steps.iter().rev() {
        let gh = &grad_hidden.data()[step.pos * hd..(step.pos + 1) * hd];
        let gates = &step.gates;
        for j in 0..hd {
            let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            let dh = gh[j] + dh_next[j];
            let tc = step.tanh_c[j];
            let dc = dh * o * (one - tc * tc) + dc_next[j];
            dz[j] = dc * g * sigmoid_grad_from_output(i);
            dz[hd + j] = dc * step.c_prev[j] * sigmoid_grad_from_output(f);
            dz[2 * hd + j] = dc * i * (one - g * g);
            dz[3 * hd + j] = dh * tc * sigmoid_grad_from_output(o);
            dc_next[j] = dc * f;
        }
        let x = &trace.inputs.data()[step.pos * d..(step.pos + 1) * d];
        dh_next.iter_mut().for_each(|v| *v = T::zero());
        let gxs = &mut gx.data_mut()[step.pos * d..(step.pos + 1) * d];
        for (r, &dzr) in dz.iter().enumerate() {
            axpy(dzr, x, &mut g_ih.data_mut()[r * d..(r + 1) * d]);
            axpy(dzr, &step.h_prev, &mut g_hh.data_mut()[r * hd..(r + 1) * hd]);
            g_b.data_mut()[r] += dzr;
            axpy(dzr, &w.w_ih.data()[r * d..(r + 1) * d], gxs);
            axpy(dzr, &w.w_hh.data()[r * hd..(r + 1) * hd], &mut dh_next);
        }
    }
    Ok((
        gx,
        LstmGrads {
            w_ih: g_ih,
            w_hh: g_hh,
            bias: g_b,
        },
    ))
}

/// Hidden states for a whole sequence in the requested direction. The
/// bidirectional result concatenates the forward state and the
/// backward-pass state at each position, giving `(k, 2H)`.
pub fn lstm_sequence<T: Scalar>(
    inputs: &Tensor<T>,
    direction: Direction,
    forward: LstmWeights<'_, T>,
    backward: Option<LstmWeights<'_, T>>,
) -> Result<Tensor<T>> {
    match direction {
        Direction::Forward => Ok(lstm_forward(inputs, forward, false)?.0),
        Direction::Backward => Ok(lstm_forward(inputs, forward, true)?.0),
        Direction::Bidirectional => {
            let bw = backward.ok_or_else(|| {
                NnError::Invalid("bidirectional LSTM needs backward weights".into())
            })?;
            let (f, _) = lstm_forward(inputs, forward, false)?;
            let (b, _) = lstm_forward(inputs, bw, true)?;
            concat_rows(&f, &b)
        }
    }
}

/// Concatenates two `(k, a)` and `(k, b)` matrices into `(k, a + b)`.
pub fn concat_rows<T: Scalar>(left: &Tensor<T>, right: &Tensor<T>) -> Result<Tensor<T>> {
    let (k, a) = (left.shape()[0], left.shape()[1]);
    let b = right.shape()[1];
    if right.shape()[0] != k {
        return Err(NnError::ShapeMismatch {
            op: "concat_rows",
            expected: vec![k, b],
            actual: right.shape().to_vec(),
        });
    }
    let mut out = Vec::with_capacity(k * (a + b));
    for t in 0..k {
        out.extend_from_slice(&left.data()[t * a..(t + 1) * a]);
        out.extend_from_slice(&right.data()[t * b..(t + 1) * b]);
    }
    Tensor::from_vec(&[k, a + b], out)
}
