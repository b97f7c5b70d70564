//! Minimal dense-tensor neural network kernel.
//!
//! Layers are plain functions with hand-derived backward passes: 3D
//! convolution and max pooling over `(C, H, W, Z)` tensors, dense layers,
//! LSTM, sigmoid/ReLU, binary cross-entropy and Adam. Everything is generic
//! over [`Scalar`] (`f32` for training, `f64` for [`grad_check`]).

pub mod adam;
pub mod conv;
pub mod dense;
pub mod error;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod params;
pub mod pool;
pub mod scalar;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use conv::{conv3d, conv3d_backward, Conv3dGrads, Conv3dSpec};
pub use dense::{
    dense, dense_backward, relu, relu_backward_inplace, relu_inplace, sigmoid,
    sigmoid_grad_from_output, DenseGrads,
};
pub use error::{NnError, Result};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, GRAD_CHECK_STEP};
pub use loss::{bce, bce_grad, bce_mean, BCE_EPS};
pub use lstm::{
    concat_rows, lstm_backward, lstm_forward, lstm_sequence, Direction, LstmGrads, LstmTrace,
    LstmWeights,
};
pub use params::{he_uniform, ParamSet};
pub use pool::{maxpool3d, maxpool3d_backward, Pooled};
pub use scalar::{axpy, dot, Scalar};
pub use tensor::{strides, Tensor};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type ParamSet32 = ParamSet<f32>;
pub type ParamSet64 = ParamSet<f64>;
pub type AdamState32 = AdamState<f32>;
