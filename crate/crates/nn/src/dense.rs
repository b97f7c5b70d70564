use crate::error::Result;
use crate::scalar::{axpy, dot, Scalar};
use crate::tensor::Tensor;

/// Affine map `W·x + b` with `W` of shape `(out, in)`.
pub fn dense<T: Scalar>(input: &[T], weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Vec<T>> {
    weight.expect_ndim("dense weight", 2)?;
    let (m, n) = (weight.shape()[0], weight.shape()[1]);
    bias.expect_shape("dense bias", &[m])?;
    if input.len() != n {
        return Err(crate::NnError::ShapeMismatch {
            op: "dense input",
            expected: vec![n],
            actual: vec![input.len()],
        });
    }
    let w = weight.data();
    Ok((0..m)
        .map(|r| dot(&w[r * n..(r + 1) * n], input) + bias.data()[r])
        .collect())
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Vec<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Scalar>(
    input: &[T],
    weight: &Tensor<T>,
    grad_out: &[T],
) -> Result<DenseGrads<T>> {
    weight.expect_ndim("dense weight", 2)?;
    let (m, n) = (weight.shape()[0], weight.shape()[1]);
    if grad_out.len() != m || input.len() != n {
        return Err(crate::NnError::ShapeMismatch {
            op: "dense backward",
            expected: vec![m, n],
            actual: vec![grad_out.len(), input.len()],
        });
    }
    let w = weight.data();
    let mut gin = vec![T::zero(); n];
    let mut gw = Tensor::zeros(&[m, n]);
    for (r, &g) in grad_out.iter().enumerate() {
        axpy(g, &w[r * n..(r + 1) * n], &mut gin);
        axpy(g, input, &mut gw.data_mut()[r * n..(r + 1) * n]);
    }
    Ok(DenseGrads {
        input: gin,
        weight: gw,
        bias: Tensor::from_vec(&[m], grad_out.to_vec())?,
    })
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Derivative of the sigmoid expressed through its output `s`.
#[inline]
pub fn sigmoid_grad_from_output<T: Scalar>(s: T) -> T {
    s * (T::one() - s)
}

#[inline]
pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

pub fn relu_inplace<T: Scalar>(xs: &mut [T]) {
    xs.iter_mut().for_each(|v| *v = relu(*v));
}

/// Zeroes `grad` wherever the forward ReLU output was not positive.
pub fn relu_backward_inplace<T: Scalar>(activated: &[T], grad: &mut [T]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_return_bias() {
        let w = Tensor::<f64>::zeros(&[2, 3]);
        let b = Tensor::from_vec(&[2], vec![0.25, -4.0]).unwrap();
        assert_eq!(dense(&[1.0, 2.0, 3.0], &w, &b).unwrap(), vec![0.25, -4.0]);
    }

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert_eq!(sigmoid(0.0f32), 0.5);
    }

    #[test]
    fn hand_multiply() {
        let w = Tensor::<f64>::from_vec(&[2, 3], vec![0.3, -1.2, 2.5, 0.7, 0.1, -0.4]).unwrap();
        let b = Tensor::from_vec(&[2], vec![0.05, -0.6]).unwrap();
        let x = [1.5, -0.5, 2.0];
        let y = dense(&x, &w, &b).unwrap();
        // 0.45 + 0.6 + 5.0 + 0.05 ; 1.05 - 0.05 - 0.8 - 0.6
        assert!((y[0] - 6.1).abs() < 1e-12);
        assert!((y[1] - (-0.4)).abs() < 1e-12);
    }

    #[test]
    fn input_length_mismatch() {
        let w = Tensor::<f32>::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2]);
        assert!(dense(&[1.0, 2.0], &w, &b).is_err());
    }
}
