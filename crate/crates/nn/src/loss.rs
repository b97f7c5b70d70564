use crate::scalar::Scalar;

/// Probability clamp applied before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

fn clamp_bounds<T: Scalar>() -> (T, T) {
    let eps = T::from_f64_lossy(BCE_EPS);
    (eps, T::one() - eps)
}

/// Binary cross-entropy `−[y·ln p + (1−y)·ln(1−p)]` with `p` clamped to
/// `[ε, 1−ε]`.
pub fn bce<T: Scalar>(p: T, y: T) -> T {
    let (lo, hi) = clamp_bounds::<T>();
    let p = p.max(lo).min(hi);
    -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
}

/// `∂bce/∂p`; zero where the clamp is active.
pub fn bce_grad<T: Scalar>(p: T, y: T) -> T {
    let (lo, hi) = clamp_bounds::<T>();
    if p < lo || p > hi {
        return T::zero();
    }
    -y / p + (T::one() - y) / (T::one() - p)
}

/// Mean BCE over a batch.
pub fn bce_mean<T: Scalar>(p: &[T], y: &[T]) -> T {
    assert_eq!(p.len(), y.len(), "bce_mean length mismatch");
    let n = T::from_usize(p.len()).expect("batch size");
    p.iter().zip(y).map(|(&a, &b)| bce(a, b)).sum::<T>() / n
}
