//! Central finite-difference verification of analytic gradients.

use rand::Rng;

use crate::scalar::Scalar;

/// Finite-difference step.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate with the largest error.
    pub worst_index: usize,
    pub probes: usize,
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against central differences of `f` at `probes`
/// uniformly drawn coordinates of `params`.
pub fn grad_check<T, F, R>(
    f: F,
    params: &[T],
    analytic: &[T],
    probes: usize,
    rng: &mut R,
) -> GradCheckReport
where
    T: Scalar,
    F: Fn(&[T]) -> T,
    R: Rng + ?Sized,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    assert!(!params.is_empty(), "nothing to check");
    let h = T::from_f64_lossy(GRAD_CHECK_STEP);
    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        probes,
    };
    for _ in 0..probes {
        let i = rng.gen_range(0..params.len());
        let orig = work[i];
        work[i] = orig + h;
        let up = f(&work);
        work[i] = orig - h;
        let down = f(&work);
        work[i] = orig;
        let numeric = (up - down).as_f64() / (2.0 * GRAD_CHECK_STEP);
        let err = relative_error(analytic[i].as_f64(), numeric);
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    report
}
