//! Band-limited resampling of real 1D signals through the DFT.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Reusable resampler from length `n` to length `m`.
///
/// The spectrum is zero-padded or truncated around the Nyquist frequency of
/// the shorter length. An even-length Nyquist bin is split in half when
/// upsampling and folded together with its mirror when downsampling, so real
/// input stays real.
pub struct FourierResampler {
    n: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FourierResampler {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n < 2 || m < 2 {
            return Err(Error::Invalid(format!(
                "fourier resampling needs n, m >= 2 (got n = {n}, m = {m})"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            m,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(m),
        })
    }

    pub fn input_len(&self) -> usize {
        self.n
    }

    pub fn output_len(&self) -> usize {
        self.m
    }

    /// Resamples `signal` (length `n`) into `out` (length `m`).
    pub fn apply(&self, signal: &[f64], out: &mut [f64]) {
        assert_eq!(signal.len(), self.n, "resampler input length");
        assert_eq!(out.len(), self.m, "resampler output length");
        let (n, m) = (self.n, self.m);
        if n == m {
            out.copy_from_slice(signal);
            return;
        }
        let mut x: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut x);

        let mut y = vec![Complex64::new(0.0, 0.0); m];
        let short = n.min(m);
        let positive = short / 2 + 1;
        let negative = short - positive;
        y[..positive].copy_from_slice(&x[..positive]);
        if negative > 0 {
            y[m - negative..].copy_from_slice(&x[n - negative..]);
        }
        if short % 2 == 0 {
            let h = short / 2;
            if m < n {
                y[h] += x[n - h];
            } else {
                y[h] *= 0.5;
                y[m - h] = y[h];
            }
        }
        self.inverse.process(&mut y);
        let scale = 1.0 / n as f64;
        for (o, v) in out.iter_mut().zip(&y) {
            *o = v.re * scale;
        }
    }
}

/// Resamples `signal` to `m` samples covering the same extent.
pub fn fourier_resample(signal: &[f64], m: usize) -> Result<Vec<f64>> {
    let r = FourierResampler::new(signal.len(), m)?;
    let mut out = vec![0.0; m];
    r.apply(signal, &mut out);
    Ok(out)
}

/// Round-half-up of `n · ratio`.
pub fn resampled_len(n: usize, ratio: f64) -> usize {
    (n as f64 * ratio + 0.5).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn constant_stays_constant() {
        for m in [2, 5, 8, 13, 40] {
            let out = fourier_resample(&[2.5; 8], m).unwrap();
            assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-12), "m = {m}: {out:?}");
        }
    }

    #[test]
    fn cosine_upsampled_matches_analytic() {
        // One and two periods across 8 samples, evaluated on a 16-point grid.
        for f in [1.0, 2.0, 3.0] {
            let sig: Vec<f64> = (0..8).map(|t| (TAU * f * t as f64 / 8.0).cos()).collect();
            let out = fourier_resample(&sig, 16).unwrap();
            for (t, v) in out.iter().enumerate() {
                let want = (TAU * f * t as f64 / 16.0).cos();
                assert!((v - want).abs() < 1e-9, "f = {f}, t = {t}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn same_length_is_identity() {
        let sig = [0.3, -1.0, 4.0, 2.0, 0.0];
        assert_eq!(fourier_resample(&sig, 5).unwrap(), sig);
    }

    #[test]
    fn downsampling_folds_nyquist() {
        // cos at the output Nyquist must survive the fold as an alternating signal.
        let sig: Vec<f64> = (0..8).map(|t| (TAU * 2.0 * t as f64 / 8.0).cos()).collect();
        let out = fourier_resample(&sig, 4).unwrap();
        for (t, v) in out.iter().enumerate() {
            let want = if t % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - want).abs() < 1e-12, "{out:?}");
        }
    }

    #[test]
    fn short_lengths_are_rejected() {
        assert!(fourier_resample(&[1.0], 4).is_err());
        assert!(fourier_resample(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(resampled_len(10, 2.0), 20);
        assert_eq!(resampled_len(5, 1.5), 8);
        assert_eq!(resampled_len(3, 0.5), 2);
    }
}
