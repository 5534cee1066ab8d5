//! Generalized cross-correlation with phase transform weighting.

use num_complex::Complex64;

use super::fft::{fft_in_place, ifft_in_place, next_power_of_two};
use crate::error::{Error, Result};

/// Cross-correlation restricted to lags in [-max_lag, max_lag].
///
/// `values[k]` holds the correlation at lag `k - max_lag` samples. The lag
/// convention is r(tau) = sum_t x_i(t + tau) x_j(t), so a copy of x_i
/// delayed by d samples on channel j produces a peak at lag -d.
#[derive(Debug, Clone)]
pub struct CrossCorrelation {
    pub values: Vec<f64>,
    pub max_lag: usize,
    pub sample_rate: f64,
}

impl CrossCorrelation {
    /// Correlation value at an integer lag. Panics outside [-max_lag, max_lag].
    pub fn at(&self, lag: isize) -> f64 {
        let idx = lag + self.max_lag as isize;
        assert!(
            idx >= 0 && (idx as usize) < self.values.len(),
            "lag {lag} outside +-{}",
            self.max_lag
        );
        self.values[idx as usize]
    }

    /// Linear interpolation at a fractional lag, or None outside the stored
    /// range (including non-finite lags).
    pub fn interpolate(&self, lag: f64) -> Option<f64> {
        let m = self.max_lag as f64;
        if !lag.is_finite() || lag < -m || lag > m {
            return None;
        }
        let pos = lag + m;
        let i0 = pos.floor() as usize;
        if i0 + 1 >= self.values.len() {
            return Some(self.values[self.values.len() - 1]);
        }
        let frac = pos - i0 as f64;
        Some(self.values[i0] * (1.0 - frac) + self.values[i0 + 1] * frac)
    }

    /// Lag of the largest value; ties resolve to the most negative lag.
    pub fn argmax_lag(&self) -> isize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best as isize - self.max_lag as isize
    }
}

/// GCC-PHAT of a signal pair.
///
/// The cross-spectrum X_i conj(X_j) is normalized to unit magnitude per bin
/// (with a small regularizer relative to the spectral peak) before the
/// inverse transform, which sharpens delay peaks and removes dependence on
/// the source spectrum. Signals are zero-padded so every returned lag is
/// free of circular wrap-around. All-zero input yields an all-zero
/// correlation rather than an error.
pub fn gcc_phat(
    x_i: &[f64],
    x_j: &[f64],
    sample_rate: f64,
    max_lag: usize,
) -> Result<CrossCorrelation> {
    if x_i.len() != x_j.len() {
        return Err(Error::LengthMismatch {
            left: x_i.len(),
            right: x_j.len(),
        });
    }
    let len = x_i.len();
    if len == 0 || max_lag >= len {
        return Err(Error::MaxLagTooLarge { max_lag, len });
    }
    let nfft = next_power_of_two(len + max_lag);
    let mut spec_i = vec![Complex64::new(0.0, 0.0); nfft];
    let mut spec_j = vec![Complex64::new(0.0, 0.0); nfft];
    for (b, &s) in spec_i.iter_mut().zip(x_i) {
        *b = Complex64::new(s, 0.0);
    }
    for (b, &s) in spec_j.iter_mut().zip(x_j) {
        *b = Complex64::new(s, 0.0);
    }
    fft_in_place(&mut spec_i);
    fft_in_place(&mut spec_j);

    let mut cross: Vec<Complex64> = spec_i
        .iter()
        .zip(&spec_j)
        .map(|(a, b)| a * b.conj())
        .collect();
    let peak = cross.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut values = vec![0.0; 2 * max_lag + 1];
    if peak == 0.0 {
        return Ok(CrossCorrelation {
            values,
            max_lag,
            sample_rate,
        });
    }
    let eps = 1e-8 * peak;
    for c in cross.iter_mut() {
        *c /= c.norm() + eps;
    }
    ifft_in_place(&mut cross);
    for (k, v) in values.iter_mut().enumerate() {
        let lag = k as isize - max_lag as isize;
        *v = cross[lag.rem_euclid(nfft as isize) as usize].re;
    }
    Ok(CrossCorrelation {
        values,
        max_lag,
        sample_rate,
    })
}
