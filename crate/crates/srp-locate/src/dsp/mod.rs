//! Signal framing, windowed STFT, phase features and GCC-PHAT.
//!
//! All operations are pure functions over immutable inputs. The pipeline
//! runs at a fixed 16 kHz sample rate with a 512-sample Hann window and
//! 256-sample hop, giving (N, F) = (30, 257) time/frequency bins for the
//! 0.5 s excerpts used throughout.

pub(crate) mod fft;
mod gcc;

pub use fft::fft_convolve;
pub use gcc::{gcc_phat, CrossCorrelation};

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One analysis frame of a sampled signal.
#[derive(Debug, Clone)]
pub struct SignalFrame {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

/// Analysis window applied to each frame before the FFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            // periodic Hann
            Window::Hann => (0..len)
                .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

/// STFT parameters. `window_len` must be a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 512,
            hop: 256,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    /// One-sided frequency bin count F = window_len/2 + 1.
    pub fn freq_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Frame count N for a signal of `len` samples (no padding).
    pub fn time_bins(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }
}

/// Stacked per-channel STFT phase for one microphone pair.
///
/// `data` has shape (2, N, F) with every entry in [-pi, pi]; channel 0 is
/// the first microphone of the pair.
#[derive(Debug, Clone)]
pub struct StftPhaseFeature {
    pub data: Array3<f64>,
}

impl StftPhaseFeature {
    pub fn time_bins(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn freq_bins(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Split a signal into overlapping frames of `frame_len` samples spaced
/// `hop` apart. No padding: trailing samples that do not fill a frame are
/// dropped.
pub fn frame_signal(
    signal: &[f64],
    sample_rate: f64,
    frame_len: usize,
    hop: usize,
) -> Result<Vec<SignalFrame>> {
    if frame_len < 2 || hop == 0 || hop > frame_len {
        return Err(Error::InvalidFraming { frame_len, hop });
    }
    if signal.len() < frame_len {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            frame_len,
        });
    }
    let count = (signal.len() - frame_len) / hop + 1;
    Ok((0..count)
        .map(|k| SignalFrame {
            samples: signal[k * hop..k * hop + frame_len].to_vec(),
            sample_rate,
        })
        .collect())
}

/// Windowed short-time Fourier transform, one-sided.
///
/// Returns an (N, F) array of complex spectra, F = window_len/2 + 1.
pub fn stft(signal: &[f64], sample_rate: f64, config: &StftConfig) -> Result<Array2<Complex64>> {
    if !config.window_len.is_power_of_two() {
        return Err(Error::WindowNotPowerOfTwo(config.window_len));
    }
    let frames = frame_signal(signal, sample_rate, config.window_len, config.hop)?;
    let window = config.window.coefficients(config.window_len);
    let n_bins = config.freq_bins();
    let mut out = Array2::zeros((frames.len(), n_bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); config.window_len];
    for (n, frame) in frames.iter().enumerate() {
        for ((b, &s), &w) in buf.iter_mut().zip(&frame.samples).zip(&window) {
            *b = Complex64::new(s * w, 0.0);
        }
        fft::fft_in_place(&mut buf);
        for f in 0..n_bins {
            out[(n, f)] = buf[f];
        }
    }
    Ok(out)
}

/// Per-channel STFT phase, (N, F). Lets callers compute each channel once
/// and reuse it across pairs.
pub fn stft_phase(signal: &[f64], sample_rate: f64, config: &StftConfig) -> Result<Array2<f64>> {
    Ok(stft(signal, sample_rate, config)?.mapv(|v| v.arg()))
}

/// Stacked STFT phase of a microphone pair: channel 0 holds the phase of
/// `x_i`, channel 1 the phase of `x_j`. Invariant under positive per-channel
/// gain because only the phase is kept.
pub fn phase_feature(
    x_i: &[f64],
    x_j: &[f64],
    sample_rate: f64,
    config: &StftConfig,
) -> Result<StftPhaseFeature> {
    if x_i.len() != x_j.len() {
        return Err(Error::LengthMismatch {
            left: x_i.len(),
            right: x_j.len(),
        });
    }
    let spec_i = stft(x_i, sample_rate, config)?;
    let spec_j = stft(x_j, sample_rate, config)?;
    let (n, f) = spec_i.dim();
    let mut data = Array3::zeros((2, n, f));
    for ((t, k), v) in spec_i.indexed_iter() {
        data[(0, t, k)] = v.arg();
    }
    for ((t, k), v) in spec_j.indexed_iter() {
        data[(1, t, k)] = v.arg();
    }
    Ok(StftPhaseFeature { data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rect_config(window_len: usize) -> StftConfig {
        StftConfig {
            window_len,
            hop: window_len / 2,
            window: Window::Rectangular,
        }
    }

    #[test]
    fn frame_counts_match_formula() {
        let signal = vec![0.0; 8000];
        assert_eq!(frame_signal(&signal, 16e3, 512, 256).unwrap().len(), 30);
        let exact = vec![0.0; 512];
        assert_eq!(frame_signal(&exact, 16e3, 512, 256).unwrap().len(), 1);
    }

    #[test]
    fn frame_positions_follow_hop() {
        let signal: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let frames = frame_signal(&signal, 16e3, 128, 64).unwrap();
        for (k, frame) in frames.iter().enumerate() {
            assert_eq!(frame.samples[0], (k * 64) as f64);
            assert_eq!(frame.samples.len(), 128);
        }
    }

    #[test]
    fn short_signal_is_rejected() {
        let signal = vec![0.0; 511];
        assert!(matches!(
            frame_signal(&signal, 16e3, 512, 256),
            Err(Error::SignalTooShort { len: 511, .. })
        ));
    }

    #[test]
    fn stft_rejects_non_power_of_two_window() {
        let cfg = StftConfig {
            window_len: 500,
            hop: 250,
            window: Window::Hann,
        };
        let signal = vec![0.0; 1000];
        assert!(matches!(
            stft(&signal, 16e3, &cfg),
            Err(Error::WindowNotPowerOfTwo(500))
        ));
    }

    #[test]
    fn constant_signal_concentrates_in_dc_bin() {
        let signal = vec![1.0; 256];
        let spec = stft(&signal, 16e3, &rect_config(256)).unwrap();
        let row = spec.row(0);
        assert!((row[0].norm() - 256.0).abs() < 1e-9);
        assert!(row[0].arg().abs() < 1e-12, "DC phase should be zero");
        for f in 1..row.len() {
            assert!(row[f].norm() < 1e-9, "bin {f} leaked {}", row[f].norm());
        }
    }

    #[test]
    fn impulse_has_flat_magnitude() {
        let mut signal = vec![0.0; 256];
        signal[0] = 1.0;
        let spec = stft(&signal, 16e3, &rect_config(256)).unwrap();
        for v in spec.row(0) {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_peaks_at_its_bin_against_direct_dft() {
        // one frame, exact-bin sinusoid; oracle is a direct DFT sum
        let len = 256;
        let k = 19;
        let signal: Vec<f64> = (0..len)
            .map(|t| (2.0 * PI * k as f64 * t as f64 / len as f64).sin())
            .collect();
        let spec = stft(&signal, 16e3, &rect_config(len)).unwrap();
        let row = spec.row(0);
        // direct DFT oracle
        let mut oracle = vec![Complex64::new(0.0, 0.0); len / 2 + 1];
        for (f, o) in oracle.iter_mut().enumerate() {
            for (t, &s) in signal.iter().enumerate() {
                let ang = -2.0 * PI * f as f64 * t as f64 / len as f64;
                *o += Complex64::new(s, 0.0) * Complex64::new(ang.cos(), ang.sin());
            }
        }
        let argmax_fft = (0..row.len())
            .max_by(|&a, &b| row[a].norm().total_cmp(&row[b].norm()))
            .unwrap();
        let argmax_oracle = (0..oracle.len())
            .max_by(|&a, &b| oracle[a].norm().total_cmp(&oracle[b].norm()))
            .unwrap();
        assert_eq!(argmax_fft, k);
        assert_eq!(argmax_oracle, k);
        for (a, b) in row.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn stft_is_linear_in_amplitude() {
        let signal: Vec<f64> = (0..1024).map(|t| (t as f64 * 0.13).sin()).collect();
        let scaled: Vec<f64> = signal.iter().map(|&s| 2.5 * s).collect();
        let cfg = StftConfig::default();
        let a = stft(&signal, 16e3, &cfg).unwrap();
        let b = stft(&scaled, 16e3, &cfg).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x * 2.5 - y).norm() < 1e-9);
        }
    }

    #[test]
    fn phase_feature_shape_for_half_second_excerpt() {
        let n = 8000;
        let x: Vec<f64> = (0..n).map(|t| ((t * 37) % 101) as f64 / 101.0 - 0.5).collect();
        let y: Vec<f64> = (0..n).map(|t| ((t * 17) % 97) as f64 / 97.0 - 0.5).collect();
        let feat = phase_feature(&x, &y, 16e3, &StftConfig::default()).unwrap();
        assert_eq!(feat.data.shape(), &[2, 30, 257]);
    }

    #[test]
    fn phase_feature_is_gain_invariant() {
        // broadband signal so nearly every bin carries real energy; phases
        // of bins near the numeric noise floor are not comparable
        let x: Vec<f64> = (0..2048)
            .map(|t| ((t * 37) % 101) as f64 / 101.0 - 0.5)
            .collect();
        let scaled: Vec<f64> = x.iter().map(|&s| 3.7 * s).collect();
        let cfg = StftConfig::default();
        let spec = stft(&x, 16e3, &cfg).unwrap();
        let floor = spec.iter().map(|c| c.norm()).fold(0.0, f64::max) * 1e-6;
        let a = phase_feature(&x, &x, 16e3, &cfg).unwrap();
        let b = phase_feature(&x, &scaled, 16e3, &cfg).unwrap();
        let (_, n, f) = a.data.dim();
        let mut compared = 0usize;
        for t in 0..n {
            for k in 0..f {
                if spec[(t, k)].norm() > floor {
                    let u = a.data[(1, t, k)];
                    let v = b.data[(1, t, k)];
                    assert!((u - v).abs() < 1e-7, "bin ({t},{k}): {u} vs {v}");
                    compared += 1;
                }
            }
        }
        assert!(compared > n * f * 9 / 10, "only {compared} bins compared");
    }

    #[test]
    fn phase_feature_swap_swaps_channels() {
        let x: Vec<f64> = (0..2048).map(|t| (t as f64 * 0.11).sin()).collect();
        let y: Vec<f64> = (0..2048).map(|t| (t as f64 * 0.07).cos()).collect();
        let cfg = StftConfig::default();
        let ab = phase_feature(&x, &y, 16e3, &cfg).unwrap();
        let ba = phase_feature(&y, &x, 16e3, &cfg).unwrap();
        let (_, n, f) = ab.data.dim();
        for t in 0..n {
            for k in 0..f {
                assert_eq!(ab.data[(0, t, k)], ba.data[(1, t, k)]);
                assert_eq!(ab.data[(1, t, k)], ba.data[(0, t, k)]);
            }
        }
    }

    #[test]
    fn phase_feature_rejects_length_mismatch() {
        let x = vec![0.0; 1024];
        let y = vec![0.0; 1023];
        assert!(matches!(
            phase_feature(&x, &y, 16e3, &StftConfig::default()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn phases_stay_in_principal_range() {
        let x: Vec<f64> = (0..4096)
            .map(|t| ((t * 7919) % 104729) as f64 / 104729.0 - 0.5)
            .collect();
        let feat = phase_feature(&x, &x, 16e3, &StftConfig::default()).unwrap();
        for &v in feat.data.iter() {
            assert!((-PI..=PI).contains(&v));
        }
    }
}
