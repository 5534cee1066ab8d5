//! Central finite-difference verification of the analytic gradients over
//! every parameter, run in f64 on a downsized architecture.

use ndarray::{Array1, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::{backward_pair, forward_pair, ModelConfig, ModelWeights};
use crate::error::Result;

/// Outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error between analytic and numeric gradient.
    pub max_rel_err: f64,
    /// Tensor holding that worst element.
    pub worst_tensor: String,
    /// Flat index of the worst element within its tensor.
    pub worst_index: usize,
    /// Total number of parameters compared.
    pub checked: usize,
}

/// Architecture small enough that exhaustively perturbing every parameter
/// stays cheap. Three conv layers keep the 9 frequency bins alive.
fn check_config() -> ModelConfig {
    ModelConfig {
        conv_layers: 3,
        conv_channels: 4,
        rnn_hidden: 8,
        metadata_len: 9,
        grid_side: 5,
        freq_bins: 9,
    }
}

/// Compare the analytic gradient of a random linear functional of the
/// output against central finite differences, for every parameter.
pub fn finite_difference_check(seed: u64) -> Result<GradCheckReport> {
    let config = check_config();
    let weights = ModelWeights::<f64>::init(config.clone(), seed);
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xA5A5_5A5A);
    let n = 5;
    let feat = Array3::from_shape_fn((2, n, config.freq_bins), |_| {
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
    });
    let phi: Array1<f64> = (0..config.metadata_len)
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    let coeffs: Array1<f64> = (0..config.mlp_width())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();

    let eval = |w: &ModelWeights<f64>| -> Result<f64> {
        let (out, _) = forward_pair(w, &feat, &phi)?;
        Ok(out.iter().zip(coeffs.iter()).map(|(o, c)| o * c).sum())
    };

    let (_, cache) = forward_pair(&weights, &feat, &phi)?;
    let analytic = backward_pair(&weights, &cache, &coeffs)?;
    let analytic_flat = analytic.flat_tensors();

    // Central differences carry roundoff noise of roughly eps*|f|/h, about
    // 1e-11 here; the denominator floor sits above that so parameters whose
    // true gradient is effectively zero are judged on absolute agreement
    // instead of amplified noise.
    let h = 1e-5;
    let floor = 1e-6;
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        checked: 0,
    };
    let tensor_count = analytic_flat.len();
    for idx in 0..tensor_count {
        let (name, an_slice) = &analytic_flat[idx];
        for k in 0..an_slice.len() {
            let mut plus = weights.clone();
            plus.flat_tensors_mut()[idx].1[k] += h;
            let mut minus = weights.clone();
            minus.flat_tensors_mut()[idx].1[k] -= h;
            let fd = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
            let an = an_slice[k];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(floor);
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_tensor = name.clone();
                report.worst_index = k;
            }
        }
    }
    Ok(report)
}
