//! Steered response power maps from pairwise cross-correlations.
//!
//! Each microphone pair votes for every candidate position by reading its
//! cross-correlation at the lag that position would produce; summing the
//! votes over all pairs concentrates power at the true source.

use ndarray::Array2;
use rayon::prelude::*;

use crate::dsp::{gcc_phat, CrossCorrelation};
use crate::error::{Error, Result};
use crate::geometry::{distance, tdoa, CandidateGrid, DevicePlacement, Point3};
use crate::likelihood::LikelihoodGrid;
use crate::SPEED_OF_SOUND;

/// Smallest correlation half-width (in samples) that covers every lag a
/// source anywhere in space can produce for this pair.
pub fn required_max_lag(p_i: Point3, p_j: Point3, sample_rate: f64) -> usize {
    (distance(p_i, p_j) * sample_rate / SPEED_OF_SOUND).ceil() as usize
}

/// Pairwise steered response: the cross-correlation evaluated, with linear
/// interpolation, at each candidate cell's expected fractional lag.
///
/// Every geometrically possible lag is bounded by the microphone spacing,
/// so the correlation must cover at least `required_max_lag` samples.
pub fn srp_pairwise(
    corr: &CrossCorrelation,
    p_i: Point3,
    p_j: Point3,
    grid: &CandidateGrid,
) -> Result<LikelihoodGrid> {
    let required = required_max_lag(p_i, p_j, corr.sample_rate);
    if corr.max_lag < required {
        return Err(Error::InsufficientMaxLag {
            max_lag: corr.max_lag,
            required,
        });
    }
    let side = grid.side;
    let mut values = Array2::zeros((side, side));
    for iy in 0..side {
        for ix in 0..side {
            let lag = tdoa(p_i, p_j, grid.point(ix, iy)) * corr.sample_rate;
            values[(iy, ix)] = corr
                .interpolate(lag)
                .expect("lag bounded by pair distance");
        }
    }
    LikelihoodGrid::new(values, grid.clone())
}

/// Full steered response power map: unweighted sum of the pairwise maps
/// over all microphone pairs (i, j), i < j.
///
/// Pairs are processed in parallel but summed in a fixed order, so the
/// result is byte-identical for any thread count.
pub fn srp_global(
    signals: &[Vec<f64>],
    mics: &DevicePlacement,
    grid: &CandidateGrid,
    sample_rate: f64,
) -> Result<LikelihoodGrid> {
    if signals.len() != mics.len() {
        return Err(Error::ShapeMismatch {
            layer: "srp input",
            expected: format!("{} channels", mics.len()),
            got: format!("{} channels", signals.len()),
        });
    }
    let first_len = signals[0].len();
    if let Some(other) = signals.iter().find(|s| s.len() != first_len) {
        return Err(Error::LengthMismatch {
            left: first_len,
            right: other.len(),
        });
    }
    let maps = mics
        .pairs()
        .into_par_iter()
        .map(|(i, j)| {
            let p_i = mics.positions[i];
            let p_j = mics.positions[j];
            let max_lag = required_max_lag(p_i, p_j, sample_rate) + 2;
            let corr = gcc_phat(&signals[i], &signals[j], sample_rate, max_lag)?;
            Ok(srp_pairwise(&corr, p_i, p_j, grid)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Array2::zeros((grid.side, grid.side));
    for map in maps {
        total += &map;
    }
    LikelihoodGrid::new(total, grid.clone())
}

/// Convenience wrapper: SRP map argmax as a position estimate.
pub fn estimate_source(
    signals: &[Vec<f64>],
    mics: &DevicePlacement,
    grid: &CandidateGrid,
    sample_rate: f64,
) -> Result<Point3> {
    srp_global(signals, mics, grid, sample_rate)?.estimate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::fft::{fft_in_place, ifft_in_place};
    use crate::geometry::Room;
    use crate::SAMPLE_RATE;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    /// Shift a power-of-two-length signal by a fractional number of samples
    /// using a frequency-domain phase ramp. The signal must have silent
    /// margins wider than the delay so circular wrap lands on zeros.
    fn fractional_delay(x: &[f64], delay: f64) -> Vec<f64> {
        let n = x.len();
        assert!(n.is_power_of_two());
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_in_place(&mut buf);
        for (f, b) in buf.iter_mut().enumerate() {
            // map bins above Nyquist to negative frequencies
            let freq = if f <= n / 2 { f as f64 } else { f as f64 - n as f64 };
            let ang = -2.0 * PI * freq * delay / n as f64;
            *b *= Complex64::new(ang.cos(), ang.sin());
        }
        ifft_in_place(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Clean anechoic capture of a common noise burst at each microphone.
    fn simulate_capture(mics: &DevicePlacement, source: Point3, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = 4096;
        let mut base = vec![0.0; n];
        for s in base.iter_mut().take(n - 400).skip(400) {
            *s = rng.random_range(-1.0..1.0);
        }
        mics.positions
            .iter()
            .map(|&p| fractional_delay(&base, distance(p, source) / SPEED_OF_SOUND * SAMPLE_RATE))
            .collect()
    }

    fn test_scene() -> (Room, DevicePlacement, CandidateGrid) {
        let room = Room::uniform([6.0, 6.0, 3.0], 0.3).unwrap();
        let mics = DevicePlacement::new(vec![
            [1.0, 1.0, 1.5],
            [5.0, 1.2, 1.5],
            [3.1, 5.0, 1.5],
            [0.8, 4.2, 1.5],
        ])
        .unwrap();
        let grid = CandidateGrid::new(&room, 1.5, 25).unwrap();
        (room, mics, grid)
    }

    #[test]
    fn global_map_peaks_at_the_source_cell() {
        let (_room, mics, grid) = test_scene();
        let source = grid.point(15, 8);
        let signals = simulate_capture(&mics, source, 42);
        let map = srp_global(&signals, &mics, &grid, SAMPLE_RATE).unwrap();
        let est = map.estimate().unwrap();
        let [dx, dy] = grid.cell_size();
        let cell_diag = (dx * dx + dy * dy).sqrt();
        assert!(
            distance(est, source) <= cell_diag,
            "estimate {est:?} vs source {source:?}"
        );
    }

    #[test]
    fn pairwise_map_is_high_along_the_true_hyperbola() {
        let (_room, mics, grid) = test_scene();
        let source = grid.point(6, 18);
        let signals = simulate_capture(&mics, source, 7);
        let p_i = mics.positions[0];
        let p_j = mics.positions[1];
        let max_lag = required_max_lag(p_i, p_j, SAMPLE_RATE) + 2;
        let corr = gcc_phat(&signals[0], &signals[1], SAMPLE_RATE, max_lag).unwrap();
        let map = srp_pairwise(&corr, p_i, p_j, &grid).unwrap();
        let peak = map.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let at_source = map.values[(18, 6)];
        assert!(
            at_source > 0.8 * peak,
            "source cell {at_source} vs peak {peak}"
        );
    }

    #[test]
    fn global_map_is_the_sum_of_pairwise_maps() {
        let (_room, mics, grid) = test_scene();
        let source = grid.point(10, 10);
        let signals = simulate_capture(&mics, source, 3);
        let global = srp_global(&signals, &mics, &grid, SAMPLE_RATE).unwrap();
        let mut manual = Array2::zeros((grid.side, grid.side));
        for (i, j) in mics.pairs() {
            let p_i = mics.positions[i];
            let p_j = mics.positions[j];
            let max_lag = required_max_lag(p_i, p_j, SAMPLE_RATE) + 2;
            let corr = gcc_phat(&signals[i], &signals[j], SAMPLE_RATE, max_lag).unwrap();
            manual += &srp_pairwise(&corr, p_i, p_j, &grid).unwrap().values;
        }
        for (a, b) in global.values.iter().zip(manual.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn short_correlation_is_rejected() {
        let (_room, mics, grid) = test_scene();
        let corr = CrossCorrelation {
            values: vec![0.0; 21],
            max_lag: 10,
            sample_rate: SAMPLE_RATE,
        };
        // mics 0 and 1 are ~4 m apart: needs ~187 lags
        let err = srp_pairwise(&corr, mics.positions[0], mics.positions[1], &grid);
        assert!(matches!(err, Err(Error::InsufficientMaxLag { required, .. }) if required > 100));
    }

    #[test]
    fn channel_count_mismatch_is_rejected() {
        let (_room, mics, grid) = test_scene();
        let signals = vec![vec![0.0; 1024]; 3];
        assert!(matches!(
            srp_global(&signals, &mics, &grid, SAMPLE_RATE),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn fractional_delay_helper_shifts_integer_amounts_exactly() {
        let mut x = vec![0.0; 64];
        x[20] = 1.0;
        let y = fractional_delay(&x, 3.0);
        let argmax = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
        assert_eq!(argmax, 23);
        assert!((y[23] - 1.0).abs() < 1e-10);
    }
}
