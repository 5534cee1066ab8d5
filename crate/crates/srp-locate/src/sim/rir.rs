//! Shoebox room impulse responses via the image-source method, signal
//! propagation with additive noise, and reverberation-time estimates.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dsp::fft_convolve;
use crate::error::{Error, Result};
use crate::geometry::{distance, Point3, Room};
use crate::SPEED_OF_SOUND;

/// Room impulse response as a dense tap vector at the given rate.
#[derive(Debug, Clone)]
pub struct RoomImpulseResponse {
    pub taps: Vec<f64>,
    pub sample_rate: f64,
}

impl RoomImpulseResponse {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|&t| t * t).sum()
    }
}

/// Direct-path attenuation and delay between a source and a microphone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnechoicPath {
    pub attenuation: f64,
    pub delay: f64,
}

impl AnechoicPath {
    pub fn between(src: Point3, mic: Point3) -> AnechoicPath {
        let d = distance(src, mic);
        AnechoicPath {
            attenuation: 1.0 / (4.0 * std::f64::consts::PI * d),
            delay: d / SPEED_OF_SOUND,
        }
    }
}

/// One mirror image of the source: its unfolded position and the product of
/// the reflection coefficients picked up on the way.
pub(crate) struct ImageSource {
    pub pos: Point3,
    pub gain: f64,
}

/// Enumerate image sources with a total reflection count up to `max_order`.
///
/// Images are indexed by a mirror parity q in {0,1} and a room-period shift
/// m per axis; the image coordinate is (1-2q) s + 2 m L. The wall at
/// coordinate 0 is hit |m - q| times and the far wall |m| times, and each
/// hit multiplies the gain by sqrt(1 - absorption) of that wall.
pub(crate) fn image_sources(room: &Room, src: Point3, max_order: usize) -> Vec<ImageSource> {
    let order = max_order as i64;
    let shift_range = order / 2 + 1;
    let beta: Vec<f64> = room.absorptions.iter().map(|&a| (1.0 - a).sqrt()).collect();
    let mut images = Vec::new();
    for mx in -shift_range..=shift_range {
        for my in -shift_range..=shift_range {
            for mz in -shift_range..=shift_range {
                for q in 0..8u8 {
                    let qv = [(q & 1) as i64, ((q >> 1) & 1) as i64, ((q >> 2) & 1) as i64];
                    let m = [mx, my, mz];
                    let total: i64 = (0..3).map(|d| (m[d] - qv[d]).abs() + m[d].abs()).sum();
                    if total > order {
                        continue;
                    }
                    let mut pos = [0.0; 3];
                    let mut gain = 1.0;
                    for d in 0..3 {
                        pos[d] = (1 - 2 * qv[d]) as f64 * src[d]
                            + 2.0 * m[d] as f64 * room.dims[d];
                        gain *= beta[2 * d].powi((m[d] - qv[d]).unsigned_abs() as i32)
                            * beta[2 * d + 1].powi(m[d].unsigned_abs() as i32);
                    }
                    images.push(ImageSource { pos, gain });
                }
            }
        }
    }
    images
}

fn strictly_inside(room: &Room, p: Point3) -> bool {
    p.iter().zip(&room.dims).all(|(&c, &d)| c > 0.0 && c < d)
}

/// Image-source RIR between a source and one microphone.
///
/// Each image contributes gain / (4 pi dist) at the fractional delay
/// dist / c * fs, spread over the two adjacent taps by linear
/// interpolation. `max_order` 0 keeps only the direct path.
pub fn simulate_rir(
    room: &Room,
    src: Point3,
    mic: Point3,
    max_order: usize,
    sample_rate: f64,
) -> Result<RoomImpulseResponse> {
    for &p in &[src, mic] {
        if !strictly_inside(room, p) {
            return Err(Error::DeviceOutsideRoom(p[0], p[1], p[2]));
        }
    }
    let images = image_sources(room, src, max_order);
    let contributions: Vec<(f64, f64)> = images
        .iter()
        .filter(|img| img.gain > 0.0)
        .map(|img| {
            let d = distance(img.pos, mic);
            let amplitude = img.gain / (4.0 * std::f64::consts::PI * d);
            let delay = d / SPEED_OF_SOUND * sample_rate;
            (amplitude, delay)
        })
        .collect();
    let max_delay = contributions
        .iter()
        .map(|&(_, d)| d)
        .fold(0.0, f64::max);
    let mut taps = vec![0.0; max_delay.ceil() as usize + 2];
    for (amplitude, delay) in contributions {
        let k = delay.floor() as usize;
        let frac = delay - k as f64;
        taps[k] += amplitude * (1.0 - frac);
        taps[k + 1] += amplitude * frac;
    }
    Ok(RoomImpulseResponse { taps, sample_rate })
}

/// Convolve a source signal with a RIR, truncate to the source length and
/// add white Gaussian noise at the requested SNR. An infinite `snr_db`
/// skips the noise; a finite SNR over an all-zero signal is an error.
pub fn propagate(
    source: &[f64],
    rir: &RoomImpulseResponse,
    snr_db: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    assert!(!source.is_empty(), "source signal must be nonempty");
    let mut out = if rir.taps.len() <= 64 {
        let mut out = vec![0.0; source.len()];
        for (k, &h) in rir.taps.iter().enumerate() {
            if h == 0.0 {
                continue;
            }
            for (t, o) in out.iter_mut().enumerate().skip(k) {
                *o += h * source[t - k];
            }
        }
        out
    } else {
        let mut full = fft_convolve(source, &rir.taps);
        full.truncate(source.len());
        full
    };
    if snr_db.is_finite() {
        let power = out.iter().map(|&v| v * v).sum::<f64>() / out.len() as f64;
        if power == 0.0 {
            return Err(Error::SilentSignal { snr_db });
        }
        let noise_std = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        for v in out.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *v += noise_std * n;
        }
    }
    Ok(out)
}

/// Reverberation time from the Schroeder backward energy integral: a
/// least-squares line through the decay between -5 dB and -15 dB,
/// extrapolated to 60 dB. The fit stops at -15 dB because image-source
/// responses are order-truncated and the integral dives artificially once
/// it runs out of populated tail. Returns None when the decay never
/// reaches -15 dB or never leaves -5 dB.
pub fn schroeder_t60(rir: &RoomImpulseResponse) -> Option<f64> {
    let mut edc: Vec<f64> = Vec::with_capacity(rir.taps.len());
    let mut acc = 0.0;
    for &t in rir.taps.iter().rev() {
        acc += t * t;
        edc.push(acc);
    }
    edc.reverse();
    let total = *edc.first()?;
    if total <= 0.0 {
        return None;
    }
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0, 0.0, 0.0, 0.0);
    for (k, &e) in edc.iter().enumerate() {
        let db = 10.0 * (e / total).log10();
        if db <= -5.0 && db >= -15.0 {
            let t = k as f64 / rir.sample_rate;
            n += 1.0;
            sx += t;
            sy += db;
            sxx += t * t;
            sxy += t * db;
        }
    }
    if n < 2.0 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if slope >= 0.0 {
        return None;
    }
    Some(-60.0 / slope)
}

/// Eyring's reverberation-time prediction from the room geometry and its
/// mean absorption. Fully absorbing rooms return 0.
pub fn eyring_t60(room: &Room) -> f64 {
    let mean = room.mean_absorption();
    if mean >= 1.0 {
        return 0.0;
    }
    0.161 * room.volume() / (-room.surface_area() * (1.0 - mean).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SAMPLE_RATE;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn test_room(absorption: f64) -> Room {
        Room::uniform([6.0, 5.0, 3.0], absorption).unwrap()
    }

    #[test]
    fn direct_path_lands_at_the_expected_delay_and_gain() {
        let room = test_room(0.3);
        let src = [2.0, 3.0, 1.5];
        let mic = [4.0, 3.0, 1.5];
        let rir = simulate_rir(&room, src, mic, 0, SAMPLE_RATE).unwrap();
        let nonzero: Vec<usize> = (0..rir.taps.len()).filter(|&k| rir.taps[k] != 0.0).collect();
        assert_eq!(nonzero.len(), 2, "direct path spans two adjacent taps");
        assert_eq!(nonzero[1], nonzero[0] + 1);
        let com: f64 = nonzero.iter().map(|&k| k as f64 * rir.taps[k]).sum::<f64>()
            / nonzero.iter().map(|&k| rir.taps[k]).sum::<f64>();
        let expected_delay = 2.0 / SPEED_OF_SOUND * SAMPLE_RATE;
        assert!((com - expected_delay).abs() < 0.5, "com {com} vs {expected_delay}");
        let total: f64 = rir.taps.iter().sum();
        let expected_gain = 1.0 / (4.0 * std::f64::consts::PI * 2.0);
        assert!((total - expected_gain).abs() < 1e-12);
    }

    #[test]
    fn first_order_gives_seven_images() {
        let room = test_room(0.3);
        let images = image_sources(&room, [2.0, 3.0, 1.5], 1);
        assert_eq!(images.len(), 7);
        // exactly one image is the source itself
        let direct: Vec<_> = images
            .iter()
            .filter(|i| i.pos == [2.0, 3.0, 1.5])
            .collect();
        assert_eq!(direct.len(), 1);
        assert_eq!(direct[0].gain, 1.0);
    }

    #[test]
    fn direct_delay_matches_geometry_across_scenes() {
        let room = test_room(0.4);
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..20 {
            let draw = |rng: &mut ChaCha12Rng, d: f64| rng.random_range(0.3..d - 0.3);
            let src = [
                draw(&mut rng, 6.0),
                draw(&mut rng, 5.0),
                draw(&mut rng, 3.0),
            ];
            let mic = [
                draw(&mut rng, 6.0),
                draw(&mut rng, 5.0),
                draw(&mut rng, 3.0),
            ];
            let rir = simulate_rir(&room, src, mic, 10, SAMPLE_RATE).unwrap();
            let first = rir.taps.iter().position(|&t| t != 0.0).unwrap();
            let expected = distance(src, mic) / SPEED_OF_SOUND * SAMPLE_RATE;
            assert!(
                (first as f64 - expected).abs() <= 1.0,
                "first tap {first} vs direct delay {expected}"
            );
        }
    }

    #[test]
    fn devices_on_walls_are_rejected() {
        let room = test_room(0.3);
        assert!(matches!(
            simulate_rir(&room, [0.0, 2.0, 1.5], [3.0, 2.0, 1.5], 0, SAMPLE_RATE),
            Err(Error::DeviceOutsideRoom(..))
        ));
        assert!(matches!(
            simulate_rir(&room, [2.0, 2.0, 1.5], [3.0, 5.0, 1.5], 0, SAMPLE_RATE),
            Err(Error::DeviceOutsideRoom(..))
        ));
    }

    #[test]
    fn higher_absorption_removes_energy() {
        let src = [2.0, 3.0, 1.5];
        let mic = [4.5, 2.0, 1.2];
        let lively = simulate_rir(&test_room(0.2), src, mic, 10, SAMPLE_RATE).unwrap();
        let damped = simulate_rir(&test_room(0.4), src, mic, 10, SAMPLE_RATE).unwrap();
        assert!(damped.energy() < lively.energy());
    }

    #[test]
    fn t60_tracks_the_eyring_prediction() {
        let room = Room::uniform([5.0, 5.0, 5.0], 0.3).unwrap();
        let predicted = eyring_t60(&room);
        assert!((predicted - 0.376).abs() < 0.01, "eyring {predicted}");
        // order 10 matches the dataset default; power drops by 0.7 per
        // reflection so the populated decay ends near -15 dB, which is
        // exactly the range the estimator fits
        let rir = simulate_rir(&room, [1.3, 2.1, 2.7], [3.6, 3.2, 1.9], 10, SAMPLE_RATE).unwrap();
        let measured = schroeder_t60(&rir).expect("decay reaches -15 dB");
        let rel = (measured - predicted).abs() / predicted;
        assert!(rel < 0.35, "measured {measured} vs predicted {predicted}");
    }

    #[test]
    fn fully_absorbing_room_has_zero_t60() {
        let room = Room::uniform([4.0, 4.0, 3.0], 1.0).unwrap();
        assert_eq!(eyring_t60(&room), 0.0);
    }

    #[test]
    fn unit_impulse_propagation_is_identity() {
        let rir = RoomImpulseResponse {
            taps: vec![1.0],
            sample_rate: SAMPLE_RATE,
        };
        let x: Vec<f64> = (0..500).map(|t| (t as f64 * 0.1).sin()).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let y = propagate(&x, &rir, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn delta_rir_delays_and_scales() {
        let mut taps = vec![0.0; 81];
        taps[80] = 0.5;
        let rir = RoomImpulseResponse {
            taps,
            sample_rate: SAMPLE_RATE,
        };
        let x: Vec<f64> = (0..400).map(|t| ((t * 13) % 7) as f64).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let y = propagate(&x, &rir, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(y.len(), 400);
        for t in 0..400 {
            let expect = if t >= 80 { 0.5 * x[t - 80] } else { 0.0 };
            assert!((y[t] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn additive_noise_hits_the_requested_snr() {
        let rir = RoomImpulseResponse {
            taps: vec![1.0],
            sample_rate: SAMPLE_RATE,
        };
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let x: Vec<f64> = (0..8000)
            .map(|t| (t as f64 * 0.37).sin() + 0.4 * (t as f64 * 0.11).cos())
            .collect();
        let clean = propagate(&x, &rir, f64::INFINITY, &mut rng).unwrap();
        let noisy = propagate(&x, &rir, 20.0, &mut rng).unwrap();
        let sig_power = clean.iter().map(|&v| v * v).sum::<f64>() / clean.len() as f64;
        let noise_power = clean
            .iter()
            .zip(&noisy)
            .map(|(&c, &n)| (n - c) * (n - c))
            .sum::<f64>()
            / clean.len() as f64;
        let measured = 10.0 * (sig_power / noise_power).log10();
        assert!((measured - 20.0).abs() < 0.5, "measured SNR {measured}");
    }

    #[test]
    fn silent_signal_with_finite_snr_is_an_error() {
        let rir = RoomImpulseResponse {
            taps: vec![0.0, 0.0],
            sample_rate: SAMPLE_RATE,
        };
        let x = vec![1.0; 100];
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(
            propagate(&x, &rir, 20.0, &mut rng),
            Err(Error::SilentSignal { .. })
        ));
    }
}
