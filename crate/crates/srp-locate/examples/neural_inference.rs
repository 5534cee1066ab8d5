//! Run one set of network weights on scenes with different microphone
//! counts and room shapes: the pairwise design needs no retraining when the
//! array changes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use srp_locate::config::RunConfig;
use srp_locate::neural::{forward_scene, ModelWeights};
use srp_locate::sim::{sample_scenario, propagate, simulate_rir, synth_source, SimConfig};
use srp_locate::SAMPLE_RATE;

fn main() -> srp_locate::Result<()> {
    let run = RunConfig::default();
    // Untrained weights still exercise the full forward pass; swap in a
    // trained file via neural::load_weights for real maps.
    let weights = ModelWeights::<f32>::init(run.model.clone(), 3);
    let mut rng = ChaCha12Rng::seed_from_u64(20);

    for mic_count in [2usize, 4, 8] {
        let sim = SimConfig { mic_count, ..SimConfig::reverb_desk() };
        let scenario = sample_scenario(&sim, &mut rng)?;
        let dry = synth_source(&mut rng);
        let snr_db = rng.random_range(15.0..30.0);
        let mut signals = Vec::new();
        for &mic in &scenario.mics.positions {
            let rir = simulate_rir(&scenario.room, scenario.source, mic, 10, SAMPLE_RATE)?;
            signals.push(propagate(&dry, &rir, snr_db, &mut rng)?);
        }

        let map = forward_scene(&weights, &signals, &scenario.mics, &scenario.room, run.z_plane)?;
        let estimate = map.estimate()?;
        let err = ((estimate[0] - scenario.source[0]).powi(2)
            + (estimate[1] - scenario.source[1]).powi(2))
        .sqrt();
        println!(
            "M={mic_count}: room {:.1}x{:.1} m, {} pairs summed, estimate [{:.2}, {:.2}], error {err:.2} m",
            scenario.room.dims[0],
            scenario.room.dims[1],
            scenario.mics.pair_count(),
            estimate[0],
            estimate[1],
        );
    }
    Ok(())
}
