//! Simulate a shoebox room impulse response with the image-source method
//! and compare its measured reverberation time against the Eyring formula.

use srp_locate::sim::{eyring_t60, schroeder_t60, simulate_rir, AnechoicPath};
use srp_locate::{Room, SAMPLE_RATE, SPEED_OF_SOUND};

fn main() -> srp_locate::Result<()> {
    let room = Room::uniform([6.0, 4.5, 3.0], 0.3)?;
    let src = [1.2, 2.0, 1.6];
    let mic = [4.8, 2.8, 1.4];

    let direct = AnechoicPath::between(src, mic);
    println!("direct path    : {:.2} ms, gain {:.4}", direct.delay * 1e3, direct.attenuation);

    for order in [0usize, 4, 10] {
        let rir = simulate_rir(&room, src, mic, order, SAMPLE_RATE)?;
        let energy: f64 = rir.taps.iter().map(|t| t * t).sum();
        // Center of mass of the first nonzero taps marks the direct arrival.
        let first = rir.taps.iter().position(|&t| t != 0.0).unwrap();
        println!(
            "order {order:2}       : {} taps, first at sample {first} (expect {:.1}), energy {energy:.3e}",
            rir.taps.len(),
            direct.delay * SAMPLE_RATE,
        );
    }

    let rir = simulate_rir(&room, src, mic, 10, SAMPLE_RATE)?;
    let measured = schroeder_t60(&rir).expect("decay reaches -15 dB");
    let formula = eyring_t60(&room);
    println!("Eyring T60     : {formula:.3} s");
    println!("Schroeder T60  : {measured:.3} s (early-decay fit on a truncated tail)");

    // Anechoic responses collapse to the direct path: two taps around the
    // fractional delay whose sum preserves the 1/(4 pi d) attenuation.
    let anechoic = simulate_rir(&room, src, mic, 0, SAMPLE_RATE)?;
    let sum: f64 = anechoic.taps.iter().sum();
    println!("anechoic sum   : {sum:.6} vs 1/(4 pi d) = {:.6}", direct.attenuation);
    let d = direct.delay * SPEED_OF_SOUND;
    assert!((sum - 1.0 / (4.0 * std::f64::consts::PI * d)).abs() < 1e-12);
    Ok(())
}
