//! Verify every analytic gradient of the pairwise network against central
//! finite differences in double precision.

use srp_locate::neural::finite_difference_check;

fn main() -> srp_locate::Result<()> {
    // Runs a downsized model (4 conv channels, 8 GRU units, 5x5 grid) so the
    // full parameter sweep finishes in seconds; the layer math is identical
    // to the full-width network.
    let report = finite_difference_check(1)?;
    println!("parameters checked : {}", report.checked);
    println!("max relative error : {:.3e}", report.max_rel_err);
    println!("worst tensor       : {}[{}]", report.worst_tensor, report.worst_index);
    assert!(
        report.max_rel_err < 1e-4,
        "analytic and finite-difference gradients disagree"
    );
    println!("gradients agree within 1e-4");
    Ok(())
}
