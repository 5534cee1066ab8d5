//! Render the two training-target grids — Gaussian around the source and
//! hyperbolic along the pair's constant-TDOA curve — and evaluate the
//! mean-absolute-error loss between them.

use srp_locate::targets::{gaussian_grid, hyperbolic_grid, mae_loss, TargetConfig};
use srp_locate::{CandidateGrid, Room};

fn main() -> srp_locate::Result<()> {
    let room = Room::uniform([5.0, 4.0, 3.0], 0.3)?;
    let grid = CandidateGrid::new(&room, 1.5, 25)?;
    let config = TargetConfig::default();

    // Put the source on a cell center: the Gaussian target is exactly 1.0
    // there and decays with distance.
    let source = grid.point(8, 14);
    let gauss = gaussian_grid([source[0], source[1]], &grid, config.sigma_gaussian);
    let (ix, iy) = gauss.argmax()?;
    println!("gaussian target : peak {:.3} at cell ({ix}, {iy})", gauss.values[(iy, ix)]);

    // The hyperbolic target for one microphone pair scores each cell by how
    // close its TDOA sits to the source's TDOA, so whole hyperbola branches
    // light up instead of a single spot.
    let p_i = [0.5, 0.5, 1.2];
    let p_j = [4.5, 3.5, 1.2];
    let hyper = hyperbolic_grid([source[0], source[1]], p_i, p_j, &grid, config.sigma_hyperbolic);
    let on_curve = hyper.values.iter().filter(|&&v| v > 0.99).count();
    println!("hyperbolic target: {} of {} cells above 0.99", on_curve, 25 * 25);
    println!("  source cell value {:.6}", hyper.values[(iy, ix)]);

    let (loss, _grad) = mae_loss(&hyper, &gauss)?;
    println!("MAE(hyperbolic, gaussian) = {loss:.4}");

    // A pair-summed network trained on hyperbolic grids mimics SRP's
    // correlation ridges; the gaussian grid is the scene-level target.
    let (self_loss, _) = mae_loss(&gauss, &gauss)?;
    assert_eq!(self_loss, 0.0);
    Ok(())
}
