//! Benchmark classical SRP (and optionally the network) over a simulated
//! dataset and print the summary table alongside the published reference
//! numbers the pipeline is patterned after.

use srp_locate::eval::{
    improvement_over_baseline, improvement_relative_to_improved, run_benchmark, summarize,
    Method, PUBLISHED_RESULTS,
};
use srp_locate::sim::{generate_dataset, SimConfig, Split};
use srp_locate::{DEFAULT_GRID_SIDE, DEFAULT_Z_PLANE};

fn main() -> srp_locate::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = SimConfig {
        n_train: 1,
        n_val: 1,
        n_test: 20,
        mic_count: 4,
        ..SimConfig::reverb_desk()
    };
    let entries = generate_dataset(&config, dir.path(), 77)?;
    let test: Vec<_> = entries.into_iter().filter(|e| e.split == Split::Test).collect();

    let records = run_benchmark(
        dir.path(),
        &test,
        &[Method::Srp],
        None,
        DEFAULT_GRID_SIDE,
        DEFAULT_Z_PLANE,
    )?;
    for summary in summarize("reverb-desk-test", &records)? {
        println!(
            "{:16} {:7} mean {:.2} m  std {:.2} m  (n={})",
            summary.dataset, summary.method.to_string(), summary.mean_m, summary.std_m, summary.n
        );
    }

    // Reference results from much larger training runs, for orientation.
    println!("\npublished reference (10k-sample training):");
    for r in &PUBLISHED_RESULTS {
        let vs_baseline = 100.0 * improvement_over_baseline(r.srp_mean_m, r.neural_mean_m);
        let vs_improved = 100.0 * improvement_relative_to_improved(r.srp_mean_m, r.neural_mean_m);
        println!(
            "{:14} SRP {:.2}±{:.2} m, neural {:.2}±{:.2} m  (-{:.0}% of SRP, {:.0}% relative gain)",
            r.dataset, r.srp_mean_m, r.srp_std_m, r.neural_mean_m, r.neural_std_m,
            vs_baseline, vs_improved
        );
    }
    Ok(())
}
