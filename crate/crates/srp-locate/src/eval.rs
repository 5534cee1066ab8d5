//! Localization-error metric, aggregate statistics, benchmark runner and
//! CSV reports.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CandidateGrid;
use crate::neural::{forward_scene, ModelWeights};
use crate::sim::{load_sample_audio, ManifestEntry};
use crate::srp::srp_global;
use crate::SAMPLE_RATE;

/// Localization method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Srp,
    Neural,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Srp => write!(f, "srp"),
            Method::Neural => write!(f, "neural"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "srp" => Ok(Method::Srp),
            "neural" => Ok(Method::Neural),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// One sample evaluated with one method.
#[derive(Debug, Clone, Serialize)]
pub struct EvalRecord {
    pub id: String,
    pub method: Method,
    /// Estimated source position on the grid plane (m).
    pub estimate: [f64; 2],
    /// True source position projected to 2D (m).
    pub truth: [f64; 2],
    pub error_m: f64,
    pub runtime_s: f64,
}

/// Mean and population standard deviation for one method on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub dataset: String,
    pub method: Method,
    pub mean_m: f64,
    pub std_m: f64,
    pub n: usize,
}

/// Distance in meters between estimated and true source position.
pub fn localization_error(estimate: [f64; 2], truth: [f64; 2]) -> f64 {
    let dx = estimate[0] - truth[0];
    let dy = estimate[1] - truth[1];
    (dx * dx + dy * dy).sqrt()
}

/// Arithmetic mean and population (1/N) standard deviation. Values are
/// summed in sorted order, so any permutation of the input produces the
/// identical result.
pub fn mean_and_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyGroup("no error values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Aggregate records into one summary row per method, in a fixed method
/// order. Errs if there are no records at all.
pub fn summarize(dataset: &str, records: &[EvalRecord]) -> Result<Vec<GroupSummary>> {
    if records.is_empty() {
        return Err(Error::EmptyGroup(format!("no records for '{dataset}'")));
    }
    let mut out = Vec::new();
    for method in [Method::Srp, Method::Neural] {
        let errors: Vec<f64> = records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.error_m)
            .collect();
        if errors.is_empty() {
            continue;
        }
        let (mean_m, std_m) = mean_and_std(&errors)?;
        out.push(GroupSummary {
            dataset: dataset.to_string(),
            method,
            mean_m,
            std_m,
            n: errors.len(),
        });
    }
    Ok(out)
}

/// Evaluate the requested methods on every manifest entry. Samples run in
/// parallel; records come back sorted by id, then method.
pub fn run_benchmark(
    manifest_dir: &Path,
    entries: &[ManifestEntry],
    methods: &[Method],
    weights: Option<&ModelWeights<f32>>,
    grid_side: usize,
    z_plane: f64,
) -> Result<Vec<EvalRecord>> {
    if entries.is_empty() {
        return Err(Error::EmptyGroup("no manifest entries".into()));
    }
    if methods.contains(&Method::Neural) && weights.is_none() {
        return Err(Error::MissingWeights);
    }
    let mut records: Vec<EvalRecord> = entries
        .par_iter()
        .map(|entry| {
            let audio = load_sample_audio(manifest_dir, entry)?;
            let room = entry.room()?;
            let mics = entry.placement()?;
            let truth = [entry.source_position[0], entry.source_position[1]];
            let mut sample_records = Vec::with_capacity(methods.len());
            for &method in methods {
                let start = Instant::now();
                let map = match method {
                    Method::Srp => {
                        let grid = CandidateGrid::new(&room, z_plane, grid_side)?;
                        srp_global(&audio, &mics, &grid, SAMPLE_RATE)?
                    }
                    Method::Neural => {
                        forward_scene(weights.expect("checked above"), &audio, &mics, &room, z_plane)?
                    }
                };
                let estimate3 = map.estimate()?;
                let runtime_s = start.elapsed().as_secs_f64();
                let estimate = [estimate3[0], estimate3[1]];
                sample_records.push(EvalRecord {
                    id: entry.id.clone(),
                    method,
                    estimate,
                    truth,
                    error_m: localization_error(estimate, truth),
                    runtime_s,
                });
            }
            Ok(sample_records)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    records.sort_by(|a, b| {
        a.id.cmp(&b.id)
            .then_with(|| a.method.to_string().cmp(&b.method.to_string()))
    });
    Ok(records)
}

/// Write `per_sample.csv` with one row per record.
pub fn write_per_sample_csv(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut text = String::from("id,method,error_m,runtime_s\n");
    for r in records {
        text.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            r.id, r.method, r.error_m, r.runtime_s
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write `summary.csv` with one row per dataset and method.
pub fn write_summary_csv(path: &Path, summaries: &[GroupSummary]) -> Result<()> {
    let mut text = String::from("dataset,method,mean_m,std_m,n\n");
    for s in summaries {
        text.push_str(&format!(
            "{},{},{:.6},{:.6},{}\n",
            s.dataset, s.method, s.mean_m, s.std_m, s.n
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Published mean and standard deviation of the localization error (m) for
/// classical SRP and the learned model on four reference datasets. Used as
/// sanity anchors in reports, never as test equalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceResult {
    pub dataset: &'static str,
    pub srp_mean_m: f64,
    pub srp_std_m: f64,
    pub neural_mean_m: f64,
    pub neural_std_m: f64,
}

pub const PUBLISHED_RESULTS: [ReferenceResult; 4] = [
    ReferenceResult {
        dataset: "reverb-sim-4",
        srp_mean_m: 1.86,
        srp_std_m: 1.46,
        neural_mean_m: 1.17,
        neural_std_m: 0.87,
    },
    ReferenceResult {
        dataset: "recorded-4",
        srp_mean_m: 1.19,
        srp_std_m: 1.53,
        neural_mean_m: 0.77,
        neural_std_m: 0.66,
    },
    ReferenceResult {
        dataset: "reverb-sim-6",
        srp_mean_m: 1.51,
        srp_std_m: 1.32,
        neural_mean_m: 0.90,
        neural_std_m: 0.66,
    },
    ReferenceResult {
        dataset: "recorded-6",
        srp_mean_m: 0.75,
        srp_std_m: 1.04,
        neural_mean_m: 0.56,
        neural_std_m: 0.46,
    },
];

/// Error reduction as a fraction of the baseline error. This is the
/// convention this crate reports: reverb-sim-4 gives about 37%.
pub fn improvement_over_baseline(baseline: f64, improved: f64) -> f64 {
    (baseline - improved) / baseline
}

/// Error reduction as a fraction of the improved error. The widely quoted
/// 59/54/67/34% figures for the reference datasets follow this convention;
/// it is kept so both readings can be reproduced from the same numbers.
pub fn improvement_relative_to_improved(baseline: f64, improved: f64) -> f64 {
    (baseline - improved) / improved
}
