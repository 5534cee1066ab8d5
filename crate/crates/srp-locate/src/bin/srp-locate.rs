//! Batch command-line interface: dataset synthesis, classical SRP maps,
//! model training, inference, evaluation, map export and a gradient check.
//!
//! Every run starts by printing the resolved configuration and master seed
//! as plain `key=value` lines, so logs alone are enough to reproduce a run.
//! Failures print a single machine-parsable line
//! `error category=<cat> message="..."` on stderr and exit 1; flag and
//! usage errors exit 2.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use ndarray::Array2;

use srp_locate::config::{Preset, RunConfig};
use srp_locate::eval::{
    run_benchmark, summarize, write_per_sample_csv, write_summary_csv, Method,
};
use srp_locate::neural::{
    build_training_items, finite_difference_check, forward_scene, load_weights, save_weights,
    train_stage, ModelWeights, Stage,
};
use srp_locate::sim::{
    generate_dataset, load_manifest, load_sample_audio, ManifestEntry, SourceMode, Split,
    MANIFEST_NAME,
};
use srp_locate::{CandidateGrid, Error, LikelihoodGrid, Result, Room};

#[derive(Parser)]
#[command(name = "srp-locate", version, about = "2D sound source localization over ad-hoc microphone arrays", max_term_width = 100)]
struct Cli {
    /// TOML run configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Named base configuration: anechoic-desk, reverb-desk, anechoic-paper
    /// or reverb-paper.
    #[arg(long, global = true, conflicts_with = "config", value_name = "NAME")]
    preset: Option<String>,

    /// Master seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; defaults to all cores, 1 forces a serial run.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset and its JSON-lines manifest.
    Simulate {
        /// Dataset output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Classical SRP-PHAT likelihood map for one manifest scene.
    Srp {
        /// Dataset directory (or manifest path).
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Manifest entry id.
        #[arg(long, value_name = "ID")]
        scene: String,
        /// Map destination; a .pgm extension writes an image, anything
        /// else CSV.
        #[arg(long, value_name = "FILE")]
        out_map: PathBuf,
    },
    /// Train one stage of the model on a dataset's train/val splits.
    Train {
        /// anechoic or reverb.
        #[arg(long, value_parser = Stage::from_str)]
        stage: Stage,
        /// Dataset directory (or manifest path).
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Starting weights; fresh seeded initialization when omitted.
        #[arg(long, value_name = "FILE")]
        init: Option<PathBuf>,
        /// Weight file destination.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Neural likelihood map for one manifest scene.
    Infer {
        /// Trained weight file.
        #[arg(long, value_name = "FILE")]
        weights: PathBuf,
        /// Dataset directory (or manifest path).
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Manifest entry id.
        #[arg(long, value_name = "ID")]
        scene: String,
        /// Map destination; a .pgm extension writes an image, anything
        /// else CSV.
        #[arg(long, value_name = "FILE")]
        out_map: PathBuf,
    },
    /// Localization error of each method over a manifest.
    Evaluate {
        /// Dataset directory (or manifest path).
        #[arg(long, value_name = "PATH")]
        data: PathBuf,
        /// Comma-separated methods: srp,neural.
        #[arg(long, value_delimiter = ',', default_value = "srp", value_parser = Method::from_str)]
        methods: Vec<Method>,
        /// Weight file; required when methods include neural.
        #[arg(long, value_name = "FILE")]
        weights: Option<PathBuf>,
        /// Restrict to one split (train, val or test); default all entries.
        #[arg(long, value_name = "SPLIT")]
        split: Option<String>,
        /// Directory receiving per_sample.csv and summary.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Convert a likelihood map CSV into an 8-bit PGM image.
    ExportMap {
        /// Square map CSV, row 0 at the smallest y.
        #[arg(long, value_name = "FILE")]
        map: PathBuf,
        /// PGM destination.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Compare analytic gradients against central finite differences on a
    /// downsized model; passes iff the max relative error is below 1e-4.
    Gradcheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let built = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
        if let Err(e) = built {
            eprintln!("error category=config message=\"thread pool: {e}\"");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "error category={} message=\"{}\"",
                e.category(),
                // keep the line single-line and quote-safe for log scrapers
                e.to_string().replace('"', "'").replace('\n', " ")
            );
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    for (key, value) in config.key_values() {
        println!("{key}={value}");
    }
    match &cli.command {
        Command::Simulate { out } => simulate(&config, out),
        Command::Srp {
            data,
            scene,
            out_map,
        } => srp_map(&config, data, scene, out_map),
        Command::Train {
            stage,
            data,
            init,
            out,
        } => train(&config, *stage, data, init.as_deref(), out),
        Command::Infer {
            weights,
            data,
            scene,
            out_map,
        } => infer(&config, weights, data, scene, out_map),
        Command::Evaluate {
            data,
            methods,
            weights,
            split,
            out,
        } => evaluate(
            &config,
            data,
            methods,
            weights.as_deref(),
            split.as_deref(),
            out,
        ),
        Command::ExportMap { map, out } => export_map(map, out),
        Command::Gradcheck => gradcheck(&config),
    }
}

/// Preset or config file, then flag overrides, then the corpus-directory
/// fallback from SRP_LOCATE_DATA.
fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => Preset::from_str(name)?.run_config(),
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.train.seed = seed;
    }
    if config.corpus_dir.is_none() {
        if let Some(dir) = std::env::var_os("SRP_LOCATE_DATA") {
            if !dir.is_empty() {
                config.corpus_dir = Some(PathBuf::from(dir));
            }
        }
    }
    if let Some(dir) = &config.corpus_dir {
        if config.sim.source_mode == SourceMode::Synthetic {
            config.sim.source_mode = SourceMode::WavCorpus { dir: dir.clone() };
        }
    }
    config.validate()?;
    Ok(config)
}

fn simulate(config: &RunConfig, out: &Path) -> Result<()> {
    let entries = generate_dataset(&config.sim, out, config.seed)?;
    let count = |split: Split| entries.iter().filter(|e| e.split == split).count();
    println!("manifest={}", out.join(MANIFEST_NAME).display());
    println!(
        "entries={} train={} val={} test={}",
        entries.len(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test)
    );
    Ok(())
}

fn srp_map(config: &RunConfig, data: &Path, scene: &str, out_map: &Path) -> Result<()> {
    let (dir, entries) = open_manifest(data)?;
    let entry = find_entry(&entries, scene)?;
    let signals = load_sample_audio(&dir, &entry)?;
    let room = entry.room()?;
    let mics = entry.placement()?;
    let grid = CandidateGrid::new(&room, config.z_plane, config.grid_side)?;
    let map = srp_locate::srp::srp_global(&signals, &mics, &grid, f64::from(entry.sample_rate))?;
    write_map(&map, out_map)?;
    report_estimate(&map, &entry, out_map)
}

fn train(
    config: &RunConfig,
    stage: Stage,
    data: &Path,
    init: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let (dir, entries) = open_manifest(data)?;
    let of_split = |split: Split| -> Vec<ManifestEntry> {
        entries
            .iter()
            .filter(|e| e.split == split)
            .cloned()
            .collect()
    };
    let train_set = build_training_items(&dir, &of_split(Split::Train), &config.model, &config.targets)?;
    let val_set = build_training_items(&dir, &of_split(Split::Val), &config.model, &config.targets)?;
    let weights = match init {
        Some(path) => load_weights(path)?,
        None => ModelWeights::<f32>::init(config.model.clone(), config.seed),
    };
    println!(
        "stage={stage} train_scenes={} val_scenes={} params={}",
        train_set.scenes.len(),
        val_set.scenes.len(),
        weights.config.param_count()
    );
    let (best, history) = train_stage(&weights, &train_set, &val_set, &config.train, stage)?;
    for (epoch, (t, v)) in history
        .train_loss
        .iter()
        .zip(history.val_loss.iter())
        .enumerate()
    {
        println!("epoch={epoch} train_loss={t:.6} val_loss={v:.6}");
    }
    println!("best_epoch={}", history.best_epoch);
    if let Some(epoch) = history.early_stop {
        println!("early_stop={epoch}");
    }
    save_weights(&best, out)?;
    println!("weights={}", out.display());
    Ok(())
}

fn infer(
    config: &RunConfig,
    weights_path: &Path,
    data: &Path,
    scene: &str,
    out_map: &Path,
) -> Result<()> {
    let weights = load_weights(weights_path)?;
    let (dir, entries) = open_manifest(data)?;
    let entry = find_entry(&entries, scene)?;
    let signals = load_sample_audio(&dir, &entry)?;
    let room = entry.room()?;
    let mics = entry.placement()?;
    let map = forward_scene(&weights, &signals, &mics, &room, config.z_plane)?;
    write_map(&map, out_map)?;
    report_estimate(&map, &entry, out_map)
}

fn evaluate(
    config: &RunConfig,
    data: &Path,
    methods: &[Method],
    weights_path: Option<&Path>,
    split: Option<&str>,
    out: &Path,
) -> Result<()> {
    let (dir, mut entries) = open_manifest(data)?;
    if let Some(name) = split {
        let wanted = parse_split(name)?;
        entries.retain(|e| e.split == wanted);
    }
    let weights = weights_path.map(load_weights).transpose()?;
    let records = run_benchmark(
        &dir,
        &entries,
        methods,
        weights.as_ref(),
        config.grid_side,
        config.z_plane,
    )?;
    let dataset = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let summaries = summarize(&dataset, &records)?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let per_sample = out.join("per_sample.csv");
    let summary = out.join("summary.csv");
    write_per_sample_csv(&per_sample, &records)?;
    write_summary_csv(&summary, &summaries)?;
    for s in &summaries {
        println!(
            "dataset={} method={} mean_m={:.6} std_m={:.6} n={}",
            s.dataset, s.method, s.mean_m, s.std_m, s.n
        );
    }
    println!("per_sample={}", per_sample.display());
    println!("summary={}", summary.display());
    Ok(())
}

fn export_map(map_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(map_path).map_err(|e| Error::Io {
        path: map_path.to_path_buf(),
        source: e,
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::Config(format!("map csv line {}: {e}", i + 1)))?);
    }
    let side = rows.len();
    if side < 2 || rows.iter().any(|r| r.len() != side) {
        return Err(Error::Config(format!(
            "map csv must be square with side >= 2, got {side} rows"
        )));
    }
    let values = Array2::from_shape_fn((side, side), |(iy, ix)| rows[iy][ix]);
    // only the cell count matters for pixel output; geometry is arbitrary
    let room = Room::uniform([1.0, 1.0, 1.0], 0.5)?;
    let grid = CandidateGrid::new(&room, 0.5, side)?;
    let map = LikelihoodGrid::new(values, grid)?;
    map.write_pgm(out)?;
    println!("pgm={} side={side}", out.display());
    Ok(())
}

fn gradcheck(config: &RunConfig) -> Result<()> {
    let report = finite_difference_check(config.seed)?;
    println!(
        "max_rel_err={:.3e} worst_tensor={} worst_index={} checked={}",
        report.max_rel_err, report.worst_tensor, report.worst_index, report.checked
    );
    if report.max_rel_err < 1e-4 {
        println!("gradcheck=pass");
        Ok(())
    } else {
        Err(Error::NonFiniteGradient(format!(
            "{}[{}] relative error {:.3e} exceeds 1e-4",
            report.worst_tensor, report.worst_index, report.max_rel_err
        )))
    }
}

/// Accept either a dataset directory or a direct path to its manifest.
fn open_manifest(data: &Path) -> Result<(PathBuf, Vec<ManifestEntry>)> {
    let (dir, manifest) = if data.is_dir() {
        (data.to_path_buf(), data.join(MANIFEST_NAME))
    } else {
        let dir = data.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        (dir, data.to_path_buf())
    };
    let entries = load_manifest(&manifest)?;
    Ok((dir, entries))
}

fn find_entry(entries: &[ManifestEntry], id: &str) -> Result<ManifestEntry> {
    entries
        .iter()
        .find(|e| e.id == id)
        .cloned()
        .ok_or_else(|| Error::SceneNotFound(id.to_string()))
}

fn parse_split(name: &str) -> Result<Split> {
    match name {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(Error::Config(format!(
            "unknown split '{other}', expected train, val or test"
        ))),
    }
}

fn write_map(map: &LikelihoodGrid, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => map.write_pgm(path),
        _ => map.write_csv(path),
    }
}

fn report_estimate(map: &LikelihoodGrid, entry: &ManifestEntry, out_map: &Path) -> Result<()> {
    let estimate = map.estimate()?;
    let (ix, iy) = map.argmax()?;
    let dx = estimate[0] - entry.source_position[0];
    let dy = estimate[1] - entry.source_position[1];
    println!("scene={} map={}", entry.id, out_map.display());
    println!(
        "estimate_x={:.3} estimate_y={:.3} cell_ix={ix} cell_iy={iy} error_m={:.3}",
        estimate[0],
        estimate[1],
        (dx * dx + dy * dy).sqrt()
    );
    Ok(())
}
