//! Dataset synthesis: random rooms and device layouts, source signals,
//! multichannel rendering and the JSON-lines manifest.

mod rir;

pub use rir::{
    eyring_t60, propagate, schroeder_t60, simulate_rir, AnechoicPath, RoomImpulseResponse,
};

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, DevicePlacement, Point3, Room};
use crate::wav::{read_wav, write_wav_f32};
use crate::SAMPLE_RATE;

/// Every rendered excerpt is exactly half a second at 16 kHz.
pub const EXCERPT_SAMPLES: usize = 8000;

/// Sampling intervals for room extents, metres per axis.
pub const ROOM_RANGES: [[f64; 2]; 3] = [[3.0, 10.0], [3.0, 10.0], [2.0, 4.0]];

/// Minimum distance between any two devices (microphones and source).
pub const MIN_DEVICE_SPACING: f64 = 0.5;

/// Minimum distance from any device to the nearest room surface.
pub const WALL_CLEARANCE: f64 = 0.1;

const PLACEMENT_ATTEMPT_CAP: usize = 10_000;
const SYLLABIC_RATE_HZ: f64 = 4.0;
const SOURCE_RMS: f64 = 0.1;
const CORPUS_RMS_THRESHOLD: f64 = 0.01;

/// Where source excerpts come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceMode {
    /// Self-contained speech surrogate: envelope-modulated pink noise.
    Synthetic,
    /// Random 0.5 s excerpts from WAV files in a local directory.
    WavCorpus { dir: PathBuf },
}

impl Default for SourceMode {
    fn default() -> Self {
        SourceMode::Synthetic
    }
}

/// Dataset generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub mic_count: usize,
    pub reverberant: bool,
    /// Per-surface absorption interval for reverberant scenes.
    pub absorption_range: [f64; 2],
    /// Image-source reflection order; 0 keeps only the direct path.
    pub max_order: usize,
    pub snr_range_db: [f64; 2],
    pub source_mode: SourceMode,
    /// Fixed source height in metres; None draws it uniformly like the
    /// other coordinates.
    pub source_z: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::reverb_desk()
    }
}

impl SimConfig {
    /// Desk-scale reverberant set: 200/50/50 samples, four microphones.
    pub fn reverb_desk() -> Self {
        SimConfig {
            n_train: 200,
            n_val: 50,
            n_test: 50,
            mic_count: 4,
            reverberant: true,
            absorption_range: [0.02, 0.50],
            max_order: 10,
            snr_range_db: [15.0, 30.0],
            source_mode: SourceMode::Synthetic,
            source_z: None,
        }
    }

    /// Desk-scale anechoic set: direct path only, fully absorbing walls.
    pub fn anechoic_desk() -> Self {
        SimConfig {
            reverberant: false,
            max_order: 0,
            ..SimConfig::reverb_desk()
        }
    }

    /// Full-scale reverberant set: 10000/2500/2500 samples.
    pub fn reverb_paper() -> Self {
        SimConfig {
            n_train: 10_000,
            n_val: 2_500,
            n_test: 2_500,
            ..SimConfig::reverb_desk()
        }
    }

    /// Full-scale anechoic set.
    pub fn anechoic_paper() -> Self {
        SimConfig {
            reverberant: false,
            max_order: 0,
            ..SimConfig::reverb_paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(Error::Config("split sizes must all be at least 1".into()));
        }
        if self.mic_count < 2 {
            return Err(Error::TooFewMics(self.mic_count));
        }
        let [lo, hi] = self.absorption_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!(
                "absorption range must satisfy 0 < lo <= hi <= 1, got [{lo}, {hi}]"
            )));
        }
        if self.snr_range_db[0] > self.snr_range_db[1] {
            return Err(Error::Config("snr range is reversed".into()));
        }
        if let Some(z) = self.source_z {
            // must have wall clearance even in the lowest sampled room
            let max_z = ROOM_RANGES[2][0] - WALL_CLEARANCE;
            if !(WALL_CLEARANCE..=max_z).contains(&z) {
                return Err(Error::Config(format!(
                    "source_z must lie in [{WALL_CLEARANCE}, {max_z}] to fit every room, got {z}"
                )));
            }
        }
        Ok(())
    }

    pub fn count_for(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Val => self.n_val,
            Split::Test => self.n_test,
        }
    }
}

/// Dataset split tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    /// Per-split seed offset; splits can never collide for sane set sizes.
    fn seed_offset(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Val => 1 << 32,
            Split::Test => 1 << 33,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// A sampled world: the room, the microphones, and the source position.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub room: Room,
    pub mics: DevicePlacement,
    pub source: Point3,
}

/// One absorption coefficient per surface, drawn independently and
/// uniformly from the configured interval.
pub fn reflectivity_biased_absorption(rng: &mut impl Rng, range: [f64; 2]) -> [f64; 6] {
    let mut out = [0.0; 6];
    for a in out.iter_mut() {
        *a = rng.random_range(range[0]..=range[1]);
    }
    out
}

/// Draw a random scenario: room extents uniform in [3,10] x [3,10] x [2,4]
/// metres, then microphones and source placed uniformly with 0.1 m wall
/// clearance, rejection-sampled until every pair of devices is at least
/// 0.5 m apart. The source is drawn last so a pinned source height never
/// shifts the microphone draws.
pub fn sample_scenario(config: &SimConfig, rng: &mut impl Rng) -> Result<Scenario> {
    let dims = [
        rng.random_range(ROOM_RANGES[0][0]..=ROOM_RANGES[0][1]),
        rng.random_range(ROOM_RANGES[1][0]..=ROOM_RANGES[1][1]),
        rng.random_range(ROOM_RANGES[2][0]..=ROOM_RANGES[2][1]),
    ];
    let absorptions = if config.reverberant {
        reflectivity_biased_absorption(rng, config.absorption_range)
    } else {
        [1.0; 6]
    };
    let room = Room::new(dims, absorptions)?;
    let mut points: Vec<Point3> = Vec::with_capacity(config.mic_count + 1);
    let mut attempts = 0;
    while points.len() < config.mic_count + 1 {
        let is_source = points.len() == config.mic_count;
        let mut p = [
            rng.random_range(WALL_CLEARANCE..dims[0] - WALL_CLEARANCE),
            rng.random_range(WALL_CLEARANCE..dims[1] - WALL_CLEARANCE),
            rng.random_range(WALL_CLEARANCE..dims[2] - WALL_CLEARANCE),
        ];
        if is_source {
            if let Some(z) = config.source_z {
                p[2] = z;
            }
        }
        if points.iter().all(|&q| distance(p, q) >= MIN_DEVICE_SPACING) {
            points.push(p);
        }
        attempts += 1;
        if attempts >= PLACEMENT_ATTEMPT_CAP && points.len() < config.mic_count + 1 {
            return Err(Error::PlacementRejection(PLACEMENT_ATTEMPT_CAP));
        }
    }
    let source = points.pop().expect("mic_count + 1 points");
    let mics = DevicePlacement::new(points)?;
    Ok(Scenario { room, mics, source })
}

/// Speech surrogate: pink-filtered noise under a raised-cosine envelope at
/// the syllabic rate, normalized to 0.1 RMS. Always 8000 samples.
pub fn synth_source(rng: &mut impl Rng) -> Vec<f64> {
    // economy pink filter: three leaky integrators plus a direct tap
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    let mut out = Vec::with_capacity(EXCERPT_SAMPLES);
    for n in 0..EXCERPT_SAMPLES {
        let white: f64 = rng.random_range(-1.0..1.0);
        b0 = 0.99765 * b0 + white * 0.0990460;
        b1 = 0.96300 * b1 + white * 0.2965164;
        b2 = 0.57000 * b2 + white * 1.0526913;
        let pink = b0 + b1 + b2 + white * 0.1848;
        let t = n as f64 / SAMPLE_RATE;
        let envelope = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * SYLLABIC_RATE_HZ * t).cos());
        out.push(pink * envelope);
    }
    let rms = (out.iter().map(|&v| v * v).sum::<f64>() / out.len() as f64).sqrt();
    if rms > 0.0 {
        let gain = SOURCE_RMS / rms;
        for v in out.iter_mut() {
            *v *= gain;
        }
    }
    out
}

/// Source excerpt provider, prepared once per dataset run.
#[derive(Debug, Clone)]
pub enum SourcePool {
    Synthetic,
    Corpus { dir: PathBuf, files: Vec<PathBuf> },
}

impl SourcePool {
    pub fn prepare(mode: &SourceMode) -> Result<SourcePool> {
        match mode {
            SourceMode::Synthetic => Ok(SourcePool::Synthetic),
            SourceMode::WavCorpus { dir } => {
                let mut files: Vec<PathBuf> = fs::read_dir(dir)
                    .map_err(|e| Error::io(dir, e))?
                    .filter_map(|entry| entry.ok().map(|e| e.path()))
                    .filter(|p| {
                        p.extension()
                            .map_or(false, |ext| ext.eq_ignore_ascii_case("wav"))
                    })
                    .collect();
                files.sort();
                if files.is_empty() {
                    return Err(Error::EmptyCorpus(dir.clone()));
                }
                Ok(SourcePool::Corpus {
                    dir: dir.clone(),
                    files,
                })
            }
        }
    }

    /// Draw one 0.5 s source excerpt. Corpus mode retries random excerpts
    /// until one clears the RMS threshold, then falls back to the loudest
    /// candidate; a corpus with nothing but silence is an error.
    pub fn draw(&self, rng: &mut impl Rng) -> Result<Vec<f64>> {
        match self {
            SourcePool::Synthetic => Ok(synth_source(rng)),
            SourcePool::Corpus { dir, files } => {
                let mut best: Option<(f64, Vec<f64>)> = None;
                for _ in 0..100 {
                    let path = &files[rng.random_range(0..files.len())];
                    let wav = match read_wav(path) {
                        Ok(w) => w,
                        Err(_) => continue,
                    };
                    let Some(channel) = wav.channels.first() else {
                        continue;
                    };
                    if channel.len() < EXCERPT_SAMPLES {
                        continue;
                    }
                    let offset = rng.random_range(0..=channel.len() - EXCERPT_SAMPLES);
                    let excerpt = channel[offset..offset + EXCERPT_SAMPLES].to_vec();
                    let rms = (excerpt.iter().map(|&v| v * v).sum::<f64>()
                        / EXCERPT_SAMPLES as f64)
                        .sqrt();
                    if rms >= CORPUS_RMS_THRESHOLD {
                        return Ok(excerpt);
                    }
                    if best.as_ref().is_none_or(|(b, _)| rms > *b) {
                        best = Some((rms, excerpt));
                    }
                }
                match best {
                    Some((rms, excerpt)) if rms > 0.0 => Ok(excerpt),
                    _ => Err(Error::EmptyCorpus(dir.clone())),
                }
            }
        }
    }
}

/// One line of the dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
    /// WAV path relative to the manifest's directory.
    pub wav: PathBuf,
    pub sample_rate: u32,
    pub room_dims: [f64; 3],
    pub absorptions: [f64; 6],
    pub mic_positions: Vec<Point3>,
    pub source_position: Point3,
    pub seed: u64,
    pub snr_db: f64,
    pub t60_estimate: f64,
}

impl ManifestEntry {
    pub fn room(&self) -> Result<Room> {
        Room::new(self.room_dims, self.absorptions)
    }

    pub fn placement(&self) -> Result<DevicePlacement> {
        DevicePlacement::new(self.mic_positions.clone())
    }
}

/// File name of the manifest inside a dataset directory.
pub const MANIFEST_NAME: &str = "manifest.jsonl";

/// Generate a full dataset under `out_dir`: one multichannel WAV per sample
/// plus a JSON-lines manifest. Each sample derives its own RNG from the
/// master seed, its split and its index, so regeneration is bit-identical
/// and splits never share a seed.
pub fn generate_dataset(
    config: &SimConfig,
    out_dir: &Path,
    master_seed: u64,
) -> Result<Vec<ManifestEntry>> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = SourcePool::prepare(&config.source_mode)?;
    let jobs: Vec<(Split, usize)> = Split::ALL
        .iter()
        .flat_map(|&split| (0..config.count_for(split)).map(move |idx| (split, idx)))
        .collect();
    let entries = jobs
        .par_iter()
        .map(|&(split, idx)| generate_sample(config, &pool, out_dir, split, idx, master_seed))
        .collect::<Result<Vec<_>>>()?;
    let mut text = String::new();
    for entry in &entries {
        text.push_str(&serde_json::to_string(entry)?);
        text.push('\n');
    }
    let manifest_path = out_dir.join(MANIFEST_NAME);
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(entries)
}

fn generate_sample(
    config: &SimConfig,
    pool: &SourcePool,
    out_dir: &Path,
    split: Split,
    idx: usize,
    master_seed: u64,
) -> Result<ManifestEntry> {
    let seed = master_seed
        .wrapping_add(split.seed_offset())
        .wrapping_add(idx as u64);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // fixed draw order: scenario, SNR, source excerpt, per-mic noise
    let scenario = sample_scenario(config, &mut rng)?;
    let snr_db = rng.random_range(config.snr_range_db[0]..=config.snr_range_db[1]);
    let source_signal = pool.draw(&mut rng)?;
    let mut channels = Vec::with_capacity(config.mic_count);
    for &mic in &scenario.mics.positions {
        let rir = simulate_rir(
            &scenario.room,
            scenario.source,
            mic,
            config.max_order,
            SAMPLE_RATE,
        )?;
        channels.push(propagate(&source_signal, &rir, snr_db, &mut rng)?);
    }
    let id = format!("{split}-{idx:06}");
    let wav_name = format!("{id}.wav");
    write_wav_f32(out_dir.join(&wav_name), &channels, SAMPLE_RATE as u32)?;
    Ok(ManifestEntry {
        id,
        split,
        wav: PathBuf::from(wav_name),
        sample_rate: SAMPLE_RATE as u32,
        room_dims: scenario.room.dims,
        absorptions: scenario.room.absorptions,
        mic_positions: scenario.mics.positions.clone(),
        source_position: scenario.source,
        seed,
        snr_db,
        t60_estimate: eyring_t60(&scenario.room),
    })
}

/// Read a JSON-lines manifest.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| Ok(serde_json::from_str(line)?))
        .collect()
}

/// Load the per-microphone audio of one manifest entry.
pub fn load_sample_audio(manifest_dir: &Path, entry: &ManifestEntry) -> Result<Vec<Vec<f64>>> {
    Ok(read_wav(manifest_dir.join(&entry.wav))?.channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wav::write_wav_i16_mono;

    #[test]
    fn absorption_draws_stay_in_range_and_replay() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let a = reflectivity_biased_absorption(&mut rng, [0.02, 0.50]);
            assert!(a.iter().all(|&v| (0.02..=0.50).contains(&v)));
        }
        let a = reflectivity_biased_absorption(&mut ChaCha12Rng::seed_from_u64(9), [0.02, 0.50]);
        let b = reflectivity_biased_absorption(&mut ChaCha12Rng::seed_from_u64(9), [0.02, 0.50]);
        assert_eq!(a, b);
        // six independent draws virtually never coincide
        assert!(a.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn scenarios_respect_ranges_spacing_and_determinism() {
        let config = SimConfig::reverb_desk();
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        for _ in 0..200 {
            let sc = sample_scenario(&config, &mut rng).unwrap();
            for (d, range) in sc.room.dims.iter().zip(&ROOM_RANGES) {
                assert!((range[0]..=range[1]).contains(d));
            }
            let mut devices = sc.mics.positions.clone();
            devices.push(sc.source);
            assert_eq!(devices.len(), config.mic_count + 1);
            for (k, &a) in devices.iter().enumerate() {
                for &b in devices.iter().skip(k + 1) {
                    assert!(distance(a, b) >= MIN_DEVICE_SPACING);
                }
                for dim in 0..3 {
                    assert!(a[dim] >= WALL_CLEARANCE - 1e-12);
                    assert!(a[dim] <= sc.room.dims[dim] - WALL_CLEARANCE + 1e-12);
                }
            }
        }
        let a = sample_scenario(&config, &mut ChaCha12Rng::seed_from_u64(3)).unwrap();
        let b = sample_scenario(&config, &mut ChaCha12Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pinned_source_height_is_exact() {
        let config = SimConfig {
            source_z: Some(1.5),
            ..SimConfig::anechoic_desk()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..20 {
            let sc = sample_scenario(&config, &mut rng).unwrap();
            assert_eq!(sc.source[2], 1.5);
        }
    }

    #[test]
    fn synthetic_source_has_fixed_length_and_rms() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let s = synth_source(&mut rng);
        assert_eq!(s.len(), EXCERPT_SAMPLES);
        let rms = (s.iter().map(|&v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        assert!((0.05..=1.0).contains(&rms));
        assert!((rms - SOURCE_RMS).abs() < 1e-12);
    }

    #[test]
    fn corpus_pool_draws_excerpts_within_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let long: Vec<f64> = (0..20_000).map(|t| (t as f64 * 0.05).sin() * 0.5).collect();
        write_wav_i16_mono(dir.path().join("a.wav"), &long, 16_000).unwrap();
        let pool = SourcePool::prepare(&SourceMode::WavCorpus {
            dir: dir.path().to_path_buf(),
        })
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..10 {
            let s = pool.draw(&mut rng).unwrap();
            assert_eq!(s.len(), EXCERPT_SAMPLES);
            let rms = (s.iter().map(|&v| v * v).sum::<f64>() / s.len() as f64).sqrt();
            assert!(rms >= CORPUS_RMS_THRESHOLD);
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            SourcePool::prepare(&SourceMode::WavCorpus {
                dir: dir.path().to_path_buf(),
            }),
            Err(Error::EmptyCorpus(_))
        ));
    }

    #[test]
    fn dataset_generation_is_complete_and_reproducible() {
        let config = SimConfig {
            n_train: 4,
            n_val: 2,
            n_test: 2,
            mic_count: 3,
            ..SimConfig::anechoic_desk()
        };
        let dir = tempfile::tempdir().unwrap();
        let entries = generate_dataset(&config, dir.path(), 123).unwrap();
        assert_eq!(entries.len(), 8);
        assert_eq!(
            entries.iter().filter(|e| e.split == Split::Train).count(),
            4
        );
        for entry in &entries {
            assert_eq!(entry.absorptions, [1.0; 6]);
            assert_eq!(entry.t60_estimate, 0.0);
            let audio = load_sample_audio(dir.path(), entry).unwrap();
            assert_eq!(audio.len(), 3);
            assert!(audio.iter().all(|ch| ch.len() == EXCERPT_SAMPLES));
        }
        // split seeds are disjoint
        let mut seeds: Vec<u64> = entries.iter().map(|e| e.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 8);

        let manifest_a = fs::read(dir.path().join(MANIFEST_NAME)).unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        generate_dataset(&config, dir_b.path(), 123).unwrap();
        let manifest_b = fs::read(dir_b.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(manifest_a, manifest_b);

        let loaded = load_manifest(&dir.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(loaded, entries);
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let mut cfg = SimConfig::reverb_desk();
        cfg.n_val = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::reverb_desk();
        cfg.mic_count = 1;
        assert!(matches!(cfg.validate(), Err(Error::TooFewMics(1))));
        let mut cfg = SimConfig::reverb_desk();
        cfg.absorption_range = [0.5, 0.2];
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::reverb_desk();
        cfg.source_z = Some(3.5);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn split_round_trips_through_text() {
        for split in Split::ALL {
            let s = split.to_string();
            assert_eq!(s.parse::<Split>().unwrap(), split);
        }
        assert!("dev".parse::<Split>().is_err());
    }
}
