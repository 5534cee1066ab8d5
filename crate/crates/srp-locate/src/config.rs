//! Run configuration: one TOML document covering simulation, model,
//! targets and training, plus named presets. Unknown keys are rejected so
//! typos fail loudly instead of silently using defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{ModelConfig, TrainConfig};
use crate::sim::SimConfig;
use crate::targets::TargetConfig;
use crate::{DEFAULT_GRID_SIDE, DEFAULT_Z_PLANE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; everything stochastic derives from it.
    pub seed: u64,
    /// Height of the candidate plane shared by SRP, targets and inference.
    pub z_plane: f64,
    /// Candidate grid side; the map is grid_side x grid_side.
    pub grid_side: usize,
    /// Speech corpus directory for wav-corpus source mode. Falls back to
    /// the SRP_LOCATE_DATA environment variable when unset.
    pub corpus_dir: Option<PathBuf>,
    pub sim: SimConfig,
    pub model: ModelConfig,
    pub targets: TargetConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            z_plane: DEFAULT_Z_PLANE,
            grid_side: DEFAULT_GRID_SIDE,
            corpus_dir: None,
            sim: SimConfig::reverb_desk(),
            model: ModelConfig::default(),
            targets: TargetConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parse a TOML file; any unknown key anywhere in the tree is an error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_side < 2 {
            return Err(Error::GridTooSmall(self.grid_side));
        }
        if !(self.z_plane > 0.0 && self.z_plane.is_finite()) {
            return Err(Error::Config(format!(
                "z_plane {} must be positive and finite",
                self.z_plane
            )));
        }
        if self.train.batch_size == 0 || self.train.max_epochs == 0 || self.train.patience == 0 {
            return Err(Error::Config(
                "batch_size, max_epochs and patience must be positive".into(),
            ));
        }
        if !(self.train.adam.lr > 0.0 && self.train.adam.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive and finite",
                self.train.adam.lr
            )));
        }
        self.sim.validate()?;
        self.model.validate()?;
        Ok(())
    }

    /// Serialize back to TOML, e.g. to record the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Flatten into dotted key=value pairs for plain-text logging.
    pub fn key_values(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        flatten_value("", &value, &mut out);
        out
    }
}

fn flatten_value(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(table) => {
            for (k, v) in table {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_value(&key, v, out);
            }
        }
        toml::Value::Array(items) => {
            let joined = items
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",");
            out.push((prefix.to_string(), format!("[{joined}]")));
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Named configurations: desk presets keep runs laptop-sized, paper
/// presets use the full dataset sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    AnechoicDesk,
    ReverbDesk,
    AnechoicPaper,
    ReverbPaper,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::AnechoicDesk,
        Preset::ReverbDesk,
        Preset::AnechoicPaper,
        Preset::ReverbPaper,
    ];

    pub fn run_config(self) -> RunConfig {
        let sim = match self {
            Preset::AnechoicDesk => SimConfig::anechoic_desk(),
            Preset::ReverbDesk => SimConfig::reverb_desk(),
            Preset::AnechoicPaper => SimConfig::anechoic_paper(),
            Preset::ReverbPaper => SimConfig::reverb_paper(),
        };
        RunConfig {
            sim,
            ..RunConfig::default()
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::AnechoicDesk => "anechoic-desk",
            Preset::ReverbDesk => "reverb-desk",
            Preset::AnechoicPaper => "anechoic-paper",
            Preset::ReverbPaper => "reverb-paper",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::Config(format!("unknown preset '{s}', expected one of {names:?}"))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_documented_desk_scale_values() {
        let config = RunConfig::default();
        assert_eq!(config.seed, 0);
        assert_eq!(config.z_plane, 1.5);
        assert_eq!(config.grid_side, 25);
        assert_eq!(config.sim.n_train, 200);
        assert_eq!(config.sim.mic_count, 4);
        assert_eq!(config.train.batch_size, 16);
        assert_eq!(config.train.patience, 3);
        assert_eq!(config.train.adam.lr, 5e-4);
        assert_eq!(config.model.conv_channels, 64);
        assert_eq!(config.model.rnn_hidden, 128);
        config.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_preserves_the_config() {
        let mut config = RunConfig::default();
        config.seed = 9;
        config.train.batch_size = 4;
        config.sim.snr_range_db = [10.0, 20.0];
        let text = config.to_toml();
        let parsed: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn unknown_keys_are_rejected_at_any_depth() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[sim]\nbogus = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[train]\nbogus = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[train.adam]\nbogus = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[model]\nbogus = 1").is_err());
    }

    #[test]
    fn partial_files_inherit_defaults() {
        let parsed: RunConfig = toml::from_str("[train]\nbatch_size = 4").unwrap();
        assert_eq!(parsed.train.batch_size, 4);
        assert_eq!(parsed.train.max_epochs, RunConfig::default().train.max_epochs);
        assert_eq!(parsed.grid_side, 25);
    }

    #[test]
    fn presets_validate_and_differ_where_expected() {
        for preset in Preset::ALL {
            let config = preset.run_config();
            config.validate().unwrap();
        }
        assert_eq!(Preset::ReverbDesk.run_config().sim.n_train, 200);
        assert_eq!(Preset::ReverbPaper.run_config().sim.n_train, 10_000);
        assert!(!Preset::AnechoicDesk.run_config().sim.reverberant);
        assert!(Preset::ReverbDesk.run_config().sim.reverberant);
        assert_eq!("reverb-desk".parse::<Preset>().unwrap(), Preset::ReverbDesk);
        assert!("paper".parse::<Preset>().is_err());
    }

    #[test]
    fn load_reports_parse_errors_with_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "grid_side = \"wide\"").unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("run.toml"));
        fs::write(&path, "grid_side = 30\n[sim]\nmic_count = 6\n").unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.grid_side, 30);
        assert_eq!(config.sim.mic_count, 6);
    }

    #[test]
    fn key_value_flattening_reaches_nested_sections() {
        let pairs = RunConfig::default().key_values();
        let get = |key: &str| {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .unwrap_or_else(|| panic!("missing {key}"))
        };
        assert_eq!(get("seed"), "0");
        assert_eq!(get("grid_side"), "25");
        assert_eq!(get("sim.n_train"), "200");
        assert_eq!(get("train.adam.lr").parse::<f64>().unwrap(), 5e-4);
    }
}
