//! Two-stage training: deterministic batching, Adam updates, early
//! stopping on validation loss, and best-weight tracking.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{canonical_pairs, stack_pair};
use super::{
    adam_step, backward_pair, forward_pair, AdamConfig, AdamState, ModelConfig, ModelWeights,
};
use crate::dsp::{stft_phase, StftConfig, Window};
use crate::error::{Error, Result};
use crate::geometry::metadata;
use crate::sim::{load_sample_audio, ManifestEntry};
use crate::targets::{hyperbolic_grid, mae_flat, TargetConfig};
use crate::{DEFAULT_Z_PLANE, SAMPLE_RATE};

/// Curriculum stage. The anechoic stage fits clean geometry first; the
/// reverberant stage then adapts the same weights to echoes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Anechoic,
    Reverberant,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Anechoic => write!(f, "anechoic"),
            Stage::Reverberant => write!(f, "reverb"),
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anechoic" => Ok(Stage::Anechoic),
            "reverb" | "reverberant" => Ok(Stage::Reverberant),
            other => Err(Error::Config(format!("unknown stage '{other}'"))),
        }
    }
}

/// One microphone pair of one scene: its metadata vector and its flat
/// target grid. Phase features live on the owning scene.
pub struct PairItem {
    pub mic_i: usize,
    pub mic_j: usize,
    pub phi: Array1<f32>,
    pub target: Array1<f32>,
}

/// One scene: per-microphone phase matrices plus every pair item.
pub struct SceneItems {
    pub phases: Vec<Array2<f32>>,
    pub pairs: Vec<PairItem>,
}

/// Training-ready dataset. Batching operates on scenes; every scene
/// contributes all of its pair items to the batch it lands in.
pub struct PairDataset {
    pub scenes: Vec<SceneItems>,
}

impl PairDataset {
    pub fn item_count(&self) -> usize {
        self.scenes.iter().map(|s| s.pairs.len()).sum()
    }
}

/// Turn manifest entries into training items: per-microphone STFT phases
/// and per-pair hyperbolic target grids over the candidate plane.
pub fn build_training_items(
    manifest_dir: &Path,
    entries: &[ManifestEntry],
    model: &ModelConfig,
    targets: &TargetConfig,
) -> Result<PairDataset> {
    model.validate()?;
    let stft_config = StftConfig {
        window_len: (model.freq_bins - 1) * 2,
        hop: model.freq_bins - 1,
        window: Window::Hann,
    };
    let scenes = entries
        .par_iter()
        .map(|entry| {
            let audio = load_sample_audio(manifest_dir, entry)?;
            let room = entry.room()?;
            let mics = entry.placement()?;
            let grid =
                crate::geometry::CandidateGrid::new(&room, DEFAULT_Z_PLANE, model.grid_side)?;
            let phases = audio
                .iter()
                .map(|ch| {
                    Ok(stft_phase(ch, SAMPLE_RATE, &stft_config)?.mapv(|v| v as f32))
                })
                .collect::<Result<Vec<_>>>()?;
            let source_xy = [entry.source_position[0], entry.source_position[1]];
            let pairs = canonical_pairs(&mics)
                .into_iter()
                .map(|(i, j)| {
                    let p_i = mics.positions[i];
                    let p_j = mics.positions[j];
                    let meta = metadata(p_i, p_j, room.dims);
                    let phi = meta.normalized.iter().map(|&v| v as f32).collect();
                    let target_grid =
                        hyperbolic_grid(source_xy, p_i, p_j, &grid, targets.sigma_hyperbolic);
                    let target = target_grid.values.iter().map(|&v| v as f32).collect();
                    PairItem {
                        mic_i: i,
                        mic_j: j,
                        phi,
                        target,
                    }
                })
                .collect();
            Ok(SceneItems { phases, pairs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairDataset { scenes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Scenes per batch; each scene brings all of its pairs.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best validation loss before stopping.
    pub patience: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            max_epochs: 50,
            patience: 3,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

/// Per-stage training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub stage: Stage,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch with the lowest validation loss; its weights are returned.
    pub best_epoch: usize,
    /// Epoch at which patience ran out, if training stopped early.
    pub early_stop: Option<usize>,
}

/// Batches per epoch when grouping `n_scenes` into groups of `batch_size`.
pub fn batch_count(n_scenes: usize, batch_size: usize) -> usize {
    n_scenes.div_ceil(batch_size)
}

/// Early-stopping rule: stop at the first epoch that is `patience` epochs
/// past the best (strictly lowest, earliest on ties) validation loss.
pub fn early_stop_epoch(val_losses: &[f64], patience: usize) -> Option<usize> {
    let mut best = f64::INFINITY;
    let mut best_epoch = 0usize;
    for (epoch, &v) in val_losses.iter().enumerate() {
        if v < best {
            best = v;
            best_epoch = epoch;
        } else if epoch - best_epoch >= patience {
            return Some(epoch);
        }
    }
    None
}

/// Items are folded in fixed-size chunks whose partial sums are combined
/// in chunk order, so gradients do not depend on the thread count.
const GRAD_CHUNK: usize = 8;

struct Partial {
    grads: ModelWeights<f32>,
    loss: f64,
}

fn batch_gradients(
    weights: &ModelWeights<f32>,
    items: &[(&SceneItems, &PairItem)],
) -> Result<(ModelWeights<f32>, f64)> {
    let partials = items
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = ModelWeights::zeros(weights.config.clone());
            let mut loss = 0.0f64;
            for (scene, item) in chunk {
                let feat = stack_pair(&scene.phases[item.mic_i], &scene.phases[item.mic_j]);
                let (out, cache) = forward_pair(weights, &feat, &item.phi)?;
                let (item_loss, grad) =
                    mae_flat(out.as_slice().expect("contiguous"), item.target.as_slice().expect("contiguous"));
                loss += item_loss as f64;
                let d_out = Array1::from_vec(grad);
                grads.add_assign(&backward_pair(weights, &cache, &d_out)?);
            }
            Ok(Partial { grads, loss })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grads = ModelWeights::zeros(weights.config.clone());
    let mut loss = 0.0f64;
    for partial in partials {
        grads.add_assign(&partial.grads);
        loss += partial.loss;
    }
    let n = items.len().max(1);
    grads.scale(1.0 / n as f32);
    Ok((grads, loss / n as f64))
}

/// Mean loss over a dataset without touching gradients.
fn mean_loss(weights: &ModelWeights<f32>, data: &PairDataset) -> Result<f64> {
    let items: Vec<(&SceneItems, &PairItem)> = data
        .scenes
        .iter()
        .flat_map(|s| s.pairs.iter().map(move |p| (s, p)))
        .collect();
    let partials = items
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut loss = 0.0f64;
            for (scene, item) in chunk {
                let feat = stack_pair(&scene.phases[item.mic_i], &scene.phases[item.mic_j]);
                let (out, _) = forward_pair(weights, &feat, &item.phi)?;
                let (item_loss, _) = mae_flat(
                    out.as_slice().expect("contiguous"),
                    item.target.as_slice().expect("contiguous"),
                );
                loss += item_loss as f64;
            }
            Ok(loss)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(partials.iter().sum::<f64>() / items.len().max(1) as f64)
}

/// Train one stage. Scenes are reshuffled every epoch from a seed derived
/// deterministically from the stage seed and the epoch number; the weights
/// from the best validation epoch are returned, not the final ones.
pub fn train_stage(
    init: &ModelWeights<f32>,
    train: &PairDataset,
    val: &PairDataset,
    config: &TrainConfig,
    stage: Stage,
) -> Result<(ModelWeights<f32>, TrainHistory)> {
    if train.item_count() == 0 {
        return Err(Error::EmptyGroup("training split".into()));
    }
    if val.item_count() == 0 {
        return Err(Error::EmptyGroup("validation split".into()));
    }
    let mut weights = init.clone();
    let mut state = AdamState::new(&weights);
    let mut history = TrainHistory {
        stage,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        early_stop: None,
    };
    let mut best_weights = weights.clone();
    let mut best_val = f64::INFINITY;

    for epoch in 0..config.max_epochs {
        let mut order: Vec<usize> = (0..train.scenes.len()).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(
            config
                .seed
                .wrapping_add((epoch as u64).wrapping_mul(0x9E3779B97F4A7C15)),
        );
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0f64;
        let mut epoch_items = 0usize;
        for batch in order.chunks(config.batch_size) {
            let items: Vec<(&SceneItems, &PairItem)> = batch
                .iter()
                .flat_map(|&s| {
                    let scene = &train.scenes[s];
                    scene.pairs.iter().map(move |p| (scene, p))
                })
                .collect();
            let (grads, loss) = batch_gradients(&weights, &items)?;
            // A blown-up run can overflow the gradients while the MAE loss is
            // still finite; both read as divergence here, with the epoch
            // attached, rather than as a bare optimizer error.
            if !loss.is_finite() || grads.first_non_finite().is_some() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += loss * items.len() as f64;
            epoch_items += items.len();
            adam_step(&mut weights, &grads, &mut state, &config.adam)?;
        }
        history.train_loss.push(epoch_loss / epoch_items as f64);

        let val_loss = mean_loss(&weights, val)?;
        if !val_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.val_loss.push(val_loss);
        if val_loss < best_val {
            best_val = val_loss;
            best_weights = weights.clone();
            history.best_epoch = epoch;
        }
        if let Some(stop) = early_stop_epoch(&history.val_loss, config.patience) {
            history.early_stop = Some(stop);
            break;
        }
    }
    Ok((best_weights, history))
}

/// Two-stage transfer learning: train on the anechoic pairs, then continue
/// from the resulting weights on the reverberant pairs. The optimizer state
/// is rebuilt for the second stage; only the weights carry over.
pub fn transfer_learn(
    init: &ModelWeights<f32>,
    anechoic: (&PairDataset, &PairDataset),
    reverberant: (&PairDataset, &PairDataset),
    config: &TrainConfig,
) -> Result<(ModelWeights<f32>, Vec<TrainHistory>)> {
    let (stage1, hist1) = train_stage(init, anechoic.0, anechoic.1, config, Stage::Anechoic)?;
    let (stage2, hist2) = train_stage(
        &stage1,
        reverberant.0,
        reverberant.1,
        config,
        Stage::Reverberant,
    )?;
    Ok((stage2, vec![hist1, hist2]))
}
