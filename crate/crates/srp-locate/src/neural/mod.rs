//! Learned pairwise localization model: a small CRNN over STFT phase
//! features with geometric metadata fused before the grid head.
//!
//! Everything is implemented directly over ndarray: forward, reverse-mode
//! gradients, the optimizer, and weight serialization. The float type is
//! generic so training runs in f32 while gradient verification runs in f64.

mod adam;
mod gradcheck;
mod layers;
mod model;
mod train;
mod weights_io;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use model::{backward_pair, forward_pair, forward_scene, pair_input, PairCache};
pub use train::{
    batch_count, build_training_items, early_stop_epoch, train_stage, transfer_learn, PairDataset,
    PairItem, SceneItems, Stage, TrainConfig, TrainHistory,
};
pub use weights_io::{load_weights, save_weights};

use ndarray::{Array1, Array2, NdFloat};
use num_traits::FromPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Float type the model can run in.
pub trait Scalar: NdFloat + FromPrimitive + std::iter::Sum {}
impl Scalar for f32 {}
impl Scalar for f64 {}

/// Architecture hyperparameters. The default configuration has roughly one
/// million parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Convolution layers, each halving the frequency axis.
    pub conv_layers: usize,
    /// Channels produced by every convolution layer.
    pub conv_channels: usize,
    /// GRU state width.
    pub rnn_hidden: usize,
    /// Length of the geometric metadata vector fused after the GRU.
    pub metadata_len: usize,
    /// Output grid is grid_side x grid_side.
    pub grid_side: usize,
    /// One-sided STFT bin count the first convolution expects.
    pub freq_bins: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            conv_layers: 4,
            conv_channels: 64,
            rnn_hidden: 128,
            metadata_len: 9,
            grid_side: 25,
            freq_bins: 257,
        }
    }
}

impl ModelConfig {
    /// Frequency bin count after each convolution layer.
    pub fn conv_freq_bins(&self) -> Vec<usize> {
        let mut bins = Vec::with_capacity(self.conv_layers + 1);
        bins.push(self.freq_bins);
        for _ in 0..self.conv_layers {
            bins.push(bins.last().unwrap() / 2);
        }
        bins
    }

    /// Width of every MLP layer; the last one is the flattened grid.
    pub fn mlp_width(&self) -> usize {
        self.grid_side * self.grid_side
    }

    /// GRU output concatenated with the metadata vector.
    pub fn fused_len(&self) -> usize {
        self.rnn_hidden + self.metadata_len
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_layers == 0
            || self.conv_channels == 0
            || self.rnn_hidden == 0
            || self.metadata_len == 0
        {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.grid_side < 2 {
            return Err(Error::GridTooSmall(self.grid_side));
        }
        if *self.conv_freq_bins().last().unwrap() == 0 {
            return Err(Error::Config(format!(
                "{} frequency bins vanish after {} halving layers",
                self.freq_bins, self.conv_layers
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        ModelWeights::<f32>::zeros(self.clone()).param_count()
    }
}

/// One convolution layer: kernel 1 (time) x 2 (frequency), stride 2 along
/// frequency. The weight is stored ready for the unrolled-input matrix
/// product: row per output channel, columns (input channel, kernel tap).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1x2<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

/// Fully connected layer, weight laid out (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

/// Gated recurrent unit, gates packed row-wise in the order
/// [update (z); reset (r); candidate (h)].
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell<F> {
    /// Input projection, (3H, in).
    pub w: Array2<F>,
    /// State projection, (3H, H).
    pub u: Array2<F>,
    /// Gate biases, (3H).
    pub b: Array1<F>,
}

/// All learnable parameters plus the configuration they implement. The
/// same structure doubles as a gradient and optimizer-moment container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights<F> {
    pub config: ModelConfig,
    pub convs: Vec<Conv1x2<F>>,
    pub gru: GruCell<F>,
    pub mlp: Vec<Dense<F>>,
}

impl<F: Scalar> ModelWeights<F> {
    /// All-zero parameters in the shapes the config dictates.
    pub fn zeros(config: ModelConfig) -> Self {
        let cc = config.conv_channels;
        let mut convs = Vec::with_capacity(config.conv_layers);
        for layer in 0..config.conv_layers {
            let c_in = if layer == 0 { 2 } else { cc };
            convs.push(Conv1x2 {
                weight: Array2::zeros((cc, c_in * 2)),
                bias: Array1::zeros(cc),
            });
        }
        let h = config.rnn_hidden;
        let gru = GruCell {
            w: Array2::zeros((3 * h, cc)),
            u: Array2::zeros((3 * h, h)),
            b: Array1::zeros(3 * h),
        };
        let width = config.mlp_width();
        let mut mlp = Vec::with_capacity(3);
        let mut in_len = config.fused_len();
        for _ in 0..3 {
            mlp.push(Dense {
                weight: Array2::zeros((width, in_len)),
                bias: Array1::zeros(width),
            });
            in_len = width;
        }
        ModelWeights {
            config,
            convs,
            gru,
            mlp,
        }
    }

    /// Seeded initialization: every weight matrix uniform in
    /// +-1/sqrt(fan_in), biases zero. Tensors are filled in declaration
    /// order so a seed pins every parameter.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut weights = Self::zeros(config);
        let mut fill = |arr: &mut Array2<F>| {
            let fan_in = arr.ncols() as f64;
            let bound = 1.0 / fan_in.sqrt();
            for v in arr.iter_mut() {
                *v = F::from_f64(rng.random_range(-bound..bound)).expect("fits");
            }
        };
        for conv in weights.convs.iter_mut() {
            fill(&mut conv.weight);
        }
        fill(&mut weights.gru.w);
        fill(&mut weights.gru.u);
        for dense in weights.mlp.iter_mut() {
            fill(&mut dense.weight);
        }
        weights
    }

    /// Flat views of every tensor in canonical order.
    pub fn flat_tensors(&self) -> Vec<(String, &[F])> {
        let mut out = Vec::new();
        for (k, conv) in self.convs.iter().enumerate() {
            out.push((format!("conv{k}.weight"), as_flat(&conv.weight)));
            out.push((format!("conv{k}.bias"), conv.bias.as_slice().unwrap()));
        }
        out.push(("gru.w".to_string(), as_flat(&self.gru.w)));
        out.push(("gru.u".to_string(), as_flat(&self.gru.u)));
        out.push(("gru.b".to_string(), self.gru.b.as_slice().unwrap()));
        for (k, dense) in self.mlp.iter().enumerate() {
            out.push((format!("mlp{k}.weight"), as_flat(&dense.weight)));
            out.push((format!("mlp{k}.bias"), dense.bias.as_slice().unwrap()));
        }
        out
    }

    /// Mutable flat views, same order as `flat_tensors`.
    pub fn flat_tensors_mut(&mut self) -> Vec<(String, &mut [F])> {
        let mut out: Vec<(String, &mut [F])> = Vec::new();
        for (k, conv) in self.convs.iter_mut().enumerate() {
            out.push((format!("conv{k}.weight"), conv.weight.as_slice_mut().unwrap()));
            out.push((format!("conv{k}.bias"), conv.bias.as_slice_mut().unwrap()));
        }
        out.push(("gru.w".to_string(), self.gru.w.as_slice_mut().unwrap()));
        out.push(("gru.u".to_string(), self.gru.u.as_slice_mut().unwrap()));
        out.push(("gru.b".to_string(), self.gru.b.as_slice_mut().unwrap()));
        for (k, dense) in self.mlp.iter_mut().enumerate() {
            out.push((format!("mlp{k}.weight"), dense.weight.as_slice_mut().unwrap()));
            out.push((format!("mlp{k}.bias"), dense.bias.as_slice_mut().unwrap()));
        }
        out
    }

    /// Tensor shapes in canonical order, for serialization and validation.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (k, conv) in self.convs.iter().enumerate() {
            out.push((format!("conv{k}.weight"), conv.weight.shape().to_vec()));
            out.push((format!("conv{k}.bias"), conv.bias.shape().to_vec()));
        }
        out.push(("gru.w".to_string(), self.gru.w.shape().to_vec()));
        out.push(("gru.u".to_string(), self.gru.u.shape().to_vec()));
        out.push(("gru.b".to_string(), self.gru.b.shape().to_vec()));
        for (k, dense) in self.mlp.iter().enumerate() {
            out.push((format!("mlp{k}.weight"), dense.weight.shape().to_vec()));
            out.push((format!("mlp{k}.bias"), dense.bias.shape().to_vec()));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.flat_tensors().iter().map(|(_, s)| s.len()).sum()
    }

    /// Name of the first tensor holding a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<String> {
        self.flat_tensors()
            .into_iter()
            .find(|(_, slice)| slice.iter().any(|v| !v.is_finite()))
            .map(|(name, _)| name)
    }

    /// Elementwise in-place accumulation; shapes must agree.
    pub fn add_assign(&mut self, other: &ModelWeights<F>) {
        let theirs = other.flat_tensors();
        for ((_, mine), (_, other)) in self.flat_tensors_mut().into_iter().zip(theirs) {
            for (m, &o) in mine.iter_mut().zip(other) {
                *m = *m + o;
            }
        }
    }

    /// Elementwise in-place scaling.
    pub fn scale(&mut self, factor: F) {
        for (_, slice) in self.flat_tensors_mut() {
            for v in slice {
                *v = *v * factor;
            }
        }
    }

    /// Convert every parameter to another float width.
    pub fn cast<T: Scalar>(&self) -> ModelWeights<T> {
        let mut out = ModelWeights::<T>::zeros(self.config.clone());
        let src = self.flat_tensors();
        for ((_, dst), (_, s)) in out.flat_tensors_mut().into_iter().zip(src) {
            for (d, &v) in dst.iter_mut().zip(s) {
                *d = T::from_f64(v.to_f64().unwrap()).expect("fits");
            }
        }
        out
    }
}

fn as_flat<F>(arr: &Array2<F>) -> &[F] {
    arr.as_slice().expect("tensors stay in standard layout")
}
