//! Whole-model forward and backward passes, plus scene-level composition
//! that sums every microphone pair's grid.

use ndarray::{s, Array1, Array2, Array3};
use rayon::prelude::*;

use super::layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, gru_backward, gru_forward,
    GruTrace,
};
use super::{ModelWeights, Scalar};
use crate::dsp::{stft_phase, StftConfig, StftPhaseFeature, Window};
use crate::error::{Error, Result};
use crate::geometry::{metadata, CandidateGrid, DevicePlacement, MetadataVector, Point3, Room};
use crate::likelihood::LikelihoodGrid;
use crate::SAMPLE_RATE;

/// Activations captured by `forward_pair`, consumed by `backward_pair`.
#[derive(Debug)]
pub struct PairCache<F> {
    pub(super) n: usize,
    pub(super) conv_cols: Vec<Array2<F>>,
    pub(super) conv_out: Vec<Array2<F>>,
    pub(super) seq: Array2<F>,
    pub(super) gru: GruTrace<F>,
    pub(super) fused: Array1<F>,
    pub(super) mlp_out: Vec<Array1<F>>,
}

/// Convert a phase feature and metadata vector into model inputs of the
/// requested precision. The normalized metadata is used.
pub fn pair_input<F: Scalar>(
    feature: &StftPhaseFeature,
    meta: &MetadataVector,
) -> (Array3<F>, Array1<F>) {
    let feat = feature.data.mapv(|v| F::from_f64(v).expect("fits"));
    let phi = meta
        .normalized
        .iter()
        .map(|&v| F::from_f64(v).expect("fits"))
        .collect();
    (feat, phi)
}

/// Stack two per-channel phase matrices (N, F) into a (2, N, F) pair
/// feature tensor.
pub(crate) fn stack_pair<F: Scalar>(a: &Array2<F>, b: &Array2<F>) -> Array3<F> {
    let (n, f) = a.dim();
    debug_assert_eq!(a.dim(), b.dim());
    let mut feat = Array3::zeros((2, n, f));
    for t in 0..n {
        for k in 0..f {
            feat[(0, t, k)] = a[(t, k)];
            feat[(1, t, k)] = b[(t, k)];
        }
    }
    feat
}

/// One pair through the network: conv stack, frequency mean, GRU, metadata
/// fusion, grid head. Returns the flat grid (length G*G, linear index
/// iy * G + ix) and the activation cache.
pub fn forward_pair<F: Scalar>(
    weights: &ModelWeights<F>,
    feat: &Array3<F>,
    phi: &Array1<F>,
) -> Result<(Array1<F>, PairCache<F>)> {
    let config = &weights.config;
    let shape = feat.shape();
    if shape[0] != 2 || shape[2] != config.freq_bins || shape[1] == 0 {
        return Err(Error::ShapeMismatch {
            layer: "conv0 input",
            expected: format!("(2, N>=1, {})", config.freq_bins),
            got: format!("({}, {}, {})", shape[0], shape[1], shape[2]),
        });
    }
    if phi.len() != config.metadata_len {
        return Err(Error::ShapeMismatch {
            layer: "metadata fusion",
            expected: format!("({})", config.metadata_len),
            got: format!("({})", phi.len()),
        });
    }
    let n = shape[1];
    let f0 = config.freq_bins;
    let mut cur = Array2::zeros((2, n * f0));
    for c in 0..2 {
        for t in 0..n {
            for f in 0..f0 {
                cur[(c, t * f0 + f)] = feat[(c, t, f)];
            }
        }
    }

    let freq_bins = config.conv_freq_bins();
    let mut conv_cols = Vec::with_capacity(config.conv_layers);
    let mut conv_out = Vec::with_capacity(config.conv_layers);
    for (k, conv) in weights.convs.iter().enumerate() {
        let (out, cols) = conv_forward(conv, &cur, n, freq_bins[k]);
        conv_cols.push(cols);
        cur = out.clone();
        conv_out.push(out);
    }

    // collapse frequency by averaging: (C_c, N*F_last) -> (N, C_c)
    let f_last = *freq_bins.last().unwrap();
    let cc = config.conv_channels;
    let inv = F::one() / F::from_usize(f_last).expect("fits");
    let mut seq = Array2::zeros((n, cc));
    for c in 0..cc {
        for t in 0..n {
            let mut acc = F::zero();
            for f in 0..f_last {
                acc = acc + cur[(c, t * f_last + f)];
            }
            seq[(t, c)] = acc * inv;
        }
    }

    let gru = gru_forward(&weights.gru, &seq);
    let h_last = gru.last_state();

    let h_dim = config.rnn_hidden;
    let mut fused = Array1::zeros(config.fused_len());
    fused.slice_mut(s![0..h_dim]).assign(&h_last);
    fused.slice_mut(s![h_dim..]).assign(phi);

    let mut mlp_out = Vec::with_capacity(weights.mlp.len());
    let mut x = fused.clone();
    for (k, dense) in weights.mlp.iter().enumerate() {
        let out = dense_forward(dense, &x, k + 1 < weights.mlp.len());
        x = out.clone();
        mlp_out.push(out);
    }

    Ok((
        x,
        PairCache {
            n,
            conv_cols,
            conv_out,
            seq,
            gru,
            fused,
            mlp_out,
        },
    ))
}

/// Exact reverse-mode gradients for every parameter given the gradient at
/// the grid output. The metadata input receives no parameter updates of
/// its own; its influence flows through the first dense layer's columns.
pub fn backward_pair<F: Scalar>(
    weights: &ModelWeights<F>,
    cache: &PairCache<F>,
    d_out: &Array1<F>,
) -> Result<ModelWeights<F>> {
    let config = &weights.config;
    if d_out.len() != config.mlp_width() {
        return Err(Error::ShapeMismatch {
            layer: "grid head",
            expected: format!("({})", config.mlp_width()),
            got: format!("({})", d_out.len()),
        });
    }
    let mut grads = ModelWeights::zeros(config.clone());

    let mut d = d_out.clone();
    for k in (0..weights.mlp.len()).rev() {
        let x = if k == 0 { &cache.fused } else { &cache.mlp_out[k - 1] };
        let relu = k + 1 < weights.mlp.len();
        let (d_layer, d_x) = dense_backward(&weights.mlp[k], x, &cache.mlp_out[k], &d, relu);
        grads.mlp[k] = d_layer;
        d = d_x;
    }

    let h_dim = config.rnn_hidden;
    let d_h_last = d.slice(s![0..h_dim]).to_owned();
    let (d_gru, d_seq) = gru_backward(&weights.gru, &cache.seq, &cache.gru, &d_h_last);
    grads.gru = d_gru;

    let freq_bins = config.conv_freq_bins();
    let f_last = *freq_bins.last().unwrap();
    let cc = config.conv_channels;
    let n = cache.n;
    let inv = F::one() / F::from_usize(f_last).expect("fits");
    let mut d_cur = Array2::zeros((cc, n * f_last));
    for c in 0..cc {
        for t in 0..n {
            let g = d_seq[(t, c)] * inv;
            for f in 0..f_last {
                d_cur[(c, t * f_last + f)] = g;
            }
        }
    }

    for k in (0..config.conv_layers).rev() {
        let c_in = if k == 0 { 2 } else { cc };
        let (d_layer, d_input) = conv_backward(
            &weights.convs[k],
            &cache.conv_cols[k],
            &cache.conv_out[k],
            &d_cur,
            c_in,
            n,
            freq_bins[k],
        );
        grads.convs[k] = d_layer;
        d_cur = d_input;
    }
    Ok(grads)
}

fn lex_less(a: Point3, b: Point3) -> bool {
    for d in 0..3 {
        match a[d].total_cmp(&b[d]) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Unordered microphone pairs, each oriented and sorted by position rather
/// than index, so relabeling the microphones cannot change the result.
pub(crate) fn canonical_pairs(mics: &DevicePlacement) -> Vec<(usize, usize)> {
    let pos = &mics.positions;
    let mut pairs = mics.pairs();
    for pair in pairs.iter_mut() {
        if lex_less(pos[pair.1], pos[pair.0]) {
            *pair = (pair.1, pair.0);
        }
    }
    pairs.sort_by(|a, b| {
        pos[a.0]
            .iter()
            .chain(pos[a.1].iter())
            .zip(pos[b.0].iter().chain(pos[b.1].iter()))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != std::cmp::Ordering::Equal)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    pairs
}

/// Scene-level map: the elementwise sum of `forward_pair` over every
/// microphone pair, reshaped to the candidate grid. Pair outputs are
/// computed in parallel but summed in a canonical position-sorted order
/// with f64 accumulation, so the map is reproducible.
pub fn forward_scene<F: Scalar>(
    weights: &ModelWeights<F>,
    signals: &[Vec<f64>],
    mics: &DevicePlacement,
    room: &Room,
    z_plane: f64,
) -> Result<LikelihoodGrid> {
    let config = &weights.config;
    if signals.len() != mics.len() {
        return Err(Error::ShapeMismatch {
            layer: "scene input",
            expected: format!("{} channels", mics.len()),
            got: format!("{} channels", signals.len()),
        });
    }
    let grid = CandidateGrid::new(room, z_plane, config.grid_side)?;
    let stft_config = StftConfig {
        window_len: (config.freq_bins - 1) * 2,
        hop: config.freq_bins - 1,
        window: Window::Hann,
    };
    let phases = signals
        .iter()
        .map(|s| Ok(stft_phase(s, SAMPLE_RATE, &stft_config)?.mapv(|v| F::from_f64(v).expect("fits"))))
        .collect::<Result<Vec<Array2<F>>>>()?;

    let pairs = canonical_pairs(mics);
    let outputs = pairs
        .par_iter()
        .map(|&(i, j)| {
            let feat = stack_pair(&phases[i], &phases[j]);
            let meta = metadata(mics.positions[i], mics.positions[j], room.dims);
            let phi = meta
                .normalized
                .iter()
                .map(|&v| F::from_f64(v).expect("fits"))
                .collect();
            forward_pair(weights, &feat, &phi).map(|(out, _)| out)
        })
        .collect::<Result<Vec<_>>>()?;

    let g = config.grid_side;
    let mut total = vec![0.0f64; g * g];
    for out in &outputs {
        for (t, v) in total.iter_mut().zip(out.iter()) {
            *t += v.to_f64().expect("fits");
        }
    }
    LikelihoodGrid::new(Array2::from_shape_vec((g, g), total).expect("length"), grid)
}
