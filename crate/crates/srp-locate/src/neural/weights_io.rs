//! Weight file format: a magic tag, a format version, the architecture
//! config as JSON, every tensor with its name and shape, and a SHA-256
//! checksum trailer over everything before it.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ModelConfig, ModelWeights};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SRPLOCW\0";
const VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

fn encode(weights: &ModelWeights<f32>, version: u32) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&version.to_le_bytes());
    let config_json = serde_json::to_vec(&weights.config).expect("config serializes");
    buf.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config_json);
    let tensors = weights.flat_tensors();
    let shapes = weights.tensor_shapes();
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for ((name, data), (_, shape)) in tensors.iter().zip(&shapes) {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(shape.len() as u8);
        for &d in shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in *data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

/// Serialize weights to `path`. The encoding is deterministic: the same
/// weights always produce the same bytes.
pub fn save_weights(weights: &ModelWeights<f32>, path: &Path) -> Result<()> {
    fs::write(path, encode(weights, VERSION)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::WeightFormat("truncated file".into()));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn decode(bytes: &[u8]) -> Result<ModelWeights<f32>> {
    if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN {
        return Err(Error::WeightFormat("file too short".into()));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::WeightFormat("bad magic".into()));
    }
    let (payload, trailer) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(payload).as_slice() != trailer {
        return Err(Error::ChecksumMismatch);
    }
    let mut r = Reader {
        buf: payload,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let config_len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| Error::WeightFormat(format!("config block: {e}")))?;
    config.validate()?;
    let mut weights = ModelWeights::<f32>::zeros(config);
    let shapes = weights.tensor_shapes();
    let count = r.u32()? as usize;
    if count != shapes.len() {
        return Err(Error::WeightFormat(format!(
            "file holds {count} tensors, config implies {}",
            shapes.len()
        )));
    }
    for ((expected_name, expected_shape), (_, slot)) in
        shapes.iter().zip(weights.flat_tensors_mut())
    {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::WeightFormat("tensor name is not UTF-8".into()))?;
        if name != expected_name {
            return Err(Error::WeightFormat(format!(
                "tensor '{name}' where '{expected_name}' was expected"
            )));
        }
        let ndim = r.u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32()? as usize);
        }
        if dims != *expected_shape {
            return Err(Error::WeightFormat(format!(
                "tensor '{name}' has shape {dims:?}, config implies {expected_shape:?}"
            )));
        }
        let n: usize = dims.iter().product();
        let raw = r.take(n * 4)?;
        for (k, v) in slot.iter_mut().enumerate() {
            *v = f32::from_le_bytes(raw[4 * k..4 * k + 4].try_into().unwrap());
        }
    }
    if r.pos != payload.len() {
        return Err(Error::WeightFormat("trailing bytes after tensors".into()));
    }
    Ok(weights)
}

/// Load weights, verifying the checksum, the format version and that every
/// tensor matches the shape its config implies.
pub fn load_weights(path: &Path) -> Result<ModelWeights<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ModelConfig {
        ModelConfig {
            conv_layers: 3,
            conv_channels: 4,
            rnn_hidden: 8,
            metadata_len: 9,
            grid_side: 5,
            freq_bins: 9,
        }
    }

    fn reseal(mut bytes: Vec<u8>) -> Vec<u8> {
        let cut = bytes.len() - CHECKSUM_LEN;
        let digest = Sha256::digest(&bytes[..cut]);
        bytes[cut..].copy_from_slice(&digest);
        bytes
    }

    #[test]
    fn saving_and_loading_round_trips_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let weights = ModelWeights::<f32>::init(small_config(), 42);
        let path_a = dir.path().join("a.weights");
        let path_b = dir.path().join("b.weights");
        save_weights(&weights, &path_a).unwrap();
        let loaded = load_weights(&path_a).unwrap();
        assert_eq!(loaded, weights);
        save_weights(&loaded, &path_b).unwrap();
        assert_eq!(fs::read(&path_a).unwrap(), fs::read(&path_b).unwrap());
    }

    #[test]
    fn a_flipped_byte_is_caught_by_the_checksum() {
        let weights = ModelWeights::<f32>::init(small_config(), 43);
        let mut bytes = encode(&weights, VERSION);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        match decode(&bytes).unwrap_err() {
            Error::ChecksumMismatch => {}
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_versions_are_rejected() {
        let weights = ModelWeights::<f32>::init(small_config(), 44);
        let bytes = encode(&weights, 2);
        match decode(&bytes).unwrap_err() {
            Error::UnsupportedVersion(2) => {}
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn a_wrong_magic_is_not_a_weight_file() {
        let weights = ModelWeights::<f32>::init(small_config(), 45);
        let mut bytes = encode(&weights, VERSION);
        bytes[0] = b'X';
        let bytes = reseal(bytes);
        match decode(&bytes).unwrap_err() {
            Error::WeightFormat(msg) => assert!(msg.contains("magic"), "{msg}"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn tensors_must_match_the_embedded_config() {
        let mut weights = ModelWeights::<f32>::init(small_config(), 46);
        // lie about the grid so the MLP tensor shapes disagree
        weights.config.grid_side = 7;
        let bytes = encode(&weights, VERSION);
        match decode(&bytes).unwrap_err() {
            Error::WeightFormat(msg) => assert!(msg.contains("mlp0.weight"), "{msg}"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn truncation_is_reported_as_a_format_error() {
        let weights = ModelWeights::<f32>::init(small_config(), 47);
        let bytes = encode(&weights, VERSION);
        match decode(&bytes[..10]).unwrap_err() {
            Error::WeightFormat(msg) => assert!(msg.contains("short"), "{msg}"),
            other => panic!("unexpected error {other}"),
        }
    }
}
