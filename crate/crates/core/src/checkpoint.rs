//! Model checkpoints: a self-describing container with a JSON manifest
//! (format version, config, seed, vocabulary, parameter names and shapes)
//! followed by raw little-endian 64-bit parameter payloads in manifest
//! order. Round-trips are bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::context::Vocab;
use crate::error::{Error, Result};
use crate::model::{DecompositionModel, ModelConfig};
use crate::numerics::{ParamShape, ParameterStore};

const MAGIC: &[u8; 8] = b"CAPSDEC\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    shape: ParamShape,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    config: ModelConfig,
    vocab: Vec<String>,
    params: Vec<ParamRecord>,
}

/// Writes a model checkpoint.
pub fn save(model: &DecompositionModel, path: &Path) -> Result<()> {
    let store = model.params();
    let manifest = Manifest {
        version: FORMAT_VERSION,
        config: model.config().clone(),
        vocab: model.vocab().tokens().to_vec(),
        params: (0..store.len())
            .map(|i| ParamRecord {
                name: store.name_at(i).to_string(),
                shape: store.shape_at(i),
            })
            .collect(),
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;

    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&FORMAT_VERSION.to_le_bytes())?;
    file.write_all(&(manifest_bytes.len() as u64).to_le_bytes())?;
    file.write_all(&manifest_bytes)?;
    for i in 0..store.len() {
        for &v in store.value_at(i) {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a model checkpoint, validating magic, version and shapes.
pub fn load(path: &Path) -> Result<DecompositionModel> {
    let mut file = std::fs::File::open(path)?;

    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short for header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a model checkpoint".into()));
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)?;
    let manifest_len = u64::from_le_bytes(len_bytes) as usize;
    let mut manifest_bytes = vec![0u8; manifest_len];
    file.read_exact(&mut manifest_bytes)
        .map_err(|_| Error::Checkpoint("truncated manifest".into()))?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)?;
    if manifest.version != version {
        return Err(Error::Checkpoint("manifest and header versions disagree".into()));
    }

    let mut store = ParameterStore::new();
    for record in &manifest.params {
        let len = record.shape.len();
        let mut values = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            file.read_exact(&mut buf).map_err(|_| {
                Error::Checkpoint(format!("truncated payload for parameter '{}'", record.name))
            })?;
            values.push(f64::from_le_bytes(buf));
        }
        store.insert_raw(&record.name, record.shape, values)?;
    }
    let mut trailing = [0u8; 1];
    if file.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }

    let vocab = Vocab::from_tokens(manifest.vocab)?;
    DecompositionModel::from_parts(manifest.config, vocab, store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::Sentence;

    fn small_model() -> DecompositionModel {
        let cfg = ModelConfig {
            capsules: 2,
            layers: 1,
            routing_iters: 2,
            embed_dim: 4,
            capsule_dim: 4,
            window: 2,
            seed: 77,
            ..ModelConfig::default()
        };
        DecompositionModel::new(cfg, Vocab::build(["bank", "river", "money"])).unwrap()
    }

    #[test]
    fn roundtrip_reproduces_outputs_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = small_model();
        save(&model, &path).unwrap();
        let loaded = load(&path).unwrap();

        assert_eq!(model.config(), loaded.config());
        assert_eq!(model.vocab().tokens(), loaded.vocab().tokens());

        let left = Sentence::parse("the bank of the river", 1).unwrap();
        let right = Sentence::parse("a bank holds money", 1).unwrap();
        let before = model.match_probability(&left, &right).unwrap();
        let after = loaded.match_probability(&left, &right).unwrap();
        assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"definitely not a checkpoint").unwrap();
        assert!(load(&path).is_err());
    }

    #[test]
    fn rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&small_model(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(load(&path).is_err());
    }
}
