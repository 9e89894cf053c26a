use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HeadMode, Strategy};
use crate::error::{Error, Result};
use crate::nn::{AdamState, Moments, NetworkSpec, ParamEntry, ParameterStore};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TLCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Provenance of a trained parameter set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epochs: usize,
    /// Content hash of the dataset the weights were last trained on.
    pub dataset_hash: String,
    /// Scenario ids in output-unit order.
    pub label_vocabulary: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_mode: Option<HeadMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    /// Hash of the checkpoint this one was fine-tuned from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_hash: Option<String>,
    /// Inputs were scaled to unit RMS during training.
    #[serde(default)]
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: NetworkSpec,
    pub params: ParameterStore<f32>,
    pub optimizer: Option<AdamState<f32>>,
    pub meta: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
struct EntryIndex {
    name: String,
    layer: usize,
    weight_shape: Vec<usize>,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct OptimizerIndex {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct ArrayIndex {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: NetworkSpec,
    meta: CheckpointMeta,
    entries: Vec<EntryIndex>,
    optimizer: Option<OptimizerIndex>,
    arrays: Vec<ArrayIndex>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

impl Checkpoint {
    /// `[(name, values)]` in file order: every entry's weights then bias,
    /// followed by the first and second Adam moments when present.
    fn arrays(&self) -> Vec<(String, &[f32])> {
        let mut out = Vec::new();
        for e in &self.params.entries {
            out.push((format!("{}.weight", e.name), e.weights.as_slice()));
            out.push((format!("{}.bias", e.name), e.bias.as_slice()));
        }
        if let Some(opt) = &self.optimizer {
            for (tag, moments) in [("m", &opt.first), ("v", &opt.second)] {
                for (e, m) in self.params.entries.iter().zip(moments) {
                    out.push((format!("adam.{tag}.{}.weight", e.name), m.weights.as_slice()));
                    out.push((format!("adam.{tag}.{}.bias", e.name), m.bias.as_slice()));
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let arrays = self.arrays();
        let header = Header {
            spec: self.spec.clone(),
            meta: self.meta.clone(),
            entries: self
                .params
                .entries
                .iter()
                .map(|e| EntryIndex { name: e.name.clone(), layer: e.layer, weight_shape: e.weight_shape.clone(), frozen: e.frozen })
                .collect(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerIndex {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                epsilon: o.epsilon,
                step: o.step,
            }),
            arrays: arrays.iter().map(|(name, v)| ArrayIndex { name: name.clone(), len: v.len() }).collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let payload: usize = arrays.iter().map(|(_, v)| v.len() * 4).sum();
        let mut out = Vec::with_capacity(16 + json.len() + payload);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, values) in arrays {
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(corrupt("missing TLCK header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(corrupt(format!("unsupported checkpoint version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let body = &bytes[16..];
        if header_len > body.len() as u64 {
            return Err(corrupt(format!("header claims {header_len} bytes, file has {}", body.len())));
        }
        let (json, mut payload) = body.split_at(header_len as usize);
        let header: Header = serde_json::from_slice(json).map_err(|e| corrupt(format!("header: {e}")))?;
        let expected: usize = header.arrays.iter().map(|a| a.len * 4).sum();
        if payload.len() != expected {
            return Err(corrupt(format!("expected {expected} array bytes, found {}", payload.len())));
        }
        let n_entries = header.entries.len();
        let want_arrays = 2 * n_entries * if header.optimizer.is_some() { 3 } else { 1 };
        if header.arrays.len() != want_arrays {
            return Err(corrupt(format!("array index has {} arrays, expected {want_arrays}", header.arrays.len())));
        }

        let mut arrays = header.arrays.iter().map(|a| {
            let (head, rest) = payload.split_at(a.len * 4);
            payload = rest;
            head.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect::<Vec<f32>>()
        });
        let mut next = || arrays.next().expect("array count checked");

        let entries = header
            .entries
            .into_iter()
            .map(|e| ParamEntry {
                name: e.name,
                layer: e.layer,
                weight_shape: e.weight_shape,
                weights: next(),
                bias: next(),
                frozen: e.frozen,
            })
            .collect();
        let optimizer = header.optimizer.map(|o| {
            let mut moments = || (0..n_entries).map(|_| Moments { weights: next(), bias: next() }).collect::<Vec<_>>();
            let first = moments();
            let second = moments();
            AdamState { lr: o.lr, beta1: o.beta1, beta2: o.beta2, epsilon: o.epsilon, step: o.step, first, second }
        });
        let ckpt = Checkpoint { spec: header.spec, params: ParameterStore { entries }, optimizer, meta: header.meta };
        ckpt.spec.shapes()?;
        ckpt.params.check_against(&ckpt.spec)?;
        Ok(ckpt)
    }

    /// SHA-256 of the serialized checkpoint.
    pub fn hash(&self) -> Result<String> {
        Ok(crate::hash::sha256_hex(&self.to_bytes()?))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

/// Loads a checkpoint and checks that its parameters fit `spec`.
pub fn load_checkpoint_for(path: &Path, spec: &NetworkSpec) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    ckpt.params.check_against(spec)?;
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::arch::{build_shmnet_with, HeadConfig, ShmnetConfig};

    fn sample(n: usize, with_opt: bool) -> Checkpoint {
        let cfg = ShmnetConfig {
            input_len: 64,
            channels: [2, 4, 8],
            kernels: [7, 5, 3],
            head: HeadConfig { hidden: 16, dropout: 0.5, n_classes: n },
        };
        let spec = build_shmnet_with(&cfg).unwrap();
        let mut params = ParameterStore::init(&spec, &mut ChaCha8Rng::seed_from_u64(5));
        params.entries[0].frozen = true;
        params.entries[1].bias[0] = f32::from_bits(0x0000_0001);
        let optimizer = with_opt.then(|| {
            let mut s = AdamState::new(&params, 1e-4);
            s.step = 17;
            s.first[2].weights[3] = -0.25;
            s
        });
        let meta = CheckpointMeta {
            seed: 42,
            epochs: 3,
            dataset_hash: "abc".into(),
            label_vocabulary: (0..n as u32).collect(),
            head_mode: Some(HeadMode::AllFc),
            strategy: Some(Strategy::S1FreezeConv),
            parent_hash: None,
            standardize: true,
        };
        Checkpoint { spec, params, optimizer, meta }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        for opt in [false, true] {
            let ckpt = sample(11, opt);
            let path = dir.path().join("m.tlck");
            save_checkpoint(&ckpt, &path).unwrap();
            let back = load_checkpoint(&path).unwrap();
            assert_eq!(back, ckpt);
            assert_eq!(back.params.entries[1].bias[0].to_bits(), 1);
            assert_eq!(back.to_bytes().unwrap(), ckpt.to_bytes().unwrap());
        }
    }

    #[test]
    fn truncation_and_bad_version_are_corrupt() {
        let bytes = sample(11, true).to_bytes().unwrap();
        for cut in [3, 15, 40, bytes.len() - 1] {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(Error::CorruptCheckpoint(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn mismatched_spec_names_layer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tlck");
        save_checkpoint(&sample(11, false), &path).unwrap();
        let other = sample(37, false).spec;
        match load_checkpoint_for(&path, &other) {
            Err(Error::LayerMismatch { layer, name, .. }) => {
                assert_eq!(layer, other.layers.len() - 1);
                assert!(name.starts_with("dense"));
            }
            r => panic!("unexpected {r:?}"),
        }
    }
}
