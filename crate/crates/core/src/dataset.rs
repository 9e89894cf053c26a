//! Labelled acceleration records and their on-disk format.
//!
//! A dataset directory holds `meta.json` and `data.bin`. The binary file is
//! a 16-byte header (`"TLSD"`, then little-endian u32 version, record count
//! and record length) followed by the records as little-endian f32,
//! record-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frame::{DamageScenario, PerturbedDomain, SimulationConfig};

pub const DATA_MAGIC: &[u8; 4] = b"TLSD";
pub const DATA_VERSION: u32 = 1;
pub const META_SCHEMA_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const DATA_FILE: &str = "data.bin";

/// Uniformly sampled acceleration signal (m/s²).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeRecord {
    pub values: Vec<f64>,
    pub sample_rate: f64,
}

impl TimeRecord {
    pub fn new(values: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("record sample {i} is not finite")));
        }
        Ok(Self { values, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rms(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: u32,
    /// Free-form domain tag, e.g. `"simulation"` or `"surrogate_lab"`.
    pub domain: String,
    /// Scenario ids in class-index order.
    pub label_vocabulary: Vec<u32>,
    pub labels: Vec<u32>,
    pub impulse_ids: Vec<usize>,
    pub sample_rate: f64,
    pub n_records: usize,
    pub record_len: usize,
    pub config_hash: String,
    pub seed: u64,
    pub scenarios: Vec<DamageScenario>,
    /// Relative measurement noise (σ / record RMS) added at generation time.
    pub noise_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbedDomain>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<TimeRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.meta.labels
    }

    pub fn record_len(&self) -> usize {
        self.meta.record_len
    }

    pub fn n_classes(&self) -> usize {
        self.meta.label_vocabulary.len()
    }

    /// Dense class index of every record under `vocabulary`.
    pub fn class_indices(&self, vocabulary: &[u32]) -> Result<Vec<usize>> {
        self.meta
            .labels
            .iter()
            .map(|l| {
                vocabulary.iter().position(|v| v == l).ok_or_else(|| {
                    Error::Vocabulary(format!("label {l} is not in vocabulary {vocabulary:?}"))
                })
            })
            .collect()
    }

    /// Records at `indices`, relabelled against `vocabulary` (which must
    /// contain every selected label).
    pub fn subset(&self, indices: &[usize], vocabulary: Option<&[u32]>) -> Result<Dataset> {
        let mut records = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        let mut impulse_ids = Vec::with_capacity(indices.len());
        for &i in indices {
            let rec = self
                .records
                .get(i)
                .ok_or_else(|| Error::Data(format!("record index {i} out of range ({})", self.len())))?;
            records.push(rec.clone());
            labels.push(self.meta.labels[i]);
            impulse_ids.push(self.meta.impulse_ids[i]);
        }
        let label_vocabulary = match vocabulary {
            Some(v) => v.to_vec(),
            None => self.meta.label_vocabulary.clone(),
        };
        let meta = DatasetMeta {
            label_vocabulary,
            labels,
            impulse_ids,
            n_records: records.len(),
            ..self.meta.clone()
        };
        let out = Dataset { meta, records };
        out.class_indices(&out.meta.label_vocabulary)?;
        Ok(out)
    }

    /// Count of records per vocabulary entry.
    pub fn class_counts(&self) -> Result<Vec<usize>> {
        let mut counts = vec![0; self.n_classes()];
        for c in self.class_indices(&self.meta.label_vocabulary)? {
            counts[c] += 1;
        }
        Ok(counts)
    }

    pub fn data_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.len() * self.record_len());
        out.extend_from_slice(DATA_MAGIC);
        out.extend_from_slice(&DATA_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.record_len() as u32).to_le_bytes());
        for rec in &self.records {
            for &v in &rec.values {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    /// SHA-256 over the binary payload and the labels.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.data_bytes());
        for l in &self.meta.labels {
            h.update(l.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let meta = serde_json::to_vec_pretty(&self.meta)?;
        fs::write(dir.join(META_FILE), meta)?;
        fs::write(dir.join(DATA_FILE), self.data_bytes())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let meta: DatasetMeta = serde_json::from_slice(&fs::read(dir.join(META_FILE))?)
            .map_err(|e| Error::CorruptDataset(format!("{}: {e}", META_FILE)))?;
        let bytes = fs::read(dir.join(DATA_FILE))?;
        if bytes.len() < 16 || &bytes[..4] != DATA_MAGIC {
            return Err(Error::CorruptDataset("missing TLSD header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let version = word(4) as u32;
        if version != DATA_VERSION {
            return Err(Error::CorruptDataset(format!("unsupported data version {version}")));
        }
        let (n, len) = (word(8), word(12));
        if bytes.len() != 16 + 4 * n * len {
            return Err(Error::CorruptDataset(format!(
                "expected {} payload bytes for {n}x{len} records, found {}",
                4 * n * len,
                bytes.len() - 16
            )));
        }
        if n != meta.n_records || len != meta.record_len || meta.labels.len() != n || meta.impulse_ids.len() != n {
            return Err(Error::CorruptDataset("meta.json disagrees with data.bin shape".into()));
        }
        let records = bytes[16..]
            .chunks_exact(4 * len.max(1))
            .take(n)
            .map(|chunk| {
                let values = chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                    .collect();
                TimeRecord::new(values, meta.sample_rate)
            })
            .collect::<Result<Vec<_>>>()?;
        let records = if len == 0 { vec![TimeRecord { values: vec![], sample_rate: meta.sample_rate }; n] } else { records };
        Ok(Dataset { meta, records })
    }
}
