use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Checkpoint;
use crate::error::{Error, Result};
use crate::nn::network::{entry_name, init_entry};
use crate::nn::{LayerSpec, NetworkSpec, ParameterStore};

/// Which parameters stay fixed while fine-tuning on the target domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// No transfer: the target model is trained from random weights.
    #[serde(rename = "off")]
    TransferOff,
    #[serde(rename = "s1")]
    S1FreezeConv,
    #[serde(rename = "s2")]
    S2FreezeFc,
    #[serde(rename = "s3")]
    S3Full,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::TransferOff, Strategy::S1FreezeConv, Strategy::S2FreezeFc, Strategy::S3Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::TransferOff => "off",
            Strategy::S1FreezeConv => "s1",
            Strategy::S2FreezeFc => "s2",
            Strategy::S3Full => "s3",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            Strategy::TransferOff => "transfer_off",
            Strategy::S1FreezeConv => "s1_freeze_conv",
            Strategy::S2FreezeFc => "s2_freeze_fc",
            Strategy::S3Full => "s3_full",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s || st.long_name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown strategy {s:?} (expected off, s1, s2 or s3)")))
    }
}

/// One flag per parameter entry of a spec.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezeMask {
    pub strategy: Strategy,
    pub frozen: Vec<bool>,
}

impl FreezeMask {
    pub fn apply<T>(&self, params: &mut ParameterStore<T>) -> Result<()> {
        if self.frozen.len() != params.entries.len() {
            return Err(Error::Usage(format!(
                "freeze mask has {} flags for {} parameter entries",
                self.frozen.len(),
                params.entries.len()
            )));
        }
        for (e, &f) in params.entries.iter_mut().zip(&self.frozen) {
            e.frozen = f;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCounts {
    pub trainable: usize,
    pub frozen: usize,
    pub total: usize,
}

/// Weights plus biases, split by `mask` (everything trainable without one).
pub fn count_params(spec: &NetworkSpec, mask: Option<&FreezeMask>) -> Result<ParamCounts> {
    let groups = spec.param_groups();
    if let Some(m) = mask {
        if m.frozen.len() != groups.len() {
            return Err(Error::Usage(format!(
                "freeze mask has {} flags for {} parameter entries",
                m.frozen.len(),
                groups.len()
            )));
        }
    }
    let mut counts = ParamCounts { trainable: 0, frozen: 0, total: 0 };
    for (i, (_, shape, bias)) in groups.iter().enumerate() {
        let n = shape.iter().product::<usize>() + bias;
        counts.total += n;
        if mask.is_some_and(|m| m.frozen[i]) {
            counts.frozen += n;
        } else {
            counts.trainable += n;
        }
    }
    Ok(counts)
}

fn dense_entries(spec: &NetworkSpec) -> Vec<usize> {
    spec.param_groups()
        .iter()
        .enumerate()
        .filter(|(_, (layer, _, _))| spec.layers[*layer].is_dense())
        .map(|(i, _)| i)
        .collect()
}

fn require_family(spec: &NetworkSpec) -> Result<Vec<usize>> {
    let dense = dense_entries(spec);
    let has_trunk = spec.layers.iter().any(|l| l.is_conv() || matches!(l, LayerSpec::Residual { .. }));
    if !has_trunk || dense.len() < 2 || !matches!(spec.layers.last(), Some(LayerSpec::Dense { .. })) {
        return Err(Error::Usage(format!(
            "{} is not a conv trunk + dense head network; transfer strategies do not apply",
            spec.name
        )));
    }
    Ok(dense)
}

/// s1 freezes the convolutional trunk, s2 freezes every hidden dense layer
/// (the output layer stays trainable), s3 and off freeze nothing.
pub fn freeze_for_strategy(spec: &NetworkSpec, strategy: Strategy) -> Result<FreezeMask> {
    let dense = require_family(spec)?;
    let groups = spec.param_groups();
    let output = *dense.last().expect("checked");
    let frozen = groups
        .iter()
        .enumerate()
        .map(|(i, (layer, _, _))| match strategy {
            Strategy::S1FreezeConv => !spec.layers[*layer].is_dense(),
            Strategy::S2FreezeFc => spec.layers[*layer].is_dense() && i != output,
            Strategy::S3Full | Strategy::TransferOff => false,
        })
        .collect();
    Ok(FreezeMask { strategy, frozen })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// Replace the output layer only.
    HeadOnly,
    /// Replace every dense layer; the convolutional trunk is kept.
    AllFc,
}

impl FromStr for HeadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head_only" => Ok(HeadMode::HeadOnly),
            "all_fc" => Ok(HeadMode::AllFc),
            _ => Err(Error::Usage(format!("unknown head mode {s:?} (expected head_only or all_fc)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadInit {
    /// Keep the existing weights; only valid when the class count is unchanged.
    Copy,
    /// Draw new weights from a generator seeded with this value.
    Fresh(u64),
}

/// Resizes the output layer to `n_classes` and re-initialises the layers
/// selected by `mode`. The optimizer state is dropped.
pub fn swap_head(ckpt: &Checkpoint, n_classes: usize, mode: HeadMode, init: HeadInit) -> Result<Checkpoint> {
    if n_classes < 2 {
        return Err(Error::Usage(format!("need at least 2 classes, got {n_classes}")));
    }
    let dense = require_family(&ckpt.spec)?;
    let seed = match init {
        HeadInit::Copy if n_classes == ckpt.spec.n_classes => return Ok(ckpt.clone()),
        HeadInit::Copy => {
            return Err(Error::Usage(format!(
                "copy head cannot change the class count ({} → {n_classes})",
                ckpt.spec.n_classes
            )))
        }
        HeadInit::Fresh(seed) => seed,
    };

    let mut spec = ckpt.spec.clone();
    let last = spec.layers.len() - 1;
    if let LayerSpec::Dense { outputs, .. } = &mut spec.layers[last] {
        *outputs = n_classes;
    }
    spec.n_classes = n_classes;
    if spec.name.ends_with(&ckpt.spec.n_classes.to_string()) {
        let stem = spec.name.trim_end_matches(char::is_numeric).to_string();
        spec.name = format!("{stem}{n_classes}");
    }
    spec.shapes()?;

    let replace: Vec<usize> = match mode {
        HeadMode::HeadOnly => vec![*dense.last().expect("checked")],
        HeadMode::AllFc => dense,
    };
    let groups = spec.param_groups();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ckpt.params.clone();
    for &i in &replace {
        let (layer, shape, bias) = groups[i].clone();
        params.entries[i] = init_entry(&spec, layer, shape, bias, &mut rng);
        debug_assert_eq!(params.entries[i].name, entry_name(&spec, layer));
    }
    params.check_against(&spec)?;

    let mut meta = ckpt.meta.clone();
    meta.head_mode = Some(mode);
    Ok(Checkpoint { spec, params, optimizer: None, meta })
}
