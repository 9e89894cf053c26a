use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{freeze_for_strategy, swap_head, Checkpoint, CheckpointMeta, HeadInit, HeadMode, Strategy};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, argmax_rows, augment_gaussian, softmax_cross_entropy, AdamState, Batch, Mode, Network, NetworkSpec,
    Tensor,
};

/// Optimiser and augmentation settings shared by every training phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Gaussian noise σ as a fraction of each record's RMS, redrawn per batch.
    pub noise_fraction: f64,
    /// Scale every record to unit RMS before it enters the network.
    pub standardize: bool,
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(Error::InvalidConfig(format!("noise_fraction {} outside [0, 1]", self.noise_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's (augmented) batches.
    pub loss: f64,
    /// Fraction of augmented training records classified correctly in
    /// training mode.
    pub accuracy: f64,
}

// Sub-streams of the per-run generator.
const STREAM_INIT: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_HEAD: u64 = 2;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Records as network inputs, checked against the expected length.
pub(crate) fn prepare_inputs(data: &Dataset, input_len: usize, standardize: bool) -> Result<Vec<Vec<f32>>> {
    if data.record_len() != input_len {
        return Err(Error::Data(format!(
            "records have {} samples but the network expects {input_len}",
            data.record_len()
        )));
    }
    Ok(data
        .records
        .iter()
        .map(|r| {
            let scale = if standardize && r.rms() > 0.0 { 1.0 / r.rms() } else { 1.0 };
            r.values.iter().map(|v| (v * scale) as f32).collect()
        })
        .collect())
}

pub(crate) fn stack(inputs: &[Vec<f32>], idx: &[usize]) -> Result<Tensor<f32>> {
    let len = inputs.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(idx.len() * len);
    for &i in idx {
        data.extend_from_slice(&inputs[i]);
    }
    Tensor::new(vec![idx.len(), 1, len], data)
}

/// Runs `settings.epochs` epochs of shuffled mini-batch Adam on `net`.
fn train_loop(
    net: &mut Network<f32>,
    inputs: &[Vec<f32>],
    labels: &[usize],
    settings: &TrainSettings,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EpochStats>> {
    settings.validate()?;
    if inputs.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    let mut state = AdamState::new(&net.params, settings.lr);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(settings.epochs);
    for epoch in 0..settings.epochs {
        order.shuffle(rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(settings.batch_size) {
            let clean = Batch::new(stack(inputs, chunk)?, chunk.iter().map(|&i| labels[i]).collect())?;
            let batch = augment_gaussian(&clean, settings.noise_fraction, rng);
            let logits = net.forward(&batch.inputs, Mode::Train, rng)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &batch.labels)?;
            if !loss.is_finite() {
                return Err(Error::Training { epoch, reason: format!("loss became {loss}") });
            }
            loss_sum += loss * chunk.len() as f64;
            correct += argmax_rows(&logits).iter().zip(&batch.labels).filter(|(p, l)| p == l).count();
            let grads = net.backward(&grad, false)?;
            adam_step(&mut net.params, &grads, &mut state)?;
        }
        if let Some(e) = net.params.entries.iter().find(|e| !e.weights.iter().chain(&e.bias).all(|v| v.is_finite())) {
            return Err(Error::Training { epoch, reason: format!("non-finite parameters in {}", e.name) });
        }
        let n = inputs.len() as f64;
        history.push(EpochStats { epoch, loss: loss_sum / n, accuracy: correct as f64 / n });
    }
    Ok(history)
}

fn train_data(data: &Dataset, spec: &NetworkSpec, vocabulary: &[u32], settings: &TrainSettings) -> Result<(Vec<Vec<f32>>, Vec<usize>)> {
    if data.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    if vocabulary.len() != spec.n_classes {
        return Err(Error::Vocabulary(format!(
            "{} labels in vocabulary but the network has {} outputs",
            vocabulary.len(),
            spec.n_classes
        )));
    }
    let labels = data.class_indices(vocabulary)?;
    Ok((prepare_inputs(data, spec.input_len, settings.standardize)?, labels))
}

/// Trains `spec` from a seeded random initialisation on every record of
/// `data`; output unit `i` stands for `data.meta.label_vocabulary[i]`.
pub fn pretrain(data: &Dataset, spec: &NetworkSpec, settings: &TrainSettings, seed: u64) -> Result<(Checkpoint, Vec<EpochStats>)> {
    let vocabulary = data.meta.label_vocabulary.clone();
    let (inputs, labels) = train_data(data, spec, &vocabulary, settings)?;
    let mut net = Network::init(spec.clone(), &mut rng_for(seed, STREAM_INIT))?;
    let history = train_loop(&mut net, &inputs, &labels, settings, &mut rng_for(seed, STREAM_TRAIN))?;
    let meta = CheckpointMeta {
        seed,
        epochs: settings.epochs,
        dataset_hash: data.content_hash(),
        label_vocabulary: vocabulary,
        standardize: settings.standardize,
        ..CheckpointMeta::default()
    };
    Ok((Checkpoint { spec: spec.clone(), params: net.params, optimizer: None, meta }, history))
}

/// Same as [`pretrain`], recorded as the no-transfer arm.
pub fn train_from_scratch(spec: &NetworkSpec, data: &Dataset, settings: &TrainSettings, seed: u64) -> Result<(Checkpoint, Vec<EpochStats>)> {
    let (mut ckpt, history) = pretrain(data, spec, settings, seed)?;
    ckpt.meta.strategy = Some(Strategy::TransferOff);
    Ok((ckpt, history))
}

/// Replaces the head of `ckpt` for the classes of `data`, applies the
/// strategy's freeze mask and trains the remaining parameters.
pub fn fine_tune(
    ckpt: &Checkpoint,
    strategy: Strategy,
    head_mode: HeadMode,
    data: &Dataset,
    settings: &TrainSettings,
    seed: u64,
) -> Result<(Checkpoint, Vec<EpochStats>)> {
    if strategy == Strategy::TransferOff {
        return Err(Error::Usage("fine-tuning needs a transfer strategy (s1, s2 or s3)".into()));
    }
    if data.is_empty() {
        return Err(Error::Usage("fine-tuning set is empty".into()));
    }
    let vocabulary = data.meta.label_vocabulary.clone();
    let mut target = swap_head(ckpt, vocabulary.len(), head_mode, HeadInit::Fresh(rng_for(seed, STREAM_HEAD).random()))?;
    let mask = freeze_for_strategy(&target.spec, strategy)?;
    mask.apply(&mut target.params)?;
    let (inputs, labels) = train_data(data, &target.spec, &vocabulary, settings)?;
    let mut net = Network::new(target.spec.clone(), target.params)?;
    let history = train_loop(&mut net, &inputs, &labels, settings, &mut rng_for(seed, STREAM_TRAIN))?;
    let meta = CheckpointMeta {
        seed,
        epochs: settings.epochs,
        dataset_hash: data.content_hash(),
        label_vocabulary: vocabulary,
        head_mode: Some(head_mode),
        strategy: Some(strategy),
        parent_hash: Some(ckpt.hash()?),
        standardize: settings.standardize,
    };
    Ok((Checkpoint { spec: target.spec, params: net.params, optimizer: None, meta }, history))
}
