use serde::{Deserialize, Serialize};

use super::train::{prepare_inputs, stack};
use crate::arch::Checkpoint;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::nn::{argmax_rows, Network};

const EVAL_CHUNK: usize = 64;

/// Classification results against a labelled test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Row = true class, column = predicted class, both in vocabulary order.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_accuracy: Vec<f64>,
    /// Scenario id of each class index.
    pub label_vocabulary: Vec<u32>,
    pub n_test: usize,
}

impl Metrics {
    pub fn from_predictions(label_vocabulary: &[u32], truth: &[usize], predicted: &[usize]) -> Result<Self> {
        let c = label_vocabulary.len();
        if truth.len() != predicted.len() {
            return Err(Error::Usage(format!("{} labels vs {} predictions", truth.len(), predicted.len())));
        }
        let mut confusion = vec![vec![0usize; c]; c];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= c || p >= c {
                return Err(Error::Vocabulary(format!("class index {} outside {c} classes", t.max(p))));
            }
            confusion[t][p] += 1;
        }
        let n = truth.len();
        let trace: usize = (0..c).map(|i| confusion[i][i]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: usize = row.iter().sum();
                if total == 0 { 0.0 } else { row[i] as f64 / total as f64 }
            })
            .collect();
        Ok(Self {
            accuracy: if n == 0 { 0.0 } else { trace as f64 / n as f64 },
            confusion,
            per_class_accuracy,
            label_vocabulary: label_vocabulary.to_vec(),
            n_test: n,
        })
    }

    /// Records per true class.
    pub fn row_sums(&self) -> Vec<usize> {
        self.confusion.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Eval-mode predictions (argmax, lowest index on ties) for every record.
pub fn predict(ckpt: &Checkpoint, data: &Dataset) -> Result<Vec<usize>> {
    let inputs = prepare_inputs(data, ckpt.spec.input_len, ckpt.meta.standardize)?;
    let net = Network::new(ckpt.spec.clone(), ckpt.params.clone())?;
    let idx: Vec<usize> = (0..inputs.len()).collect();
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in idx.chunks(EVAL_CHUNK) {
        out.extend(argmax_rows(&net.predict(&stack(&inputs, chunk)?)?));
    }
    Ok(out)
}

/// Scores `ckpt` on `data`, whose labels must all belong to the
/// checkpoint's vocabulary.
pub fn evaluate(ckpt: &Checkpoint, data: &Dataset) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Data("test set is empty".into()));
    }
    let vocab = &ckpt.meta.label_vocabulary;
    if vocab.len() != ckpt.spec.n_classes {
        return Err(Error::Vocabulary(format!(
            "checkpoint vocabulary has {} labels for {} outputs",
            vocab.len(),
            ckpt.spec.n_classes
        )));
    }
    let truth = data.class_indices(vocab)?;
    let predicted = predict(ckpt, data)?;
    Metrics::from_predictions(vocab, &truth, &predicted)
}
