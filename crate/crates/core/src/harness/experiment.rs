use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, Metrics};
use super::split::{make_case1_split, make_case2_split, SplitPlan};
use super::train::{fine_tune, pretrain, train_from_scratch, EpochStats, TrainSettings};
use crate::arch::{build_arch, count_params, freeze_for_strategy, ArchKind, Checkpoint, HeadMode, Strategy};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::frame::{simulate_surrogate_lab, simulate_table3, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    /// Subset-to-subset transfer inside the laboratory-style dataset.
    Case1,
    /// Simulation (37 scenarios) to laboratory-style (11 scenarios) transfer.
    Case2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: Case,
    /// Task 1-4 of the subset setting; ignored for case 2.
    pub task: Option<u8>,
    /// Arms to run; `off` is the train-from-scratch baseline.
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub noise_fraction: f64,
    /// 1,000-sample records and 128-wide dense layers.
    pub desk_profile: bool,
    pub standardize: bool,
    pub arch: ArchKind,
    /// Head replacement; defaults to all dense layers for case 1 and the
    /// output layer only for case 2.
    pub head_mode: Option<HeadMode>,
    /// Seed of the generated datasets.
    pub data_seed: u64,
    /// Simulation settings; defaults follow the profile.
    pub simulation: Option<SimulationConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            case: Case::Case2,
            task: None,
            strategies: vec![Strategy::TransferOff, Strategy::S1FreezeConv, Strategy::S2FreezeFc, Strategy::S3Full],
            seeds: vec![1, 2, 3, 4, 5],
            pretrain_epochs: 200,
            finetune_epochs: 300,
            batch_size: 32,
            lr: 1e-4,
            noise_fraction: 0.1,
            desk_profile: true,
            standardize: false,
            arch: ArchKind::Shmnet,
            head_mode: None,
            data_seed: 7,
            simulation: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.strategies.is_empty() {
            return bad("strategies must not be empty".into());
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return bad(format!("strategy {s} listed twice"));
            }
        }
        if self.case == Case::Case1 && !matches!(self.task, Some(1..=4)) {
            return bad(format!("case1 needs task 1-4, got {:?}", self.task));
        }
        self.pretrain_settings().validate()?;
        self.finetune_settings().validate()?;
        self.simulation().validate()
    }

    pub fn simulation(&self) -> SimulationConfig {
        self.simulation.clone().unwrap_or_else(|| {
            if self.desk_profile {
                SimulationConfig::desk()
            } else {
                SimulationConfig::default()
            }
        })
    }

    pub fn head_mode(&self) -> HeadMode {
        self.head_mode.unwrap_or(match self.case {
            Case::Case1 => HeadMode::AllFc,
            Case::Case2 => HeadMode::HeadOnly,
        })
    }

    pub fn pretrain_settings(&self) -> TrainSettings {
        TrainSettings {
            epochs: self.pretrain_epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            noise_fraction: self.noise_fraction,
            standardize: self.standardize,
        }
    }

    /// Shared by every target-domain arm, transfer or not.
    pub fn finetune_settings(&self) -> TrainSettings {
        TrainSettings { epochs: self.finetune_epochs, ..self.pretrain_settings() }
    }
}

/// Source and target datasets of an experiment (the same dataset twice for
/// case 1).
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub source: Dataset,
    pub target: Dataset,
}

pub fn build_datasets(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let sim = cfg.simulation();
    let target = simulate_surrogate_lab(&sim, cfg.data_seed)?;
    let source = match cfg.case {
        Case::Case1 => target.clone(),
        Case::Case2 => simulate_table3(&sim, cfg.data_seed)?,
    };
    Ok(ExperimentData { source, target })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHashes {
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub source_vocabulary: Vec<u32>,
    /// Class index → scenario id of the target head.
    pub target_vocabulary: Vec<u32>,
    pub pretrain: usize,
    pub pretest: usize,
    pub finetune: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainRun {
    pub seed: u64,
    pub final_loss: Option<f64>,
    pub final_accuracy: Option<f64>,
    /// Held-out source records.
    pub pretest: Option<Metrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRun {
    pub seed: u64,
    pub metrics: Option<Metrics>,
    pub final_loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Strategy,
    pub head_mode: Option<HeadMode>,
    pub trainable_params: usize,
    pub frozen_params: usize,
    pub runs: Vec<ArmRun>,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    /// Every seed produced metrics.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub arm: Strategy,
    /// Mean accuracy of the arm minus mean accuracy of the `off` arm.
    pub accuracy_gain: f64,
}

/// Published accuracies for the same protocol, for side-by-side reading.
/// They come from laboratory data and are not expected to match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub note: String,
    pub accuracy: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub datasets: DatasetHashes,
    pub split: SplitSummary,
    pub model: String,
    pub pretrain: Vec<PretrainRun>,
    pub arms: Vec<ArmReport>,
    pub improvement: Vec<Improvement>,
    pub reference: ReferenceValues,
    pub complete: bool,
}

impl ExperimentReport {
    pub fn arm(&self, arm: Strategy) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One row of the training-curve export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    /// `pretrain`, `off`, `s1`, `s2` or `s3`.
    pub arm: String,
    pub seed: u64,
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

pub fn write_history_csv<W: Write>(rows: &[HistoryRow], mut out: W) -> Result<()> {
    writeln!(out, "arm,seed,epoch,loss,accuracy")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.arm, r.seed, r.epoch, r.loss, r.accuracy)?;
    }
    Ok(())
}

/// Wall-clock seconds per phase; kept out of the report so that reruns
/// compare byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub phase: String,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub history: Vec<HistoryRow>,
    pub timings: Vec<Timing>,
}

fn reference_values(cfg: &ExperimentConfig) -> ReferenceValues {
    let (note, pairs): (&str, Vec<(&str, f64)>) = match (cfg.case, cfg.task) {
        (Case::Case2, _) => (
            "published laboratory accuracies for transfer off / s1 / s2 / s3",
            vec![("off", 0.818), ("s1", 0.891), ("s2", 0.673), ("s3", 0.873)],
        ),
        (Case::Case1, Some(t)) => {
            let table = [(0.9667, 0.9667), (0.9714, 0.8857), (0.8857, 0.8571), (0.9142, 0.8571)];
            let (on, off) = table[usize::from(t.clamp(1, 4)) - 1];
            (
                "published laboratory accuracies with transfer (s1, all dense layers replaced) and without",
                vec![("s1", on), ("off", off)],
            )
        }
        (Case::Case1, None) => ("", vec![]),
    };
    ReferenceValues { note: note.into(), accuracy: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect() }
}

fn history_rows<'a>(arm: &str, seed: u64, h: &'a [EpochStats]) -> impl Iterator<Item = HistoryRow> + 'a {
    let arm = arm.to_string();
    h.iter().map(move |e| HistoryRow { arm: arm.clone(), seed, epoch: e.epoch, loss: e.loss, accuracy: e.accuracy })
}

struct SeedResult {
    pretrain: PretrainRun,
    arms: Vec<ArmRun>,
    history: Vec<HistoryRow>,
    timings: Vec<Timing>,
}

fn run_seed(cfg: &ExperimentConfig, split: &super::split::SplitData, seed: u64) -> Result<SeedResult> {
    let source_spec = build_arch(cfg.arch, split.pretrain.n_classes(), split.pretrain.record_len(), cfg.desk_profile)?;
    let target_spec = build_arch(cfg.arch, split.finetune.n_classes(), split.finetune.record_len(), cfg.desk_profile)?;
    let mut history = Vec::new();
    let mut timings = Vec::new();
    let needs_pretrain = cfg.strategies.iter().any(|s| *s != Strategy::TransferOff);

    let mut pretrained: Option<Checkpoint> = None;
    let mut pretrain_run = PretrainRun { seed, final_loss: None, final_accuracy: None, pretest: None, error: None };
    if needs_pretrain {
        let t = Instant::now();
        match pretrain(&split.pretrain, &source_spec, &cfg.pretrain_settings(), seed) {
            Ok((ckpt, h)) => {
                pretrain_run.final_loss = h.last().map(|e| e.loss);
                pretrain_run.final_accuracy = h.last().map(|e| e.accuracy);
                history.extend(history_rows("pretrain", seed, &h));
                if !split.pretest.is_empty() {
                    pretrain_run.pretest = Some(evaluate(&ckpt, &split.pretest)?);
                }
                pretrained = Some(ckpt);
            }
            Err(e) => pretrain_run.error = Some(e.to_string()),
        }
        timings.push(Timing { phase: "pretrain".into(), seed, seconds: t.elapsed().as_secs_f64() });
    }

    let settings = cfg.finetune_settings();
    let mut arms = Vec::new();
    for &strategy in &cfg.strategies {
        let t = Instant::now();
        let trained = match (strategy, &pretrained) {
            (Strategy::TransferOff, _) => train_from_scratch(&target_spec, &split.finetune, &settings, seed),
            (_, Some(ckpt)) => fine_tune(ckpt, strategy, cfg.head_mode(), &split.finetune, &settings, seed),
            (_, None) => Err(Error::Training { epoch: 0, reason: "pretraining failed".into() }),
        };
        let run = match trained.and_then(|(ckpt, h)| evaluate(&ckpt, &split.test).map(|m| (m, h))) {
            Ok((metrics, h)) => {
                history.extend(history_rows(strategy.as_str(), seed, &h));
                ArmRun { seed, metrics: Some(metrics), final_loss: h.last().map(|e| e.loss), error: None }
            }
            Err(e) => ArmRun { seed, metrics: None, final_loss: None, error: Some(e.to_string()) },
        };
        timings.push(Timing { phase: strategy.as_str().into(), seed, seconds: t.elapsed().as_secs_f64() });
        arms.push(run);
    }
    Ok(SeedResult { pretrain: pretrain_run, arms, history, timings })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

pub fn split_for(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<SplitPlan> {
    match cfg.case {
        Case::Case1 => {
            let task = cfg.task.ok_or_else(|| Error::InvalidConfig("case1 needs a task".into()))?;
            let rps = data.target.class_counts()?.into_iter().min().unwrap_or(0);
            make_case1_split(task, rps)
        }
        Case::Case2 => make_case2_split(&data.source, &data.target),
    }
}

/// Runs every arm for every seed on pre-built datasets.
pub fn run_experiment_on(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let plan = split_for(cfg, data)?;
    let split = plan.resolve(&data.source, &data.target)?;

    #[cfg(feature = "parallel")]
    let per_seed: Vec<Result<SeedResult>> = {
        use rayon::prelude::*;
        cfg.seeds.par_iter().map(|&s| run_seed(cfg, &split, s)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_seed: Vec<Result<SeedResult>> = cfg.seeds.iter().map(|&s| run_seed(cfg, &split, s)).collect();
    let per_seed = per_seed.into_iter().collect::<Result<Vec<_>>>()?;

    let target_spec = build_arch(cfg.arch, split.finetune.n_classes(), split.finetune.record_len(), cfg.desk_profile)?;
    let mut arms = Vec::new();
    for (a, &strategy) in cfg.strategies.iter().enumerate() {
        let mask = freeze_for_strategy(&target_spec, strategy)?;
        let counts = count_params(&target_spec, Some(&mask))?;
        let runs: Vec<ArmRun> = per_seed.iter().map(|r| r.arms[a].clone()).collect();
        let accs: Vec<f64> = runs.iter().filter_map(|r| r.metrics.as_ref().map(|m| m.accuracy)).collect();
        let complete = accs.len() == runs.len();
        let (mean, std) = if accs.is_empty() { (None, None) } else {
            let (m, s) = mean_std(&accs);
            (Some(m), Some(s))
        };
        arms.push(ArmReport {
            arm: strategy,
            head_mode: (strategy != Strategy::TransferOff).then(|| cfg.head_mode()),
            trainable_params: counts.trainable,
            frozen_params: counts.frozen,
            runs,
            mean_accuracy: mean,
            std_accuracy: std,
            complete,
        });
    }
    let baseline = arms.iter().find(|a| a.arm == Strategy::TransferOff).and_then(|a| a.mean_accuracy);
    let improvement = match baseline {
        Some(b) => arms
            .iter()
            .filter(|a| a.arm != Strategy::TransferOff)
            .filter_map(|a| a.mean_accuracy.map(|m| Improvement { arm: a.arm, accuracy_gain: m - b }))
            .collect(),
        None => vec![],
    };

    let complete = arms.iter().all(|a| a.complete);
    let report = ExperimentReport {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        datasets: DatasetHashes { source: data.source.content_hash(), target: data.target.content_hash() },
        split: SplitSummary {
            source_vocabulary: plan.source_vocabulary.clone(),
            target_vocabulary: plan.target_vocabulary.clone(),
            pretrain: plan.pretrain.len(),
            pretest: plan.pretest.len(),
            finetune: plan.finetune.len(),
            test: plan.test.len(),
        },
        model: target_spec.name.clone(),
        pretrain: per_seed.iter().map(|r| r.pretrain.clone()).collect(),
        arms,
        improvement,
        reference: reference_values(cfg),
        complete,
    };
    let mut history = Vec::new();
    let mut timings = Vec::new();
    for r in per_seed {
        history.extend(r.history);
        timings.extend(r.timings);
    }
    Ok(ExperimentOutput { report, history, timings })
}

/// Generates the datasets from `cfg.data_seed` and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    run_experiment_on(cfg, &build_datasets(cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let c = ExperimentConfig { seeds: vec![], ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let c = ExperimentConfig { case: Case::Case1, task: Some(5), ..Default::default() };
        assert!(c.validate().is_err());
        let c = ExperimentConfig { batch_size: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"case":"case1","task":2,"strategies":["s1","off"]}"#).unwrap();
        assert_eq!(c.task, Some(2));
        assert_eq!(c.head_mode(), HeadMode::AllFc);
        assert_eq!(c.finetune_epochs, 300);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"cases":"case1"}"#).is_err());
    }

    #[test]
    fn mean_and_sample_std() {
        let (m, s) = mean_std(&[0.5, 1.0]);
        assert_eq!(m, 0.75);
        assert!((s - 0.353_553_390_593_273_8).abs() < 1e-15);
        assert_eq!(mean_std(&[0.3]).1, 0.0);
    }

    #[test]
    fn csv_header_and_rows() {
        let rows = vec![HistoryRow { arm: "s1".into(), seed: 3, epoch: 0, loss: 2.5, accuracy: 0.25 }];
        let mut buf = Vec::new();
        write_history_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "arm,seed,epoch,loss,accuracy\ns1,3,0,2.5,0.25\n");
    }
}
