use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde_json::json;
use tlshm::arch::{
    build_arch, count_params, freeze_for_strategy, load_checkpoint, save_checkpoint, swap_head, ArchKind,
    HeadInit, HeadMode, Strategy,
};
use tlshm::dataset::{Dataset, DATA_FILE, META_FILE};
use tlshm::frame::{simulate_scenarios, simulate_surrogate_lab, surrogate_lab_scenarios, table3_scenarios};
use tlshm::harness::{self, write_history_csv, Case, EpochStats, ExperimentConfig, ExperimentData, HistoryRow};

use crate::config::{materialize, SimulateFile, TrainFile};
use crate::error::{CliError, CliResult};
use crate::manifest::{verify_dir, verify_file, ManifestBuilder};
use crate::{EvaluateArgs, ExperimentArgs, ParamsArgs, PretrainArgs, SimulateArgs, TransferArgs};

const MODEL_FILE: &str = "model.tlck";
const HISTORY_FILE: &str = "history.csv";
const METRICS_FILE: &str = "metrics.json";
const REPORT_FILE: &str = "report.json";

fn out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::artifact(format!("{}: {e}", dir.display())))
}

fn load_dataset(dir: &Path) -> CliResult<Dataset> {
    if !dir.join(META_FILE).exists() {
        return Err(CliError::artifact(format!("{} is not a dataset directory", dir.display())));
    }
    verify_dir(dir)?;
    Ok(Dataset::load(dir)?)
}

/// Parses `0-4`, `0,2,4` or a mix such as `0,3-5`.
fn parse_replicates(spec: &str) -> CliResult<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    let bad = || CliError::config(format!("bad replicate list {spec:?}"));
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(part.parse().map_err(|_| bad())?);
            }
        }
    }
    Ok(out)
}

fn select_replicates(data: Dataset, spec: Option<&str>) -> CliResult<Dataset> {
    let Some(spec) = spec else { return Ok(data) };
    let wanted = parse_replicates(spec)?;
    let idx: Vec<usize> = (0..data.len()).filter(|&i| wanted.contains(&data.meta.impulse_ids[i])).collect();
    Ok(data.subset(&idx, None)?)
}

fn dataset_inputs(m: &mut ManifestBuilder, dir: &Path) -> CliResult<()> {
    m.input(&dir.join(META_FILE))?;
    m.input(&dir.join(DATA_FILE))
}

fn history(arm: &str, seed: u64, h: &[EpochStats]) -> Vec<HistoryRow> {
    h.iter()
        .map(|e| HistoryRow { arm: arm.into(), seed, epoch: e.epoch, loss: e.loss, accuracy: e.accuracy })
        .collect()
}

fn write_history(dir: &Path, rows: &[HistoryRow]) -> CliResult<()> {
    let file = fs::File::create(dir.join(HISTORY_FILE)).map_err(|e| CliError::artifact(e.to_string()))?;
    write_history_csv(rows, std::io::BufWriter::new(file))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| CliError::artifact(format!("{}: {e}", path.display())))
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let defaults = SimulateFile { simulation: a.profile.simulation(), ..SimulateFile::default() };
    let (file, value) = materialize(&defaults, a.config.as_deref())?;
    file.simulation.validate()?;
    let (mode, data) = if a.surrogate_lab && file.perturbation.is_none() {
        log::info!("simulating 11 surrogate laboratory scenarios");
        ("surrogate_lab", simulate_surrogate_lab(&file.simulation, a.seed)?)
    } else {
        let (mode, scenarios, domain) = if a.table3 {
            ("table3", table3_scenarios(), "simulation".to_string())
        } else if a.surrogate_lab {
            ("surrogate_lab", surrogate_lab_scenarios(), "surrogate_lab".to_string())
        } else {
            let s = file.scenarios.clone().ok_or_else(|| {
                CliError::config("no scenarios: pass --table3, --surrogate-lab or list `scenarios` in the config")
            })?;
            ("config", s, file.domain.clone())
        };
        for s in &scenarios {
            s.validate()?;
        }
        log::info!("simulating {} scenarios x {} impulses", scenarios.len(), file.simulation.impulses_per_scenario);
        (mode, simulate_scenarios(&file.simulation, &scenarios, file.perturbation.as_ref(), a.seed, &domain)?)
    };
    let config = json!({ "mode": mode, "profile": a.profile, "file": value });
    let mut m = ManifestBuilder::start("simulate", a.config.as_deref(), config, Some(a.seed));
    if let Some(p) = &a.config {
        m.input(p)?;
    }
    out_dir(&a.out)?;
    data.save(&a.out)?;
    m.extra(json!({
        "dataset_hash": data.content_hash(),
        "n_records": data.len(),
        "record_len": data.record_len(),
        "label_vocabulary": data.meta.label_vocabulary,
    }));
    m.finish(&a.out, &[META_FILE, DATA_FILE])?;
    log::info!("wrote {} records to {}", data.len(), a.out.display());
    Ok(())
}

/// `(family, fixed class count)` of an `--arch` value.
fn parse_arch(name: &str) -> CliResult<(ArchKind, Option<usize>)> {
    match name {
        "shmnet" => Ok((ArchKind::Shmnet, None)),
        "shmnet11" => Ok((ArchKind::Shmnet, Some(11))),
        "shmnet37" => Ok((ArchKind::Shmnet, Some(37))),
        other => Ok((other.parse::<ArchKind>()?, None)),
    }
}

pub fn pretrain(a: &PretrainArgs) -> CliResult<()> {
    let (kind, fixed) = parse_arch(&a.arch)?;
    let (train, value) = materialize(&TrainFile::with_epochs(a.profile.pretrain_epochs()), a.config.as_deref())?;
    let data = select_replicates(load_dataset(&a.data)?, a.replicates.as_deref())?;
    let n = data.n_classes();
    if let Some(f) = fixed.filter(|&f| f != n) {
        return Err(CliError::data(format!("{} expects {f} classes but the dataset has {n}", a.arch)));
    }
    let spec = build_arch(kind, n, data.record_len(), a.profile.is_desk())?;
    let config = json!({ "arch": a.arch, "profile": a.profile, "replicates": a.replicates, "train": value });
    let mut m = ManifestBuilder::start("pretrain", a.config.as_deref(), config, Some(a.seed));
    dataset_inputs(&mut m, &a.data)?;
    log::info!("pretraining {} on {} records for {} epochs", spec.name, data.len(), train.epochs);
    let (ckpt, h) = harness::pretrain(&data, &spec, &train.settings(), a.seed)?;
    out_dir(&a.out)?;
    save_checkpoint(&ckpt, &a.out.join(MODEL_FILE))?;
    write_history(&a.out, &history("pretrain", a.seed, &h))?;
    m.extra(json!({ "final_loss": h.last().map(|e| e.loss), "final_accuracy": h.last().map(|e| e.accuracy) }));
    m.finish(&a.out, &[MODEL_FILE, HISTORY_FILE])?;
    Ok(())
}

pub fn transfer(a: &TransferArgs) -> CliResult<()> {
    let (train, value) = materialize(&TrainFile::default(), a.config.as_deref())?;
    verify_file(&a.checkpoint)?;
    let parent = load_checkpoint(&a.checkpoint)?;
    let data = select_replicates(load_dataset(&a.data)?, a.replicates.as_deref())?;
    let config = json!({ "strategy": a.strategy, "head": a.head, "replicates": a.replicates, "train": value });
    let mut m = ManifestBuilder::start("transfer", a.config.as_deref(), config, Some(a.seed));
    m.input(&a.checkpoint)?;
    dataset_inputs(&mut m, &a.data)?;
    let settings = train.settings();
    let (ckpt, h) = if a.strategy == Strategy::TransferOff {
        let spec = swap_head(&parent, data.n_classes(), HeadMode::HeadOnly, HeadInit::Fresh(a.seed))?.spec;
        log::info!("training {} from scratch on {} records", spec.name, data.len());
        harness::train_from_scratch(&spec, &data, &settings, a.seed)?
    } else {
        log::info!("fine-tuning with strategy {} on {} records", a.strategy, data.len());
        harness::fine_tune(&parent, a.strategy, a.head, &data, &settings, a.seed)?
    };
    out_dir(&a.out)?;
    save_checkpoint(&ckpt, &a.out.join(MODEL_FILE))?;
    write_history(&a.out, &history(a.strategy.as_str(), a.seed, &h))?;
    m.finish(&a.out, &[MODEL_FILE, HISTORY_FILE])?;
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    verify_file(&a.checkpoint)?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let data = select_replicates(load_dataset(&a.data)?, a.replicates.as_deref())?;
    let mut m = ManifestBuilder::start("evaluate", None, json!({ "replicates": a.replicates }), None);
    m.input(&a.checkpoint)?;
    dataset_inputs(&mut m, &a.data)?;
    let metrics = harness::evaluate(&ckpt, &data)?;
    log::info!("accuracy {:.4} on {} records", metrics.accuracy, metrics.n_test);
    out_dir(&a.out)?;
    write_json(&a.out.join(METRICS_FILE), &metrics)?;
    m.finish(&a.out, &[METRICS_FILE])?;
    Ok(())
}

pub fn experiment(a: &ExperimentArgs) -> CliResult<()> {
    let mut defaults = ExperimentConfig::default();
    if let Some(p) = a.profile {
        defaults.desk_profile = p.is_desk();
        defaults.pretrain_epochs = p.pretrain_epochs();
    }
    let (mut cfg, _) = materialize(&defaults, a.config.as_deref())?;
    if let Some(c) = a.case {
        cfg.case = if c == 1 { Case::Case1 } else { Case::Case2 };
        if c == 1 && a.strategy.is_empty() && cfg.strategies == defaults.strategies {
            cfg.strategies = vec![Strategy::S1FreezeConv, Strategy::TransferOff];
        }
    }
    if a.task.is_some() {
        cfg.task = a.task;
    }
    match (a.seed, a.seeds) {
        (base, Some(n)) => cfg.seeds = (0..n).map(|i| base.unwrap_or(1) + i).collect(),
        (Some(s), None) => cfg.seeds = vec![s],
        (None, None) => {}
    }
    if !a.strategy.is_empty() {
        cfg.strategies = a.strategy.clone();
    }
    cfg.validate()?;
    let config_value = serde_json::to_value(&cfg).expect("config serializes");
    let mut m = ManifestBuilder::start("experiment", a.config.as_deref(), config_value, cfg.seeds.first().copied());
    if let Some(p) = &a.config {
        m.input(p)?;
    }

    let data = match (&a.source, &a.target) {
        (None, None) => {
            log::info!("generating datasets (seed {})", cfg.data_seed);
            harness::build_datasets(&cfg)?
        }
        (source, target) => {
            let target_dir = target.as_ref().or(source.as_ref()).expect("one is set");
            let target = load_dataset(target_dir)?;
            dataset_inputs(&mut m, target_dir)?;
            let source = match (cfg.case, source) {
                (Case::Case1, _) => target.clone(),
                (Case::Case2, Some(dir)) => {
                    dataset_inputs(&mut m, dir)?;
                    load_dataset(dir)?
                }
                (Case::Case2, None) => harness::build_datasets(&cfg)?.source,
            };
            ExperimentData { source, target }
        }
    };
    log::info!("running {} arms x {} seeds", cfg.strategies.len(), cfg.seeds.len());
    let out = harness::run_experiment_on(&cfg, &data)?;
    out_dir(&a.out)?;
    fs::write(a.out.join(REPORT_FILE), out.report.to_json()? + "\n")
        .map_err(|e| CliError::artifact(format!("{}: {e}", a.out.display())))?;
    write_history(&a.out, &out.history)?;
    m.extra(json!({ "timings": out.timings }));
    m.finish(&a.out, &[REPORT_FILE, HISTORY_FILE])?;
    for arm in &out.report.arms {
        log::info!("{:>3}: mean accuracy {:?} (std {:?})", arm.arm, arm.mean_accuracy, arm.std_accuracy);
    }
    Ok(())
}

pub fn params(a: &ParamsArgs) -> CliResult<()> {
    let (kind, fixed) = parse_arch(&a.arch)?;
    let n = fixed.unwrap_or(a.classes);
    let sim = a.profile.simulation();
    let spec = build_arch(kind, n, sim.length / sim.downsample, a.profile.is_desk())?;
    let mask = a.strategy.map(|s| freeze_for_strategy(&spec, s)).transpose()?;
    let c = count_params(&spec, mask.as_ref())?;
    println!("trainable {} frozen {} total {}", c.trainable, c.frozen, c.total);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replicate_lists() {
        assert_eq!(parse_replicates("0").unwrap().into_iter().collect::<Vec<_>>(), vec![0]);
        assert_eq!(parse_replicates("1-3,7").unwrap().into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 7]);
        assert!(parse_replicates("3-1").is_err());
        assert!(parse_replicates("x").is_err());
    }
}
