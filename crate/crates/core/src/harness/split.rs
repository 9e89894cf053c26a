use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// One record, addressed by scenario id and impulse replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordRef {
    pub scenario: u32,
    pub replicate: usize,
}

/// Assignment of records to the four phases. `pretrain`/`pretest` address
/// the source dataset and `finetune`/`test` the target dataset; in the
/// subset-to-subset setting both are the same dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub source_vocabulary: Vec<u32>,
    pub target_vocabulary: Vec<u32>,
    pub pretrain: Vec<RecordRef>,
    pub pretest: Vec<RecordRef>,
    pub finetune: Vec<RecordRef>,
    pub test: Vec<RecordRef>,
}

/// Source and target scenario sets of the four subset-to-subset tasks.
pub fn case1_task(task: u8) -> Result<(Vec<u32>, Vec<u32>)> {
    let (source, target): (&[u32], &[u32]) = match task {
        1 => (&[0, 1, 4, 9, 10], &[2, 3, 5, 6, 7, 8]),
        2 => (&[0, 1, 9, 10], &[2, 3, 4, 5, 6, 7, 8]),
        3 => (&[0, 1, 4, 10], &[2, 3, 5, 6, 7, 8, 9]),
        4 => (&[0, 1, 4, 7], &[2, 3, 5, 6, 8, 9, 10]),
        _ => return Err(Error::Usage(format!("unknown task {task} (expected 1-4)"))),
    };
    Ok((source.to_vec(), target.to_vec()))
}

fn refs(scenarios: &[u32], replicates: std::ops::Range<usize>) -> Vec<RecordRef> {
    scenarios
        .iter()
        .flat_map(|&scenario| replicates.clone().map(move |replicate| RecordRef { scenario, replicate }))
        .collect()
}

/// Subset-to-subset split of one 11-scenario dataset: source scenarios give
/// 5 pretraining records each (the rest are held out for pretesting),
/// target scenarios give 1 fine-tuning record and 5 test records.
pub fn make_case1_split(task: u8, records_per_scenario: usize) -> Result<SplitPlan> {
    let (source, target) = case1_task(task)?;
    if records_per_scenario < 6 {
        return Err(Error::Data(format!("need at least 6 records per scenario, got {records_per_scenario}")));
    }
    Ok(SplitPlan {
        pretrain: refs(&source, 0..5),
        pretest: refs(&source, 5..records_per_scenario),
        finetune: refs(&target, 0..1),
        test: refs(&target, 1..6),
        source_vocabulary: source,
        target_vocabulary: target,
    })
}

fn replicates_by_scenario(data: &Dataset) -> BTreeMap<u32, Vec<usize>> {
    let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (&label, &imp) in data.meta.labels.iter().zip(&data.meta.impulse_ids) {
        map.entry(label).or_default().push(imp);
    }
    for v in map.values_mut() {
        v.sort_unstable();
    }
    map
}

/// Simulation-to-laboratory split: the source is divided 8:2 within every
/// scenario (by replicate order); each target scenario gives its first
/// replicate for fine-tuning and the next five for testing.
pub fn make_case2_split(source: &Dataset, target: &Dataset) -> Result<SplitPlan> {
    let mut plan = SplitPlan {
        source_vocabulary: source.meta.label_vocabulary.clone(),
        target_vocabulary: target.meta.label_vocabulary.clone(),
        pretrain: vec![],
        pretest: vec![],
        finetune: vec![],
        test: vec![],
    };
    let by_source = replicates_by_scenario(source);
    for &scenario in &plan.source_vocabulary {
        let reps = by_source.get(&scenario).map(Vec::as_slice).unwrap_or(&[]);
        if reps.len() < 2 {
            return Err(Error::Data(format!("source scenario {scenario} has {} records, need at least 2", reps.len())));
        }
        let cut = ((reps.len() * 8) / 10).clamp(1, reps.len() - 1);
        plan.pretrain.extend(reps[..cut].iter().map(|&replicate| RecordRef { scenario, replicate }));
        plan.pretest.extend(reps[cut..].iter().map(|&replicate| RecordRef { scenario, replicate }));
    }
    let by_target = replicates_by_scenario(target);
    for &scenario in &plan.target_vocabulary {
        let reps = by_target.get(&scenario).map(Vec::as_slice).unwrap_or(&[]);
        if reps.len() < 6 {
            return Err(Error::Data(format!("target scenario {scenario} has {} records, need at least 6", reps.len())));
        }
        plan.finetune.push(RecordRef { scenario, replicate: reps[0] });
        plan.test.extend(reps[1..6].iter().map(|&replicate| RecordRef { scenario, replicate }));
    }
    Ok(plan)
}

/// The four phase datasets of a [`SplitPlan`].
#[derive(Debug, Clone)]
pub struct SplitData {
    pub pretrain: Dataset,
    pub pretest: Dataset,
    pub finetune: Dataset,
    pub test: Dataset,
}

fn select(data: &Dataset, wanted: &[RecordRef], vocabulary: &[u32]) -> Result<Dataset> {
    let index: HashMap<RecordRef, usize> = data
        .meta
        .labels
        .iter()
        .zip(&data.meta.impulse_ids)
        .enumerate()
        .map(|(i, (&scenario, &replicate))| (RecordRef { scenario, replicate }, i))
        .collect();
    let idx = wanted
        .iter()
        .map(|r| {
            index.get(r).copied().ok_or_else(|| {
                Error::Data(format!("no record for scenario {} replicate {}", r.scenario, r.replicate))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    data.subset(&idx, Some(vocabulary))
}

impl SplitPlan {
    pub fn resolve(&self, source: &Dataset, target: &Dataset) -> Result<SplitData> {
        Ok(SplitData {
            pretrain: select(source, &self.pretrain, &self.source_vocabulary)?,
            pretest: select(source, &self.pretest, &self.source_vocabulary)?,
            finetune: select(target, &self.finetune, &self.target_vocabulary)?,
            test: select(target, &self.test, &self.target_vocabulary)?,
        })
    }

    /// True when no record appears in two phases of the same dataset.
    pub fn is_disjoint(&self) -> bool {
        let overlap = |a: &[RecordRef], b: &[RecordRef]| a.iter().any(|r| b.contains(r));
        !overlap(&self.pretrain, &self.pretest) && !overlap(&self.finetune, &self.test)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_table() {
        let p = make_case1_split(1, 10).unwrap();
        assert_eq!(p.source_vocabulary, vec![0, 1, 4, 9, 10]);
        assert_eq!(p.target_vocabulary, vec![2, 3, 5, 6, 7, 8]);
        assert_eq!(p.test.len(), 30);
        assert_eq!(p.pretrain.len(), 25);
        let p2 = make_case1_split(2, 10).unwrap();
        assert_eq!(p2.target_vocabulary.len(), 7);
        assert_eq!(p2.test.len(), 35);
        assert!(matches!(make_case1_split(5, 10), Err(Error::Usage(_))));
        assert!(make_case1_split(1, 5).is_err());
    }

    #[test]
    fn case1_partitions_disjoint() {
        for task in 1..=4 {
            let p = make_case1_split(task, 10).unwrap();
            assert!(p.is_disjoint());
            for s in &p.source_vocabulary {
                assert!(!p.target_vocabulary.contains(s));
            }
            assert_eq!(p.source_vocabulary.len() + p.target_vocabulary.len(), 11);
        }
    }
}
