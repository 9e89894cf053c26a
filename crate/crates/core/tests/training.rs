use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlshm::arch::{
    build_residual, build_shmnet_with, load_checkpoint, save_checkpoint, HeadConfig, HeadMode, ResidualConfig,
    ShmnetConfig, Strategy,
};
use tlshm::dataset::Dataset;
use tlshm::frame::{simulate_surrogate_lab, SimulationConfig};
use tlshm::harness::{evaluate, fine_tune, make_case2_split, pretrain, TrainSettings};
use tlshm::nn::{grad_check, Batch, GradCheckOptions, ParameterStore, Tensor};

fn tiny_target() -> Dataset {
    let sim = SimulationConfig { length: 256, impulses_per_scenario: 3, ..SimulationConfig::default() };
    simulate_surrogate_lab(&sim, 3).unwrap()
}

fn quick() -> TrainSettings {
    TrainSettings { epochs: 3, batch_size: 8, lr: 1e-3, noise_fraction: 0.1, standardize: false }
}

fn small_shmnet(input_len: usize, n: usize) -> tlshm::nn::NetworkSpec {
    build_shmnet_with(&ShmnetConfig {
        input_len,
        channels: [4, 8, 8],
        kernels: [7, 5, 3],
        head: HeadConfig { hidden: 16, dropout: 0.5, n_classes: n },
    })
    .unwrap()
}

#[test]
fn residual_gradients_match_finite_differences() {
    let spec = build_residual(&ResidualConfig::small(48, HeadConfig { hidden: 8, dropout: 0.5, n_classes: 3 })).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut params = ParameterStore::<f64>::init(&spec, &mut rng);
    for e in &mut params.entries {
        for b in &mut e.bias {
            *b = rng.random_range(-0.1..0.1);
        }
    }
    let x: Vec<f64> = (0..2 * 48).map(|i| (i as f64 * 0.29).sin()).collect();
    let batch = Batch::new(Tensor::new(vec![2, 1, 48], x).unwrap(), vec![2, 0]).unwrap();
    let err = grad_check(&spec, &params, &batch, GradCheckOptions::default()).unwrap();
    assert!(err < 1e-5, "{err}");
}

#[test]
fn pretraining_is_seeded_and_checkpoints_round_trip() {
    let data = tiny_target();
    let spec = small_shmnet(data.record_len(), data.n_classes());
    let (a, ha) = pretrain(&data, &spec, &quick(), 4).unwrap();
    let (b, hb) = pretrain(&data, &spec, &quick(), 4).unwrap();
    let (c, _) = pretrain(&data, &spec, &quick(), 5).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    assert_ne!(a.hash().unwrap(), c.hash().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.tlck");
    save_checkpoint(&a, &path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back.hash().unwrap(), a.hash().unwrap());
    assert_eq!(evaluate(&back, &data).unwrap(), evaluate(&a, &data).unwrap());
}

#[test]
fn residual_s1_keeps_trunk_bitwise() {
    let data = tiny_target();
    let spec = build_residual(&ResidualConfig::small(data.record_len(), HeadConfig { hidden: 16, dropout: 0.5, n_classes: 11 })).unwrap();
    let (base, _) = pretrain(&data, &spec, &quick(), 1).unwrap();
    let (tuned, _) = fine_tune(&base, Strategy::S1FreezeConv, HeadMode::AllFc, &data, &quick(), 2).unwrap();
    for (t, b) in tuned.params.entries.iter().zip(&base.params.entries) {
        if spec.layers[t.layer].is_conv() {
            assert_eq!(t.weights, b.weights, "{}", t.name);
            assert_eq!(t.bias, b.bias, "{}", t.name);
        }
    }
    assert_eq!(tuned.meta.parent_hash, Some(base.hash().unwrap()));
    assert_eq!(tuned.meta.strategy, Some(Strategy::S1FreezeConv));
}

#[test]
fn s3_updates_every_layer() {
    let data = tiny_target();
    let spec = small_shmnet(data.record_len(), 11);
    let (base, _) = pretrain(&data, &spec, &quick(), 1).unwrap();
    let (tuned, h) = fine_tune(&base, Strategy::S3Full, HeadMode::HeadOnly, &data, &quick(), 2).unwrap();
    assert_eq!(h.len(), 3);
    for (t, b) in tuned.params.entries.iter().zip(&base.params.entries) {
        assert_ne!(t.weights, b.weights, "{}", t.name);
        assert!(!t.frozen);
    }
}

#[test]
fn case2_split_is_disjoint_and_complete() {
    let sim = SimulationConfig { length: 256, impulses_per_scenario: 6, ..SimulationConfig::default() };
    let target = simulate_surrogate_lab(&sim, 3).unwrap();
    let source = tlshm::frame::simulate_table3(&sim, 3).unwrap();
    let plan = make_case2_split(&source, &target).unwrap();
    assert!(plan.is_disjoint());
    let split = plan.resolve(&source, &target).unwrap();
    assert_eq!(split.pretrain.len() + split.pretest.len(), source.len());
    assert_eq!(split.pretrain.len(), 37 * 4);
    assert_eq!(split.finetune.len(), 11);
    assert_eq!(split.test.len(), 55);
    assert_eq!(split.finetune.meta.label_vocabulary, target.meta.label_vocabulary);
}
