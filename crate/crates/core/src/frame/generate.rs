use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    apply_damage, assemble_frame, simulate_impulse, surrogate_lab_scenarios, table3_scenarios, DamageScenario,
    FrameConfig, ImpulseRecord, JointSpringSet, SimulationConfig,
};
use crate::dataset::{Dataset, DatasetMeta, TimeRecord, META_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::hash::json_hash;

/// Keeps every `factor`-th sample starting with the first.
pub fn downsample(rec: &TimeRecord, factor: usize) -> Result<TimeRecord> {
    if factor == 0 {
        return Err(Error::Shape("downsample factor must be >= 1".into()));
    }
    if !rec.len().is_multiple_of(factor) {
        return Err(Error::Shape(format!(
            "record length {} is not divisible by factor {factor}",
            rec.len()
        )));
    }
    Ok(TimeRecord {
        values: rec.values.iter().step_by(factor).copied().collect(),
        sample_rate: rec.sample_rate / factor as f64,
    })
}

/// `count` half-sine hammer hits whose amplitude and duration are spread by
/// up to ±`jitter` (relative) around the nominal values, drawn from `seed`.
pub fn default_impulses(
    count: usize,
    amplitude: f64,
    duration: f64,
    jitter: f64,
    seed: u64,
    applied_dof: usize,
) -> Vec<ImpulseRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|id| {
            let a = amplitude * (1.0 + rng.random_range(-jitter..=jitter));
            let d = duration * (1.0 + rng.random_range(-jitter..=jitter));
            ImpulseRecord::half_sine(id, a, d, applied_dof)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSettings {
    pub sample_rate: f64,
    /// Simulated samples per record, before downsampling.
    pub length: usize,
    pub downsample: usize,
    /// Measurement noise σ relative to each record's RMS.
    pub noise_fraction: f64,
    pub seed: u64,
    pub domain: String,
}

/// Simulates every (scenario, impulse) pair and stacks the sensor records,
/// scenario-major. Labels are scenario ids; the vocabulary follows the
/// order of `scenarios`.
pub fn generate_dataset(
    frame: &FrameConfig,
    base: &JointSpringSet,
    scenarios: &[DamageScenario],
    impulses: &[ImpulseRecord],
    settings: &GenerationSettings,
) -> Result<Dataset> {
    if scenarios.is_empty() || impulses.is_empty() {
        return Err(Error::Usage("need at least one scenario and one impulse".into()));
    }
    if !(settings.noise_fraction >= 0.0 && settings.noise_fraction.is_finite()) {
        return Err(Error::InvalidConfig("noise_fraction must be finite and >= 0".into()));
    }
    if settings.downsample == 0 || !settings.length.is_multiple_of(settings.downsample) {
        return Err(Error::Shape(format!(
            "length {} is not divisible by downsample factor {}",
            settings.length, settings.downsample
        )));
    }

    let systems = scenarios
        .iter()
        .map(|s| {
            let springs = apply_damage(base, s)?;
            assemble_frame(frame, &springs)
        })
        .collect::<Result<Vec<_>>>()?;

    let pairs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..impulses.len()).map(move |i| (s, i)))
        .collect();

    let run = |&(s, i): &(usize, usize)| -> Result<TimeRecord> {
        let sys = &systems[s];
        let output = sys.sensor_dof.expect("portal frames carry a sensor DOF");
        let wrap = |e: Error| Error::Generation { scenario: scenarios[s].id, impulse: i, source: Box::new(e) };
        let rec = simulate_impulse(sys, &impulses[i], settings.sample_rate, settings.length, output).map_err(wrap)?;
        let mut rec = downsample(&rec, settings.downsample)?;
        if settings.noise_fraction > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream((s * impulses.len() + i) as u64);
            let sigma = settings.noise_fraction * rec.rms();
            if sigma > 0.0 {
                let normal = Normal::new(0.0, sigma).map_err(|e| Error::Numerical(e.to_string()))?;
                for v in &mut rec.values {
                    *v += normal.sample(&mut rng);
                }
            }
        }
        // Stored precision matches the f32 file format so a reload is exact.
        for v in &mut rec.values {
            *v = *v as f32 as f64;
        }
        Ok(rec)
    };

    #[cfg(feature = "parallel")]
    let records: Vec<Result<TimeRecord>> = {
        use rayon::prelude::*;
        pairs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let records: Vec<Result<TimeRecord>> = pairs.iter().map(run).collect();
    let records = records.into_iter().collect::<Result<Vec<_>>>()?;

    let labels = pairs.iter().map(|&(s, _)| scenarios[s].id).collect();
    let impulse_ids = pairs.iter().map(|&(_, i)| impulses[i].id).collect();
    let config_hash = json_hash(&(frame, base, scenarios, impulses, settings));
    let record_len = settings.length / settings.downsample;
    Ok(Dataset {
        meta: DatasetMeta {
            schema_version: META_SCHEMA_VERSION,
            domain: settings.domain.clone(),
            label_vocabulary: scenarios.iter().map(|s| s.id).collect(),
            labels,
            impulse_ids,
            sample_rate: settings.sample_rate / settings.downsample as f64,
            n_records: records.len(),
            record_len,
            config_hash,
            seed: settings.seed,
            scenarios: scenarios.to_vec(),
            noise_fraction: settings.noise_fraction,
            simulation: None,
            perturbation: None,
        },
        records,
    })
}

/// How far a synthetic target domain departs from the simulation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbSpec {
    /// Relative reduction of E and of every spring, in [0, 0.5].
    pub stiffness_reduction: f64,
    /// Each spring is multiplied by a factor drawn from [1 - j, 1 + j], j in [0, 0.5].
    pub spring_jitter: f64,
    /// Added joint dashpot coefficient (N·s/m), >= 0.
    pub joint_dashpot: f64,
    /// Measurement noise σ relative to record RMS, in [0, 0.5].
    pub noise_fraction: f64,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn none() -> Self {
        Self { stiffness_reduction: 0.0, spring_jitter: 0.0, joint_dashpot: 0.0, noise_fraction: 0.0, seed: 0 }
    }
}

/// Target-domain defaults: 5% softer, 10% spring scatter, joint dashpots
/// and 2% measurement noise.
pub fn surrogate_lab_perturbation(seed: u64) -> PerturbSpec {
    PerturbSpec {
        stiffness_reduction: 0.05,
        spring_jitter: 0.10,
        joint_dashpot: 2.0e3,
        noise_fraction: 0.02,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedDomain {
    pub spec: PerturbSpec,
    pub frame: FrameConfig,
    pub springs: JointSpringSet,
    /// Jitter factor applied to each spring.
    pub jitter: [f64; 6],
}

pub fn perturb_domain(cfg: &FrameConfig, base: &JointSpringSet, spec: &PerturbSpec) -> Result<PerturbedDomain> {
    for (name, v) in [
        ("stiffness_reduction", spec.stiffness_reduction),
        ("spring_jitter", spec.spring_jitter),
        ("noise_fraction", spec.noise_fraction),
    ] {
        if !(v.is_finite() && (0.0..=0.5).contains(&v)) {
            return Err(Error::InvalidSpec(format!("{name} must lie in [0, 0.5], got {v}")));
        }
    }
    if !(spec.joint_dashpot.is_finite() && spec.joint_dashpot >= 0.0) {
        return Err(Error::InvalidSpec(format!("joint_dashpot must be >= 0, got {}", spec.joint_dashpot)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let j = spec.spring_jitter;
    let jitter: [f64; 6] = std::array::from_fn(|_| if j > 0.0 { 1.0 + rng.random_range(-j..=j) } else { 1.0 });
    let scale = 1.0 - spec.stiffness_reduction;
    let k = base.to_array();
    let springs = JointSpringSet::from_array(std::array::from_fn(|i| k[i] * scale * jitter[i]));
    if springs.validate().is_err() {
        return Err(Error::InvalidSpec("perturbation produces a non-positive spring stiffness".into()));
    }
    let frame = FrameConfig {
        elastic_modulus: cfg.elastic_modulus * scale,
        joint_dashpot: cfg.joint_dashpot + spec.joint_dashpot,
        ..cfg.clone()
    };
    if !(frame.elastic_modulus > 0.0) {
        return Err(Error::InvalidSpec("perturbation produces a non-positive elastic modulus".into()));
    }
    Ok(PerturbedDomain { spec: spec.clone(), frame, springs, jitter })
}

/// Simulates `scenarios` under `sim`, optionally on a perturbed copy of the
/// frame. Impulses are drawn from `seed`; measurement noise comes from the
/// perturbation (none when `perturb` is `None`).
pub fn simulate_scenarios(
    sim: &SimulationConfig,
    scenarios: &[DamageScenario],
    perturb: Option<&PerturbSpec>,
    seed: u64,
    domain: &str,
) -> Result<Dataset> {
    sim.validate()?;
    let perturbed = perturb.map(|p| perturb_domain(&sim.frame, &sim.springs, p)).transpose()?;
    let (frame, springs) = match &perturbed {
        Some(d) => (&d.frame, &d.springs),
        None => (&sim.frame, &sim.springs),
    };
    let hammer = assemble_frame(frame, springs)?
        .hammer_dof
        .ok_or_else(|| Error::ModelDefinition("frame has no hammer DOF".into()))?;
    let impulses = default_impulses(
        sim.impulses_per_scenario,
        sim.impulse_amplitude,
        sim.impulse_duration,
        sim.impulse_jitter,
        seed,
        hammer,
    );
    let settings = GenerationSettings {
        sample_rate: sim.sample_rate,
        length: sim.length,
        downsample: sim.downsample,
        noise_fraction: perturb.map_or(0.0, |p| p.noise_fraction),
        seed,
        domain: domain.to_string(),
    };
    let mut data = generate_dataset(frame, springs, scenarios, &impulses, &settings)?;
    data.meta.simulation = Some(sim.clone());
    data.meta.perturbation = perturbed;
    Ok(data)
}

/// The 37 simulated scenarios, noise-free.
pub fn simulate_table3(sim: &SimulationConfig, seed: u64) -> Result<Dataset> {
    simulate_scenarios(sim, &table3_scenarios(), None, seed, "simulation")
}

/// The 11 laboratory-style scenarios on the perturbed surrogate frame. The
/// impulse draw uses a different stream from the simulation set so the two
/// domains never share hammer hits.
pub fn simulate_surrogate_lab(sim: &SimulationConfig, seed: u64) -> Result<Dataset> {
    let perturb = surrogate_lab_perturbation(seed);
    simulate_scenarios(sim, &surrogate_lab_scenarios(), Some(&perturb), seed ^ 0x5eed_1ab0, "surrogate_lab")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{table3_scenarios, PortalLayout};

    fn short_settings(seed: u64) -> GenerationSettings {
        GenerationSettings {
            sample_rate: 4096.0,
            length: 400,
            downsample: 2,
            noise_fraction: 0.0,
            seed,
            domain: "simulation".into(),
        }
    }

    #[test]
    fn downsample_cases() {
        let rec = TimeRecord::new((0..10_000).map(|i| i as f64).collect(), 4096.0).unwrap();
        assert_eq!(downsample(&rec, 1).unwrap(), rec);
        let half = downsample(&rec, 2).unwrap();
        assert_eq!(half.len(), 5000);
        assert_eq!(half.sample_rate, 2048.0);
        assert_eq!(half.values[1], 2.0);
        assert!(matches!(downsample(&rec, 3), Err(Error::Shape(_))));
    }

    #[test]
    fn impulses_are_seeded_and_bounded() {
        let a = default_impulses(10, 100.0, 1e-3, 0.2, 7, 3);
        let b = default_impulses(10, 100.0, 1e-3, 0.2, 7, 3);
        assert_eq!(a, b);
        assert!(a.iter().all(|i| (80.0..=120.0).contains(&i.amplitude)));
        assert!(a.iter().all(|i| (0.8e-3..=1.2e-3).contains(&i.duration)));
        assert_ne!(a[0].amplitude, a[1].amplitude);
    }

    #[test]
    fn single_pair_dataset() {
        let cfg = FrameConfig::default();
        let springs = JointSpringSet::default();
        let dof = PortalLayout::new(&cfg, &springs).unwrap().hammer_dof();
        let imp = default_impulses(1, 100.0, 1e-3, 0.2, 1, dof);
        let ds = generate_dataset(&cfg, &springs, &table3_scenarios()[5..6], &imp, &short_settings(1)).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.labels(), &[5]);
        assert_eq!(ds.record_len(), 200);
        assert_eq!(ds.meta.sample_rate, 2048.0);
    }

    #[test]
    fn noise_is_seeded() {
        let cfg = FrameConfig::default();
        let springs = JointSpringSet::default();
        let dof = PortalLayout::new(&cfg, &springs).unwrap().hammer_dof();
        let imp = default_impulses(2, 100.0, 1e-3, 0.2, 1, dof);
        let s = GenerationSettings { noise_fraction: 0.02, ..short_settings(4) };
        let a = generate_dataset(&cfg, &springs, &table3_scenarios()[..2], &imp, &s).unwrap();
        let b = generate_dataset(&cfg, &springs, &table3_scenarios()[..2], &imp, &s).unwrap();
        assert_eq!(a.data_bytes(), b.data_bytes());
        let c = generate_dataset(&cfg, &springs, &table3_scenarios()[..2], &imp, &GenerationSettings { seed: 5, ..s }).unwrap();
        assert_ne!(a.data_bytes(), c.data_bytes());
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let cfg = FrameConfig::default();
        let springs = JointSpringSet::default();
        let out = perturb_domain(&cfg, &springs, &PerturbSpec::none()).unwrap();
        assert_eq!(out.frame, cfg);
        assert_eq!(out.springs, springs);
    }

    #[test]
    fn jitter_is_reproducible_and_bounded() {
        let cfg = FrameConfig::default();
        let springs = JointSpringSet::default();
        let spec = PerturbSpec { spring_jitter: 0.1, seed: 11, ..PerturbSpec::none() };
        let a = perturb_domain(&cfg, &springs, &spec).unwrap();
        let b = perturb_domain(&cfg, &springs, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.jitter.iter().all(|j| (0.9..=1.1).contains(j)));
        assert!(a.jitter.iter().any(|j| *j != 1.0));
    }

    #[test]
    fn out_of_range_spec_rejected() {
        let cfg = FrameConfig::default();
        let springs = JointSpringSet::default();
        for spec in [
            PerturbSpec { stiffness_reduction: 0.6, ..PerturbSpec::none() },
            PerturbSpec { spring_jitter: -0.1, ..PerturbSpec::none() },
            PerturbSpec { joint_dashpot: f64::NAN, ..PerturbSpec::none() },
        ] {
            assert!(matches!(perturb_domain(&cfg, &springs, &spec), Err(Error::InvalidSpec(_))));
        }
    }
}
