use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry, material and damping of the portal frame.
///
/// Defaults describe a laboratory-scale steel frame (2.0 m beam, 1.5 m
/// columns, 50×6 mm rectangular section bent about its strong axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub beam_length: f64,
    pub column_height: f64,
    pub elastic_modulus: f64,
    pub density: f64,
    pub section_area: f64,
    pub section_inertia: f64,
    pub elements_per_member: usize,
    /// Distance of the accelerometer from the left beam end.
    pub sensor_offset: f64,
    /// Distance of the hammer impact from the left beam end.
    pub hammer_offset: f64,
    pub rayleigh_alpha: f64,
    pub rayleigh_beta: f64,
    /// Viscous dashpot acting in parallel with each translational joint spring.
    pub joint_dashpot: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            beam_length: 2.0,
            column_height: 1.5,
            elastic_modulus: 2.0e11,
            density: 7850.0,
            section_area: 0.05 * 0.006,
            section_inertia: 0.006 * 0.05f64.powi(3) / 12.0,
            elements_per_member: 6,
            sensor_offset: 0.262,
            hammer_offset: 1.5,
            rayleigh_alpha: 4.7,
            rayleigh_beta: 2.0e-5,
            joint_dashpot: 0.0,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beam_length", self.beam_length),
            ("column_height", self.column_height),
            ("elastic_modulus", self.elastic_modulus),
            ("density", self.density),
            ("section_area", self.section_area),
            ("section_inertia", self.section_inertia),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        for (name, value) in [("sensor_offset", self.sensor_offset), ("hammer_offset", self.hammer_offset)] {
            if !(value.is_finite() && (0.0..=self.beam_length).contains(&value)) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, beam_length={}], got {value}",
                    self.beam_length
                )));
            }
        }
        if self.elements_per_member < 2 {
            return Err(Error::InvalidConfig(format!(
                "elements_per_member must be >= 2, got {}",
                self.elements_per_member
            )));
        }
        for (name, value) in [
            ("rayleigh_alpha", self.rayleigh_alpha),
            ("rayleigh_beta", self.rayleigh_beta),
            ("joint_dashpot", self.joint_dashpot),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Joint spring stiffnesses. `k1`/`k4` act horizontally, `k2`/`k5`
/// vertically and `k3`/`k6` rotationally, at the left and right joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpringSet {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
}

impl Default for JointSpringSet {
    fn default() -> Self {
        Self::uniform(1.0e7, 1.0e5)
    }
}

impl JointSpringSet {
    pub fn uniform(translational: f64, rotational: f64) -> Self {
        Self::from_array([
            translational,
            translational,
            rotational,
            translational,
            translational,
            rotational,
        ])
    }

    pub fn from_array(k: [f64; 6]) -> Self {
        Self { k1: k[0], k2: k[1], k3: k[2], k4: k[3], k5: k[4], k6: k[5] }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.k1, self.k2, self.k3, self.k4, self.k5, self.k6]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_array(self.to_array().map(|k| k * factor))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, k) in self.to_array().iter().enumerate() {
            if !(k.is_finite() && *k > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "spring k{} must be finite and > 0, got {k}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Everything needed to turn a frame into a dataset: model, sampling and
/// impulse settings. This is the JSON document `simulate --config` reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub frame: FrameConfig,
    pub springs: JointSpringSet,
    pub sample_rate: f64,
    /// Samples simulated per record, before downsampling.
    pub length: usize,
    pub downsample: usize,
    pub impulses_per_scenario: usize,
    pub impulse_amplitude: f64,
    pub impulse_duration: f64,
    /// Relative spread of the impulse amplitude and duration.
    pub impulse_jitter: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            frame: FrameConfig::default(),
            springs: JointSpringSet::default(),
            sample_rate: 4096.0,
            length: 10_000,
            downsample: 2,
            impulses_per_scenario: 10,
            impulse_amplitude: 100.0,
            impulse_duration: 1.0e-3,
            impulse_jitter: 0.2,
        }
    }
}

impl SimulationConfig {
    /// Reduced record length (2,000 samples, 1,000 after downsampling).
    pub fn desk() -> Self {
        Self { length: 2_000, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.springs.validate()?;
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::InvalidConfig(format!("sample_rate must be > 0, got {}", self.sample_rate)));
        }
        if self.length == 0 || self.downsample == 0 || !self.length.is_multiple_of(self.downsample) {
            return Err(Error::InvalidConfig(format!(
                "length ({}) must be positive and divisible by downsample ({})",
                self.length, self.downsample
            )));
        }
        if self.impulses_per_scenario == 0 {
            return Err(Error::InvalidConfig("impulses_per_scenario must be >= 1".into()));
        }
        if !(self.impulse_duration > 0.0 && self.impulse_amplitude.is_finite()) {
            return Err(Error::InvalidConfig("impulse duration must be > 0 and amplitude finite".into()));
        }
        if !(0.0..1.0).contains(&self.impulse_jitter) {
            return Err(Error::InvalidConfig(format!(
                "impulse_jitter must lie in [0, 1), got {}",
                self.impulse_jitter
            )));
        }
        Ok(())
    }
}
