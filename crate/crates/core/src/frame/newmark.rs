use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::SystemMatrices;
use crate::dataset::TimeRecord;
use crate::error::{Error, Result};

const BETA: f64 = 0.25;
const GAMMA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ImpulseKind {
    /// `amplitude · sin(π t / duration)` on `[0, duration]`, zero after.
    HalfSine,
    /// Force samples at the simulation rate, zero past the end.
    Sampled { samples: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseRecord {
    pub id: usize,
    #[serde(flatten)]
    pub kind: ImpulseKind,
    pub amplitude: f64,
    pub duration: f64,
    pub applied_dof: usize,
}

impl ImpulseRecord {
    pub fn half_sine(id: usize, amplitude: f64, duration: f64, applied_dof: usize) -> Self {
        Self { id, kind: ImpulseKind::HalfSine, amplitude, duration, applied_dof }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ImpulseKind::HalfSine if !(self.duration > 0.0 && self.duration.is_finite()) => {
                Err(Error::InvalidConfig(format!("impulse {} has non-positive duration", self.id)))
            }
            ImpulseKind::Sampled { samples } if samples.iter().any(|v| !v.is_finite()) => {
                Err(Error::InvalidConfig(format!("impulse {} has non-finite samples", self.id)))
            }
            _ if !self.amplitude.is_finite() => {
                Err(Error::InvalidConfig(format!("impulse {} has non-finite amplitude", self.id)))
            }
            _ => Ok(()),
        }
    }

    fn force_at(&self, step: usize, dt: f64) -> f64 {
        match &self.kind {
            ImpulseKind::HalfSine => {
                let t = step as f64 * dt;
                if t <= self.duration {
                    self.amplitude * (std::f64::consts::PI * t / self.duration).sin()
                } else {
                    0.0
                }
            }
            ImpulseKind::Sampled { samples } => samples.get(step).copied().unwrap_or(0.0),
        }
    }
}

/// Integrates `M a + C v + K u = f(t)` from rest with the average-acceleration
/// Newmark scheme at `Δt = 1/rate` and returns the acceleration history of
/// `output_dof`.
pub fn simulate_impulse(
    sys: &SystemMatrices,
    impulse: &ImpulseRecord,
    rate: f64,
    length: usize,
    output_dof: usize,
) -> Result<TimeRecord> {
    impulse.validate()?;
    if !(rate > 0.0 && rate.is_finite()) || length == 0 {
        return Err(Error::Usage(format!("rate must be > 0 and length >= 1 (got {rate}, {length})")));
    }
    let n = sys.n;
    if output_dof >= n || impulse.applied_dof >= n {
        return Err(Error::Usage(format!(
            "DOF out of range: output {output_dof}, impulse {} for a {n}-DOF system",
            impulse.applied_dof
        )));
    }
    let dt = 1.0 / rate;
    let a0 = 1.0 / (BETA * dt * dt);
    let a1 = GAMMA / (BETA * dt);
    let a2 = 1.0 / (BETA * dt);
    let a3 = 1.0 / (2.0 * BETA) - 1.0;
    let a4 = GAMMA / BETA - 1.0;
    let a5 = dt / 2.0 * (GAMMA / BETA - 2.0);

    let k_eff = &sys.stiffness + &sys.mass * a0 + &sys.damping * a1;
    let k_eff = k_eff
        .cholesky()
        .ok_or_else(|| Error::Numerical("effective stiffness is not positive definite".into()))?;
    let mass = sys
        .mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;

    let mut force = DVector::zeros(n);
    let mut u = DVector::zeros(n);
    let mut v = DVector::zeros(n);
    force[impulse.applied_dof] = impulse.force_at(0, dt);
    let mut a = mass.solve(&force);

    let mut out = Vec::with_capacity(length);
    out.push(a[output_dof]);
    let mut mterm = DVector::zeros(n);
    let mut cterm = DVector::zeros(n);
    for step in 1..length {
        force[impulse.applied_dof] = impulse.force_at(step, dt);
        mterm.copy_from(&u);
        mterm *= a0;
        mterm.axpy(a2, &v, 1.0);
        mterm.axpy(a3, &a, 1.0);
        cterm.copy_from(&u);
        cterm *= a1;
        cterm.axpy(a4, &v, 1.0);
        cterm.axpy(a5, &a, 1.0);
        let mut rhs = force.clone();
        rhs.gemv(1.0, &sys.mass, &mterm, 1.0);
        rhs.gemv(1.0, &sys.damping, &cterm, 1.0);
        let u_next = k_eff.solve(&rhs);
        let mut a_next = (&u_next - &u) * a0;
        a_next.axpy(-a2, &v, 1.0);
        a_next.axpy(-a3, &a, 1.0);
        v.axpy(dt * (1.0 - GAMMA), &a, 1.0);
        v.axpy(dt * GAMMA, &a_next, 1.0);
        u = u_next;
        a = a_next;
        let value = a[output_dof];
        if !value.is_finite() || !u.iter().all(|x| x.is_finite()) {
            return Err(Error::SimulationDivergence { step, reason: "non-finite response".into() });
        }
        out.push(value);
    }
    TimeRecord::new(out, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn sdof(m: f64, c: f64, k: f64) -> SystemMatrices {
        SystemMatrices::from_matrices(
            DMatrix::from_element(1, 1, m),
            DMatrix::from_element(1, 1, c),
            DMatrix::from_element(1, 1, k),
        )
        .unwrap()
    }

    /// Ideal impulse: one sample of force at t = 0.
    fn kick(amplitude: f64) -> ImpulseRecord {
        ImpulseRecord {
            id: 0,
            kind: ImpulseKind::Sampled { samples: vec![amplitude] },
            amplitude,
            duration: 0.0,
            applied_dof: 0,
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let sys = sdof(1.0, 0.3, 1e4);
        let rec = simulate_impulse(&sys, &ImpulseRecord::half_sine(0, 0.0, 1e-3, 0), 4096.0, 500, 0).unwrap();
        assert!(rec.values.iter().all(|&v| v == 0.0));
        assert_eq!(rec.values.len(), 500);
    }

    /// Oracle: an undamped SDOF released by an impulse oscillates at
    /// f = √(k/m)/2π, so successive upward zero crossings of the
    /// acceleration are 1/f apart.
    #[test]
    fn undamped_period_matches_analytic() {
        let (m, k) = (2.0, 2.0 * (2.0 * std::f64::consts::PI * 25.0f64).powi(2));
        let rate = 4096.0;
        let rec = simulate_impulse(&sdof(m, 0.0, k), &kick(10.0), rate, 4096, 0).unwrap();
        let crossings: Vec<f64> = rec
            .values
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] < 0.0 && w[1] >= 0.0)
            .map(|(i, w)| i as f64 + w[0] / (w[0] - w[1]))
            .collect();
        assert!(crossings.len() > 10);
        let period_samples = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let expected = rate / 25.0;
        assert!((period_samples - expected).abs() < 1.0, "{period_samples} vs {expected}");
    }

    #[test]
    fn damped_envelope_decays() {
        let (m, k) = (1.0, (2.0 * std::f64::consts::PI * 20.0f64).powi(2));
        let c = 2.0 * 0.02 * (k * m).sqrt();
        let rate = 4096.0;
        let rec = simulate_impulse(&sdof(m, c, k), &ImpulseRecord::half_sine(0, 50.0, 1e-3, 0), rate, 8192, 0).unwrap();
        let period = (rate / 20.0).round() as usize;
        let peaks: Vec<f64> = rec.values[8..]
            .chunks(period)
            .filter(|c| c.len() == period)
            .map(|c| c.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
            .collect();
        for w in peaks.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} then {}", w[0], w[1]);
        }
        assert!(peaks.last().unwrap() < &(peaks[0] * 0.1));
    }

    #[test]
    fn rejects_bad_dof() {
        let sys = sdof(1.0, 0.0, 1.0);
        assert!(matches!(simulate_impulse(&sys, &kick(1.0), 100.0, 10, 3), Err(Error::Usage(_))));
    }
}
