use serde::{Deserialize, Serialize};

use super::JointSpringSet;
use crate::error::{Error, Result};

/// Stiffness multipliers used for every damaged joint group in the
/// simulation scenario table, mildest first.
pub const DAMAGE_LEVELS: [f64; 6] = [0.98, 0.95, 0.9, 0.8, 0.5, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    None,
    Left,
    Right,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamageKind {
    Intact,
    /// k1, k2 and k3 (or k4..k6) reduced together.
    Whole,
    Translational,
    Rotational,
    /// Any other combination of reduced springs.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageScenario {
    pub id: u32,
    pub side: Side,
    pub kind: DamageKind,
    /// Multipliers on k1..k6, each in (0, 1].
    pub multipliers: [f64; 6],
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl DamageScenario {
    pub fn intact(id: u32) -> Self {
        Self {
            id,
            side: Side::None,
            kind: DamageKind::Intact,
            multipliers: [1.0; 6],
            description: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.multipliers.iter().enumerate() {
            if !(m.is_finite() && *m > 0.0 && *m <= 1.0) {
                return Err(Error::InvalidScenario {
                    id: self.id,
                    reason: format!("multiplier for k{} must lie in (0, 1], got {m}", i + 1),
                });
            }
        }
        if self.kind == DamageKind::Intact && self.multipliers != [1.0; 6] {
            return Err(Error::InvalidScenario {
                id: self.id,
                reason: "intact scenario must have all multipliers equal to 1".into(),
            });
        }
        Ok(())
    }
}

/// Scales each spring of `base` by the matching scenario multiplier.
pub fn apply_damage(base: &JointSpringSet, scenario: &DamageScenario) -> Result<JointSpringSet> {
    base.validate()?;
    scenario.validate()?;
    let k = base.to_array();
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = k[i] * scenario.multipliers[i];
    }
    Ok(JointSpringSet::from_array(out))
}

/// The 37 simulated scenarios: intact, then six damage levels for each of
/// left/right whole joint, left/right translational springs and left/right
/// rotational spring.
pub fn table3_scenarios() -> Vec<DamageScenario> {
    let groups: [(Side, DamageKind, &[usize]); 6] = [
        (Side::Left, DamageKind::Whole, &[0, 1, 2]),
        (Side::Right, DamageKind::Whole, &[3, 4, 5]),
        (Side::Left, DamageKind::Translational, &[0, 1]),
        (Side::Right, DamageKind::Translational, &[3, 4]),
        (Side::Left, DamageKind::Rotational, &[2]),
        (Side::Right, DamageKind::Rotational, &[5]),
    ];
    let mut out = vec![DamageScenario::intact(0)];
    for (side, kind, springs) in groups {
        for level in DAMAGE_LEVELS {
            let mut multipliers = [1.0; 6];
            for &s in springs {
                multipliers[s] = level;
            }
            out.push(DamageScenario {
                id: out.len() as u32,
                side,
                kind,
                multipliers,
                description: String::new(),
            });
        }
    }
    out
}

/// Eleven bolt-loosening scenarios for the synthetic "laboratory" target
/// domain. Bolts 1-4 sit at the left joint and 5-8 at the right one; each
/// loosened bolt softens the joint rotationally first and translationally
/// in the direction its position resists.
pub fn surrogate_lab_scenarios() -> Vec<DamageScenario> {
    let rows: [(Side, DamageKind, [f64; 6], &str); 11] = [
        (Side::None, DamageKind::Intact, [1.0, 1.0, 1.0, 1.0, 1.0, 1.0], "intact, all bolts tight"),
        (Side::Left, DamageKind::Rotational, [1.0, 1.0, 0.8, 1.0, 1.0, 1.0], "one bolt loosened: 1"),
        (Side::Left, DamageKind::Mixed, [1.0, 0.9, 0.8, 1.0, 1.0, 1.0], "one bolt loosened: 3"),
        (Side::Left, DamageKind::Mixed, [0.9, 1.0, 0.8, 1.0, 1.0, 1.0], "one bolt loosened: 2"),
        (Side::Left, DamageKind::Mixed, [0.9, 1.0, 0.6, 1.0, 1.0, 1.0], "two bolts loosened: 1, 2"),
        (Side::Left, DamageKind::Mixed, [1.0, 0.9, 0.6, 1.0, 1.0, 1.0], "two bolts loosened: 1, 3"),
        (Side::Left, DamageKind::Mixed, [0.9, 0.9, 0.65, 1.0, 1.0, 1.0], "two bolts loosened: 1, 4"),
        (Side::Both, DamageKind::Mixed, [0.9, 1.0, 0.6, 0.9, 1.0, 0.6], "bolts loosened at both ends: 1, 2, 5, 6"),
        (Side::Both, DamageKind::Mixed, [1.0, 0.9, 0.6, 1.0, 0.9, 0.6], "bolts loosened at both ends: 1, 3, 5, 7"),
        (Side::Left, DamageKind::Mixed, [0.8, 0.8, 0.4, 1.0, 1.0, 1.0], "three bolts loosened: 1, 2, 3"),
        (Side::Left, DamageKind::Whole, [0.5, 0.5, 0.5, 1.0, 1.0, 1.0], "four bolts loosened: 1, 2, 3, 4"),
    ];
    rows.into_iter()
        .enumerate()
        .map(|(id, (side, kind, multipliers, description))| DamageScenario {
            id: id as u32,
            side,
            kind,
            multipliers,
            description: description.to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table3_layout() {
        let table = table3_scenarios();
        assert_eq!(table.len(), 37);
        for (i, s) in table.iter().enumerate() {
            assert_eq!(s.id as usize, i);
            s.validate().unwrap();
        }
        assert_eq!(table[6].multipliers, [0.1, 0.1, 0.1, 1.0, 1.0, 1.0]);
        assert_eq!(table[12].multipliers, [1.0, 1.0, 1.0, 0.1, 0.1, 0.1]);
        assert_eq!(table[13].multipliers, [0.98, 0.98, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(table[24].multipliers, [1.0, 1.0, 1.0, 0.1, 0.1, 1.0]);
        assert_eq!(table[25].multipliers, [1.0, 1.0, 0.98, 1.0, 1.0, 1.0]);
        assert_eq!(table[33].multipliers, [1.0, 1.0, 1.0, 1.0, 1.0, 0.9]);
        assert_eq!(table[36].multipliers, [1.0, 1.0, 1.0, 1.0, 1.0, 0.1]);
    }

    #[test]
    fn intact_is_identity() {
        let base = JointSpringSet::default();
        let out = apply_damage(&base, &table3_scenarios()[0]).unwrap();
        assert_eq!(out, base);
    }

    #[test]
    fn left_whole_severe() {
        let base = JointSpringSet::from_array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = apply_damage(&base, &table3_scenarios()[6]).unwrap();
        assert_eq!(out.to_array(), [1.0 * 0.1, 2.0 * 0.1, 3.0 * 0.1, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn right_rotational_only_k6() {
        let base = JointSpringSet::from_array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = apply_damage(&base, &table3_scenarios()[33]).unwrap();
        assert_eq!(out.to_array(), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0 * 0.9]);
    }

    #[test]
    fn rejects_out_of_range_multiplier() {
        let base = JointSpringSet::default();
        for bad in [0.0, -0.5, 1.01, f64::NAN] {
            let mut s = table3_scenarios()[3].clone();
            s.multipliers[1] = bad;
            assert!(matches!(apply_damage(&base, &s), Err(Error::InvalidScenario { id: 3, .. })));
        }
    }

    #[test]
    fn surrogate_table_is_valid() {
        let table = surrogate_lab_scenarios();
        assert_eq!(table.len(), 11);
        for s in &table {
            s.validate().unwrap();
        }
        // four bolts loosened maps to left whole-joint 0.5
        assert_eq!(table[10].multipliers, [0.5, 0.5, 0.5, 1.0, 1.0, 1.0]);
        assert_eq!(table[1].multipliers, [1.0, 1.0, 0.8, 1.0, 1.0, 1.0]);
    }
}
