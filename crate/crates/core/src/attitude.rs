//! Four-point vaccine-attitude distributions.
//!
//! Answer 1 is "will not get vaccinated", 4 is "will get vaccinated".
//! Answers 1 and 2 count as hesitant.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Floor applied to zero entries before temperature scaling.
pub const MODULATION_EPSILON: f64 = 1e-9;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AttitudeError {
    #[error("modulation temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("invalid attitude distribution {0:?}")]
    Invalid([f64; 4]),
    #[error("hesitancy fraction of an empty sample")]
    EmptySample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct AttitudeDistribution([f64; 4]);

impl AttitudeDistribution {
    pub const UNIFORM: AttitudeDistribution = AttitudeDistribution([0.25; 4]);

    pub fn new(p: [f64; 4]) -> Result<Self, AttitudeError> {
        let ok = p.iter().all(|x| x.is_finite() && *x >= 0.0)
            && (p.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE;
        if ok {
            Ok(Self(p))
        } else {
            Err(AttitudeError::Invalid(p))
        }
    }

    pub fn probs(&self) -> &[f64; 4] {
        &self.0
    }

    /// Probability mass on answers 1 and 2.
    pub fn hesitant_mass(&self) -> f64 {
        self.0[0] + self.0[1]
    }

    pub fn mean_answer(&self) -> f64 {
        self.0.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }
}

impl TryFrom<[f64; 4]> for AttitudeDistribution {
    type Error = AttitudeError;
    fn try_from(p: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(p)
    }
}

impl From<AttitudeDistribution> for [f64; 4] {
    fn from(d: AttitudeDistribution) -> Self {
        d.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ModulationTemperature(f64);

impl ModulationTemperature {
    pub fn new(t: f64) -> Result<Self, AttitudeError> {
        if t > 0.0 && t.is_finite() {
            Ok(Self(t))
        } else {
            Err(AttitudeError::NonPositiveTemperature(t))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ModulationTemperature {
    type Error = AttitudeError;
    fn try_from(t: f64) -> Result<Self, Self::Error> {
        Self::new(t)
    }
}

impl From<ModulationTemperature> for f64 {
    fn from(t: ModulationTemperature) -> Self {
        t.0
    }
}

/// What `validate_and_repair` had to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairKind {
    None,
    Renormalized,
    Fallback,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Repaired {
    pub distribution: AttitudeDistribution,
    pub repair: RepairKind,
}

/// Clamps negatives, renormalizes when the sum is within `[0.5, 1.5]`,
/// otherwise falls back to `fallback` or, failing that, the uniform
/// distribution.
pub fn validate_and_repair(raw: &[f64; 4], fallback: Option<&AttitudeDistribution>) -> Repaired {
    if let Ok(d) = AttitudeDistribution::new(*raw) {
        return Repaired {
            distribution: d,
            repair: RepairKind::None,
        };
    }
    let give_up = || match fallback {
        Some(prev) => Repaired {
            distribution: *prev,
            repair: RepairKind::Fallback,
        },
        None => Repaired {
            distribution: AttitudeDistribution::UNIFORM,
            repair: RepairKind::Uniform,
        },
    };
    if raw.iter().any(|x| !x.is_finite()) {
        return give_up();
    }
    let clamped = raw.map(|x| x.max(0.0));
    let sum: f64 = clamped.iter().sum();
    if !(0.5..=1.5).contains(&sum) {
        return give_up();
    }
    let normalized = clamped.map(|x| x / sum);
    match AttitudeDistribution::new(normalized) {
        Ok(d) => Repaired {
            distribution: d,
            repair: RepairKind::Renormalized,
        },
        Err(_) => give_up(),
    }
}

/// Temperature scaling: `p_i^(1/T) / sum_k p_k^(1/T)`, computed in log
/// space. Zero entries are floored at [`MODULATION_EPSILON`].
pub fn modulate(p: &AttitudeDistribution, t: ModulationTemperature) -> AttitudeDistribution {
    let logits = p.0.map(|x| x.max(MODULATION_EPSILON).ln() / t.0);
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights = logits.map(|l| (l - max).exp());
    let total: f64 = weights.iter().sum();
    AttitudeDistribution(weights.map(|w| w / total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttitudeSample {
    pub value: u8,
    pub hesitant: bool,
}

impl AttitudeSample {
    pub fn from_value(value: u8) -> Self {
        debug_assert!((1..=4).contains(&value));
        Self {
            value,
            hesitant: value <= 2,
        }
    }
}

pub fn sample_attitude<R: Rng + ?Sized>(p: &AttitudeDistribution, rng: &mut R) -> AttitudeSample {
    AttitudeSample::from_value(rng::categorical(&p.0, rng) as u8 + 1)
}

pub fn hesitancy_fraction(samples: &[AttitudeSample]) -> Result<f64, AttitudeError> {
    if samples.is_empty() {
        return Err(AttitudeError::EmptySample);
    }
    Ok(samples.iter().filter(|s| s.hesitant).count() as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn dist(p: [f64; 4]) -> AttitudeDistribution {
        AttitudeDistribution::new(p).unwrap()
    }

    fn t(x: f64) -> ModulationTemperature {
        ModulationTemperature::new(x).unwrap()
    }

    #[test]
    fn repair_examples() {
        let r = validate_and_repair(&[0.1, 0.1, 0.35, 0.45], None);
        assert_eq!(r.repair, RepairKind::None);
        assert_eq!(r.distribution.probs(), &[0.1, 0.1, 0.35, 0.45]);

        let r = validate_and_repair(&[0.2; 4], None);
        assert_eq!(r.repair, RepairKind::Renormalized);
        assert_eq!(r.distribution.probs(), &[0.25; 4]);

        let r = validate_and_repair(&[-0.1, 0.4, 0.4, 0.3], None);
        let expected = [0.0, 4.0 / 11.0, 4.0 / 11.0, 3.0 / 11.0];
        for (a, b) in r.distribution.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn repair_falls_back() {
        let prev = dist([0.7, 0.2, 0.1, 0.0]);
        let r = validate_and_repair(&[3.0, 3.0, 3.0, 3.0], Some(&prev));
        assert_eq!(r.repair, RepairKind::Fallback);
        assert_eq!(r.distribution, prev);
        let r = validate_and_repair(&[0.0; 4], None);
        assert_eq!(r.repair, RepairKind::Uniform);
        assert_eq!(r.distribution, AttitudeDistribution::UNIFORM);
        let r = validate_and_repair(&[f64::NAN, 0.5, 0.5, 0.0], None);
        assert_eq!(r.repair, RepairKind::Uniform);
    }

    #[test]
    fn modulate_examples() {
        let p = dist([0.1, 0.1, 0.35, 0.45]);
        for (a, b) in modulate(&p, t(1.0)).probs().iter().zip(p.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
        let u = AttitudeDistribution::UNIFORM;
        for x in [0.1, 0.5, 2.0, 7.0] {
            for v in modulate(&u, t(x)).probs() {
                assert!((v - 0.25).abs() < 1e-12);
            }
        }
        let m = modulate(&p, t(0.5));
        for (a, b) in m.probs().iter().zip([0.0290, 0.0290, 0.3551, 0.5870]) {
            assert!((a - b).abs() < 1e-4, "{m:?}");
        }
    }

    #[test]
    fn temperature_must_be_positive() {
        assert_eq!(ModulationTemperature::new(0.0), Err(AttitudeError::NonPositiveTemperature(0.0)));
        assert!(ModulationTemperature::new(-1.0).is_err());
        assert!(ModulationTemperature::new(f64::NAN).is_err());
    }

    #[test]
    fn zero_entries_stay_negligible() {
        let m = modulate(&dist([0.0, 0.0, 0.3, 0.7]), t(2.0));
        assert!(m.probs()[0] < 1e-4);
        assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_masses_and_frequencies() {
        let mut rng = StreamRng::seed_from_u64(5);
        let s = sample_attitude(&dist([1.0, 0.0, 0.0, 0.0]), &mut rng);
        assert_eq!(s, AttitudeSample { value: 1, hesitant: true });
        let s = sample_attitude(&dist([0.0, 0.0, 0.0, 1.0]), &mut rng);
        assert_eq!(s, AttitudeSample { value: 4, hesitant: false });

        let half = dist([0.5, 0.5, 0.0, 0.0]);
        let draws: Vec<_> = (0..10_000).map(|_| sample_attitude(&half, &mut rng)).collect();
        assert_eq!(hesitancy_fraction(&draws).unwrap(), 1.0);
        let ones = draws.iter().filter(|s| s.value == 1).count() as f64 / 10_000.0;
        assert!((ones - 0.5).abs() <= 0.02, "{ones}");
    }

    #[test]
    fn hesitancy_fraction_examples() {
        let s: Vec<_> = [1, 2, 3, 4].into_iter().map(AttitudeSample::from_value).collect();
        assert_eq!(hesitancy_fraction(&s).unwrap(), 0.5);
        let s = vec![AttitudeSample::from_value(4); 10];
        assert_eq!(hesitancy_fraction(&s).unwrap(), 0.0);
        let s: Vec<_> = (0..100).map(|i| AttitudeSample::from_value(if i < 45 { 1 + (i % 2) as u8 } else { 3 })).collect();
        assert!((hesitancy_fraction(&s).unwrap() - 0.45).abs() < 1e-15);
        assert_eq!(hesitancy_fraction(&[]), Err(AttitudeError::EmptySample));
    }

    #[test]
    fn serde_validates() {
        assert!(serde_json::from_str::<AttitudeDistribution>("[0.5,0.5,0,0]").is_ok());
        assert!(serde_json::from_str::<AttitudeDistribution>("[0.5,0.6,0,0]").is_err());
    }

    fn positive_dist() -> impl Strategy<Value = AttitudeDistribution> {
        prop::array::uniform4(0.01f64..1.0).prop_map(|w| {
            let s: f64 = w.iter().sum();
            AttitudeDistribution::new(w.map(|x| x / s)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn modulation_preserves_order(p in positive_dist(), temp in prop::sample::select(vec![0.1, 0.5, 0.7, 1.0, 1.5, 2.0])) {
            let m = modulate(&p, t(temp));
            prop_assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for i in 0..4 {
                for j in 0..4 {
                    if p.probs()[i] > p.probs()[j] {
                        prop_assert!(m.probs()[i] > m.probs()[j]);
                    }
                }
            }
        }

        #[test]
        fn modulation_composes(p in positive_dist(), t1 in 0.2f64..3.0, t2 in 0.2f64..3.0) {
            let twice = modulate(&modulate(&p, t(t1)), t(t2));
            let once = modulate(&p, t(t1 * t2));
            for (a, b) in twice.probs().iter().zip(once.probs()) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }

        #[test]
        fn high_temperature_flattens(p in positive_dist()) {
            for v in modulate(&p, t(1e6)).probs() {
                prop_assert!((v - 0.25).abs() < 1e-3);
            }
        }

        #[test]
        fn repair_always_valid(raw in prop::array::uniform4(-2.0f64..2.0)) {
            let r = validate_and_repair(&raw, None);
            prop_assert!((r.distribution.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(r.distribution.probs().iter().all(|x| *x >= 0.0));
        }
    }
}
