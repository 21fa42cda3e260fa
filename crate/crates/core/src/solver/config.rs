use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How the inertia weight evolves over cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InertiaSchedule {
    Fixed {
        w: f64,
    },
    /// Linear decrease from `w_max` at cycle 0 to `w_min` at the last cycle.
    AdaptiveW {
        w_max: f64,
        w_min: f64,
    },
    /// `(w_max − w_min)·t/t_max`, which grows from 0 toward `w_max − w_min`.
    /// Kept for comparison with the decreasing schedule.
    AdaptiveWLiteral {
        w_max: f64,
        w_min: f64,
    },
    /// Clerc constriction: constant `w = 2 / |2 − φ − √(φ² − 4φ)|` applied to
    /// the whole velocity update, with `φ = c1 + c2 > 4`.
    Constriction {
        phi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ConfigError {
    #[error("at least 2 particles are required, got {0}")]
    TooFewParticles(usize),
    #[error("c1 and c2 must be positive and finite, got c1={c1}, c2={c2}")]
    Coefficients { c1: f64, c2: f64 },
    #[error("constriction needs phi > 4, got {0}")]
    ConstrictionPhi(f64),
    #[error("constriction phi {phi} must equal c1 + c2 = {sum}")]
    ConstrictionMismatch { phi: f64, sum: f64 },
    #[error("inertia parameters must be finite")]
    Inertia,
    #[error("success and failure thresholds must be at least 1")]
    Thresholds,
    #[error("at least one cycle is required")]
    NoCycles,
}

/// Inertia weight at cycle `t` of `t_max`.
pub fn inertia_weight(schedule: InertiaSchedule, t: usize, t_max: usize) -> Result<f64, ConfigError> {
    let frac = if t_max == 0 { 0.0 } else { t as f64 / t_max as f64 };
    Ok(match schedule {
        InertiaSchedule::Fixed { w } => w,
        InertiaSchedule::AdaptiveW { w_max, w_min } => w_max - (w_max - w_min) * frac,
        InertiaSchedule::AdaptiveWLiteral { w_max, w_min } => (w_max - w_min) * frac,
        InertiaSchedule::Constriction { phi } => constriction_weight(phi)?,
    })
}

/// The printed constriction formula is negative for every `phi > 4`; its
/// magnitude is the usual Clerc factor (0.7298 at `phi = 4.1`).
pub fn constriction_weight(phi: f64) -> Result<f64, ConfigError> {
    if phi <= 4.0 || !phi.is_finite() {
        return Err(ConfigError::ConstrictionPhi(phi));
    }
    Ok((2.0 / (2.0 - phi - (phi * phi - 4.0 * phi).sqrt())).abs())
}

fn default_particles() -> usize {
    200
}
fn default_c() -> f64 {
    1.49
}
fn default_inertia() -> InertiaSchedule {
    InertiaSchedule::AdaptiveW { w_max: 1.4, w_min: 0.4 }
}
fn default_max_successes() -> u32 {
    15
}
fn default_max_failures() -> u32 {
    5
}
fn default_max_cycles() -> usize {
    500
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmConfig {
    /// Number of particles K.
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_c")]
    pub c1: f64,
    #[serde(default = "default_c")]
    pub c2: f64,
    #[serde(default = "default_inertia")]
    pub inertia: InertiaSchedule,
    /// ρ doubles once the success streak exceeds this.
    #[serde(default = "default_max_successes")]
    pub max_successes: u32,
    /// ρ halves once the failure streak exceeds this.
    #[serde(default = "default_max_failures")]
    pub max_failures: u32,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: usize,
    #[serde(default)]
    pub crossover: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            particles: default_particles(),
            c1: default_c(),
            c2: default_c(),
            inertia: default_inertia(),
            max_successes: default_max_successes(),
            max_failures: default_max_failures(),
            max_cycles: default_max_cycles(),
            crossover: false,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    /// Constriction configuration with `c1 = c2 = phi / 2`.
    pub fn constriction(phi: f64) -> Self {
        SwarmConfig {
            c1: phi / 2.0,
            c2: phi / 2.0,
            inertia: InertiaSchedule::Constriction { phi },
            ..SwarmConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.particles < 2 {
            return Err(ConfigError::TooFewParticles(self.particles));
        }
        let positive = |c: f64| c > 0.0 && c.is_finite();
        if !positive(self.c1) || !positive(self.c2) {
            return Err(ConfigError::Coefficients { c1: self.c1, c2: self.c2 });
        }
        match self.inertia {
            InertiaSchedule::Fixed { w } if !w.is_finite() => return Err(ConfigError::Inertia),
            InertiaSchedule::AdaptiveW { w_max, w_min } | InertiaSchedule::AdaptiveWLiteral { w_max, w_min }
                if !w_max.is_finite() || !w_min.is_finite() =>
            {
                return Err(ConfigError::Inertia)
            }
            InertiaSchedule::Constriction { phi } => {
                constriction_weight(phi)?;
                let sum = self.c1 + self.c2;
                if (phi - sum).abs() > 1e-9 {
                    return Err(ConfigError::ConstrictionMismatch { phi, sum });
                }
            }
            _ => {}
        }
        if self.max_successes < 1 || self.max_failures < 1 {
            return Err(ConfigError::Thresholds);
        }
        if self.max_cycles < 1 {
            return Err(ConfigError::NoCycles);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ADAPTIVE: InertiaSchedule = InertiaSchedule::AdaptiveW { w_max: 1.4, w_min: 0.4 };

    #[test]
    fn adaptive_endpoints_and_midpoint() {
        assert!((inertia_weight(ADAPTIVE, 0, 500).unwrap() - 1.4).abs() < 1e-12);
        assert!((inertia_weight(ADAPTIVE, 500, 500).unwrap() - 0.4).abs() < 1e-12);
        assert!((inertia_weight(ADAPTIVE, 250, 500).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn literal_schedule_increases() {
        let s = InertiaSchedule::AdaptiveWLiteral { w_max: 1.4, w_min: 0.4 };
        assert_eq!(inertia_weight(s, 0, 10).unwrap(), 0.0);
        assert!((inertia_weight(s, 10, 10).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constriction_at_4_1() {
        let w = inertia_weight(InertiaSchedule::Constriction { phi: 4.1 }, 3, 10).unwrap();
        assert!((w - 0.7298).abs() < 1e-4, "{w}");
        assert_eq!(constriction_weight(4.0), Err(ConfigError::ConstrictionPhi(4.0)));
        assert!(constriction_weight(3.0).is_err());
    }

    #[test]
    fn defaults_are_valid() {
        let c = SwarmConfig::default();
        assert_eq!(c.particles, 200);
        assert_eq!((c.c1, c.c2), (1.49, 1.49));
        assert_eq!((c.max_successes, c.max_failures), (15, 5));
        assert!(c.validate().is_ok());
        assert!(SwarmConfig::constriction(4.1).validate().is_ok());
    }

    #[test]
    fn rejects_bad_configs() {
        let base = SwarmConfig::default();
        assert_eq!(SwarmConfig { particles: 0, ..base }.validate(), Err(ConfigError::TooFewParticles(0)));
        assert_eq!(SwarmConfig { particles: 1, ..base }.validate(), Err(ConfigError::TooFewParticles(1)));
        assert!(SwarmConfig { c1: 0.0, ..base }.validate().is_err());
        assert!(SwarmConfig { max_failures: 0, ..base }.validate().is_err());
        assert!(SwarmConfig { max_cycles: 0, ..base }.validate().is_err());
        let mismatch = SwarmConfig { inertia: InertiaSchedule::Constriction { phi: 4.1 }, ..base };
        assert!(matches!(mismatch.validate(), Err(ConfigError::ConstrictionMismatch { .. })));
        assert!(SwarmConfig::constriction(3.9).validate().is_err());
    }

    #[test]
    fn config_file_fills_defaults() {
        let c: SwarmConfig = serde_json::from_str(r#"{"particles": 50, "crossover": true}"#).unwrap();
        assert_eq!(c, SwarmConfig { particles: 50, crossover: true, ..SwarmConfig::default() });
        let c: SwarmConfig =
            serde_json::from_str(r#"{"inertia": {"kind": "constriction", "phi": 4.1}, "c1": 2.05, "c2": 2.05}"#)
                .unwrap();
        assert!(c.validate().is_ok());
        assert!(serde_json::from_str::<SwarmConfig>(r#"{"particle": 5}"#).is_err());
    }
}
