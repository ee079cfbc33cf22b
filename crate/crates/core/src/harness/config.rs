use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binning::{RebinSchedule, ScheduleKind};
use crate::error::{Error, Result};
use crate::inference::PriorParams;
use crate::point_process::{RateFunction, RateShape, DEFAULT_QUAD_TOL};
use crate::policies::{PolicyConfig, PolicyKind, DEFAULT_ALPHA, DEFAULT_EPSILON};
use crate::scalar::Scalar;

/// Prior truncation as a multiple of the true maximal rate.
pub const DEFAULT_LAMBDA_MAX_FACTOR: f64 = 10.0;
pub const DEFAULT_SEED: u64 = 20_190_609;

/// One policy/schedule combination of an experiment. Unset fields fall back
/// to the experiment-wide defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "S: Scalar")]
pub struct ArmConfig<S> {
    pub policy: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<S>,
    /// Prior rate parameter; defaults to `alpha / cost`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<S>,
    /// Prior truncation; defaults to ten times the true maximal rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<S>,
    /// Rate bound inside the UCB radius; defaults to the true maximal rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ucb_lambda_max: Option<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<S>,
}

impl<S: Scalar> ArmConfig<S> {
    pub fn new(policy: PolicyKind) -> Self {
        Self {
            policy,
            label: None,
            schedule: None,
            alpha: None,
            beta: None,
            lambda_max: None,
            ucb_lambda_max: None,
            epsilon: None,
        }
    }

    pub fn with_schedule(mut self, schedule: ScheduleKind) -> Self {
        self.schedule = Some(schedule);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "S: Scalar")]
pub struct ExperimentConfig<S> {
    pub name: String,
    pub rate: RateShape<S>,
    /// Sensing cost per unit length `C`.
    pub cost: S,
    /// Number of sensors `U`.
    pub sensors: usize,
    /// Number of rounds `T`.
    pub horizon: u64,
    /// Initial bin count `K_0`.
    pub k0: usize,
    /// Schedule for arms that do not set their own.
    pub schedule: ScheduleKind,
    pub arms: Vec<ArmConfig<S>>,
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Round whose posterior is written to the snapshot file; defaults to
    /// the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_round: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// An arm with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct ResolvedArm<S> {
    pub label: String,
    pub schedule: RebinSchedule,
    pub policy: PolicyConfig<S>,
}

impl<S: Scalar> ExperimentConfig<S> {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.horizon < 1 {
            return fail("horizon must be at least 1".into());
        }
        if !(self.cost >= S::zero()) || !self.cost.is_finite() {
            return fail(format!("cost must be finite and non-negative, got {}", self.cost));
        }
        if self.sensors < 1 {
            return fail("at least one sensor is required".into());
        }
        if self.k0 < 1 {
            return fail("k0 must be at least 1".into());
        }
        if self.replications < 1 {
            return fail("at least one replication is required".into());
        }
        if self.arms.is_empty() {
            return fail("no arms configured".into());
        }
        if let Some(r) = self.snapshot_round {
            if r < 1 || r > self.horizon {
                return fail(format!("snapshot_round {r} outside 1..={}", self.horizon));
            }
        }
        if let Some(tol) = self.quad_tol {
            if !(tol > S::zero()) {
                return fail(format!("quad_tol must be positive, got {tol}"));
            }
        }
        let mut labels = std::collections::HashSet::new();
        for arm in self.resolve_arms()? {
            if !labels.insert(arm.label.clone()) {
                return fail(format!("duplicate arm label '{}'", arm.label));
            }
        }
        Ok(())
    }

    pub fn rate_function(&self) -> Result<RateFunction<S>> {
        RateFunction::new(self.rate.clone())
    }

    pub fn quadrature_tol(&self) -> S {
        self.quad_tol.unwrap_or(S::lit(DEFAULT_QUAD_TOL))
    }

    pub fn snapshot_at(&self) -> u64 {
        self.snapshot_round.unwrap_or(self.horizon)
    }

    /// Fills in per-arm defaults.
    pub fn resolve_arms(&self) -> Result<Vec<ResolvedArm<S>>> {
        let rate = self.rate_function()?;
        let true_max = rate.max_rate();
        self.arms
            .iter()
            .map(|arm| {
                let schedule_kind = arm.schedule.unwrap_or(self.schedule);
                let label = arm.label.clone().unwrap_or_else(|| {
                    format!("{}-{}", arm.policy.name(), schedule_kind.name())
                });
                let alpha = arm.alpha.unwrap_or(S::lit(DEFAULT_ALPHA));
                let beta = match arm.beta {
                    Some(b) => b,
                    None if self.cost > S::zero() => alpha / self.cost,
                    None => {
                        return Err(Error::Config(format!(
                            "arm '{label}': beta has no default when cost is zero"
                        )))
                    }
                };
                let floor = S::lit(1e-12);
                let lambda_max = arm
                    .lambda_max
                    .unwrap_or(S::lit(DEFAULT_LAMBDA_MAX_FACTOR) * true_max.max(floor));
                let policy = PolicyConfig {
                    kind: arm.policy,
                    prior: PriorParams::new(alpha, beta, lambda_max)
                        .map_err(|e| Error::Config(format!("arm '{label}': {e}")))?,
                    epsilon: arm.epsilon.unwrap_or(S::lit(DEFAULT_EPSILON)),
                    lambda_max_policy: arm.ucb_lambda_max.unwrap_or(true_max.max(floor)),
                };
                policy
                    .validate()
                    .map_err(|e| Error::Config(format!("arm '{label}': {e}")))?;
                Ok(ResolvedArm {
                    label,
                    schedule: RebinSchedule::new(schedule_kind, self.k0)?,
                    policy,
                })
            })
            .collect()
    }

    /// Thompson sampling under linear, square-root and cube-root refinement
    /// on `λ(x) = 1000/21 (x - x²)`, `C = 10`, one sensor, `T = 1024`, `K_0 = 4`.
    pub fn unimodal_reference() -> Self {
        Self {
            name: "unimodal".into(),
            rate: RateShape::reference_unimodal(),
            cost: S::lit(10.0),
            sensors: 1,
            horizon: 1024,
            k0: 4,
            schedule: ScheduleKind::Cuberoot,
            arms: [ScheduleKind::Linear, ScheduleKind::Sqrt, ScheduleKind::Cuberoot]
                .into_iter()
                .map(|s| ArmConfig::new(PolicyKind::Thompson).with_schedule(s))
                .collect(),
            replications: 10,
            seed: DEFAULT_SEED,
            snapshot_round: None,
            quad_tol: None,
            out_dir: None,
        }
    }

    /// All four policies under cube-root refinement on the bimodal rate,
    /// `C = 2`, two sensors, `T = 1000`, `K_0 = 16`.
    pub fn bimodal_reference() -> Self {
        Self {
            name: "bimodal".into(),
            rate: RateShape::Bimodal,
            cost: S::lit(2.0),
            sensors: 2,
            horizon: 1000,
            k0: 16,
            schedule: ScheduleKind::Cuberoot,
            arms: [
                PolicyKind::Thompson,
                PolicyKind::Ucb,
                PolicyKind::Mucb,
                PolicyKind::Epsgreedy,
            ]
            .into_iter()
            .map(ArmConfig::new)
            .collect(),
            replications: 10,
            seed: DEFAULT_SEED,
            snapshot_round: Some(900),
            quad_tol: None,
            out_dir: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_defaults_resolve() {
        let cfg = ExperimentConfig::<f64>::unimodal_reference();
        cfg.validate().unwrap();
        let arms = cfg.resolve_arms().unwrap();
        assert_eq!(arms.len(), 3);
        let ts = &arms[0].policy;
        assert_eq!(ts.prior.alpha, 0.5);
        assert!((ts.prior.beta - 0.05).abs() < 1e-15);
        assert!((ts.prior.lambda_max - 10.0 * 1000.0 / 84.0).abs() < 1e-9);
        assert_eq!(arms[0].label, "thompson-linear");

        let bi = ExperimentConfig::<f64>::bimodal_reference();
        let arms = bi.resolve_arms().unwrap();
        let ucb = arms.iter().find(|a| a.policy.kind == PolicyKind::Ucb).unwrap();
        let max = bi.rate_function().unwrap().max_rate();
        assert_eq!(ucb.policy.lambda_max_policy, max);
        assert_eq!(ucb.policy.epsilon, 0.01);
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let cfg = ExperimentConfig::<f64>::bimodal_reference();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let bad = text.replacen("\"horizon\"", "\"horizonn\"", 1);
        assert!(serde_json::from_str::<ExperimentConfig<f64>>(&bad).is_err());
    }

    #[test]
    fn validation_errors() {
        let mut cfg = ExperimentConfig::<f64>::unimodal_reference();
        cfg.sensors = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::<f64>::unimodal_reference();
        cfg.cost = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::<f64>::unimodal_reference();
        cfg.arms.push(ArmConfig::new(PolicyKind::Thompson).with_schedule(ScheduleKind::Linear));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::<f64>::unimodal_reference();
        cfg.arms[0].epsilon = Some(1.5);
        assert!(cfg.validate().is_err());
    }
}
