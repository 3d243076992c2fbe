//! Run configuration, named presets, and the resolved constants written
//! into run metadata.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::{d_hat_euclidean, d_hat_weighted};
use crate::error::{Error, Result};
use crate::geometry::ConvexSet;
use crate::moreau::MoreauConfig;
use crate::optimizers::{log_spaced_checkpoints, OptimizerConfig, Variant};
use crate::problems::{make_problem, ProblemInstance, ProblemKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub dim: usize,
    pub n_samples: usize,
    pub set: ConvexSet,
    pub seed: u64,
    /// Weak-convexity constant used for the envelope and the theorem
    /// constants. Must dominate the instance's own constant; defaults to
    /// it, with a floor of 1 so convex instances (rho = 0) still get a
    /// positive envelope parameter.
    #[serde(default)]
    pub rho_analysis: Option<f64>,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemInstance> {
        make_problem(self.kind, self.dim, self.n_samples, self.set.clone(), self.seed)
    }

    pub fn effective_rho(&self, instance: &ProblemInstance) -> Result<f64> {
        match self.rho_analysis {
            Some(r) => {
                if r < instance.rho {
                    return Err(Error::invalid(
                        "rho_analysis must dominate the instance's weak-convexity constant",
                    ));
                }
                Ok(r)
            }
            None => Ok(if instance.rho > 0.0 { instance.rho } else { 1.0 }),
        }
    }
}

/// Inner-solver settings, kept separate from the derived envelope
/// parameter so configs stay declarative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolverSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for InnerSolverSettings {
    fn default() -> Self {
        InnerSolverSettings { max_iters: 5_000, tol: 1e-6, restarts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub optimizer: OptimizerConfig,
    pub horizon: usize,
    /// Empty means a log-spaced default schedule.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub inner: InnerSolverSettings,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.problem.set.dim() != self.problem.dim {
            return Err(Error::DimensionMismatch {
                expected: self.problem.dim,
                got: self.problem.set.dim(),
            });
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        if self.checkpoints.iter().any(|&t| t == 0 || t > self.horizon) {
            return Err(Error::invalid("checkpoints must lie in {1..T}"));
        }
        if !(self.inner.tol > 0.0) || self.inner.max_iters == 0 {
            return Err(Error::invalid("inner solver settings must be positive"));
        }
        Ok(())
    }

    pub fn resolved_checkpoints(&self) -> Vec<usize> {
        if self.checkpoints.is_empty() {
            log_spaced_checkpoints(self.horizon, 30)
        } else {
            let mut cps = self.checkpoints.clone();
            cps.sort_unstable();
            cps.dedup();
            cps
        }
    }

    /// Envelope configuration matching the variant's metric.
    pub fn moreau_config(&self, rho_eff: f64) -> Result<MoreauConfig> {
        let mut cfg = if self.optimizer.variant.is_weighted() {
            MoreauConfig::weighted(rho_eff, self.optimizer.delta)?
        } else {
            MoreauConfig::euclidean(rho_eff)?
        };
        cfg.inner_max_iters = self.inner.max_iters;
        cfg.inner_tol = self.inner.tol;
        cfg.inner_restarts = self.inner.restarts;
        Ok(cfg)
    }
}

/// Constants recorded alongside a run so downstream checks don't have to
/// rebuild the problem instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedConstants {
    pub rho: f64,
    pub rho_effective: f64,
    pub rho_bar: f64,
    pub g_bound: f64,
    pub d_hat: f64,
    pub f_star: f64,
}

pub fn resolve_constants(config: &RunConfig, instance: &ProblemInstance) -> Result<ResolvedConstants> {
    let rho_eff = config.problem.effective_rho(instance)?;
    let delta = config.optimizer.delta;
    let (rho_bar, d_hat) = if config.optimizer.variant.is_weighted() {
        let rho_hat = rho_eff / delta.sqrt();
        let rho_bar = 2.0 * rho_hat;
        (
            rho_bar,
            d_hat_weighted(instance.dim, instance.g_bound, delta, rho_bar, rho_hat)?,
        )
    } else {
        (
            2.0 * rho_eff,
            d_hat_euclidean(instance.dim, instance.g_bound, rho_eff)?,
        )
    };
    Ok(ResolvedConstants {
        rho: instance.rho,
        rho_effective: rho_eff,
        rho_bar,
        g_bound: instance.g_bound,
        d_hat,
        f_star: instance.f_star,
    })
}

pub const PRESET_NAMES: &[&str] = &[
    "robust-reg-small",
    "phase-ret-small",
    "quadratic-small",
    "adagrad-robust-reg",
];

/// Named benchmark configurations used by the verification suite and the
/// documentation examples.
pub fn preset(name: &str) -> Result<RunConfig> {
    let seeds: Vec<u64> = (0..20).collect();
    let cfg = match name {
        "robust-reg-small" => RunConfig {
            problem: ProblemSpec {
                kind: ProblemKind::RobustRegression,
                dim: 10,
                n_samples: 50,
                set: ConvexSet::boxed(vec![-1.0; 10], vec![1.0; 10])?,
                seed: 7,
                rho_analysis: Some(1.0),
            },
            optimizer: OptimizerConfig::lemma_preset(Variant::AmsGrad),
            horizon: 10_000,
            checkpoints: Vec::new(),
            seeds,
            inner: InnerSolverSettings::default(),
            out_dir: None,
        },
        "phase-ret-small" => RunConfig {
            problem: ProblemSpec {
                kind: ProblemKind::PhaseRetrieval,
                dim: 5,
                n_samples: 30,
                set: ConvexSet::ball(vec![0.0; 5], 1.0)?,
                seed: 11,
                rho_analysis: None,
            },
            optimizer: OptimizerConfig {
                alpha: 0.05,
                ..OptimizerConfig::lemma_preset(Variant::AmsGrad)
            },
            horizon: 10_000,
            checkpoints: Vec::new(),
            seeds,
            inner: InnerSolverSettings::default(),
            out_dir: None,
        },
        "quadratic-small" => RunConfig {
            problem: ProblemSpec {
                kind: ProblemKind::ConstrainedQuadratic,
                dim: 5,
                n_samples: 40,
                set: ConvexSet::boxed(vec![-1.0; 5], vec![1.0; 5])?,
                seed: 13,
                rho_analysis: None,
            },
            optimizer: OptimizerConfig::lemma_preset(Variant::AmsGrad),
            horizon: 10_000,
            checkpoints: Vec::new(),
            seeds,
            inner: InnerSolverSettings::default(),
            out_dir: None,
        },
        "adagrad-robust-reg" => RunConfig {
            problem: ProblemSpec {
                kind: ProblemKind::RobustRegression,
                dim: 10,
                n_samples: 50,
                set: ConvexSet::boxed(vec![-1.0; 10], vec![1.0; 10])?,
                seed: 7,
                rho_analysis: Some(1.0),
            },
            optimizer: OptimizerConfig {
                variant: Variant::ScalarAdaGrad,
                alpha: 0.1,
                beta1: 0.9,
                beta2: 0.0,
                delta: 1.0,
            },
            horizon: 10_000,
            checkpoints: Vec::new(),
            seeds,
            inner: InnerSolverSettings::default(),
            out_dir: None,
        },
        other => {
            return Err(Error::invalid(format!(
                "unknown preset '{other}'; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_build() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            let instance = cfg.problem.build().unwrap();
            let constants = resolve_constants(&cfg, &instance).unwrap();
            assert!(constants.rho_bar > 0.0);
            assert!(constants.d_hat > 0.0);
            assert!(constants.g_bound >= cfg.optimizer.delta.sqrt());
        }
        assert!(preset("no-such-preset").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = preset("robust-reg-small").unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = preset("robust-reg-small").unwrap();
        cfg.horizon = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = preset("robust-reg-small").unwrap();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = preset("robust-reg-small").unwrap();
        cfg.checkpoints = vec![cfg.horizon + 1];
        assert!(cfg.validate().is_err());

        // gamma >= 1 must be a validation error, not a crash downstream.
        let mut cfg = preset("robust-reg-small").unwrap();
        cfg.optimizer.beta2 = 0.5;
        cfg.optimizer.beta1 = 0.99;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn effective_rho_rules() {
        let cfg = preset("robust-reg-small").unwrap();
        let instance = cfg.problem.build().unwrap();
        assert_eq!(cfg.problem.effective_rho(&instance).unwrap(), 1.0);

        // Claiming less curvature than the instance has is rejected.
        let quad = preset("quadratic-small").unwrap();
        let qi = quad.problem.build().unwrap();
        let mut spec = quad.problem.clone();
        spec.rho_analysis = Some(qi.rho / 2.0);
        assert!(spec.effective_rho(&qi).is_err());
    }

    #[test]
    fn checkpoint_resolution() {
        let mut cfg = preset("robust-reg-small").unwrap();
        assert!(!cfg.resolved_checkpoints().is_empty());
        cfg.checkpoints = vec![50, 1, 50, 10];
        assert_eq!(cfg.resolved_checkpoints(), vec![1, 10, 50]);
    }
}
