use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::loss::{LossWeights, Method};
use crate::net::MlpConfig;
use crate::optim::TrainSchedule;
use crate::problems::{ProblemKind, ProblemSpec};
use crate::sampling::CollocationCounts;
use crate::volterra::QuadratureConfig;

/// One training run. Read from a flat TOML table; every key is optional.
///
/// ```toml
/// problem = "burgers"
/// method = "pitdn"
/// layer_sizes = [2, 10, 10, 10, 1]
/// seed = 1
/// adam_iters = 3000
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub method: Method,
    pub layer_sizes: Vec<usize>,
    /// Seeds the initial weights, the collocation sample and the schedule.
    pub seed: u64,
    pub adam_iters: usize,
    pub adam_lr: f64,
    pub lbfgs_max_iters: usize,
    pub lbfgs_history: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub grad_tol: f64,
    pub lambda_pde: f64,
    pub lambda_bc: f64,
    pub lambda_icp: f64,
    pub m_per_unit_time: u32,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub n_initial: usize,
    pub eval_nx: usize,
    pub eval_nt: usize,
    /// Overrides the advection speed.
    pub c: Option<f64>,
    /// Overrides the Burgers viscosity.
    pub nu: Option<f64>,
    /// Print the loss every this many iterations; 0 is silent.
    pub log_every: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = TrainSchedule::default();
        let w = LossWeights::default();
        let n = CollocationCounts::default();
        ExperimentConfig {
            problem: "advection".into(),
            method: Method::Pitdn,
            layer_sizes: MlpConfig::default().layer_sizes,
            seed: 0,
            adam_iters: s.adam_iters,
            adam_lr: s.adam_lr,
            lbfgs_max_iters: s.lbfgs_max_iters,
            lbfgs_history: s.lbfgs_history,
            wolfe_c1: s.wolfe_c1,
            wolfe_c2: s.wolfe_c2,
            grad_tol: s.grad_tol,
            lambda_pde: w.lambda_pde,
            lambda_bc: w.lambda_bc,
            lambda_icp: w.lambda_icp,
            m_per_unit_time: QuadratureConfig::default().m_per_unit_time,
            n_interior: n.n_interior,
            n_boundary: n.n_boundary,
            n_initial: n.n_initial,
            eval_nx: 256,
            eval_nt: 101,
            c: None,
            nu: None,
            log_every: 0,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn spec(&self) -> Result<ProblemSpec, HarnessError> {
        let mut spec = ProblemSpec::by_name(&self.problem)?;
        match (&mut spec.kind, self.c, self.nu) {
            (ProblemKind::Advection { c }, Some(v), _) => *c = v,
            (ProblemKind::Burgers { nu }, _, Some(v)) => *nu = v,
            (_, None, None) => {}
            _ => return Err(HarnessError::Config(format!("c / nu do not apply to {}", self.problem))),
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn mlp(&self) -> MlpConfig {
        MlpConfig {
            layer_sizes: self.layer_sizes.clone(),
            seed: self.seed,
        }
    }

    pub fn schedule(&self) -> TrainSchedule {
        TrainSchedule {
            adam_iters: self.adam_iters,
            adam_lr: self.adam_lr,
            lbfgs_max_iters: self.lbfgs_max_iters,
            lbfgs_history: self.lbfgs_history,
            wolfe_c1: self.wolfe_c1,
            wolfe_c2: self.wolfe_c2,
            grad_tol: self.grad_tol,
            seed: self.seed,
        }
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_pde: self.lambda_pde,
            lambda_bc: self.lambda_bc,
            lambda_icp: self.lambda_icp,
        }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            m_per_unit_time: self.m_per_unit_time,
        }
    }

    pub fn counts(&self) -> CollocationCounts {
        CollocationCounts {
            n_interior: self.n_interior,
            n_boundary: self.n_boundary,
            n_initial: self.n_initial,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.spec()?;
        self.mlp().validate()?;
        self.schedule().validate()?;
        self.weights()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.quadrature()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.eval_nx < 2 || self.eval_nt < 2 {
            return Err(HarnessError::Config("evaluation grid needs at least 2 x 2 points".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn flat_keys() {
        let c = ExperimentConfig::from_toml_str(
            "problem = \"burgers\"\nmethod = \"pinn\"\nseed = 3\nlayer_sizes = [2, 20, 1]\nnu = 0.02\n",
        )
        .unwrap();
        assert_eq!(c.method, Method::Pinn);
        assert_eq!(c.mlp().seed, 3);
        assert_eq!(c.spec().unwrap().params(), vec![("nu", 0.02)]);
        assert_eq!(c.schedule().adam_iters, 3000);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_toml_str("lr = 1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("problem = \"heat\"").is_err());
        assert!(ExperimentConfig::from_toml_str("problem = \"advection\"\nnu = 0.1").is_err());
        assert!(ExperimentConfig::from_toml_str("layer_sizes = [3, 1]").is_err());
        assert!(ExperimentConfig::from_toml_str("wolfe_c1 = 0.95").is_err());
        assert!(ExperimentConfig::from_toml_str("lambda_bc = -1.0").is_err());
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig {
            problem: "kg".into(),
            out_dir: Some("runs/kg".into()),
            ..Default::default()
        };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }
}
