use serde::{Deserialize, Serialize};
use std::path::Path;

use super::read_file;
use crate::correct::{CorrectorLossConfig, CorrectorParams, GammaParams, GateParams, TrainConfig};
use crate::error::{Error, Result};
use crate::predict::{Charbonnier, HsConfig, PredictorConfig};
use crate::sim::{Preset, SimConfig, SolverOptions};

/// Settings of a full pipeline run, stored as TOML with one table per
/// stage. Missing keys take their defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub predictor: PredictorSection,
    pub corrector: CorrectorSection,
    pub simulation: SimulationSection,
    pub dataset: DatasetSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorSection {
    /// `variational` or `hs`.
    pub method: String,
    pub lambda_s: f64,
    pub lambda_d: f64,
    pub gamma: f64,
    pub eps: f64,
    pub levels: usize,
    pub iterations: usize,
    pub step: f64,
    pub ring: usize,
    pub presmooth: f64,
    pub hs_alpha: f64,
    pub hs_warps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectorSection {
    pub order: usize,
    pub gate_size: usize,
    pub epochs: usize,
    pub step: f64,
    pub lambda_d: f64,
    /// Viscosity of the tentative step; the simulation value when absent.
    pub nu: Option<f64>,
    /// Frame interval of the tentative step.
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub preset: String,
    pub height: usize,
    pub width: usize,
    pub nu: f64,
    pub rho: f64,
    pub dt: f64,
    pub steps: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub particles: usize,
    /// Particle image radius in pixels.
    pub sigma: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            predictor: PredictorSection::default(),
            corrector: CorrectorSection::default(),
            simulation: SimulationSection::default(),
            dataset: DatasetSection::default(),
        }
    }
}

impl Default for PredictorSection {
    fn default() -> Self {
        let p = PredictorConfig::default();
        let hs = HsConfig::default();
        Self {
            method: "variational".into(),
            lambda_s: p.lambda_s,
            lambda_d: p.lambda_d,
            gamma: p.penalty.gamma,
            eps: p.penalty.eps,
            levels: p.levels,
            iterations: p.iterations,
            step: p.step,
            ring: p.ring,
            presmooth: p.presmooth,
            hs_alpha: hs.alpha,
            hs_warps: hs.warps,
        }
    }
}

impl Default for CorrectorSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            order: CorrectorParams::DEFAULT_ORDER,
            gate_size: CorrectorParams::DEFAULT_GATE_SIZE,
            epochs: t.epochs,
            step: t.step,
            lambda_d: t.loss.lambda_d,
            nu: None,
            dt: 1.0,
        }
    }
}

impl Default for SimulationSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            preset: "decaying-turbulence".into(),
            height: 64,
            width: 64,
            nu: s.nu,
            rho: s.rho,
            dt: s.dt,
            steps: 20,
            tolerance: s.solver.tolerance,
            max_iterations: s.solver.max_iterations,
        }
    }
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            particles: 1200,
            sigma: 1.2,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::Config(format!("{}: not UTF-8: {e}", path.display())))?;
        Self::from_toml_str(text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plain data always serializes")
    }

    /// Checks every section against the invariants of the stage it feeds.
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.predictor.method.as_str(), "variational" | "hs") {
            return Err(Error::Config(format!(
                "predictor.method must be \"variational\" or \"hs\", got \"{}\"",
                self.predictor.method
            )));
        }
        self.predictor_config().validate()?;
        if !(self.predictor.hs_alpha > 0.0) || self.predictor.hs_warps == 0 {
            return Err(Error::Config("predictor.hs_alpha must be positive and hs_warps at least 1".into()));
        }
        self.corrector_params().validate()?;
        if !(self.corrector.step >= 0.0) || !(self.corrector.lambda_d >= 0.0) {
            return Err(Error::Config("corrector.step and corrector.lambda_d must be non-negative".into()));
        }
        Preset::from_name(&self.simulation.preset)?;
        self.sim_config().validate()?;
        if self.simulation.height < 8 || self.simulation.width < 8 {
            return Err(Error::Config("simulation grid must be at least 8x8".into()));
        }
        if !(self.dataset.sigma > 0.0) {
            return Err(Error::Config(format!("dataset.sigma must be positive, got {}", self.dataset.sigma)));
        }
        Ok(())
    }

    pub fn predictor_config(&self) -> PredictorConfig {
        let p = &self.predictor;
        PredictorConfig {
            lambda_s: p.lambda_s,
            lambda_d: p.lambda_d,
            penalty: Charbonnier {
                gamma: p.gamma,
                eps: p.eps,
            },
            levels: p.levels,
            iterations: p.iterations,
            step: p.step,
            ring: p.ring,
            presmooth: p.presmooth,
            ..PredictorConfig::default()
        }
    }

    pub fn hs_config(&self) -> HsConfig {
        HsConfig {
            alpha: self.predictor.hs_alpha,
            warps: self.predictor.hs_warps,
            ..HsConfig::default()
        }
    }

    /// Untrained corrector with the configured shapes.
    pub fn corrector_params(&self) -> CorrectorParams {
        let c = &self.corrector;
        CorrectorParams {
            gate: GateParams::zeros(c.gate_size),
            gamma: GammaParams::zeros(c.order),
            nu: c.nu.unwrap_or(self.simulation.nu),
            dt: c.dt,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.corrector.epochs,
            step: self.corrector.step,
            loss: CorrectorLossConfig {
                lambda_d: self.corrector.lambda_d,
                penalty: self.predictor_config().penalty,
                ring: self.predictor.ring,
            },
            ..TrainConfig::default()
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            nu: s.nu,
            rho: s.rho,
            dt: s.dt,
            solver: SolverOptions {
                tolerance: s.tolerance,
                max_iterations: s.max_iterations,
            },
            ..SimConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn partial_and_invalid_files() {
        let cfg = RunConfig::from_toml_str("seed = 9\n[predictor]\nlambda_s = 0.1\n[corrector]\nnu = 0.02\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.predictor_config().lambda_s, 0.1);
        assert_eq!(cfg.corrector_params().nu, 0.02);
        assert!(matches!(RunConfig::from_toml_str("[predictor]\nlamda_s = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[extra]\n"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml_str("[predictor]\ngamma = 2.0").is_err());
        assert!(RunConfig::from_toml_str("[simulation]\npreset = \"vortex\"").is_err());
        assert!(RunConfig::from_toml_str("[corrector]\ngate_size = 2").is_err());
        assert!(RunConfig::from_toml_str("[predictor]\nmethod = \"pwc\"").is_err());
    }
}
