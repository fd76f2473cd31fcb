//! Run configuration shared by the command-line driver.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::completion::SolverConfig;
use crate::error::{Error, Result};
use crate::pipeline::{PipelineParams, SupportChoice};

/// Every knob of a factorization run. Fields mirror the command-line flags;
/// unset grid fields fall back to the input file's grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Grid half-width used when synthesizing densities.
    pub window_t: Option<f64>,
    /// Sample count used when synthesizing densities; must be a power of two.
    pub samples: Option<usize>,
    /// Spectral cells per completion step; more than one entry sweeps until
    /// the product residual stops improving.
    pub bins: Vec<usize>,
    /// Fixed spectral support half-width; unset selects it from the tail
    /// energy target.
    pub support_b: Option<f64>,
    /// Spectral energy fraction allowed beyond an automatically chosen
    /// support.
    pub tail_energy: f64,
    pub tol_unitary: f64,
    pub tol_det: f64,
    pub tol_analytic: f64,
    /// Warning threshold on the per-step product defect of the leading
    /// block.
    pub tol_tri: f64,
    /// Relative floor under the corner constant coefficient.
    pub eps_c0: f64,
    /// Upper bound on the row-relative spectral amplitude outside the
    /// support.
    pub leak_tol: f64,
    /// Row-relative co-analytic amplitude below which a step is skipped.
    pub zeta_skip: f64,
    pub seed: u64,
    pub max_iters: usize,
    pub restarts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        let pipeline = PipelineParams::default();
        RunConfig {
            window_t: None,
            samples: None,
            bins: vec![4, 8, 16],
            support_b: None,
            tail_energy: 1e-8,
            tol_unitary: solver.tol_unitary,
            tol_det: solver.tol_det,
            tol_analytic: solver.tol_analytic,
            tol_tri: 1e-6,
            eps_c0: solver.eps_c0_rel,
            leak_tol: pipeline.leak_tol,
            zeta_skip: pipeline.zeta_skip,
            seed: solver.seed,
            max_iters: solver.max_iters,
            restarts: solver.restarts,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: RunConfig = serde_json::from_slice(&std::fs::read(path)?)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let tolerances = [
            ("tail_energy", self.tail_energy),
            ("tol_unitary", self.tol_unitary),
            ("tol_det", self.tol_det),
            ("tol_analytic", self.tol_analytic),
            ("tol_tri", self.tol_tri),
            ("eps_c0", self.eps_c0),
            ("leak_tol", self.leak_tol),
            ("zeta_skip", self.zeta_skip),
        ];
        for (name, value) in tolerances {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Validation(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.bins.is_empty() || self.bins.contains(&0) {
            return Err(Error::Validation(
                "bins must list at least one positive cell count".into(),
            ));
        }
        if let Some(n) = self.samples {
            if !n.is_power_of_two() {
                return Err(Error::Validation(format!(
                    "samples must be a power of two, got {n}"
                )));
            }
        }
        if let Some(t) = self.window_t {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Validation(format!(
                    "window_t must be positive and finite, got {t}"
                )));
            }
        }
        if let Some(b) = self.support_b {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::Validation(format!(
                    "support_b must be positive and finite, got {b}"
                )));
            }
        }
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::Validation(
                "max_iters and restarts must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Pipeline parameters for one bin count of the sweep.
    pub fn pipeline_params(&self, bins: usize) -> PipelineParams {
        PipelineParams {
            bins,
            support: match self.support_b {
                Some(b) => SupportChoice::Fixed(b),
                None => SupportChoice::Auto {
                    tail_energy: self.tail_energy,
                },
            },
            leak_tol: self.leak_tol,
            zeta_skip: self.zeta_skip,
            solver: SolverConfig {
                tol_unitary: self.tol_unitary,
                tol_det: self.tol_det,
                tol_analytic: self.tol_analytic,
                eps_c0_rel: self.eps_c0,
                max_iters: self.max_iters,
                restarts: self.restarts,
                seed: self.seed,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_map_to_pipeline_params() {
        let config = RunConfig::default();
        config.validate().unwrap();
        let params = config.pipeline_params(8);
        assert_eq!(params.bins, 8);
        assert!(matches!(params.support, SupportChoice::Auto { .. }));
        assert_eq!(params.solver.seed, config.seed);
    }

    #[test]
    fn bad_fields_are_rejected() {
        let mut c = RunConfig::default();
        c.tol_unitary = 0.0;
        assert!(c.validate().is_err());

        let mut c = RunConfig::default();
        c.bins = vec![];
        assert!(c.validate().is_err());

        let mut c = RunConfig::default();
        c.samples = Some(1000);
        assert!(c.validate().is_err());
    }

    #[test]
    fn load_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let mut config = RunConfig::default();
        config.seed = 7;
        config.bins = vec![8];
        config.support_b = Some(12.0);
        std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
        let back = RunConfig::load(&path).unwrap();
        assert_eq!(back.seed, 7);
        assert_eq!(back.bins, vec![8]);
        let params = back.pipeline_params(back.bins[0]);
        assert!(matches!(params.support, SupportChoice::Fixed(b) if b == 12.0));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"sede": 3}"#).unwrap();
        assert!(RunConfig::load(&path).is_err());
    }
}
