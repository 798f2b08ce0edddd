//! Flat JSON run configuration. Every key is optional; absent system keys
//! fall back to the megastable reference set.

use std::path::{Path, PathBuf};

use megastable::analysis::{default_omega_grid, uniform_grid, CatalogOptions};
use megastable::experiments::TransitionConfig;
use megastable::{IntegratorConfig, PulseParams, SystemParams};
use serde::Deserialize;

use crate::error::CliError;

/// A real-valued grid: an explicit list or `{min, max, points}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { min: f64, max: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { min, max, points } => uniform_grid(*min, *max, *points),
        }
    }
}

/// Cycle counts: an explicit list or the inclusive range `{min, max}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum CycleGrid {
    List(Vec<u32>),
    Range { min: u32, max: u32 },
}

impl CycleGrid {
    pub fn values(&self) -> Vec<u32> {
        match self {
            CycleGrid::List(v) => v.clone(),
            CycleGrid::Range { min, max } => (*min..=*max).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Omega,
    Amplitude,
    Grid,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free text, ignored.
    pub description: Option<String>,

    pub m: Option<f64>,
    pub zeta: Option<f64>,
    pub k: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub tau0: Option<f64>,

    #[serde(rename = "F0")]
    pub f0: Option<f64>,
    #[serde(rename = "Omega")]
    pub omega: Option<f64>,
    pub phi: Option<f64>,
    pub t0: Option<f64>,
    #[serde(rename = "N")]
    pub n_cycles: Option<u32>,

    pub step: Option<f64>,
    pub max_fixed_point_iters: Option<usize>,
    pub fixed_point_tol: Option<f64>,

    /// Constant history for `simulate`.
    pub x0: Option<f64>,
    pub t_final: Option<f64>,
    pub settle_time: Option<f64>,
    /// Highest catalog orbit.
    pub n_max: Option<usize>,
    pub initial_n: Option<usize>,
    /// Earliest start of the response window.
    pub t_a: Option<f64>,
    /// Periods in the response window.
    pub q_cycles: Option<u32>,
    /// Frequencies at which the response spectrum is evaluated.
    pub q_grid: Option<Grid>,

    pub mode: Option<SweepMode>,
    #[serde(rename = "F0_values")]
    pub f0_values: Option<Grid>,
    #[serde(rename = "Omega_values")]
    pub omega_values: Option<Grid>,
    #[serde(rename = "N_values")]
    pub n_values: Option<CycleGrid>,

    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub export_trajectory: Option<bool>,
    pub plot: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn system(&self) -> Result<SystemParams, CliError> {
        let d = SystemParams::default();
        let p = SystemParams {
            m: self.m.unwrap_or(d.m),
            zeta: self.zeta.unwrap_or(d.zeta),
            k: self.k.unwrap_or(d.k),
            alpha: self.alpha.unwrap_or(d.alpha),
            lambda: self.lambda.unwrap_or(d.lambda),
            tau0: self.tau0.unwrap_or(d.tau0),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, CliError> {
        let d = IntegratorConfig::default();
        let cfg = IntegratorConfig {
            step: self.step.unwrap_or(d.step),
            max_fixed_point_iters: self
                .max_fixed_point_iters
                .unwrap_or(d.max_fixed_point_iters),
            fixed_point_tol: self.fixed_point_tol.unwrap_or(d.fixed_point_tol),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pulse from `F0`, `Omega` and `N`, with any of them replaceable by
    /// the value a sweep fills in.
    pub fn pulse(
        &self,
        f0: Option<f64>,
        omega: Option<f64>,
        n: Option<u32>,
    ) -> Result<PulseParams, CliError> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| CliError::config(format!("missing key `{key}`")))
        };
        let mut pulse = PulseParams::new(
            need(f0.or(self.f0), "F0")?,
            need(omega.or(self.omega), "Omega")?,
            n.or(self.n_cycles)
                .ok_or_else(|| CliError::config("missing key `N`"))?,
        );
        if let Some(phi) = self.phi {
            pulse.phi = phi;
        }
        if let Some(t0) = self.t0 {
            pulse.t0 = t0;
        }
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn catalog_options(&self) -> Result<CatalogOptions, CliError> {
        let d = CatalogOptions::default();
        Ok(CatalogOptions {
            settle_time: self.settle_time.unwrap_or(d.settle_time),
            t_final: self.t_final.unwrap_or(d.t_final),
            integrator: self.integrator()?,
        })
    }

    /// Transition settings. `t_final` here is the catalog run length, so the
    /// transition end time is always derived from the window.
    pub fn transition(&self, keep_trajectory: bool) -> Result<TransitionConfig, CliError> {
        let d = TransitionConfig::default();
        let cfg = TransitionConfig {
            base_t_a: self.t_a.unwrap_or(d.base_t_a),
            n_cycles: self.q_cycles.unwrap_or(d.n_cycles),
            omega_grid: self
                .q_grid
                .as_ref()
                .map_or_else(default_omega_grid, Grid::values),
            integrator: self.integrator()?,
            t_final: None,
            keep_trajectory,
        };
        if cfg.n_cycles == 0 {
            return Err(CliError::config("q_cycles must be at least 1"));
        }
        check_increasing("q_grid", &cfg.omega_grid)?;
        Ok(cfg)
    }
}

pub fn check_increasing(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::config(format!("{name} is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config(format!(
            "{name} must be finite and strictly increasing"
        )));
    }
    Ok(())
}
