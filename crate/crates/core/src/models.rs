//! Right-hand sides and forcing laws of the retarded harmonic oscillator.
//!
//! The physical model is
//!
//! ```text
//! m x'' + zeta x' + k x + alpha x(t - tau(x')) = F(t),   tau(v) = tau0 cos^2(lambda v)
//! ```
//!
//! written as a first-order system in `(x, y = x')`. The velocity scale
//! `lambda` is kept explicit everywhere instead of being absorbed into `x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::averaging::radial_rate;
use crate::dde::State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("parameter set has no pulse (F0, Omega and N are required)")]
    MissingPulse,
}

fn check(ok: bool, name: &'static str, value: f64, reason: &'static str) -> Result<(), ParamError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::Invalid {
            name,
            value,
            reason,
        })
    }
}

/// Physical parameters of the oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub m: f64,
    pub zeta: f64,
    pub k: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub tau0: f64,
}

impl Default for SystemParams {
    /// The megastable reference set: `k = 1/10, alpha = 1/4, zeta = 1/10,
    /// lambda = 1/2, tau0 = 4/5`, which gives `eps = 1/10` and `mu = 0`.
    fn default() -> Self {
        Self {
            m: 1.0,
            zeta: 0.1,
            k: 0.1,
            alpha: 0.25,
            lambda: 0.5,
            tau0: 0.8,
        }
    }
}

impl SystemParams {
    /// Reference set with the slightly longer memory used for the driven
    /// experiments.
    pub fn driven() -> Self {
        Self {
            tau0: 0.82,
            ..Self::default()
        }
    }

    pub fn with_tau0(self, tau0: f64) -> Self {
        Self { tau0, ..self }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        check(self.m > 0.0, "m", self.m, "mass must be positive")?;
        check(
            self.tau0 >= 0.0,
            "tau0",
            self.tau0,
            "maximum delay must be non-negative",
        )?;
        check(
            self.lambda > 0.0,
            "lambda",
            self.lambda,
            "velocity scale must be positive",
        )?;
        check(true, "zeta", self.zeta, "must be finite")?;
        check(true, "k", self.k, "must be finite")?;
        check(true, "alpha", self.alpha, "must be finite")?;
        Ok(())
    }

    /// Self-excitation strength `eps = alpha tau0 / 2`.
    pub fn eps(&self) -> f64 {
        self.alpha * self.tau0 / 2.0
    }

    /// Net linear damping `mu = zeta - alpha tau0 / 2`.
    pub fn mu(&self) -> f64 {
        self.zeta - self.alpha * self.tau0 / 2.0
    }

    /// Natural frequency of the undelayed well, `sqrt((k + alpha) / m)`.
    pub fn omega_n(&self) -> f64 {
        ((self.k + self.alpha) / self.m).sqrt()
    }
}

/// Finite-time harmonic pulse `F0 cos(Omega t + phi)` acting on
/// `[t0, t0 + 2 pi N / Omega]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(rename = "Omega")]
    pub omega: f64,
    pub phi: f64,
    pub t0: f64,
    #[serde(rename = "N")]
    pub n_cycles: u32,
}

impl PulseParams {
    pub fn new(f0: f64, omega: f64, n_cycles: u32) -> Self {
        Self {
            f0,
            omega,
            phi: 0.0,
            t0: 300.0,
            n_cycles,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        check(
            self.f0 >= 0.0,
            "F0",
            self.f0,
            "amplitude must be non-negative",
        )?;
        check(
            self.omega > 0.0,
            "Omega",
            self.omega,
            "frequency must be positive",
        )?;
        check(true, "phi", self.phi, "must be finite")?;
        check(true, "t0", self.t0, "must be finite")?;
        check(
            self.n_cycles >= 1,
            "N",
            f64::from(self.n_cycles),
            "at least one driving cycle is required",
        )?;
        Ok(())
    }

    /// Pulse duration `2 pi N / Omega`.
    pub fn delta_t(&self) -> f64 {
        2.0 * PI * f64::from(self.n_cycles) / self.omega
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.delta_t()
    }
}

/// Amplitude/phase form of a phase-space point:
/// `(x, y) = (r sin theta, r cos theta)` with `theta = t + varphi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedState {
    pub r: f64,
    pub theta: f64,
    pub varphi: f64,
}

impl AveragedState {
    pub fn from_phase_point(t: f64, state: State) -> Self {
        let theta = state[0].atan2(state[1]);
        Self {
            r: state[0].hypot(state[1]),
            theta,
            varphi: theta - t,
        }
    }

    pub fn to_phase_point(&self) -> State {
        [self.r * self.theta.sin(), self.r * self.theta.cos()]
    }
}

/// Lag law `tau0 cos^2(lambda v)`; always in `[0, tau0]`.
pub fn delay(v: f64, p: &SystemParams) -> f64 {
    let c = (p.lambda * v).cos();
    p.tau0 * c * c
}

/// Forcing of the pulse at time `t` (closed support).
pub fn pulse_force(t: f64, pulse: &PulseParams) -> f64 {
    if t >= pulse.t0 && t <= pulse.end_time() {
        pulse.f0 * (pulse.omega * t + pulse.phi).cos()
    } else {
        0.0
    }
}

/// Full delayed system: `x' = y`,
/// `m y' = -zeta y - k x - alpha x(t - tau(y)) + F(t)`.
pub fn dde_rhs(
    t: f64,
    state: State,
    lookup: &dyn Fn(f64) -> State,
    p: &SystemParams,
    pulse: Option<&PulseParams>,
) -> State {
    let [x, y] = state;
    let x_delayed = lookup(t - delay(y, p))[0];
    let force = pulse.map_or(0.0, |pl| pulse_force(t, pl));
    [
        y,
        (-p.zeta * y - p.k * x - p.alpha * x_delayed + force) / p.m,
    ]
}

/// First-order Taylor reduction of the delayed term:
/// `m y' = -(zeta - alpha tau0 cos^2(lambda y)) y - (k + alpha) x`.
pub fn low_memory_rhs(_t: f64, state: State, p: &SystemParams) -> State {
    let [x, y] = state;
    let c = (p.lambda * y).cos();
    let damping = p.zeta - p.alpha * p.tau0 * c * c;
    [y, (-damping * y - (p.k + p.alpha) * x) / p.m]
}

/// Averaged radial flow `r' = -mu r + eps (J1(r) - r J2(r))` with `mu` and
/// `eps` derived from `p`.
pub fn averaged_rhs(r: f64, p: &SystemParams) -> f64 {
    radial_rate(r, p.mu(), p.eps())
}

/// Lyapunov energy `m y^2 / 2 + (k + alpha) x^2 / 2`.
pub fn lyapunov_energy(state: State, p: &SystemParams) -> f64 {
    0.5 * p.m * state[1] * state[1] + 0.5 * (p.k + p.alpha) * state[0] * state[0]
}

/// Flat JSON form of a parameter set, keys
/// `m, zeta, k, alpha, lambda, tau0, F0, Omega, phi, t0, N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatParams {
    pub m: f64,
    pub zeta: f64,
    pub k: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub tau0: f64,
    #[serde(rename = "F0", default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    #[serde(rename = "Omega", default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n_cycles: Option<u32>,
}

impl FlatParams {
    pub fn new(system: &SystemParams, pulse: Option<&PulseParams>) -> Self {
        Self {
            m: system.m,
            zeta: system.zeta,
            k: system.k,
            alpha: system.alpha,
            lambda: system.lambda,
            tau0: system.tau0,
            f0: pulse.map(|p| p.f0),
            omega: pulse.map(|p| p.omega),
            phi: pulse.map(|p| p.phi),
            t0: pulse.map(|p| p.t0),
            n_cycles: pulse.map(|p| p.n_cycles),
        }
    }

    pub fn system(&self) -> SystemParams {
        SystemParams {
            m: self.m,
            zeta: self.zeta,
            k: self.k,
            alpha: self.alpha,
            lambda: self.lambda,
            tau0: self.tau0,
        }
    }

    /// The pulse, if `F0`, `Omega` and `N` are all present. `phi` and `t0`
    /// default to 0 and 300.
    pub fn pulse(&self) -> Option<PulseParams> {
        Some(PulseParams {
            f0: self.f0?,
            omega: self.omega?,
            n_cycles: self.n_cycles?,
            phi: self.phi.unwrap_or(0.0),
            t0: self.t0.unwrap_or(300.0),
        })
    }
}
