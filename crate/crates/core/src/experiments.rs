//! Driven experiments: single pulse transitions between orbits and sweeps of
//! the pulse over frequency, amplitude and (amplitude, length) grids.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    classify_orbit, default_omega_grid, detect_in_window, response_spectrum, AnalysisError,
    OrbitCatalog, Window,
};
use crate::averaging::{predicted_frequency, Order};
use crate::dde::{integrate_dde, DdeError, DenseTrajectory, IntegratorConfig};
use crate::models::{dde_rhs, ParamError, PulseParams, SystemParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(
        "seed mismatch: expected orbit {expected}, pre-pulse motion has radius {radius} ({found})"
    )]
    Seed {
        expected: usize,
        radius: f64,
        found: String,
    },
    #[error("orbit {0} is not in the catalog")]
    UnknownOrbit(usize),
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Time left after the pulse before the response window may open.
pub const POST_PULSE_GAP: f64 = 100.0;
/// Extra integration time after the response window.
pub const TAIL_MARGIN: f64 = 50.0;

/// Settings shared by every run of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionConfig {
    /// Earliest start of the response window; pushed later for long pulses.
    pub base_t_a: f64,
    pub n_cycles: u32,
    pub omega_grid: Vec<f64>,
    pub integrator: IntegratorConfig,
    /// Fixed end time; derived from the window when absent.
    pub t_final: Option<f64>,
    pub keep_trajectory: bool,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        Self {
            base_t_a: 500.0,
            n_cycles: 10,
            omega_grid: default_omega_grid(),
            integrator: IntegratorConfig::default(),
            t_final: None,
            keep_trajectory: false,
        }
    }
}

impl TransitionConfig {
    /// Start of the response window: `max(base_t_a, t0 + dt + 100)`.
    pub fn analysis_time(&self, pulse: &PulseParams) -> f64 {
        self.base_t_a.max(pulse.end_time() + POST_PULSE_GAP)
    }

    /// Analysis period `2 pi / omega_n` at first order.
    pub fn period(p: &SystemParams) -> f64 {
        2.0 * PI / predicted_frequency(p, Order::First)
    }

    /// End time: the configured value or `t_a + n_cycles T + 50`.
    pub fn end_time(&self, p: &SystemParams, pulse: &PulseParams) -> f64 {
        self.t_final.unwrap_or_else(|| {
            self.analysis_time(pulse) + f64::from(self.n_cycles) * Self::period(p) + TAIL_MARGIN
        })
    }
}

/// Outcome of one pulse applied to a seeded orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionResult {
    pub params: SystemParams,
    pub pulse: PulseParams,
    pub initial_n: usize,
    /// Catalog orbit reached; `None` when unsettled or escaped.
    pub final_n: Option<usize>,
    /// Mean turning-point amplitude over the response window.
    pub final_radius: f64,
    /// The motion ended above the top catalog orbit.
    pub escaped: bool,
    pub settled: bool,
    #[serde(rename = "Q")]
    pub q: f64,
    pub peak_omega: f64,
    pub t_a: f64,
    pub t_final: f64,
    #[serde(skip)]
    pub trajectory: Option<DenseTrajectory>,
}

/// Seeds the system at rest on the turning point of `initial_n`, applies the
/// pulse and classifies where the motion ends up.
pub fn run_transition(
    p: &SystemParams,
    pulse: &PulseParams,
    initial_n: usize,
    catalog: &OrbitCatalog,
    cfg: &TransitionConfig,
) -> Result<TransitionResult, ExperimentError> {
    p.validate()?;
    pulse.validate()?;
    let seed = catalog
        .orbits
        .get(initial_n)
        .ok_or(ExperimentError::UnknownOrbit(initial_n))?
        .radius;
    let t_a = cfg.analysis_time(pulse);
    let period = TransitionConfig::period(p);
    let t_final = cfg.end_time(p, pulse);
    let window_end = t_a + f64::from(cfg.n_cycles) * period;
    if t_final < window_end {
        return Err(ExperimentError::Invalid(format!(
            "t_final {t_final} ends before the response window [{t_a}, {window_end}]"
        )));
    }
    let traj = integrate_dde(
        |t, s, lk| dde_rhs(t, s, lk, p, Some(pulse)),
        seed,
        t_final,
        &cfg.integrator,
    )?;

    check_seed(&traj, pulse.t0, initial_n, catalog)?;

    let cand = detect_in_window(&traj, Window::new(t_a, t_final))?;
    let (final_n, escaped) = match classify_orbit(cand.radius, catalog) {
        Ok(n) => (cand.settled.then_some(n), false),
        Err(AnalysisError::OutOfCatalog { .. }) => (None, true),
        Err(e) => return Err(e.into()),
    };
    let spectrum = response_spectrum(&traj, t_a, cfg.n_cycles, period, &cfg.omega_grid)?;
    Ok(TransitionResult {
        params: *p,
        pulse: *pulse,
        initial_n,
        final_n,
        final_radius: cand.radius,
        escaped,
        settled: cand.settled,
        q: spectrum.q,
        peak_omega: spectrum.peak_omega(),
        t_a,
        t_final,
        trajectory: cfg.keep_trajectory.then_some(traj),
    })
}

/// The second half of the pre-pulse interval must sit on the seeded orbit.
fn check_seed(
    traj: &DenseTrajectory,
    t0: f64,
    initial_n: usize,
    catalog: &OrbitCatalog,
) -> Result<(), ExperimentError> {
    let radius = detect_in_window(traj, Window::new(0.5 * t0, t0))?.radius;
    match classify_orbit(radius, catalog) {
        Ok(n) if n == initial_n => Ok(()),
        other => Err(ExperimentError::Seed {
            expected: initial_n,
            radius,
            found: match other {
                Ok(n) => format!("orbit {n}"),
                Err(e) => e.to_string(),
            },
        }),
    }
}

/// A named grid axis of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// One grid point of a sweep; failures are kept rather than aborting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub pulse: PulseParams,
    pub initial_n: usize,
    pub result: Option<TransitionResult>,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn final_n(&self) -> Option<usize> {
        self.result.as_ref().and_then(|r| r.final_n)
    }

    pub fn q(&self) -> Option<f64> {
        self.result.as_ref().map(|r| r.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: Vec<Axis>,
    /// Row-major over `axes` (the last axis varies fastest).
    pub records: Vec<SweepRecord>,
    pub params: SystemParams,
    pub catalog_top: usize,
}

impl SweepResult {
    /// Writes `F0,Omega,N,initial_n,final_n,Q,settled` rows. An escaped run
    /// shows `final_n` as `>top`; unsettled or failed runs leave it empty.
    pub fn write_csv<W: Write>(&self, mut w: W, header: Option<&str>) -> io::Result<()> {
        if let Some(h) = header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "F0,Omega,N,initial_n,final_n,Q,settled")?;
        for r in &self.records {
            let (final_n, q, settled) = match &r.result {
                Some(t) => (
                    match (t.final_n, t.escaped) {
                        (Some(n), _) => n.to_string(),
                        (None, true) => format!(">{}", self.catalog_top),
                        (None, false) => String::new(),
                    },
                    format!("{:.16e}", t.q),
                    t.settled,
                ),
                None => (String::new(), String::new(), false),
            };
            writeln!(
                w,
                "{:.16e},{:.16e},{},{},{},{},{}",
                r.pulse.f0, r.pulse.omega, r.pulse.n_cycles, r.initial_n, final_n, q, settled
            )?;
        }
        Ok(())
    }

    /// Q as a dense matrix for a two-axis sweep: one row per value of the
    /// second axis, one column per value of the first. Failed points are
    /// left empty.
    pub fn write_matrix_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let [cols, rows] = match self.axes.as_slice() {
            [a, b] => [a, b],
            _ => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidInput,
                    "matrix export needs exactly two axes",
                ))
            }
        };
        write!(w, "{}\\{}", rows.name, cols.name)?;
        for c in &cols.values {
            write!(w, ",{c:.16e}")?;
        }
        writeln!(w)?;
        for (i, r) in rows.values.iter().enumerate() {
            write!(w, "{r}")?;
            for j in 0..cols.values.len() {
                match self.records[j * rows.values.len() + i].q() {
                    Some(q) => write!(w, ",{q:.16e}")?,
                    None => write!(w, ",")?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn run_points(
    p: &SystemParams,
    pulses: Vec<PulseParams>,
    initial_n: usize,
    catalog: &OrbitCatalog,
    cfg: &TransitionConfig,
    jobs: Option<usize>,
) -> Result<Vec<SweepRecord>, ExperimentError> {
    let mut point_cfg = cfg.clone();
    point_cfg.keep_trajectory = false;
    let work = || {
        pulses
            .par_iter()
            .map(
                |pulse| match run_transition(p, pulse, initial_n, catalog, &point_cfg) {
                    Ok(r) => SweepRecord {
                        pulse: *pulse,
                        initial_n,
                        result: Some(r),
                        error: None,
                    },
                    Err(e) => SweepRecord {
                        pulse: *pulse,
                        initial_n,
                        result: None,
                        error: Some(e.to_string()),
                    },
                },
            )
            .collect()
    };
    match jobs {
        None => Ok(work()),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map(|pool| pool.install(work))
            .map_err(|e| ExperimentError::Pool(e.to_string())),
    }
}

fn check_grid(name: &str, grid: &[f64], increasing: bool) -> Result<(), ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::Invalid(format!("{name} grid is empty")));
    }
    if increasing && grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ExperimentError::Invalid(format!(
            "{name} grid must increase strictly"
        )));
    }
    Ok(())
}

fn sweep(
    p: &SystemParams,
    axes: Vec<Axis>,
    pulses: Vec<PulseParams>,
    initial_n: usize,
    catalog: &OrbitCatalog,
    cfg: &TransitionConfig,
    jobs: Option<usize>,
) -> Result<SweepResult, ExperimentError> {
    if catalog.is_empty() {
        return Err(AnalysisError::EmptyCatalog.into());
    }
    let records = run_points(p, pulses, initial_n, catalog, cfg, jobs)?;
    Ok(SweepResult {
        axes,
        records,
        params: *p,
        catalog_top: catalog.len() - 1,
    })
}

/// Runs the template pulse at every driving frequency in `omega_grid`.
pub fn sweep_frequency(
    p: &SystemParams,
    template: &PulseParams,
    omega_grid: &[f64],
    initial_n: usize,
    catalog: &OrbitCatalog,
    cfg: &TransitionConfig,
    jobs: Option<usize>,
) -> Result<SweepResult, ExperimentError> {
    check_grid("Omega", omega_grid, false)?;
    let pulses = omega_grid
        .iter()
        .map(|&omega| PulseParams { omega, ..*template })
        .collect();
    let axes = vec![Axis {
        name: "Omega".into(),
        values: omega_grid.to_vec(),
    }];
    sweep(p, axes, pulses, initial_n, catalog, cfg, jobs)
}

/// Runs the template pulse at every amplitude in the increasing `f0_grid`.
pub fn sweep_amplitude(
    p: &SystemParams,
    template: &PulseParams,
    f0_grid: &[f64],
    initial_n: usize,
    catalog: &OrbitCatalog,
    cfg: &TransitionConfig,
    jobs: Option<usize>,
) -> Result<SweepResult, ExperimentError> {
    check_grid("F0", f0_grid, true)?;
    let pulses = f0_grid
        .iter()
        .map(|&f0| PulseParams { f0, ..*template })
        .collect();
    let axes = vec![Axis {
        name: "F0".into(),
        values: f0_grid.to_vec(),
    }];
    sweep(p, axes, pulses, initial_n, catalog, cfg, jobs)
}

/// Full factorial over amplitudes and pulse lengths at `Omega = omega_n`.
/// Records are ordered by F0, then N.
#[allow(clippy::too_many_arguments)]
pub fn sweep_grid(
    p: &SystemParams,
    template: &PulseParams,
    f0_grid: &[f64],
    n_grid: &[u32],
    initial_n: usize,
    catalog: &OrbitCatalog,
    cfg: &TransitionConfig,
    jobs: Option<usize>,
) -> Result<SweepResult, ExperimentError> {
    check_grid("F0", f0_grid, true)?;
    let n_values: Vec<f64> = n_grid.iter().map(|&n| f64::from(n)).collect();
    check_grid("N", &n_values, true)?;
    let omega = predicted_frequency(p, Order::First);
    let pulses = f0_grid
        .iter()
        .flat_map(|&f0| {
            n_grid.iter().map(move |&n_cycles| PulseParams {
                f0,
                n_cycles,
                omega,
                ..*template
            })
        })
        .collect();
    let axes = vec![
        Axis {
            name: "F0".into(),
            values: f0_grid.to_vec(),
        },
        Axis {
            name: "N".into(),
            values: n_values,
        },
    ];
    sweep(p, axes, pulses, initial_n, catalog, cfg, jobs)
}

/// Pulse start and response window used for grid maps.
pub const GRID_T0: f64 = 200.0;
pub const GRID_T_A: f64 = 400.0;

/// Maximal runs of consecutive records sharing the same settled `final_n`,
/// as `(final_n, first index, length)`.
pub fn plateaus(records: &[SweepRecord]) -> Vec<(usize, usize, usize)> {
    let mut out: Vec<(usize, usize, usize)> = Vec::new();
    let mut prev: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        let cur = r.final_n();
        match (cur, prev, out.last_mut()) {
            (Some(n), Some(m), Some(run)) if n == m => run.2 += 1,
            (Some(n), _, _) => out.push((n, i, 1)),
            (None, _, _) => {}
        }
        prev = cur;
    }
    out
}
