//! Measurements on trajectories: settled-orbit detection, the orbit catalog,
//! Lyapunov energy statistics, frequency estimates, the quadratic energy fit
//! and the windowed Fourier response amplitude.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::averaging::{predict_radius, predicted_frequency, Order};
use crate::dde::{integrate_dde, DdeError, DenseTrajectory, IntegratorConfig, State};
use crate::models::{dde_rhs, lyapunov_energy, ParamError, SystemParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid window: {0}")]
    Window(String),
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("radius {radius} is beyond the catalog (limit {limit}); extend the catalog")]
    OutOfCatalog { radius: f64, limit: f64 },
    #[error("catalog construction failed at orbit {n}: {reason}")]
    Catalog { n: usize, reason: String },
    #[error("quadratic fit needs at least 4 distinct orbits, got {0}")]
    TooFewPoints(usize),
    #[error("quadratic fit design matrix is rank deficient")]
    RankDeficient,
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Number of trailing turning points that decide whether an orbit settled.
pub const SETTLE_MAXIMA: usize = 10;
/// Largest relative spread of those turning points for a settled orbit.
pub const SETTLE_SPREAD: f64 = 1e-3;
/// Minimum number of upward zero crossings for a frequency estimate.
pub const MIN_CROSSINGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    fn check(&self, traj: &DenseTrajectory) -> Result<(), AnalysisError> {
        if !(self.end > self.start) {
            return Err(AnalysisError::Window(format!(
                "end {} must exceed start {}",
                self.end, self.start
            )));
        }
        if self.start < 0.0 || self.end > traj.t_final() {
            return Err(AnalysisError::Window(format!(
                "[{}, {}] is not inside [0, {}]",
                self.start,
                self.end,
                traj.t_final()
            )));
        }
        Ok(())
    }
}

/// Node samples inside a window, with interpolated endpoints added when the
/// window edges fall between nodes.
fn window_samples(traj: &DenseTrajectory, w: Window) -> Result<Vec<(f64, State)>, AnalysisError> {
    w.check(traj)?;
    let mut out = vec![(w.start, traj.interpolate(w.start)?)];
    out.extend(traj.samples().filter(|(t, _)| *t > w.start && *t < w.end));
    out.push((w.end, traj.interpolate(w.end)?));
    Ok(out)
}

/// Times where x crosses zero going up, refined linearly between nodes.
pub fn upward_crossings(traj: &DenseTrajectory, w: Window) -> Result<Vec<f64>, AnalysisError> {
    let samples = window_samples(traj, w)?;
    Ok(samples
        .windows(2)
        .filter(|p| p[0].1[0] < 0.0 && p[1].1[0] >= 0.0)
        .map(|p| {
            let (t0, x0) = (p[0].0, p[0].1[0]);
            let (t1, x1) = (p[1].0, p[1].1[0]);
            t0 + (-x0) / (x1 - x0) * (t1 - t0)
        })
        .collect())
}

/// Angular frequency from the spacing of upward zero crossings of x.
pub fn estimate_frequency(traj: &DenseTrajectory, w: Window) -> Result<f64, AnalysisError> {
    let crossings = upward_crossings(traj, w)?;
    if crossings.len() < MIN_CROSSINGS {
        return Err(AnalysisError::InsufficientData(format!(
            "{} upward zero crossings in [{}, {}], need {MIN_CROSSINGS}",
            crossings.len(),
            w.start,
            w.end
        )));
    }
    let span = crossings[crossings.len() - 1] - crossings[0];
    Ok(2.0 * PI * (crossings.len() - 1) as f64 / span)
}

/// |x| at every turning point (sign change of y) inside the window, refined
/// by the vertex of the parabola through the three nodes around it.
pub fn turning_points(traj: &DenseTrajectory, w: Window) -> Result<Vec<(f64, f64)>, AnalysisError> {
    w.check(traj)?;
    let nodes: Vec<(f64, State)> = traj.samples().collect();
    let mut out = Vec::new();
    for i in 1..nodes.len().saturating_sub(2) {
        let (t, s) = nodes[i];
        if t < w.start || nodes[i + 1].0 > w.end {
            continue;
        }
        let y0 = s[1];
        let y1 = nodes[i + 1].1[1];
        let changes = (y0 > 0.0 && y1 <= 0.0) || (y0 < 0.0 && y1 >= 0.0);
        if !changes {
            continue;
        }
        let j = if nodes[i + 1].1[0].abs() > s[0].abs() {
            i + 1
        } else {
            i
        };
        let (ta, a) = (nodes[j - 1].0, nodes[j - 1].1[0]);
        let (tb, b) = (nodes[j].0, nodes[j].1[0]);
        let (tc, c) = (nodes[j + 1].0, nodes[j + 1].1[0]);
        out.push(parabola_vertex((ta, a), (tb, b), (tc, c)));
    }
    Ok(out.into_iter().map(|(t, v)| (t, v.abs())).collect())
}

fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> (f64, f64) {
    // Divided differences of the interpolating quadratic.
    let d01 = (p1.1 - p0.1) / (p1.0 - p0.0);
    let d12 = (p2.1 - p1.1) / (p2.0 - p1.0);
    let curv = (d12 - d01) / (p2.0 - p0.0);
    if curv == 0.0 {
        return p1;
    }
    // q(t) = p1.1 + slope (t - p1.0) + curv (t - p1.0)^2, slope at p1:
    let slope = d01 + curv * (p1.0 - p0.0);
    let dt = -slope / (2.0 * curv);
    if dt.abs() > (p2.0 - p0.0) {
        return p1;
    }
    (p1.0 + dt, p1.1 + slope * dt + curv * dt * dt)
}

/// Outcome of looking for a settled orbit in a stretch of trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycleCandidate {
    /// Mean |x| over the last [`SETTLE_MAXIMA`] turning points.
    pub radius: f64,
    pub frequency: f64,
    pub settled: bool,
    /// Relative spread `(max - min) / mean` of those turning points.
    pub spread: f64,
}

/// Looks for a settled orbit after `settle_time`.
pub fn detect_limit_cycle(
    traj: &DenseTrajectory,
    settle_time: f64,
) -> Result<LimitCycleCandidate, AnalysisError> {
    detect_in_window(traj, Window::new(settle_time, traj.t_final()))
}

/// Same as [`detect_limit_cycle`] restricted to a window.
pub fn detect_in_window(
    traj: &DenseTrajectory,
    w: Window,
) -> Result<LimitCycleCandidate, AnalysisError> {
    let maxima = turning_points(traj, w)?;
    if maxima.len() < SETTLE_MAXIMA {
        return Err(AnalysisError::InsufficientData(format!(
            "{} turning points in [{}, {}], need {SETTLE_MAXIMA}",
            maxima.len(),
            w.start,
            w.end
        )));
    }
    let tail: Vec<f64> = maxima[maxima.len() - SETTLE_MAXIMA..]
        .iter()
        .map(|&(_, v)| v)
        .collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let spread = if mean > 0.0 {
        (hi - lo) / mean
    } else {
        f64::INFINITY
    };
    let frequency = estimate_frequency(traj, w)?;
    Ok(LimitCycleCandidate {
        radius: mean,
        frequency,
        settled: spread < SETTLE_SPREAD,
        spread,
    })
}

/// Window shrunk to the first and last upward zero crossing inside it, so it
/// spans a whole number of oscillations.
pub fn snap_to_periods(traj: &DenseTrajectory, w: Window) -> Result<Window, AnalysisError> {
    let crossings = upward_crossings(traj, w)?;
    if crossings.len() < 2 {
        return Err(AnalysisError::Window(format!(
            "[{}, {}] is shorter than one period",
            w.start, w.end
        )));
    }
    Ok(Window::new(crossings[0], crossings[crossings.len() - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyStats {
    pub mean: f64,
    pub std: f64,
    /// The period-snapped window actually averaged over.
    pub window: Window,
}

/// Trapezoidal time average of the Lyapunov energy (and its RMS deviation)
/// over a whole number of periods inside `w`.
pub fn mean_energy(
    traj: &DenseTrajectory,
    p: &SystemParams,
    w: Window,
) -> Result<EnergyStats, AnalysisError> {
    let snapped = snap_to_periods(traj, w)?;
    let samples = window_samples(traj, snapped)?;
    let energies: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(t, s)| (t, lyapunov_energy(s, p)))
        .collect();
    let span = snapped.end - snapped.start;
    let mean = trapezoid(&energies, |e| e) / span;
    let var = trapezoid(&energies, |e| (e - mean) * (e - mean)) / span;
    Ok(EnergyStats {
        mean,
        std: var.sqrt(),
        window: snapped,
    })
}

/// Time average of dE/dt over a whole number of periods inside `w`,
/// integrating the stored derivatives. Zero for an orbit that neither gains
/// nor loses energy on average.
pub fn mean_power(
    traj: &DenseTrajectory,
    p: &SystemParams,
    w: Window,
) -> Result<f64, AnalysisError> {
    let snapped = snap_to_periods(traj, w)?;
    let power = |s: State, d: State| p.m * s[1] * d[1] + (p.k + p.alpha) * s[0] * d[0];
    // Interior nodes carry exact derivatives; window edges use the
    // derivative of the Hermite segment they fall in.
    let edge = |t: f64| -> Result<(f64, f64), AnalysisError> {
        let s = traj.interpolate(t)?;
        let eps = 1e-6;
        let a = traj.interpolate(t - eps)?;
        let b = traj.interpolate((t + eps).min(traj.t_final()))?;
        let dt = (t + eps).min(traj.t_final()) - (t - eps);
        let d = [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt];
        Ok((t, power(s, d)))
    };
    let mut pts = vec![edge(snapped.start)?];
    pts.extend(
        traj.samples_with_derivs()
            .filter(|(t, _, _)| *t > snapped.start && *t < snapped.end)
            .map(|(t, s, d)| (t, power(s, d))),
    );
    pts.push(edge(snapped.end)?);
    Ok(trapezoid(&pts, |v| v) / (snapped.end - snapped.start))
}

fn trapezoid(points: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (f(w[0].1) + f(w[1].1)))
        .sum()
}

/// One measured stable orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub n: usize,
    /// Turning-point amplitude max|x| on the settled orbit.
    pub radius: f64,
    pub mean_energy: f64,
    pub energy_std: f64,
    pub frequency: f64,
    pub period: f64,
}

impl OrbitRecord {
    /// Phase-space radius `sqrt(2 E / m)`, the quantity the averaged radius
    /// predictions describe.
    pub fn energy_radius(&self, m: f64) -> f64 {
        (2.0 * self.mean_energy / m).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitCatalog {
    pub orbits: Vec<OrbitRecord>,
    pub params: SystemParams,
}

impl OrbitCatalog {
    /// Checks contiguous indices from 0 and strictly increasing radii.
    pub fn new(orbits: Vec<OrbitRecord>, params: SystemParams) -> Result<Self, AnalysisError> {
        for (i, o) in orbits.iter().enumerate() {
            if o.n != i {
                return Err(AnalysisError::Catalog {
                    n: i,
                    reason: format!("orbit indices must be contiguous, found {}", o.n),
                });
            }
            if i > 0 && !(o.radius > orbits[i - 1].radius) {
                return Err(AnalysisError::Catalog {
                    n: i,
                    reason: "radii must increase strictly".into(),
                });
            }
        }
        Ok(Self { orbits, params })
    }

    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.orbits.iter().map(|o| o.radius).collect()
    }

    /// Largest radius that still classifies: half a spacing past the last
    /// orbit (1.5 times its radius for a one-orbit catalog).
    pub fn classification_limit(&self) -> Option<f64> {
        match self.orbits.as_slice() {
            [] => None,
            [only] => Some(1.5 * only.radius),
            [.., a, b] => Some(b.radius + 0.5 * (b.radius - a.radius)),
        }
    }

    /// Writes `n,radius,E_mean,E_std,omega` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,radius,E_mean,E_std,omega")?;
        for o in &self.orbits {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                o.n, o.radius, o.mean_energy, o.energy_std, o.frequency
            )?;
        }
        Ok(())
    }
}

/// Index of the catalog orbit with the nearest radius; ties go to the lower
/// index.
pub fn classify_orbit(radius: f64, catalog: &OrbitCatalog) -> Result<usize, AnalysisError> {
    let limit = catalog
        .classification_limit()
        .ok_or(AnalysisError::EmptyCatalog)?;
    if !(radius >= 0.0) || radius > limit {
        return Err(AnalysisError::OutOfCatalog { radius, limit });
    }
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for o in &catalog.orbits {
        let d = (o.radius - radius).abs();
        if d < best_dist {
            best = o.n;
            best_dist = d;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatalogOptions {
    pub settle_time: f64,
    pub t_final: f64,
    pub integrator: IntegratorConfig,
}

impl Default for CatalogOptions {
    fn default() -> Self {
        Self {
            settle_time: 300.0,
            t_final: 600.0,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Constant-history seed for orbit `n`: the turning point whose Lyapunov
/// energy matches the predicted phase-space radius.
pub fn catalog_seed(n: usize, p: &SystemParams) -> f64 {
    predict_radius(n, p, Order::First).r_predicted / predicted_frequency(p, Order::First)
}

/// Integrates the free system from `x0` and measures the orbit it settles on.
pub fn measure_orbit(
    p: &SystemParams,
    n: usize,
    x0: f64,
    opts: &CatalogOptions,
) -> Result<OrbitRecord, AnalysisError> {
    let traj = integrate_dde(
        |t, s, lk| dde_rhs(t, s, lk, p, None),
        x0,
        opts.t_final,
        &opts.integrator,
    )?;
    let cand = detect_limit_cycle(&traj, opts.settle_time)?;
    if !cand.settled {
        return Err(AnalysisError::Catalog {
            n,
            reason: format!(
                "seed x0 = {x0} did not settle (spread {:.2e}); lengthen the run",
                cand.spread
            ),
        });
    }
    let energy = mean_energy(&traj, p, Window::new(opts.settle_time, opts.t_final))?;
    Ok(OrbitRecord {
        n,
        radius: cand.radius,
        mean_energy: energy.mean,
        energy_std: energy.std,
        frequency: cand.frequency,
        period: 2.0 * PI / cand.frequency,
    })
}

/// Relative radius difference under which two seeds count as the same orbit.
const SAME_ORBIT: f64 = 0.01;
const SEED_PERTURBATIONS: [f64; 2] = [1.05, 0.95];

/// Measures orbits `0..=n_max` from seeds at the predicted radii.
///
/// Orbits are integrated in parallel. A seed that lands on an orbit already
/// cataloged (or fails to settle) is retried at +5% and -5%.
pub fn build_catalog(
    p: &SystemParams,
    n_max: usize,
    opts: &CatalogOptions,
) -> Result<OrbitCatalog, AnalysisError> {
    p.validate()?;
    opts.integrator.validate()?;
    let first: Vec<Result<OrbitRecord, AnalysisError>> = (0..=n_max)
        .into_par_iter()
        .map(|n| measure_orbit(p, n, catalog_seed(n, p), opts))
        .collect();
    let mut orbits: Vec<OrbitRecord> = Vec::with_capacity(n_max + 1);
    for (n, result) in first.into_iter().enumerate() {
        let fits = |o: &OrbitRecord, prev: Option<&OrbitRecord>| {
            prev.is_none_or(|q| o.radius > q.radius * (1.0 + SAME_ORBIT))
        };
        let mut outcome = result;
        let mut attempts = SEED_PERTURBATIONS.iter();
        loop {
            if let Ok(o) = &outcome {
                if fits(o, orbits.last()) {
                    break;
                }
            }
            match attempts.next() {
                Some(f) => outcome = measure_orbit(p, n, catalog_seed(n, p) * f, opts),
                None => {
                    return Err(match outcome {
                        Err(e) => e,
                        Ok(o) => AnalysisError::Catalog {
                            n,
                            reason: format!(
                                "radius {} does not exceed orbit {} ({})",
                                o.radius,
                                n - 1,
                                orbits[n - 1].radius
                            ),
                        },
                    })
                }
            }
        }
        orbits.push(outcome.expect("loop exits on success"));
    }
    OrbitCatalog::new(orbits, *p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Least-squares fit of `E_n = a n^2 + b n + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    pub coefficients: Coefficients,
    pub standard_errors: Coefficients,
    pub residual_norm: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares for a quadratic through `(n, e)` pairs, with
/// standard errors from `s^2 (X^T X)^-1`.
pub fn fit_quadratic(ns: &[f64], es: &[f64]) -> Result<QuadraticFit, AnalysisError> {
    assert_eq!(ns.len(), es.len(), "abscissae and values must pair up");
    let m = ns.len();
    if m < 4 {
        return Err(AnalysisError::TooFewPoints(m));
    }
    let x = DMatrix::from_fn(m, 3, |i, j| ns[i].powi(2 - j as i32));
    let y = DVector::from_column_slice(es);
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
        return Err(AnalysisError::RankDeficient);
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(AnalysisError::RankDeficient)?;
    let residuals = &y - &x * &beta;
    let rss = residuals.norm_squared();
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(3, 3))
        .ok_or(AnalysisError::RankDeficient)?;
    let cov = (&r_inv * r_inv.transpose()) * (rss / (m - 3) as f64);
    Ok(QuadraticFit {
        coefficients: Coefficients {
            a: beta[0],
            b: beta[1],
            c: beta[2],
        },
        standard_errors: Coefficients {
            a: cov[(0, 0)].sqrt(),
            b: cov[(1, 1)].sqrt(),
            c: cov[(2, 2)].sqrt(),
        },
        residual_norm: rss.sqrt(),
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
        points: m,
    })
}

/// Quadratic fit of mean energy against orbit index.
pub fn fit_quadratic_spectrum(catalog: &OrbitCatalog) -> Result<QuadraticFit, AnalysisError> {
    let ns: Vec<f64> = catalog.orbits.iter().map(|o| o.n as f64).collect();
    let es: Vec<f64> = catalog.orbits.iter().map(|o| o.mean_energy).collect();
    fit_quadratic(&ns, &es)
}

/// Windowed Fourier amplitudes of x over `n_cycles` periods from `t_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpectrum {
    pub omega_grid: Vec<f64>,
    pub qc: Vec<f64>,
    pub qs: Vec<f64>,
    pub qt: Vec<f64>,
    /// Maximum of `qt`.
    pub q: f64,
    pub t_a: f64,
    pub n_cycles: u32,
    pub period: f64,
}

impl ResponseSpectrum {
    /// Grid frequency where `qt` peaks.
    pub fn peak_omega(&self) -> f64 {
        let i = self
            .qt
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > self.qt[best] { i } else { best });
        self.omega_grid[i]
    }

    /// Writes `omega,Qc,Qs,Qt` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "omega,Qc,Qs,Qt")?;
        for i in 0..self.omega_grid.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.omega_grid[i], self.qc[i], self.qs[i], self.qt[i]
            )?;
        }
        Ok(())
    }
}

/// `count` points spaced evenly over `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// 256 frequencies over `[0.05, 1.2]`.
pub fn default_omega_grid() -> Vec<f64> {
    uniform_grid(0.05, 1.2, 256)
}

/// `Qc = 2/(nT) int x cos(w t)`, `Qs = 2/(nT) int x sin(w t)` over
/// `[t_a, t_a + nT]` by the trapezoidal rule on the trajectory nodes, and
/// `Qt = sqrt(Qc^2 + Qs^2)`.
pub fn response_spectrum(
    traj: &DenseTrajectory,
    t_a: f64,
    n_cycles: u32,
    period: f64,
    omega_grid: &[f64],
) -> Result<ResponseSpectrum, AnalysisError> {
    if n_cycles == 0 || !(period > 0.0) {
        return Err(AnalysisError::Window(format!(
            "window of {n_cycles} cycles of period {period} is empty"
        )));
    }
    let span = f64::from(n_cycles) * period;
    let samples = window_samples(traj, Window::new(t_a, t_a + span))?;
    let norm = 2.0 / span;
    let mut qc = Vec::with_capacity(omega_grid.len());
    let mut qs = Vec::with_capacity(omega_grid.len());
    for &w in omega_grid {
        let mut c = 0.0;
        let mut s = 0.0;
        let mut prev: Option<(f64, f64, f64)> = None;
        for &(t, st) in &samples {
            let (sn, cs) = (w * t).sin_cos();
            let fc = st[0] * cs;
            let fs = st[0] * sn;
            if let Some((tp, pc, ps)) = prev {
                let dt = t - tp;
                c += 0.5 * dt * (pc + fc);
                s += 0.5 * dt * (ps + fs);
            }
            prev = Some((t, fc, fs));
        }
        qc.push(norm * c);
        qs.push(norm * s);
    }
    let qt: Vec<f64> = qc.iter().zip(&qs).map(|(c, s)| c.hypot(*s)).collect();
    let q = qt.iter().copied().fold(0.0, f64::max);
    Ok(ResponseSpectrum {
        omega_grid: omega_grid.to_vec(),
        qc,
        qs,
        qt,
        q,
        t_a,
        n_cycles,
        period,
    })
}
