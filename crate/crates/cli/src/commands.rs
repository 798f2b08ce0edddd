use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use megastable::analysis::{
    build_catalog, classify_orbit, detect_limit_cycle, fit_quadratic_spectrum, AnalysisError,
    CatalogOptions, OrbitCatalog,
};
use megastable::averaging::{predict_radius, write_predictions_csv, Order};
use megastable::dde::integrate_dde;
use megastable::experiments::{
    run_transition, sweep_amplitude, sweep_frequency, sweep_grid, SweepResult,
};
use megastable::models::{dde_rhs, FlatParams};
use megastable::{DenseTrajectory, SystemParams};
use serde_json::{json, Value};

use crate::config::{check_increasing, RunConfig, SweepMode};
use crate::error::CliError;
use crate::plot;

/// Where and how results are written.
pub struct Output {
    pub dir: PathBuf,
    /// Provenance line for CSV comments and JSON; `None` under
    /// `--deterministic`.
    pub stamp: Option<String>,
    pub plot: bool,
}

impl Output {
    fn write(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn csv(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> Result<(), CliError> {
        self.write(name, |w| {
            if let Some(s) = &self.stamp {
                writeln!(w, "# {s}")?;
            }
            f(w)
        })
    }

    fn json(&self, name: &str, mut value: Value) -> Result<(), CliError> {
        if let (Some(s), Value::Object(map)) = (&self.stamp, &mut value) {
            map.insert("generated".into(), Value::String(s.clone()));
        }
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, &value)?;
            writeln!(w)
        })
    }

    fn script(&self, name: &str, text: String) -> Result<(), CliError> {
        if self.plot {
            self.write(name, |w| w.write_all(text.as_bytes()))?;
        }
        Ok(())
    }
}

fn free_run(
    p: &SystemParams,
    x0: f64,
    t_final: f64,
    cfg: &RunConfig,
) -> Result<DenseTrajectory, CliError> {
    let integ = cfg.integrator()?;
    Ok(integrate_dde(
        |t, s, lk| dde_rhs(t, s, lk, p, None),
        x0,
        t_final,
        &integ,
    )?)
}

fn catalog_for(
    p: &SystemParams,
    cfg: &RunConfig,
    default_top: usize,
) -> Result<OrbitCatalog, CliError> {
    let top = cfg.n_max.unwrap_or(default_top);
    Ok(build_catalog(p, top, &cfg.catalog_options()?)?)
}

/// Amplitudes below this fraction of the first predicted orbit count as
/// having decayed to rest.
const REST_FRACTION: f64 = 1e-3;

pub fn simulate(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let p = cfg.system()?;
    let x0 = cfg.x0.unwrap_or(1.0);
    let t_final = cfg.t_final.unwrap_or(600.0);
    let settle = cfg.settle_time.unwrap_or(0.5 * t_final);
    if !(settle > 0.0 && settle < t_final) {
        return Err(CliError::config(format!(
            "settle_time {settle} must lie in (0, t_final = {t_final})"
        )));
    }
    let traj = free_run(&p, x0, t_final, cfg)?;
    out.csv("trajectory.csv", |w| traj.write_csv(w))?;

    let tail = traj
        .samples()
        .filter(|(t, _)| *t >= settle)
        .map(|(_, s)| s[0].abs())
        .fold(0.0, f64::max);
    let rest = REST_FRACTION * predict_radius(0, &p, Order::First).r_predicted;
    let (settled, radius, frequency, orbit, label) = if tail < rest {
        (true, tail, None, None, "no orbit".to_string())
    } else {
        match detect_limit_cycle(&traj, settle) {
            // Too short a run to judge.
            Err(AnalysisError::InsufficientData(_)) => {
                (false, tail, None, None, "unsettled".to_string())
            }
            Err(e) => return Err(e.into()),
            Ok(cand) if !cand.settled => (
                false,
                cand.radius,
                Some(cand.frequency),
                None,
                "unsettled".to_string(),
            ),
            Ok(cand) => {
                // `t_final` and `settle_time` describe this run, not the
                // catalog runs.
                let opts = CatalogOptions {
                    integrator: cfg.integrator()?,
                    ..CatalogOptions::default()
                };
                let (orbit, label) = match build_catalog(&p, cfg.n_max.unwrap_or(10), &opts) {
                    Ok(cat) => match classify_orbit(cand.radius, &cat) {
                        Ok(n) => (Some(n), format!("orbit {n}")),
                        Err(AnalysisError::OutOfCatalog { .. }) => {
                            (None, format!("above orbit {}", cat.len() - 1))
                        }
                        Err(e) => (None, format!("unclassified: {e}")),
                    },
                    Err(e) => (None, format!("unclassified: {e}")),
                };
                (true, cand.radius, Some(cand.frequency), orbit, label)
            }
        }
    };
    println!("{label}: radius {radius:.6}, settled {settled}");
    out.json(
        "summary.json",
        json!({
            "params": FlatParams::new(&p, None),
            "x0": x0,
            "t_final": t_final,
            "step": cfg.integrator()?.step,
            "settled": settled,
            "radius": radius,
            "frequency": frequency,
            "orbit": orbit,
            "classification": label,
            "unconverged_steps": traj.unconverged_steps(),
        }),
    )?;
    out.script("simulate.gp", plot::simulate(&p))
}

pub fn catalog(cfg: &RunConfig, out: &Output, export: bool) -> Result<(), CliError> {
    let p = cfg.system()?;
    let cat = catalog_for(&p, cfg, 10)?;
    out.csv("catalog.csv", |w| cat.write_csv(w))?;
    let predictions: Vec<_> = [Order::First, Order::Second]
        .into_iter()
        .flat_map(|order| (0..cat.len()).map(move |n| predict_radius(n, &p, order)))
        .collect();
    out.csv("predictions.csv", |w| {
        write_predictions_csv(&predictions, w)
    })?;

    if export {
        let opts = cfg.catalog_options()?;
        let mut rows = Vec::new();
        for o in &cat.orbits {
            let traj = free_run(&p, o.radius, opts.t_final, cfg)?;
            let from = opts.t_final - 2.0 * o.period;
            rows.extend(
                traj.samples()
                    .filter(|(t, _)| *t >= from)
                    .map(|(t, s)| (o.n, t, s)),
            );
        }
        out.csv("orbits.csv", |w| {
            writeln!(w, "n,t,x,y")?;
            for (n, t, s) in rows {
                writeln!(w, "{n},{t:.16e},{:.16e},{:.16e}", s[0], s[1])?;
            }
            Ok(())
        })?;
    }

    let orbits: Vec<Value> = cat
        .orbits
        .iter()
        .map(|o| {
            json!({
                "n": o.n,
                "radius": o.radius,
                "energy_radius": o.energy_radius(p.m),
                "E_mean": o.mean_energy,
                "E_std": o.energy_std,
                "omega": o.frequency,
                "period": o.period,
            })
        })
        .collect();
    let fit = match fit_quadratic_spectrum(&cat) {
        Ok(f) => Some(f),
        Err(AnalysisError::TooFewPoints(k)) => {
            eprintln!("fit refused: a quadratic fit of the energy levels needs at least 4 orbits (n_max >= 3), the catalog has {k}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(f) = &fit {
        let (c, se) = (f.coefficients, f.standard_errors);
        println!(
            "{} orbits, E_n = {:.4} n^2 + {:.4} n + {:.4} (R^2 = {:.7})",
            cat.len(),
            c.a,
            c.b,
            c.c,
            f.r_squared
        );
        out.json(
            "fit.json",
            json!({
                "params": FlatParams::new(&p, None),
                "a": c.a, "b": c.b, "c": c.c,
                "se_a": se.a, "se_b": se.b, "se_c": se.c,
                "r_squared": f.r_squared,
                "residual_norm": f.residual_norm,
                "points": f.points,
                "orbits": orbits,
            }),
        )?;
    } else {
        println!("{} orbits", cat.len());
    }
    out.script(
        "catalog.gp",
        plot::catalog(
            &p,
            fit.map(|f| (f.coefficients.a, f.coefficients.b, f.coefficients.c)),
            export,
        ),
    )
}

pub fn transition(cfg: &RunConfig, out: &Output, export: bool) -> Result<(), CliError> {
    let p = cfg.system()?;
    let pulse = cfg.pulse(None, None, None)?;
    let tcfg = cfg.transition(export)?;
    let initial_n = cfg.initial_n.unwrap_or(0);
    let cat = catalog_for(&p, cfg, 50)?;
    let mut r = run_transition(&p, &pulse, initial_n, &cat, &tcfg)?;
    let traj = r.trajectory.take();
    let outcome = match (r.final_n, r.escaped) {
        (Some(n), _) => format!("orbit {n}"),
        (None, true) => format!("above orbit {}", cat.len() - 1),
        (None, false) => "unsettled".to_string(),
    };
    println!(
        "orbit {initial_n} -> {outcome} (radius {:.4}, Q {:.4})",
        r.final_radius, r.q
    );
    let mut value = serde_json::to_value(&r).map_err(|e| CliError::Numerical(e.to_string()))?;
    value["outcome"] = Value::String(outcome);
    value["catalog_top"] = json!(cat.len() - 1);
    out.json("transition.json", value)?;
    if let Some(traj) = traj {
        out.csv("trajectory.csv", |w| traj.write_csv(w))?;
        out.script("transition.gp", plot::transition(&pulse))?;
    }
    Ok(())
}

pub fn sweep(cfg: &RunConfig, out: &Output, mode: SweepMode) -> Result<(), CliError> {
    let p = cfg.system()?;
    let tcfg = cfg.transition(false)?;
    let initial_n = cfg.initial_n.unwrap_or(0);
    let need = |g: &Option<crate::config::Grid>, key: &str| {
        let v = g
            .as_ref()
            .map(|g| g.values())
            .ok_or_else(|| CliError::config(format!("sweep mode needs `{key}`")))?;
        check_increasing(key, &v)?;
        Ok::<_, CliError>(v)
    };
    // Validate everything before the catalog, which is the slow part.
    let plan = match mode {
        SweepMode::Omega => {
            let grid = need(&cfg.omega_values, "Omega_values")?;
            (cfg.pulse(None, Some(grid[0]), None)?, grid, Vec::new())
        }
        SweepMode::Amplitude => {
            let grid = need(&cfg.f0_values, "F0_values")?;
            (cfg.pulse(Some(grid[0]), None, None)?, grid, Vec::new())
        }
        SweepMode::Grid => {
            let grid = need(&cfg.f0_values, "F0_values")?;
            let cycles = cfg
                .n_values
                .as_ref()
                .map(|g| g.values())
                .ok_or_else(|| CliError::config("sweep mode needs `N_values`"))?;
            let first = *cycles
                .first()
                .ok_or_else(|| CliError::config("N_values is empty"))?;
            (
                cfg.pulse(Some(grid[0]), Some(1.0), Some(first))?,
                grid,
                cycles,
            )
        }
    };
    let (template, grid, cycles) = plan;
    let cat = catalog_for(&p, cfg, 50)?;
    let result: SweepResult = match mode {
        SweepMode::Omega => sweep_frequency(&p, &template, &grid, initial_n, &cat, &tcfg, None)?,
        SweepMode::Amplitude => {
            sweep_amplitude(&p, &template, &grid, initial_n, &cat, &tcfg, None)?
        }
        SweepMode::Grid => sweep_grid(&p, &template, &grid, &cycles, initial_n, &cat, &tcfg, None)?,
    };
    out.csv("sweep.csv", |w| result.write_csv(w, None))?;
    if mode == SweepMode::Grid {
        out.csv("matrix.csv", |w| result.write_matrix_csv(w))?;
    }
    let mut fixed = serde_json::to_value(FlatParams::new(&p, Some(&template)))
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    // The swept keys are described by the axes instead.
    if let Value::Object(map) = &mut fixed {
        for axis in &result.axes {
            map.remove(&axis.name);
        }
        if let (SweepMode::Grid, Some(r)) = (mode, result.records.first()) {
            map.insert("Omega".into(), json!(r.pulse.omega));
        }
    }
    out.json(
        "manifest.json",
        json!({
            "mode": format!("{mode:?}").to_lowercase(),
            "axes": result.axes,
            "fixed": fixed,
            "initial_n": initial_n,
            "catalog_top": result.catalog_top,
            "t_a": tcfg.base_t_a,
            "q_cycles": tcfg.n_cycles,
            "step": tcfg.integrator.step,
        }),
    )?;
    let failed: Vec<&str> = result
        .records
        .iter()
        .filter_map(|r| r.error.as_deref())
        .collect();
    let settled = result
        .records
        .iter()
        .filter(|r| r.final_n().is_some())
        .count();
    let escaped = result
        .records
        .iter()
        .filter(|r| r.result.as_ref().is_some_and(|t| t.escaped))
        .count();
    println!(
        "{} points: {settled} settled in the catalog, {escaped} above orbit {}, {} failed",
        result.records.len(),
        result.catalog_top,
        failed.len()
    );
    if let Some(first) = failed.first() {
        eprintln!("first failure: {first}");
    }
    out.script("sweep.gp", plot::sweep(mode))
}
