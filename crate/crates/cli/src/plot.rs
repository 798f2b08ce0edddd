//! gnuplot scripts that redraw each command's figures from its CSV output.
//! Run them from the output directory: `gnuplot catalog.gp`.

use megastable::{PulseParams, SystemParams};

use crate::config::SweepMode;

const PREAMBLE: &str = "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,700\n";

pub fn simulate(p: &SystemParams) -> String {
    format!(
        "{PREAMBLE}\
set output 'simulate_phase.png'
set xlabel 'x'
set ylabel 'y'
set size ratio -1
plot 'trajectory.csv' using 2:3 with lines lw 1 title 'trajectory'
set output 'simulate_energy.png'
set size noratio
set xlabel 't'
set ylabel 'E'
plot 'trajectory.csv' using 1:(0.5*{m}*$3**2 + 0.5*{kk}*$2**2) with lines title 'E(t)'
",
        m = p.m,
        kk = p.k + p.alpha,
    )
}

pub fn catalog(p: &SystemParams, fit: Option<(f64, f64, f64)>, orbits: bool) -> String {
    let mut s = format!(
        "{PREAMBLE}\
set output 'catalog_radius.png'
set xlabel 'n'
set ylabel 'radius'
plot 'catalog.csv' using 1:2 with points pt 7 title 'measured max|x|', \\
     'catalog.csv' using 1:(sqrt(2*$3/{m})) with points pt 6 title 'energy radius', \\
     'predictions.csv' using (strcol(3) eq 'first' ? $1 : NaN):2 with lines title 'first order', \\
     'predictions.csv' using (strcol(3) eq 'second' ? $1 : NaN):2 with lines title 'second order'
set output 'catalog_energy.png'
set ylabel 'E_n'
",
        m = p.m
    );
    match fit {
        Some((a, b, c)) => s.push_str(&format!(
            "plot 'catalog.csv' using 1:3:4 with yerrorbars pt 7 title 'E_n', \\\n     {a}*x**2 + {b}*x + {c} title 'quadratic fit'\n"
        )),
        None => s.push_str("plot 'catalog.csv' using 1:3:4 with yerrorbars pt 7 title 'E_n'\n"),
    }
    if orbits {
        s.push_str(&format!(
            "set output 'catalog_orbits.png'
set xlabel 'x'
set ylabel 'y'
set size ratio -1
plot 'orbits.csv' using 3:4 with lines notitle
set output 'catalog_orbit_energy.png'
set size noratio
set xlabel 't'
set ylabel 'E'
plot 'orbits.csv' using 2:(0.5*{m}*$4**2 + 0.5*{kk}*$3**2) with lines notitle
",
            m = p.m,
            kk = p.k + p.alpha,
        ));
    }
    s
}

pub fn transition(pulse: &PulseParams) -> String {
    format!(
        "{PREAMBLE}\
set output 'transition_series.png'
set object 1 rect from {t0},graph 0 to {t1},graph 1 fc rgb '#dddddd' fs solid behind
set xlabel 't'
set ylabel 'x'
plot 'trajectory.csv' using 1:2 with lines title 'x(t)', \\
     'trajectory.csv' using 1:(($1 >= {t0} && $1 <= {t1}) ? {f0}*cos({w}*$1 + {phi}) : NaN) with lines title 'forcing'
unset object 1
set output 'transition_phase.png'
set xlabel 'x'
set ylabel 'y'
set size ratio -1
plot 'trajectory.csv' using 2:3 with lines title 'trajectory'
",
        t0 = pulse.t0,
        t1 = pulse.end_time(),
        f0 = pulse.f0,
        w = pulse.omega,
        phi = pulse.phi,
    )
}

pub fn sweep(mode: SweepMode) -> String {
    let body = match mode {
        SweepMode::Omega => {
            "set output 'sweep.png'
set xlabel 'Omega'
set ylabel 'Q'
plot 'sweep.csv' using 2:6 with linespoints pt 7 ps 0.5 title 'Q'
"
        }
        SweepMode::Amplitude => {
            "set output 'sweep.png'
set xlabel 'F0'
set ylabel 'Q'
plot 'sweep.csv' using 1:6 with linespoints pt 7 ps 0.5 title 'Q'
"
        }
        SweepMode::Grid => {
            "set output 'sweep.png'
set view map
set xlabel 'F0'
set ylabel 'N'
set cblabel 'Q'
splot 'sweep.csv' using 1:3:6 with points pt 5 ps 1 palette notitle
"
        }
    };
    format!("{PREAMBLE}{body}")
}
