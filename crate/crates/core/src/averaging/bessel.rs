//! Bessel functions of the first kind, orders 0 to 2, for real arguments.
//!
//! Three regimes:
//! - `|r| <= 8`: ascending power series (largest term stays below ~120, so
//!   cancellation costs at most two digits);
//! - `8 < |r| < 25`: Miller's backward recurrence normalised with
//!   `J0 + 2 (J2 + J4 + ...) = 1`;
//! - `|r| >= 25`: Hankel's asymptotic expansion for J0 and J1, then
//!   `J2 = 2 J1 / r - J0`, which is stable in the forward direction for `r > 2`.

use std::f64::consts::{FRAC_PI_4, PI};

const SERIES_LIMIT: f64 = 8.0;
const HANKEL_LIMIT: f64 = 25.0;

/// `(J0(r), J1(r), J2(r))` for `r >= 0`.
pub(crate) fn j012(r: f64) -> (f64, f64, f64) {
    if r <= SERIES_LIMIT {
        (series(0, r), series(1, r), series(2, r))
    } else if r < HANKEL_LIMIT {
        miller(r)
    } else {
        let (j0, j1) = hankel01(r);
        (j0, j1, 2.0 * j1 / r - j0)
    }
}

fn series(order: u32, r: f64) -> f64 {
    let half = 0.5 * r;
    let q = -half * half;
    let mut term = 1.0;
    for i in 1..=order {
        term *= half / f64::from(i);
    }
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + f64::from(order)));
        sum += term;
        if term.abs() <= 1e-18 * sum.abs().max(1e-300) || k > 200.0 {
            break;
        }
        k += 1.0;
    }
    sum
}

fn miller(r: f64) -> (f64, f64, f64) {
    // Start well above r so that the seed error is negligible by order 2.
    let mut top = (r as usize) + 40;
    if top % 2 == 1 {
        top += 1;
    }
    let mut above = 0.0;
    let mut current = 1e-300;
    let mut norm = 0.0;
    let (mut j0, mut j1, mut j2) = (0.0, 0.0, 0.0);
    let mut n = top;
    while n > 0 {
        // J_{n-1} = (2n / r) J_n - J_{n+1}
        let below = 2.0 * n as f64 / r * current - above;
        above = current;
        current = below;
        n -= 1;
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
            j2 *= 1e-250;
        }
        match n {
            2 => j2 = current,
            1 => j1 = current,
            0 => j0 = current,
            _ => {}
        }
        if n.is_multiple_of(2) && n > 0 {
            norm += 2.0 * current;
        }
    }
    let scale = 1.0 / (norm + j0);
    (j0 * scale, j1 * scale, j2 * scale)
}

/// Hankel's asymptotic series `J_nu = sqrt(2 / (pi r)) (P cos chi - Q sin chi)`
/// with `chi = r - (nu / 2 + 1 / 4) pi`, summed for nu = 0 and nu = 1.
fn hankel01(r: f64) -> (f64, f64) {
    let (s, c) = (r - FRAC_PI_4).sin_cos();
    let amp = (2.0 / (PI * r)).sqrt();
    let (p0, q0) = hankel_pq(0.0, r);
    let (p1, q1) = hankel_pq(4.0, r);
    // chi_1 = chi_0 - pi/2: cos chi_1 = sin chi_0, sin chi_1 = -cos chi_0.
    (amp * (p0 * c - q0 * s), amp * (p1 * s + q1 * c))
}

fn hankel_pq(mu: f64, r: f64) -> (f64, f64) {
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = f64::from(2 * k - 1);
        term *= (mu - odd * odd) / (f64::from(k) * 8.0 * r);
        if term.abs() >= last || term == 0.0 {
            break;
        }
        last = term.abs();
        // Signs alternate in pairs: +q, -p, -q, +p, ...
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}
