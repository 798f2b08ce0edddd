//! Averaged (Krylov-Bogoliubov) description of the low-memory oscillator.
//!
//! In the averaged coordinates the amplitude obeys
//! `r' = -mu r + eps (J1(r) - r J2(r))`. Its positive zeros are the limit
//! cycles: for `mu = 0` there are infinitely many with alternating stability,
//! for `mu > 0` only finitely many survive. Stable zeros map back to physical
//! orbit radii `pi (3/4 + 2n) / (2 lambda)` asymptotically.

mod bessel;

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::SystemParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AveragingError {
    #[error("Bessel order {0} is not supported (only 0, 1 and 2)")]
    UnsupportedOrder(u32),
    #[error("argument {0} is outside the domain of the asymptotic form (r > 0)")]
    Domain(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Grid spacing of the sign-change scan. Roots are about `pi` apart.
pub const ROOT_SCAN_STEP: f64 = 0.05;
/// Width of the bracketing interval at which bisection stops.
pub const ROOT_TOL: f64 = 1e-12;
/// Half-width of the central difference used for the stability slope.
pub const SLOPE_STEP: f64 = 1e-6;

/// Bessel function of the first kind `J_order(r)` for order 0, 1 or 2.
pub fn bessel_j(order: u32, r: f64) -> Result<f64, AveragingError> {
    if order > 2 {
        return Err(AveragingError::UnsupportedOrder(order));
    }
    let (j0, j1, j2) = bessel::j012(r.abs());
    let value = [j0, j1, j2][order as usize];
    // J_n(-r) = (-1)^n J_n(r)
    Ok(if r < 0.0 && order == 1 { -value } else { value })
}

/// Leading term of the large-argument expansion,
/// `sqrt(2 / (pi r)) cos(r - order pi / 2 - pi / 4)`.
pub fn asymptotic_bessel(order: u32, r: f64) -> Result<f64, AveragingError> {
    if !(r > 0.0) {
        return Err(AveragingError::Domain(r));
    }
    let phase = r - f64::from(order) * PI / 2.0 - PI / 4.0;
    Ok((2.0 / (PI * r)).sqrt() * phase.cos())
}

/// Averaged radial rate `-mu r + eps (J1(r) - r J2(r))`.
pub fn radial_rate(r: f64, mu: f64, eps: f64) -> f64 {
    let (_, j1, j2) = bessel::j012(r.abs());
    -mu * r + eps * (j1 - r * j2)
}

/// A zero of the averaged radial rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialRoot {
    pub r: f64,
    pub stable: bool,
    /// Position in increasing-r order, from 0.
    pub index: usize,
}

fn check_rates(mu: f64, eps: f64) -> Result<(), AveragingError> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(AveragingError::InvalidArgument(format!(
            "mu must be >= 0, got {mu}"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(AveragingError::InvalidArgument(format!(
            "eps must be > 0, got {eps}"
        )));
    }
    Ok(())
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// All zeros of the averaged radial rate in `(0, r_max]`.
///
/// The rate is sampled every [`ROOT_SCAN_STEP`], each sign change is refined
/// by bisection to [`ROOT_TOL`], and a root is stable when the central
/// difference slope there is negative.
pub fn find_roots(mu: f64, eps: f64, r_max: f64) -> Result<Vec<RadialRoot>, AveragingError> {
    check_rates(mu, eps)?;
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(AveragingError::InvalidArgument(format!(
            "r_max must be positive, got {r_max}"
        )));
    }
    let f = |r: f64| radial_rate(r, mu, eps);
    let mut roots = Vec::new();
    let mut push = |r: f64| {
        let slope = (f(r + SLOPE_STEP) - f(r - SLOPE_STEP)) / (2.0 * SLOPE_STEP);
        let index = roots.len();
        roots.push(RadialRoot {
            r,
            stable: slope < 0.0,
            index,
        });
    };
    let steps = (r_max / ROOT_SCAN_STEP).floor() as usize;
    let mut grid: Vec<f64> = (1..=steps).map(|i| i as f64 * ROOT_SCAN_STEP).collect();
    if grid.last().is_none_or(|&g| g < r_max) {
        grid.push(r_max);
    }
    let mut prev: Option<(f64, f64)> = None;
    for &r in &grid {
        let fr = f(r);
        if fr == 0.0 {
            push(r);
        } else if let Some((rp, fp)) = prev {
            if fp != 0.0 && (fp < 0.0) != (fr < 0.0) {
                push(bisect(f, rp, r));
            }
        }
        prev = Some((r, fr));
    }
    Ok(roots)
}

/// Radius beyond which the averaged rate cannot vanish when `mu > 0`.
///
/// Uses `|J1| + r |J2| <= sqrt(2 / (pi r)) (1 + 1/r) (1 + r)` for `r >= 8`,
/// so past the returned radius the damping term dominates.
pub fn root_bound(mu: f64, eps: f64) -> Result<f64, AveragingError> {
    check_rates(mu, eps)?;
    if mu == 0.0 {
        return Err(AveragingError::InvalidArgument(
            "mu = 0 has roots at arbitrarily large radius".into(),
        ));
    }
    let margin = |r: f64| mu * r - eps * (2.0 / (PI * r)).sqrt() * (1.0 + 1.0 / r) * (1.0 + r);
    let mut hi = 8.0;
    while margin(hi) <= 0.0 {
        hi *= 2.0;
    }
    if hi == 8.0 {
        return Ok(hi);
    }
    let mut lo = hi / 2.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if margin(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Number of sign changes of the averaged rate on the scan grid over
/// `(0, root_bound(mu, eps)]`: every zero of the rate, stable or unstable.
pub fn count_sign_change_roots(mu: f64, eps: f64) -> Result<usize, AveragingError> {
    let r_max = root_bound(mu, eps)?;
    let steps = (r_max / ROOT_SCAN_STEP).ceil() as usize;
    let mut count = 0;
    let mut prev = radial_rate(ROOT_SCAN_STEP, mu, eps);
    for i in 2..=steps {
        let cur = radial_rate(i as f64 * ROOT_SCAN_STEP, mu, eps);
        if (prev < 0.0) != (cur < 0.0) && prev != 0.0 {
            count += 1;
        }
        prev = cur;
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitCycleCount {
    Finite(u64),
    /// `mu = 0`: the nested sequence never ends.
    Unbounded,
}

/// Large-radius estimate of the maximum number of limit cycles,
/// `floor(delta / (2 pi) - 3/8)` with `delta = (pi/2)^(1/3) (eps/mu)^(2/3)`,
/// clamped at zero.
pub fn count_limit_cycles(mu: f64, eps: f64) -> Result<LimitCycleCount, AveragingError> {
    check_rates(mu, eps)?;
    if mu == 0.0 {
        return Ok(LimitCycleCount::Unbounded);
    }
    let delta = (PI / 2.0).cbrt() * (eps / mu).powf(2.0 / 3.0);
    let n = (delta / (2.0 * PI) - 3.0 / 8.0).floor();
    Ok(LimitCycleCount::Finite(n.max(0.0) as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    First,
    Second,
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Order::First => "first",
            Order::Second => "second",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPrediction {
    pub n: usize,
    /// Orbit radius in physical coordinates, comparable with `sqrt(2 E / m)`.
    pub r_predicted: f64,
    pub order: Order,
}

/// Mass renormalised by averaging the squared lag over the orbit,
/// `m + 3 alpha tau0^2 / 16`.
pub fn renormalized_mass(p: &SystemParams) -> f64 {
    p.m + 3.0 * p.alpha * p.tau0 * p.tau0 / 16.0
}

/// Predicted radius of the n-th stable orbit, `pi (3/4 + 2n) / (2 lambda)`.
/// The second-order value is scaled by `sqrt(m' / m)` with `m'` the
/// renormalised mass.
pub fn predict_radius(n: usize, p: &SystemParams, order: Order) -> SpectrumPrediction {
    let first = PI * (0.75 + 2.0 * n as f64) / (2.0 * p.lambda);
    let r_predicted = match order {
        Order::First => first,
        Order::Second => first * (renormalized_mass(p) / p.m).sqrt(),
    };
    SpectrumPrediction {
        n,
        r_predicted,
        order,
    }
}

/// Orbit angular frequency: `sqrt((k + alpha) / m)` at first order, with the
/// renormalised mass at second order.
pub fn predicted_frequency(p: &SystemParams, order: Order) -> f64 {
    let mass = match order {
        Order::First => p.m,
        Order::Second => renormalized_mass(p),
    };
    ((p.k + p.alpha) / mass).sqrt()
}

/// Writes `n,r,stable` rows.
pub fn write_roots_csv<W: Write>(roots: &[RadialRoot], mut w: W) -> io::Result<()> {
    writeln!(w, "n,r,stable")?;
    for root in roots {
        writeln!(w, "{},{:.16e},{}", root.index, root.r, root.stable)?;
    }
    Ok(())
}

/// Writes `n,r_predicted,order` rows.
pub fn write_predictions_csv<W: Write>(
    predictions: &[SpectrumPrediction],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "n,r_predicted,order")?;
    for p in predictions {
        writeln!(w, "{},{:.16e},{}", p.n, p.r_predicted, p.order)?;
    }
    Ok(())
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference values computed with 40-digit arbitrary precision.
    const REFERENCE: &[(f64, [f64; 3])] = &[
        (
            0.5,
            [
                0.938_469_807_240_812_9,
                0.242_268_457_674_873_89,
                0.030_604_023_458_682_64,
            ],
        ),
        (
            3.0,
            [
                -0.260_051_954_901_933_44,
                0.339_058_958_525_936_46,
                0.486_091_260_585_891_07,
            ],
        ),
        (
            7.5,
            [
                0.266_339_657_880_378_4,
                0.135_248_427_579_705_5,
                -0.230_273_410_525_790_26,
            ],
        ),
        (
            10.0,
            [
                -0.245_935_764_451_348_33,
                0.043_472_746_168_861_44,
                0.254_630_313_685_120_6,
            ],
        ),
        (
            12.5,
            [
                0.146_884_054_700_421_1,
                -0.165_483_804_614_759_72,
                -0.173_361_463_438_782_66,
            ],
        ),
        (
            30.0,
            [
                -0.086_367_983_581_040_21,
                -0.118_751_062_616_622_94,
                0.078_451_246_073_265_35,
            ],
        ),
        (
            75.0,
            [
                0.034_643_913_805_097_06,
                -0.085_139_995_044_829_1,
                -0.036_914_313_672_959_17,
            ],
        ),
        (
            150.0,
            [
                -0.000_774_090_375_394_291_2,
                -0.065_145_163_657_727_36,
                -0.000_094_511_806_708_740_22,
            ],
        ),
        (
            200.0,
            [
                -0.015_437_439_930_565_092,
                -0.054_304_538_182_378_22,
                0.014_894_394_548_741_31,
            ],
        ),
    ];

    /// Plain ascending series with a fixed 200 terms.
    fn series_oracle(order: i32, r: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = (0.5 * r).powi(order) / (1..=order).map(f64::from).product::<f64>();
        for k in 0..200 {
            sum += term;
            let k = f64::from(k + 1);
            term *= -(0.25 * r * r) / (k * (k + f64::from(order)));
        }
        sum
    }

    #[test]
    fn matches_reference_values() {
        for &(r, expected) in REFERENCE {
            for order in 0..3 {
                let got = bessel_j(order, r).unwrap();
                let want = expected[order as usize];
                assert!(
                    (got - want).abs() < 1e-12,
                    "J{order}({r}) = {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_j(2, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn first_zero_of_j0() {
        let mut a = 2.0;
        let mut b = 3.0;
        while b - a > 1e-15 {
            let m = 0.5 * (a + b);
            if series_oracle(0, m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        assert!((a - 2.404_825_557_695_773).abs() < 1e-12);
        assert!(bessel_j(0, 2.404_825_557_695_773).unwrap().abs() < 1e-10);
    }

    #[test]
    fn recurrence_identity_at_five() {
        let r = 5.0;
        let (j0, j1, j2) = (
            bessel_j(0, r).unwrap(),
            bessel_j(1, r).unwrap(),
            bessel_j(2, r).unwrap(),
        );
        assert!((j2 - (2.0 * j1 / r - j0)).abs() < 1e-12);
    }

    #[test]
    fn regimes_agree_at_boundaries() {
        // Straddling the series/recurrence and recurrence/Hankel switches.
        let reference: &[(f64, [f64; 3])] = &[
            (
                7.999_999,
                [
                    0.171_651_041_773_829_6,
                    0.234_636_204_532_526_46,
                    -0.112_991_983_308_315_68,
                ],
            ),
            (
                8.000_001,
                [
                    0.171_650_572_501_135_9,
                    0.234_636_489_175_054,
                    -0.112_991_457_539_761_76,
                ],
            ),
            (
                24.999_999,
                [
                    0.096_266_657_925_657_9,
                    -0.125_350_350_861_022_6,
                    -0.106_294_686_395_660_84,
                ],
            ),
            (
                25.000_001,
                [
                    0.096_266_908_626_157_06,
                    -0.125_350_148_299_436_1,
                    -0.106_294_920_088_991_49,
                ],
            ),
        ];
        for &(r, expected) in reference {
            for order in 0..3 {
                let got = bessel_j(order, r).unwrap();
                assert!(
                    (got - expected[order as usize]).abs() < 1e-12,
                    "J{order}({r})"
                );
            }
        }
    }

    #[test]
    fn unsupported_order() {
        assert_eq!(bessel_j(3, 1.0), Err(AveragingError::UnsupportedOrder(3)));
    }

    #[test]
    fn asymptotic_form() {
        let r = 10.0 * PI;
        let rel = (asymptotic_bessel(1, r).unwrap() - bessel_j(1, r).unwrap()).abs()
            / bessel_j(1, r).unwrap().abs();
        assert!(rel < 0.02, "{rel}");
        assert!(matches!(
            asymptotic_bessel(0, 0.0),
            Err(AveragingError::Domain(_))
        ));
        // cos(r - 3 pi / 4) = 0
        let r = 3.0 * PI / 4.0 + PI / 2.0;
        assert!(asymptotic_bessel(1, r).unwrap().abs() < 1e-15);
        // Well below r = 1 the leading term is far off.
        let small = asymptotic_bessel(0, 0.1).unwrap();
        assert!((small - bessel_j(0, 0.1).unwrap()).abs() > 0.5);
    }

    #[test]
    fn roots_without_damping() {
        let roots = find_roots(0.0, 0.1, 40.0).unwrap();
        assert!(roots.len() >= 12);
        let mut last_gap = f64::INFINITY;
        for root in &roots {
            let gap = (root.r - PI * (0.75 + root.index as f64)).abs();
            if root.index >= 5 {
                assert!(gap < 0.1, "root {} gap {gap}", root.index);
            }
            if root.index >= 3 {
                assert!(gap < last_gap);
            }
            last_gap = gap;
            assert!(radial_rate(root.r, 0.0, 0.1).abs() < 1e-10);
            // stable at even positions
            assert_eq!(root.stable, root.index % 2 == 0);
        }
        assert!(roots.windows(2).all(|w| w[1].r > w[0].r));
    }

    #[test]
    fn first_root_is_zero_of_j1_derivative() {
        // J1 - r J2 = r J1', whose first zero is 1.8411837813406593.
        let roots = find_roots(0.0, 0.1, 3.0).unwrap();
        assert!((roots[0].r - 1.841_183_781_340_659_3).abs() < 1e-11);
    }

    fn brute_force_count(mu: f64, eps: f64, r_max: f64) -> usize {
        let n = (r_max / 1e-3) as usize;
        let vals: Vec<f64> = (1..=n)
            .map(|i| radial_rate(i as f64 * 1e-3, mu, eps))
            .collect();
        vals.windows(2)
            .filter(|w| (w[0] < 0.0) != (w[1] < 0.0))
            .count()
    }

    #[test]
    fn damping_removes_roots() {
        let undamped = find_roots(0.0, 0.1, 40.0).unwrap().len();
        for mu in [0.1, 0.2, 0.02] {
            let roots = find_roots(mu, 0.1, 40.0).unwrap();
            assert_eq!(roots.len(), brute_force_count(mu, 0.1, 40.0), "mu = {mu}");
            assert!(roots.len() < undamped);
        }
        assert!(find_roots(0.1, 0.1, 40.0).unwrap().is_empty());
    }

    #[test]
    fn root_bound_is_conservative() {
        let (mu, eps) = (0.01, 0.1);
        let bound = root_bound(mu, eps).unwrap();
        let last = find_roots(mu, eps, 2.0 * bound).unwrap().last().unwrap().r;
        assert!(last < bound);
        // The last zero sits close to the envelope crossing (2/pi)(eps/mu)^2.
        assert!(last > 0.8 * 2.0 / PI * (eps / mu).powi(2));
        assert_eq!(
            count_sign_change_roots(mu, eps).unwrap(),
            find_roots(mu, eps, bound).unwrap().len()
        );
    }

    #[test]
    fn sign_change_counts_grow_with_memory() {
        let counts: Vec<usize> = [3e-3, 1e-3, 3e-4]
            .iter()
            .map(|&mu| count_sign_change_roots(mu, 0.1).unwrap())
            .collect();
        assert!(counts.windows(2).all(|w| w[1] > w[0]), "{counts:?}");
    }

    #[test]
    fn limit_cycle_count_closed_form() {
        // delta = (pi/2)^(1/3) 100^(2/3) = 25.044..., delta / 2 pi - 3/8 = 3.61
        assert_eq!(
            count_limit_cycles(0.001, 0.1).unwrap(),
            LimitCycleCount::Finite(3)
        );
        assert_eq!(
            count_limit_cycles(0.0, 0.1).unwrap(),
            LimitCycleCount::Unbounded
        );
        assert_eq!(
            count_limit_cycles(1.0, 0.1).unwrap(),
            LimitCycleCount::Finite(0)
        );
        // The closed form follows (eps/mu)^(2/3): 1000x in eps/mu is 100x in delta.
        let big = (PI / 2.0).cbrt() * 1e4f64.powf(2.0 / 3.0);
        assert_eq!(
            count_limit_cycles(1e-5, 0.1).unwrap(),
            LimitCycleCount::Finite((big / (2.0 * PI) - 0.375).floor() as u64)
        );
    }

    #[test]
    fn radius_predictions() {
        let p = SystemParams::default();
        let r0 = predict_radius(0, &p, Order::First).r_predicted;
        assert!((r0 - 0.75 * PI).abs() < 1e-12);
        let r1 = predict_radius(1, &p, Order::First).r_predicted;
        assert!((r1 - 2.75 * PI).abs() < 1e-12);
        for n in 0..20 {
            let gap = predict_radius(n + 1, &p, Order::First).r_predicted
                - predict_radius(n, &p, Order::First).r_predicted;
            assert!((gap - 2.0 * PI / (2.0 * p.lambda)).abs() < 1e-10);
            assert!(
                predict_radius(n, &p, Order::Second).r_predicted
                    > predict_radius(n, &p, Order::First).r_predicted
            );
        }
        let no_memory = p.with_tau0(0.0);
        assert_eq!(
            predict_radius(3, &no_memory, Order::Second).r_predicted,
            predict_radius(3, &no_memory, Order::First).r_predicted
        );
    }

    #[test]
    fn frequency_predictions() {
        let p = SystemParams::default();
        assert!((predicted_frequency(&p, Order::First) - 0.5916).abs() < 1e-4);
        let plain = SystemParams { alpha: 0.0, ..p };
        assert_eq!(predicted_frequency(&plain, Order::First), 0.1f64.sqrt());
        let no_memory = p.with_tau0(0.0);
        assert_eq!(
            predicted_frequency(&no_memory, Order::Second),
            predicted_frequency(&no_memory, Order::First)
        );
        assert!(predicted_frequency(&p, Order::Second) < predicted_frequency(&p, Order::First));
    }

    #[test]
    fn csv_headers() {
        let roots = find_roots(0.0, 0.1, 6.0).unwrap();
        let mut buf = Vec::new();
        write_roots_csv(&roots, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,r,stable\n0,"));
        assert_eq!(text.lines().count(), roots.len() + 1);

        let preds = [predict_radius(0, &SystemParams::default(), Order::Second)];
        let mut buf = Vec::new();
        write_predictions_csv(&preds, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with(",second\n"));
    }

    proptest! {
        #[test]
        fn three_term_recurrence(r in 0.5f64..100.0) {
            let j0 = bessel_j(0, r).unwrap();
            let j1 = bessel_j(1, r).unwrap();
            let j2 = bessel_j(2, r).unwrap();
            prop_assert!((j2 - (2.0 / r * j1 - j0)).abs() < 1e-10);
        }

        #[test]
        fn odd_and_even_symmetry(r in 0.0f64..60.0) {
            prop_assert_eq!(bessel_j(0, -r).unwrap(), bessel_j(0, r).unwrap());
            prop_assert_eq!(bessel_j(1, -r).unwrap(), -bessel_j(1, r).unwrap());
        }
    }
}
