use std::f64::consts::PI;
use std::sync::OnceLock;

use megastable::analysis::{
    build_catalog, classify_orbit, default_omega_grid, detect_limit_cycle, fit_quadratic_spectrum,
    mean_power, response_spectrum, CatalogOptions, OrbitCatalog, Window,
};
use megastable::averaging::{predict_radius, Order};
use megastable::dde::{integrate_dde, DenseTrajectory, IntegratorConfig};
use megastable::models::dde_rhs;
use megastable::SystemParams;

fn catalog() -> &'static OrbitCatalog {
    static CATALOG: OnceLock<OrbitCatalog> = OnceLock::new();
    CATALOG.get_or_init(|| {
        build_catalog(&SystemParams::default(), 10, &CatalogOptions::default()).unwrap()
    })
}

fn free_run(x0: f64, t_final: f64) -> DenseTrajectory {
    let p = SystemParams::default();
    integrate_dde(
        |t, s, lk| dde_rhs(t, s, lk, &p, None),
        x0,
        t_final,
        &IntegratorConfig::default(),
    )
    .unwrap()
}

#[test]
fn radii_increase_and_round_trip() {
    let cat = catalog();
    assert_eq!(cat.len(), 11);
    for w in cat.orbits.windows(2) {
        assert!(w[1].radius > w[0].radius);
    }
    for o in &cat.orbits {
        assert_eq!(classify_orbit(o.radius, cat).unwrap(), o.n);
        assert!((o.period * o.frequency - 2.0 * PI).abs() < 1e-12);
    }
}

#[test]
fn energy_radius_spacing_is_two_pi() {
    let cat = catalog();
    for w in cat.orbits[2..].windows(2) {
        let gap = w[1].energy_radius(1.0) - w[0].energy_radius(1.0);
        assert!((gap - 2.0 * PI).abs() < 0.15 * 2.0 * PI, "gap {gap}");
    }
}

#[test]
fn ground_orbit_near_first_order_radius() {
    let p = SystemParams::default();
    let cat = build_catalog(&p, 0, &CatalogOptions::default()).unwrap();
    let predicted = predict_radius(0, &p, Order::First).r_predicted;
    let r = cat.orbits[0].energy_radius(p.m);
    assert!(
        (r - predicted).abs() < 0.25 * predicted,
        "{r} vs {predicted}"
    );
}

#[test]
fn small_seed_lands_on_ground_orbit() {
    let cand = detect_limit_cycle(&free_run(1.0, 600.0), 300.0).unwrap();
    assert!(cand.settled);
    assert_eq!(classify_orbit(cand.radius, catalog()).unwrap(), 0);
    assert!((cand.radius - catalog().orbits[0].radius).abs() < 1e-3 * cand.radius);
}

#[test]
fn quadratic_energy_spectrum() {
    let cat = catalog();
    let fit = fit_quadratic_spectrum(cat).unwrap();
    let c = fit.coefficients;
    assert!((19.0..=23.0).contains(&c.a), "a = {}", c.a);
    assert!(fit.r_squared > 0.999);
    // Reference fit: a = 21.04, b = 13.95, c = 2.27.
    assert!(
        (c.c - 2.27).abs() < 2.0 * fit.standard_errors.c,
        "c = {}",
        c.c
    );
    let e0 = cat.orbits[0].mean_energy;
    assert!((e0 - c.c).abs() < 3.0 * fit.standard_errors.c, "E0 = {e0}");
    let expected = (21.04 * 25.0 + 13.95 * 5.0 + 2.27) / (21.04 + 13.95 + 2.27);
    let ratio = cat.orbits[5].mean_energy / cat.orbits[1].mean_energy;
    assert!(
        (ratio - expected).abs() < 0.2 * expected,
        "{ratio} vs {expected}"
    );
}

#[test]
fn frequencies_are_nearly_constant() {
    let cat = catalog();
    for o in &cat.orbits {
        assert!(
            (o.frequency - 0.59).abs() < 0.03,
            "orbit {} at {}",
            o.n,
            o.frequency
        );
    }
    for w in cat.orbits.windows(2) {
        assert!((w[1].frequency - w[0].frequency).abs() < 0.02 * w[0].frequency);
    }
}

#[test]
fn orbits_balance_energy_and_response_matches_radius() {
    let p = SystemParams::default();
    for o in &catalog().orbits {
        let traj = free_run(o.radius, 600.0);
        let power = mean_power(&traj, &p, Window::new(300.0, 600.0)).unwrap();
        assert!(power.abs() < 1e-3 * o.mean_energy, "orbit {}: {power}", o.n);
        let spec =
            response_spectrum(&traj, 450.0, 10, 2.0 * PI / 0.59, &default_omega_grid()).unwrap();
        assert!(
            (spec.q - o.radius).abs() < 0.05 * o.radius,
            "orbit {}: Q {}",
            o.n,
            spec.q
        );
        let peak = traj
            .samples()
            .filter(|(t, _)| *t >= 450.0)
            .map(|(_, s)| s[0].abs())
            .fold(0.0, f64::max);
        assert!(spec.qt.iter().all(|&q| (0.0..=2.0 * peak).contains(&q)));
    }
}

#[test]
fn catalog_csv_has_one_row_per_orbit() {
    let mut buf = Vec::new();
    catalog().write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("n,radius,E_mean,E_std,omega\n"));
    assert_eq!(text.lines().count(), 12);
}
