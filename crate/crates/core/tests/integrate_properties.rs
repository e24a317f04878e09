mod common;

use common::*;
use geomech::catalog::{action_angle, NAMES};
use geomech::integrate::*;
use geomech::poisson::{bracket_eval, bracket_from_gradients, involution_check, BivectorField};
use rand::Rng;

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

#[test]
fn convergence_orders() {
    for m in Method::ALL {
        let order = convergence_order(m, 0.05);
        assert!((order - m.order() as f64).abs() <= 0.2, "{m}: measured {order:.3}");
    }
}

#[test]
fn verlet_reversibility_over_many_steps() {
    let sys = specimen("pendulum", &[]).system;
    let x0 = [1.2, -0.4];
    let n = 1000;
    let fwd = integrate(&sys, &x0, &StepperConfig::new(Method::Verlet, 0.01), n, &[]).unwrap();
    let mut x = fwd.last_state().unwrap().to_vec();
    for _ in 0..n {
        x = verlet_step(&sys, &x, -0.01).unwrap();
    }
    assert!(max_abs_diff(&x, &x0) <= n as f64 * 1e-12);
}

/// `|E(t) − E(0)| <= C h²` for the harmonic oscillator from `(1, 0)`; the
/// measured maximum is `h²/8`.
const VERLET_HARMONIC_C: f64 = 0.13;

#[test]
fn verlet_energy_error_is_order_h_squared() {
    let sys = specimen("harmonic", &[]).system;
    for (h, steps) in [(0.01, 1_000_000), (0.05, 200_000)] {
        let traj = integrate(&sys, &[1.0, 0.0], &StepperConfig::new(Method::Verlet, h), steps, &names(&["H"])).unwrap();
        let drift = invariant_drift(&traj, "H").unwrap();
        assert!(drift.max_abs_drift <= VERLET_HARMONIC_C * h * h, "h = {h}: {:e}", drift.max_abs_drift);
        assert!(drift.max_abs_drift >= 0.5 * VERLET_HARMONIC_C * h * h);
    }
}

/// Drift over the whole run against drift over the first 100 steps. A floor
/// of `1e-12 · max(1, |H₀|)` stands in for the early drift when the method
/// conserves `H` to round-off.
fn bounded_ratio(traj: &Trajectory) -> f64 {
    let d = invariant_drift(traj, "H").unwrap();
    let h0 = traj.trace("H").unwrap()[0].abs().max(1.0);
    let early = d.series[..=100].iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-12 * h0);
    d.max_abs_drift / early
}

#[test]
fn energy_error_is_not_secular() {
    let starts: [(&str, Vec<f64>); 7] = [
        ("pendulum", vec![1.0, 0.0]),
        ("harmonic", vec![1.0, 0.0]),
        ("euler_top", vec![1.0, 1.0, 1.0]),
        ("lotka_volterra", vec![1.0, 1.5]),
        ("spherical_pendulum", vec![0.0, 1.0, 0.3, 0.0]),
        ("r3_hyperboloid", vec![0.5, -0.3, 0.8]),
        ("r3_cylinder", vec![1.0, 0.0, 0.5]),
    ];
    assert_eq!(starts.len(), NAMES.len());
    for (name, x0) in starts {
        let s = specimen(name, &[]);
        let mut methods = vec![Method::ImplicitMidpoint];
        if s.separable {
            methods.push(Method::Verlet);
        }
        for m in methods {
            let traj = integrate(&s.system, &x0, &StepperConfig::new(m, 0.01), 100_000, &names(&["H"])).unwrap();
            let ratio = bounded_ratio(&traj);
            assert!(ratio < 100.0, "{name} {m}: ratio {ratio:.1}");
        }
    }
}

#[test]
fn midpoint_preserves_quadratic_casimirs() {
    let tol = 1e-12;
    for (name, x0) in [("euler_top", vec![1.0, 1.0, 1.0]), ("r3_hyperboloid", vec![0.2, 0.1, -0.3])] {
        let s = specimen(name, &[]);
        let cfg = StepperConfig::new(Method::ImplicitMidpoint, 0.01).with_tol(tol);
        let traj = integrate(&s.system, &x0, &cfg, 2000, &names(&["C"])).unwrap();
        let c = traj.trace("C").unwrap();
        let scale = c[0].abs().max(1.0);
        assert!(invariant_drift(&traj, "C").unwrap().max_abs_drift <= 10.0 * tol * scale, "{name}");
    }
}

#[test]
fn hyperboloid_leaves_confine_trajectories() {
    let s = specimen("r3_hyperboloid", &[]);
    let mut r = rng(21);
    for _ in 0..5 {
        let x0: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
        let traj = integrate(&s.system, &x0, &StepperConfig::new(Method::ImplicitMidpoint, 0.01), 10_000, &names(&["C"])).unwrap();
        let c = traj.trace("C").unwrap();
        assert!(invariant_drift(&traj, "C").unwrap().max_abs_drift <= 1e-8);
        assert!(c.iter().all(|v| v.signum() == c[0].signum()));
    }
}

#[test]
fn hyperboloid_level_sign_trichotomy() {
    // c > 0: one-sheeted hyperboloid, c = 0: cone, c < 0: two sheets
    let s = specimen("r3_hyperboloid", &[]);
    let c = s.system.invariant("C").unwrap();
    let classify = |x: &[f64]| {
        let v = c.eval_at(x).unwrap();
        match v.partial_cmp(&0.0).unwrap() {
            std::cmp::Ordering::Greater => "one-sheeted",
            std::cmp::Ordering::Equal => "cone",
            std::cmp::Ordering::Less => "two-sheeted",
        }
    };
    assert_eq!(classify(&[0.0, 0.0, 1.0]), "one-sheeted");
    assert_eq!(classify(&[1.0, 0.0, 0.0]), "cone");
    assert_eq!(classify(&[1.0, -1.0, 0.0]), "two-sheeted");
    // on the two-sheeted levels 4xy + z² = c < 0, x and y keep opposite
    // nonzero signs, so a trajectory stays on its sheet
    let traj = integrate(&s.system, &[1.0, -1.0, 0.5], &StepperConfig::new(Method::ImplicitMidpoint, 0.01), 5000, &[]).unwrap();
    assert!(traj.states.iter().all(|x| x[0] > 0.0 && x[1] < 0.0 && classify(x) == "two-sheeted"));
}

#[test]
fn midpoint_agrees_with_rk4_to_third_order() {
    let s = specimen("euler_top", &[]);
    let x0 = [1.0, 0.5, -0.3];
    let diff = |h: f64| {
        let a = implicit_midpoint_step(&s.system, &x0, h, 1e-15, 100).unwrap();
        let b = rk4_step(&s.system, &x0, h).unwrap();
        max_abs_diff(&a, &b)
    };
    let (d1, d2) = (diff(1e-3), diff(5e-4));
    assert!(d1 < 1e-8, "{d1:e}");
    let order = (d1 / d2).log2();
    assert!((order - 3.0).abs() < 0.2, "{order}");
}

#[test]
fn pendulum_reproduces_its_equation_of_motion() {
    let (g, l) = (9.81, 0.7);
    let s = specimen("pendulum", &[("g", g), ("L", l)]);
    let h = 1e-3;
    let traj = integrate(&s.system, &[1.0, 0.0], &StepperConfig::new(Method::Rk4, h), 3000, &[]).unwrap();
    let theta = traj.coordinate(0);
    for k in 1..theta.len() - 1 {
        let accel = (theta[k + 1] - 2.0 * theta[k] + theta[k - 1]) / (h * h);
        assert!((accel + g / l * theta[k].sin()).abs() < 1e-4, "step {k}");
    }
}

#[test]
fn integrals_are_conserved() {
    let sph = specimen("spherical_pendulum", &[]);
    let traj = integrate(&sph.system, &[0.0, 1.0, 0.3, 0.0], &StepperConfig::new(Method::ImplicitMidpoint, 0.005), 10_000, &names(&["p_theta", "H"])).unwrap();
    assert!(invariant_drift(&traj, "p_theta").unwrap().max_abs_drift <= 1e-9);

    let lv = specimen("lotka_volterra", &[]);
    let traj = integrate(&lv.system, &[1.0, 1.5], &StepperConfig::new(Method::ImplicitMidpoint, 0.001), 10_000, &names(&["h"])).unwrap();
    assert!(invariant_drift(&traj, "h").unwrap().max_abs_drift <= 1e-6);
    assert!(traj.states.iter().all(|x| x.iter().all(|v| *v > 0.0)));

    let top = specimen("euler_top", &[]);
    let traj = integrate(&top.system, &[1.0, 1.0, 1.0], &StepperConfig::new(Method::ImplicitMidpoint, 0.01), 10_000, &names(&["H", "C"])).unwrap();
    assert!(invariant_drift(&traj, "H").unwrap().max_abs_drift <= 1e-10);
    assert!(invariant_drift(&traj, "C").unwrap().max_abs_drift <= 1e-10);
}

#[test]
fn every_specimen_passes_its_reference_checks() {
    for name in NAMES {
        let s = specimen(name, &[]);
        let sys = &s.system;
        let cfg = sys.sample_config(100, 42, 1e-8);
        let functions: Vec<_> = sys.integrals().iter().map(|i| i.expr.clone()).collect();
        if !functions.is_empty() {
            assert!(involution_check(sys.bivector(), &functions, &cfg).unwrap().passed, "{name}");
        }
        // dH/dt = {H, H} = 0 along the exact flow
        for x in cfg.points(sys.dim()).into_iter().take(10) {
            assert_eq!(bracket_eval(sys.bivector(), sys.hamiltonian(), sys.hamiltonian(), &x).unwrap(), 0.0);
        }
    }
}

#[test]
fn action_angle_chart() {
    let sys = specimen("harmonic", &[]).system;
    let traj = integrate(&sys, &[0.8, -0.3], &StepperConfig::new(Method::ImplicitMidpoint, 0.01).with_tol(1e-15), 2000, &[]).unwrap();
    let psi0 = action_angle(0.8, -0.3, 1.0).unwrap().psi;
    for x in &traj.states {
        let aa = action_angle(x[0], x[1], 1.0).unwrap();
        assert!((aa.psi - psi0).abs() <= 1e-14, "{:e}", aa.psi - psi0);
        assert!(aa.inverse_residual < 1e-12, "{:e}", aa.inverse_residual);
    }

    // {phi, psi} = 1 from finite-difference gradients, away from the cut p < 0, q = 0
    let pi = BivectorField::canonical(1);
    let mut r = rng(4);
    let mut checked = 0;
    while checked < 100 {
        let x: [f64; 2] = [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
        if x[1] < 0.0 && x[0].abs() < 0.2 || x[0].hypot(x[1]) < 0.2 {
            continue;
        }
        let phi = |y: &[f64]| action_angle(y[0], y[1], 1.0).unwrap().phi;
        let psi = |y: &[f64]| action_angle(y[0], y[1], 1.0).unwrap().psi;
        let bracket = bracket_from_gradients(&pi, &x, &fd_gradient(phi, &x, 1e-6), &fd_gradient(psi, &x, 1e-6)).unwrap();
        assert!((bracket - 1.0).abs() <= 1e-6, "{x:?}: {bracket}");
        checked += 1;
    }
}
