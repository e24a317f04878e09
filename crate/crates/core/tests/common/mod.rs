#![allow(dead_code)]

use std::collections::BTreeMap;

use geomech::catalog::{self, SystemSpecimen};
use geomech::expr::Expression;
use geomech::integrate::{integrate, Method, StepperConfig};
use geomech::poisson::{BivectorField, PoissonSystem, SampleConfig};
use geomech::symplin::SymplecticFormMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NONE: [&str; 0] = [];
pub const XYZ: [&str; 3] = ["x", "y", "z"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn specimen(name: &str, pairs: &[(&str, f64)]) -> SystemSpecimen {
    catalog::build(name, &params(pairs)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn ex(text: &str, chart: &[impl AsRef<str>]) -> Expression {
    Expression::parse(text, chart, &NONE).unwrap_or_else(|e| panic!("{text}: {e}"))
}

pub fn system(pi: BivectorField, h: &str) -> PoissonSystem {
    let chart = pi.chart().to_vec();
    let h = ex(h, &chart);
    PoissonSystem::new(geomech::poisson::SystemParts::new("test", pi, h)).unwrap()
}

pub fn lv_params(n: usize) -> Vec<(&'static str, f64)> {
    match n {
        2 => vec![("a12", 1.0), ("eps1", -1.0), ("eps2", 2.0)],
        3 => vec![("a12", 1.0), ("a13", -0.5), ("a23", 2.0), ("q1", 1.0), ("q2", 2.0), ("q3", 0.5)],
        4 => vec![
            ("a12", 1.0), ("a13", -0.5), ("a14", 0.25), ("a23", 2.0), ("a24", -1.0), ("a34", 0.75),
            ("q1", 1.0), ("q2", 1.5), ("q3", 0.5), ("q4", 2.0),
        ],
        _ => panic!("no Lotka-Volterra fixture for n = {n}"),
    }
}

/// Bivector fields from the catalog, with the sampling setup of their system.
pub fn builtin_bivectors() -> Vec<(String, BivectorField, SampleConfig)> {
    let mut out = Vec::new();
    let mut push = |label: String, sys: &PoissonSystem| {
        out.push((label, sys.bivector().clone(), sys.sample_config(100, 42, 1e-9)));
    };
    for n in 1..=3 {
        push(format!("canonical n={n}"), &system(BivectorField::canonical(n), "0"));
    }
    push("so(3)*".into(), &specimen("euler_top", &[]).system);
    for n in 2..=4 {
        push(format!("lotka_volterra n={n}"), &specimen("lotka_volterra", &lv_params(n)).system);
    }
    push("r3_hyperboloid".into(), &specimen("r3_hyperboloid", &[]).system);
    push("r3_cylinder".into(), &specimen("r3_cylinder", &[]).system);
    out
}

pub fn r3(entries: [&str; 3]) -> BivectorField {
    let keys = [(0, 1), (0, 2), (1, 2)];
    BivectorField::from_entries(&XYZ, keys.into_iter().zip(entries).map(|(k, e)| (k, ex(e, &XYZ)))).unwrap()
}

/// Linear field on R^3 whose vector proxy `(z, x, y)` has helicity `x + y + z`.
pub fn helicity() -> BivectorField {
    r3(["y", "-x", "z"])
}

/// Random polynomial text with small integer coefficients.
pub fn random_polynomial(rng: &mut ChaCha8Rng, chart: &[impl AsRef<str>], terms: usize, degree: u32) -> String {
    let mut parts = Vec::new();
    for _ in 0..terms {
        let coef: i32 = rng.gen_range(-3..=3);
        let mut factors = vec![format!("{coef}")];
        let deg = rng.gen_range(0..=degree);
        for _ in 0..deg {
            factors.push(chart[rng.gen_range(0..chart.len())].as_ref().to_string());
        }
        parts.push(factors.join("*"));
    }
    parts.join(" + ")
}

/// Random polynomial bivectors on R^3 and R^4 (generically not Poisson).
pub fn random_bivectors(count: usize, seed: u64) -> Vec<BivectorField> {
    let mut r = rng(seed);
    (0..count)
        .map(|k| {
            let chart: Vec<String> = (1..=3 + k % 2).map(|i| format!("u{i}")).collect();
            let n = chart.len();
            let mut entries = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let text = random_polynomial(&mut r, &chart, 2, 2);
                    entries.push(((i, j), ex(&text, &chart)));
                }
            }
            BivectorField::from_entries(&chart, entries).unwrap()
        })
        .collect()
}

/// `Ω = Pᵀ J₀ P` for a random well-conditioned `P`.
pub fn random_symplectic_form(rng: &mut ChaCha8Rng, n: usize) -> SymplecticFormMatrix {
    let d = 2 * n;
    let p = DMatrix::<f64>::identity(d, d) + DMatrix::from_fn(d, d, |_, _| rng.gen_range(-0.4..0.4));
    let j0 = geomech::symplin::standard_form(n).unwrap().matrix().clone();
    SymplecticFormMatrix::new(p.transpose() * j0 * &p, 1e-10).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Central-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let h = step * x[k].abs().max(1.0);
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[k] += h;
            minus[k] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Global error at `T = 2` on the pendulum (g = L = 1) from `(1, 0)` against
/// a fine rk4 reference.
pub fn global_error(method: Method, h: f64) -> f64 {
    let sys = specimen("pendulum", &[("g", 1.0), ("L", 1.0)]).system;
    let t_end = 2.0;
    let steps = (t_end / h).round() as usize;
    let reference = integrate(&sys, &[1.0, 0.0], &StepperConfig::new(Method::Rk4, t_end / 20_000.0), 20_000, &[])
        .unwrap();
    let run = integrate(&sys, &[1.0, 0.0], &StepperConfig::new(method, h).with_tol(1e-15), steps, &[]).unwrap();
    max_abs_diff(run.last_state().unwrap(), reference.last_state().unwrap())
}

/// `log2(e(h) / e(h/2))`.
pub fn convergence_order(method: Method, h: f64) -> f64 {
    (global_error(method, h) / global_error(method, h / 2.0)).log2()
}

/// Expressions exercising every operator, with charts and evaluation boxes.
pub fn expression_corpus() -> Vec<(Expression, Vec<(f64, f64)>)> {
    let mut out = Vec::new();
    let hand = [
        "x*y + z",
        "sin(x)*cos(y) - tan(z/3)",
        "atan(x*y) + exp(-z^2)",
        "log(1 + x^2) + sqrt(2 + y^2) * z",
        "x^3 - 2*y^2*z + 0.5",
        "(1 + x^2)^y",
        "-(x - y)^2 / (1 + z^2)",
        "pi*x - arctan(y) + ln(3 + z)",
        "sqrt(x^2 + y^2 + z^2 + 1) ^ 3",
        "exp(sin(x*y*z)) / cos(0.3*x)",
    ];
    for text in hand {
        out.push((ex(text, &XYZ), vec![(-2.0, 2.0); 3]));
    }
    let mut lv = vec![];
    for n in 2..=4 {
        lv.push(specimen("lotka_volterra", &lv_params(n)));
    }
    let names = ["pendulum", "harmonic", "euler_top", "spherical_pendulum", "r3_hyperboloid", "r3_cylinder"];
    for s in names.iter().map(|n| specimen(n, &[])).chain(lv) {
        let sys = &s.system;
        let bounds = sys.sample_box().map(<[_]>::to_vec).unwrap_or_else(|| vec![(-2.0, 2.0); sys.dim()]);
        let mut exprs = vec![sys.hamiltonian().clone()];
        exprs.extend(sys.casimirs().iter().chain(sys.integrals()).map(|i| i.expr.clone()));
        exprs.extend(sys.bivector().entries().map(|(_, e)| e.clone()));
        for e in exprs {
            out.push((e, bounds.clone()));
        }
    }
    out
}
