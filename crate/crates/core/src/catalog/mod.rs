//! Named example systems and the harmonic-oscillator action-angle map.

mod definition;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use definition::{BivectorSpec, SystemDefinition};

use crate::expr::ExprError;
use crate::poisson::{
    involution_check, CheckReport, PoissonError, PoissonSystem, StructureConstants,
    CONSTRUCTION_TOL, DEFAULT_SAMPLES, DEFAULT_SEED,
};

/// Orientation of the so(3)* bracket used by `euler_top`:
/// `c^k_{ij} = EULER_TOP_ORIENTATION · ε_{ijk}`. With `-1` the flow of
/// `H = Σ L_i²/(2 I_i)` is `L̇₁ = (I₂ − I₃)/(I₂ I₃) · L₂ L₃` and cyclic.
pub const EULER_TOP_ORIENTATION: f64 = -1.0;

pub const NAMES: [&str; 7] = [
    "pendulum",
    "harmonic",
    "euler_top",
    "lotka_volterra",
    "spherical_pendulum",
    "r3_hyperboloid",
    "r3_cylinder",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown system '{0}' (known: {})", NAMES.join(", "))]
    UnknownSpecimen(String),
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no strictly positive equilibrium: {0}")]
    NoEquilibrium(String),
    #[error("invalid system document: {0}")]
    Document(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error("{0}")]
    Formula(String),
}

/// A built example together with the document it was built from.
#[derive(Debug, Clone)]
pub struct SystemSpecimen {
    pub name: String,
    pub system: PoissonSystem,
    pub definition: SystemDefinition,
    pub separable: bool,
    pub doc: &'static str,
    /// Involution check of all declared integrals, run at construction.
    pub facts: Vec<CheckReport>,
}

pub fn default_parameters(name: &str) -> Result<BTreeMap<String, f64>, CatalogError> {
    let pairs: &[(&str, f64)] = match name {
        "pendulum" => &[("g", 9.81), ("L", 1.0)],
        "harmonic" => &[("w", 1.0)],
        "euler_top" => &[("I1", 1.0), ("I2", 2.0), ("I3", 3.0)],
        "lotka_volterra" => &[("a12", 1.0), ("eps1", -1.0), ("eps2", 2.0)],
        "spherical_pendulum" => &[("g", 9.81)],
        "r3_hyperboloid" | "r3_cylinder" => &[],
        other => return Err(CatalogError::UnknownSpecimen(other.to_string())),
    };
    Ok(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
}

/// Builds a specimen. Parameters not given take their defaults; for
/// `lotka_volterra` any given parameter replaces the whole default set.
pub fn build(name: &str, params: &BTreeMap<String, f64>) -> Result<SystemSpecimen, CatalogError> {
    let def = definition(name, params)?;
    let system = def.to_system()?;
    let functions: Vec<_> = system.integrals().iter().map(|i| i.expr.clone()).collect();
    let mut facts = Vec::new();
    if functions.len() > 1 {
        let report = involution_check(
            system.bivector(),
            &functions,
            &system.sample_config(DEFAULT_SAMPLES, DEFAULT_SEED, CONSTRUCTION_TOL),
        )?;
        if !report.passed {
            return Err(CatalogError::Poisson(PoissonError::Invalid(format!(
                "declared integrals of '{name}' are not in involution (residual {:e})",
                report.max_residual
            ))));
        }
        facts.push(report);
    }
    Ok(SystemSpecimen {
        name: name.to_string(),
        separable: system.is_canonical_separable(),
        system,
        definition: def,
        doc: doc(name),
        facts,
    })
}

/// The document a builtin is constructed from, with parameters filled in.
pub fn definition(name: &str, params: &BTreeMap<String, f64>) -> Result<SystemDefinition, CatalogError> {
    if name == "lotka_volterra" {
        return lotka_volterra(params);
    }
    let mut values = default_parameters(name)?;
    for (k, v) in params {
        match values.get_mut(k) {
            Some(slot) => *slot = *v,
            None => return Err(CatalogError::UnknownParameter(k.clone())),
        }
    }
    let coords = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let map = |pairs: &[(&str, &str)]| {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<BTreeMap<_, _>>()
    };
    let def = match name {
        "pendulum" => {
            positive(&values, &["L"])?;
            SystemDefinition {
                name: name.into(),
                coordinates: coords(&["theta", "p"]),
                hamiltonian: "p^2/(2*L^2) - g*L*cos(theta)".into(),
                singular_locus: None,
                sample_box: None,
                parameters: values,
                bivector: BivectorSpec::Canonical { n: 1 },
                casimirs: BTreeMap::new(),
                integrals: BTreeMap::new(),
            }
        }
        "harmonic" => SystemDefinition {
            name: name.into(),
            coordinates: coords(&["q", "p"]),
            hamiltonian: "p^2/2 + w^2*q^2/2".into(),
            singular_locus: None,
            sample_box: None,
            parameters: values,
            bivector: BivectorSpec::Canonical { n: 1 },
            casimirs: BTreeMap::new(),
            integrals: BTreeMap::new(),
        },
        "euler_top" => {
            positive(&values, &["I1", "I2", "I3"])?;
            SystemDefinition {
                name: name.into(),
                coordinates: coords(&["L1", "L2", "L3"]),
                hamiltonian: "L1^2/(2*I1) + L2^2/(2*I2) + L3^2/(2*I3)".into(),
                singular_locus: None,
                sample_box: None,
                parameters: values,
                bivector: BivectorSpec::LiePoisson {
                    constants: StructureConstants::so3(EULER_TOP_ORIENTATION).to_nested(),
                },
                casimirs: map(&[("C", "(L1^2 + L2^2 + L3^2)/2")]),
                integrals: BTreeMap::new(),
            }
        }
        "spherical_pendulum" => SystemDefinition {
            name: name.into(),
            coordinates: coords(&["theta", "psi", "p_theta", "p_psi"]),
            hamiltonian: "p_psi^2/2 + p_theta^2/sin(psi)^2 - g*cos(psi)".into(),
            singular_locus: Some("sin(psi)".into()),
            sample_box: None,
            parameters: values,
            bivector: BivectorSpec::Canonical { n: 2 },
            casimirs: BTreeMap::new(),
            integrals: map(&[
                ("H", "p_psi^2/2 + p_theta^2/sin(psi)^2 - g*cos(psi)"),
                ("p_theta", "p_theta"),
            ]),
        },
        "r3_hyperboloid" => SystemDefinition {
            name: name.into(),
            coordinates: coords(&["x", "y", "z"]),
            hamiltonian: "x".into(),
            singular_locus: None,
            sample_box: None,
            parameters: values,
            bivector: BivectorSpec::Expressions {
                entries: map(&[("1,2", "z"), ("1,3", "-2*x"), ("2,3", "2*y")]),
            },
            casimirs: map(&[("C", "4*x*y + z^2")]),
            integrals: BTreeMap::new(),
        },
        "r3_cylinder" => SystemDefinition {
            name: name.into(),
            coordinates: coords(&["r", "theta", "z"]),
            hamiltonian: "z".into(),
            singular_locus: Some("r".into()),
            sample_box: Some(vec![[0.1, 2.0], [-3.0, 3.0], [-2.0, 2.0]]),
            parameters: values,
            bivector: BivectorSpec::Expressions { entries: map(&[("2,3", "r")]) },
            casimirs: map(&[("C", "r")]),
            integrals: BTreeMap::new(),
        },
        other => return Err(CatalogError::UnknownSpecimen(other.to_string())),
    };
    Ok(def)
}

fn positive(values: &BTreeMap<String, f64>, names: &[&str]) -> Result<(), CatalogError> {
    for n in names {
        if !(values[*n] > 0.0) {
            return Err(CatalogError::InvalidParameter(format!("{n} must be positive")));
        }
    }
    Ok(())
}

/// Parameters `a{i}{j}` (i < j, missing ones are 0), `eps{i}` and optionally
/// `q{i}`. Without `q` the equilibrium is solved from `ε + A q = 0`; with `q`
/// and no `eps`, `ε = −A q`. The dimension is the largest index mentioned.
fn lotka_volterra(params: &BTreeMap<String, f64>) -> Result<SystemDefinition, CatalogError> {
    let params = if params.is_empty() { default_parameters("lotka_volterra")? } else { params.clone() };
    let mut a_entries = BTreeMap::new();
    let mut eps = BTreeMap::new();
    let mut q = BTreeMap::new();
    let digit = |c: char| c.to_digit(10).filter(|d| *d >= 1).map(|d| d as usize);
    for (key, value) in &params {
        let chars: Vec<char> = key.chars().collect();
        let parsed = match chars.as_slice() {
            ['a', i, j] => digit(*i).zip(digit(*j)).filter(|(i, j)| i < j).map(|ij| {
                a_entries.insert(ij, *value);
            }),
            ['q', i] => digit(*i).map(|i| {
                q.insert(i, *value);
            }),
            [e, p, s, i] if [*e, *p, *s] == ['e', 'p', 's'] => digit(*i).map(|i| {
                eps.insert(i, *value);
            }),
            _ => None,
        };
        if parsed.is_none() {
            return Err(CatalogError::UnknownParameter(key.clone()));
        }
    }
    let n = a_entries
        .keys()
        .map(|(_, j)| *j)
        .chain(eps.keys().copied())
        .chain(q.keys().copied())
        .max()
        .unwrap_or(0);
    if n < 2 {
        return Err(CatalogError::InvalidParameter("lotka_volterra needs at least two species".into()));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (&(i, j), &v) in &a_entries {
        a[(i - 1, j - 1)] = v;
        a[(j - 1, i - 1)] = -v;
    }
    let full = |m: &BTreeMap<usize, f64>, what: &str| -> Result<Option<DVector<f64>>, CatalogError> {
        if m.is_empty() {
            return Ok(None);
        }
        if m.len() != n {
            return Err(CatalogError::InvalidParameter(format!("{what} must be given for all {n} species")));
        }
        Ok(Some(DVector::from_iterator(n, m.values().copied())))
    };
    let (eps, q) = match (full(&eps, "eps")?, full(&q, "q")?) {
        (Some(e), Some(q)) => (e, q),
        (None, Some(q)) => (-&a * &q, q),
        (Some(e), None) => {
            let q = a.clone().lu().solve(&(-&e)).ok_or_else(|| {
                CatalogError::NoEquilibrium("interaction matrix is singular; give q explicitly".into())
            })?;
            (e, q)
        }
        (None, None) => return Err(CatalogError::InvalidParameter("give eps or q".into())),
    };
    let residual = (&eps + &a * &q).amax();
    if residual > 1e-12 * (1.0 + eps.amax()) {
        return Err(CatalogError::NoEquilibrium(format!("eps + A q = 0 fails by {residual:e}")));
    }
    if let Some(i) = q.iter().position(|v| !(*v > 0.0)) {
        return Err(CatalogError::NoEquilibrium(format!("q{} = {}", i + 1, q[i])));
    }

    let mut parameters = BTreeMap::new();
    let mut entries = BTreeMap::new();
    for i in 1..=n {
        parameters.insert(format!("eps{i}"), eps[i - 1]);
        parameters.insert(format!("q{i}"), q[i - 1]);
        for j in i + 1..=n {
            parameters.insert(format!("a{i}{j}"), a[(i - 1, j - 1)]);
            entries.insert(format!("{i},{j}"), format!("a{i}{j}*x{i}*x{j}"));
        }
    }
    let h = (1..=n).map(|i| format!("x{i} - q{i}*log(x{i})")).collect::<Vec<_>>().join(" + ");
    let product = (1..=n).map(|i| format!("x{i}")).collect::<Vec<_>>().join("*");
    Ok(SystemDefinition {
        name: "lotka_volterra".into(),
        coordinates: (1..=n).map(|i| format!("x{i}")).collect(),
        hamiltonian: h.clone(),
        singular_locus: Some(product),
        sample_box: Some(vec![[0.1, 4.0]; n]),
        parameters,
        bivector: BivectorSpec::Expressions { entries },
        casimirs: BTreeMap::new(),
        integrals: BTreeMap::from([("h".to_string(), h)]),
    })
}

fn doc(name: &str) -> &'static str {
    match name {
        "pendulum" => {
            "Planar pendulum of length L under gravity g, canonical chart (theta, p) with p = L^2 omega. \
             H = p^2/(2L^2) - gL cos(theta) gives theta'' = -(g/L) sin(theta). The energy with \
             +gL cos(theta) is not conserved by this flow."
        }
        "harmonic" => "Harmonic oscillator H = p^2/2 + w^2 q^2/2 on the canonical plane.",
        "euler_top" => {
            "Free rigid body on so(3)*, H = sum L_i^2/(2 I_i), Casimir |L|^2/2. The bracket sign \
             is chosen so that L1' = (I2 - I3)/(I2 I3) L2 L3 and cyclic."
        }
        "lotka_volterra" => {
            "Lotka-Volterra populations x_i' = x_i (eps_i + sum_j a_ij x_j) with skew a, written as \
             pi^ij = a_ij x_i x_j and h = sum (x_i - q_i log x_i) around the positive equilibrium q."
        }
        "spherical_pendulum" => {
            "Spherical pendulum on (theta, psi, p_theta, p_psi), \
             H = p_psi^2/2 + p_theta^2/sin(psi)^2 - g cos(psi); H and p_theta are in involution."
        }
        "r3_hyperboloid" => {
            "Linear structure on R^3 with Casimir 4xy + z^2; leaves are the hyperboloids, the cone \
             and the origin."
        }
        "r3_cylinder" => "pi = r d_theta ^ d_z in cylindrical coordinates; leaves are the cylinders r = const.",
        _ => "",
    }
}

/// Action-angle coordinates of the harmonic oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionAngle {
    pub phi: f64,
    pub psi: f64,
    /// `max(|q − q̂|, |p − p̂|)` for `(q̂, p̂)` reconstructed from `(φ, ψ)`.
    pub inverse_residual: f64,
}

/// `ψ = E/w`, `φ = w·arctan(q/√(2ψ − q²))`, with the sign of `p` selecting
/// the half-plane (`φ = w·atan2(q, sign(p)·√(2ψ − q²))`).
pub fn action_angle(q: f64, p: f64, w: f64) -> Result<ActionAngle, CatalogError> {
    if !(w > 0.0) {
        return Err(CatalogError::InvalidParameter("w must be positive".into()));
    }
    if q == 0.0 && p == 0.0 {
        return Err(CatalogError::Formula("action-angle chart is undefined at the origin".into()));
    }
    let energy = p * p / 2.0 + w * w * q * q / 2.0;
    let psi = energy / w;
    let radicand = 2.0 * psi - q * q;
    if radicand < 0.0 {
        return Err(CatalogError::Formula(format!(
            "negative radicand 2 psi - q^2 = {radicand:e} in the angle formula"
        )));
    }
    let side = if p < 0.0 { -1.0 } else { 1.0 };
    let theta = q.atan2(side * radicand.sqrt());
    let phi = w * theta;
    let radius = (2.0 * psi).sqrt();
    let (q_hat, p_hat) = (radius * theta.sin(), radius * theta.cos());
    Ok(ActionAngle { phi, psi, inverse_residual: (q - q_hat).abs().max((p - p_hat).abs()) })
}

impl From<ExprError> for CatalogError {
    fn from(e: ExprError) -> Self {
        CatalogError::Poisson(PoissonError::Expr(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use crate::poisson::{bracket_eval, check_casimir};

    fn specimen(name: &str, params: &[(&str, f64)]) -> SystemSpecimen {
        let map = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        build(name, &map).unwrap()
    }

    #[test]
    fn every_builtin_builds_with_defaults() {
        for name in NAMES {
            let s = specimen(name, &[]);
            assert_eq!(s.system.name(), name);
            assert!(!s.doc.is_empty());
        }
    }

    #[test]
    fn separability_flags() {
        let flags: Vec<bool> = NAMES.iter().map(|n| specimen(n, &[]).separable).collect();
        assert_eq!(flags, vec![true, true, false, false, false, false, false]);
    }

    #[test]
    fn euler_top_field_at_unit_momentum() {
        let s = specimen("euler_top", &[]);
        let v = s.system.hamiltonian_vf(&[1.0, 1.0, 1.0]).unwrap();
        let expected = [-1.0 / 6.0, 2.0 / 3.0, -0.5];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn flipped_potential_sign_is_not_conserved() {
        let s = specimen("pendulum", &[]);
        let chart = s.system.chart();
        let flipped = Expression::parse("p^2/2 + 9.81*cos(theta)", chart, &[] as &[&str]).unwrap();
        let x = [0.7, 0.3];
        let pi = s.system.bivector();
        let conserved = bracket_eval(pi, s.system.hamiltonian(), s.system.hamiltonian(), &x).unwrap();
        let flipped_rate = bracket_eval(pi, &flipped, s.system.hamiltonian(), &x).unwrap();
        assert_eq!(conserved, 0.0);
        // d/dt of the flipped energy is -2 g L omega sin(theta)
        assert!((flipped_rate - (-2.0 * 9.81 * 0.3 * 0.7_f64.sin())).abs() < 1e-12);
    }

    #[test]
    fn pendulum_acceleration() {
        let s = specimen("pendulum", &[("g", 2.0), ("L", 0.5)]);
        let x = [0.4, 0.1];
        let v = s.system.hamiltonian_vf(&x).unwrap();
        // theta' = p/L^2, p' = -g L sin(theta)  =>  theta'' = -(g/L) sin(theta)
        assert!((v[0] - 0.1 / 0.25).abs() < 1e-14);
        assert!((v[1] / 0.25 - (-(2.0 / 0.5) * 0.4_f64.sin())).abs() < 1e-14);
    }

    #[test]
    fn lotka_volterra_equilibrium() {
        let s = specimen("lotka_volterra", &[("a12", 1.0), ("eps1", -1.0), ("eps2", 2.0)]);
        let p = &s.definition.parameters;
        assert_eq!((p["q1"], p["q2"]), (2.0, 1.0));
        assert_eq!(s.system.hamiltonian_vf(&[2.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        let v = s.system.hamiltonian_vf(&[1.0, 1.0]).unwrap();
        // x1' = x1 (eps1 + x2), x2' = x2 (eps2 - x1)
        assert_eq!(v, vec![0.0, 1.0]);
    }

    #[test]
    fn lotka_volterra_rejections() {
        let build_lv = |p: &[(&str, f64)]| build("lotka_volterra", &p.iter().map(|(k, v)| (k.to_string(), *v)).collect());
        assert!(matches!(build_lv(&[("a12", 1.0), ("eps1", 1.0), ("eps2", 2.0)]), Err(CatalogError::NoEquilibrium(_))));
        assert!(matches!(build_lv(&[("a12", 1.0), ("a13", 1.0), ("a23", 1.0), ("eps1", 1.0), ("eps2", 1.0), ("eps3", 1.0)]),
            Err(CatalogError::NoEquilibrium(_))));
        assert!(matches!(build_lv(&[("a21", 1.0)]), Err(CatalogError::UnknownParameter(_))));
        let three = build_lv(&[("a12", 1.0), ("a13", -1.0), ("a23", 2.0), ("q1", 1.0), ("q2", 1.0), ("q3", 1.0)]).unwrap();
        assert_eq!(three.system.hamiltonian_vf(&[1.0, 1.0, 1.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn hyperboloid_casimir_residual_is_round_off() {
        let s = specimen("r3_hyperboloid", &[]);
        let c = s.system.invariant("C").unwrap();
        let cfg = s.system.sample_config(100, 42, 1e-12);
        let report = check_casimir(s.system.bivector(), c, &cfg).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(build("double_pendulum", &BTreeMap::new()), Err(CatalogError::UnknownSpecimen(_))));
        let bad = BTreeMap::from([("mass".to_string(), 1.0)]);
        assert!(matches!(build("pendulum", &bad), Err(CatalogError::UnknownParameter(_))));
    }

    #[test]
    fn action_angle_reference_point() {
        let aa = action_angle(0.0, 2.0_f64.sqrt(), 1.0).unwrap();
        assert!((aa.psi - 1.0).abs() < 1e-15);
        assert_eq!(aa.phi, 0.0);
        assert!(aa.inverse_residual < 1e-15);
    }

    #[test]
    fn action_angle_domain_errors() {
        assert!(action_angle(0.0, 0.0, 1.0).is_err());
        // w = 0.5 at p = 0: 2 psi - q^2 = q^2 (w - 1) < 0
        assert!(matches!(action_angle(1.0, 0.0, 0.5), Err(CatalogError::Formula(_))));
        let lower = action_angle(0.5, -1.0, 1.0).unwrap();
        assert!(lower.phi > std::f64::consts::FRAC_PI_2 && lower.inverse_residual < 1e-15);
    }
}
