use std::collections::BTreeMap;

use super::sampling::{DEFAULT_SAMPLES, DEFAULT_SEED};
use super::{check_casimir, hamiltonian_vector_field, BivectorField, PoissonError, SampleConfig};
use crate::expr::Expression;

/// Tolerance used when validating declared Casimirs at construction.
pub const CONSTRUCTION_TOL: f64 = 1e-8;

/// Name under which the Hamiltonian is addressable as an invariant.
pub const HAMILTONIAN: &str = "H";

#[derive(Debug, Clone, PartialEq)]
pub struct Invariant {
    pub name: String,
    pub expr: Expression,
}

/// Inputs to [`PoissonSystem::new`]. All expressions must already be bound
/// (parameter-free) and written on the bivector's chart.
#[derive(Debug, Clone)]
pub struct SystemParts {
    pub name: String,
    pub bivector: BivectorField,
    pub hamiltonian: Expression,
    pub parameters: BTreeMap<String, f64>,
    pub casimirs: Vec<Invariant>,
    pub integrals: Vec<Invariant>,
    /// Nonzero exactly at admissible points.
    pub singular_locus: Option<Expression>,
    pub sample_box: Option<Vec<(f64, f64)>>,
}

impl SystemParts {
    pub fn new(name: &str, bivector: BivectorField, hamiltonian: Expression) -> Self {
        Self {
            name: name.to_string(),
            bivector,
            hamiltonian,
            parameters: BTreeMap::new(),
            casimirs: Vec::new(),
            integrals: Vec::new(),
            singular_locus: None,
            sample_box: None,
        }
    }
}

/// Bivector, Hamiltonian and declared invariants on one chart.
#[derive(Debug, Clone)]
pub struct PoissonSystem {
    parts: SystemParts,
    separable: bool,
}

impl PoissonSystem {
    /// Validates charts and checks every declared Casimir on
    /// 100 seeded points at tolerance 1e-8.
    pub fn new(parts: SystemParts) -> Result<Self, PoissonError> {
        let pi = &parts.bivector;
        let all = std::iter::once(&parts.hamiltonian)
            .chain(parts.casimirs.iter().map(|c| &c.expr))
            .chain(parts.integrals.iter().map(|c| &c.expr))
            .chain(parts.singular_locus.iter());
        for e in all {
            pi.check_expression(e)?;
            if let Some(p) = e.free_parameters().into_iter().next() {
                return Err(PoissonError::Invalid(format!("unbound parameter '{p}'")));
            }
        }
        if let Some(b) = &parts.sample_box {
            if b.len() != pi.dim() || b.iter().any(|(lo, hi)| !(lo <= hi)) {
                return Err(PoissonError::Invalid("sample box does not match the chart".into()));
            }
        }
        let mut names: Vec<&str> = parts.casimirs.iter().chain(&parts.integrals).map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(PoissonError::Invalid("duplicate invariant name".into()));
        }
        let separable = canonical_separable(&parts);
        let system = Self { parts, separable };
        let cfg = system.sample_config(DEFAULT_SAMPLES, DEFAULT_SEED, CONSTRUCTION_TOL);
        for c in &system.parts.casimirs {
            let report = check_casimir(&system.parts.bivector, &c.expr, &cfg)?;
            if !report.passed {
                return Err(PoissonError::CasimirFailed {
                    name: c.name.clone(),
                    residual: report.max_residual,
                    point: report.worst_point.unwrap_or_default(),
                });
            }
        }
        Ok(system)
    }

    pub fn name(&self) -> &str {
        &self.parts.name
    }

    pub fn bivector(&self) -> &BivectorField {
        &self.parts.bivector
    }

    pub fn hamiltonian(&self) -> &Expression {
        &self.parts.hamiltonian
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parts.parameters
    }

    pub fn casimirs(&self) -> &[Invariant] {
        &self.parts.casimirs
    }

    pub fn integrals(&self) -> &[Invariant] {
        &self.parts.integrals
    }

    pub fn singular_locus(&self) -> Option<&Expression> {
        self.parts.singular_locus.as_ref()
    }

    pub fn sample_box(&self) -> Option<&[(f64, f64)]> {
        self.parts.sample_box.as_deref()
    }

    pub fn chart(&self) -> &[String] {
        self.parts.bivector.chart()
    }

    pub fn dim(&self) -> usize {
        self.parts.bivector.dim()
    }

    /// Sampling settings for stochastic checks on this system.
    pub fn sample_config(&self, samples: usize, seed: u64, tol: f64) -> SampleConfig {
        SampleConfig {
            samples,
            seed,
            tol,
            bounds: self.parts.sample_box.clone(),
            singular_locus: self.parts.singular_locus.clone(),
        }
    }

    /// `H` first, then Casimirs, then integrals (an integral named `H` is the
    /// Hamiltonian itself and is not repeated).
    pub fn invariant_names(&self) -> Vec<String> {
        std::iter::once(HAMILTONIAN.to_string())
            .chain(self.parts.casimirs.iter().map(|c| c.name.clone()))
            .chain(self.parts.integrals.iter().filter(|c| c.name != HAMILTONIAN).map(|c| c.name.clone()))
            .collect()
    }

    pub fn invariant(&self, name: &str) -> Result<&Expression, PoissonError> {
        if name == HAMILTONIAN {
            return Ok(&self.parts.hamiltonian);
        }
        self.parts
            .casimirs
            .iter()
            .chain(&self.parts.integrals)
            .find(|c| c.name == name)
            .map(|c| &c.expr)
            .ok_or_else(|| PoissonError::UnknownInvariant(name.to_string()))
    }

    /// `X_H(x)`.
    pub fn hamiltonian_vf(&self, x: &[f64]) -> Result<Vec<f64>, PoissonError> {
        hamiltonian_vector_field(&self.parts.bivector, &self.parts.hamiltonian, x)
    }

    /// Canonical bivector and a Hamiltonian whose top-level summands each
    /// depend on positions only or on momenta only.
    pub fn is_canonical_separable(&self) -> bool {
        self.separable
    }

    /// Fails if `x` is on the singular locus or the Hamiltonian is undefined.
    pub fn check_admissible(&self, x: &[f64]) -> Result<(), PoissonError> {
        self.parts.bivector.check_point(x.len())?;
        if let Some(pred) = &self.parts.singular_locus {
            if pred.eval_at(x)? == 0.0 {
                return Err(PoissonError::Expr(crate::expr::ExprError::Domain {
                    node: pred.render(),
                    reason: "state lies on the singular locus".into(),
                }));
            }
        }
        self.parts.hamiltonian.eval_at(x)?;
        Ok(())
    }
}

fn canonical_separable(parts: &SystemParts) -> bool {
    let Some(n) = parts.bivector.canonical_half_dim() else {
        return false;
    };
    let chart = parts.bivector.chart();
    let index = |c: &str| chart.iter().position(|x| x == c).unwrap_or(0);
    parts.hamiltonian.summands().iter().all(|term| {
        let used = term.free_coordinates();
        used.iter().all(|c| index(c) < n) || used.iter().all(|c| index(c) >= n)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const NONE: [&str; 0] = [];

    #[test]
    fn failing_casimir_is_rejected_at_construction() {
        let pi = BivectorField::canonical(1);
        let chart = pi.chart().to_vec();
        let mut parts = SystemParts::new("bad", pi, Expression::parse("p1^2/2", &chart, &NONE).unwrap());
        parts.casimirs.push(Invariant { name: "C".into(), expr: Expression::coordinate(&chart, 0) });
        assert!(matches!(PoissonSystem::new(parts), Err(PoissonError::CasimirFailed { .. })));
    }

    #[test]
    fn separability_detection() {
        let chart = ["q", "p"];
        let sys = |h: &str| {
            let pi = BivectorField::canonical_on(&chart).unwrap();
            PoissonSystem::new(SystemParts::new("s", pi, Expression::parse(h, &chart, &NONE).unwrap()))
                .unwrap()
        };
        assert!(sys("p^2/2 - 3*cos(q)").is_canonical_separable());
        assert!(sys("-(q^2) + p^4").is_canonical_separable());
        assert!(!sys("p^2*q").is_canonical_separable());
    }

    #[test]
    fn invariants_are_addressable_by_name() {
        let chart = ["q", "p"];
        let pi = BivectorField::canonical_on(&chart).unwrap();
        let h = Expression::parse("p^2/2", &chart, &NONE).unwrap();
        let mut parts = SystemParts::new("s", pi, h.clone());
        parts.integrals.push(Invariant { name: "H".into(), expr: h.clone() });
        parts.integrals.push(Invariant { name: "p".into(), expr: Expression::coordinate(&chart, 1) });
        let sys = PoissonSystem::new(parts).unwrap();
        assert_eq!(sys.invariant_names(), vec!["H", "p"]);
        assert_eq!(sys.invariant("H").unwrap(), &h);
        assert!(matches!(sys.invariant("nope"), Err(PoissonError::UnknownInvariant(_))));
    }
}
