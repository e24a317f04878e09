use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CatalogError;
use crate::expr::Expression;
use crate::poisson::{
    lie_poisson_from_constants, BivectorField, Invariant, PoissonSystem, StructureConstants,
    SystemParts,
};

/// How the bivector of a [`SystemDefinition`] is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BivectorSpec {
    /// `n` positions followed by `n` momenta.
    Canonical { n: usize },
    /// Upper-triangular entries keyed `"i,j"`, 1-based, `i < j`.
    Expressions { entries: BTreeMap<String, String> },
    /// Structure constants `constants[k][i][j] = c^k_{ij}`.
    LiePoisson { constants: Vec<Vec<Vec<f64>>> },
}

/// Serializable description of a system. Expressions are kept as text and
/// may reference `parameters`.
///
/// ```toml
/// name = "helicity"
/// coordinates = ["x", "y", "z"]
/// hamiltonian = "x"
///
/// [bivector]
/// kind = "expressions"
/// entries = { "1,2" = "y", "1,3" = "-x", "2,3" = "z" }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDefinition {
    pub name: String,
    pub coordinates: Vec<String>,
    pub hamiltonian: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular_locus: Option<String>,
    /// Per-axis `[lo, hi]` for stochastic checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub bivector: BivectorSpec,
    #[serde(default)]
    pub casimirs: BTreeMap<String, String>,
    #[serde(default)]
    pub integrals: BTreeMap<String, String>,
}

impl SystemDefinition {
    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        toml::from_str(text).map_err(|e| CatalogError::Document(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CatalogError> {
        toml::to_string(self).map_err(|e| CatalogError::Document(e.to_string()))
    }

    /// Replaces the values of existing parameters.
    pub fn override_parameters(&mut self, values: &BTreeMap<String, f64>) -> Result<(), CatalogError> {
        for (k, v) in values {
            match self.parameters.get_mut(k) {
                Some(slot) => *slot = *v,
                None => return Err(CatalogError::UnknownParameter(k.clone())),
            }
        }
        Ok(())
    }

    fn expression(&self, field: &str, text: &str) -> Result<Expression, CatalogError> {
        let names: Vec<&str> = self.parameters.keys().map(String::as_str).collect();
        Expression::parse(text, &self.coordinates, &names)
            .and_then(|e| e.bind(&self.parameters))
            .map_err(|e| CatalogError::Field { field: field.to_string(), message: e.to_string() })
    }

    fn bivector(&self) -> Result<BivectorField, CatalogError> {
        let n = self.coordinates.len();
        match &self.bivector {
            BivectorSpec::Canonical { n: half } => {
                if 2 * half != n {
                    return Err(CatalogError::Field {
                        field: "bivector".into(),
                        message: format!("canonical n = {half} needs {} coordinates, got {n}", 2 * half),
                    });
                }
                Ok(BivectorField::canonical_on(&self.coordinates)?)
            }
            BivectorSpec::Expressions { entries } => {
                let parsed = entries
                    .iter()
                    .map(|(key, text)| {
                        let field = format!("bivector.entries.\"{key}\"");
                        let (i, j) = parse_key(key, n)
                            .ok_or_else(|| CatalogError::Field {
                                field: field.clone(),
                                message: format!("key must be \"i,j\" with 1 <= i < j <= {n}"),
                            })?;
                        Ok(((i, j), self.expression(&field, text)?))
                    })
                    .collect::<Result<Vec<_>, CatalogError>>()?;
                Ok(BivectorField::from_entries(&self.coordinates, parsed)?)
            }
            BivectorSpec::LiePoisson { constants } => {
                let c = StructureConstants::new(constants.clone())?;
                Ok(lie_poisson_from_constants(&c, &self.coordinates)?)
            }
        }
    }

    fn invariants(&self, field: &str, map: &BTreeMap<String, String>) -> Result<Vec<Invariant>, CatalogError> {
        map.iter()
            .map(|(name, text)| {
                Ok(Invariant { name: name.clone(), expr: self.expression(&format!("{field}.{name}"), text)? })
            })
            .collect()
    }

    /// Parses, binds parameters and validates into a [`PoissonSystem`].
    pub fn to_system(&self) -> Result<PoissonSystem, CatalogError> {
        let bivector = self.bivector()?;
        let hamiltonian = self.expression("hamiltonian", &self.hamiltonian)?;
        let mut parts = SystemParts::new(&self.name, bivector, hamiltonian);
        parts.parameters = self.parameters.clone();
        parts.casimirs = self.invariants("casimirs", &self.casimirs)?;
        parts.integrals = self.invariants("integrals", &self.integrals)?;
        parts.singular_locus = self
            .singular_locus
            .as_deref()
            .map(|s| self.expression("singular_locus", s))
            .transpose()?;
        parts.sample_box = self.sample_box.as_ref().map(|b| b.iter().map(|[lo, hi]| (*lo, *hi)).collect());
        Ok(PoissonSystem::new(parts)?)
    }
}

fn parse_key(key: &str, n: usize) -> Option<(usize, usize)> {
    let (a, b) = key.split_once(',')?;
    let i: usize = a.trim().parse().ok()?;
    let j: usize = b.trim().parse().ok()?;
    (1 <= i && i < j && j <= n).then(|| (i - 1, j - 1))
}
