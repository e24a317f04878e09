//! Seeded stochastic verification of bracket identities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bracket_eval, jacobiator, BivectorField, PoissonError};
use crate::expr::{ExprError, Expression};

/// Points where the singular-locus predicate is within this margin of zero
/// are excluded from sampling.
pub const SINGULAR_MARGIN: f64 = 1e-6;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_BOX: (f64, f64) = (-2.0, 2.0);

#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    /// Per-axis sampling interval; `None` means `[-2, 2]` on every axis.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub singular_locus: Option<Expression>,
}

impl SampleConfig {
    pub fn new(samples: usize, seed: u64, tol: f64) -> Self {
        Self { samples, seed, tol, bounds: None, singular_locus: None }
    }

    fn bounds_for(&self, n: usize) -> Vec<(f64, f64)> {
        self.bounds.clone().unwrap_or_else(|| vec![DEFAULT_BOX; n])
    }

    /// Deterministic sample points avoiding the singular locus.
    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        let bounds = self.bounds_for(n);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.samples);
        let max_draws = self.samples.saturating_mul(1000).max(1000);
        let mut draws = 0;
        while out.len() < self.samples && draws < max_draws {
            draws += 1;
            let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
            let admissible = match &self.singular_locus {
                None => true,
                Some(pred) => pred.eval_at(&x).is_ok_and(|v| v.abs() > SINGULAR_MARGIN),
            };
            if admissible {
                out.push(x);
            }
        }
        out
    }
}

/// Outcome of a sampled check; `passed` iff `max_residual <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub passed: bool,
    pub tolerance: f64,
    pub samples: usize,
    pub seed: u64,
    pub max_residual: f64,
    pub worst_point: Option<Vec<f64>>,
    /// Sample points skipped because a function was undefined there.
    pub skipped: usize,
}

fn is_domain(err: &PoissonError) -> bool {
    matches!(err, PoissonError::Expr(ExprError::Domain { .. }))
}

pub(crate) fn run_sampled(
    check: &str,
    n: usize,
    cfg: &SampleConfig,
    residual: impl Fn(&[f64]) -> Result<f64, PoissonError>,
) -> Result<CheckReport, PoissonError> {
    let points = cfg.points(n);
    let mut worst: Option<(f64, Vec<f64>)> = None;
    let mut skipped = 0;
    for x in &points {
        match residual(x) {
            Ok(r) => {
                if worst.as_ref().is_none_or(|(w, _)| r > *w) {
                    worst = Some((r, x.clone()));
                }
            }
            Err(e) if is_domain(&e) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let attempted = points.len();
    if attempted == 0 || 2 * skipped > attempted {
        return Err(PoissonError::TooManySkips { skipped, attempted });
    }
    let (max_residual, worst_point) = worst.map_or((0.0, None), |(r, x)| (r, Some(x)));
    Ok(CheckReport {
        check: check.to_string(),
        passed: max_residual <= cfg.tol,
        tolerance: cfg.tol,
        samples: attempted,
        seed: cfg.seed,
        max_residual,
        worst_point,
        skipped,
    })
}

/// Residual `‖π^♯ dC‖_∞` at seeded points.
pub fn check_casimir(
    pi: &BivectorField,
    c: &Expression,
    cfg: &SampleConfig,
) -> Result<CheckReport, PoissonError> {
    pi.check_expression(c)?;
    run_sampled("casimir", pi.dim(), cfg, |x| {
        let v = super::hamiltonian_vector_field(pi, c, x)?;
        Ok(v.iter().fold(0.0, |m, c| m.max(c.abs())))
    })
}

/// Residual `max_{i<j} |{f_i, f_j}|` at seeded points.
pub fn involution_check(
    pi: &BivectorField,
    functions: &[Expression],
    cfg: &SampleConfig,
) -> Result<CheckReport, PoissonError> {
    for f in functions {
        pi.check_expression(f)?;
    }
    run_sampled("involution", pi.dim(), cfg, |x| {
        let mut worst = 0.0_f64;
        for i in 0..functions.len() {
            for j in i + 1..functions.len() {
                worst = worst.max(bracket_eval(pi, &functions[i], &functions[j], x)?.abs());
            }
        }
        Ok(worst)
    })
}

/// Largest jacobiator of coordinate-function triples at seeded points.
pub fn jacobi_check(pi: &BivectorField, cfg: &SampleConfig) -> Result<CheckReport, PoissonError> {
    let n = pi.dim();
    let coords: Vec<Expression> = (0..n).map(|i| Expression::coordinate(pi.chart(), i)).collect();
    run_sampled("jacobi", n, cfg, |x| {
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    worst = worst.max(jacobiator(pi, &coords[i], &coords[j], &coords[k], x)?.abs());
                }
            }
        }
        Ok(worst)
    })
}
