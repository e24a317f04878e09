//! Poisson structures on a single coordinate chart.
//!
//! Conventions used throughout:
//!
//! * `{f, g} = Σ_{i,j} π^{ij} ∂_i f ∂_j g`, so the canonical structure with
//!   `π^{q p} = 1` gives `{q, p} = 1`.
//! * Dynamics are `ẋ = X_H(x)` with `X_H^j = Σ_i π^{ji} ∂_i H`, i.e.
//!   `ḟ = {f, H}` for every observable `f`. With this orientation the
//!   operator `g ↦ {f, g}` is `-X_f`, and it is that operator which is a Lie
//!   algebra homomorphism from functions to vector fields.

mod bivector;
mod lie;
mod sampling;
mod system;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{Dual, ExprError, Expression, Polynomial, PolynomialError};

pub use bivector::BivectorField;
pub use lie::{lie_poisson_from_constants, StructureConstants};
pub use sampling::{
    check_casimir, involution_check, jacobi_check, CheckReport, SampleConfig, DEFAULT_BOX,
    DEFAULT_SAMPLES, DEFAULT_SEED, SINGULAR_MARGIN,
};
pub use system::{Invariant, PoissonSystem, SystemParts, CONSTRUCTION_TOL, HAMILTONIAN};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Polynomial(#[from] PolynomialError),
    #[error("invalid bivector entry ({i},{j}) for dimension {dimension}")]
    InvalidEntry { i: usize, j: usize, dimension: usize },
    #[error("expression is written on a different chart than the bivector")]
    ChartMismatch,
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("bivector has non-polynomial entries")]
    NonPolynomial,
    #[error("structure constants are not antisymmetric at c[{k}][{i}][{j}]")]
    NotAntisymmetric { k: usize, i: usize, j: usize },
    #[error("structure constants violate Jacobi at (i,j,k,l)=({i},{j},{k},{l}): {value:e}")]
    JacobiViolation { i: usize, j: usize, k: usize, l: usize, value: f64 },
    #[error("declared Casimir '{name}' fails: residual {residual:e} at {point:?}")]
    CasimirFailed { name: String, residual: f64, point: Vec<f64> },
    #[error("too many sample points skipped: {skipped} of {attempted}")]
    TooManySkips { skipped: usize, attempted: usize },
    #[error("unknown invariant '{0}'")]
    UnknownInvariant(String),
    #[error("invalid system: {0}")]
    Invalid(String),
}

/// `{f, g}(x)`.
pub fn bracket_eval(
    pi: &BivectorField,
    f: &Expression,
    g: &Expression,
    x: &[f64],
) -> Result<f64, PoissonError> {
    pi.bracket_generic(f, g, x)
}

/// `{f, g}(x)` from gradients supplied by the caller, e.g. finite differences
/// of functions that are not expressions.
pub fn bracket_from_gradients(
    pi: &BivectorField,
    x: &[f64],
    df: &[f64],
    dg: &[f64],
) -> Result<f64, PoissonError> {
    let m = pi.matrix_at(x)?;
    if df.len() != pi.dim() || dg.len() != pi.dim() {
        return Err(PoissonError::Dimension { expected: pi.dim(), got: df.len().min(dg.len()) });
    }
    let mut acc = 0.0;
    for i in 0..pi.dim() {
        for j in 0..pi.dim() {
            acc += m[(i, j)] * df[i] * dg[j];
        }
    }
    Ok(acc)
}

/// `X_H(x)` with components `Σ_i π^{ji}(x) ∂_i H(x)`.
pub fn hamiltonian_vector_field(
    pi: &BivectorField,
    h: &Expression,
    x: &[f64],
) -> Result<Vec<f64>, PoissonError> {
    pi.check_expression(h)?;
    let m = pi.matrix_at(x)?;
    let dh = h.gradient_at(x)?;
    Ok((0..pi.dim()).map(|j| (0..pi.dim()).map(|i| m[(j, i)] * dh[i]).sum()).collect())
}

/// Gradient of `{g, h}` at `x`, by nested forward-mode differentiation
/// through both the functions and the bivector coefficients.
pub fn bracket_gradient(
    pi: &BivectorField,
    g: &Expression,
    h: &Expression,
    x: &[f64],
) -> Result<Vec<f64>, PoissonError> {
    let mut seeded: Vec<Dual<f64>> = x.iter().map(|v| Dual::lift(*v)).collect();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        seeded[k] = Dual::variable(x[k]);
        out.push(pi.bracket_generic(g, h, &seeded)?.eps);
        seeded[k] = Dual::lift(x[k]);
    }
    Ok(out)
}

/// `{f, {g, h}}(x)` without materialising `{g, h}` as an expression.
pub fn nested_bracket(
    pi: &BivectorField,
    f: &Expression,
    g: &Expression,
    h: &Expression,
    x: &[f64],
) -> Result<f64, PoissonError> {
    let df = f.gradient_at(x)?;
    let dgh = bracket_gradient(pi, g, h, x)?;
    bracket_from_gradients(pi, x, &df, &dgh)
}

/// `{f,{g,h}} + {h,{f,g}} + {g,{h,f}}` at `x`.
pub fn jacobiator(
    pi: &BivectorField,
    f: &Expression,
    g: &Expression,
    h: &Expression,
    x: &[f64],
) -> Result<f64, PoissonError> {
    Ok(nested_bracket(pi, f, g, h, x)?
        + nested_bracket(pi, h, f, g, x)?
        + nested_bracket(pi, g, h, f, x)?)
}

/// Components `T^{ijk}`, `i<j<k`, of the Schouten self-bracket, computed
/// exactly as
/// `Σ_r (π^{ir} ∂_r π^{jk} + π^{jr} ∂_r π^{ki} + π^{kr} ∂_r π^{ij})`.
///
/// With the bracket orientation of this module, `T^{ijk}` equals the
/// jacobiator of the coordinate functions `(x_i, x_j, x_k)`, so the field is
/// Poisson iff every component is the zero polynomial.
pub fn schouten_self_bracket(
    pi: &BivectorField,
) -> Result<BTreeMap<(usize, usize, usize), Polynomial>, PoissonError> {
    if pi.exact().is_none() {
        return Err(PoissonError::NonPolynomial);
    }
    let n = pi.dim();
    let entry = |a: usize, b: usize| pi.exact_entry(a, b).expect("exact form checked above");
    let partials: Vec<Vec<Vec<Polynomial>>> = (0..n)
        .map(|a| (0..n).map(|b| (0..n).map(|r| entry(a, b).partial(r)).collect()).collect())
        .collect();
    let mut out = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let mut t = Polynomial::zero(n);
                for r in 0..n {
                    t = t
                        .add(&entry(i, r).mul(&partials[j][k][r]))
                        .add(&entry(j, r).mul(&partials[k][i][r]))
                        .add(&entry(k, r).mul(&partials[i][j][r]));
                }
                out.insert((i, j, k), t);
            }
        }
    }
    Ok(out)
}

/// True iff every Schouten component vanishes identically.
pub fn is_poisson_exact(pi: &BivectorField) -> Result<bool, PoissonError> {
    Ok(schouten_self_bracket(pi)?.values().all(Polynomial::is_zero))
}

/// Numerical rank of `π(x)`; singular values at most `tol` times the largest
/// count as zero.
pub fn rank_at(pi: &BivectorField, x: &[f64], tol: f64) -> Result<usize, PoissonError> {
    let m = pi.matrix_at(x)?;
    let r = crate::symplin::rank(&m, tol);
    debug_assert!(r.is_multiple_of(2), "skew matrix with odd rank {r}");
    Ok(r)
}
