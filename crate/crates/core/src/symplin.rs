//! Linear symplectic algebra on ℝ^d.
//!
//! Rank decisions and subspace containment use singular values relative to
//! the largest one, with [`DEFAULT_TOL`] as the default ratio. Subspaces are
//! compared by mutual containment, never by their bases.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymplinError {
    #[error("half-dimension must be at least 1")]
    ZeroDimension,
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("not symplectic: {0}")]
    NotSymplectic(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis vectors are linearly dependent (rank {rank} < {count})")]
    Dependent { rank: usize, count: usize },
}

/// Skew, nondegenerate bilinear form on ℝ^d, stored as an exactly
/// antisymmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticFormMatrix {
    matrix: DMatrix<f64>,
}

impl SymplecticFormMatrix {
    /// Accepts `m` if [`is_symplectic_form`] holds at `tol`; the stored
    /// matrix is the antisymmetric part of `m`.
    pub fn new(m: DMatrix<f64>, tol: f64) -> Result<Self, SymplinError> {
        if !is_symplectic_form(&m, tol)? {
            let d = m.nrows();
            let reason = if d % 2 == 1 {
                format!("odd dimension {d} forces a degenerate skew form")
            } else if skew_defect(&m) > tol {
                format!("not skew (max |Ω + Ωᵀ| = {:.3e})", skew_defect(&m))
            } else {
                "degenerate".to_string()
            };
            return Err(SymplinError::NotSymplectic(reason));
        }
        let d = m.nrows();
        let mut skew = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i + 1..d {
                let v = 0.5 * (m[(i, j)] - m[(j, i)]);
                skew[(i, j)] = v;
                skew[(j, i)] = -v;
            }
        }
        Ok(Self { matrix: skew })
    }

    pub fn standard(n: usize) -> Result<Self, SymplinError> {
        standard_form(n)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Ω(u, v) = uᵀ Ω v.
    pub fn pair(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.dot(&(&self.matrix * v))
    }

    fn check_ambient(&self, w: &Subspace) -> Result<(), SymplinError> {
        if w.ambient != self.dim() {
            return Err(SymplinError::DimensionMismatch { expected: self.dim(), got: w.ambient });
        }
        Ok(())
    }
}

/// The block matrix `[[0, I_n], [-I_n, 0]]`.
pub fn standard_form(n: usize) -> Result<SymplecticFormMatrix, SymplinError> {
    if n == 0 {
        return Err(SymplinError::ZeroDimension);
    }
    Ok(SymplecticFormMatrix { matrix: j0(n) })
}

pub(crate) fn j0(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = -1.0;
    }
    m
}

fn skew_defect(m: &DMatrix<f64>) -> f64 {
    (m + m.transpose()).amax()
}

/// True iff `max|Ω + Ωᵀ| ≤ tol` and the smallest singular value exceeds `tol`.
pub fn is_symplectic_form(m: &DMatrix<f64>, tol: f64) -> Result<bool, SymplinError> {
    if m.nrows() != m.ncols() {
        return Err(SymplinError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() == 0 {
        return Ok(true);
    }
    if skew_defect(m) > tol {
        return Ok(false);
    }
    let smallest = m.clone().singular_values().min();
    Ok(smallest > tol)
}

fn threshold(singular: &DVector<f64>, tol: f64) -> f64 {
    tol * singular.iter().copied().fold(0.0, f64::max)
}

/// Numerical rank relative to the largest singular value.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = m.clone().singular_values();
    let t = threshold(&s, tol);
    s.iter().filter(|v| **v > t && **v > 0.0).count()
}

/// Orthonormal basis of the kernel of `m` (as columns).
fn kernel(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    kernel_scaled(m, tol, 0.0)
}

/// Kernel with singular values at most `tol · max(σ_max, scale)` treated as
/// zero, so a matrix that is pure round-off relative to `scale` has a full
/// kernel.
fn kernel_scaled(m: &DMatrix<f64>, tol: f64, scale: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 || m.amax() == 0.0 {
        return DMatrix::identity(cols, cols);
    }
    // pad to at least square so the SVD returns a full right basis
    let rows = m.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.rows_mut(0, m.nrows()).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let t = threshold(&svd.singular_values, tol).max(tol * scale);
    let null: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= t)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    columns(cols, &null)
}

/// Orthonormal basis of the column space of `m`.
fn column_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.amax() == 0.0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let t = threshold(&svd.singular_values, tol);
    let kept: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > t)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    columns(m.nrows(), &kept)
}

fn columns(rows: usize, vectors: &[DVector<f64>]) -> DMatrix<f64> {
    if vectors.is_empty() {
        DMatrix::zeros(rows, 0)
    } else {
        DMatrix::from_columns(vectors)
    }
}

/// A linear subspace of ℝ^d given by linearly independent basis columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient: usize,
    basis: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Symplectic,
    Isotropic,
    Coisotropic,
    Lagrangian,
    Generic,
}

impl Subspace {
    pub fn new(ambient: usize, vectors: &[DVector<f64>]) -> Result<Self, SymplinError> {
        for v in vectors {
            if v.len() != ambient {
                return Err(SymplinError::DimensionMismatch { expected: ambient, got: v.len() });
            }
        }
        Self::from_columns(columns(ambient, vectors))
    }

    pub fn from_columns(basis: DMatrix<f64>) -> Result<Self, SymplinError> {
        let r = rank(&basis, DEFAULT_TOL);
        if r < basis.ncols() {
            return Err(SymplinError::Dependent { rank: r, count: basis.ncols() });
        }
        Ok(Self { ambient: basis.nrows(), basis })
    }

    pub fn zero(ambient: usize) -> Self {
        Self { ambient, basis: DMatrix::zeros(ambient, 0) }
    }

    pub fn full(ambient: usize) -> Self {
        Self { ambient, basis: DMatrix::identity(ambient, ambient) }
    }

    /// Span of the given standard basis vectors.
    pub fn coordinate(ambient: usize, axes: &[usize]) -> Result<Self, SymplinError> {
        let vectors: Vec<DVector<f64>> = axes
            .iter()
            .map(|&a| {
                let mut v = DVector::zeros(ambient);
                if a < ambient {
                    v[a] = 1.0;
                }
                v
            })
            .collect();
        if let Some(&bad) = axes.iter().find(|&&a| a >= ambient) {
            return Err(SymplinError::DimensionMismatch { expected: ambient, got: bad + 1 });
        }
        Self::new(ambient, &vectors)
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    fn joined(&self, other: &Subspace) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.ambient, self.dim() + other.dim());
        m.columns_mut(0, self.dim()).copy_from(&self.basis);
        m.columns_mut(self.dim(), other.dim()).copy_from(&other.basis);
        m
    }

    /// `other ⊆ self`, decided by rank comparison.
    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        other.ambient == self.ambient && rank(&self.joined(other), tol) == self.dim()
    }

    /// Mutual containment.
    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.dim() == other.dim() && self.contains(other, tol) && other.contains(self, tol)
    }

    pub fn intersection(&self, other: &Subspace, tol: f64) -> Subspace {
        if self.dim() == 0 || other.dim() == 0 {
            return Subspace::zero(self.ambient);
        }
        let mut system = self.joined(other);
        system.columns_mut(self.dim(), other.dim()).neg_mut();
        let coeffs = kernel(&system, tol);
        let vectors = &self.basis * coeffs.rows(0, self.dim());
        Subspace { ambient: self.ambient, basis: column_space(&vectors, tol) }
    }
}

/// `W^⊥ = {v : Ω(v, w) = 0 for all w ∈ W}`, the kernel of `WᵀΩ`.
pub fn symplectic_orthogonal(
    omega: &SymplecticFormMatrix,
    w: &Subspace,
) -> Result<Subspace, SymplinError> {
    omega.check_ambient(w)?;
    let constraints = w.basis.transpose() * omega.matrix();
    Ok(Subspace { ambient: w.ambient, basis: kernel(&constraints, DEFAULT_TOL) })
}

pub fn classify_subspace(
    omega: &SymplecticFormMatrix,
    w: &Subspace,
    tol: f64,
) -> Result<Classification, SymplinError> {
    let perp = symplectic_orthogonal(omega, w)?;
    let k = w.dim();
    let inter = w.intersection(&perp, tol).dim();
    Ok(if inter == k && inter == perp.dim() {
        Classification::Lagrangian
    } else if inter == 0 && k > 0 {
        Classification::Symplectic
    } else if inter == k {
        Classification::Isotropic
    } else if inter == perp.dim() {
        Classification::Coisotropic
    } else {
        Classification::Generic
    })
}

/// Columns `B = [e_1..e_n, f_1..f_n]` with `BᵀΩB = J₀`, by symplectic
/// Gram-Schmidt with largest-pairing pivots.
pub fn darboux_basis(omega: &SymplecticFormMatrix) -> Result<DMatrix<f64>, SymplinError> {
    darboux_basis_with_tol(omega, DEFAULT_TOL)
}

pub fn darboux_basis_with_tol(
    omega: &SymplecticFormMatrix,
    tol: f64,
) -> Result<DMatrix<f64>, SymplinError> {
    let d = omega.dim();
    if d % 2 == 1 {
        return Err(SymplinError::NotSymplectic(format!("odd dimension {d}")));
    }
    let scale = omega.matrix().amax().max(1.0);
    let mut pool: Vec<DVector<f64>> = (0..d).map(|i| DVector::from_fn(d, |r, _| (r == i) as u8 as f64)).collect();
    let mut es = Vec::with_capacity(d / 2);
    let mut fs = Vec::with_capacity(d / 2);
    while !pool.is_empty() {
        let mut best = (0, 0, 0.0_f64);
        for i in 0..pool.len() {
            for j in i + 1..pool.len() {
                let p = omega.pair(&pool[i], &pool[j]);
                if p.abs() > best.2.abs() {
                    best = (i, j, p);
                }
            }
        }
        let (i, j, p) = best;
        if p.abs() <= tol * scale {
            return Err(SymplinError::NotSymplectic(format!(
                "{} directions left with all pairings below tolerance",
                pool.len()
            )));
        }
        let e = pool[i].clone();
        let f = &pool[j] / p;
        // remove the higher index first so the lower one stays valid
        pool.remove(j);
        pool.remove(i);
        for v in pool.iter_mut() {
            let a = omega.pair(v, &f);
            let b = omega.pair(v, &e);
            *v = &*v - &e * a + &f * b;
        }
        es.push(e);
        fs.push(f);
    }
    es.extend(fs);
    Ok(columns(d, &es))
}

/// `max |BᵀΩB − J₀|`.
pub fn darboux_residual(omega: &SymplecticFormMatrix, b: &DMatrix<f64>) -> f64 {
    let n = omega.dim() / 2;
    if n == 0 {
        return 0.0;
    }
    (b.transpose() * omega.matrix() * b - j0(n)).amax()
}

/// `W° = {α : α(w) = 0 for all w ∈ W}` in the dual coordinate basis.
pub fn annihilator(w: &Subspace) -> Subspace {
    Subspace { ambient: w.ambient, basis: kernel(&w.basis.transpose(), DEFAULT_TOL) }
}

/// `W / (W ∩ W^⊥)` with its induced form.
#[derive(Debug, Clone)]
pub struct ReducedSpace {
    /// Dimension of the quotient.
    pub dimension: usize,
    /// `W ∩ W^⊥`.
    pub kernel: Subspace,
    /// Representatives completing the kernel to a basis of `W`, as columns,
    /// normalised so the induced form is `J₀`.
    pub representatives: DMatrix<f64>,
    /// Induced form on the representatives.
    pub form: DMatrix<f64>,
}

pub fn reduce(
    omega: &SymplecticFormMatrix,
    w: &Subspace,
    tol: f64,
) -> Result<ReducedSpace, SymplinError> {
    omega.check_ambient(w)?;
    let d = w.ambient;
    if w.dim() == 0 {
        return Ok(ReducedSpace {
            dimension: 0,
            kernel: Subspace::zero(d),
            representatives: DMatrix::zeros(d, 0),
            form: DMatrix::zeros(0, 0),
        });
    }
    // the basis is orthonormal, so |Ω| bounds the Gram entries
    let gram = w.basis.transpose() * omega.matrix() * &w.basis;
    let null = kernel_scaled(&gram, tol, omega.matrix().amax());
    let kernel_space = Subspace { ambient: d, basis: column_space(&(&w.basis * &null), tol) };
    // complement of ker G in coefficient space is its orthogonal complement
    let complement = kernel(&null.transpose(), tol);
    let reps = &w.basis * complement;
    let r = reps.ncols();
    if r == 0 {
        return Ok(ReducedSpace {
            dimension: 0,
            kernel: kernel_space,
            representatives: reps,
            form: DMatrix::zeros(0, 0),
        });
    }
    let induced = SymplecticFormMatrix::new(reps.transpose() * omega.matrix() * &reps, tol)?;
    let normalise = darboux_basis_with_tol(&induced, tol)?;
    let reps = reps * normalise;
    let form = SymplecticFormMatrix::new(reps.transpose() * omega.matrix() * &reps, tol)?;
    Ok(ReducedSpace {
        dimension: r,
        kernel: kernel_space,
        representatives: reps,
        form: form.matrix,
    })
}
