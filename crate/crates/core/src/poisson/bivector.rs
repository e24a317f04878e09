use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::PoissonError;
use crate::expr::{Expression, Polynomial, Scalar};

/// Antisymmetric coefficient field `π^{ij}` on an ordered chart.
///
/// Only entries with `i < j` are stored; the rest follow from
/// `π^{ji} = -π^{ij}` and `π^{ii} = 0`, so antisymmetry is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct BivectorField {
    chart: Vec<String>,
    entries: BTreeMap<(usize, usize), Expression>,
    exact: Option<BTreeMap<(usize, usize), Polynomial>>,
    canonical: Option<usize>,
}

impl BivectorField {
    /// Builds a field from upper-triangular entries (0-based, `i < j`).
    /// Entries must be parameter-free expressions on `chart`.
    pub fn from_entries(
        chart: &[impl AsRef<str>],
        entries: impl IntoIterator<Item = ((usize, usize), Expression)>,
    ) -> Result<Self, PoissonError> {
        let chart: Vec<String> = chart.iter().map(|c| c.as_ref().to_string()).collect();
        let n = chart.len();
        let mut map = BTreeMap::new();
        for ((i, j), e) in entries {
            if !(i < j && j < n) {
                return Err(PoissonError::InvalidEntry { i, j, dimension: n });
            }
            if e.coordinates() != chart.as_slice() {
                return Err(PoissonError::ChartMismatch);
            }
            if let Some(p) = e.free_parameters().into_iter().next() {
                return Err(PoissonError::Expr(crate::expr::ExprError::Unbound(p.to_string())));
            }
            if map.insert((i, j), e).is_some() {
                return Err(PoissonError::InvalidEntry { i, j, dimension: n });
            }
        }
        let exact = map
            .iter()
            .map(|(k, e)| Polynomial::from_expression(e).map(|p| (*k, p)))
            .collect::<Result<BTreeMap<_, _>, _>>()
            .ok();
        Ok(Self { chart, entries: map, exact, canonical: None })
    }

    /// Canonical structure on `(q_1..q_n, p_1..p_n)` with `π^{q_i p_i} = 1`.
    pub fn canonical(n: usize) -> Self {
        let chart: Vec<String> = (1..=n)
            .map(|i| format!("q{i}"))
            .chain((1..=n).map(|i| format!("p{i}")))
            .collect();
        Self::canonical_on(&chart).expect("generated chart is valid")
    }

    /// Canonical structure on a chart ordered as `n` positions then `n` momenta.
    pub fn canonical_on(chart: &[impl AsRef<str>]) -> Result<Self, PoissonError> {
        let dim = chart.len();
        if dim == 0 || dim % 2 == 1 {
            return Err(PoissonError::Dimension { expected: dim + 1, got: dim });
        }
        let n = dim / 2;
        let entries = (0..n).map(|i| ((i, n + i), Expression::constant(chart, 1.0)));
        let mut field = Self::from_entries(chart, entries)?;
        field.canonical = Some(n);
        Ok(field)
    }

    pub fn zero(chart: &[impl AsRef<str>]) -> Self {
        Self::from_entries(chart, std::iter::empty()).expect("empty entry list is valid")
    }

    pub fn dim(&self) -> usize {
        self.chart.len()
    }

    pub fn chart(&self) -> &[String] {
        &self.chart
    }

    /// Half-dimension when built as the canonical structure.
    pub fn canonical_half_dim(&self) -> Option<usize> {
        self.canonical
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &Expression)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    /// Exact polynomial form when every entry is polynomial.
    pub fn exact(&self) -> Option<&BTreeMap<(usize, usize), Polynomial>> {
        self.exact.as_ref()
    }

    /// `π^{ij}` with the antisymmetric extension, as an exact polynomial.
    pub fn exact_entry(&self, i: usize, j: usize) -> Option<Polynomial> {
        let exact = self.exact.as_ref()?;
        let zero = Polynomial::zero(self.dim());
        Some(match i.cmp(&j) {
            std::cmp::Ordering::Less => exact.get(&(i, j)).cloned().unwrap_or(zero),
            std::cmp::Ordering::Greater => exact.get(&(j, i)).map(|p| p.neg()).unwrap_or(zero),
            std::cmp::Ordering::Equal => zero,
        })
    }

    pub fn coefficient<T: Scalar>(&self, i: usize, j: usize, x: &[T]) -> Result<T, PoissonError> {
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        match self.entries.get(&(a, b)) {
            Some(e) if i != j => Ok(e.eval_generic(x)?.scale(sign)),
            _ => Ok(T::constant(0.0)),
        }
    }

    /// Skew matrix with `m[(i, j)] = π^{ij}(x)`.
    pub fn matrix_at(&self, x: &[f64]) -> Result<DMatrix<f64>, PoissonError> {
        self.check_point(x.len())?;
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (&(i, j), e) in &self.entries {
            let v = e.eval_at(x)?;
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
        Ok(m)
    }

    pub(crate) fn check_point(&self, got: usize) -> Result<(), PoissonError> {
        if got != self.dim() {
            return Err(PoissonError::Dimension { expected: self.dim(), got });
        }
        Ok(())
    }

    pub(crate) fn check_expression(&self, e: &Expression) -> Result<(), PoissonError> {
        if e.coordinates() != self.chart.as_slice() {
            return Err(PoissonError::ChartMismatch);
        }
        Ok(())
    }

    /// `Σ_{i<j} π^{ij} (∂_i f ∂_j g − ∂_j f ∂_i g)` over any scalar type.
    pub fn bracket_generic<T: Scalar>(
        &self,
        f: &Expression,
        g: &Expression,
        x: &[T],
    ) -> Result<T, PoissonError> {
        self.check_point(x.len())?;
        self.check_expression(f)?;
        self.check_expression(g)?;
        let df = f.gradient_generic(x)?;
        let dg = g.gradient_generic(x)?;
        let mut acc = T::constant(0.0);
        for (&(i, j), e) in &self.entries {
            let c = e.eval_generic(x)?;
            acc = acc + c * (df[i].clone() * dg[j].clone() - df[j].clone() * dg[i].clone());
        }
        Ok(acc)
    }
}
