//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Floating-point inputs are converted with their exact binary value, so
//! sums, products and partial derivatives never round.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::{BinaryOp, Expression, Node, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolynomialError {
    #[error("'{0}' is not polynomial")]
    NotPolynomial(String),
    #[error("coefficient {0} is not finite")]
    NonFinite(f64),
    #[error("unbound parameter '{0}'")]
    Unbound(String),
}

/// `Σ c_α x^α` over `dimension` coordinates; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    dimension: usize,
    terms: BTreeMap<Vec<u32>, BigRational>,
}

impl Polynomial {
    pub fn zero(dimension: usize) -> Self {
        Self { dimension, terms: BTreeMap::new() }
    }

    pub fn constant(dimension: usize, c: BigRational) -> Self {
        let mut p = Self::zero(dimension);
        p.add_term(vec![0; dimension], c);
        p
    }

    pub fn from_f64(dimension: usize, c: f64) -> Result<Self, PolynomialError> {
        Ok(Self::constant(dimension, exact(c)?))
    }

    pub fn variable(dimension: usize, axis: usize) -> Self {
        assert!(axis < dimension, "axis out of range");
        let mut exps = vec![0; dimension];
        exps[axis] = 1;
        let mut p = Self::zero(dimension);
        p.add_term(exps, BigRational::one());
        p
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &BigRational)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|k| k.iter().sum()).max().unwrap_or(0)
    }

    fn add_term(&mut self, exps: Vec<u32>, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dimension, other.dimension, "dimension mismatch");
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), v.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        Self {
            dimension: self.dimension,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), -v)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        let mut out = Self::zero(self.dimension);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dimension, other.dimension, "dimension mismatch");
        let mut out = Self::zero(self.dimension);
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let exps = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                out.add_term(exps, va * vb);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(self.dimension, BigRational::one());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Exact partial derivative along `axis`.
    pub fn partial(&self, axis: usize) -> Self {
        assert!(axis < self.dimension, "axis out of range");
        let mut out = Self::zero(self.dimension);
        for (k, v) in &self.terms {
            if k[axis] == 0 {
                continue;
            }
            let mut exps = k.clone();
            let power = exps[axis];
            exps[axis] -= 1;
            out.add_term(exps, v * BigRational::from_integer(BigInt::from(power)));
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(k, v)| {
                let c = v.to_f64().unwrap_or(f64::NAN);
                k.iter().zip(x).fold(c, |acc, (e, xi)| acc * xi.powi(*e as i32))
            })
            .sum()
    }

    /// Largest absolute coefficient, as a float.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|v| v.abs().to_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max)
    }

    /// Exact conversion of an expression built from constants, coordinates,
    /// `+ - *`, division by constants and non-negative integer powers.
    pub fn from_expression(e: &Expression) -> Result<Self, PolynomialError> {
        let n = e.dimension();
        let not_poly = |node: &Node| PolynomialError::NotPolynomial(e.render_node(node));
        fn convert(
            e: &Expression,
            node: &Node,
            n: usize,
            not_poly: &dyn Fn(&Node) -> PolynomialError,
        ) -> Result<Polynomial, PolynomialError> {
            Ok(match node {
                Node::Const(c) => Polynomial::from_f64(n, *c)?,
                Node::Coord(i) => Polynomial::variable(n, *i),
                Node::Param(i) => return Err(PolynomialError::Unbound(e.parameters[*i].clone())),
                Node::Unary(UnaryOp::Neg, a) => convert(e, a, n, not_poly)?.neg(),
                Node::Unary(_, _) => return Err(not_poly(node)),
                Node::Binary(op, a, b) => {
                    let pa = convert(e, a, n, not_poly)?;
                    match op {
                        BinaryOp::Add => pa.add(&convert(e, b, n, not_poly)?),
                        BinaryOp::Sub => pa.sub(&convert(e, b, n, not_poly)?),
                        BinaryOp::Mul => pa.mul(&convert(e, b, n, not_poly)?),
                        BinaryOp::Div => {
                            let pb = convert(e, b, n, not_poly)?;
                            match pb.as_constant() {
                                Some(c) if !c.is_zero() => pa.scale(&c.recip()),
                                _ => return Err(not_poly(node)),
                            }
                        }
                        BinaryOp::Pow => {
                            let pb = convert(e, b, n, not_poly)?;
                            let exponent = pb
                                .as_constant()
                                .filter(|c| c.is_integer() && !c.is_negative())
                                .and_then(|c| c.to_integer().to_u32())
                                .ok_or_else(|| not_poly(node))?;
                            pa.pow(exponent)
                        }
                    }
                }
            })
        }
        convert(e, e.root(), n, &not_poly)
    }

    fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (k, v) = self.terms.iter().next()?;
                k.iter().all(|e| *e == 0).then(|| v.clone())
            }
            _ => None,
        }
    }

    /// Human-readable rendering using the given coordinate names.
    pub fn render(&self, names: &[impl AsRef<str>]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (k, v) in self.terms.iter().rev() {
            let mut factors = vec![format!("{v}")];
            for (e, name) in k.iter().zip(names) {
                match e {
                    0 => {}
                    1 => factors.push(name.as_ref().to_string()),
                    _ => factors.push(format!("{}^{e}", name.as_ref())),
                }
            }
            if factors.len() > 1 && factors[0] == "1" {
                factors.remove(0);
            }
            parts.push(factors.join("*"));
        }
        parts.join(" + ")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.dimension).map(|i| format!("x{i}")).collect();
        f.write_str(&self.render(&names))
    }
}

fn exact(c: f64) -> Result<BigRational, PolynomialError> {
    BigRational::from_float(c).ok_or(PolynomialError::NonFinite(c))
}
