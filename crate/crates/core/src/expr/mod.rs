//! Arithmetic expressions over named chart coordinates and parameters.
//!
//! Expressions are parsed once, then evaluated over any [`Scalar`]: plain
//! `f64` for values, [`Dual`] for exact forward-mode gradients, nested duals
//! for second derivatives. [`Polynomial`] is the exact-coefficient companion
//! used where identities must hold symbolically rather than to round-off.

mod parse;
mod poly;
mod scalar;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub use poly::{Polynomial, PolynomialError};
pub use scalar::{Dual, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unbound name '{0}'")]
    Unbound(String),
    #[error("domain error in '{node}': {reason}")]
    Domain { node: String, reason: String },
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid name list: {0}")]
    Names(String),
    #[error("expressions live on different charts")]
    ChartMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Arctan,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "arctan" | "atan" => UnaryOp::Arctan,
            "exp" => UnaryOp::Exp,
            "log" | "ln" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Arctan => "arctan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Index into the expression's coordinate list.
    Coord(usize),
    /// Index into the expression's parameter list.
    Param(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

impl Node {
    fn visit(&self, f: &mut impl FnMut(&Node)) {
        f(self);
        match self {
            Node::Unary(_, a) => a.visit(f),
            Node::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    fn has_coordinates(&self) -> bool {
        let mut found = false;
        self.visit(&mut |n| found |= matches!(n, Node::Coord(_)));
        found
    }
}

/// A parsed expression together with the chart it is written on.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    coordinates: Vec<String>,
    parameters: Vec<String>,
    // coordinates the tree actually reads; gradient entries elsewhere are zero
    used: Vec<bool>,
}

/// Coordinates plus parameter bindings at which an expression is evaluated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Point {
    pub coords: Vec<f64>,
    pub params: BTreeMap<String, f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords, params: BTreeMap::new() }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }
}

fn check_names(coordinates: &[String], parameters: &[String]) -> Result<(), ExprError> {
    let mut seen = BTreeSet::new();
    for name in coordinates.iter().chain(parameters) {
        let valid = name
            .chars()
            .next()
            .is_some_and(|c| c.is_alphabetic() || c == '_')
            && name.chars().all(|c| c.is_alphanumeric() || c == '_');
        if !valid {
            return Err(ExprError::Names(format!("'{name}' is not an identifier")));
        }
        if UnaryOp::from_name(name).is_some() {
            return Err(ExprError::Names(format!("'{name}' is a reserved function name")));
        }
        if !seen.insert(name.as_str()) {
            return Err(ExprError::Names(format!("'{name}' appears more than once")));
        }
    }
    Ok(())
}

fn to_owned(names: &[impl AsRef<str>]) -> Vec<String> {
    names.iter().map(|s| s.as_ref().to_string()).collect()
}

impl Expression {
    /// Parses `text` over the ordered chart `coordinates` and the named
    /// `parameters`. Unknown identifiers are rejected.
    pub fn parse(
        text: &str,
        coordinates: &[impl AsRef<str>],
        parameters: &[impl AsRef<str>],
    ) -> Result<Self, ExprError> {
        let coordinates = to_owned(coordinates);
        let parameters = to_owned(parameters);
        check_names(&coordinates, &parameters)?;
        let root = parse::Parser::parse(text, &coordinates, &parameters)?;
        Ok(Self::from_parts(root, coordinates, parameters))
    }

    /// Builds an expression from an already constructed tree.
    pub fn from_parts(root: Node, coordinates: Vec<String>, parameters: Vec<String>) -> Self {
        let mut used = vec![false; coordinates.len()];
        root.visit(&mut |n| {
            if let Node::Coord(i) = n {
                used[*i] = true;
            }
        });
        Self { root, coordinates, parameters, used }
    }

    pub fn constant(coordinates: &[impl AsRef<str>], value: f64) -> Self {
        Self::from_parts(Node::Const(value), to_owned(coordinates), Vec::new())
    }

    pub fn coordinate(coordinates: &[impl AsRef<str>], index: usize) -> Self {
        assert!(index < coordinates.len(), "coordinate index out of range");
        Self::from_parts(Node::Coord(index), to_owned(coordinates), Vec::new())
    }

    /// Combines two parameter-free expressions on the same chart.
    pub fn combine(op: BinaryOp, lhs: &Expression, rhs: &Expression) -> Result<Self, ExprError> {
        if lhs.coordinates != rhs.coordinates {
            return Err(ExprError::ChartMismatch);
        }
        if !lhs.parameters.is_empty() || !rhs.parameters.is_empty() {
            return Err(ExprError::Unbound(
                lhs.parameters.iter().chain(&rhs.parameters).next().cloned().unwrap_or_default(),
            ));
        }
        let root = Node::Binary(op, Box::new(lhs.root.clone()), Box::new(rhs.root.clone()));
        Ok(Self::from_parts(root, lhs.coordinates.clone(), Vec::new()))
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// The chart this expression is written on, in gradient order.
    pub fn coordinates(&self) -> &[String] {
        &self.coordinates
    }

    pub fn parameters(&self) -> &[String] {
        &self.parameters
    }

    /// Chart coordinates that actually occur in the tree, in chart order.
    pub fn free_coordinates(&self) -> Vec<&str> {
        self.coordinates
            .iter()
            .zip(&self.used)
            .filter(|(_, u)| **u)
            .map(|(c, _)| c.as_str())
            .collect()
    }

    pub fn free_parameters(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.root.visit(&mut |n| {
            if let Node::Param(i) = n {
                out.insert(self.parameters[*i].as_str());
            }
        });
        out
    }

    pub fn dimension(&self) -> usize {
        self.coordinates.len()
    }

    /// Replaces every parameter by its bound value. Missing bindings are an
    /// error; extra bindings are ignored.
    pub fn bind(&self, params: &BTreeMap<String, f64>) -> Result<Self, ExprError> {
        let values = self.resolve_params(params)?;
        fn subst(node: &Node, values: &[f64]) -> Node {
            match node {
                Node::Param(i) => Node::Const(values[*i]),
                Node::Unary(op, a) => Node::Unary(*op, Box::new(subst(a, values))),
                Node::Binary(op, a, b) => {
                    Node::Binary(*op, Box::new(subst(a, values)), Box::new(subst(b, values)))
                }
                other => other.clone(),
            }
        }
        Ok(Self::from_parts(subst(&self.root, &values), self.coordinates.clone(), Vec::new()))
    }

    /// Same tree, re-expressed on a wider chart containing all of this
    /// expression's coordinates.
    pub fn rechart(&self, coordinates: &[impl AsRef<str>]) -> Result<Self, ExprError> {
        let target = to_owned(coordinates);
        let map: Vec<usize> = self
            .coordinates
            .iter()
            .map(|c| target.iter().position(|t| t == c).ok_or_else(|| ExprError::Unbound(c.clone())))
            .collect::<Result<_, _>>()?;
        fn remap(node: &Node, map: &[usize]) -> Node {
            match node {
                Node::Coord(i) => Node::Coord(map[*i]),
                Node::Unary(op, a) => Node::Unary(*op, Box::new(remap(a, map))),
                Node::Binary(op, a, b) => {
                    Node::Binary(*op, Box::new(remap(a, map)), Box::new(remap(b, map)))
                }
                other => other.clone(),
            }
        }
        Ok(Self::from_parts(remap(&self.root, &map), target, self.parameters.clone()))
    }

    fn resolve_params(&self, params: &BTreeMap<String, f64>) -> Result<Vec<f64>, ExprError> {
        self.parameters
            .iter()
            .map(|p| params.get(p).copied().ok_or_else(|| ExprError::Unbound(p.clone())))
            .collect()
    }

    fn check_dim(&self, got: usize) -> Result<(), ExprError> {
        if got != self.coordinates.len() {
            return Err(ExprError::Dimension { expected: self.coordinates.len(), got });
        }
        Ok(())
    }

    pub fn eval(&self, point: &Point) -> Result<f64, ExprError> {
        self.check_dim(point.coords.len())?;
        let params = self.resolve_params(&point.params)?;
        self.eval_node(&self.root, &point.coords, &params)
    }

    /// Evaluates a parameter-free expression.
    pub fn eval_at(&self, coords: &[f64]) -> Result<f64, ExprError> {
        self.eval_generic(coords)
    }

    /// Evaluates a parameter-free expression over any scalar type.
    pub fn eval_generic<T: Scalar>(&self, coords: &[T]) -> Result<T, ExprError> {
        self.check_dim(coords.len())?;
        if let Some(p) = self.parameters.first() {
            if !self.free_parameters().is_empty() {
                return Err(ExprError::Unbound(p.clone()));
            }
        }
        self.eval_node(&self.root, coords, &[])
    }

    /// Exact forward-mode gradient, ordered by the chart's coordinates.
    pub fn gradient(&self, point: &Point) -> Result<Vec<f64>, ExprError> {
        self.check_dim(point.coords.len())?;
        let params = self.resolve_params(&point.params)?;
        self.gradient_with(&point.coords, &params)
    }

    /// Gradient of a parameter-free expression.
    pub fn gradient_at(&self, coords: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.gradient_generic(coords)
    }

    pub fn gradient_generic<T: Scalar>(&self, coords: &[T]) -> Result<Vec<T>, ExprError> {
        self.check_dim(coords.len())?;
        if !self.free_parameters().is_empty() {
            return Err(ExprError::Unbound(self.parameters[0].clone()));
        }
        self.gradient_with(coords, &[])
    }

    fn gradient_with<T: Scalar>(&self, coords: &[T], params: &[f64]) -> Result<Vec<T>, ExprError> {
        let mut seeded: Vec<Dual<T>> = coords.iter().cloned().map(Dual::lift).collect();
        let mut grad = Vec::with_capacity(coords.len());
        let mut evaluated = false;
        for k in 0..coords.len() {
            if !self.used[k] {
                grad.push(T::constant(0.0));
                continue;
            }
            seeded[k] = Dual::variable(coords[k].clone());
            let d = self.eval_node(&self.root, &seeded, params)?;
            seeded[k] = Dual::lift(coords[k].clone());
            grad.push(d.eps);
            evaluated = true;
        }
        if !evaluated {
            // still surface domain errors of a coordinate-free expression
            self.eval_node(&self.root, coords, params)?;
        }
        Ok(grad)
    }

    fn domain_error(&self, node: &Node, reason: impl Into<String>) -> ExprError {
        ExprError::Domain { node: self.render_node(node), reason: reason.into() }
    }

    fn eval_node<T: Scalar>(&self, node: &Node, x: &[T], params: &[f64]) -> Result<T, ExprError> {
        let value = match node {
            Node::Const(c) => T::constant(*c),
            Node::Coord(i) => x[*i].clone(),
            Node::Param(i) => T::constant(
                *params.get(*i).ok_or_else(|| ExprError::Unbound(self.parameters[*i].clone()))?,
            ),
            Node::Unary(op, arg) => {
                let a = self.eval_node(arg, x, params)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Tan => a.tan(),
                    UnaryOp::Arctan => a.atan(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Log => {
                        if a.value() <= 0.0 {
                            return Err(self.domain_error(node, "logarithm of a non-positive value"));
                        }
                        a.ln()
                    }
                    UnaryOp::Sqrt => {
                        if a.value() < 0.0 {
                            return Err(self.domain_error(node, "square root of a negative value"));
                        }
                        a.sqrt()
                    }
                }
            }
            Node::Binary(op, lhs, rhs) => {
                if *op == BinaryOp::Pow && !rhs.has_coordinates() {
                    let base = self.eval_node(lhs, x, params)?;
                    let e = self.eval_node::<f64>(rhs, &[], params)?;
                    if base.value() < 0.0 && e.fract() != 0.0 {
                        return Err(self.domain_error(node, "fractional power of a negative value"));
                    }
                    base.powf(e)
                } else {
                    let a = self.eval_node(lhs, x, params)?;
                    let b = self.eval_node(rhs, x, params)?;
                    match op {
                        BinaryOp::Add => a + b,
                        BinaryOp::Sub => a - b,
                        BinaryOp::Mul => a * b,
                        BinaryOp::Div => {
                            if b.value() == 0.0 {
                                return Err(self.domain_error(node, "division by zero"));
                            }
                            a / b
                        }
                        BinaryOp::Pow => {
                            if a.value() <= 0.0 {
                                return Err(self.domain_error(
                                    node,
                                    "variable exponent requires a positive base",
                                ));
                            }
                            (b * a.ln()).exp()
                        }
                    }
                }
            }
        };
        if !value.all_finite() {
            return Err(self.domain_error(node, "non-finite result"));
        }
        Ok(value)
    }

    /// Fully parenthesised text that re-parses to the same tree.
    pub fn render(&self) -> String {
        self.render_node(&self.root)
    }

    fn render_node(&self, node: &Node) -> String {
        match node {
            Node::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                format!("(-{:?})", -c)
            }
            Node::Const(c) => format!("{c:?}"),
            Node::Coord(i) => self.coordinates[*i].clone(),
            Node::Param(i) => self.parameters[*i].clone(),
            Node::Unary(UnaryOp::Neg, a) => format!("(-{})", self.render_node(a)),
            Node::Unary(op, a) => format!("{}({})", op.name(), self.render_node(a)),
            Node::Binary(op, a, b) => {
                format!("({} {} {})", self.render_node(a), op.symbol(), self.render_node(b))
            }
        }
    }

    /// Splits the tree at top-level `+`/`-` into signed summands.
    pub fn summands(&self) -> Vec<Expression> {
        fn collect(node: &Node, negate: bool, out: &mut Vec<Node>) {
            match node {
                Node::Binary(BinaryOp::Add, a, b) => {
                    collect(a, negate, out);
                    collect(b, negate, out);
                }
                Node::Binary(BinaryOp::Sub, a, b) => {
                    collect(a, negate, out);
                    collect(b, !negate, out);
                }
                Node::Unary(UnaryOp::Neg, a) => collect(a, !negate, out),
                other if negate => out.push(Node::Unary(UnaryOp::Neg, Box::new(other.clone()))),
                other => out.push(other.clone()),
            }
        }
        let mut nodes = Vec::new();
        collect(&self.root, false, &mut nodes);
        nodes
            .into_iter()
            .map(|n| Self::from_parts(n, self.coordinates.clone(), self.parameters.clone()))
            .collect()
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NONE: [&str; 0] = [];

    fn xyz() -> [&'static str; 3] {
        ["x", "y", "z"]
    }

    #[test]
    fn parses_minimal_product() {
        let e = Expression::parse("q1*p1", &["q1", "p1"], &NONE).unwrap();
        assert_eq!(
            e.root(),
            &Node::Binary(BinaryOp::Mul, Box::new(Node::Coord(0)), Box::new(Node::Coord(1)))
        );
        assert_eq!(e.free_coordinates(), vec!["q1", "p1"]);
    }

    #[test]
    fn harmonic_energy_with_parameter() {
        let e = Expression::parse("p^2/2 + w^2*q^2/2", &["q", "p"], &["w"]).unwrap();
        let pt = Point::new(vec![1.0, 0.0]).with_param("w", 2.0);
        assert_eq!(e.eval(&pt).unwrap(), 2.0);
        assert_eq!(e.free_parameters().into_iter().collect::<Vec<_>>(), vec!["w"]);
    }

    #[test]
    fn unbalanced_paren_reports_end_offset() {
        let err = Expression::parse("sin(theta", &["theta"], &NONE).unwrap_err();
        assert_eq!(err, ExprError::Syntax { offset: 9, message: "expected ')'".into() });
    }

    #[test]
    fn unknown_identifier_is_named() {
        let err = Expression::parse("x + k", &["x"], &NONE).unwrap_err();
        assert_eq!(err, ExprError::UnknownIdentifier { name: "k".into(), offset: 4 });
    }

    #[test]
    fn precedence_and_associativity() {
        let e = |s: &str| Expression::parse(s, &["x"], &NONE).unwrap().eval_at(&[3.0]).unwrap();
        assert_eq!(e("-x^2"), -9.0);
        assert_eq!(e("2^3^2"), 512.0);
        assert_eq!(e("x - 1 - 1"), 1.0);
        assert_eq!(e("12 / x / 2"), 2.0);
        assert_eq!(e("1 + 2 * x"), 7.0);
        assert_eq!(e("2^-1"), 0.5);
        assert_eq!(e("-x*2"), -6.0);
    }

    #[test]
    fn evaluates_simple_cases() {
        let e = Expression::parse("4*x*y + z^2", &xyz(), &NONE).unwrap();
        assert_eq!(e.eval_at(&[1.0, 2.0, 3.0]).unwrap(), 17.0);
        let c = Expression::parse("cos(theta)", &["theta"], &NONE).unwrap();
        assert_eq!(c.eval_at(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors_are_reported() {
        let e = Expression::parse("log(x)", &["x"], &NONE).unwrap();
        assert!(matches!(e.eval_at(&[0.0]), Err(ExprError::Domain { node, .. }) if node == "log(x)"));
        let d = Expression::parse("1/x", &["x"], &NONE).unwrap();
        assert!(matches!(d.eval_at(&[0.0]), Err(ExprError::Domain { .. })));
        let s = Expression::parse("sqrt(x)", &["x"], &NONE).unwrap();
        assert_eq!(s.eval_at(&[0.0]).unwrap(), 0.0);
        assert!(matches!(s.gradient_at(&[0.0]), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn unbound_parameter_is_reported() {
        let e = Expression::parse("w*q", &["q"], &["w"]).unwrap();
        assert_eq!(e.eval(&Point::new(vec![1.0])), Err(ExprError::Unbound("w".into())));
    }

    #[test]
    fn gradients_of_simple_forms() {
        let e = Expression::parse("x*y", &["x", "y"], &NONE).unwrap();
        assert_eq!(e.gradient_at(&[2.0, 3.0]).unwrap(), vec![3.0, 2.0]);
        let e = Expression::parse("4*x*y + z^2", &xyz(), &NONE).unwrap();
        assert_eq!(e.gradient_at(&[1.0, 2.0, 3.0]).unwrap(), vec![8.0, 4.0, 6.0]);
    }

    #[test]
    fn render_round_trip_keeps_tree() {
        let e = Expression::parse("-x^2 - 3*sin(y)/(1+z) + 2^-x - 1e-7", &xyz(), &NONE).unwrap();
        let again = Expression::parse(&e.render(), &xyz(), &NONE).unwrap();
        assert_eq!(e.root(), again.root());
    }

    #[test]
    fn rejects_reserved_and_duplicate_names() {
        assert!(Expression::parse("x", &["x", "x"], &NONE).is_err());
        assert!(Expression::parse("x", &["x"], &["sin"]).is_err());
    }

    #[test]
    fn summands_split_signs() {
        let e = Expression::parse("a - (b - c) + -d", &["a", "b", "c", "d"], &NONE).unwrap();
        let parts: Vec<f64> =
            e.summands().iter().map(|s| s.eval_at(&[1.0, 2.0, 3.0, 4.0]).unwrap()).collect();
        assert_eq!(parts, vec![1.0, -2.0, 3.0, -4.0]);
    }
}
