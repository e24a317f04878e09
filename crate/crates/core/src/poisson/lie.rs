use super::{BivectorField, PoissonError};
use crate::expr::{BinaryOp, Expression, Node};

/// Tolerance on the Lie algebra Jacobi sums.
const JACOBI_TOL: f64 = 1e-12;

/// Structure constants `c^k_{ij}` of an `m`-dimensional Lie algebra,
/// `[e_i, e_j] = Σ_k c^k_{ij} e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    // flattened c[k][i][j]
    c: Vec<f64>,
}

impl StructureConstants {
    /// Validates exact antisymmetry in `(i, j)` and the Jacobi identity.
    pub fn new(c: Vec<Vec<Vec<f64>>>) -> Result<Self, PoissonError> {
        let m = c.len();
        let mut flat = Vec::with_capacity(m * m * m);
        for plane in &c {
            if plane.len() != m || plane.iter().any(|row| row.len() != m) {
                return Err(PoissonError::Dimension { expected: m, got: plane.len() });
            }
            flat.extend(plane.iter().flatten().copied());
        }
        let out = Self { dim: m, c: flat };
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    if out.get(k, i, j) != -out.get(k, j, i) {
                        return Err(PoissonError::NotAntisymmetric { k, i, j });
                    }
                }
            }
        }
        if let Some((i, j, k, l, value)) = out.worst_jacobi() {
            if value.abs() > JACOBI_TOL {
                return Err(PoissonError::JacobiViolation { i, j, k, l, value });
            }
        }
        Ok(out)
    }

    /// `so(3)` with `c^k_{ij} = orientation · ε_{ijk}`.
    pub fn so3(orientation: f64) -> Self {
        let mut c = vec![vec![vec![0.0; 3]; 3]; 3];
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[k][i][j] = orientation;
            c[k][j][i] = -orientation;
        }
        Self::new(c).expect("so(3) satisfies Jacobi")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.c[(k * self.dim + i) * self.dim + j]
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.dim)
            .map(|k| (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(k, i, j)).collect()).collect())
            .collect()
    }

    /// `Σ_m (c^m_{ij} c^l_{mk} + c^m_{jk} c^l_{mi} + c^m_{ki} c^l_{mj})`.
    pub fn jacobi_sum(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        (0..self.dim)
            .map(|m| {
                self.get(m, i, j) * self.get(l, m, k)
                    + self.get(m, j, k) * self.get(l, m, i)
                    + self.get(m, k, i) * self.get(l, m, j)
            })
            .sum()
    }

    fn worst_jacobi(&self) -> Option<(usize, usize, usize, usize, f64)> {
        let m = self.dim;
        let mut worst: Option<(usize, usize, usize, usize, f64)> = None;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let v = self.jacobi_sum(i, j, k, l);
                        if worst.is_none_or(|w| v.abs() > w.4.abs()) {
                            worst = Some((i, j, k, l, v));
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Linear bivector `π^{ij}(ξ) = Σ_k c^k_{ij} ξ_k` on the dual coordinates.
pub fn lie_poisson_from_constants(
    c: &StructureConstants,
    coordinates: &[impl AsRef<str>],
) -> Result<BivectorField, PoissonError> {
    let m = c.dim();
    if coordinates.len() != m {
        return Err(PoissonError::Dimension { expected: m, got: coordinates.len() });
    }
    let names: Vec<String> = coordinates.iter().map(|s| s.as_ref().to_string()).collect();
    let mut entries = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let terms: Vec<Node> = (0..m)
                .filter(|&k| c.get(k, i, j) != 0.0)
                .map(|k| {
                    let coef = c.get(k, i, j);
                    if coef == 1.0 {
                        Node::Coord(k)
                    } else {
                        Node::Binary(BinaryOp::Mul, Box::new(Node::Const(coef)), Box::new(Node::Coord(k)))
                    }
                })
                .collect();
            let Some(root) = terms
                .into_iter()
                .reduce(|a, b| Node::Binary(BinaryOp::Add, Box::new(a), Box::new(b)))
            else {
                continue;
            };
            entries.push(((i, j), Expression::from_parts(root, names.clone(), Vec::new())));
        }
    }
    BivectorField::from_entries(&names, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson::{bracket_eval, is_poisson_exact};

    #[test]
    fn abelian_constants_give_zero_bivector() {
        let c = StructureConstants::new(vec![vec![vec![0.0; 2]; 2]; 2]).unwrap();
        let pi = lie_poisson_from_constants(&c, &["a", "b"]).unwrap();
        assert_eq!(pi.entries().count(), 0);
    }

    #[test]
    fn so3_reproduces_cross_product_bracket() {
        let names = ["L1", "L2", "L3"];
        let pi = lie_poisson_from_constants(&StructureConstants::so3(1.0), &names).unwrap();
        let l1 = Expression::coordinate(&names, 0);
        let l2 = Expression::coordinate(&names, 1);
        assert_eq!(bracket_eval(&pi, &l1, &l2, &[1.0, 1.0, 5.0]).unwrap(), 5.0);
        let flipped = lie_poisson_from_constants(&StructureConstants::so3(-1.0), &names).unwrap();
        assert_eq!(bracket_eval(&flipped, &l1, &l2, &[1.0, 1.0, 5.0]).unwrap(), -5.0);
        assert!(is_poisson_exact(&pi).unwrap());
    }

    #[test]
    fn perturbed_constants_violate_jacobi() {
        let mut c = StructureConstants::so3(1.0).to_nested();
        // [e2, e3] = e1 + 0.1 e2 makes the cyclic sum 0.1 e3
        c[1][1][2] = 0.1;
        c[1][2][1] = -0.1;
        let direct = {
            let s = StructureConstants { dim: 3, c: c.iter().flatten().flatten().copied().collect() };
            s.jacobi_sum(0, 1, 2, 2)
        };
        assert!((direct.abs() - 0.1).abs() < 1e-15);
        match StructureConstants::new(c) {
            Err(PoissonError::JacobiViolation { value, .. }) => assert!((value.abs() - 0.1).abs() < 1e-15),
            other => panic!("expected Jacobi violation, got {other:?}"),
        }
    }

    #[test]
    fn non_antisymmetric_constants_are_rejected() {
        let mut c = vec![vec![vec![0.0; 2]; 2]; 2];
        c[0][0][1] = 1.0;
        assert!(matches!(StructureConstants::new(c), Err(PoissonError::NotAntisymmetric { .. })));
    }
}
