//! Fixed-step time integration of `ẋ = X_H(x)` with invariant tracing.
//!
//! `rk4` and `implicit_midpoint` work on any [`PoissonSystem`];
//! `symplectic_euler` and `verlet` need a canonical chart and a separable
//! Hamiltonian `H = T(p) + V(q)`.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poisson::{PoissonError, PoissonSystem};

pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error("method requires canonical separable structure")]
    NotSeparable,
    #[error("implicit solve did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("invalid stepper configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    SymplecticEuler,
    Verlet,
    ImplicitMidpoint,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::Rk4, Method::SymplecticEuler, Method::Verlet, Method::ImplicitMidpoint];

    pub fn id(self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::SymplecticEuler => "symplectic_euler",
            Method::Verlet => "verlet",
            Method::ImplicitMidpoint => "implicit_midpoint",
        }
    }

    /// Nominal global order of accuracy.
    pub fn order(self) -> u32 {
        match self {
            Method::Rk4 => 4,
            Method::SymplecticEuler => 1,
            Method::Verlet | Method::ImplicitMidpoint => 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = IntegrateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| IntegrateError::InvalidConfig(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub method: Method,
    pub h: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl StepperConfig {
    pub fn new(method: Method, h: f64) -> Self {
        Self { method, h, tol: DEFAULT_SOLVE_TOL, max_iter: DEFAULT_MAX_ITER }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(IntegrateError::InvalidConfig(format!("step must be positive, got {}", self.h)));
        }
        if !(self.tol > 0.0) {
            return Err(IntegrateError::InvalidConfig("solve tolerance must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(IntegrateError::InvalidConfig("max iterations must be at least 1".into()));
        }
        Ok(())
    }
}

fn axpy(x: &[f64], a: f64, v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(xi, vi)| xi + a * vi).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Classical four-stage Runge-Kutta step on `X_H`.
pub fn rk4_step(sys: &PoissonSystem, x: &[f64], h: f64) -> Result<Vec<f64>, IntegrateError> {
    let k1 = sys.hamiltonian_vf(x)?;
    let k2 = sys.hamiltonian_vf(&axpy(x, h / 2.0, &k1))?;
    let k3 = sys.hamiltonian_vf(&axpy(x, h / 2.0, &k2))?;
    let k4 = sys.hamiltonian_vf(&axpy(x, h, &k3))?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn separable_half(sys: &PoissonSystem) -> Result<usize, IntegrateError> {
    match sys.bivector().canonical_half_dim() {
        Some(n) if sys.is_canonical_separable() => Ok(n),
        _ => Err(IntegrateError::NotSeparable),
    }
}

fn grad_h(sys: &PoissonSystem, x: &[f64]) -> Result<Vec<f64>, IntegrateError> {
    Ok(sys.hamiltonian().gradient_at(x).map_err(PoissonError::from)?)
}

/// `p' = p − h ∂V/∂q(q)`, then `q' = q + h ∂T/∂p(p')`.
pub fn symplectic_euler_step(
    sys: &PoissonSystem,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>, IntegrateError> {
    let n = separable_half(sys)?;
    let mut y = x.to_vec();
    let g = grad_h(sys, &y)?;
    for i in 0..n {
        y[n + i] -= h * g[i];
    }
    let g = grad_h(sys, &y)?;
    for i in 0..n {
        y[i] += h * g[n + i];
    }
    Ok(y)
}

/// Half kick, drift, half kick.
pub fn verlet_step(sys: &PoissonSystem, x: &[f64], h: f64) -> Result<Vec<f64>, IntegrateError> {
    let n = separable_half(sys)?;
    let mut y = x.to_vec();
    let g = grad_h(sys, &y)?;
    for i in 0..n {
        y[n + i] -= 0.5 * h * g[i];
    }
    let g = grad_h(sys, &y)?;
    for i in 0..n {
        y[i] += h * g[n + i];
    }
    let g = grad_h(sys, &y)?;
    for i in 0..n {
        y[n + i] -= 0.5 * h * g[i];
    }
    Ok(y)
}

/// Solves `x' = x + h X_H((x + x')/2)`.
///
/// Fixed-point iteration first; once `max_iter / 2` iterations have failed
/// to contract, switches to Newton with a finite-difference Jacobian for the
/// remaining budget. Converged when the residual is at most
/// `tol · max(1, ‖x‖∞)`.
pub fn implicit_midpoint_step(
    sys: &PoissonSystem,
    x: &[f64],
    h: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, IntegrateError> {
    let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let target = tol * scale;
    let midpoint_map = |y: &[f64]| -> Result<Vec<f64>, IntegrateError> {
        let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
        Ok(axpy(x, h, &sys.hamiltonian_vf(&mid)?))
    };

    let mut y = axpy(x, h, &sys.hamiltonian_vf(x)?);
    let mut previous = f64::INFINITY;
    let mut stalled = 0;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let next = match midpoint_map(&y) {
            Ok(v) => v,
            // a wild iterate can leave the domain; let Newton try instead
            Err(IntegrateError::Poisson(PoissonError::Expr(_))) if iterations > 1 => break,
            Err(e) => return Err(e),
        };
        residual = max_abs_diff(&next, &y);
        y = next;
        if residual <= target {
            return Ok(y);
        }
        if residual >= previous {
            stalled += 1;
            if stalled >= (max_iter / 2).max(1) {
                break;
            }
        }
        previous = residual;
    }

    let diverged = |e: IntegrateError, iterations: usize, residual: f64| match e {
        IntegrateError::Poisson(PoissonError::Expr(_)) => IntegrateError::NonConvergence { iterations, residual },
        other => other,
    };
    while iterations < max_iter {
        iterations += 1;
        let g: Vec<f64> = {
            let m = midpoint_map(&y).map_err(|e| diverged(e, iterations, residual))?;
            y.iter().zip(&m).map(|(a, b)| a - b).collect()
        };
        residual = g.iter().fold(0.0, |m, v| m.max(v.abs()));
        if residual <= target {
            return Ok(y);
        }
        let n = y.len();
        let mut jac = DMatrix::<f64>::identity(n, n);
        for k in 0..n {
            let step = 1e-7 * y[k].abs().max(1.0);
            let mut plus = y.clone();
            let mut minus = y.clone();
            plus[k] += step;
            minus[k] -= step;
            let mp = midpoint_map(&plus).map_err(|e| diverged(e, iterations, residual))?;
            let mm = midpoint_map(&minus).map_err(|e| diverged(e, iterations, residual))?;
            for i in 0..n {
                jac[(i, k)] -= (mp[i] - mm[i]) / (2.0 * step);
            }
        }
        let delta = jac
            .lu()
            .solve(&DVector::from_vec(g))
            .ok_or(IntegrateError::NonConvergence { iterations, residual })?;
        for i in 0..n {
            y[i] -= delta[i];
        }
    }
    Err(IntegrateError::NonConvergence { iterations, residual })
}

pub fn step(sys: &PoissonSystem, x: &[f64], cfg: &StepperConfig) -> Result<Vec<f64>, IntegrateError> {
    match cfg.method {
        Method::Rk4 => rk4_step(sys, x, cfg.h),
        Method::SymplecticEuler => symplectic_euler_step(sys, x, cfg.h),
        Method::Verlet => verlet_step(sys, x, cfg.h),
        Method::ImplicitMidpoint => implicit_midpoint_step(sys, x, cfg.h, cfg.tol, cfg.max_iter),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub name: String,
    pub values: Vec<f64>,
}

/// Uniform time grid, states and traced invariant values.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub chart: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub traces: Vec<Trace>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    pub fn trace(&self, name: &str) -> Option<&[f64]> {
        self.traces.iter().find(|t| t.name == name).map(|t| t.values.as_slice())
    }

    /// Column `index` of the state sequence.
    pub fn coordinate(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[index]).collect()
    }

    /// `t,<coordinates>,<invariants>` with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<&str> = std::iter::once("t")
            .chain(self.chart.iter().map(String::as_str))
            .chain(self.traces.iter().map(|t| t.name.as_str()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (k, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            let row: Vec<String> = std::iter::once(*t)
                .chain(x.iter().copied())
                .chain(self.traces.iter().map(|tr| tr.values[k]))
                .map(format_value)
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Round-trip formatting with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// A failed run together with everything computed before the failure.
#[derive(Debug, Clone, Error)]
#[error("integration aborted at step {step}: {error}")]
pub struct IntegrationFailure {
    pub step: usize,
    pub error: IntegrateError,
    pub partial: Box<Trajectory>,
}

/// Applies the configured stepper `n_steps` times from `x0`, evaluating each
/// named invariant at every state. Any state at which the Hamiltonian is
/// undefined or which lies on the singular locus aborts the run.
pub fn integrate(
    sys: &PoissonSystem,
    x0: &[f64],
    cfg: &StepperConfig,
    n_steps: usize,
    traced: &[String],
) -> Result<Trajectory, IntegrationFailure> {
    let mut traj = Trajectory {
        chart: sys.chart().to_vec(),
        times: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
        traces: traced.iter().map(|n| Trace { name: n.clone(), values: Vec::new() }).collect(),
    };
    let fail = |step: usize, error: IntegrateError, traj: Trajectory| IntegrationFailure {
        step,
        error,
        partial: Box::new(traj),
    };
    let setup = (|| {
        cfg.validate()?;
        if matches!(cfg.method, Method::SymplecticEuler | Method::Verlet) {
            separable_half(sys)?;
        }
        let exprs = traced
            .iter()
            .map(|n| sys.invariant(n).cloned())
            .collect::<Result<Vec<_>, _>>()?;
        sys.check_admissible(x0)?;
        Ok::<_, IntegrateError>(exprs)
    })();
    let exprs = match setup {
        Ok(e) => e,
        Err(e) => return Err(fail(0, e, traj)),
    };

    let record = |traj: &mut Trajectory, k: usize, x: Vec<f64>| -> Result<(), IntegrateError> {
        let values = exprs
            .iter()
            .map(|e| e.eval_at(&x).map_err(PoissonError::from))
            .collect::<Result<Vec<_>, _>>()?;
        traj.times.push(k as f64 * cfg.h);
        traj.states.push(x);
        for (trace, v) in traj.traces.iter_mut().zip(values) {
            trace.values.push(v);
        }
        Ok(())
    };

    if let Err(e) = record(&mut traj, 0, x0.to_vec()) {
        return Err(fail(0, e, traj));
    }
    let mut x = x0.to_vec();
    for k in 1..=n_steps {
        let next = step(sys, &x, cfg)
            .and_then(|y| sys.check_admissible(&y).map(|_| y).map_err(IntegrateError::from));
        match next.and_then(|y| record(&mut traj, k, y.clone()).map(|_| y)) {
            Ok(y) => x = y,
            Err(e) => return Err(fail(k, e, traj)),
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub max_abs_drift: f64,
    pub final_drift: f64,
    /// `I(x_k) − I(x_0)` for every recorded state.
    pub series: Vec<f64>,
}

pub fn invariant_drift(traj: &Trajectory, name: &str) -> Result<Drift, PoissonError> {
    let values = traj.trace(name).ok_or_else(|| PoissonError::UnknownInvariant(name.to_string()))?;
    let first = values.first().copied().unwrap_or(0.0);
    let series: Vec<f64> = values.iter().map(|v| v - first).collect();
    Ok(Drift {
        max_abs_drift: series.iter().fold(0.0, |m, v| m.max(v.abs())),
        final_drift: series.last().copied().unwrap_or(0.0),
        series,
    })
}
