//! First-order solvers for concave maximization over the probability simplex.
//!
//! Every formal strategy reduces to one of three programs over the standard
//! simplex `{x : x_i >= 0, sum x_i = 1}`:
//!
//! * plain concave maximization ([`maximize_on_simplex`]), solved by
//!   projected gradient ascent with Barzilai-Borwein trial steps and an
//!   Armijo backtracking line search along the projection arc;
//! * ratio maximization ([`maximize_ratio_on_simplex`]) via Dinkelbach
//!   iterations;
//! * a single convex inequality constraint
//!   ([`maximize_with_scalar_constraint`]) via an exterior quadratic penalty
//!   path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::dot;

/// Armijo sufficient-increase coefficient.
const ARMIJO: f64 = 1e-4;
/// Trial steps are kept inside this band.
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e12;
/// Final residual a constrained solve must reach.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("objective is not finite ({value}) at an accepted iterate")]
    NonFiniteObjective { value: f64 },
    #[error("no portfolio has a positive ratio numerator")]
    DegenerateRatio,
    #[error("constraint residual {residual} exceeds tolerance after the final penalty stage")]
    InfeasibleConstraint { residual: f64 },
    #[error("invalid solver settings: {0}")]
    InvalidSettings(&'static str),
    #[error("problem dimension must be positive")]
    EmptyProblem,
}

/// Iteration budget and line-search parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveSettings {
    pub max_iterations: usize,
    /// Threshold on the projected-gradient stationarity measure.
    pub tolerance: f64,
    /// Backtracking shrink factor in (0, 1).
    pub shrink: f64,
    pub initial_step: f64,
    /// Multiplier applied to the penalty weight between stages (> 1).
    pub penalty_growth: f64,
    pub penalty_stages: usize,
    pub initial_penalty: f64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-8,
            shrink: 0.5,
            initial_step: 1.0,
            penalty_growth: 10.0,
            penalty_stages: 6,
            initial_penalty: 100.0,
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidSettings("max_iterations must be >= 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(SolverError::InvalidSettings("tolerance must be > 0"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(SolverError::InvalidSettings("shrink must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(SolverError::InvalidSettings("initial_step must be > 0"));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(SolverError::InvalidSettings("penalty_growth must be > 1"));
        }
        if self.penalty_stages == 0 || !(self.initial_penalty > 0.0) {
            return Err(SolverError::InvalidSettings(
                "penalty stages and initial penalty must be positive",
            ));
        }
        Ok(())
    }
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `max(0, constraint)` at the solution; zero for unconstrained solves.
    pub residual: f64,
    /// Dinkelbach ratio sequence, or per-stage residuals of a penalty path.
    pub trace: Vec<f64>,
}

/// A differentiable (or super-differentiable) function on `R^n`.
///
/// `value` may return a non-finite number outside the domain (for example a
/// log of non-positive wealth); such trial points are rejected by the line
/// search.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

impl<T: Objective + ?Sized> Objective for &T {
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (**self).gradient(x, grad)
    }
}

/// Adapts a pair of closures into an [`Objective`].
pub struct FnObjective<F, G> {
    value: F,
    gradient: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    pub fn new(value: F, gradient: G) -> Self {
        Self { value, gradient }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &mut [f64]),
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        (self.gradient)(x, grad)
    }
}

/// Euclidean projection onto the standard simplex (sort-and-threshold).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    project_into(v, &mut out, &mut Vec::with_capacity(v.len()));
    out
}

fn project_into(v: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend_from_slice(v);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
}

pub fn barycenter(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Maximizes a concave objective over the `n`-dimensional simplex, starting
/// from the barycenter.
pub fn maximize_on_simplex(
    objective: &dyn Objective,
    n: usize,
    settings: &SolveSettings,
) -> Result<SolveReport, SolverError> {
    if n == 0 {
        return Err(SolverError::EmptyProblem);
    }
    settings.validate()?;
    ascend(objective, barycenter(n), settings)
}

/// Projected gradient ascent from an arbitrary simplex point.
pub fn maximize_from(
    objective: &dyn Objective,
    start: &[f64],
    settings: &SolveSettings,
) -> Result<SolveReport, SolverError> {
    if start.is_empty() {
        return Err(SolverError::EmptyProblem);
    }
    settings.validate()?;
    ascend(objective, project_to_simplex(start), settings)
}

/// Unit-step gradient mapping `||P(x + g) - x||`; zero exactly at KKT points.
fn stationarity(x: &[f64], g: &[f64], buf: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
    let shifted: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + b).collect();
    project_into(&shifted, buf, scratch);
    buf.iter()
        .zip(x)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        .sqrt()
}

fn ascend(
    objective: &dyn Objective,
    mut x: Vec<f64>,
    settings: &SolveSettings,
) -> Result<SolveReport, SolverError> {
    let n = x.len();
    let mut fx = objective.value(&x);
    if !fx.is_finite() {
        return Err(SolverError::NonFiniteObjective { value: fx });
    }
    let mut g = vec![0.0; n];
    objective.gradient(&x, &mut g);
    check_gradient(&g)?;

    let mut trial = vec![0.0; n];
    let mut shifted = vec![0.0; n];
    let mut g_next = vec![0.0; n];
    let mut buf = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);
    let mut step = settings.initial_step;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < settings.max_iterations {
        if stationarity(&x, &g, &mut buf, &mut scratch) < settings.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        // backtracking along the projection arc
        let mut accepted = None;
        let mut t = step;
        while t >= MIN_STEP {
            for i in 0..n {
                shifted[i] = x[i] + t * g[i];
            }
            project_into(&shifted, &mut trial, &mut scratch);
            let increase: f64 = g.iter().zip(trial.iter().zip(&x)).map(|(gi, (y, xi))| gi * (y - xi)).sum();
            if increase <= 0.0 {
                // projection collapsed onto x: nothing left to gain along g
                break;
            }
            let fy = objective.value(&trial);
            if fy.is_finite() && fy >= fx + ARMIJO * increase {
                accepted = Some((t, fy));
                break;
            }
            t *= settings.shrink;
        }
        let Some((t, fy)) = accepted else {
            // Stalled at rounding level; only a genuine near-stationary point
            // counts as converged.
            converged = stationarity(&x, &g, &mut buf, &mut scratch) < settings.tolerance.sqrt();
            break;
        };

        objective.gradient(&trial, &mut g_next);
        check_gradient(&g_next)?;
        // Barzilai-Borwein step for the next trial; for concave objectives
        // s.(g - g_next) >= 0.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = trial[i] - x[i];
            ss += s * s;
            sy += s * (g[i] - g_next[i]);
        }
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-12, MAX_STEP)
        } else {
            (2.0 * t).min(MAX_STEP)
        };

        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_next);
        fx = fy;
    }

    Ok(SolveReport {
        solution: x,
        objective: fx,
        iterations,
        converged,
        residual: 0.0,
        trace: Vec::new(),
    })
}

fn check_gradient(g: &[f64]) -> Result<(), SolverError> {
    if let Some(&bad) = g.iter().find(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteObjective { value: bad });
    }
    Ok(())
}

/// `numerator - t * denominator`, the Dinkelbach subproblem.
struct ParametricRatio<'a> {
    numerator: &'a dyn Objective,
    denominator: &'a dyn Objective,
    t: f64,
}

impl Objective for ParametricRatio<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.numerator.value(x) - self.t * self.denominator.value(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let mut d = vec![0.0; grad.len()];
        self.numerator.gradient(x, grad);
        self.denominator.gradient(x, &mut d);
        for (g, di) in grad.iter_mut().zip(d) {
            *g -= self.t * di;
        }
    }
}

/// Maximizes `numerator / denominator` over the simplex by Dinkelbach
/// iterations, starting from the vertex with the largest numerator.
///
/// The numerator must be affine and the denominator convex and positive
/// wherever the numerator is positive. Fails with
/// [`SolverError::DegenerateRatio`] when no simplex point has a positive
/// numerator.
pub fn maximize_ratio_on_simplex(
    numerator: &dyn Objective,
    denominator: &dyn Objective,
    n: usize,
    settings: &SolveSettings,
) -> Result<SolveReport, SolverError> {
    if n == 0 {
        return Err(SolverError::EmptyProblem);
    }
    settings.validate()?;

    // affine numerator: its maximum over the simplex sits on a vertex
    let mut vertex = vec![0.0; n];
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..n {
        vertex.iter_mut().for_each(|v| *v = 0.0);
        vertex[i] = 1.0;
        let v = numerator.value(&vertex);
        if v > best.1 {
            best = (i, v);
        }
    }
    if !(best.1 > 0.0) {
        return Err(SolverError::DegenerateRatio);
    }
    let mut x = vec![0.0; n];
    x[best.0] = 1.0;
    let den = denominator.value(&x);
    if !(den > 0.0) {
        // riskless positive profit: the ratio is unbounded at this vertex
        return Ok(SolveReport {
            solution: x,
            objective: f64::INFINITY,
            iterations: 0,
            converged: true,
            residual: 0.0,
            trace: vec![f64::INFINITY],
        });
    }
    let mut ratio = best.1 / den;
    let mut trace = vec![ratio];
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..100 {
        let sub = ParametricRatio {
            numerator,
            denominator,
            t: ratio,
        };
        let report = ascend(&sub, x.clone(), settings)?;
        iterations += report.iterations;
        let num = numerator.value(&report.solution);
        let den = denominator.value(&report.solution);
        let next = if den > 0.0 { num / den } else { f64::NEG_INFINITY };
        if !(next > ratio + settings.tolerance * ratio.abs().max(1.0)) {
            converged = true;
            if next > ratio {
                x = report.solution;
                ratio = next;
                trace.push(ratio);
            }
            break;
        }
        x = report.solution;
        ratio = next;
        trace.push(ratio);
    }
    Ok(SolveReport {
        solution: x,
        objective: ratio,
        iterations,
        converged,
        residual: 0.0,
        trace,
    })
}

/// `objective - mu * max(0, constraint)^2`.
struct Penalized<'a> {
    objective: &'a dyn Objective,
    constraint: &'a dyn Objective,
    weight: f64,
}

impl Objective for Penalized<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let c = self.constraint.value(x).max(0.0);
        self.objective.value(x) - self.weight * c * c
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.objective.gradient(x, grad);
        let c = self.constraint.value(x);
        if c > 0.0 {
            let mut dc = vec![0.0; grad.len()];
            self.constraint.gradient(x, &mut dc);
            for (g, d) in grad.iter_mut().zip(dc) {
                *g -= 2.0 * self.weight * c * d;
            }
        }
    }
}

/// Maximizes `objective` subject to `constraint(x) <= 0` on the simplex with
/// an exterior quadratic penalty path (each stage warm-started from the
/// previous one). The report carries the unpenalized objective and the
/// per-stage residuals in `trace`.
pub fn maximize_with_scalar_constraint(
    objective: &dyn Objective,
    constraint: &dyn Objective,
    n: usize,
    settings: &SolveSettings,
) -> Result<SolveReport, SolverError> {
    if n == 0 {
        return Err(SolverError::EmptyProblem);
    }
    maximize_with_scalar_constraint_from(objective, constraint, &barycenter(n), settings)
}

/// [`maximize_with_scalar_constraint`] started from an arbitrary simplex
/// point.
pub fn maximize_with_scalar_constraint_from(
    objective: &dyn Objective,
    constraint: &dyn Objective,
    start: &[f64],
    settings: &SolveSettings,
) -> Result<SolveReport, SolverError> {
    if start.is_empty() {
        return Err(SolverError::EmptyProblem);
    }
    settings.validate()?;
    let mut x = project_to_simplex(start);
    let mut weight = settings.initial_penalty;
    let mut iterations = 0;
    let mut converged = true;
    let mut trace = Vec::with_capacity(settings.penalty_stages);
    for _ in 0..settings.penalty_stages {
        let stage = Penalized {
            objective,
            constraint,
            weight,
        };
        let report = ascend(&stage, x, settings)?;
        iterations += report.iterations;
        converged = report.converged;
        x = report.solution;
        trace.push(constraint.value(&x).max(0.0));
        weight *= settings.penalty_growth;
    }
    let residual = constraint.value(&x).max(0.0);
    if !(residual <= FEASIBILITY_TOLERANCE) {
        return Err(SolverError::InfeasibleConstraint { residual });
    }
    let value = objective.value(&x);
    if !value.is_finite() {
        return Err(SolverError::NonFiniteObjective { value });
    }
    Ok(SolveReport {
        solution: x,
        objective: value,
        iterations,
        converged,
        residual,
        trace,
    })
}

/// Largest relative deviation between central finite differences and the
/// analytic gradient, `max_i |fd_i - g_i| / max(1, |g_i|)`.
pub fn finite_diff_check(objective: &dyn Objective, point: &[f64], step: f64) -> f64 {
    let n = point.len();
    let mut grad = vec![0.0; n];
    objective.gradient(point, &mut grad);
    let mut probe = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        probe[i] = point[i] + step;
        let up = objective.value(&probe);
        probe[i] = point[i] - step;
        let down = objective.value(&probe);
        probe[i] = point[i];
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
    }
    worst
}

/// Linear objective `c . x`.
pub struct Linear(pub Vec<f64>);

impl Objective for Linear {
    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.0, x)
    }

    fn gradient(&self, _x: &[f64], grad: &mut [f64]) {
        grad.copy_from_slice(&self.0);
    }
}
