//! Risk management: fractional stakes, bet caps, drawdown-constrained Kelly
//! and Kelly under a box ambiguity set.

use super::formal::{cash_start, kelly};
use super::objectives::{DrawdownConstraint, LogGrowth};
use super::{Portfolio, StrategyError};
use crate::market::{dot, OddsMatrix};
use crate::solver::{maximize_from, maximize_with_scalar_constraint_from, Objective, SolveSettings};

/// Constraint value treated as satisfied after the feasibility repair.
const REPAIR_TOLERANCE: f64 = 1e-12;
/// Log-wealth values closer than this share the worst-case budget.
const TIE_TOLERANCE: f64 = 1e-12;
/// Smoothing weights of the robust objective, from coarse to fine.
const SMOOTHING_PATH: [f64; 8] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

/// Scales the risky part by `omega`; cash takes the rest.
pub fn apply_fraction(portfolio: &Portfolio, omega: f64) -> Portfolio {
    debug_assert!((0.0..=1.0).contains(&omega));
    let omega = omega.clamp(0.0, 1.0);
    let n = portfolio.len();
    let mut f: Vec<f64> = portfolio.risky().iter().map(|x| x * omega).collect();
    let cash = if f.iter().all(|x| *x == 0.0) {
        1.0
    } else {
        portfolio.cash() + (1.0 - omega) * portfolio.risky_mass()
    };
    f.push(cash);
    debug_assert_eq!(f.len(), n);
    Portfolio(f)
}

/// Caps every risky stake at `m`; the excess goes to cash.
pub fn apply_max_limit(portfolio: &Portfolio, m: f64) -> Portfolio {
    debug_assert!((0.0..=1.0).contains(&m));
    let m = m.clamp(0.0, 1.0);
    let mut excess = 0.0;
    let mut f: Vec<f64> = portfolio
        .risky()
        .iter()
        .map(|&x| {
            let capped = x.min(m);
            excess += x - capped;
            capped
        })
        .collect();
    let cash = if f.iter().all(|x| *x == 0.0) {
        1.0
    } else {
        portfolio.cash() + excess
    };
    f.push(cash);
    Portfolio(f)
}

/// Exponent `lambda = log(beta) / log(alpha)` of the drawdown constraint.
pub fn drawdown_exponent(alpha: f64, beta: f64) -> f64 {
    beta.ln() / alpha.ln()
}

/// Kelly subject to `E[(O . f)^(-lambda)] <= 1`, which bounds the chance of
/// wealth ever dropping below `alpha` by `beta`.
pub fn kelly_drawdown(
    matrix: &OddsMatrix,
    alpha: f64,
    beta: f64,
    settings: &SolveSettings,
) -> Result<Portfolio, StrategyError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StrategyError::InvalidParameter {
            name: "alpha",
            value: alpha,
        });
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(StrategyError::InvalidParameter {
            name: "beta",
            value: beta,
        });
    }
    let constraint = DrawdownConstraint {
        matrix,
        lambda: drawdown_exponent(alpha, beta),
    };
    let start = cash_start(matrix);
    let report = maximize_with_scalar_constraint_from(
        &LogGrowth::new(matrix),
        &constraint,
        &start,
        settings,
    )?;
    let mut f = report.solution;
    if constraint.value(&f) > REPAIR_TOLERANCE {
        // the constraint is convex and holds at cash: pull back along the
        // segment towards cash until it holds
        let point = |t: f64| -> Vec<f64> {
            f.iter()
                .zip(&start)
                .map(|(x, c)| c + t * (x - c))
                .collect()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if constraint.value(&point(mid)) <= REPAIR_TOLERANCE {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        f = point(lo);
    }
    Ok(Portfolio::from_solution(f))
}

fn ambiguity_bounds(nominal: &[f64], eta: f64) -> Result<(Vec<f64>, Vec<f64>), StrategyError> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(StrategyError::InvalidParameter {
            name: "eta",
            value: eta,
        });
    }
    let lower: Vec<f64> = nominal.iter().map(|q| ((1.0 - eta) * q).max(0.0)).collect();
    let upper: Vec<f64> = nominal.iter().map(|q| (1.0 + eta) * q).collect();
    let (ls, us) = (lower.iter().sum::<f64>(), upper.iter().sum::<f64>());
    if ls > 1.0 + 1e-12 || us < 1.0 - 1e-12 {
        return Err(StrategyError::EmptyAmbiguitySet {
            lower: ls,
            upper: us,
        });
    }
    Ok((lower, upper))
}

/// Distribution in the box `|p - q| <= eta q` on the simplex minimizing
/// `sum_w p_w costs_w`.
///
/// The problem is a linear program solved greedily: starting from the lower
/// bounds, the remaining mass goes to the cheapest worlds first. Worlds
/// with equal cost share their allotment in proportion to their slack, so
/// a constant cost vector returns the nominal distribution.
pub fn worst_case_probs(
    costs: &[f64],
    nominal: &[f64],
    eta: f64,
) -> Result<Vec<f64>, StrategyError> {
    if costs.len() != nominal.len() {
        return Err(crate::market::MarketError::LengthMismatch {
            left: costs.len(),
            right: nominal.len(),
        }
        .into());
    }
    let (lower, upper) = ambiguity_bounds(nominal, eta)?;
    let mut p = lower.clone();
    let mut budget = 1.0 - lower.iter().sum::<f64>();
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));

    let mut start = 0;
    while start < order.len() && budget > 0.0 {
        let head = costs[order[start]];
        let mut end = start + 1;
        while end < order.len() && (costs[order[end]] - head).abs() <= TIE_TOLERANCE {
            end += 1;
        }
        let group = &order[start..end];
        let slack: f64 = group.iter().map(|&w| upper[w] - lower[w]).sum();
        if slack > 0.0 {
            let give = budget.min(slack);
            for &w in group {
                p[w] += give * (upper[w] - lower[w]) / slack;
            }
            budget -= give;
        }
        start = end;
    }
    Ok(p)
}

fn log_wealth(matrix: &OddsMatrix, f: &[f64]) -> Vec<f64> {
    (0..matrix.worlds())
        .map(|w| {
            let wealth = matrix.wealth(w, f);
            if wealth > 0.0 {
                wealth.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Worst-case expected log growth `min_{p in box} sum_w p_w log(O_w . f)`.
pub fn robust_growth(matrix: &OddsMatrix, f: &[f64], eta: f64) -> Result<f64, StrategyError> {
    let nominal = matrix.world_probs();
    let ell = log_wealth(matrix, f);
    let (_, upper) = ambiguity_bounds(nominal, eta)?;
    if ell.iter().zip(&upper).any(|(l, u)| *u > 0.0 && *l == f64::NEG_INFINITY) {
        return Ok(f64::NEG_INFINITY);
    }
    let p = worst_case_probs(&ell, nominal, eta)?;
    Ok(p.iter()
        .zip(&ell)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, l)| p * l)
        .sum())
}

/// Euclidean projection onto `{l <= p <= u, sum p = 1}` by bisection on the
/// shift.
fn project_box_simplex(v: &[f64], lower: &[f64], upper: &[f64], out: &mut [f64]) {
    let fill = |theta: f64, out: &mut [f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..v.len() {
            out[i] = (v[i] - theta).clamp(lower[i], upper[i]);
            s += out[i];
        }
        s
    };
    let mut lo = v.iter().zip(upper).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    let mut hi = v.iter().zip(lower).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fill(mid, out) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    fill(0.5 * (lo + hi), out);
}

/// `min_{p in box} [p . ell + tau/2 |p - q|^2]`, a smooth concave lower
/// envelope approximation of the robust growth that converges as `tau -> 0`.
pub struct SmoothedRobustGrowth<'a> {
    matrix: &'a OddsMatrix,
    lower: Vec<f64>,
    upper: Vec<f64>,
    tau: f64,
}

impl<'a> SmoothedRobustGrowth<'a> {
    pub fn new(matrix: &'a OddsMatrix, eta: f64, tau: f64) -> Result<Self, StrategyError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(StrategyError::InvalidParameter {
                name: "tau",
                value: tau,
            });
        }
        let (lower, upper) = ambiguity_bounds(matrix.world_probs(), eta)?;
        Ok(Self {
            matrix,
            lower,
            upper,
            tau,
        })
    }

    fn inner(&self, f: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let nominal = self.matrix.world_probs();
        let k = nominal.len();
        let mut ell = vec![0.0; k];
        let mut v = vec![0.0; k];
        for w in 0..k {
            if self.upper[w] == 0.0 {
                v[w] = 0.0;
                continue;
            }
            let wealth = self.matrix.wealth(w, f);
            if !(wealth > 0.0) {
                return None;
            }
            ell[w] = wealth.ln();
            v[w] = nominal[w] - ell[w] / self.tau;
        }
        let mut p = vec![0.0; k];
        project_box_simplex(&v, &self.lower, &self.upper, &mut p);
        Some((p, ell))
    }
}

impl Objective for SmoothedRobustGrowth<'_> {
    fn value(&self, f: &[f64]) -> f64 {
        let Some((p, ell)) = self.inner(f) else {
            return f64::NEG_INFINITY;
        };
        let nominal = self.matrix.world_probs();
        let mut total = 0.0;
        for w in 0..p.len() {
            let d = p[w] - nominal[w];
            total += p[w] * ell[w] + 0.5 * self.tau * d * d;
        }
        total
    }

    fn gradient(&self, f: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let Some((p, _)) = self.inner(f) else {
            return;
        };
        for (w, &pw) in p.iter().enumerate() {
            if pw == 0.0 {
                continue;
            }
            let row = self.matrix.row(w);
            let scale = pw / dot(row, f);
            for (g, o) in grad.iter_mut().zip(row) {
                *g += scale * o;
            }
        }
    }
}

/// Kelly against the least favourable distribution in the box ambiguity set
/// of relative radius `eta` around the player's probabilities.
pub fn kelly_dro(
    matrix: &OddsMatrix,
    eta: f64,
    settings: &SolveSettings,
) -> Result<Portfolio, StrategyError> {
    ambiguity_bounds(matrix.world_probs(), eta)?;
    if eta == 0.0 {
        return kelly(matrix, settings);
    }
    let mut f = cash_start(matrix);
    for tau in SMOOTHING_PATH {
        let objective = SmoothedRobustGrowth::new(matrix, eta, tau)?;
        f = maximize_from(&objective, &f, settings)?.solution;
    }
    // Smoothing leaves stakes of order tau where the exact optimum sits on
    // a kink; finish with an exact search on the segment from cash.
    let start = cash_start(matrix);
    let point = |t: f64| -> Vec<f64> {
        f.iter()
            .zip(&start)
            .map(|(x, c)| c + t * (x - c))
            .collect()
    };
    let exact = |t: f64| robust_growth(matrix, &point(t), eta);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..80 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if exact(c)? >= exact(d)? {
            b = d;
        } else {
            a = c;
        }
    }
    let mut best = (1.0, exact(1.0)?);
    for t in [0.5 * (a + b), 0.0] {
        let v = exact(t)?;
        if v >= best.1 {
            best = (t, v);
        }
    }
    Ok(Portfolio::from_solution(point(best.0)))
}
