//! Objective functions over portfolios of an [`OddsMatrix`].

use crate::market::{dot, AssetLabel, ExcessOddsMatrix, OddsMatrix};
use crate::solver::Objective;

/// Expected log growth `sum_w p_w log(O_w . f)`.
///
/// Worlds with zero probability are ignored. Returns `-inf` when a world
/// with positive probability would leave no wealth.
pub struct LogGrowth<'a> {
    pub matrix: &'a OddsMatrix,
    pub probs: &'a [f64],
}

impl<'a> LogGrowth<'a> {
    pub fn new(matrix: &'a OddsMatrix) -> Self {
        Self {
            matrix,
            probs: matrix.world_probs(),
        }
    }
}

impl Objective for LogGrowth<'_> {
    fn value(&self, f: &[f64]) -> f64 {
        let mut total = 0.0;
        for (w, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let wealth = self.matrix.wealth(w, f);
            if !(wealth > 0.0) {
                return f64::NEG_INFINITY;
            }
            total += p * wealth.ln();
        }
        total
    }

    fn gradient(&self, f: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        for (w, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = self.matrix.row(w);
            let scale = p / dot(row, f);
            for (g, o) in grad.iter_mut().zip(row) {
                *g += scale * o;
            }
        }
    }
}

/// `mean . f - weight * f' A f` for a symmetric matrix `A` (row-major).
pub struct MeanRisk {
    pub mean: Vec<f64>,
    pub risk: Vec<f64>,
    pub weight: f64,
}

impl MeanRisk {
    fn quad(&self, f: &[f64]) -> f64 {
        let n = f.len();
        (0..n).map(|i| f[i] * dot(&self.risk[i * n..(i + 1) * n], f)).sum()
    }
}

impl Objective for MeanRisk {
    fn value(&self, f: &[f64]) -> f64 {
        dot(&self.mean, f) - self.weight * self.quad(f)
    }

    fn gradient(&self, f: &[f64], grad: &mut [f64]) {
        let n = f.len();
        for i in 0..n {
            grad[i] = self.mean[i] - 2.0 * self.weight * dot(&self.risk[i * n..(i + 1) * n], f);
        }
    }
}

/// `sqrt(f' A f)`; its gradient is taken as zero where the form vanishes.
pub struct RiskNorm<'a> {
    pub risk: &'a [f64],
}

impl Objective for RiskNorm<'_> {
    fn value(&self, f: &[f64]) -> f64 {
        let n = f.len();
        let q: f64 = (0..n).map(|i| f[i] * dot(&self.risk[i * n..(i + 1) * n], f)).sum();
        q.max(0.0).sqrt()
    }

    fn gradient(&self, f: &[f64], grad: &mut [f64]) {
        let n = f.len();
        let s = self.value(f);
        for i in 0..n {
            grad[i] = if s > 0.0 {
                dot(&self.risk[i * n..(i + 1) * n], f) / s
            } else {
                0.0
            };
        }
    }
}

/// `log sum_w p_w (O_w . f)^(-lambda)`, the drawdown constraint function.
pub struct DrawdownConstraint<'a> {
    pub matrix: &'a OddsMatrix,
    pub lambda: f64,
}

impl DrawdownConstraint<'_> {
    /// Per-world log terms `log p_w - lambda log W_w`, `None` if some wealth
    /// is non-positive.
    fn log_terms(&self, f: &[f64]) -> Option<Vec<(usize, f64)>> {
        let mut terms = Vec::with_capacity(self.matrix.worlds());
        for (w, &p) in self.matrix.world_probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let wealth = self.matrix.wealth(w, f);
            if !(wealth > 0.0) {
                return None;
            }
            terms.push((w, p.ln() - self.lambda * wealth.ln()));
        }
        Some(terms)
    }
}

fn log_sum_exp(terms: &[(usize, f64)]) -> f64 {
    let top = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + terms.iter().map(|t| (t.1 - top).exp()).sum::<f64>().ln()
}

impl Objective for DrawdownConstraint<'_> {
    fn value(&self, f: &[f64]) -> f64 {
        match self.log_terms(f) {
            Some(terms) => log_sum_exp(&terms),
            None => f64::INFINITY,
        }
    }

    fn gradient(&self, f: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let Some(terms) = self.log_terms(f) else {
            return;
        };
        let total = log_sum_exp(&terms);
        for (w, t) in terms {
            let row = self.matrix.row(w);
            let scale = -self.lambda * (t - total).exp() / dot(row, f);
            for (g, o) in grad.iter_mut().zip(row) {
                *g += scale * o;
            }
        }
    }
}

/// Expected excess payoff `E[rho]` per asset.
pub fn expected_excess(excess: &ExcessOddsMatrix, probs: &[f64]) -> Vec<f64> {
    let n = excess.assets();
    let mut mean = vec![0.0; n];
    for (w, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (m, r) in mean.iter_mut().zip(excess.row(w)) {
            *m += p * r;
        }
    }
    mean
}

/// Raw second moment `E[rho rho']`, row-major.
pub fn second_moment(excess: &ExcessOddsMatrix, probs: &[f64]) -> Vec<f64> {
    let n = excess.assets();
    let mut out = vec![0.0; n * n];
    for (w, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let row = excess.row(w);
        for i in 0..n {
            let pi = p * row[i];
            if pi == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += pi * row[j];
            }
        }
    }
    out
}

/// Covariance of the excess payoffs, `E[rho rho'] - E[rho] E[rho]'`.
pub fn covariance(excess: &ExcessOddsMatrix, probs: &[f64]) -> Vec<f64> {
    let n = excess.assets();
    let mean = expected_excess(excess, probs);
    let mut out = second_moment(excess, probs);
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] -= mean[i] * mean[j];
        }
    }
    out
}

/// Diagonal risk of a single match with exclusive outcomes:
/// `p_i (1 - p_i) rho_ii^2`, zero for cash.
pub fn diagonal_risk(matrix: &OddsMatrix) -> Vec<f64> {
    let n = matrix.assets();
    let mut out = vec![0.0; n * n];
    for (i, &p) in matrix.world_probs().iter().enumerate() {
        let rho = matrix.row(i)[i] - 1.0;
        out[i * n + i] = p * (1.0 - p) * rho * rho;
    }
    out
}

/// Whether the matrix describes one match, i.e. world `i` pays asset `i`.
pub fn is_single_match(matrix: &OddsMatrix) -> bool {
    matrix.labels().iter().all(|label| match label {
        AssetLabel::Outcome { match_index, .. } => *match_index == 0,
        AssetLabel::Cash => true,
    })
}
