//! Brute-force reference implementations on plain slices, independent of the
//! library's solvers.
#![allow(dead_code)]

/// Single-match market: player probabilities and decimal odds.
#[derive(Debug, Clone)]
pub struct Market {
    pub p: Vec<f64>,
    pub o: Vec<f64>,
}

impl Market {
    pub fn n(&self) -> usize {
        self.p.len()
    }

    /// Wealth multiplier in world `w` for stakes `x` (risky assets, cash last).
    pub fn wealth(&self, x: &[f64], w: usize) -> f64 {
        self.o[w] * x[w] + x[self.n()]
    }

    pub fn log_growth(&self, x: &[f64]) -> f64 {
        (0..self.n())
            .map(|w| {
                let v = self.wealth(x, w);
                if v <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    self.p[w] * v.ln()
                }
            })
            .sum()
    }

    fn mean_excess(&self, x: &[f64]) -> f64 {
        (0..self.n()).map(|i| (self.p[i] * self.o[i] - 1.0) * x[i]).sum()
    }

    fn diagonal_variance(&self, x: &[f64]) -> f64 {
        (0..self.n())
            .map(|i| {
                let rho = self.o[i] - 1.0;
                self.p[i] * (1.0 - self.p[i]) * rho * rho * x[i] * x[i]
            })
            .sum()
    }

    /// Mean excess return minus `gamma` times the diagonal Bernoulli risk.
    pub fn mpt(&self, x: &[f64], gamma: f64) -> f64 {
        self.mean_excess(x) - gamma * self.diagonal_variance(x)
    }

    /// `E[r - r^2 / 2]` with `r` the excess return of the portfolio.
    pub fn quadratic_kelly(&self, x: &[f64]) -> f64 {
        let risky: f64 = x[..self.n()].iter().sum();
        (0..self.n())
            .map(|w| {
                let r = self.o[w] * x[w] - risky;
                self.p[w] * (r - 0.5 * r * r)
            })
            .sum()
    }

    pub fn sharpe(&self, x: &[f64]) -> f64 {
        self.mean_excess(x) / self.diagonal_variance(x).sqrt()
    }

    /// `E[W^(-lambda)]`.
    pub fn drawdown_moment(&self, x: &[f64], lambda: f64) -> f64 {
        (0..self.n())
            .map(|w| self.p[w] * self.wealth(x, w).powf(-lambda))
            .sum()
    }

    /// Worst-case expected log wealth over `{|q - p| <= eta p, sum q = 1}`,
    /// minimizing over the vertices of that polytope.
    pub fn robust_growth(&self, x: &[f64], eta: f64) -> f64 {
        let n = self.n();
        let ell: Vec<f64> = (0..n)
            .map(|w| {
                let v = self.wealth(x, w);
                if v <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    v.ln()
                }
            })
            .collect();
        let lower: Vec<f64> = self.p.iter().map(|q| ((1.0 - eta) * q).max(0.0)).collect();
        let upper: Vec<f64> = self.p.iter().map(|q| (1.0 + eta) * q).collect();
        let mut best = f64::INFINITY;
        for free in 0..n {
            for mask in 0..(1u32 << n) {
                let mut q = vec![0.0; n];
                let mut rest = 1.0;
                for i in (0..n).filter(|&i| i != free) {
                    q[i] = if mask >> i & 1 == 1 { upper[i] } else { lower[i] };
                    rest -= q[i];
                }
                if rest < lower[free] - 1e-12 || rest > upper[free] + 1e-12 {
                    continue;
                }
                q[free] = rest.clamp(lower[free], upper[free]);
                let v: f64 = q
                    .iter()
                    .zip(&ell)
                    .filter(|(q, _)| **q > 0.0)
                    .map(|(q, l)| q * l)
                    .sum();
                best = best.min(v);
            }
        }
        best
    }
}

/// Grid maximization over stakes `x` with `x_i >= 0` and `sum x <= 1`
/// (cash appended as `1 - sum x`), or `sum x = 1` with zero cash when
/// `invested` is set. Coarse-to-fine: a full grid at step 0.01, then local
/// grids at 1e-2, 1e-3 and 1e-4 around the incumbent, each repeated until
/// it no longer improves. Valid for concave or quasi-concave objectives.
pub fn grid_argmax(
    risky: usize,
    invested: bool,
    objective: impl Fn(&[f64]) -> f64,
) -> (Vec<f64>, f64) {
    let free = if invested { risky - 1 } else { risky };
    let complete = |y: &[f64]| -> Option<Vec<f64>> {
        let s: f64 = y.iter().sum();
        if y.iter().any(|v| *v < -1e-12) || s > 1.0 + 1e-12 {
            return None;
        }
        let mut x: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
        let s: f64 = x.iter().sum();
        if invested {
            x.push((1.0 - s).max(0.0));
            x.push(0.0);
        } else {
            x.push((1.0 - s).max(0.0));
        }
        Some(x)
    };
    let mut best: (Vec<f64>, f64) = (Vec::new(), f64::NEG_INFINITY);
    let consider = |y: &[f64], best: &mut (Vec<f64>, f64)| {
        if let Some(x) = complete(y) {
            let v = objective(&x);
            if v > best.1 {
                *best = (x, v);
            }
        }
    };
    // full coarse grid
    let steps = 100usize;
    let mut idx = vec![0usize; free];
    loop {
        let y: Vec<f64> = idx.iter().map(|&k| k as f64 / steps as f64).collect();
        consider(&y, &mut best);
        let mut d = 0;
        loop {
            if d == free {
                break;
            }
            idx[d] += 1;
            if idx.iter().sum::<usize>() <= steps {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == free {
            break;
        }
    }
    if free == 0 {
        return best;
    }
    // local grids, re-centred until the incumbent stops moving so that flat
    // ridges are followed beyond a single window
    for (step, radius) in [(1e-2, 3i64), (1e-3, 20), (1e-4, 20)] {
        loop {
            let center: Vec<f64> = best.0[..free].to_vec();
            let width = (2 * radius + 1) as usize;
            for code in 0..width.pow(free as u32) {
                let mut c = code;
                let y: Vec<f64> = center
                    .iter()
                    .map(|v| {
                        let k = (c % width) as i64 - radius;
                        c /= width;
                        v + k as f64 * step
                    })
                    .collect();
                consider(&y, &mut best);
            }
            if best.0[..free] == center[..] {
                break;
            }
        }
    }
    best
}

/// Maximization over rays from all-cash: stake directions `d` on a
/// coarse-to-fine grid of the risky simplex, and for each direction the
/// largest feasible scale found by bisection (the feasible set must be
/// convex and contain cash) followed by a golden-section search of the
/// objective, which must be concave along rays.
pub fn ray_argmax(
    risky: usize,
    objective: impl Fn(&[f64]) -> f64,
    feasible: impl Fn(&[f64]) -> bool,
) -> (Vec<f64>, f64) {
    let point = |d: &[f64], t: f64| -> Vec<f64> {
        let mut x: Vec<f64> = d.iter().map(|v| t * v).collect();
        x.push(1.0 - t);
        x
    };
    let along = |d: &[f64]| -> (Vec<f64>, f64) {
        let (mut lo, mut hi) = (0.0, 1.0);
        if feasible(&point(d, 1.0)) {
            lo = 1.0;
        } else {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if feasible(&point(d, mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let t_max = lo;
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (0.0, t_max);
        for _ in 0..80 {
            let c = b - r * (b - a);
            let e = a + r * (b - a);
            if objective(&point(d, c)) >= objective(&point(d, e)) {
                b = e;
            } else {
                a = c;
            }
        }
        let mut best = (point(d, 0.0), objective(&point(d, 0.0)));
        for t in [0.5 * (a + b), t_max] {
            let x = point(d, t);
            let v = objective(&x);
            if v > best.1 {
                best = (x, v);
            }
        }
        best
    };
    let mut best = (point(&vec![0.0; risky], 0.0), f64::NEG_INFINITY);
    let mut best_dir = vec![0.0; risky];
    let free = risky - 1;
    let visit = |y: &[f64], best: &mut (Vec<f64>, f64), best_dir: &mut Vec<f64>| {
        let s: f64 = y.iter().sum();
        if y.iter().any(|v| *v < -1e-12) || s > 1.0 + 1e-12 {
            return;
        }
        let mut d: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
        d.push((1.0 - s).max(0.0));
        let (x, v) = along(&d);
        if v > best.1 {
            *best = (x, v);
            *best_dir = d;
        }
    };
    for (step, radius) in [(1e-2, 100i64), (1e-3, 20), (1e-4, 20)] {
        let center: Vec<f64> = if step == 1e-2 {
            vec![0.0; free]
        } else {
            best_dir[..free].to_vec()
        };
        let lo = if step == 1e-2 { 0 } else { -radius };
        let width = (radius - lo + 1) as usize;
        for code in 0..width.pow(free as u32) {
            let mut c = code;
            let y: Vec<f64> = center
                .iter()
                .map(|v| {
                    let k = (c % width) as i64 + lo;
                    c /= width;
                    v + k as f64 * step
                })
                .collect();
            visit(&y, &mut best, &mut best_dir);
        }
    }
    best
}

/// Exact Euclidean projection onto the simplex by enumerating supports and
/// keeping the closest feasible candidate.
pub fn projection_by_supports(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: (f64, Vec<f64>) = (f64::INFINITY, Vec::new());
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let theta = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; n];
        for &i in &support {
            x[i] = v[i] - theta;
        }
        if x.iter().any(|xi| *xi < 0.0) {
            continue;
        }
        let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, x);
        }
    }
    best.1
}

/// Deterministic xorshift generator for reproducible random markets.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Flat Dirichlet draw.
    pub fn dirichlet(&mut self, n: usize) -> Vec<f64> {
        let e: Vec<f64> = (0..n).map(|_| -(1.0 - self.uniform()).ln()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|x| x / s).collect()
    }

    /// Market whose bookmaker distribution is a perturbation of the player's,
    /// with margin in `[0, 0.06)` and probabilities bounded away from zero.
    pub fn market(&mut self, n: usize) -> Market {
        loop {
            let p = self.dirichlet(n);
            if p.iter().any(|x| *x < 0.03) {
                continue;
            }
            let raw: Vec<f64> = p.iter().map(|x| x * self.range(0.6, 1.6)).collect();
            let s: f64 = raw.iter().sum();
            let margin = self.range(0.0, 0.06);
            let o: Vec<f64> = raw.iter().map(|b| (1.0 - margin) * s / b).collect();
            if o.iter().all(|x| *x > 1.01) {
                return Market { p, o };
            }
        }
    }
}
