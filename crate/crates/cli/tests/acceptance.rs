//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Runs without the libtest harness so every line is printed; exits
//! non-zero when any criterion fails.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use betport_core::market::group_into_rounds;
use betport_core::simulation::settle_round;
use betport_core::solver::{finite_diff_check, project_to_simplex, Linear, Objective};
use betport_core::strategies::objectives::{
    diagonal_risk, expected_excess, second_moment, DrawdownConstraint, LogGrowth, MeanRisk,
    RiskNorm,
};
use betport_core::strategies::{
    apply_fraction, apply_max_limit, drawdown_exponent, kelly, kelly_drawdown, kelly_dro,
    kelly_quadratic, max_sharpe, mpt, FamilyParams, SmoothedRobustGrowth,
};
use betport_core::{
    expected_unit_profits, generate_synthetic, grid_search, monte_carlo, split, Family, GridSpec,
    OddsMatrix, OddsVector, OutcomeProbs, Portfolio, Preset, ProtocolConfig, RoundSlate,
    SolveSettings, SurvivalCriterion, WealthStats,
};
use oracles::{grid_argmax, projection_by_supports, ray_argmax, Market, Rng};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn matrix(m: &Market) -> OddsMatrix {
    OddsMatrix::single(
        &OutcomeProbs::new(m.p.clone()).unwrap(),
        &OddsVector::new(m.o.clone()).unwrap(),
    )
    .unwrap()
}

fn markets(seed: u64, count: usize) -> Vec<Market> {
    let mut rng = Rng::new(seed);
    (0..count).map(|i| rng.market(2 + i % 2)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn profits(p: &[f64], o: &[f64]) -> Vec<f64> {
    expected_unit_profits(
        &OutcomeProbs::new(p.to_vec()).unwrap(),
        &OddsVector::new(o.to_vec()).unwrap(),
    )
    .unwrap()
}

fn fair_coin_profits() -> Check {
    let e = profits(&[0.5, 0.5], &[1.9, 1.9]);
    ensure(e.iter().all(|v| (v + 0.05).abs() <= 1e-12), || format!("{e:?}"))?;
    Ok(format!("{e:?}"))
}

fn biased_coin_profits() -> Check {
    let odds = [1.46, 2.71];
    let truth = profits(&[0.6, 0.4], &odds);
    let player = profits(&[0.55, 0.45], &odds);
    let got = [truth[0], truth[1], player[0], player[1]];
    let reference = [-0.124, 0.084, -0.197, 0.22];
    let err = dist(&got, &reference);
    ensure(err <= 0.005, || format!("{got:?} vs {reference:?}"))?;
    Ok(format!("{got:.4?}, max deviation {err:.4}"))
}

fn kelly_closed_form() -> Check {
    let s = SolveSettings::default();
    let mut rng = Rng::new(103);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 100 {
        let p = rng.range(0.05, 0.95);
        let o1 = rng.range(1.05, 8.0);
        let o2 = 1.0 / (1.0 - 1.0 / o1) * rng.range(0.7, 1.0);
        if p * o1 <= 1.02 || o2 < 1.0 || (1.0 - p) * o2 >= 1.0 {
            continue;
        }
        let m = Market { p: vec![p, 1.0 - p], o: vec![o1, o2] };
        let f = kelly(&matrix(&m), &s).map_err(|e| e.to_string())?;
        let closed = p - (1.0 - p) / (o1 - 1.0);
        let (grid, _) = grid_argmax(2, false, |x| m.log_growth(x));
        let err = (f.fractions()[0] - closed).abs();
        worst = worst.max(err);
        ensure(err <= 1e-3 && (grid[0] - closed).abs() <= 1e-3, || {
            format!("{m:?}: solver {:?}, closed form {closed}, grid {grid:?}", f.fractions())
        })?;
        checked += 1;
    }
    Ok(format!("100 markets, max deviation {worst:.2e}"))
}

fn fair_odds_growth() -> Check {
    let s = SolveSettings::default();
    let mut rng = Rng::new(104);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 50 {
        let n = 2 + checked % 5;
        let p = rng.dirichlet(n);
        let q = rng.dirichlet(n);
        if p.iter().chain(&q).any(|v| *v < 1e-3) {
            continue;
        }
        let m = Market { p: p.clone(), o: q.iter().map(|v| 1.0 / v).collect() };
        let f = kelly(&matrix(&m), &s).map_err(|e| e.to_string())?;
        let expected: f64 = p.iter().zip(&m.o).map(|(p, o)| p * (o * p).ln()).sum();
        let err = (m.log_growth(f.fractions()) - expected).abs();
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("{m:?}: growth off by {err}"))?;
        checked += 1;
    }
    Ok(format!("50 markets, max deviation {worst:.2e}"))
}

fn compare(
    label: &str,
    m: &Market,
    solved: &Portfolio,
    oracle: (Vec<f64>, f64),
    objective: impl Fn(&[f64]) -> f64,
) -> Result<(f64, f64), String> {
    let (x, best) = oracle;
    let d = dist(solved.fractions(), &x);
    let v = (objective(solved.fractions()) - best).abs();
    ensure(d <= 1e-3 && v <= 1e-5, || {
        format!("{label} on {m:?}: solver {:?}, oracle {x:?}, objective gap {v:.2e}", solved.fractions())
    })?;
    Ok((d, v))
}

fn oracle_equivalence() -> Check {
    let s = SolveSettings::default();
    let (mut dmax, mut vmax) = (0.0f64, 0.0f64);
    let mut track = |r: (f64, f64)| {
        dmax = dmax.max(r.0);
        vmax = vmax.max(r.1);
    };
    let err = |e: betport_core::StrategyError| e.to_string();
    for gamma in [0.5, 1.0, 5.0] {
        for m in markets(105, 20) {
            let p = mpt(&matrix(&m), gamma, &s).map_err(err)?;
            let o = grid_argmax(m.n(), false, |x| m.mpt(x, gamma));
            track(compare("MPT", &m, &p, o, |x| m.mpt(x, gamma))?);
        }
    }
    for m in markets(106, 20) {
        let p = max_sharpe(&matrix(&m), &s).map_err(err)?;
        let (x, best) = grid_argmax(m.n(), true, |x| m.sharpe(x));
        if best <= 0.0 {
            ensure(p.is_all_cash(), || format!("max-Sharpe should stay in cash on {m:?}"))?;
        } else {
            track(compare("max-Sharpe", &m, &p, (x, best), |x| m.sharpe(x))?);
        }
    }
    for m in markets(107, 20) {
        let p = kelly_quadratic(&matrix(&m), &s).map_err(err)?;
        let o = grid_argmax(m.n(), false, |x| m.quadratic_kelly(x));
        track(compare("quadratic Kelly", &m, &p, o, |x| m.quadratic_kelly(x))?);
    }
    let lambda = drawdown_exponent(0.7, 0.1);
    for m in markets(108, 20) {
        let p = kelly_drawdown(&matrix(&m), 0.7, 0.1, &s).map_err(err)?;
        let o = ray_argmax(m.n(), |x| m.log_growth(x), |x| m.drawdown_moment(x, lambda) <= 1.0);
        track(compare("KellyDrawdown", &m, &p, o, |x| m.log_growth(x))?);
    }
    for m in markets(109, 20) {
        let p = kelly_dro(&matrix(&m), 0.1, &s).map_err(err)?;
        let o = grid_argmax(m.n(), false, |x| m.robust_growth(x, 0.1));
        track(compare("KellyRobust", &m, &p, o, |x| m.robust_growth(x, 0.1))?);
    }
    Ok(format!("140 markets, max portfolio gap {dmax:.1e}, max objective gap {vmax:.1e}"))
}

fn gradient_hygiene() -> Check {
    let s = SolveSettings::default();
    let mut worst = 0.0f64;
    let err = |e: betport_core::StrategyError| e.to_string();
    for m in markets(110, 50) {
        let mtx = matrix(&m);
        let mean = expected_excess(&mtx.excess(), mtx.world_probs());
        let risk = diagonal_risk(&mtx);
        let mut checks: Vec<(&str, Box<dyn Objective + '_>, Vec<f64>)> = vec![
            ("Kelly", Box::new(LogGrowth::new(&mtx)), kelly(&mtx, &s).map_err(err)?.into_inner()),
            (
                "MPT",
                Box::new(MeanRisk { mean: mean.clone(), risk: risk.clone(), weight: 1.0 }),
                mpt(&mtx, 1.0, &s).map_err(err)?.into_inner(),
            ),
        ];
        let quad = kelly_quadratic(&mtx, &s).map_err(err)?.into_inner();
        checks.push((
            "quadratic Kelly",
            Box::new(MeanRisk {
                mean: mean.clone(),
                risk: second_moment(&mtx.excess(), mtx.world_probs()),
                weight: 0.5,
            }),
            quad,
        ));
        let sharpe = max_sharpe(&mtx, &s).map_err(err)?;
        if !sharpe.is_all_cash() {
            let x = sharpe.into_inner();
            checks.push(("Sharpe numerator", Box::new(Linear(mean.clone())), x.clone()));
            checks.push(("Sharpe denominator", Box::new(RiskNorm { risk: &risk }), x));
        }
        let dd = kelly_drawdown(&mtx, 0.7, 0.1, &s).map_err(err)?.into_inner();
        checks.push(("KellyDrawdown", Box::new(LogGrowth::new(&mtx)), dd.clone()));
        checks.push((
            "drawdown constraint",
            Box::new(DrawdownConstraint { matrix: &mtx, lambda: drawdown_exponent(0.7, 0.1) }),
            dd,
        ));
        let dro = kelly_dro(&mtx, 0.1, &s).map_err(err)?.into_inner();
        checks.push((
            "KellyRobust (smoothed)",
            Box::new(SmoothedRobustGrowth::new(&mtx, 0.1, 1e-2).map_err(err)?),
            dro,
        ));
        for (label, objective, point) in &checks {
            if !objective.value(point).is_finite() {
                continue;
            }
            let e = finite_diff_check(objective.as_ref(), point, 1e-6);
            worst = worst.max(e);
            ensure(e < 1e-4, || format!("{label}: gradient error {e:.2e} at {point:?}"))?;
        }
    }
    Ok(format!("50 markets, max gradient error {worst:.1e}"))
}

fn simplex_projection() -> Check {
    let mut rng = Rng::new(111);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let v: Vec<f64> = (0..5).map(|_| rng.range(-2.0, 2.0)).collect();
        let d = dist(&project_to_simplex(&v), &projection_by_supports(&v));
        worst = worst.max(d);
        ensure(d <= 1e-8, || format!("{v:?}: deviation {d:.2e}"))?;
    }
    Ok(format!("200 inputs, max deviation {worst:.1e}"))
}

fn drawdown_validity() -> Check {
    let (alpha, beta, p) = (0.7, 0.1, 0.6);
    let m = Market { p: vec![p, 1.0 - p], o: vec![1.9, 1.9] };
    let mtx = matrix(&m);
    let f = kelly_drawdown(&mtx, alpha, beta, &SolveSettings::default()).map_err(|e| e.to_string())?;
    let multipliers = [settle_round(&f, &mtx, 0), settle_round(&f, &mtx, 1)];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let paths = 10_000;
    let mut hits = 0;
    for _ in 0..paths {
        let mut w = 1.0;
        for _ in 0..500 {
            w *= multipliers[usize::from(rng.random::<f64>() >= p)];
            if w < alpha {
                hits += 1;
                break;
            }
        }
    }
    let rate = hits as f64 / paths as f64;
    ensure(rate <= beta + 0.02, || format!("P(min < {alpha}) = {rate}"))?;
    Ok(format!("stake {:.4}, P(min wealth < 0.7) = {rate:.4}", f.fractions()[0]))
}

fn protocol(seed: u64) -> ProtocolConfig {
    ProtocolConfig { runs: 1000, group_size: 1, seed, ..ProtocolConfig::default() }
}

/// Tuned KellyFrac on the training rounds, evaluated on the test rounds.
fn tuned_kelly_frac(train: &[RoundSlate], test: &[RoundSlate], p: &ProtocolConfig) -> Result<(f64, WealthStats), String> {
    let s = SolveSettings::default();
    let sel = grid_search(
        Family::KellyFrac,
        &GridSpec::default_for(Family::KellyFrac),
        train,
        p,
        &s,
        SurvivalCriterion::FinalWealth,
    )
    .map_err(|e| e.to_string())?;
    let r = monte_carlo(test, &sel.best, p, &s).map_err(|e| e.to_string())?;
    Ok((sel.best.omega().unwrap_or(f64::NAN), r.stats))
}

fn evaluate(family: Family, params: FamilyParams, test: &[RoundSlate], p: &ProtocolConfig) -> Result<WealthStats, String> {
    monte_carlo(test, &family.config(&params), p, &SolveSettings::default())
        .map(|r| r.stats)
        .map_err(|e| e.to_string())
}

fn split_preset(preset: Preset, matches: usize) -> Result<(Vec<RoundSlate>, Vec<RoundSlate>), String> {
    let (records, _) = generate_synthetic(&preset.config(matches, 0)).map_err(|e| e.to_string())?;
    split(&group_into_rounds(records), 0.5).map_err(|e| e.to_string())
}

fn kl_disadvantage_ruin() -> Check {
    let (train, test) = split_preset(Preset::Basketball, 5000)?;
    let p = protocol(0);
    let kelly = evaluate(Family::Kelly, FamilyParams::default(), &test, &p)?;
    let sharpe = evaluate(Family::MSharpe, FamilyParams::default(), &test, &p)?;
    let (omega, frac) = tuned_kelly_frac(&train, &test, &p)?;
    let summary = format!(
        "Kelly ruin {:.1}%, MSharpe ruin {:.1}%, KellyFrac(omega={omega}) ruin {:.1}% median {:.3e}",
        kelly.ruin_pct, sharpe.ruin_pct, frac.ruin_pct, frac.median
    );
    ensure(
        kelly.ruin_pct >= 95.0 && sharpe.ruin_pct >= 95.0 && frac.ruin_pct == 0.0 && frac.median > 1.0,
        || summary.clone(),
    )?;
    Ok(summary)
}

fn kl_advantage_ordering() -> Check {
    let (train, test) = split_preset(Preset::Horse, 2000)?;
    let p = protocol(0);
    let (omega, frac) = tuned_kelly_frac(&train, &test, &p)?;
    let abs = evaluate(Family::AbsDisc, FamilyParams::default(), &test, &p)?;
    let maxev = evaluate(Family::MaxEvFrac, FamilyParams::default(), &test, &p)?;
    let summary = format!(
        "KellyFrac(omega={omega}) ruin {:.1}% median {:.2e}; AbsDisc ruin {:.1}% median {:.2e}; MaxEvFrac(omega=1) ruin {:.1}% median {:.2e}",
        frac.ruin_pct, frac.median, abs.ruin_pct, abs.median, maxev.ruin_pct, maxev.median
    );
    for informal in [&abs, &maxev] {
        ensure(
            informal.ruin_pct > frac.ruin_pct && informal.median < frac.median,
            || summary.clone(),
        )?;
    }
    Ok(summary)
}

fn backtest_determinism() -> Check {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs = Vec::new();
    for dir in &dirs {
        let out = Command::new(env!("CARGO_BIN_EXE_betport"))
            .args(["backtest", "--preset", "basketball", "--matches", "2000", "--seed", "11"])
            .args(["--runs", "1000", "--group-size", "1"])
            .args(["--strategy", "KellyFrac", "--strategy", "MSharpe", "--strategy", "AbsDisc"])
            .arg("--out")
            .arg(dir.path())
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        outputs.push(std::fs::read(dir.path().join("metrics.csv")).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "metrics.csv differs between runs".to_string())?;
    Ok(format!("two runs, {} identical bytes", outputs[0].len()))
}

fn random_portfolio(rng: &mut Rng) -> Portfolio {
    let n = 2 + (rng.uniform() * 6.0) as usize;
    let mut f = rng.dirichlet(n + 1);
    if rng.uniform() < 0.2 {
        f[n] = 0.0;
        let s: f64 = f.iter().sum();
        f.iter_mut().for_each(|x| *x /= s);
    }
    let risky: f64 = f[..n].iter().sum();
    f[n] = (1.0 - risky).max(0.0);
    Portfolio::new(f).unwrap()
}

fn dyadic_portfolio(rng: &mut Rng) -> Portfolio {
    let n = 2 + (rng.uniform() * 6.0) as usize;
    let scale = (1u64 << 20) as f64;
    let mut parts: Vec<f64> = (0..n).map(|_| (rng.uniform() * 65536.0).floor()).collect();
    let total: f64 = parts.iter().sum();
    if total > scale {
        parts.iter_mut().for_each(|x| *x = (*x * scale / total).floor());
    }
    let mut f: Vec<f64> = parts.iter().map(|k| k / scale).collect();
    let risky: f64 = f.iter().sum();
    f.push(1.0 - risky);
    Portfolio::new(f).unwrap()
}

fn wrapper_algebra() -> Check {
    let mut rng = Rng::new(112);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let f = random_portfolio(&mut rng);
        let cash = Portfolio::all_cash(f.len());
        ensure(apply_fraction(&f, 1.0) == f && apply_max_limit(&f, 1.0) == f, || {
            format!("unit identities fail on {f:?}")
        })?;
        ensure(apply_fraction(&f, 0.0) == cash && apply_max_limit(&f, 0.0) == cash, || {
            format!("zero identities fail on {f:?}")
        })?;
        let (a, b) = (rng.uniform(), rng.uniform());
        let twice = apply_fraction(&apply_fraction(&f, a), b);
        worst = worst.max(dist(twice.fractions(), apply_fraction(&f, a * b).fractions()));

        // stakes and fractions on binary lattices: every product and sum is
        // representable, so composition must be bit-exact
        let g = dyadic_portfolio(&mut rng);
        let (a, b) = ((rng.uniform() * 256.0).floor() / 256.0, (rng.uniform() * 256.0).floor() / 256.0);
        ensure(
            apply_fraction(&apply_fraction(&g, a), b) == apply_fraction(&g, a * b),
            || format!("composition not exact on {g:?} with {a}, {b}"),
        )?;
    }
    ensure(worst <= 4.0 * f64::EPSILON, || format!("composition off by {worst:e}"))?;
    Ok(format!(
        "1000 portfolios: identities exact, composition exact on binary-lattice inputs, within {:.1} ulp on arbitrary inputs",
        worst / f64::EPSILON
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("fair coin expected profits", fair_coin_profits),
        ("biased coin expected profits", biased_coin_profits),
        ("Kelly closed form on binary markets", kelly_closed_form),
        ("Kelly growth at fair odds", fair_odds_growth),
        ("formal strategies match brute-force oracles", oracle_equivalence),
        ("gradients match finite differences", gradient_hygiene),
        ("simplex projection matches exact reference", simplex_projection),
        ("drawdown constraint holds empirically", drawdown_validity),
        ("KL-disadvantage: full strategies ruin, tuned KellyFrac survives", kl_disadvantage_ruin),
        ("KL-advantage: informal strategies trail tuned KellyFrac", kl_advantage_ordering),
        ("backtest output is byte-identical across runs", backtest_determinism),
        ("fraction and max-limit wrapper algebra", wrapper_algebra),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {:>2}. {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {:>2}. {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    // diagnostic: the informal fractional strategy after tuning
    if let Ok((train, test)) = split_preset(Preset::Horse, 2000) {
        let p = protocol(0);
        let s = SolveSettings::default();
        if let Ok(sel) = grid_search(
            Family::MaxEvFrac,
            &GridSpec::default_for(Family::MaxEvFrac),
            &train,
            &p,
            &s,
            SurvivalCriterion::FinalWealth,
        ) {
            if let Ok(r) = monte_carlo(&test, &sel.best, &p, &s) {
                println!(
                    "note: tuned MaxEvFrac(omega={}) on the KL-advantage preset: ruin {:.1}%, median {:.2e}",
                    sel.best.omega().unwrap_or(f64::NAN),
                    r.stats.ruin_pct,
                    r.stats.median
                );
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
