//! Acceptance suite: one test per criterion, each printing a pass line with
//! its runtime (run with `cargo test --test acceptance -- --nocapture` to
//! see them). Tolerances and runtime bounds are pinned in the asserts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use robust_payoff::cli::{self, CommandKind, Overrides};
use robust_payoff::distributions::{ks_distance, DistributionSpec};
use robust_payoff::efficiency::{self, Payoff};
use robust_payoff::markets::{
    self, AmbiguitySet, EsscherFamily, LeastFavorableMeasure, MarketQ, PhysicalLognormal, ZDensity,
};
use robust_payoff::numerics::{self, QuadratureSpec};
use robust_payoff::orders::{self, OrderFamily};
use robust_payoff::portfolio::{self, RduProblem, UtilitySpec};

fn finish(name: &str, t0: Instant, budget_secs: f64) {
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(
        elapsed < budget_secs,
        "{name}: runtime {elapsed:.2}s exceeds the {budget_secs}s budget"
    );
    println!("criterion {name}: PASS ({elapsed:.2}s)");
}

fn run_cli(cmd: CommandKind, dir: &std::path::Path) -> serde_json::Value {
    let overrides = Overrides { out: Some(dir.to_path_buf()), ..Overrides::default() };
    cli::run(cmd, None, &overrides).expect("command runs").summary
}

#[test]
fn criterion_1_tsd_counterexample() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_cli(CommandKind::TsdCounterexample, dir.path());
    let r = &summary["results"];
    let price_f = r["priceF"].as_f64().unwrap();
    let price_g = r["priceG"].as_f64().unwrap();
    assert!((price_f - 0.472).abs() <= 0.002, "E_Q[X_F] = {price_f}");
    assert!((price_g - 0.63).abs() <= 0.01, "E_Q[X_G] = {price_g}");
    assert_eq!(r["tsdHolds"].as_bool(), Some(true), "G must be TSD-dominated by F");
    assert!(price_g > price_f, "the dominated law must cost more: {price_g} vs {price_f}");
    finish("1 (third-order cost-inconsistency counterexample)", t0, 5.0);
}

#[test]
fn criterion_2_price_curve_and_flatness() {
    let t0 = Instant::now();
    let market = MarketQ::new(1.0, 0.0, 1.0, 0.9).unwrap();
    let target = DistributionSpec::exponential(1.0).unwrap();
    let grid: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();
    let out = efficiency::figure1_curves(&market, &grid, &target, 201).unwrap();
    for w in out.prices.windows(2) {
        assert!(
            w[1].price < w[0].price,
            "price not strictly decreasing: {} at {} vs {} at {}",
            w[0].price,
            w[0].mu1,
            w[1].price,
            w[1].mu1
        );
    }
    // vanishing-ambiguity limit: constant likelihood ratio, so the payoff has
    // the target law under the pricing measure and prices at the mean (= 1)
    let limit = efficiency::figure1_curves(&market, &[1e-4], &target, 11).unwrap();
    let p = limit.prices[0].price;
    assert!((p - 1.0).abs() <= 1e-3, "limit price {p}");

    let max_slope = |idx: usize| -> f64 {
        let c = &out.curves[idx];
        c.stock
            .windows(2)
            .zip(c.normalized_payoff.windows(2))
            .map(|(s, v)| ((v[1] - v[0]) / (s[1] - s[0])).abs())
            .fold(0.0f64, f64::max)
    };
    let flat = max_slope(0); // mu1 = 0.05
    let steep = max_slope(9); // mu1 = 0.50
    assert!(flat < steep, "normalized curve must be flatter at mu1=0.05: {flat} vs {steep}");
    finish("2 (price curve over the ambiguity bound)", t0, 10.0);
}

#[test]
fn criterion_3_partial_expectation_grid() {
    let t0 = Instant::now();
    let spec = QuadratureSpec::default();
    for &log_mean in &[-0.5, -0.25, 0.0, 0.25, 0.5] {
        for &log_std in &[0.1, 0.3, 0.6, 1.0, 1.5] {
            for &q in &[0.05, 0.25, 0.5, 0.75, 0.95] {
                let d = DistributionSpec::lognormal(log_mean, log_std).unwrap();
                let closed = d.partial_expectation(q).unwrap();
                let by_quad = numerics::integrate(
                    |p| d.quantile(p).unwrap(),
                    spec.tail_cut,
                    q,
                    &spec,
                )
                .unwrap();
                let rel = (closed - by_quad).abs() / by_quad.abs();
                assert!(
                    rel <= 1e-8,
                    "(M={log_mean}, V={log_std}, q={q}): closed {closed} vs quadrature {by_quad}"
                );
            }
        }
    }
    finish("3 (lognormal partial expectation closed form)", t0, 5.0);
}

#[test]
fn criterion_4_cost_efficiency_oracle() {
    let t0 = Instant::now();
    // 8 equal-probability states: sorting equals the exhaustive minimum
    let mut rng = ChaCha12Rng::seed_from_u64(4242);
    for _ in 0..5 {
        let n = 8;
        let prices: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..3.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        let probs = vec![1.0 / n as f64; n];
        let fast = efficiency::discrete_efficient_oracle(&prices, &probs, &values).unwrap();
        let mut best = f64::INFINITY;
        permutations(n, &mut |perm| {
            let cost: f64 = perm.iter().enumerate().map(|(i, &j)| prices[i] * values[j]).sum();
            if cost < best {
                best = cost;
            }
        });
        assert_eq!(fast.min_cost, best, "sorting must equal the exhaustive minimum");
    }

    // 64 states: 10^4 seeded rearrangements never beat the sorted assignment
    let n = 64;
    let prices: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..2.0)).collect();
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
    let probs = vec![1.0 / n as f64; n];
    let fast = efficiency::discrete_efficient_oracle(&prices, &probs, &values).unwrap();
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..10_000 {
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let cost: f64 = perm.iter().enumerate().map(|(i, &j)| prices[i] * values[j]).sum();
        assert!(
            cost >= fast.min_cost - 1e-12,
            "rearrangement beats the oracle: {cost} < {}",
            fast.min_cost
        );
    }
    finish("4 (discrete cost-efficiency oracle)", t0, 10.0);
}

fn permutations(n: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == idx.len() {
            visit(idx);
            return;
        }
        for i in k..idx.len() {
            idx.swap(k, i);
            rec(idx, k + 1, visit);
            idx.swap(k, i);
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rec(&mut idx, 0, visit);
}

/// Budget-based multiplier oracle: root-solve E_P[ξ X*(λ)] = x0 with the
/// same payoff parameterization the closed form uses.
fn lambda_root_solve_oracle(p: &RduProblem) -> f64 {
    let theta = p.theta();
    let b = p.gamma / (theta * p.eta) + 1.0 / p.eta;
    let rt = p.market.r * p.market.t;
    let law = DistributionSpec::Lognormal { log_mean: 0.5 * theta * theta, log_std: theta };
    let spec = QuadratureSpec::default();
    let budget = |lambda: f64| {
        let scale = lambda.powf(-1.0 / p.eta)
            * (rt / p.eta - 0.5 * p.gamma * (theta + p.gamma) / p.eta).exp();
        numerics::integrate(
            |u| {
                let l = law.quantile(u).unwrap();
                (-rt).exp() * scale * l.powf(b - 1.0)
            },
            spec.tail_cut,
            1.0 - spec.tail_cut,
            &spec,
        )
        .unwrap()
            - p.x0
    };
    numerics::find_root(budget, 1e-8, 1e8, 1e-12).unwrap()
}

#[test]
fn criterion_5_rdu_solver_sweep() {
    let t0 = Instant::now();
    let market = MarketQ::new(1.0, 0.0, 1.0, 0.2).unwrap();
    for &eta in &[0.3, 0.5, 0.7] {
        for &gamma in &[-0.1, 0.1, 0.3] {
            for &mu in &[0.03, 0.05, 0.08] {
                let p = RduProblem::new(
                    eta,
                    gamma,
                    1.0,
                    PhysicalLognormal { mu, sigma: 0.2 },
                    market,
                )
                .unwrap();
                let sol = portfolio::rdu_optimal(&p).unwrap();
                assert!(
                    (sol.budget - p.x0).abs() <= 1e-6 * p.x0,
                    "(eta={eta}, gamma={gamma}, mu={mu}): budget residual {:.3e}",
                    sol.budget - p.x0
                );
                assert!(
                    sol.envelope.consistent && sol.envelope.max_gap <= 1e-6,
                    "(eta={eta}, gamma={gamma}, mu={mu}): envelope gap {:.3e}",
                    sol.envelope.max_gap
                );
                if sol.case_tag != portfolio::RduCase::ConstantWealth {
                    let oracle = lambda_root_solve_oracle(&p);
                    let rel = (sol.lambda_multiplier - oracle).abs() / oracle;
                    assert!(
                        rel <= 1e-6,
                        "(eta={eta}, gamma={gamma}, mu={mu}): lambda {} vs root-solved {oracle}",
                        sol.lambda_multiplier
                    );
                } else {
                    // constant case: the multiplier has its own closed form
                    let lam3 = p.x0.powf(-eta) * (-market.r * market.t * eta).exp();
                    assert!((sol.lambda_multiplier - lam3).abs() <= 1e-12 * lam3);
                }
            }
        }
    }
    finish("5 (rank-dependent solver: budget, multiplier, envelope)", t0, 30.0);
}

#[test]
fn criterion_6_rationalization_exponent() {
    let t0 = Instant::now();
    let market = MarketQ::new(1.0, 0.0, 1.0, 0.2).unwrap();
    let (eta, gamma) = (0.5, 0.3);
    let p = RduProblem::new(eta, gamma, 1.0, PhysicalLognormal { mu: 0.05, sigma: 0.2 }, market)
        .unwrap();
    let theta = p.theta();
    assert!(gamma + theta > 0.0 && (eta * theta - (gamma + theta)).abs() > 1e-9);
    let sol = portfolio::rdu_optimal(&p).unwrap();
    let lstar = markets::likelihood_ratio_drift(0.05, &market);
    let (_, x_law) = sol.payoff.law_under_measure.clone().unwrap();
    let c = x_law.quantile(0.25).unwrap();
    let rat = portfolio::rationalize_utility(&sol.payoff, &lstar, &market, c).unwrap();

    // u'(y) ∝ y^{-eta theta/(gamma+theta)} with a ratio constant to 1e-6
    let power = eta * theta / (gamma + theta);
    let (qlo, qhi) = (x_law.quantile(0.01).unwrap(), x_law.quantile(0.99).unwrap());
    let mut first: Option<f64> = None;
    for (&y, &g) in rat.marginal.knots().iter().zip(rat.marginal.values()) {
        if y < qlo || y > qhi {
            continue;
        }
        let ratio = g * y.powf(power);
        let anchor = *first.get_or_insert(ratio);
        assert!(
            (ratio - anchor).abs() <= 1e-6 * anchor.abs(),
            "derivative ratio drifts: {ratio} vs {anchor} at y={y}"
        );
    }
    let fitted = rat.fitted_exponent.unwrap();
    let expect = 1.0 - eta * theta / (gamma + theta);
    assert!((fitted - expect).abs() <= 1e-6, "fitted exponent {fitted} vs {expect}");
    finish("6 (rationalized utility is a power law)", t0, 5.0);
}

#[test]
fn criterion_7_utility_diagnostics() {
    let t0 = Instant::now();
    let grid: Vec<f64> = (1..=200).map(|i| 0.05 * i as f64).collect();
    let cases = [
        (UtilitySpec::exponential(0.7).unwrap(), true),
        (UtilitySpec::crra(2.0).unwrap(), true),
        (UtilitySpec::crra(0.5).unwrap(), false),
    ];
    for (u, expect) in &cases {
        let report = portfolio::inverse_marginal_convexity_check(u, &grid).unwrap();
        assert_eq!(
            report.one_over_marginal_convex, *expect,
            "convexity verdict for {u:?}"
        );
        assert!(report.verdicts_agree, "a(x) >= p(x)/2 disagrees with convexity for {u:?}");
        let stable = report.rows.iter().filter(|r| r.stable).count();
        assert!(stable > grid.len() / 2, "too few stable grid points for {u:?}");
    }
    finish("7 (inverse-marginal convexity diagnostics)", t0, 2.0);
}

#[test]
fn criterion_8_dominance_and_least_favorable() {
    let t0 = Instant::now();
    // first order along the drift family
    let m = MarketQ::new(1.0, 0.0, 1.0, 0.1).unwrap();
    let low = PhysicalLognormal { mu: 0.01, sigma: 0.1 }.stock_law(&m);
    for &mu in &[0.02, 0.05, 0.1] {
        let hi = PhysicalLognormal { mu, sigma: 0.1 }.stock_law(&m);
        assert!(
            orders::check_fsd(&low, &hi, 2048, 1e-9).unwrap().holds(),
            "FSD fails for mu={mu}"
        );
    }

    // second order on the 8x8 rectangle grid with (mu1 - r)/s^2 = 1
    let amb = AmbiguitySet::DriftVolRectangle {
        mu1: 0.01,
        mu2: 0.05,
        sigma1: 0.05,
        sigma_max: 0.1,
    };
    let lf = markets::least_favorable(&amb, OrderFamily::Ssd, &m).unwrap();
    assert!(lf.report.all_passed());
    let star = PhysicalLognormal { mu: 0.01, sigma: 0.1 };
    for i in 0..8 {
        for j in 0..8 {
            let mu = 0.01 + (0.05 - 0.01) * i as f64 / 7.0;
            let sigma = 0.05 + (0.1 - 0.05) * j as f64 / 7.0;
            let p = PhysicalLognormal { mu, sigma };
            let v = orders::check_ssd(&star.stock_law(&m), &p.stock_law(&m), 256, 1e-9).unwrap();
            assert!(v.holds(), "SSD fails at (mu={mu}, sigma={sigma}): {v:?}");
        }
    }

    // Esscher tilts: the density at h* crosses larger tilts once from above
    // and the stock laws are first-order ordered
    let me = MarketQ::new(1.0, 0.01, 1.0, 0.2).unwrap();
    let fam = EsscherFamily::new(ZDensity::StdNormal, &me).unwrap();
    let amb_e = AmbiguitySet::EsscherSet { h_star: 0.5, h_max: 1.5 };
    let lfe = markets::least_favorable(&amb_e, OrderFamily::Fsd, &me).unwrap();
    assert!(lfe.report.all_passed());
    let grid: Vec<f64> = (0..512)
        .map(|i| 0.2 * (0.2f64.ln() + (8.0f64 / 0.2).ln() * i as f64 / 511.0).exp())
        .collect();
    for &h in &[0.8, 1.0, 1.5] {
        let f = |x: f64| fam.stock_density(0.5, &me, x).unwrap();
        let g = |x: f64| fam.stock_density(h, &me, x).unwrap();
        assert!(
            orders::single_crossing_from_above(f, g, &grid),
            "single crossing fails at h={h}"
        );
        let star = LeastFavorableMeasure::Esscher { h: 0.5 }.as_lognormal(&me);
        let other = LeastFavorableMeasure::Esscher { h }.as_lognormal(&me);
        assert!(orders::check_fsd(
            &star.stock_law(&me),
            &other.stock_law(&me),
            2048,
            1e-9
        )
        .unwrap()
        .holds());
    }

    // pushforward: the robust payoff has the target law under the least
    // favorable measure (Kolmogorov-Smirnov on 1e5 seeded draws)
    let mbig = MarketQ::new(1.0, 0.0, 1.0, 0.9).unwrap();
    let amb = AmbiguitySet::DriftHalfLine { mu1: 0.05 };
    let f0 = DistributionSpec::exponential(1.0).unwrap();
    let (payoff, _) =
        efficiency::robust_efficient_payoff(&f0, &amb, OrderFamily::Fsd, &mbig).unwrap();
    let stock_law = PhysicalLognormal { mu: 0.05, sigma: 0.9 }.stock_law(&mbig);
    let mut rng = ChaCha12Rng::seed_from_u64(8);
    let mut draws: Vec<f64> = (0..100_000)
        .map(|_| payoff.eval(stock_law.sample(&mut rng)))
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = ks_distance(&draws, |x| f0.cdf(x));
    assert!(d <= 0.01, "KS distance {d}");
    finish("8 (dominance checks and least favorable verification)", t0, 30.0);
}

#[test]
fn criterion_9_equivalence_audit() {
    let t0 = Instant::now();
    // robust cost-efficient payoff: all three items pass
    let m = MarketQ::new(1.0, 0.0, 1.0, 0.9).unwrap();
    let amb = AmbiguitySet::DriftHalfLine { mu1: 0.05 };
    let f0 = DistributionSpec::exponential(1.0).unwrap();
    let (payoff, _) = efficiency::robust_efficient_payoff(&f0, &amb, OrderFamily::Fsd, &m).unwrap();
    let audit = portfolio::equivalence_audit(&payoff, &amb, OrderFamily::Fsd, &m).unwrap();
    assert!(audit.all_pass, "robust payoff audit: {audit:?}");

    // robust rank-dependent solution with volatility ambiguity and a convex
    // distortion (gamma < 0): all three items pass
    let m2 = MarketQ::new(1.0, 0.0, 1.0, 0.2).unwrap();
    let amb2 = AmbiguitySet::DriftVolRectangle {
        mu1: 0.02,
        mu2: 0.06,
        sigma1: 0.1,
        sigma_max: 0.2,
    };
    let p = RduProblem::new(0.5, -0.06, 1.0, PhysicalLognormal { mu: 0.05, sigma: 0.2 }, m2)
        .unwrap();
    let robust = portfolio::robust_rdu_solve(&p, &amb2).unwrap();
    let audit =
        portfolio::equivalence_audit(&robust.solution.payoff, &amb2, OrderFamily::Ssd, &m2)
            .unwrap();
    assert!(audit.all_pass, "robust RDU audit: {audit:?}");

    // a measure-preserving but non-monotone rearrangement fails every item,
    // each with a witness
    let star = PhysicalLognormal { mu: 0.05, sigma: 0.9 }.stock_law(&m);
    let f0c = f0.clone();
    let mut perturbed = Payoff::from_map(move |s: f64| {
        let mut u = star.cdf(s).clamp(1e-12, 1.0 - 1e-12);
        if (0.3..=0.5).contains(&u) {
            u = 0.8 - u;
        }
        f0c.quantile(u).unwrap()
    });
    perturbed.law_under_measure = Some(("P(mu=0.05, sigma=0.9)".into(), f0));
    let audit = portfolio::equivalence_audit(&perturbed, &amb, OrderFamily::Fsd, &m).unwrap();
    assert!(audit.all_fail, "perturbed payoff audit: {audit:?}");
    for item in &audit.items {
        assert!(item.witness.is_some(), "failed item without witness: {item:?}");
    }
    finish("9 (cost-efficiency equivalence audit)", t0, 10.0);
}
