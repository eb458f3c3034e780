//! Command-line front end: one scenario file per invocation, verdicts,
//! prices and curves out as CSV plus a JSON summary.
//!
//! Every summary embeds the fully resolved configuration (defaults
//! materialized), and identical configuration plus seed produces
//! byte-identical CSV output. Numbers are written with 17 significant
//! digits, `.` decimal separator and comma delimiters.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::distributions::DistributionSpec;
use crate::efficiency::{self, PriceOptions};
use crate::markets::{self, AmbiguitySet, MarketQ, PhysicalLognormal};
use crate::orders::{self, OrderFamily};
use crate::portfolio::{self, RduProblem};
use crate::{Error, Result};

/// Rank-dependent-utility parameters of a scenario.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RduConfig {
    pub eta: f64,
    pub gamma: f64,
    pub x0: f64,
}

/// Numerical knobs with scenario-level defaults.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Tolerances {
    /// Dominance-check tolerance.
    pub tol: f64,
    /// Dominance/curve grid size.
    pub grid: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { tol: 1e-9, grid: 2048 }
    }
}

/// Which artifacts to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Csv,
    Json,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Csv, OutputKind::Json]
}

fn default_seed() -> u64 {
    42
}

/// A single JSON scenario: market, ambiguity set, target law and options.
/// Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Scenario {
    pub market: MarketQ,
    pub ambiguity: AmbiguitySet,
    pub target: DistributionSpec,
    pub order_family: OrderFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rdu: Option<RduConfig>,
    /// Second distribution for `order-check` and `tsd-counterexample`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<DistributionSpec>,
    /// Anchor for `rationalize`; defaults to the payoff's lower quartile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationalize_anchor: Option<f64>,
    /// Drift lower bounds for `figure1`; defaults to 0.05, 0.10, …, 0.50.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu1_grid: Option<Vec<f64>>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Scenario {
    fn validate(&self) -> Result<()> {
        self.market.validate().map_err(validation)?;
        self.ambiguity.validate(&self.market).map_err(validation)?;
        self.target.validate().map_err(validation)?;
        if let Some(r) = &self.reference {
            r.validate().map_err(validation)?;
        }
        if let Some(rdu) = &self.rdu {
            if !(rdu.eta > 0.0 && rdu.eta < 1.0) {
                return Err(Error::Validation(format!(
                    "rdu.eta must lie in (0,1), got {}",
                    rdu.eta
                )));
            }
            if !(rdu.x0 > 0.0) {
                return Err(Error::Validation(format!("rdu.x0 must be > 0, got {}", rdu.x0)));
            }
        }
        if self.tolerances.grid < 16 {
            return Err(Error::Validation("tolerances.grid must be at least 16".into()));
        }
        if !(self.tolerances.tol > 0.0) {
            return Err(Error::Validation("tolerances.tol must be > 0".into()));
        }
        Ok(())
    }
}

fn validation(e: Error) -> Error {
    Error::Validation(e.to_string())
}

/// The built-in scenario: the drift-ambiguity market with an exponential
/// target (spot 1, zero rate, one year, volatility 0.9).
pub fn default_scenario() -> Scenario {
    Scenario {
        market: MarketQ { s0: 1.0, r: 0.0, t: 1.0, s: 0.9 },
        ambiguity: AmbiguitySet::DriftHalfLine { mu1: 0.05 },
        target: DistributionSpec::Exponential { rate: 1.0 },
        order_family: OrderFamily::Fsd,
        rdu: None,
        reference: None,
        rationalize_anchor: None,
        mu1_grid: None,
        outputs: default_outputs(),
        seed: default_seed(),
        tolerances: Tolerances::default(),
    }
}

/// The built-in third-order counterexample scenario: volatility 0.1, drift
/// bound 0.01, spot chosen so the likelihood ratio is (a constant times)
/// the stock, uniform target versus a two-point reference with mass 1/3 at
/// zero.
pub fn tsd_counterexample_scenario() -> Scenario {
    Scenario {
        market: MarketQ { s0: (-0.0025f64).exp(), r: 0.0, t: 1.0, s: 0.1 },
        ambiguity: AmbiguitySet::DriftHalfLine { mu1: 0.01 },
        target: DistributionSpec::Uniform01,
        order_family: OrderFamily::Tsd,
        reference: Some(DistributionSpec::TwoPoint { p0: 1.0 / 3.0 }),
        ..default_scenario()
    }
}

/// Subcommands of the front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Price,
    Efficient,
    RobustEfficient,
    OrderCheck,
    Rdu,
    Rationalize,
    Figure1,
    TsdCounterexample,
    Replicate,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Price => "price",
            CommandKind::Efficient => "efficient",
            CommandKind::RobustEfficient => "robust-efficient",
            CommandKind::OrderCheck => "order-check",
            CommandKind::Rdu => "rdu",
            CommandKind::Rationalize => "rationalize",
            CommandKind::Figure1 => "figure1",
            CommandKind::TsdCounterexample => "tsd-counterexample",
            CommandKind::Replicate => "replicate",
        }
    }

    fn default_scenario(&self) -> Scenario {
        match self {
            CommandKind::TsdCounterexample => tsd_counterexample_scenario(),
            _ => default_scenario(),
        }
    }
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub grid: Option<usize>,
}

/// Files written by one invocation.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
    pub summary: serde_json::Value,
}

/// Loads the scenario (or the command's built-in default), applies the
/// overrides, runs the subcommand and writes its artifacts.
pub fn run(
    command: CommandKind,
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> Result<RunOutput> {
    let mut scenario = match config_path {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<Scenario>(&text)
                .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?
        }
        None => command.default_scenario(),
    };
    if let Some(seed) = overrides.seed {
        scenario.seed = seed;
    }
    if let Some(tol) = overrides.tol {
        scenario.tolerances.tol = tol;
    }
    if let Some(grid) = overrides.grid {
        scenario.tolerances.grid = grid;
    }
    scenario.validate()?;

    let out_dir = std::env::var_os("ROBUST_PAYOFF_OUT")
        .map(PathBuf::from)
        .or_else(|| overrides.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out_dir)?;

    let (csv, results) = match command {
        CommandKind::Price => run_price(&scenario)?,
        CommandKind::Efficient => run_efficient(&scenario)?,
        CommandKind::RobustEfficient => run_robust_efficient(&scenario)?,
        CommandKind::OrderCheck => run_order_check(&scenario)?,
        CommandKind::Rdu => run_rdu(&scenario)?,
        CommandKind::Rationalize => run_rationalize(&scenario)?,
        CommandKind::Figure1 => run_figure1(&scenario)?,
        CommandKind::TsdCounterexample => run_tsd_counterexample(&scenario)?,
        CommandKind::Replicate => run_replicate(&scenario)?,
    };

    let summary = json!({
        "command": command.name(),
        "config": scenario,
        "results": results,
    });
    let mut csv_path = None;
    let mut summary_path = None;
    if scenario.outputs.contains(&OutputKind::Csv) {
        let path = out_dir.join(format!("{}.csv", command.name()));
        fs::write(&path, csv)?;
        csv_path = Some(path);
    }
    if scenario.outputs.contains(&OutputKind::Json) {
        let path = out_dir.join(format!("{}_summary.json", command.name()));
        fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
        summary_path = Some(path);
    }
    Ok(RunOutput { csv_path, summary_path, summary })
}

/// 17 significant digits, '.' decimal separator.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn stock_grid(scenario: &Scenario, n: usize) -> Result<Vec<f64>> {
    scenario.market.q_law().quantile_grid(n, 1e-3)
}

fn run_price(s: &Scenario) -> Result<(String, serde_json::Value)> {
    let (payoff, report) =
        efficiency::robust_efficient_payoff(&s.target, &s.ambiguity, s.order_family, &s.market)?;
    let opts = PriceOptions { seed: s.seed, ..PriceOptions::default() };
    let breakdown = efficiency::price_with(&payoff, &s.market, &opts)?;
    let mut csv = String::from("quadrature,monte_carlo,std_error\n");
    csv.push_str(&format!(
        "{},{},{}\n",
        fmt(breakdown.quadrature),
        fmt(breakdown.monte_carlo),
        fmt(breakdown.std_error)
    ));
    let results = json!({
        "price": breakdown.quadrature,
        "monteCarlo": breakdown.monte_carlo,
        "stdError": breakdown.std_error,
        "measureUsed": report.measure_used,
        "hypothesisChecks": report.hypothesis_checks,
    });
    Ok((csv, results))
}

fn run_efficient(s: &Scenario) -> Result<(String, serde_json::Value)> {
    let lf = markets::least_favorable(&s.ambiguity, s.order_family, &s.market)?;
    let payoff = efficiency::efficient_payoff(&s.target, &lf.ratio, &s.market)?;
    let price = efficiency::price_quadrature(&payoff, &s.market)?;
    let grid = stock_grid(s, 257)?;
    let mut csv = String::from("stock,payoff\n");
    for &x in &grid {
        csv.push_str(&format!("{},{}\n", fmt(x), fmt(payoff.eval(x))));
    }
    let results = json!({
        "price": price,
        "measure": lf.measure,
    });
    Ok((csv, results))
}

fn run_robust_efficient(s: &Scenario) -> Result<(String, serde_json::Value)> {
    let (payoff, report) =
        efficiency::robust_efficient_payoff(&s.target, &s.ambiguity, s.order_family, &s.market)?;
    let grid = stock_grid(s, 257)?;
    let mut csv = String::from("stock,payoff\n");
    for &x in &grid {
        csv.push_str(&format!("{},{}\n", fmt(x), fmt(payoff.eval(x))));
    }
    let results = json!({
        "price": report.price,
        "measureUsed": report.measure_used,
        "hypothesisChecks": report.hypothesis_checks,
    });
    Ok((csv, results))
}

fn run_order_check(s: &Scenario) -> Result<(String, serde_json::Value)> {
    let reference = s.reference.clone().ok_or_else(|| {
        Error::Validation("order-check needs a `reference` distribution in the scenario".into())
    })?;
    let (n, tol) = (s.tolerances.grid, s.tolerances.tol);
    let f = &s.target;
    let g = &reference;
    let rows = [
        ("fsd", "target<=reference", orders::check_fsd(f, g, n, tol)?),
        ("fsd", "reference<=target", orders::check_fsd(g, f, n, tol)?),
        ("ssd", "target<=reference", orders::check_ssd(f, g, n, tol)?),
        ("ssd", "reference<=target", orders::check_ssd(g, f, n, tol)?),
        // third-order orientation: check_tsd(a, b) decides b ⪯ a
        ("tsd", "target<=reference", orders::check_tsd(g, f, n, tol)?),
        ("tsd", "reference<=target", orders::check_tsd(f, g, n, tol)?),
    ];
    let mut csv = String::from("family,direction,verdict,margin,witness\n");
    let mut items = Vec::new();
    for (family, direction, v) in &rows {
        csv.push_str(&format!(
            "{family},{direction},{:?},{},{}\n",
            v.verdict,
            fmt(v.margin),
            v.witness.map(fmt).unwrap_or_default()
        ));
        items.push(json!({
            "family": family,
            "direction": direction,
            "verdict": v.verdict,
            "margin": v.margin,
            "witness": v.witness,
        }));
    }
    Ok((csv, json!({ "checks": items })))
}

fn rdu_problem(s: &Scenario) -> Result<(RduProblem, RduConfig)> {
    let cfg = s.rdu.ok_or_else(|| {
        Error::Validation("this command needs an `rdu` section in the scenario".into())
    })?;
    let (mu, sigma) = match s.ambiguity {
        AmbiguitySet::DriftHalfLine { mu1 } => (mu1, s.market.s),
        AmbiguitySet::DriftVolRectangle { mu1, sigma_max, .. } => (mu1, sigma_max),
        AmbiguitySet::EsscherSet { .. } => {
            return Err(Error::NotCovered(
                "rank-dependent solving is not covered for Esscher ambiguity".into(),
            ))
        }
    };
    let problem = RduProblem::new(
        cfg.eta,
        cfg.gamma,
        cfg.x0,
        PhysicalLognormal { mu, sigma },
        s.market,
    )?;
    Ok((problem, cfg))
}

fn run_rdu(s: &Scenario) -> Result<(String, serde_json::Value)> {
    let (problem, _) = rdu_problem(s)?;
    let robust = portfolio::robust_rdu_solve(&problem, &s.ambiguity)?;
    let sol = &robust.solution;
    let grid = stock_grid(s, 257)?;
    let mut csv = String::from("stock,payoff\n");
    for &x in &grid {
        csv.push_str(&format!("{},{}\n", fmt(x), fmt(sol.payoff.eval(x))));
    }
    let results = json!({
        "lambda": sol.lambda_multiplier,
        "case": sol.case_tag,
        "exponent": sol.exponent,
        "scale": sol.scale,
        "budget": sol.budget,
        "envelopeConsistent": sol.envelope.consistent,
        "provenance": robust.provenance,
    });
    Ok((csv, results))
}

fn run_rationalize(s: &Scenario) -> Result<(String, serde_json::Value)> {
    // rationalize the robust rank-dependent solution when RDU parameters
    // are present, otherwise the robust cost-efficient payoff
    let lf = markets::least_favorable(&s.ambiguity, s.order_family, &s.market)?;
    let payoff = if s.rdu.is_some() {
        let (problem, _) = rdu_problem(s)?;
        portfolio::robust_rdu_solve(&problem, &s.ambiguity)?.solution.payoff
    } else {
        efficiency::robust_efficient_payoff(&s.target, &s.ambiguity, s.order_family, &s.market)?.0
    };
    let law = payoff
        .law_under_measure
        .as_ref()
        .map(|(_, l)| l.clone())
        .ok_or_else(|| Error::Precondition("payoff law unavailable".into()))?;
    let c = match s.rationalize_anchor {
        Some(c) => c,
        None => law.quantile(0.25)?,
    };
    let rat = portfolio::rationalize_utility(&payoff, &lf.ratio, &s.market, c)?;
    let mut csv = String::from("wealth,utility,marginal_utility\n");
    let knots = rat.tabulated.knots();
    let values = rat.tabulated.values();
    let marginals = rat.marginal.values();
    for i in (0..knots.len()).step_by(16) {
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt(knots[i]),
            fmt(values[i]),
            fmt(marginals[i])
        ));
    }
    let results = json!({
        "anchor": rat.c,
        "fittedExponent": rat.fitted_exponent,
        "knots": knots.len(),
    });
    Ok((csv, results))
}

fn run_figure1(s: &Scenario) -> Result<(String, serde_json::Value)> {
    let grid: Vec<f64> = match &s.mu1_grid {
        Some(g) => g.clone(),
        None => (1..=10).map(|k| 0.05 * k as f64).collect(),
    };
    let out = efficiency::figure1_curves(&s.market, &grid, &s.target, 201)?;
    let mut csv = String::from("mu1,price,stock,normalized_payoff\n");
    for curve in &out.curves {
        for (&x, &v) in curve.stock.iter().zip(&curve.normalized_payoff) {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt(curve.mu1),
                fmt(curve.price),
                fmt(x),
                fmt(v)
            ));
        }
    }
    let strictly_decreasing = out.prices.windows(2).all(|w| w[1].price < w[0].price);
    let results = json!({
        "prices": out.prices,
        "strictlyDecreasing": strictly_decreasing,
    });
    Ok((csv, results))
}

fn run_tsd_counterexample(s: &Scenario) -> Result<(String, serde_json::Value)> {
    let reference = s
        .reference
        .clone()
        .unwrap_or(DistributionSpec::TwoPoint { p0: 1.0 / 3.0 });
    let lf = markets::least_favorable(&s.ambiguity, OrderFamily::Tsd, &s.market)?;
    let x_f = efficiency::efficient_payoff(&s.target, &lf.ratio, &s.market)?;
    let x_g = efficiency::efficient_payoff(&reference, &lf.ratio, &s.market)?;
    let price_f = efficiency::price_quadrature(&x_f, &s.market)?;
    let price_g = efficiency::price_quadrature(&x_g, &s.market)?;
    // the reference is dominated by the target in third order, yet its
    // cheapest attainment costs more: cost-consistency fails
    let verdict = orders::check_tsd(&s.target, &reference, s.tolerances.grid, s.tolerances.tol)?;

    let grid = orders::mixture_quantile_grid(&s.target, &reference, 257)?;
    let mut csv = String::from("stock,payoff_target,payoff_reference\n");
    for &x in &grid {
        csv.push_str(&format!("{},{},{}\n", fmt(x), fmt(x_f.eval(x)), fmt(x_g.eval(x))));
    }
    let results = json!({
        "priceF": price_f,
        "priceG": price_g,
        "tsdHolds": verdict.holds(),
        "tsdMargin": verdict.margin,
        "priceGGreaterThanPriceF": price_g > price_f,
    });
    Ok((csv, results))
}

fn run_replicate(s: &Scenario) -> Result<(String, serde_json::Value)> {
    let (payoff, report) =
        efficiency::robust_efficient_payoff(&s.target, &s.ambiguity, s.order_family, &s.market)?;
    let n = s.tolerances.grid.clamp(16, 513);
    let strikes = s.market.q_law().quantile_grid(n, 1e-4)?;
    let rep = efficiency::replicate_with_calls(&payoff, &strikes, &s.market)?;
    let mut csv = String::from("strike,call_weight\n");
    for (&k, &w) in rep.strikes.iter().zip(&rep.call_weights) {
        csv.push_str(&format!("{},{}\n", fmt(k), fmt(w)));
    }
    let cost = rep.cost(&s.market);
    let reference = report.price.expect("verified construction");
    let mut max_mid_error = 0.0f64;
    for w in strikes.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        max_mid_error = max_mid_error.max((rep.value_at(mid) - payoff.eval(mid)).abs());
    }
    let results = json!({
        "bond": rep.bond,
        "forward": rep.forward,
        "strikes": rep.strikes.len(),
        "replicationCost": cost,
        "payoffPrice": reference,
        "maxMidpointError": max_mid_error,
    });
    Ok((csv, results))
}

/// Maps an error to the process exit code: 2 for violated hypotheses or
/// uncovered requests, 3 for validation problems, 1 otherwise.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::HypothesisViolated { .. } | Error::NotCovered(_) | Error::Precondition(_) => 2,
        Error::Validation(_) | Error::Domain(_) | Error::Json(_) => 3,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn overrides_for(dir: &Path) -> Overrides {
        Overrides { out: Some(dir.to_path_buf()), ..Overrides::default() }
    }

    #[test]
    fn tsd_counterexample_defaults_reproduce_reported_values() {
        let dir = tempdir().unwrap();
        let out = run(CommandKind::TsdCounterexample, None, &overrides_for(dir.path())).unwrap();
        let r = &out.summary["results"];
        let price_f = r["priceF"].as_f64().unwrap();
        let price_g = r["priceG"].as_f64().unwrap();
        assert!((price_f - 0.472).abs() < 0.002, "{price_f}");
        assert!((price_g - 0.63).abs() < 0.01, "{price_g}");
        assert_eq!(r["tsdHolds"], json!(true));
        assert_eq!(r["priceGGreaterThanPriceF"], json!(true));
        // summary embeds the resolved config
        assert!(out.summary["config"]["market"]["s"].as_f64().unwrap() == 0.1);
    }

    #[test]
    fn figure1_price_column_strictly_decreasing_and_deterministic() {
        let dir = tempdir().unwrap();
        let out = run(CommandKind::Figure1, None, &overrides_for(dir.path())).unwrap();
        assert_eq!(out.summary["results"]["strictlyDecreasing"], json!(true));
        let csv1 = fs::read(out.csv_path.as_ref().unwrap()).unwrap();
        let out2 = run(CommandKind::Figure1, None, &overrides_for(dir.path())).unwrap();
        let csv2 = fs::read(out2.csv_path.as_ref().unwrap()).unwrap();
        assert_eq!(csv1, csv2, "byte-identical CSV for identical config");
    }

    #[test]
    fn robust_efficient_exit_code_on_violated_gate() {
        // (mu1 - r)/s^2 = 2 under the second-order family: hypothesis gate
        let dir = tempdir().unwrap();
        let scenario = Scenario {
            market: MarketQ { s0: 1.0, r: 0.0, t: 1.0, s: 0.1 },
            ambiguity: AmbiguitySet::DriftVolRectangle {
                mu1: 0.02,
                mu2: 0.05,
                sigma1: 0.05,
                sigma_max: 0.1,
            },
            order_family: OrderFamily::Ssd,
            ..default_scenario()
        };
        let path = dir.path().join("scenario.json");
        fs::write(&path, serde_json::to_string(&scenario).unwrap()).unwrap();
        let err = run(
            CommandKind::RobustEfficient,
            Some(&path),
            &overrides_for(dir.path()),
        )
        .unwrap_err();
        assert_eq!(exit_code_for(&err), 2);
        assert!(err.to_string().contains("(0, 1]"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(
            &path,
            r#"{"market":{"s0":1.0,"r":0.0,"t":1.0,"s":0.9},"ambiguity":{"type":"driftHalfLine","mu1":0.05},"target":{"type":"uniform01"},"orderFamily":"fsd","surprise":1}"#,
        )
        .unwrap();
        let err = run(CommandKind::Price, Some(&path), &overrides_for(dir.path())).unwrap_err();
        assert_eq!(exit_code_for(&err), 3);
        assert!(err.to_string().contains("surprise"), "{err}");
    }

    #[test]
    fn order_check_and_rdu_and_rationalize_run_end_to_end() {
        let dir = tempdir().unwrap();
        let scenario = Scenario {
            market: MarketQ { s0: 1.0, r: 0.0, t: 1.0, s: 0.2 },
            ambiguity: AmbiguitySet::DriftHalfLine { mu1: 0.05 },
            target: DistributionSpec::Uniform01,
            reference: Some(DistributionSpec::TwoPoint { p0: 1.0 / 3.0 }),
            rdu: Some(RduConfig { eta: 0.5, gamma: 0.3, x0: 1.0 }),
            order_family: OrderFamily::Fsd,
            ..default_scenario()
        };
        let path = dir.path().join("scenario.json");
        fs::write(&path, serde_json::to_string(&scenario).unwrap()).unwrap();

        let out = run(CommandKind::OrderCheck, Some(&path), &overrides_for(dir.path())).unwrap();
        assert_eq!(out.summary["results"]["checks"].as_array().unwrap().len(), 6);

        let out = run(CommandKind::Rdu, Some(&path), &overrides_for(dir.path())).unwrap();
        assert!(out.summary["results"]["budget"].as_f64().unwrap() > 0.0);
        assert_eq!(out.summary["results"]["envelopeConsistent"], json!(true));

        let out = run(CommandKind::Rationalize, Some(&path), &overrides_for(dir.path())).unwrap();
        let exp = out.summary["results"]["fittedExponent"].as_f64().unwrap();
        // 1 - eta theta/(gamma+theta) with theta = 0.25
        assert!((exp - (1.0 - 0.5 * 0.25 / 0.55)).abs() < 1e-6, "{exp}");

        let out = run(CommandKind::Replicate, Some(&path), &overrides_for(dir.path())).unwrap();
        let cost = out.summary["results"]["replicationCost"].as_f64().unwrap();
        let price = out.summary["results"]["payoffPrice"].as_f64().unwrap();
        assert!((cost - price).abs() < 5e-3 * price.max(0.1), "{cost} vs {price}");
    }

    #[test]
    fn efficient_and_price_with_default_scenario() {
        let dir = tempdir().unwrap();
        let out = run(CommandKind::Efficient, None, &overrides_for(dir.path())).unwrap();
        // Panel-A shape: below the limit value 1 once mu1 is above the rate
        let price = out.summary["results"]["price"].as_f64().unwrap();
        assert!(price > 0.5 && price < 1.0, "{price}");
        let out = run(CommandKind::Price, None, &overrides_for(dir.path())).unwrap();
        let q = out.summary["results"]["price"].as_f64().unwrap();
        let mc = out.summary["results"]["monteCarlo"].as_f64().unwrap();
        let se = out.summary["results"]["stdError"].as_f64().unwrap();
        assert!((q - mc).abs() <= 3.0 * se + 1e-9);
    }

    #[test]
    fn seventeen_significant_digit_format() {
        assert_eq!(fmt(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt(1.0), "1.0000000000000000e0");
        // round-trips exactly
        let x = 0.4718100627840132;
        assert_eq!(fmt(x).parse::<f64>().unwrap(), x);
    }
}
