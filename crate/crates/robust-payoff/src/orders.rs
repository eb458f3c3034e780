//! Stochastic-dominance verdicts between distributions: first, second and
//! third order, plus a single-crossing helper for densities.
//!
//! `F ⪯ G` always means that `G` dominates `F`: every test function in the
//! order's family has a larger integral against `G` than against `F`.
//!
//! All checks are grid verdicts. The grid is quantile-spaced under the
//! equal-weight mixture of the two laws so that the mass of both is resolved
//! without hand tuning; the third-order criterion in particular is evaluated
//! on the support hull spanned by that grid.

use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::{Error, Result};

/// Which integral stochastic order to use.
///
/// The generating families are nested: the second- and third-order families
/// are contained in the first-order family, so first-order dominance implies
/// the other two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderFamily {
    Fsd,
    Ssd,
    Tsd,
}

impl std::fmt::Display for OrderFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OrderFamily::Fsd => write!(f, "FSD"),
            OrderFamily::Ssd => write!(f, "SSD"),
            OrderFamily::Tsd => write!(f, "TSD"),
        }
    }
}

/// Three-valued outcome of a dominance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

/// Outcome of a dominance check on a grid.
///
/// `margin` is the minimum of the defining inequality over the grid (positive
/// = comfortable dominance). The verdict is `Holds` when the inequality holds
/// weakly everywhere, `Fails` when some violation exceeds the tolerance (then
/// `witness` locates the worst violation), and `Inconclusive` for violations
/// within tolerance: near-ties are never coerced to `Holds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub verdict: Verdict,
    pub margin: f64,
    pub witness: Option<f64>,
}

impl DominanceVerdict {
    fn from_margins(points: &[f64], margins: &[f64], tol: f64) -> Self {
        let (mut min, mut arg) = (f64::INFINITY, 0usize);
        for (i, &m) in margins.iter().enumerate() {
            if m < min {
                min = m;
                arg = i;
            }
        }
        let verdict = if min < -tol {
            Verdict::Fails
        } else if min >= 0.0 {
            Verdict::Holds
        } else {
            Verdict::Inconclusive
        };
        DominanceVerdict {
            verdict,
            margin: min,
            witness: if verdict == Verdict::Holds {
                None
            } else {
                Some(points[arg])
            },
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

const GRID_TAIL: f64 = 1e-9;

/// Quantile-spaced grid under the equal-weight mixture of `f` and `g`.
///
/// Points are found by bisection on the mixture cdf; the upper end of the
/// final bracket is returned so atoms are included in the cdf values at the
/// returned points.
pub fn mixture_quantile_grid(
    f: &DistributionSpec,
    g: &DistributionSpec,
    n: usize,
) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Precondition("grid needs at least 2 points".into()));
    }
    let lo = f.quantile(GRID_TAIL)?.min(g.quantile(GRID_TAIL)?).min(0.0);
    let hi = f
        .quantile(1.0 - GRID_TAIL)?
        .max(g.quantile(1.0 - GRID_TAIL)?);
    let mix = |x: f64| 0.5 * (f.cdf(x) + g.cdf(x));
    let mut grid = Vec::with_capacity(n);
    for k in 0..n {
        let p = (k as f64 + 0.5) / n as f64;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if mix(m) < p {
                a = m;
            } else {
                b = m;
            }
        }
        grid.push(b);
    }
    grid.dedup();
    Ok(grid)
}

/// First-order check of `F ⪯ G`: `G`'s cdf must not exceed `F`'s anywhere.
pub fn check_fsd(
    f: &DistributionSpec,
    g: &DistributionSpec,
    grid_size: usize,
    tol: f64,
) -> Result<DominanceVerdict> {
    if grid_size < 16 {
        return Err(Error::Precondition("FSD check needs grid_size >= 16".into()));
    }
    let grid = mixture_quantile_grid(f, g, grid_size)?;
    let margins: Vec<f64> = grid.iter().map(|&x| f.cdf(x) - g.cdf(x)).collect();
    Ok(DominanceVerdict::from_margins(&grid, &margins, tol))
}

/// Second-order check of `F ⪯ G` through lower partial expectations:
/// `∫₀^q F⁻¹ <= ∫₀^q G⁻¹` for all `q`.
pub fn check_ssd(
    f: &DistributionSpec,
    g: &DistributionSpec,
    grid_size: usize,
    tol: f64,
) -> Result<DominanceVerdict> {
    if grid_size < 16 {
        return Err(Error::Precondition("SSD check needs grid_size >= 16".into()));
    }
    // finite means are required; the closed forms are finite for every
    // variant, so this is a formality that keeps the contract explicit.
    let (_, _) = (f.mean()?, g.mean()?);
    let qs: Vec<f64> = (1..=grid_size).map(|k| k as f64 / grid_size as f64).collect();
    let margins = qs
        .iter()
        .map(|&q| Ok(g.partial_expectation(q)? - f.partial_expectation(q)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DominanceVerdict::from_margins(&qs, &margins, tol))
}

/// Third-order check of `G ⪯ F` via the double-integral criterion
/// `∫∫ F <= ∫∫ G` on the grid (note the orientation: the dominated law has
/// the larger double integral).
///
/// Both inner and outer integrals are cumulative trapezoids of the cdf along
/// the mixture-quantile grid, so the criterion is evaluated on the support
/// hull the grid spans; the discretization error is O(grid⁻²) away from
/// atoms.
pub fn check_tsd(
    f: &DistributionSpec,
    g: &DistributionSpec,
    grid_size: usize,
    tol: f64,
) -> Result<DominanceVerdict> {
    if grid_size < 16 {
        return Err(Error::Precondition("TSD check needs grid_size >= 16".into()));
    }
    let mut grid = mixture_quantile_grid(f, g, grid_size)?;
    if grid[0] > 0.0 {
        grid.insert(0, 0.0);
    }
    let d2f = double_cumulative(&grid, |x| f.cdf(x));
    let d2g = double_cumulative(&grid, |x| g.cdf(x));
    let margins: Vec<f64> = d2f.iter().zip(&d2g).map(|(a, b)| b - a).collect();
    Ok(DominanceVerdict::from_margins(&grid, &margins, tol))
}

fn double_cumulative(grid: &[f64], cdf: impl Fn(f64) -> f64) -> Vec<f64> {
    let vals: Vec<f64> = grid.iter().map(|&x| cdf(x)).collect();
    let mut first = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        first[i] = first[i - 1] + 0.5 * (vals[i] + vals[i - 1]) * (grid[i] - grid[i - 1]);
    }
    let mut second = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        second[i] = second[i - 1] + 0.5 * (first[i] + first[i - 1]) * (grid[i] - grid[i - 1]);
    }
    second
}

/// True iff `f - g` changes sign exactly once on the grid, from + to −.
///
/// Values within `1e-12` of the common scale count as ties and are skipped.
pub fn single_crossing_from_above(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    grid: &[f64],
) -> bool {
    let diffs: Vec<f64> = grid.iter().map(|&x| f(x) - g(x)).collect();
    let scale = grid
        .iter()
        .map(|&x| f(x).abs().max(g(x).abs()))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let signs: Vec<i8> = diffs
        .iter()
        .filter(|d| d.abs() > 1e-12 * scale)
        .map(|d| if *d > 0.0 { 1 } else { -1 })
        .collect();
    if signs.is_empty() || signs[0] != 1 || *signs.last().unwrap() != -1 {
        return false;
    }
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    changes == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionSpec::{self, Uniform01};
    use crate::numerics::integrate;
    use crate::numerics::QuadratureSpec;

    const N: usize = 2048;
    const TOL: f64 = 1e-9;

    fn ln(m: f64, v: f64) -> DistributionSpec {
        DistributionSpec::lognormal(m, v).unwrap()
    }

    fn stock_law(mu: f64, sigma: f64) -> DistributionSpec {
        // S0 = 1, T = 1
        ln(mu - 0.5 * sigma * sigma, sigma)
    }

    #[test]
    fn fsd_reflexive_with_zero_margin() {
        let d = ln(0.1, 0.4);
        let v = check_fsd(&d, &d, N, TOL).unwrap();
        assert_eq!(v.verdict, Verdict::Holds);
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn fsd_lognormals_ordered_by_drift() {
        let v = check_fsd(&stock_law(0.01, 0.1), &stock_law(0.05, 0.1), N, TOL).unwrap();
        assert!(v.holds(), "{v:?}");
        // and strictly fails the other way around
        let v = check_fsd(&stock_law(0.05, 0.1), &stock_law(0.01, 0.1), N, TOL).unwrap();
        assert_eq!(v.verdict, Verdict::Fails);
        assert!(v.witness.is_some());
    }

    #[test]
    fn fsd_two_point_vs_uniform_fails_with_witness() {
        let two = DistributionSpec::two_point(1.0 / 3.0).unwrap();
        // Uniform01 does not dominate the two-point law in FSD: on (1/3, 1)
        // the uniform cdf exceeds the two-point cdf.
        let v = check_fsd(&two, &Uniform01, N, TOL).unwrap();
        assert_eq!(v.verdict, Verdict::Fails);
        let w = v.witness.unwrap();
        assert!(w > 1.0 / 3.0 && w < 1.0, "witness {w}");
    }

    #[test]
    fn ssd_reflexive_and_drift_vol_ordered_pair() {
        let d = ln(0.0, 0.5);
        assert!(check_ssd(&d, &d, N, TOL).unwrap().holds());
        // law of S_T under P^{mu1, s} vs under P^{mu, sigma} with
        // mu1 <= mu, sigma <= s: dominated in SSD.
        let v = check_ssd(&stock_law(0.01, 0.1), &stock_law(0.05, 0.05), N, TOL).unwrap();
        assert!(v.holds(), "{v:?}");
    }

    #[test]
    fn ssd_mean_preserving_spread_both_directions() {
        let two = DistributionSpec::two_point(0.5).unwrap();
        // Equal means (1/2). The two-point law is the spread: it is
        // dominated by the uniform and does not dominate it.
        let dominated = check_ssd(&two, &Uniform01, N, TOL).unwrap();
        assert!(dominated.holds(), "{dominated:?}");
        let dominating = check_ssd(&Uniform01, &two, N, TOL).unwrap();
        assert_eq!(dominating.verdict, Verdict::Fails);

        // Cross-check the margins against direct quadrature of the quantile
        // difference.
        let spec = QuadratureSpec::default();
        for &q in &[0.25, 0.5, 0.75] {
            let diff = integrate(
                |p| two.quantile(p).unwrap() - Uniform01.quantile(p).unwrap(),
                1e-9,
                q,
                &spec,
            );
            // the two-point quantile is a step; adaptive Simpson may hit the
            // depth cap at the jump, in which case the best estimate is used
            let val = match diff {
                Ok(v) => v,
                Err(crate::Error::QuadratureDepth { best, .. }) => best,
                Err(e) => panic!("{e}"),
            };
            let by_pe =
                two.partial_expectation(q).unwrap() - Uniform01.partial_expectation(q).unwrap();
            assert!((val - by_pe).abs() < 1e-5, "q={q}: {val} vs {by_pe}");
        }
    }

    #[test]
    fn tsd_reflexive() {
        let d = ln(0.2, 0.3);
        assert!(check_tsd(&d, &d, N, TOL).unwrap().holds());
    }

    #[test]
    fn tsd_counterexample_threshold_at_one_third() {
        // F uniform, G two-point with mass p0 at zero: on (0,1) the double
        // integrals are η³/6 and p0 η²/2, so G ⪯ F exactly when p0 >= 1/3.
        let two = DistributionSpec::two_point(1.0 / 3.0).unwrap();
        let v = check_tsd(&Uniform01, &two, N, TOL).unwrap();
        assert!(v.holds(), "{v:?}");

        let two = DistributionSpec::two_point(0.2).unwrap();
        let v = check_tsd(&Uniform01, &two, N, TOL).unwrap();
        assert_eq!(v.verdict, Verdict::Fails);
        // η³/6 > 0.1 η² once η > 0.6
        let w = v.witness.unwrap();
        assert!(w > 0.6, "witness {w}");
    }

    #[test]
    fn single_crossing_cases() {
        let grid: Vec<f64> = (1..400).map(|i| i as f64 * 0.02).collect();
        let d1 = ln(0.0, 0.3);
        let d2 = ln(0.4, 0.3);
        let f = |x: f64| {
            let z = (x.ln() - 0.0) / 0.3;
            (-0.5 * z * z).exp() / (x * 0.3)
        };
        let g = |x: f64| {
            let z = (x.ln() - 0.4) / 0.3;
            (-0.5 * z * z).exp() / (x * 0.3)
        };
        let _ = (d1, d2);
        assert!(single_crossing_from_above(f, g, &grid));
        assert!(!single_crossing_from_above(f, f, &grid));
        assert!(!single_crossing_from_above(g, f, &grid)); // crosses from below
    }

    #[test]
    fn verdict_monotone_across_families() {
        // FSD holds ⇒ SSD holds ⇒ TSD holds (on the implemented grid). The
        // second pair differs in volatility, so only the weaker orders hold.
        let pairs = [
            (stock_law(0.01, 0.1), stock_law(0.05, 0.1)),
            (stock_law(0.02, 0.2), stock_law(0.06, 0.15)),
            (
                DistributionSpec::exponential(1.5).unwrap(),
                DistributionSpec::exponential(1.0).unwrap(),
            ),
        ];
        for (i, (f, g)) in pairs.iter().enumerate() {
            let fsd = check_fsd(f, g, N, TOL).unwrap().holds();
            let ssd = check_ssd(f, g, N, TOL).unwrap().holds();
            // note the orientation: check_tsd(a, b) is the verdict on b ⪯ a
            let tsd = check_tsd(g, f, N, TOL).unwrap().holds();
            if fsd {
                assert!(ssd, "pair {i}: FSD holds but SSD does not");
            }
            if ssd {
                assert!(tsd, "pair {i}: SSD holds but TSD does not");
            }
            assert!(ssd, "pair {i}: SSD expected for every test pair");
        }
        // the mixed-volatility pair exercises SSD-without-FSD
        assert!(!check_fsd(&pairs[1].0, &pairs[1].1, N, TOL).unwrap().holds());
    }

    /// Exact FSD oracle for step cdfs: compare at every atom.
    fn fsd_oracle(f: &[f64], g: &[f64]) -> bool {
        let fd = DistributionSpec::empirical(f.to_vec()).unwrap();
        let gd = DistributionSpec::empirical(g.to_vec()).unwrap();
        let mut atoms: Vec<f64> = f.iter().chain(g.iter()).cloned().collect();
        atoms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        atoms.iter().all(|&x| gd.cdf(x) <= fd.cdf(x))
    }

    #[test]
    fn fsd_agrees_with_exact_oracle_on_empiricals() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for case in 0..40 {
            let n = rng.gen_range(2..=32);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
            let ys: Vec<f64> = if case % 3 == 0 {
                // shifted copy: true dominance
                xs.iter().map(|x| x + rng.gen_range(0.0..0.5)).collect()
            } else {
                (0..n).map(|_| rng.gen_range(0.0..4.0)).collect()
            };
            let f = DistributionSpec::empirical(xs.clone()).unwrap();
            let g = DistributionSpec::empirical(ys.clone()).unwrap();
            let verdict = check_fsd(&f, &g, N, 1e-12).unwrap();
            let oracle = fsd_oracle(&xs, &ys);
            match verdict.verdict {
                Verdict::Holds => assert!(oracle, "case {case}: grid holds, oracle fails"),
                Verdict::Fails => assert!(!oracle, "case {case}: grid fails, oracle holds"),
                Verdict::Inconclusive => {}
            }
        }
    }

    /// Sorting-based convex-order oracle for equal-probability, equal-mean
    /// empiricals: dominance holds iff all prefix sums of the sorted atoms
    /// are ordered.
    fn ssd_oracle(f: &[f64], g: &[f64]) -> bool {
        let mut a = f.to_vec();
        let mut b = g.to_vec();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut sa = 0.0;
        let mut sb = 0.0;
        for i in 0..a.len() {
            sa += a[i];
            sb += b[i];
            if sa > sb + 1e-12 {
                return false;
            }
        }
        true
    }

    #[test]
    fn ssd_agrees_with_sorting_oracle_on_equal_mean_empiricals() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for case in 0..40 {
            let n = rng.gen_range(2..=16);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..4.0)).collect();
            // mean-preserving tweak: move mass between two atoms
            let mut ys = xs.clone();
            if n >= 2 {
                let d = rng.gen_range(0.0..0.4);
                ys[0] = (ys[0] - d).max(0.0);
                ys[1] += xs[0] - ys[0];
            }
            let f = DistributionSpec::empirical(xs.clone()).unwrap();
            let g = DistributionSpec::empirical(ys.clone()).unwrap();
            let verdict = check_ssd(&f, &g, N, 1e-12).unwrap();
            let oracle = ssd_oracle(&xs, &ys);
            match verdict.verdict {
                Verdict::Holds => assert!(oracle, "case {case}"),
                Verdict::Fails => assert!(!oracle, "case {case}"),
                Verdict::Inconclusive => {}
            }
        }
    }
}

