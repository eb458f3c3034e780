//! Univariate laws on the nonnegative half-line used as target distributions
//! and as laws of the terminal stock and of likelihood ratios.
//!
//! Quantiles follow the left-continuous generalized-inverse convention
//! F⁻¹(p) = inf{x : F(x) >= p}; cdfs are right-continuous.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{self, QuadratureSpec};
use crate::{Error, Result};

/// A univariate distribution supported on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Exponential law, cdf `1 - exp(-rate x)`.
    #[serde(rename_all = "camelCase")]
    Exponential { rate: f64 },
    /// Lognormal law of `exp(N(log_mean, log_std²))`.
    ///
    /// The second parameter is always the standard deviation of the log,
    /// never its variance.
    #[serde(rename_all = "camelCase")]
    Lognormal { log_mean: f64, log_std: f64 },
    /// Uniform law on `[0, 1]`.
    Uniform01,
    /// Mass `p0` at 0 and `1 - p0` at 1.
    #[serde(rename_all = "camelCase")]
    TwoPoint { p0: f64 },
    /// Step cdf through the given atoms (kept ascending; ties allowed).
    #[serde(rename_all = "camelCase")]
    Empirical { samples: Vec<f64> },
}

use DistributionSpec::*;

impl DistributionSpec {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!("exponential rate must be > 0, got {rate}")));
        }
        Ok(Exponential { rate })
    }

    pub fn lognormal(log_mean: f64, log_std: f64) -> Result<Self> {
        if !log_mean.is_finite() || !(log_std > 0.0 && log_std.is_finite()) {
            return Err(Error::Domain(format!(
                "lognormal needs finite log_mean and log_std > 0, got ({log_mean}, {log_std})"
            )));
        }
        Ok(Lognormal { log_mean, log_std })
    }

    pub fn two_point(p0: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::Domain(format!("two-point mass p0 must lie in (0,1), got {p0}")));
        }
        Ok(TwoPoint { p0 })
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("empirical law needs at least one sample".into()));
        }
        if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Domain("empirical samples must be finite and nonnegative".into()));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Empirical { samples })
    }

    /// Validates a deserialized literal (the constructors validate on entry).
    pub fn validate(&self) -> Result<()> {
        match self {
            Exponential { rate } => Self::exponential(*rate).map(|_| ()),
            Lognormal { log_mean, log_std } => Self::lognormal(*log_mean, *log_std).map(|_| ()),
            Uniform01 => Ok(()),
            TwoPoint { p0 } => Self::two_point(*p0).map(|_| ()),
            Empirical { samples } => {
                Self::empirical(samples.clone())?;
                if samples.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::Domain("empirical samples must be ascending".into()));
                }
                Ok(())
            }
        }
    }

    /// Right-continuous cdf.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Lognormal { log_mean, log_std } => {
                if x <= 0.0 {
                    0.0
                } else {
                    numerics::std_normal_cdf((x.ln() - log_mean) / log_std)
                }
            }
            Uniform01 => x.clamp(0.0, 1.0),
            TwoPoint { p0 } => {
                if x < 0.0 {
                    0.0
                } else if x < 1.0 {
                    *p0
                } else {
                    1.0
                }
            }
            Empirical { samples } => {
                samples.partition_point(|&s| s <= x) as f64 / samples.len() as f64
            }
        }
    }

    /// Left-continuous generalized inverse F⁻¹(p) = inf{x : F(x) >= p}.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile requires p in (0,1), got {p}")));
        }
        Ok(match self {
            Exponential { rate } => -(-p).ln_1p() / rate,
            Lognormal { log_mean, log_std } => {
                (log_mean + log_std * numerics::std_normal_quantile(p)?).exp()
            }
            Uniform01 => p,
            TwoPoint { p0 } => {
                if p <= *p0 {
                    0.0
                } else {
                    1.0
                }
            }
            Empirical { samples } => {
                let n = samples.len();
                let k = (p * n as f64).ceil() as usize;
                samples[k.clamp(1, n) - 1]
            }
        })
    }

    /// Lower partial expectation of the quantile, `∫₀^q F⁻¹(p) dp`.
    ///
    /// Lognormal uses the closed form `e^{M + V²/2} Φ(Φ⁻¹(q) - V)`; the other
    /// variants integrate their (piecewise-explicit) quantiles exactly. At
    /// `q = 1` this is the mean.
    pub fn partial_expectation(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::Domain(format!(
                "partial expectation requires q in (0,1], got {q}"
            )));
        }
        Ok(match self {
            Exponential { rate } => {
                // ∫₀^q -ln(1-p) dp = q + (1-q) ln(1-q)
                let one_minus = 1.0 - q;
                let tail = if one_minus > 0.0 { one_minus * one_minus.ln() } else { 0.0 };
                (q + tail) / rate
            }
            Lognormal { log_mean, log_std } => {
                let arg = if q >= 1.0 {
                    f64::INFINITY
                } else {
                    numerics::std_normal_quantile(q)?
                };
                (log_mean + 0.5 * log_std * log_std).exp()
                    * numerics::std_normal_cdf(arg - log_std)
            }
            Uniform01 => 0.5 * q * q,
            TwoPoint { p0 } => (q - p0).max(0.0),
            Empirical { samples } => {
                let n = samples.len() as f64;
                let k = (q * n).floor() as usize;
                let full: f64 = samples[..k.min(samples.len())].iter().sum::<f64>() / n;
                let frac = q - k as f64 / n;
                if frac > 0.0 && k < samples.len() {
                    full + frac * samples[k]
                } else {
                    full
                }
            }
        })
    }

    /// Mean of the law.
    pub fn mean(&self) -> Result<f64> {
        self.partial_expectation(1.0)
    }

    /// Whether the cdf is continuous (no atoms).
    pub fn is_continuous(&self) -> bool {
        matches!(self, Exponential { .. } | Lognormal { .. } | Uniform01)
    }

    /// Inverse-transform sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Open-interval uniform keeps the quantile in its domain.
        let u = loop {
            let u: f64 = rng.gen();
            if u > 0.0 && u < 1.0 {
                break u;
            }
        };
        self.quantile(u).expect("u in (0,1)")
    }

    /// A grid of `n` quantile-spaced points covering `[tail, 1-tail]`.
    pub fn quantile_grid(&self, n: usize, tail: f64) -> Result<Vec<f64>> {
        if n < 2 {
            return Err(Error::Domain("quantile grid needs n >= 2".into()));
        }
        (0..n)
            .map(|i| {
                let p = tail + (1.0 - 2.0 * tail) * i as f64 / (n - 1) as f64;
                self.quantile(p)
            })
            .collect()
    }
}

/// The composition `x ↦ F0⁻¹(G(x))` of an outer quantile with an inner cdf.
///
/// When a random variable has continuous law `G`, pushing it through this map
/// produces a variable with law `F0`. The map is always non-decreasing; the
/// concavity flag is only set once a numeric probe has run.
#[derive(Debug)]
pub struct ComposedMap {
    outer_quantile: DistributionSpec,
    inner_cdf: DistributionSpec,
    tail_cut: f64,
    concavity: std::sync::OnceLock<bool>,
}

impl Clone for ComposedMap {
    fn clone(&self) -> Self {
        ComposedMap {
            outer_quantile: self.outer_quantile.clone(),
            inner_cdf: self.inner_cdf.clone(),
            tail_cut: self.tail_cut,
            concavity: std::sync::OnceLock::new(),
        }
    }
}

/// Builds the composed map `x ↦ F0⁻¹(G(x))`.
///
/// `G` must be continuous: with atoms in `G` the uniform-transform argument
/// behind the pushforward property breaks down.
pub fn compose_quantile_cdf(f0: DistributionSpec, g: DistributionSpec) -> Result<ComposedMap> {
    if !g.is_continuous() {
        return Err(Error::Precondition(
            "inner cdf must be continuous (atomless)".into(),
        ));
    }
    Ok(ComposedMap {
        outer_quantile: f0,
        inner_cdf: g,
        tail_cut: QuadratureSpec::default().tail_cut,
        concavity: std::sync::OnceLock::new(),
    })
}

impl ComposedMap {
    /// Evaluates the map; the inner probability is clamped to
    /// `[tail_cut, 1 - tail_cut]` so extreme inputs stay finite.
    pub fn eval(&self, x: f64) -> f64 {
        let p = self
            .inner_cdf
            .cdf(x)
            .clamp(self.tail_cut, 1.0 - self.tail_cut);
        self.outer_quantile.quantile(p).expect("clamped p")
    }

    /// The map is a composition of non-decreasing functions.
    pub fn is_monotone(&self) -> bool {
        true
    }

    pub fn outer(&self) -> &DistributionSpec {
        &self.outer_quantile
    }

    pub fn inner(&self) -> &DistributionSpec {
        &self.inner_cdf
    }

    /// Concavity probe on a grid: true iff consecutive secant slopes are
    /// non-increasing up to a 1e-10 relative slack. The first verdict is
    /// cached on the map.
    pub fn is_concave_on(&self, grid: &[f64]) -> Result<bool> {
        let verdict =
            is_concave_samples(grid, &grid.iter().map(|&x| self.eval(x)).collect::<Vec<_>>())?;
        let _ = self.concavity.set(verdict);
        Ok(verdict)
    }

    /// Verdict of the first concavity probe, if one has run.
    pub fn cached_concavity(&self) -> Option<bool> {
        self.concavity.get().copied()
    }
}

/// Second-difference concavity test for sampled values on an ascending grid.
///
/// Slope increases are tolerated up to 1e-10 relative to the slope scale
/// plus a floor for evaluation roundoff, which secant slopes amplify by the
/// reciprocal grid gap.
pub fn is_concave_samples(grid: &[f64], values: &[f64]) -> Result<bool> {
    if grid.len() < 3 || grid.len() != values.len() {
        return Err(Error::Precondition(
            "concavity probe needs an ascending grid of at least 3 points".into(),
        ));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition("grid must be strictly increasing".into()));
    }
    let slopes: Vec<f64> = grid
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .collect();
    let slope_scale = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-300);
    let value_scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(slopes.windows(2).enumerate().all(|(i, w)| {
        let gap = (grid[i + 2] - grid[i + 1]).min(grid[i + 1] - grid[i]);
        w[1] - w[0] <= 1e-10 * slope_scale + 1e-11 * value_scale / gap
    }))
}

/// One-sample Kolmogorov–Smirnov distance between a sorted sample and a cdf.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}
