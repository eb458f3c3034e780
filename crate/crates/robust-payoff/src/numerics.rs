//! Shared numerical kernels: standard-normal functions, adaptive quadrature,
//! bracketed root finding and concave envelopes of sampled functions.
//!
//! Everything here is a pure function of its inputs; values are immutable and
//! safe to share across threads.
#![allow(clippy::excessive_precision)]

use crate::{Error, Result};

/// Controls for adaptive quadrature and tail handling.
///
/// `tail_cut` is the probability mass cut off on each side when an integral
/// over an unbounded domain is mapped to probability coordinates.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub max_depth: u32,
    pub tail_cut: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_depth: 60,
            tail_cut: 1e-12,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::Domain("rel_tol must be > 0".into()));
        }
        if !(self.tail_cut > 0.0 && self.tail_cut < 1e-3) {
            return Err(Error::Domain("tail_cut must lie in (0, 1e-3)".into()));
        }
        Ok(())
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal density φ(x).
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal distribution function Φ(x).
///
/// Evaluated through the complementary error function so the tails saturate
/// at 0 and 1 instead of losing all precision. Accurate to a few ulps over
/// the whole line (Cody's rational approximations).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Complementary error function, W. J. Cody's rational Chebyshev fits.
fn erfc(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 0.46875 {
        return 1.0 - erf_small(x);
    }
    let v = erfc_core(ax);
    if x < 0.0 {
        2.0 - v
    } else {
        v
    }
}

/// erf(x) for |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.161_123_743_870_565_6e0,
        1.138_641_541_510_501_6e2,
        3.774_852_376_853_020_2e2,
        3.209_377_589_138_469_4e3,
        1.857_777_061_846_031_5e-1,
    ];
    const B: [f64; 4] = [
        2.360_129_095_234_412_1e1,
        2.440_246_379_344_441_7e2,
        1.282_616_526_077_372_3e3,
        2.844_236_833_439_170_6e3,
    ];
    let z = x * x;
    let num = ((((A[4] * z + A[0]) * z + A[1]) * z + A[2]) * z) + A[3];
    let den = ((((z + B[0]) * z + B[1]) * z + B[2]) * z) + B[3];
    x * num / den
}

/// erfc(x) for x > 0.46875.
fn erfc_core(x: f64) -> f64 {
    if x <= 4.0 {
        const C: [f64; 9] = [
            5.641_884_969_886_700_9e-1,
            8.883_149_794_388_375_9e0,
            6.611_919_063_714_163_0e1,
            2.986_351_381_974_001_3e2,
            8.819_522_212_417_690_9e2,
            1.712_047_612_634_070_6e3,
            2.051_078_377_826_071_5e3,
            1.230_339_354_797_997_2e3,
            2.153_115_354_744_038_5e-8,
        ];
        const D: [f64; 8] = [
            1.574_492_611_070_983_5e1,
            1.176_939_508_913_125_0e2,
            5.371_811_018_620_098_6e2,
            1.621_389_574_566_690_2e3,
            3.290_799_235_733_459_6e3,
            4.362_619_090_143_247_2e3,
            3.439_367_674_143_721_6e3,
            1.230_339_354_803_749_4e3,
        ];
        let mut num = C[8] * x;
        let mut den = x;
        for i in 0..7 {
            num = (num + C[i]) * x;
            den = (den + D[i]) * x;
        }
        (-x * x).exp() * (num + C[7]) / (den + D[7])
    } else {
        const INV_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;
        const P: [f64; 6] = [
            3.053_266_349_612_323_4e-1,
            3.603_448_999_498_044_4e-1,
            1.257_817_261_112_292_5e-1,
            1.608_378_514_874_227_7e-2,
            6.587_491_615_298_378_0e-4,
            1.631_538_713_730_209_8e-2,
        ];
        const Q: [f64; 5] = [
            2.568_520_192_289_822_4e0,
            1.872_952_849_923_460_5e0,
            5.279_051_029_514_284_1e-1,
            6.051_834_131_244_131_9e-2,
            2.335_204_976_268_691_8e-3,
        ];
        if x > 26.5 {
            return 0.0;
        }
        let z = 1.0 / (x * x);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let r = z * (num + P[4]) / (den + Q[4]);
        (-x * x).exp() * (INV_SQRT_PI - r) / x
    }
}

/// Standard normal quantile Φ⁻¹(p).
///
/// Acklam's rational approximation polished with one Halley step against
/// [`std_normal_cdf`], which brings the round-trip error below 1e-14.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile requires p in (0,1), got {p}"
        )));
    }
    let x = acklam(p);
    // Halley refinement: e = Φ(x) - p, u = e √(2π) e^{x²/2}.
    let e = std_normal_cdf(x) - p;
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239e0,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838e0,
        -2.549_732_539_343_734e0,
        4.374_664_141_464_968e0,
        2.938_163_982_698_783e0,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996e0,
        3.754_408_661_907_416e0,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// The interval is first cut into 64 uniform panels so narrow features
/// cannot slip through a coarse three-point estimate; each panel is then
/// refined adaptively against a share of the total tolerance, which is
/// relative to the gross (absolute-value) panel sum. Exceeding
/// `spec.max_depth` or the evaluation budget yields
/// [`Error::QuadratureDepth`] carrying the best estimate so far.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(a < b) {
        return Err(Error::Domain(format!(
            "integration bounds must satisfy a < b, got [{a}, {b}]"
        )));
    }
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    let mut panels = Vec::with_capacity(PANELS);
    let mut gross = 0.0f64;
    let mut xs = [0.0f64; 2 * PANELS + 1];
    let mut fs = [0.0f64; 2 * PANELS + 1];
    for (i, (x, v)) in xs.iter_mut().zip(fs.iter_mut()).enumerate() {
        *x = a + 0.5 * h * i as f64;
        *v = f(*x);
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "integrand is not finite at x = {x}"
            )));
        }
    }
    for i in 0..PANELS {
        let (fa, fm, fb) = (fs[2 * i], fs[2 * i + 1], fs[2 * i + 2]);
        let est = h * (fa + 4.0 * fm + fb) / 6.0;
        gross += est.abs();
        panels.push((xs[2 * i], xs[2 * i + 2], fa, fm, fb, est));
    }
    if gross == 0.0 {
        return Ok(0.0);
    }
    let eps_panel = spec.rel_tol * gross / PANELS as f64;
    let mut fuel: i64 = 4_000_000;
    let mut total = 0.0;
    let mut unresolved = 0.0f64;
    for (pa, pb, fa, fm, fb, est) in panels {
        match simpson_rec(&f, pa, pb, fa, fm, fb, est, eps_panel, spec.max_depth, &mut fuel) {
            Ok(v) => total += v,
            Err(Partial { best, error }) => {
                total += best;
                unresolved += error;
            }
        }
    }
    // exhaustion only counts as failure when the leftover error estimate
    // actually exceeds the requested relative tolerance
    if unresolved > spec.rel_tol * gross {
        return Err(Error::QuadratureDepth {
            best: total,
            error: unresolved,
        });
    }
    Ok(total)
}

/// Depth/budget exhaustion inside one panel; carries the local estimate.
struct Partial {
    best: f64,
    error: f64,
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
    fuel: &mut i64,
) -> std::result::Result<f64, Partial> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    *fuel -= 2;
    let left = (m - a) * (fa + 4.0 * flm + fm) / 6.0;
    let right = (b - m) * (fm + 4.0 * frm + fb) / 6.0;
    let delta = left + right - whole;
    let best = left + right + delta / 15.0;
    if delta.abs() <= 15.0 * eps || !delta.is_finite() {
        return Ok(best);
    }
    if lm <= a || rm >= b {
        // interval at floating-point resolution: nothing left to refine
        return Ok(best);
    }
    if depth == 0 || *fuel <= 0 {
        return Err(Partial {
            best,
            error: delta.abs() / 15.0,
        });
    }
    // never push the local tolerance below the roundoff of the estimate
    let child_eps = (0.5 * eps).max(f64::EPSILON * best.abs());
    let l = simpson_rec(f, a, m, fa, flm, fm, left, child_eps, depth - 1, fuel);
    let r = simpson_rec(f, m, b, fm, frm, fb, right, child_eps, depth - 1, fuel);
    match (l, r) {
        (Ok(x), Ok(y)) => Ok(x + y),
        (Ok(x), Err(p)) => Err(Partial { best: x + p.best, error: p.error }),
        (Err(p), Ok(y)) => Err(Partial { best: p.best + y, error: p.error }),
        (Err(p), Err(q)) => Err(Partial {
            best: p.best + q.best,
            error: p.error.max(q.error),
        }),
    }
}

/// Bracketed root finding: bisection with a secant candidate per step.
///
/// Requires `f(lo) * f(hi) <= 0`; returns a point inside a sign-change
/// bracket of width at most `tol`.
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::Domain(format!(
            "root bracket must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("root tolerance must be > 0".into()));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::Bracket(format!(
            "no sign change on [{lo}, {hi}]: f(lo)={fa:e}, f(hi)={fb:e}"
        )));
    }
    let mut use_secant = true;
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        // Alternate a secant candidate with plain bisection so the bracket
        // keeps shrinking even when one endpoint is sticky.
        let mut x = if use_secant && fb != fa {
            a - fa * (b - a) / (fb - fa)
        } else {
            0.5 * (a + b)
        };
        use_secant = !use_secant;
        let margin = 1e-3 * (b - a);
        if !(x > a + margin && x < b - margin) {
            x = 0.5 * (a + b);
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fa * fx < 0.0 {
            b = x;
            fb = fx;
        } else {
            a = x;
            fa = fx;
        }
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// A continuous piecewise-linear function on strictly increasing knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearFn {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinearFn {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::Domain(
                "knots and values must have equal length".into(),
            ));
        }
        if knots.len() < 2 {
            return Err(Error::Domain("need at least 2 knots".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("knots must be strictly increasing".into()));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("knots and values must be finite".into()));
        }
        Ok(Self { knots, values })
    }

    /// Samples `f` on `n` uniform knots over `[a, b]`.
    pub fn sample<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a < b) || n < 2 {
            return Err(Error::Domain("need a < b and n >= 2".into()));
        }
        let knots: Vec<f64> = (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect();
        let values = knots.iter().map(|&x| f(x)).collect();
        Self::new(knots, values)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear interpolation between knots; outside the knot range is an error.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = (self.knots[0], *self.knots.last().unwrap());
        if !(x >= lo && x <= hi) {
            return Err(Error::Domain(format!(
                "evaluation point {x} outside knot range [{lo}, {hi}]"
            )));
        }
        let i = match self.knots.partition_point(|&k| k <= x) {
            0 => 0,
            j if j >= self.knots.len() => self.knots.len() - 2,
            j => j - 1,
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }
}

/// Concave envelope (upper convex hull) of a sampled function.
///
/// Returns the hull vertices as a new piecewise-linear function. The
/// envelope dominates the input at every knot and touches it on the contact
/// set; for piecewise-linear inputs the construction is exact.
pub fn concave_envelope(samples: &PiecewiseLinearFn) -> Result<PiecewiseLinearFn> {
    if samples.len() < 3 {
        return Err(Error::Precondition(
            "concave envelope needs at least 3 knots".into(),
        ));
    }
    let xs = samples.knots();
    let ys = samples.values();
    // Monotone chain for the upper hull: keep only clockwise turns.
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let knots: Vec<f64> = hull.iter().map(|&i| xs[i]).collect();
    let values: Vec<f64> = hull.iter().map(|&i| ys[i]).collect();
    PiecewiseLinearFn::new(knots, values)
}
