//! Total-variation distance: exact for univariate Gaussian pairs, adaptive
//! quadrature in one dimension, Monte Carlo otherwise.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::normal::normal_interval_mass;
use super::{checked_log_density, Distribution, Sampler, UnivariateGaussian};
use crate::error::{invalid, Error, Result};
use crate::rng::{split, uniform_open, Stream};

/// Smallest accepted `effort` for numeric estimators.
pub const MIN_EFFORT: usize = 1000;

/// Absolute error target for one-dimensional quadrature.
const QUADRATURE_TOLERANCE: f64 = 1e-12;

/// Component offsets, in standard deviations, where the integration range
/// is pre-split. The outermost offsets bound the support window.
const SPLIT_OFFSETS: [f64; 11] = [-10.0, -5.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 5.0, 10.0];

const MC_CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TvMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub method: TvMethod,
}

/// Open intervals on which the density of `a` strictly exceeds that of `b`.
///
/// The log-density difference is a quadratic in `x`; its roots split the
/// line into at most three pieces.
pub fn dominance_intervals(a: &UnivariateGaussian, b: &UnivariateGaussian) -> Vec<(f64, f64)> {
    const INF: f64 = f64::INFINITY;
    if a == b {
        return Vec::new();
    }
    if a.sigma == b.sigma {
        let mid = 0.5 * (a.mu + b.mu);
        return if a.mu < b.mu {
            vec![(-INF, mid)]
        } else {
            vec![(mid, INF)]
        };
    }
    let (sa2, sb2) = (a.sigma * a.sigma, b.sigma * b.sigma);
    // sa²(x − μb)² − sb²(x − μa)² + 2 sa² sb² ln(σb/σa) > 0  ⇔  a(x) > b(x)
    let qa = sa2 - sb2;
    let qb = 2.0 * (sb2 * a.mu - sa2 * b.mu);
    let qc = sa2 * b.mu * b.mu - sb2 * a.mu * a.mu + 2.0 * sa2 * sb2 * (b.sigma / a.sigma).ln();
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
    let sign = if qb >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (qb + sign * disc.sqrt());
    let (mut r1, mut r2) = (q / qa, qc / q);
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if a.sigma < b.sigma {
        vec![(r1, r2)]
    } else {
        vec![(-INF, r1), (r2, INF)]
    }
}

fn gaussian_mass(g: &UnivariateGaussian, intervals: &[(f64, f64)]) -> f64 {
    intervals
        .iter()
        .map(|&(lo, hi)| normal_interval_mass(g.mu, g.sigma, lo, hi))
        .sum()
}

/// Exact TV between two univariate Gaussians: the mass difference on the
/// set where the first density dominates.
pub fn tv_univariate_gaussians(a: &UnivariateGaussian, b: &UnivariateGaussian) -> f64 {
    let set = dominance_intervals(a, b);
    (gaussian_mass(a, &set) - gaussian_mass(b, &set)).clamp(0.0, 1.0)
}

/// Closed form when both models are univariate Gaussians, otherwise
/// [`tv_numeric`].
pub fn evaluate_tv(p: &Distribution, q: &Distribution, effort: usize, rng: &mut Stream) -> Result<TvEstimate> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidInput(format!(
            "models have dimensions {} and {}",
            p.dim(),
            q.dim()
        )));
    }
    if p.dim() == 1 {
        if let (Some(a), Some(b)) = (p.as_single_gaussian(), q.as_single_gaussian()) {
            return Ok(TvEstimate {
                estimate: tv_univariate_gaussians(&a.marginal(0), &b.marginal(0)),
                std_error: 0.0,
                method: TvMethod::ClosedForm,
            });
        }
    }
    tv_numeric(p, q, effort, rng)
}

/// Numeric TV. One-dimensional Gaussian-based models use adaptive
/// Gauss-Kronrod quadrature over each component's ±10σ window; other models
/// use Monte Carlo with `effort` draws from `(p + q)/2`.
pub fn tv_numeric(p: &Distribution, q: &Distribution, effort: usize, rng: &mut Stream) -> Result<TvEstimate> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidInput(format!(
            "models have dimensions {} and {}",
            p.dim(),
            q.dim()
        )));
    }
    if effort < MIN_EFFORT {
        return Err(invalid("effort", format!("{effort} is below {MIN_EFFORT}")));
    }
    if p.dim() == 1 {
        if let Some(breaks) = breakpoints(p, q) {
            return quadrature_tv(p, q, &breaks, effort);
        }
    }
    monte_carlo_tv(p, q, effort, rng)
}

fn breakpoints(p: &Distribution, q: &Distribution) -> Option<Vec<f64>> {
    let mut points = Vec::new();
    for model in [p, q] {
        for (_, g) in model.gaussian_components()? {
            let (mu, sigma) = (g.mus()[0], g.sigmas()[0]);
            points.extend(SPLIT_OFFSETS.iter().map(|k| mu + k * sigma));
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    Some(points)
}

fn quadrature_tv(p: &Distribution, q: &Distribution, breaks: &[f64], effort: usize) -> Result<TvEstimate> {
    let integrand = |x: f64| -> Result<f64> {
        let lp = checked_log_density(p, &[x])?;
        let lq = checked_log_density(q, &[x])?;
        Ok(0.5 * (lp.exp() - lq.exp()).abs())
    };
    let max_segments = (effort / 15).max(breaks.len() * 4);
    let (value, error) = integrate_adaptive(integrand, breaks, QUADRATURE_TOLERANCE, max_segments)?;
    Ok(TvEstimate {
        estimate: value.clamp(0.0, 1.0),
        std_error: error,
        method: TvMethod::Quadrature,
    })
}

fn monte_carlo_tv(p: &Distribution, q: &Distribution, effort: usize, rng: &mut Stream) -> Result<TvEstimate> {
    let chunks = effort.div_ceil(MC_CHUNK);
    let streams = split(rng, chunks);
    let partial: Vec<Result<(f64, f64)>> = streams
        .into_par_iter()
        .enumerate()
        .map(|(c, mut s)| {
            let count = MC_CHUNK.min(effort - c * MC_CHUNK);
            let mut x = Vec::with_capacity(p.dim());
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..count {
                x.clear();
                if uniform_open(&mut s) < 0.5 {
                    p.sample_into(&mut s, &mut x);
                } else {
                    q.sample_into(&mut s, &mut x);
                }
                let lp = checked_log_density(p, &x)?;
                let lq = checked_log_density(q, &x)?;
                // |p − q| / (p + q)
                let v = if lp == lq { 0.0 } else { (0.5 * (lp - lq)).tanh().abs() };
                sum += v;
                sq += v * v;
            }
            Ok((sum, sq))
        })
        .collect();
    let (mut sum, mut sq) = (0.0, 0.0);
    for part in partial {
        let (s, s2) = part?;
        sum += s;
        sq += s2;
    }
    let m = effort as f64;
    let mean = sum / m;
    let var = (sq / m - mean * mean).max(0.0) * m / (m - 1.0);
    Ok(TvEstimate {
        estimate: mean,
        std_error: (var / m).sqrt(),
        method: TvMethod::MonteCarlo,
    })
}

// =============================================================================
// Adaptive Gauss-Kronrod (7-point Gauss, 15-point Kronrod)
// =============================================================================

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration over consecutive `breaks`; bisects the
/// segment with the largest error until the summed error estimate falls
/// below `tolerance` or `max_segments` is reached. Returns (value, error).
pub(crate) fn integrate_adaptive<F: Fn(f64) -> Result<f64>>(
    f: F,
    breaks: &[f64],
    tolerance: f64,
    max_segments: usize,
) -> Result<(f64, f64)> {
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        let (value, error) = gauss_kronrod(&f, w[0], w[1])?;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let total_error = |h: &BinaryHeap<Segment>| h.iter().map(|s| s.error).sum::<f64>();
    while heap.len() < max_segments && total_error(&heap) > tolerance {
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gauss_kronrod(&f, a, b)?;
            heap.push(Segment { a, b, value, error });
        }
    }
    let value = heap.iter().map(|s| s.value).sum();
    Ok((value, total_error(&heap)))
}
