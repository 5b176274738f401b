//! Differential-privacy primitives: Laplace noise, the stability-based
//! histogram, and (ε, δ) composition arithmetic.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{check_gamma, check_open, invalid, Error, Result};
use crate::rng::{uniform_open, Stream};

/// Default constant `C` used wherever an asymptotic sample bound needs a
/// concrete value.
pub const DEFAULT_SAMPLE_CONSTANT: f64 = 8.0;

/// Relative slack allowed when checking that composed budgets stay within
/// their parent.
pub const BUDGET_TOLERANCE: f64 = 1e-12;

/// An (ε, δ) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    /// Validated constructor: ε > 0 finite, δ ∈ [0, 1).
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("{epsilon} must be positive and finite")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid("delta", format!("{delta} is outside [0, 1)")));
        }
        Ok(Self { epsilon, delta })
    }

    /// Top-level learner range: ε ∈ (0, 1] and δ ∈ (0, 1).
    pub fn check_top_level(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid("epsilon", format!("{} is outside (0, 1]", self.epsilon)));
        }
        check_open("delta", self.delta, 0.0, 1.0)
    }

    /// δ must lie strictly below 1/n for a dataset of `n` records.
    pub fn check_delta_for(&self, n: usize) -> Result<()> {
        let limit = 1.0 / n as f64;
        if self.delta > 0.0 && self.delta < limit {
            Ok(())
        } else {
            Err(Error::BudgetViolation {
                delta: self.delta,
                limit,
                n,
            })
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            epsilon: self.epsilon * factor,
            delta: self.delta * factor,
        }
    }

    /// Both coordinates within `limit` up to [`BUDGET_TOLERANCE`].
    pub fn fits_within(&self, limit: &PrivacyBudget) -> bool {
        let tol = 1.0 + BUDGET_TOLERANCE;
        self.epsilon <= limit.epsilon * tol && self.delta <= limit.delta * tol
    }
}

// =============================================================================
// Laplace noise
// =============================================================================

/// Inverse CDF of Laplace(0, scale) at `u ∈ (0, 1)`.
pub fn laplace_from_uniform(scale: f64, u: f64) -> f64 {
    let centered = u - 0.5;
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// One Laplace(0, scale) draw by inverse-CDF transform of a 64-bit uniform.
pub fn sample_laplace(scale: f64, rng: &mut Stream) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid("scale", format!("{scale} must be positive")));
    }
    Ok(laplace_from_uniform(scale, uniform_open(rng)))
}

// =============================================================================
// Bins
// =============================================================================

/// A countable family of disjoint bins indexed by integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinPartition {
    /// `B_i = ((i - 0.5) w, (i + 0.5) w]`, covering ℝ.
    UnitWidth { width: f64 },
    /// `B_i = (2^i, 2^(i+1)]`, covering ℝ_{>0}.
    Dyadic,
}

// Indices beyond this magnitude are not representable without precision loss.
const MAX_INDEX: f64 = 4.0e15;

impl BinPartition {
    pub fn unit_width(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid("width", format!("{width} must be positive")));
        }
        Ok(Self::UnitWidth { width })
    }

    /// The unique bin containing `x`, or `None` when `x` is outside the
    /// covered domain (non-positive in dyadic mode, or non-finite).
    pub fn index_of(&self, x: f64) -> Option<i64> {
        if !x.is_finite() {
            return None;
        }
        match *self {
            Self::UnitWidth { width } => {
                let t = x / width - 0.5;
                if t.abs() > MAX_INDEX {
                    return None;
                }
                Some(t.ceil() as i64)
            }
            Self::Dyadic => {
                if x <= 0.0 {
                    return None;
                }
                let mut i = x.log2().ceil() as i64 - 1;
                // log2 can be off by one ulp near powers of two
                while (i as f64 + 1.0).exp2() < x {
                    i += 1;
                }
                while (i as f64).exp2() >= x {
                    i -= 1;
                }
                Some(i)
            }
        }
    }

    /// Closed-open description `(lower, upper]` of bin `i`.
    pub fn bounds(&self, i: i64) -> (f64, f64) {
        match *self {
            Self::UnitWidth { width } => ((i as f64 - 0.5) * width, (i as f64 + 0.5) * width),
            Self::Dyadic => ((i as f64).exp2(), (i as f64 + 1.0).exp2()),
        }
    }
}

/// Exact per-bin frequencies `p̄_i = |D ∩ B_i| / n`, sorted by index.
pub fn empirical_frequencies(data: &[f64], bins: &BinPartition) -> BTreeMap<i64, f64> {
    let counts = bin_counts(data, bins);
    let n = data.len() as f64;
    counts.into_iter().map(|(i, c)| (i, c as f64 / n)).collect()
}

fn bin_counts(data: &[f64], bins: &BinPartition) -> Vec<(i64, u64)> {
    let mut counts: HashMap<i64, u64> = HashMap::new();
    for &x in data {
        if let Some(i) = bins.index_of(x) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    let mut sorted: Vec<(i64, u64)> = counts.into_iter().collect();
    sorted.sort_unstable_by_key(|&(i, _)| i);
    sorted
}

// =============================================================================
// Stability-based histogram
// =============================================================================

/// Noisy, thresholded bin frequencies. Absent indices are implicitly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEstimate {
    pub estimates: BTreeMap<i64, f64>,
    pub threshold: f64,
    pub eta: f64,
    pub n: usize,
}

impl HistogramEstimate {
    pub fn get(&self, i: i64) -> f64 {
        self.estimates.get(&i).copied().unwrap_or(0.0)
    }

    /// Indices whose estimate strictly exceeds `cutoff`, ascending.
    pub fn heavy(&self, cutoff: f64) -> Vec<i64> {
        self.estimates
            .iter()
            .filter(|(_, &p)| p > cutoff)
            .map(|(&i, _)| i)
            .collect()
    }

    /// `max_i |p̄_i − p̃_i|` over every bin either side touches.
    pub fn max_error(&self, exact: &BTreeMap<i64, f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &p) in exact {
            worst = worst.max((p - self.get(*i)).abs());
        }
        for (i, &p) in &self.estimates {
            if !exact.contains_key(i) {
                worst = worst.max(p);
            }
        }
        worst
    }
}

/// Stability cutoff `1/n + 2 ln(2/δ) / (ε n)`.
pub fn stability_threshold(budget: &PrivacyBudget, n: usize) -> f64 {
    let n = n as f64;
    1.0 / n + 2.0 * (2.0 / budget.delta).ln() / (budget.epsilon * n)
}

/// Samples needed for the histogram's η-accuracy with probability 1 − β:
/// `⌈C · ln(1/(βδ)) / (η ε)⌉`.
pub fn histogram_sample_bound(constant: f64, eta: f64, beta: f64, budget: &PrivacyBudget) -> usize {
    let n = constant * (1.0 / (beta * budget.delta)).ln() / (eta * budget.epsilon);
    n.ceil() as usize
}

/// (ε, δ)-DP histogram over a countable bin family.
///
/// Each occupied bin's frequency gets Laplace(2/(εn)) noise; results below
/// [`stability_threshold`] are dropped, so unoccupied bins are never
/// reported. Noise is drawn in ascending bin order.
pub fn stable_histogram(
    budget: &PrivacyBudget,
    eta: f64,
    beta: f64,
    data: &[f64],
    bins: &BinPartition,
    rng: &mut Stream,
) -> Result<HistogramEstimate> {
    check_open("eta", eta, 0.0, 1.0)?;
    check_open("beta", beta, 0.0, 1.0)?;
    if data.is_empty() {
        return Err(Error::InvalidInput("stable histogram needs at least one point".into()));
    }
    let n = data.len();
    budget.check_delta_for(n)?;

    let threshold = stability_threshold(budget, n);
    let scale = 2.0 / (budget.epsilon * n as f64);
    let mut estimates = BTreeMap::new();
    for (i, count) in bin_counts(data, bins) {
        let noisy = count as f64 / n as f64 + sample_laplace(scale, rng)?;
        if noisy >= threshold {
            estimates.insert(i, noisy.min(1.0));
        }
    }
    Ok(HistogramEstimate {
        estimates,
        threshold,
        eta,
        n,
    })
}

// =============================================================================
// Composition
// =============================================================================

/// Basic composition: sums of ε and δ.
pub fn compose_basic(budgets: &[PrivacyBudget]) -> Result<PrivacyBudget> {
    if budgets.is_empty() {
        return Err(Error::InvalidInput("nothing to compose".into()));
    }
    Ok(PrivacyBudget {
        epsilon: budgets.iter().map(|b| b.epsilon).sum(),
        delta: budgets.iter().map(|b| b.delta).sum(),
    })
}

/// Advanced composition of `T = per_step_deltas.len()` mechanisms that are
/// each (ε₀, δ_t)-DP: `(ε₀ √(6T ln(1/δ₀)), δ₀ + Σ δ_t)`.
pub fn compose_advanced(epsilon0: f64, per_step_deltas: &[f64], delta0: f64) -> Result<PrivacyBudget> {
    if !(epsilon0 > 0.0 && epsilon0 <= 1.0) {
        return Err(invalid("epsilon0", format!("{epsilon0} is outside (0, 1]")));
    }
    if !(delta0 > 0.0 && delta0 <= 1.0) {
        return Err(invalid("delta0", format!("{delta0} is outside (0, 1]")));
    }
    if per_step_deltas.is_empty() {
        return Err(invalid("per_step_deltas", "need at least one step"));
    }
    let steps = per_step_deltas.len() as f64;
    Ok(PrivacyBudget {
        epsilon: epsilon0 * (6.0 * steps * (1.0 / delta0).ln()).sqrt(),
        delta: delta0 + per_step_deltas.iter().sum::<f64>(),
    })
}

/// Budget split used by the univariate Gaussian decoder: half of the budget
/// goes to the scale search, the other half is shared by up to `rounds`
/// mean searches through advanced composition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDecoderSplit {
    /// `T = ⌈12 / (1 − γ)²⌉`, fixed before any data is touched.
    pub rounds: usize,
    /// Per-round budget (ε′, δ′).
    pub round_budget: PrivacyBudget,
    /// (ε/2, δ/2) for the scale search.
    pub variance_budget: PrivacyBudget,
    /// The δ₀ slack of advanced composition, equal to δ′.
    pub composition_delta: f64,
}

impl GaussianDecoderSplit {
    /// Recomposes the split: advanced over the rounds, then basic with the
    /// scale-search budget.
    pub fn recompose(&self) -> Result<PrivacyBudget> {
        let rounds = vec![self.round_budget.delta; self.rounds];
        let means = compose_advanced(self.round_budget.epsilon, &rounds, self.composition_delta)?;
        compose_basic(&[self.variance_budget, means])
    }
}

/// `⌈12 / (1 − γ)²⌉`, with a guard against `1 − γ` rounding up the count.
pub fn scale_candidate_cap(gamma: f64) -> usize {
    ceil_guarded(12.0 / ((1.0 - gamma) * (1.0 - gamma)))
}

pub(crate) fn ceil_guarded(x: f64) -> usize {
    (x - 1e-9 * x.max(1.0)).ceil().max(0.0) as usize
}

pub fn split_budget_for_gaussian_decoder(budget: &PrivacyBudget, gamma: f64) -> Result<GaussianDecoderSplit> {
    check_gamma(gamma)?;
    let rounds = scale_candidate_cap(gamma);
    let t = rounds as f64;
    let epsilon = budget.epsilon / (2.0 * (6.0 * t * (2.0 * (t + 1.0) / budget.delta).ln()).sqrt());
    let delta = budget.delta / (2.0 * (t + 1.0));
    Ok(GaussianDecoderSplit {
        rounds,
        round_budget: PrivacyBudget { epsilon, delta },
        variance_budget: budget.scale(0.5),
        composition_delta: delta,
    })
}

// =============================================================================
// Ledger
// =============================================================================

/// One accounted spend. Groups compose their entries with basic composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spend {
    Mechanism {
        label: String,
        epsilon: f64,
        delta: f64,
    },
    /// Up to `planned_steps` mechanisms, each at most (`epsilon0`, `step_delta`),
    /// composed with advanced composition at slack `delta0`.
    Advanced {
        label: String,
        epsilon0: f64,
        step_delta: f64,
        delta0: f64,
        planned_steps: usize,
        used_steps: usize,
    },
    Group { label: String, entries: Vec<Spend> },
}

impl Spend {
    pub fn mechanism(label: impl Into<String>, budget: PrivacyBudget) -> Self {
        Self::Mechanism {
            label: label.into(),
            epsilon: budget.epsilon,
            delta: budget.delta,
        }
    }

    pub fn total(&self) -> Result<PrivacyBudget> {
        match self {
            Self::Mechanism { epsilon, delta, .. } => Ok(PrivacyBudget {
                epsilon: *epsilon,
                delta: *delta,
            }),
            Self::Advanced {
                epsilon0,
                step_delta,
                delta0,
                planned_steps,
                used_steps,
                ..
            } => {
                if used_steps > planned_steps {
                    return Err(Error::Numeric(format!(
                        "{used_steps} rounds used but only {planned_steps} planned"
                    )));
                }
                compose_advanced(*epsilon0, &vec![*step_delta; *planned_steps], *delta0)
            }
            Self::Group { entries, .. } => {
                let parts = entries.iter().map(Spend::total).collect::<Result<Vec<_>>>()?;
                if parts.is_empty() {
                    Ok(PrivacyBudget { epsilon: 0.0, delta: 0.0 })
                } else {
                    compose_basic(&parts)
                }
            }
        }
    }
}

/// Record of every mechanism an algorithm ran, composed basically at the top.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub entries: Vec<Spend>,
}

impl BudgetLedger {
    pub fn push(&mut self, spend: Spend) {
        self.entries.push(spend);
    }

    pub fn total(&self) -> Result<PrivacyBudget> {
        Spend::Group {
            label: String::new(),
            entries: self.entries.clone(),
        }
        .total()
    }

    /// Errors if the recomposed spend exceeds `limit` in either coordinate.
    pub fn verify(&self, limit: &PrivacyBudget) -> Result<PrivacyBudget> {
        let total = self.total()?;
        if total.fits_within(limit) {
            Ok(total)
        } else {
            Err(Error::Numeric(format!(
                "ledger spends ({}, {:e}) beyond budget ({}, {:e})",
                total.epsilon, total.delta, limit.epsilon, limit.delta
            )))
        }
    }

    pub fn into_group(self, label: impl Into<String>) -> Spend {
        Spend::Group {
            label: label.into(),
            entries: self.entries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn laplace_inverse_cdf_points() {
        assert_eq!(laplace_from_uniform(1.0, 0.5), 0.0);
        // F(x) = 1 − e^{−x}/2 = 0.75 at x = ln 2
        assert!(close(laplace_from_uniform(1.0, 0.75), std::f64::consts::LN_2, 1e-15));
        assert!(close(laplace_from_uniform(1.0, 0.25), -std::f64::consts::LN_2, 1e-15));
    }

    #[test]
    fn laplace_rejects_bad_scale() {
        let mut rng = stream(0);
        assert!(sample_laplace(0.0, &mut rng).is_err());
        assert!(sample_laplace(-1.0, &mut rng).is_err());
    }

    #[test]
    fn laplace_mean_is_zero() {
        let mut rng = stream(11);
        let n = 1_000_000;
        let sum: f64 = (0..n).map(|_| sample_laplace(2.0, &mut rng).unwrap()).sum();
        assert!((sum / n as f64).abs() < 0.01);
    }

    #[test]
    fn unit_bins_are_right_closed() {
        let bins = BinPartition::unit_width(1.0).unwrap();
        assert_eq!(bins.index_of(0.5), Some(0));
        assert_eq!(bins.index_of(0.5000001), Some(1));
        assert_eq!(bins.index_of(-0.5), Some(-1));
        assert_eq!(bins.index_of(2.6), Some(3));
        assert_eq!(bins.index_of(f64::NAN), None);
        let wide = BinPartition::unit_width(2.0).unwrap();
        assert_eq!(wide.index_of(3.0), Some(1));
        assert_eq!(wide.index_of(3.01), Some(2));
    }

    #[test]
    fn dyadic_bins() {
        let bins = BinPartition::Dyadic;
        assert_eq!(bins.index_of(1.0), Some(-1));
        assert_eq!(bins.index_of(3.0), Some(1));
        assert_eq!(bins.index_of(4.0), Some(1));
        assert_eq!(bins.index_of(4.0000001), Some(2));
        assert_eq!(bins.index_of(0.0), None);
        assert_eq!(bins.index_of(-2.0), None);
        assert_eq!(bins.index_of(f64::MIN_POSITIVE), Some(-1023));
        for i in -60..60 {
            let x = (i as f64).exp2();
            assert_eq!(bins.index_of(x), Some(i - 1));
            let (lo, hi) = bins.bounds(i - 1);
            assert!(lo < x && x <= hi);
        }
    }

    #[test]
    fn histogram_rejects_bad_inputs() {
        let mut rng = stream(0);
        let bins = BinPartition::unit_width(1.0).unwrap();
        let b = PrivacyBudget::new(1.0, 1e-4).unwrap();
        assert!(matches!(
            stable_histogram(&b, 0.1, 0.1, &[], &bins, &mut rng),
            Err(Error::InvalidInput(_))
        ));
        let data = vec![0.0; 20_000];
        assert!(matches!(
            stable_histogram(&b, 0.1, 0.1, &data, &bins, &mut rng),
            Err(Error::BudgetViolation { .. })
        ));
    }

    #[test]
    fn histogram_single_heavy_bin() {
        let bins = BinPartition::unit_width(1.0).unwrap();
        let b = PrivacyBudget::new(1.0, 1e-4).unwrap();
        let data = vec![0.3; 1000];
        let mut successes = 0;
        for seed in 0..100 {
            let h = stable_histogram(&b, 0.1, 0.1, &data, &bins, &mut stream(seed)).unwrap();
            if h.get(0) >= 0.9 && h.estimates.len() == 1 {
                successes += 1;
            }
        }
        assert!(successes >= 99, "{successes}");
    }

    #[test]
    fn histogram_noise_vanishes_at_huge_epsilon() {
        let bins = BinPartition::unit_width(1.0).unwrap();
        let b = PrivacyBudget::new(1e6, 1e-4).unwrap();
        let h = stable_histogram(&b, 0.1, 0.1, &[0.1, 0.2, -0.3], &bins, &mut stream(3)).unwrap();
        assert!((h.get(0) - 1.0).abs() <= 1e-4);
        assert!(h.estimates.values().all(|&p| p >= h.threshold));
    }

    #[test]
    fn histogram_two_bins() {
        let bins = BinPartition::unit_width(1.0).unwrap();
        let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let mut data = vec![0.0; 7000];
        data.extend(std::iter::repeat_n(1.0, 3000));
        let exact = empirical_frequencies(&data, &bins);
        let ok = (0..100)
            .filter(|&s| {
                let h = stable_histogram(&b, 0.05, 0.05, &data, &bins, &mut stream(s)).unwrap();
                h.max_error(&exact) <= 0.05
            })
            .count();
        assert!(ok >= 95);
    }

    #[test]
    fn basic_composition_examples() {
        let b = PrivacyBudget::new(0.5, 1e-6).unwrap();
        let t = compose_basic(&[b, b]).unwrap();
        assert!(close(t.epsilon, 1.0, 1e-12) && close(t.delta, 2e-6, 1e-12));
        let single = PrivacyBudget::new(0.3, 0.0).unwrap();
        assert_eq!(compose_basic(&[single]).unwrap(), single);
        let small = PrivacyBudget::new(0.1, 1e-7).unwrap();
        let t = compose_basic(&[small; 10]).unwrap();
        assert!(close(t.epsilon, 1.0, 1e-12) && close(t.delta, 1e-6, 1e-12));
        assert!(compose_basic(&[]).is_err());
    }

    #[test]
    fn advanced_composition_examples() {
        let t = compose_advanced(0.1, &[0.0; 12], 1e-6).unwrap();
        assert!(close(t.epsilon, 0.1 * (72.0 * 1e6f64.ln()).sqrt(), 1e-12));
        assert!(close(t.epsilon, 3.153_913_061_854_159, 1e-12));
        assert_eq!(t.delta, 1e-6);
        let t = compose_advanced(0.5, &[0.0], 0.01).unwrap();
        assert!(close(t.epsilon, 2.628_260_884_878_466, 1e-12));
        let t = compose_advanced(0.5, &[1e-3, 2e-3], 1.0).unwrap();
        assert_eq!(t.epsilon, 0.0);
        assert!(close(t.delta, 1.003, 1e-12));
        assert!(compose_advanced(1.5, &[0.0], 0.1).is_err());
    }

    #[test]
    fn gaussian_split_rounds() {
        let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let s = split_budget_for_gaussian_decoder(&b, 0.0).unwrap();
        assert_eq!(s.rounds, 12);
        assert!(close(s.round_budget.delta, 1e-6 / 26.0, 1e-12));
        let expect = 1.0 / (2.0 * (6.0 * 12.0 * (26e6f64).ln()).sqrt());
        assert!(close(s.round_budget.epsilon, expect, 1e-12));
        assert!(s.recompose().unwrap().fits_within(&b));
        assert_eq!(split_budget_for_gaussian_decoder(&b, 0.5).unwrap().rounds, 48);
        assert_eq!(split_budget_for_gaussian_decoder(&b, 0.9).unwrap().rounds, 1200);
        assert!(split_budget_for_gaussian_decoder(&b, 1.0).is_err());
        assert!(split_budget_for_gaussian_decoder(&b, -0.1).is_err());
    }

    #[test]
    fn ledger_rejects_overspend() {
        let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let mut ledger = BudgetLedger::default();
        ledger.push(Spend::mechanism("a", b.scale(0.5)));
        ledger.push(Spend::mechanism("b", b.scale(0.5)));
        assert!(ledger.verify(&b).is_ok());
        ledger.push(Spend::mechanism("c", b.scale(0.01)));
        assert!(ledger.verify(&b).is_err());
    }
}
