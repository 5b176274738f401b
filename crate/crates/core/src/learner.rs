//! Mixture learning by reduction to list-decoding: decode candidate
//! components from the first part of the data, combine them with a grid
//! of mixing weights, and privately select one mixture on the second part.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::decoders::{CandidateList, Family, ListParams};
use crate::distributions::{AxisAlignedGaussian, Distribution, MixtureModel, MIN_EFFORT};
use crate::error::{check_open, invalid, Error, Result};
use crate::privacy::{ceil_guarded, compose_basic, BudgetLedger, PrivacyBudget, Spend, DEFAULT_SAMPLE_CONSTANT};
use crate::rng::{stream, Splitter};
use crate::selection::{min_contest_effort, phs_select, HypothesisSet, Selection};

/// Default bound on the number of candidate mixtures.
pub const DEFAULT_CANDIDATE_CAP: usize = 100_000;

// =============================================================================
// Simplex net
// =============================================================================

/// The grid `{t/r : t ∈ ℤ^k, t ≥ 0, Σt = r}` with `r = ⌈1/α⌉`, kept as
/// integer numerators so every point sums to one exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimplexNet {
    k: usize,
    resolution: usize,
    numerators: Vec<Vec<usize>>,
}

/// `C(n, r)` as a float; exact while it fits in 53 bits.
fn binomial(n: usize, r: usize) -> f64 {
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Number of points in the `k`-simplex grid at accuracy `alpha`.
pub fn simplex_net_size(k: usize, alpha: f64) -> f64 {
    let r = ceil_guarded(1.0 / alpha);
    binomial(r + k - 1, k - 1)
}

/// Every weight vector of the grid at accuracy `alpha`, in lexicographic
/// order. Any point of the simplex is within `α` of the grid in `ℓ∞`.
pub fn simplex_net(k: usize, alpha: f64, cap: usize) -> Result<SimplexNet> {
    if k == 0 {
        return Err(invalid("k", "need at least one component"));
    }
    check_open("alpha", alpha, 0.0, 1.0 + f64::EPSILON)?;
    let size = simplex_net_size(k, alpha);
    if size > cap as f64 {
        return Err(Error::Overflow {
            what: "simplex net",
            size,
            cap,
        });
    }
    let resolution = ceil_guarded(1.0 / alpha);
    let mut numerators = Vec::with_capacity(size as usize);
    let mut current = vec![0; k];
    compositions(resolution, 0, &mut current, &mut numerators);
    Ok(SimplexNet {
        k,
        resolution,
        numerators,
    })
}

fn compositions(remaining: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for t in 0..=remaining {
        current[pos] = t;
        compositions(remaining - t, pos + 1, current, out);
    }
}

impl SimplexNet {
    pub fn k(&self) -> usize {
        self.k
    }

    /// The common denominator `r`.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn numerators(&self) -> &[Vec<usize>] {
        &self.numerators
    }

    /// Point `i` as floats.
    pub fn weights(&self, i: usize) -> Vec<f64> {
        let r = self.resolution as f64;
        self.numerators[i].iter().map(|&t| t as f64 / r).collect()
    }

    /// Grid point within `1/r` of `x` in every coordinate: round each
    /// `r·x_i` down, then add one to the first `r − Σ⌊r·x_i⌋` coordinates.
    pub fn round(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.k || x.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidInput(format!("{x:?} is not a point of the {}-simplex", self.k)));
        }
        let r = self.resolution as f64;
        let mut t: Vec<usize> = x.iter().map(|&v| (r * v).floor() as usize).collect();
        let floor_sum: usize = t.iter().sum();
        let shortfall = self.resolution.checked_sub(floor_sum).filter(|&l| l <= self.k);
        let Some(shortfall) = shortfall else {
            return Err(Error::InvalidInput(format!("{x:?} does not sum to one")));
        };
        for ti in t.iter_mut().take(shortfall) {
            *ti += 1;
        }
        Ok(t)
    }
}

// =============================================================================
// Configuration and planning
// =============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub budget: PrivacyBudget,
    pub sample_constant: f64,
    pub candidate_cap: usize,
    /// Snapping radius for merging near-identical components; 0 disables.
    pub dedup_radius: f64,
    pub seed: u64,
    /// Monte Carlo draws per Scheffé mass that lacks a closed form.
    pub effort: usize,
    /// Split undersized data in proportion to the plan instead of erroring.
    pub allow_undersampled: bool,
}

impl LearnerConfig {
    pub fn new(k: usize, alpha: f64, beta: f64, budget: PrivacyBudget) -> Result<Self> {
        let config = Self {
            k,
            alpha,
            beta,
            budget,
            sample_constant: DEFAULT_SAMPLE_CONSTANT,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            dedup_radius: 0.0,
            seed: 0,
            effort: min_contest_effort(alpha).max(MIN_EFFORT),
            allow_undersampled: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k", "need at least one component"));
        }
        check_open("alpha", self.alpha, 0.0, 1.0 + f64::EPSILON)?;
        check_open("beta", self.beta, 0.0, 1.0)?;
        self.budget.check_top_level()?;
        if !(self.sample_constant > 0.0 && self.sample_constant.is_finite()) {
            return Err(invalid("sample_constant", format!("{} must be positive", self.sample_constant)));
        }
        if self.candidate_cap == 0 {
            return Err(invalid("candidate_cap", "must be at least 1"));
        }
        let limit = self.alpha / 36.0;
        if !(self.dedup_radius >= 0.0 && self.dedup_radius < limit) {
            return Err(invalid("dedup_radius", format!("{} is outside [0, {limit})", self.dedup_radius)));
        }
        Ok(())
    }

    /// `(α/18, β/(2k), 1 − α/(18k), ε/2, δ)`: every component of weight at
    /// least `α/(18k)` sees at most that much corruption.
    pub fn decoder_params(&self) -> Result<ListParams> {
        let k = self.k as f64;
        let budget = PrivacyBudget::new(self.budget.epsilon / 2.0, self.budget.delta)?;
        Ok(ListParams::new(self.alpha / 18.0, self.beta / (2.0 * k), 1.0 - self.alpha / (18.0 * k), budget)?
            .with_sample_constant(self.sample_constant)?
            .allow_undersampled(self.allow_undersampled))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub n1: usize,
    pub n2: usize,
    pub total: usize,
}

/// Decoder samples at the reduction's parameters plus
/// `⌈C (k ln(Lk/α) + ln(1/β)) (1/α² + 1/(αε))⌉` selection samples, where
/// `L` is the family's list-size bound.
pub fn sample_size_plan(config: &LearnerConfig, family: &Family) -> Result<SamplePlan> {
    config.validate()?;
    let params = config.decoder_params()?;
    let n1 = family.required_samples(&params)?;
    let (k, a) = (config.k as f64, config.alpha);
    let cap = family.list_cap(params.alpha, params.gamma);
    let log_terms = k * (cap * k / a).ln() + (1.0 / config.beta).ln();
    let rate = 1.0 / (a * a) + 1.0 / (a * config.budget.epsilon);
    let n2 = (config.sample_constant * log_terms * rate).ceil() as usize;
    Ok(SamplePlan { n1, n2, total: n1 + n2 })
}

// =============================================================================
// Candidate mixtures
// =============================================================================

/// Moves a component onto a lattice: each scale to the nearest power of
/// `(1 + ρ)²` and each mean to a multiple of `2ρ` snapped scales, where
/// `ρ = radius/d`. Every mean moves by at most `ρ` snapped scales and every
/// scale by a factor of at most `1 + ρ`.
pub fn snap_component(component: &AxisAlignedGaussian, radius: f64) -> AxisAlignedGaussian {
    if radius == 0.0 {
        return component.clone();
    }
    let rho = radius / component.dim() as f64;
    let h = 2.0 * rho.ln_1p();
    let (mut mus, mut sigmas) = (Vec::new(), Vec::new());
    for (&mu, &sigma) in component.mus().iter().zip(component.sigmas()) {
        let s = (h * (sigma.ln() / h).round()).exp();
        let step = 2.0 * rho * s;
        mus.push(step * (mu / step).round());
        sigmas.push(s);
    }
    AxisAlignedGaussian::new(mus, sigmas).expect("snapped scales stay positive")
}

/// Candidate components from a decoded list, snapped and deduplicated when
/// `radius > 0`. Errors when the list alone exceeds `cap`.
pub fn candidate_components(list: &CandidateList, radius: f64, cap: usize) -> Result<Vec<AxisAlignedGaussian>> {
    let mut components: Vec<AxisAlignedGaussian> =
        list.materialize(cap)?.iter().map(|c| snap_component(c, radius)).collect();
    components.sort_by(|a, b| {
        a.mus()
            .iter()
            .chain(a.sigmas())
            .zip(b.mus().iter().chain(b.sigmas()))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    components.dedup();
    Ok(components)
}

/// Number of mixtures built from `components` candidates: multisets of `k`
/// components times the net.
pub fn candidate_mixture_count(components: usize, net: &SimplexNet) -> f64 {
    if components == 0 {
        return 0.0;
    }
    binomial(components + net.k() - 1, net.k()) * net.len() as f64
}

/// `{Σ ŵ_i f̂_i}` over every net point and every multiset of `k`
/// candidates. Since the net is closed under permutations, multisets lose
/// nothing against ordered tuples.
pub fn build_candidate_mixtures(
    components: &[AxisAlignedGaussian],
    net: &SimplexNet,
    cap: usize,
) -> Result<HypothesisSet> {
    if components.is_empty() || net.is_empty() {
        return Err(Error::InvalidInput("candidate mixtures need components and net points".into()));
    }
    let size = candidate_mixture_count(components.len(), net);
    if size > cap as f64 {
        return Err(Error::Overflow {
            what: "candidate mixtures",
            size,
            cap,
        });
    }
    let tuples = multisets(components.len(), net.k());
    let mixtures = tuples
        .par_iter()
        .flat_map_iter(|tuple| {
            (0..net.len()).map(move |p| {
                let parts = tuple.iter().map(|&i| components[i].clone()).collect();
                let model = MixtureModel::new(net.weights(p), parts).expect("net weights sum to one");
                let model = model.canonicalize();
                if model.k() == 1 {
                    Distribution::Gaussian(model.components()[0].clone())
                } else {
                    Distribution::Mixture(model)
                }
            })
        })
        .collect();
    HypothesisSet::new(mixtures)
}

/// Non-decreasing index tuples of length `k` over `0..m`.
fn multisets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0; k];
    fn fill(m: usize, start: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for i in start..m {
            current[pos] = i;
            fill(m, i, pos + 1, current, out);
        }
    }
    fill(m, 0, 0, &mut current, &mut out);
    out
}

// =============================================================================
// Learner
// =============================================================================

/// Run summary written next to the learned model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub n1: usize,
    pub n2: usize,
    /// Decoded candidate components after deduplication.
    #[serde(rename = "L")]
    pub list_size: usize,
    pub net_size: usize,
    pub candidates: usize,
    pub budget_ledger: BudgetLedger,
    /// Tournament utility of the selected mixture.
    pub selected_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    pub model: MixtureModel,
    pub selection: Selection,
    pub report: RunReport,
    /// Candidates the selection ran over; the contest data is every row
    /// after the first `report.n1`.
    pub hypotheses: HypothesisSet,
}

fn stage_sizes(n: usize, plan: &SamplePlan, allow_undersampled: bool) -> Result<(usize, usize)> {
    if n >= plan.total {
        return Ok((n - plan.n2, plan.n2));
    }
    if !allow_undersampled {
        return Err(Error::InsufficientData {
            stage: "learner",
            required: plan.total,
            available: n,
        });
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            stage: "learner",
            required: 2,
            available: n,
        });
    }
    let n1 = ((n as f64 * plan.n1 as f64 / plan.total as f64) as usize).clamp(1, n - 1);
    Ok((n1, n - n1))
}

/// Learns a `k`-mixture over `family`. With probability `1 − β` over the
/// data and the algorithm, the output is within TV `α` of the target once
/// the data meets [`sample_size_plan`]. The whole run is `(ε, δ)`-DP.
///
/// Rows beyond the plan go to the decoder. A decoder failure is reported
/// as [`Error::DecoderFailed`] rather than selecting from a partial set.
pub fn learn_mixture(config: &LearnerConfig, family: &Family, data: &Dataset) -> Result<LearnOutcome> {
    family.validate()?;
    if data.dim() != family.dim() {
        return Err(Error::InvalidInput(format!(
            "data has {} columns but the family expects {}",
            data.dim(),
            family.dim()
        )));
    }
    let plan = sample_size_plan(config, family)?;
    let (n1, n2) = stage_sizes(data.len(), &plan, config.allow_undersampled)?;
    let (decode_data, select_data) = data.split_at(n1);

    let splitter = Splitter::new(&mut stream(config.seed));
    let params = config.decoder_params()?;
    let list = family.decode(&params, &decode_data, &mut splitter.stream(0))?;
    if list.failed {
        return Err(Error::DecoderFailed(format!(
            "no candidates from {} rows at corruption {}",
            n1, params.gamma
        )));
    }

    let net = simplex_net(config.k, config.alpha / (18.0 * config.k as f64), config.candidate_cap)?;
    let components = candidate_components(&list, config.dedup_radius, config.candidate_cap)?;
    let hypotheses = build_candidate_mixtures(&components, &net, config.candidate_cap)?;

    let selection = phs_select(
        &config.budget,
        config.alpha,
        config.beta / 2.0,
        &hypotheses,
        &select_data,
        config.effort,
        &mut splitter.stream(1),
    )?;

    let mut ledger = BudgetLedger::default();
    let decoder_spent = list.budget_spent()?;
    ledger.push(list.ledger.into_group("list decoder"));
    ledger.push(Spend::mechanism("hypothesis selection", selection.spent));
    let composed = compose_basic(&[decoder_spent, selection.spent])?;
    if !composed.fits_within(&config.budget) {
        return Err(Error::Numeric(format!(
            "learner spent ({}, {:e}) beyond ({}, {:e})",
            composed.epsilon, composed.delta, config.budget.epsilon, config.budget.delta
        )));
    }
    ledger.verify(&config.budget)?;

    let model = match &selection.model {
        Distribution::Gaussian(g) => MixtureModel::single(g.clone()),
        Distribution::Mixture(m) => m.clone(),
        other => return Err(Error::Numeric(format!("selected a non-mixture model {other:?}"))),
    };
    Ok(LearnOutcome {
        model,
        report: RunReport {
            n1,
            n2,
            list_size: components.len(),
            net_size: net.len(),
            candidates: hypotheses.len(),
            budget_ledger: ledger,
            selected_score: selection.utility,
        },
        selection,
        hypotheses,
    })
}
