//! Univariate Gaussian list-decoding: unknown scale, and known scale.

use rayon::prelude::*;
use serde::Serialize;

use super::coarse::{mean_list_cap, univariate_mean_decoder, univariate_variance_decoder};
use super::plan::{gaussian_decoder_plan, GaussianDecoderPlan};
use super::{grid_around, multivariate_gaussian_decoder, sort_dedup, CandidateList, CoordinateCandidates, ListParams};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::privacy::{ceil_guarded, BudgetLedger, Spend};
use crate::rng::{Splitter, Stream};

/// Largest accuracy the known-scale grid supports.
pub const MAX_KNOWN_VARIANCE_ALPHA: f64 = 2.0 / 3.0;

/// Refined location and scale lists; empty on failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinedParameterLists {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub failed: bool,
    #[serde(skip)]
    pub ledger: BudgetLedger,
}

/// `144 (2⌈1/α⌉ + 1) / (1 − γ)³`.
pub fn refined_mean_cap(alpha: f64, gamma: f64) -> f64 {
    144.0 * (2.0 * ceil_guarded(1.0 / alpha) as f64 + 1.0) / (1.0 - gamma).powi(3)
}

/// `12 ⌈log_{1+α} 2⌉ / (1 − γ)²`.
pub fn refined_scale_cap(alpha: f64, gamma: f64) -> f64 {
    12.0 * scale_grid(alpha).len() as f64 / (1.0 - gamma).powi(2)
}

/// Exponents `m·log₂(1 + α)` for `m = 1..⌈1/log₂(1 + α)⌉`, a
/// `log₂(1 + α)`-net of `[0, 1]`.
pub fn scale_grid(alpha: f64) -> Vec<f64> {
    let step = (1.0 + alpha).log2();
    (1..=ceil_guarded(1.0 / step)).map(|m| m as f64 * step).collect()
}

fn scale_stage_size(n: usize, plan: &GaussianDecoderPlan, allow_undersampled: bool) -> Result<usize> {
    if n >= 2 * plan.n1 {
        return Ok(plan.n1);
    }
    if !allow_undersampled {
        return Err(Error::InsufficientData {
            stage: "scale stage",
            required: 2 * plan.n1,
            available: n,
        });
    }
    let share = n as f64 * plan.n1 as f64 / plan.total as f64;
    let n1 = 2 * ((share / 2.0).floor() as usize).max(1);
    if n1 >= n {
        return Err(Error::InsufficientData {
            stage: "scale stage",
            required: 3,
            available: n,
        });
    }
    Ok(n1)
}

/// Location and scale lists such that, with probability `1 − β`, some pair
/// lies within `ασ` of the inlier Gaussian's `(μ, σ)`.
///
/// The first part of the data searches for a coarse scale at `(ε/2, δ/2)`.
/// For each coarse scale, the rest of the data searches for coarse
/// locations; those searches share `(ε/2, δ/2)` through advanced
/// composition over the data-independent maximum number of scales.
/// Locations are refined on a grid of step `α σ̃` and scales on the
/// geometric grid `σ̃ 2^(c − 1)`.
pub fn univariate_gaussian_decoder(params: &ListParams, data: &[f64], rng: &mut Stream) -> Result<RefinedParameterLists> {
    let plan = gaussian_decoder_plan(params.sample_constant, params.beta, params.gamma, &params.budget)?;
    let split_budget = plan.split;
    let n1 = scale_stage_size(data.len(), &plan, params.allow_undersampled)?;
    let (scale_data, location_data) = data.split_at(n1);

    let streams = Splitter::new(rng);
    let mut scale_stream = streams.stream(0);
    let coarse_scales = univariate_variance_decoder(
        params.beta / 2.0,
        params.gamma,
        &split_budget.variance_budget,
        scale_data,
        &mut scale_stream,
    )?;

    let mut ledger = BudgetLedger::default();
    ledger.push(Spend::mechanism("scale histogram", split_budget.variance_budget));
    let rounds = |used: usize| Spend::Advanced {
        label: "location histograms".into(),
        epsilon0: split_budget.round_budget.epsilon,
        step_delta: split_budget.round_budget.delta,
        delta0: split_budget.composition_delta,
        planned_steps: split_budget.rounds,
        used_steps: used,
    };

    if coarse_scales.failed || coarse_scales.values.is_empty() {
        ledger.push(rounds(0));
        ledger.verify(&params.budget)?;
        return Ok(RefinedParameterLists {
            means: Vec::new(),
            scales: Vec::new(),
            failed: true,
            ledger,
        });
    }

    let coarse_means = coarse_scales
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &sigma_tilde)| {
            let mut s = streams.stream(1 + i as u64);
            univariate_mean_decoder(
                params.beta / 2.0,
                params.gamma,
                &split_budget.round_budget,
                sigma_tilde,
                location_data,
                &mut s,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ledger.push(rounds(coarse_scales.values.len()));
    ledger.verify(&params.budget)?;

    let half_width = ceil_guarded(1.0 / params.alpha);
    let mut means = Vec::new();
    for (&sigma_tilde, located) in coarse_scales.values.iter().zip(&coarse_means) {
        for &center in &located.values {
            grid_around(center, params.alpha * sigma_tilde, half_width, &mut means);
        }
    }
    let exponents = scale_grid(params.alpha);
    let mut scales: Vec<f64> = coarse_scales
        .values
        .iter()
        .flat_map(|&s| exponents.iter().map(move |&c| s * (c - 1.0).exp2()))
        .collect();
    sort_dedup(&mut means);
    sort_dedup(&mut scales);

    let failed = means.is_empty();
    if failed {
        scales.clear();
    }
    Ok(RefinedParameterLists {
        means,
        scales,
        failed,
        ledger,
    })
}

/// Every `N(μ̂, σ̂²)` from the refined lists; the cap is the product of the
/// two list caps.
pub fn full_univariate_list_decoder(params: &ListParams, data: &[f64], rng: &mut Stream) -> Result<CandidateList> {
    multivariate_gaussian_decoder(params, &Dataset::univariate(data.to_vec()), rng)
}

/// `(12/(1 − γ)) (2⌈1/(2α)⌉ + 1)` with α clamped to 2/3.
pub fn known_variance_list_cap(alpha: f64, gamma: f64) -> f64 {
    let alpha = alpha.min(MAX_KNOWN_VARIANCE_ALPHA);
    mean_list_cap(gamma) * (2.0 * ceil_guarded(1.0 / (2.0 * alpha)) as f64 + 1.0)
}

/// Candidates `N(μ̂, σ²)` for a known scale `σ`: coarse locations refined on a
/// grid of step `2ασ` covering `[μ̃ − σ, μ̃ + σ]`.
pub fn known_variance_list_decoder(
    params: &ListParams,
    sigma: f64,
    data: &[f64],
    rng: &mut Stream,
) -> Result<CandidateList> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", format!("{sigma} must be positive")));
    }
    let alpha = params.alpha.min(MAX_KNOWN_VARIANCE_ALPHA);
    let cap = known_variance_list_cap(alpha, params.gamma);
    let coarse = univariate_mean_decoder(params.beta, params.gamma, &params.budget, sigma, data, rng)?;
    let ledger = coarse.ledger;
    ledger.verify(&params.budget)?;
    if coarse.failed || coarse.values.is_empty() {
        return Ok(CandidateList::failed(1, cap, ledger));
    }
    let half_width = ceil_guarded(1.0 / (2.0 * alpha));
    let mut means = Vec::new();
    for &center in &coarse.values {
        grid_around(center, 2.0 * alpha * sigma, half_width, &mut means);
    }
    sort_dedup(&mut means);
    Ok(CandidateList {
        coordinates: vec![CoordinateCandidates {
            means,
            scales: vec![sigma],
        }],
        failed: false,
        cap,
        ledger,
    })
}
