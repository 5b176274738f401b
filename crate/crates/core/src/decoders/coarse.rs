//! Histogram-based coarse decoders for a location and a scale.

use serde::Serialize;
use std::f64::consts::SQRT_2;

use crate::error::{check_gamma, check_open, invalid, Error, Result};
use crate::privacy::{stable_histogram, BinPartition, BudgetLedger, PrivacyBudget, Spend};
use crate::rng::Stream;

/// Candidate locations `i·σ̃` for the heavy unit bins. Empty on failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoarseMeanList {
    pub values: Vec<f64>,
    pub failed: bool,
    #[serde(skip)]
    pub ledger: BudgetLedger,
}

/// Candidate scales `2^(i+1)` for the heavy dyadic bins. Empty on failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoarseScaleList {
    pub values: Vec<f64>,
    pub failed: bool,
    #[serde(skip)]
    pub ledger: BudgetLedger,
}

/// Most heavy bins a location search may report: `12/(1 − γ)`.
pub fn mean_list_cap(gamma: f64) -> f64 {
    12.0 / (1.0 - gamma)
}

/// Most heavy bins a scale search may report: `12/(1 − γ)²`.
pub fn scale_list_cap(gamma: f64) -> f64 {
    12.0 / ((1.0 - gamma) * (1.0 - gamma))
}

/// Locates the centre of a `(1 − γ)` fraction of roughly `N(μ, σ²)` data
/// to within `σ`, given a scale guess `σ̃ ∈ [σ, 2σ)`.
///
/// Bins of width `σ̃` go through the stable histogram at accuracy
/// `(1 − γ)/24`; bins above `(1 − γ)/8` are heavy. More than `12/(1 − γ)`
/// heavy bins is a failure and yields an empty list.
pub fn univariate_mean_decoder(
    beta: f64,
    gamma: f64,
    budget: &PrivacyBudget,
    sigma_tilde: f64,
    data: &[f64],
    rng: &mut Stream,
) -> Result<CoarseMeanList> {
    check_open("beta", beta, 0.0, 1.0)?;
    check_gamma(gamma)?;
    if !(sigma_tilde > 0.0 && sigma_tilde.is_finite()) {
        return Err(invalid("sigma_tilde", format!("{sigma_tilde} must be positive")));
    }
    if data.is_empty() {
        return Err(Error::InvalidInput("mean decoder needs data".into()));
    }
    let bins = BinPartition::unit_width(sigma_tilde)?;
    let hist = stable_histogram(budget, (1.0 - gamma) / 24.0, beta / 2.0, data, &bins, rng)?;
    let heavy = hist.heavy((1.0 - gamma) / 8.0);
    let mut ledger = BudgetLedger::default();
    ledger.push(Spend::mechanism("location histogram", *budget));

    if heavy.len() as f64 > mean_list_cap(gamma) {
        return Ok(CoarseMeanList {
            values: Vec::new(),
            failed: true,
            ledger,
        });
    }
    Ok(CoarseMeanList {
        values: heavy.iter().map(|&i| i as f64 * sigma_tilde).collect(),
        failed: false,
        ledger,
    })
}

/// `|x₂ₖ − x₂ₖ₋₁| / √2` for consecutive pairs.
pub fn paired_differences(data: &[f64]) -> Vec<f64> {
    data.chunks_exact(2).map(|p| (p[1] - p[0]).abs() / SQRT_2).collect()
}

/// Finds a scale `σ̃ ∈ [σ, 2σ)` for a `(1 − γ)` fraction of roughly
/// `N(μ, σ²)` data.
///
/// Consecutive pairs are differenced to remove the location; the absolute
/// differences go through a dyadic stable histogram at accuracy
/// `(1 − γ)²/24`. Zero differences fall in no bin.
pub fn univariate_variance_decoder(
    beta: f64,
    gamma: f64,
    budget: &PrivacyBudget,
    data: &[f64],
    rng: &mut Stream,
) -> Result<CoarseScaleList> {
    check_open("beta", beta, 0.0, 1.0)?;
    check_gamma(gamma)?;
    if data.len() < 2 || data.len() % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "scale decoder needs an even number of samples (got {})",
            data.len()
        )));
    }
    let pairs = paired_differences(data);
    let q = (1.0 - gamma) * (1.0 - gamma);
    let hist = stable_histogram(budget, q / 24.0, beta / 2.0, &pairs, &BinPartition::Dyadic, rng)?;
    let heavy = hist.heavy(q / 8.0);
    let mut ledger = BudgetLedger::default();
    ledger.push(Spend::mechanism("scale histogram", *budget));

    if heavy.len() as f64 > scale_list_cap(gamma) {
        return Ok(CoarseScaleList {
            values: Vec::new(),
            failed: true,
            ledger,
        });
    }
    Ok(CoarseScaleList {
        values: heavy.iter().map(|&i| (i as f64 + 1.0).exp2()).collect(),
        failed: false,
        ledger,
    })
}
