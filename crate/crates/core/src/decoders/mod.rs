//! Private list-decoders: from samples of a heavily corrupted Gaussian,
//! output a short list of candidates one of which is close to it.

mod coarse;
mod family;
mod gaussian;
mod multivariate;
mod plan;

pub use coarse::{
    mean_list_cap, paired_differences, scale_list_cap, univariate_mean_decoder, univariate_variance_decoder,
    CoarseMeanList, CoarseScaleList,
};
pub use family::Family;
pub use gaussian::{
    full_univariate_list_decoder, known_variance_list_cap, known_variance_list_decoder, refined_mean_cap,
    refined_scale_cap, scale_grid, univariate_gaussian_decoder, RefinedParameterLists, MAX_KNOWN_VARIANCE_ALPHA,
};
pub use multivariate::{identity_covariance_list_decoder, identity_list_cap, multivariate_gaussian_decoder};
pub use plan::{
    gaussian_decoder_plan, mean_decoder_samples, variance_decoder_samples, GaussianDecoderPlan,
};

use serde::{Deserialize, Serialize};

use crate::distributions::AxisAlignedGaussian;
use crate::error::{check_gamma, check_open, invalid, Error, Result};
use crate::privacy::{BudgetLedger, PrivacyBudget, DEFAULT_SAMPLE_CONSTANT};

/// Accuracy, confidence, corruption and privacy targets shared by the
/// list-decoders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ListParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub budget: PrivacyBudget,
    pub sample_constant: f64,
    /// Split undersized data in proportion to the plan instead of erroring.
    pub allow_undersampled: bool,
}

impl ListParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, budget: PrivacyBudget) -> Result<Self> {
        check_open("alpha", alpha, 0.0, 1.0)?;
        check_open("beta", beta, 0.0, 1.0)?;
        check_gamma(gamma)?;
        Ok(Self {
            alpha,
            beta,
            gamma,
            budget,
            sample_constant: DEFAULT_SAMPLE_CONSTANT,
            allow_undersampled: false,
        })
    }

    pub fn with_sample_constant(mut self, constant: f64) -> Result<Self> {
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(invalid("sample_constant", format!("{constant} must be positive")));
        }
        self.sample_constant = constant;
        Ok(self)
    }

    pub fn allow_undersampled(mut self, allow: bool) -> Self {
        self.allow_undersampled = allow;
        self
    }

    /// `(α/d, β/d, γ, ε/d, δ/d)` for one of `d` coordinates.
    pub fn per_coordinate(&self, d: usize) -> Self {
        let d = d as f64;
        Self {
            alpha: self.alpha / d,
            beta: self.beta / d,
            budget: self.budget.scale(1.0 / d),
            ..*self
        }
    }
}

/// Candidate locations and scales for one coordinate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoordinateCandidates {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

/// A list-decoder's output in factored form: every combination of one
/// location and one scale per coordinate is a candidate axis-aligned
/// Gaussian. The list is empty when the decoder failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList {
    pub coordinates: Vec<CoordinateCandidates>,
    pub failed: bool,
    /// Deterministic bound on the number of candidates.
    pub cap: f64,
    pub ledger: BudgetLedger,
}

impl CandidateList {
    pub(crate) fn failed(dim: usize, cap: f64, ledger: BudgetLedger) -> Self {
        Self {
            coordinates: vec![CoordinateCandidates::default(); dim],
            failed: true,
            cap,
            ledger,
        }
    }

    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    /// Number of candidates, as a float since it can overflow integers.
    pub fn count(&self) -> f64 {
        self.coordinates
            .iter()
            .map(|c| c.means.len() as f64 * c.scales.len() as f64)
            .product()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0.0
    }

    /// Lazily enumerates all candidates in lexicographic order.
    pub fn iter(&self) -> CandidateIter<'_> {
        let radices: Vec<usize> = self
            .coordinates
            .iter()
            .flat_map(|c| [c.means.len(), c.scales.len()])
            .collect();
        let done = radices.contains(&0);
        CandidateIter {
            list: self,
            digits: vec![0; radices.len()],
            radices,
            done,
        }
    }

    /// All candidates, or an overflow error when there are more than `cap`.
    pub fn materialize(&self, cap: usize) -> Result<Vec<AxisAlignedGaussian>> {
        let count = self.count();
        if count > cap as f64 {
            return Err(Error::Overflow {
                what: "candidate list",
                size: count,
                cap,
            });
        }
        Ok(self.iter().collect())
    }

    pub fn budget_spent(&self) -> Result<PrivacyBudget> {
        self.ledger.total()
    }

    /// JSON-ready summary; one-dimensional lists are flat.
    pub fn report(&self) -> Result<DecoderReport> {
        let (means, scales) = if self.dim() == 1 {
            (
                ParameterValues::Flat(self.coordinates[0].means.clone()),
                ParameterValues::Flat(self.coordinates[0].scales.clone()),
            )
        } else {
            (
                ParameterValues::PerCoordinate(self.coordinates.iter().map(|c| c.means.clone()).collect()),
                ParameterValues::PerCoordinate(self.coordinates.iter().map(|c| c.scales.clone()).collect()),
            )
        };
        Ok(DecoderReport {
            means,
            scales,
            failed: self.failed,
            budget_spent: self.budget_spent()?,
        })
    }
}

pub struct CandidateIter<'a> {
    list: &'a CandidateList,
    radices: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for CandidateIter<'_> {
    type Item = AxisAlignedGaussian;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let d = self.list.dim();
        let mut mus = Vec::with_capacity(d);
        let mut sigmas = Vec::with_capacity(d);
        for (j, c) in self.list.coordinates.iter().enumerate() {
            mus.push(c.means[self.digits[2 * j]]);
            sigmas.push(c.scales[self.digits[2 * j + 1]]);
        }
        // advance the mixed-radix counter, last digit fastest
        let mut pos = self.digits.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.digits[pos] += 1;
            if self.digits[pos] < self.radices[pos] {
                break;
            }
            self.digits[pos] = 0;
        }
        Some(AxisAlignedGaussian::new(mus, sigmas).expect("decoded scales are positive"))
    }
}

/// Location/scale values: flat for one coordinate, nested otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParameterValues {
    Flat(Vec<f64>),
    PerCoordinate(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderReport {
    pub means: ParameterValues,
    pub scales: ParameterValues,
    pub failed: bool,
    pub budget_spent: PrivacyBudget,
}

fn sort_dedup(values: &mut Vec<f64>) {
    values.sort_by(f64::total_cmp);
    values.dedup();
}

/// Symmetric grid `center + j·step` for `|j| ≤ half_width`.
fn grid_around(center: f64, step: f64, half_width: usize, out: &mut Vec<f64>) {
    let h = half_width as i64;
    out.extend((-h..=h).map(|j| center + j as f64 * step));
}
