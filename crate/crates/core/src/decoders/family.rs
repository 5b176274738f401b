use serde::{Deserialize, Serialize};

use super::gaussian::{known_variance_list_cap, known_variance_list_decoder, refined_mean_cap, refined_scale_cap};
use super::multivariate::{identity_covariance_list_decoder, identity_list_cap, multivariate_gaussian_decoder};
use super::plan::{gaussian_decoder_plan, mean_decoder_samples};
use super::{CandidateList, ListParams};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::rng::Stream;

/// Component family a mixture is learned over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Univariate Gaussians with unknown mean and scale.
    Univariate,
    /// Axis-aligned Gaussians in `d` dimensions.
    AxisAligned { d: usize },
    /// Identity-covariance Gaussians in `d` dimensions.
    Identity { d: usize },
    /// Univariate Gaussians with a known scale.
    KnownSigma { sigma: f64 },
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::AxisAligned { d } | Self::Identity { d } if d == 0 => Err(invalid("d", "dimension must be at least 1")),
            Self::KnownSigma { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(invalid("sigma", format!("{sigma} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::Univariate | Self::KnownSigma { .. } => 1,
            Self::AxisAligned { d } | Self::Identity { d } => d,
        }
    }

    /// Deterministic bound `L` on the decoder's list size.
    pub fn list_cap(&self, alpha: f64, gamma: f64) -> f64 {
        match *self {
            Self::Univariate => refined_mean_cap(alpha, gamma) * refined_scale_cap(alpha, gamma),
            Self::AxisAligned { d } => {
                let a = alpha / d as f64;
                (refined_mean_cap(a, gamma) * refined_scale_cap(a, gamma)).powi(d as i32)
            }
            Self::Identity { d } => identity_list_cap(alpha, gamma, d),
            Self::KnownSigma { .. } => known_variance_list_cap(alpha, gamma),
        }
    }

    /// Rows the decoder needs for its accuracy guarantee.
    pub fn required_samples(&self, params: &ListParams) -> Result<usize> {
        self.validate()?;
        let c = params.sample_constant;
        Ok(match *self {
            Self::Univariate => gaussian_decoder_plan(c, params.beta, params.gamma, &params.budget)?.total,
            Self::AxisAligned { d } => {
                let coord = params.per_coordinate(d);
                gaussian_decoder_plan(c, coord.beta, coord.gamma, &coord.budget)?.total
            }
            Self::Identity { d } => {
                let df = d as f64;
                mean_decoder_samples(c, params.beta / df, params.gamma, &params.budget.scale(1.0 / df))
            }
            Self::KnownSigma { .. } => mean_decoder_samples(c, params.beta, params.gamma, &params.budget),
        })
    }

    pub fn decode(&self, params: &ListParams, data: &Dataset, rng: &mut Stream) -> Result<CandidateList> {
        self.validate()?;
        if data.dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "data has {} columns but the family expects {}",
                data.dim(),
                self.dim()
            )));
        }
        match *self {
            Self::Univariate | Self::AxisAligned { .. } => multivariate_gaussian_decoder(params, data, rng),
            Self::Identity { .. } => identity_covariance_list_decoder(params, data, rng),
            Self::KnownSigma { sigma } => known_variance_list_decoder(params, sigma, data.values(), rng),
        }
    }
}
