//! Sample sizes at which each decoder's accuracy guarantee is planned to
//! hold, with every hidden constant set to one sample constant `C`.

use serde::Serialize;

use crate::error::{check_gamma, check_open, Result};
use crate::privacy::{histogram_sample_bound, split_budget_for_gaussian_decoder, GaussianDecoderSplit, PrivacyBudget};

fn chernoff_bound(constant: f64, beta: f64, mass: f64) -> usize {
    (constant * (2.0 / beta).ln() / mass).ceil() as usize
}

/// Samples for the location decoder: the histogram must be `(1 − γ)/24`
/// accurate and the inlier bin mass must concentrate.
pub fn mean_decoder_samples(constant: f64, beta: f64, gamma: f64, budget: &PrivacyBudget) -> usize {
    let hist = histogram_sample_bound(constant, (1.0 - gamma) / 24.0, beta / 2.0, budget);
    hist.max(chernoff_bound(constant, beta, 1.0 - gamma))
}

/// Raw samples (twice the number of pairs) for the scale decoder.
pub fn variance_decoder_samples(constant: f64, beta: f64, gamma: f64, budget: &PrivacyBudget) -> usize {
    let q = (1.0 - gamma) * (1.0 - gamma);
    let hist = histogram_sample_bound(constant, q / 24.0, beta / 2.0, budget);
    2 * hist.max(chernoff_bound(constant, beta, q))
}

/// Allocation for the univariate Gaussian decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianDecoderPlan {
    /// Scale-stage samples (even).
    pub n1: usize,
    /// Location-stage samples needed by one per-scale search.
    pub n2: usize,
    /// `n1 + max(n1, n2)`: the second part is never smaller than the first.
    pub total: usize,
    #[serde(skip)]
    pub split: GaussianDecoderSplit,
}

pub fn gaussian_decoder_plan(
    constant: f64,
    beta: f64,
    gamma: f64,
    budget: &PrivacyBudget,
) -> Result<GaussianDecoderPlan> {
    check_open("beta", beta, 0.0, 1.0)?;
    check_gamma(gamma)?;
    let split = split_budget_for_gaussian_decoder(budget, gamma)?;
    let n1 = variance_decoder_samples(constant, beta / 2.0, gamma, &split.variance_budget);
    let n2 = mean_decoder_samples(constant, beta / 2.0, gamma, &split.round_budget);
    Ok(GaussianDecoderPlan {
        n1,
        n2,
        total: n1 + n1.max(n2),
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_plan_reference() {
        let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        // 8 · ln(1/(0.05 · 1e-6)) / (1/48)
        let expect = (8.0 * 48.0 * (1.0 / 0.05e-6f64).ln()).ceil() as usize;
        assert_eq!(mean_decoder_samples(8.0, 0.1, 0.5, &b), expect);
    }

    #[test]
    fn variance_plan_is_even_and_larger() {
        let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let v = variance_decoder_samples(8.0, 0.1, 0.5, &b);
        assert_eq!(v % 2, 0);
        assert!(v > mean_decoder_samples(8.0, 0.1, 0.5, &b));
    }

    #[test]
    fn gaussian_plan_grows_with_corruption() {
        let b = PrivacyBudget::new(1.0, 1e-6).unwrap();
        let low = gaussian_decoder_plan(8.0, 0.1, 0.0, &b).unwrap();
        let high = gaussian_decoder_plan(8.0, 0.1, 0.5, &b).unwrap();
        assert!(high.total > low.total);
        assert!(high.total >= 2 * high.n1);
    }
}
