//! Coordinate-wise decoders for axis-aligned Gaussians.

use rayon::prelude::*;

use super::coarse::{mean_list_cap, univariate_mean_decoder};
use super::gaussian::{refined_mean_cap, refined_scale_cap, univariate_gaussian_decoder};
use super::{grid_around, sort_dedup, CandidateList, CoordinateCandidates, ListParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::privacy::{ceil_guarded, BudgetLedger};
use crate::rng::{split, Stream};

fn check_data(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("decoder needs data".into()));
    }
    Ok(())
}

/// Runs the univariate Gaussian decoder on every coordinate at
/// `(α/d, β/d, γ, ε/d, δ/d)` and takes the product of the per-coordinate
/// lists. A failure on any coordinate fails the whole decode.
pub fn multivariate_gaussian_decoder(params: &ListParams, data: &Dataset, rng: &mut Stream) -> Result<CandidateList> {
    check_data(data)?;
    let d = data.dim();
    let coord = params.per_coordinate(d);
    let cap = (refined_mean_cap(coord.alpha, coord.gamma) * refined_scale_cap(coord.alpha, coord.gamma)).powi(d as i32);

    let outputs = split(rng, d)
        .into_par_iter()
        .enumerate()
        .map(|(j, mut s)| univariate_gaussian_decoder(&coord, &data.column(j), &mut s))
        .collect::<Result<Vec<_>>>()?;

    let mut ledger = BudgetLedger::default();
    for (j, out) in outputs.iter().enumerate() {
        ledger.push(out.ledger.clone().into_group(format!("coordinate {j}")));
    }
    ledger.verify(&params.budget)?;
    if outputs.iter().any(|o| o.failed) {
        return Ok(CandidateList::failed(d, cap, ledger));
    }
    Ok(CandidateList {
        coordinates: outputs
            .into_iter()
            .map(|o| CoordinateCandidates {
                means: o.means,
                scales: o.scales,
            })
            .collect(),
        failed: false,
        cap,
        ledger,
    })
}

/// Per-coordinate cap `(12/(1 − γ)) (2⌈d/(2α)⌉ + 1)`, raised to the `d`.
pub fn identity_list_cap(alpha: f64, gamma: f64, d: usize) -> f64 {
    let per_coordinate = mean_list_cap(gamma) * (2.0 * ceil_guarded(d as f64 / (2.0 * alpha)) as f64 + 1.0);
    per_coordinate.powi(d as i32)
}

/// Identity-covariance candidates: a unit-scale location search per
/// coordinate at `(β/d, γ, ε/d, δ/d)`, refined on a grid of step `2α/d`.
pub fn identity_covariance_list_decoder(params: &ListParams, data: &Dataset, rng: &mut Stream) -> Result<CandidateList> {
    check_data(data)?;
    let d = data.dim();
    let df = d as f64;
    let cap = identity_list_cap(params.alpha, params.gamma, d);
    let budget = params.budget.scale(1.0 / df);

    let outputs = split(rng, d)
        .into_par_iter()
        .enumerate()
        .map(|(j, mut s)| univariate_mean_decoder(params.beta / df, params.gamma, &budget, 1.0, &data.column(j), &mut s))
        .collect::<Result<Vec<_>>>()?;

    let mut ledger = BudgetLedger::default();
    for (j, out) in outputs.iter().enumerate() {
        ledger.push(out.ledger.clone().into_group(format!("coordinate {j}")));
    }
    ledger.verify(&params.budget)?;
    if outputs.iter().any(|o| o.failed || o.values.is_empty()) {
        return Ok(CandidateList::failed(d, cap, ledger));
    }

    let step = 2.0 * params.alpha / df;
    let half_width = ceil_guarded(df / (2.0 * params.alpha));
    let coordinates = outputs
        .into_iter()
        .map(|o| {
            let mut means = Vec::new();
            for &center in &o.values {
                grid_around(center, step, half_width, &mut means);
            }
            sort_dedup(&mut means);
            CoordinateCandidates {
                means,
                scales: vec![1.0],
            }
        })
        .collect();
    Ok(CandidateList {
        coordinates,
        failed: false,
        cap,
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{full_univariate_list_decoder, known_variance_list_decoder};
    use crate::distributions::{sample, AxisAlignedGaussian, Distribution};
    use crate::privacy::{compose_basic, PrivacyBudget};
    use crate::rng::stream;

    #[test]
    fn per_coordinate_budget_composes_back() {
        let p = ListParams::new(0.3, 0.1, 0.0, PrivacyBudget::new(0.9, 3e-6).unwrap()).unwrap();
        let c = p.per_coordinate(3);
        assert!((c.budget.epsilon - 0.3).abs() < 1e-15);
        let total = compose_basic(&[c.budget; 3]).unwrap();
        assert!((total.epsilon - 0.9).abs() < 1e-12 && (total.delta - 3e-6).abs() < 1e-18);
    }

    #[test]
    fn one_dimension_matches_univariate() {
        let p = ListParams::new(0.25, 0.1, 0.0, PrivacyBudget::new(1.0, 1e-6).unwrap()).unwrap();
        let g = Distribution::univariate(1.0, 2.0).unwrap();
        let data = sample(&g, 80_000, &mut stream(1));
        let a = multivariate_gaussian_decoder(&p, &data, &mut stream(7)).unwrap();
        let b = full_univariate_list_decoder(&p, data.values(), &mut stream(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_reduces_to_known_variance() {
        let p = ListParams::new(0.3, 0.1, 0.0, PrivacyBudget::new(1.0, 1e-6).unwrap()).unwrap();
        let g = Distribution::univariate(-2.0, 1.0).unwrap();
        let data = sample(&g, 20_000, &mut stream(2));
        let a = identity_covariance_list_decoder(&p, &data, &mut stream(5)).unwrap();
        // the identity decoder hands coordinate 0 the first split stream
        let mut first = split(&mut stream(5), 1).remove(0);
        let b = known_variance_list_decoder(&p, 1.0, data.values(), &mut first).unwrap();
        assert_eq!(a.coordinates, b.coordinates);
    }

    #[test]
    fn identity_two_dimensions() {
        let p = ListParams::new(0.4, 0.1, 0.5, PrivacyBudget::new(1.0, 1e-6).unwrap()).unwrap();
        let g: Distribution = AxisAlignedGaussian::identity(vec![3.0, -3.0]).unwrap().into();
        let data = sample(&g, 50_000, &mut stream(3));
        let out = identity_covariance_list_decoder(&p, &data, &mut stream(4)).unwrap();
        assert!(!out.failed);
        assert!(out.count() <= out.cap);
        for (c, target) in out.coordinates.iter().zip([3.0, -3.0]) {
            assert!(c.means.iter().any(|m| (m - target).abs() <= 0.2 + 1e-9));
        }
    }
}
