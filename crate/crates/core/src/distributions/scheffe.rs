//! Scheffé sets `{x : a(x) > b(x)}` and their masses.

use serde::Serialize;

use super::normal::{normal_interval_mass, std_normal_cdf};
use super::tv::{dominance_intervals, MIN_EFFORT};
use super::{AxisAlignedGaussian, Density, Distribution, Sampler};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::rng::Stream;

/// A Scheffé set in the most explicit form available.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheffeRegion<'a> {
    /// `a` and `b` coincide: the strict inequality never holds.
    Empty,
    /// Union of open intervals (univariate Gaussian pairs).
    Intervals(Vec<(f64, f64)>),
    /// `{x : normal · x > offset}` (Gaussians sharing their scale vector).
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Membership decided by evaluating both densities.
    General { a: &'a Distribution, b: &'a Distribution },
}

/// Probability estimate with its standard error (0 when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl MassEstimate {
    fn exact(value: f64) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            std_error: 0.0,
        }
    }
}

/// The set where `a` strictly dominates `b`.
pub fn scheffe_region<'a>(a: &'a Distribution, b: &'a Distribution) -> ScheffeRegion<'a> {
    if a == b {
        return ScheffeRegion::Empty;
    }
    let (Some(ga), Some(gb)) = (a.as_single_gaussian(), b.as_single_gaussian()) else {
        return ScheffeRegion::General { a, b };
    };
    if ga == gb {
        return ScheffeRegion::Empty;
    }
    if ga.dim() == 1 {
        return ScheffeRegion::Intervals(dominance_intervals(&ga.marginal(0), &gb.marginal(0)));
    }
    if ga.sigmas() == gb.sigmas() {
        return halfspace(ga, gb);
    }
    ScheffeRegion::General { a, b }
}

fn halfspace<'a>(a: &AxisAlignedGaussian, b: &AxisAlignedGaussian) -> ScheffeRegion<'a> {
    // ln a − ln b = Σ_j (μa − μb)_j x_j / σ_j² − Σ_j (μa² − μb²)_j / (2σ_j²)
    let mut normal = Vec::with_capacity(a.dim());
    let mut offset = 0.0;
    for ((&ma, &mb), &s) in a.mus().iter().zip(b.mus()).zip(a.sigmas()) {
        let s2 = s * s;
        normal.push((ma - mb) / s2);
        offset += (ma * ma - mb * mb) / (2.0 * s2);
    }
    ScheffeRegion::Halfspace { normal, offset }
}

impl ScheffeRegion<'_> {
    /// Strict membership; ties are outside.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::Empty => false,
            Self::Intervals(iv) => iv.iter().any(|&(lo, hi)| lo < x[0] && x[0] < hi),
            Self::Halfspace { normal, offset } => dot(normal, x) > *offset,
            Self::General { a, b } => a.log_density(x) > b.log_density(x),
        }
    }

    /// Mass under `model`: exact when the region is explicit and the model
    /// is a Gaussian mixture, otherwise a Monte Carlo fraction over `effort`
    /// draws with the worst-case standard error `1/(2√effort)`.
    pub fn mass(&self, model: &Distribution, effort: usize, rng: &mut Stream) -> Result<MassEstimate> {
        if let Self::Empty = self {
            return Ok(MassEstimate::exact(0.0));
        }
        if let Some(parts) = model.gaussian_components() {
            match self {
                Self::Intervals(iv) => {
                    let value = parts
                        .iter()
                        .map(|(w, g)| {
                            let (mu, sigma) = (g.mus()[0], g.sigmas()[0]);
                            w * iv
                                .iter()
                                .map(|&(lo, hi)| normal_interval_mass(mu, sigma, lo, hi))
                                .sum::<f64>()
                        })
                        .sum();
                    return Ok(MassEstimate::exact(value));
                }
                Self::Halfspace { normal, offset } => {
                    let value = parts
                        .iter()
                        .map(|(w, g)| {
                            let mean = dot(normal, g.mus()) - offset;
                            let var: f64 = normal.iter().zip(g.sigmas()).map(|(c, s)| c * c * s * s).sum();
                            w * std_normal_cdf(mean / var.sqrt())
                        })
                        .sum();
                    return Ok(MassEstimate::exact(value));
                }
                _ => {}
            }
        }
        if effort == 0 {
            return Err(invalid("effort", "Monte Carlo needs at least one draw"));
        }
        let mut x = Vec::with_capacity(model.dim());
        let mut hits = 0usize;
        for _ in 0..effort {
            x.clear();
            model.sample_into(rng, &mut x);
            if self.contains(&x) {
                hits += 1;
            }
        }
        Ok(MassEstimate {
            value: hits as f64 / effort as f64,
            std_error: 0.5 / (effort as f64).sqrt(),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dataset plus a sorted copy of the first column for fast interval counts.
pub struct EmpiricalView<'a> {
    data: &'a Dataset,
    sorted: Option<Vec<f64>>,
}

impl<'a> EmpiricalView<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        let sorted = (data.dim() == 1).then(|| {
            let mut v = data.values().to_vec();
            v.sort_by(f64::total_cmp);
            v
        });
        Self { data, sorted }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Fraction of points strictly inside the region.
    pub fn fraction(&self, region: &ScheffeRegion<'_>) -> f64 {
        let n = self.data.len() as f64;
        match (region, &self.sorted) {
            (ScheffeRegion::Empty, _) => 0.0,
            (ScheffeRegion::Intervals(iv), Some(sorted)) => {
                let count: usize = iv
                    .iter()
                    .map(|&(lo, hi)| {
                        let above = sorted.partition_point(|&x| x <= lo);
                        let below = sorted.partition_point(|&x| x < hi);
                        below.saturating_sub(above)
                    })
                    .sum();
                count as f64 / n
            }
            _ => self.data.rows().filter(|x| region.contains(x)).count() as f64 / n,
        }
    }
}

/// `P_{X ~ model}[a(X) > b(X)]`.
pub fn scheffe_mass(
    model: &Distribution,
    a: &Distribution,
    b: &Distribution,
    effort: usize,
    rng: &mut Stream,
) -> Result<f64> {
    if effort < MIN_EFFORT {
        return Err(invalid("effort", format!("{effort} is below {MIN_EFFORT}")));
    }
    Ok(scheffe_region(a, b).mass(model, effort, rng)?.value)
}

/// Fraction of `data` with `a(x) > b(x)`.
pub fn empirical_mass(data: &Dataset, a: &Distribution, b: &Distribution) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empirical mass of an empty dataset".into()));
    }
    Ok(EmpiricalView::new(data).fraction(&scheffe_region(a, b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample, MixtureModel};
    use crate::rng::stream;

    const PHI1: f64 = 0.841_344_746_068_542_9;

    fn g(mu: f64, sigma: f64) -> Distribution {
        Distribution::univariate(mu, sigma).unwrap()
    }

    #[test]
    fn univariate_masses() {
        let mut rng = stream(0);
        let (a, b) = (g(0.0, 1.0), g(2.0, 1.0));
        assert!((scheffe_mass(&a, &a, &b, 1000, &mut rng).unwrap() - PHI1).abs() < 1e-15);
        assert!((scheffe_mass(&b, &a, &b, 1000, &mut rng).unwrap() - (1.0 - PHI1)).abs() < 1e-15);
        assert_eq!(scheffe_mass(&a, &a, &a.clone(), 1000, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn halfspace_mass_is_whitened_distance() {
        let a: Distribution = AxisAlignedGaussian::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap().into();
        let b: Distribution = AxisAlignedGaussian::new(vec![3.0, 4.0], vec![1.0, 2.0]).unwrap().into();
        // whitened distance √(9 + 4) → mass Φ(D/2)
        let d = 13f64.sqrt();
        let m = scheffe_mass(&a, &a, &b, 1000, &mut stream(0)).unwrap();
        assert!((m - std_normal_cdf(d / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn monte_carlo_mass_for_mixtures() {
        let mix: Distribution = MixtureModel::new(vec![0.5, 0.5], vec![g(0.0, 1.0).as_single_gaussian().unwrap().clone(), g(2.0, 1.0).as_single_gaussian().unwrap().clone()])
            .unwrap()
            .into();
        let a = g(0.0, 1.0);
        let region = scheffe_region(&mix, &a);
        assert!(matches!(region, ScheffeRegion::General { .. }));
        // under the exact rule the same region evaluated by densities
        let est = region.mass(&a, 100_000, &mut stream(3)).unwrap();
        let exact = scheffe_mass(&a, &g(2.0, 1.0), &a, 1000, &mut stream(0)).unwrap();
        // mix > a  ⇔  N(2,1) > N(0,1)  ⇔  x > 1
        assert!((est.value - exact).abs() < 4.0 * est.std_error);
    }

    #[test]
    fn empirical_masses() {
        let (a, b) = (g(0.0, 1.0), g(2.0, 1.0));
        let zeros = Dataset::univariate(vec![0.0; 10]);
        assert_eq!(empirical_mass(&zeros, &a, &b).unwrap(), 1.0);
        assert_eq!(empirical_mass(&zeros, &a, &a).unwrap(), 0.0);
        assert!(empirical_mass(&Dataset::univariate(vec![]), &a, &b).is_err());
        let data = sample(&a, 10_000, &mut stream(8));
        assert!((empirical_mass(&data, &a, &b).unwrap() - PHI1).abs() < 0.011);
        // the crossing point itself is a tie and stays outside
        let tie = Dataset::univariate(vec![1.0]);
        assert_eq!(empirical_mass(&tie, &a, &b).unwrap(), 0.0);
    }

    #[test]
    fn sorted_and_scanned_counts_agree() {
        let (a, b) = (g(0.0, 1.0), g(0.5, 3.0));
        let data = sample(&b, 5000, &mut stream(2));
        let region = scheffe_region(&a, &b);
        let fast = EmpiricalView::new(&data).fraction(&region);
        let slow = data.rows().filter(|x| region.contains(x)).count() as f64 / 5000.0;
        assert_eq!(fast, slow);
    }
}
