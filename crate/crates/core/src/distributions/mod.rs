//! Gaussian, axis-aligned Gaussian, mixture and corrupted-source models.

mod normal;
mod scheffe;
mod tv;

pub use normal::{normal_interval_mass, normal_log_pdf, std_normal_cdf, LN_SQRT_2PI};
pub use scheffe::{empirical_mass, scheffe_mass, scheffe_region, EmpiricalView, MassEstimate, ScheffeRegion};
pub use tv::{
    dominance_intervals, evaluate_tv, tv_numeric, tv_univariate_gaussians, TvEstimate, TvMethod, MIN_EFFORT,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_gamma, invalid, Error, Result};
use crate::rng::{uniform_open, Stream};

/// Tolerance on mixture weights summing to one.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Pointwise log-density.
pub trait Density {
    fn dim(&self) -> usize;
    /// `ln f(x)`; `-inf` where the density vanishes.
    fn log_density(&self, x: &[f64]) -> f64;
}

/// i.i.d. sampling into a flat row buffer.
pub trait Sampler {
    fn dim(&self) -> usize;
    /// Appends one row of `dim()` values.
    fn sample_into(&self, rng: &mut Stream, out: &mut Vec<f64>);
}

/// `n` i.i.d. draws.
pub fn sample<S: Sampler + ?Sized>(model: &S, n: usize, rng: &mut Stream) -> Dataset {
    let mut values = Vec::with_capacity(n * model.dim());
    for _ in 0..n {
        model.sample_into(rng, &mut values);
    }
    Dataset::new(model.dim(), values).expect("sampler rows match its dimension")
}

fn check_sigma(name: &'static str, sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{sigma} must be positive and finite")))
    }
}

fn check_finite(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{x} is not finite")))
    }
}

// =============================================================================
// Univariate Gaussian
// =============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateGaussian {
    pub mu: f64,
    pub sigma: f64,
}

impl UnivariateGaussian {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        check_finite("mu", mu)?;
        check_sigma("sigma", sigma)?;
        Ok(Self { mu, sigma })
    }

    pub fn standard() -> Self {
        Self { mu: 0.0, sigma: 1.0 }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf((x - self.mu) / self.sigma)
    }
}

impl Density for UnivariateGaussian {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        normal_log_pdf(x[0], self.mu, self.sigma)
    }
}

impl Sampler for UnivariateGaussian {
    fn dim(&self) -> usize {
        1
    }

    fn sample_into(&self, rng: &mut Stream, out: &mut Vec<f64>) {
        let z: f64 = rng.sample(StandardNormal);
        out.push(self.mu + self.sigma * z);
    }
}

// =============================================================================
// Axis-aligned Gaussian
// =============================================================================

/// Product of independent normals N(mus[j], sigmas[j]²).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisAlignedGaussian {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
}

impl AxisAlignedGaussian {
    pub fn new(mus: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        if mus.is_empty() {
            return Err(invalid("mus", "need at least one coordinate"));
        }
        if mus.len() != sigmas.len() {
            return Err(invalid(
                "sigmas",
                format!("{} scales for {} means", sigmas.len(), mus.len()),
            ));
        }
        for &m in &mus {
            check_finite("mus", m)?;
        }
        for &s in &sigmas {
            check_sigma("sigmas", s)?;
        }
        Ok(Self { mus, sigmas })
    }

    /// Identity covariance centred at `mus`.
    pub fn identity(mus: Vec<f64>) -> Result<Self> {
        let d = mus.len();
        Self::new(mus, vec![1.0; d])
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn dim(&self) -> usize {
        self.mus.len()
    }

    /// Coordinate `j` as a univariate Gaussian.
    pub fn marginal(&self, j: usize) -> UnivariateGaussian {
        UnivariateGaussian {
            mu: self.mus[j],
            sigma: self.sigmas[j],
        }
    }

    fn key(&self) -> impl Iterator<Item = f64> + '_ {
        self.mus.iter().chain(self.sigmas.iter()).copied()
    }
}

impl From<UnivariateGaussian> for AxisAlignedGaussian {
    fn from(g: UnivariateGaussian) -> Self {
        Self {
            mus: vec![g.mu],
            sigmas: vec![g.sigma],
        }
    }
}

impl Density for AxisAlignedGaussian {
    fn dim(&self) -> usize {
        self.mus.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.mus
            .iter()
            .zip(&self.sigmas)
            .zip(x)
            .map(|((&m, &s), &xi)| normal_log_pdf(xi, m, s))
            .sum()
    }
}

impl Sampler for AxisAlignedGaussian {
    fn dim(&self) -> usize {
        self.mus.len()
    }

    fn sample_into(&self, rng: &mut Stream, out: &mut Vec<f64>) {
        for (&m, &s) in self.mus.iter().zip(&self.sigmas) {
            let z: f64 = rng.sample(StandardNormal);
            out.push(m + s * z);
        }
    }
}

// =============================================================================
// Mixtures
// =============================================================================

/// `Σ w_i f_i` over axis-aligned Gaussian components of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureModel {
    weights: Vec<f64>,
    components: Vec<AxisAlignedGaussian>,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, components: Vec<AxisAlignedGaussian>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("components", "need at least one component"));
        }
        if weights.len() != components.len() {
            return Err(invalid(
                "weights",
                format!("{} weights for {} components", weights.len(), components.len()),
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(invalid("weights", "weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(invalid("weights", format!("weights sum to {total}, not 1")));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(invalid("components", "components differ in dimension"));
        }
        Ok(Self { weights, components })
    }

    pub fn single(component: AxisAlignedGaussian) -> Self {
        Self {
            weights: vec![1.0],
            components: vec![component],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[AxisAlignedGaussian] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Same distribution in a canonical representation: zero-weight
    /// components dropped, identical components merged, and the rest
    /// sorted by parameters.
    pub fn canonicalize(&self) -> Self {
        let mut parts: Vec<(f64, AxisAlignedGaussian)> = self
            .weights
            .iter()
            .zip(&self.components)
            .filter(|(&w, _)| w > 0.0)
            .map(|(&w, c)| (w, c.clone()))
            .collect();
        parts.sort_by(|a, b| cmp_keys(a.1.key(), b.1.key()));
        let mut merged: Vec<(f64, AxisAlignedGaussian)> = Vec::with_capacity(parts.len());
        for (w, c) in parts {
            match merged.last_mut() {
                Some(last) if last.1 == c => last.0 += w,
                _ => merged.push((w, c)),
            }
        }
        let (weights, components) = merged.into_iter().unzip();
        Self { weights, components }
    }

    fn pick(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        // rounding left u above the cumulative sum
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

fn cmp_keys(a: impl Iterator<Item = f64>, mut b: impl Iterator<Item = f64>) -> std::cmp::Ordering {
    for x in a {
        match b.next() {
            Some(y) => match x.total_cmp(&y) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            },
            None => return std::cmp::Ordering::Greater,
        }
    }
    if b.next().is_some() {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Equal
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

impl Density for MixtureModel {
    fn dim(&self) -> usize {
        MixtureModel::dim(self)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        log_sum_exp(
            self.weights
                .iter()
                .zip(&self.components)
                .filter(|(&w, _)| w > 0.0)
                .map(|(&w, c)| w.ln() + c.log_density(x)),
        )
    }
}

impl Sampler for MixtureModel {
    fn dim(&self) -> usize {
        MixtureModel::dim(self)
    }

    fn sample_into(&self, rng: &mut Stream, out: &mut Vec<f64>) {
        let i = self.pick(uniform_open(rng));
        self.components[i].sample_into(rng, out);
    }
}

// =============================================================================
// Point mass and corrupted source
// =============================================================================

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub location: Vec<f64>,
}

impl Density for PointMass {
    fn dim(&self) -> usize {
        self.location.len()
    }

    /// Infinite at the atom, `-inf` elsewhere.
    fn log_density(&self, x: &[f64]) -> f64 {
        if x == self.location.as_slice() {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }
}

impl Sampler for PointMass {
    fn dim(&self) -> usize {
        self.location.len()
    }

    fn sample_into(&self, _rng: &mut Stream, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.location);
    }
}

/// `(1 − γ) f + γ h`: draws from the target with probability `1 − γ`, else
/// from the contaminant.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedSource {
    target: Box<Distribution>,
    gamma: f64,
    contaminant: Box<Distribution>,
}

impl CorruptedSource {
    pub fn new(target: Distribution, gamma: f64, contaminant: Distribution) -> Result<Self> {
        check_gamma(gamma)?;
        if target.dim() != contaminant.dim() {
            return Err(invalid("contaminant", "dimension differs from target"));
        }
        Ok(Self {
            target: Box::new(target),
            gamma,
            contaminant: Box::new(contaminant),
        })
    }

    pub fn target(&self) -> &Distribution {
        &self.target
    }

    pub fn contaminant(&self) -> &Distribution {
        &self.contaminant
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// One draw plus whether it came from the contaminant.
    pub fn sample_tagged(&self, rng: &mut Stream, out: &mut Vec<f64>) -> bool {
        let corrupt = uniform_open(rng) < self.gamma;
        if corrupt {
            self.contaminant.sample_into(rng, out);
        } else {
            self.target.sample_into(rng, out);
        }
        corrupt
    }
}

impl Density for CorruptedSource {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        if self.gamma == 0.0 {
            return self.target.log_density(x);
        }
        log_sum_exp(
            [
                (1.0 - self.gamma).ln() + self.target.log_density(x),
                self.gamma.ln() + self.contaminant.log_density(x),
            ]
            .into_iter(),
        )
    }
}

impl Sampler for CorruptedSource {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn sample_into(&self, rng: &mut Stream, out: &mut Vec<f64>) {
        self.sample_tagged(rng, out);
    }
}

// =============================================================================
// Any model
// =============================================================================

/// Every model the library can sample from or evaluate.
///
/// Serializes as a JSON object tagged by `"type"`:
/// `gaussian {mus, sigmas}`, `mixture {weights, mus, sigmas}` (one row of
/// `mus`/`sigmas` per component), `point_mass {location}` and
/// `corrupted {gamma, target, contaminant}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelSpec", try_from = "ModelSpec")]
pub enum Distribution {
    Gaussian(AxisAlignedGaussian),
    Mixture(MixtureModel),
    PointMass(PointMass),
    Corrupted(CorruptedSource),
}

impl Distribution {
    pub fn univariate(mu: f64, sigma: f64) -> Result<Self> {
        Ok(Self::Gaussian(UnivariateGaussian::new(mu, sigma)?.into()))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(g) => g.dim(),
            Self::Mixture(m) => m.dim(),
            Self::PointMass(p) => p.location.len(),
            Self::Corrupted(c) => Density::dim(c),
        }
    }

    /// Flattened `(weight, component)` pairs when the model is a finite
    /// Gaussian mixture (possibly nested); `None` if it has an atom.
    pub fn gaussian_components(&self) -> Option<Vec<(f64, &AxisAlignedGaussian)>> {
        match self {
            Self::Gaussian(g) => Some(vec![(1.0, g)]),
            Self::Mixture(m) => Some(
                m.weights
                    .iter()
                    .zip(&m.components)
                    .filter(|(&w, _)| w > 0.0)
                    .map(|(&w, c)| (w, c))
                    .collect(),
            ),
            Self::PointMass(_) => None,
            Self::Corrupted(c) => {
                let mut parts: Vec<(f64, &AxisAlignedGaussian)> = c
                    .target
                    .gaussian_components()?
                    .into_iter()
                    .map(|(w, g)| (w * (1.0 - c.gamma), g))
                    .collect();
                if c.gamma > 0.0 {
                    parts.extend(
                        c.contaminant
                            .gaussian_components()?
                            .into_iter()
                            .map(|(w, g)| (w * c.gamma, g)),
                    );
                }
                Some(parts)
            }
        }
    }

    /// The single Gaussian this model equals, if it is one.
    pub fn as_single_gaussian(&self) -> Option<&AxisAlignedGaussian> {
        let parts = self.gaussian_components()?;
        let first = parts.first()?.1;
        parts.iter().all(|(_, g)| *g == first).then_some(first)
    }

    /// Exact parameter vector used for ordering and deduplication.
    pub fn canonical_key(&self) -> Vec<f64> {
        let mut key = Vec::new();
        self.push_key(&mut key);
        key
    }

    fn push_key(&self, key: &mut Vec<f64>) {
        match self {
            Self::Gaussian(g) => {
                key.push(0.0);
                key.extend(g.key());
            }
            Self::Mixture(m) => {
                let m = m.canonicalize();
                key.push(1.0);
                key.push(m.k() as f64);
                for (w, c) in m.weights.iter().zip(&m.components) {
                    key.push(*w);
                    key.extend(c.key());
                }
            }
            Self::PointMass(p) => {
                key.push(2.0);
                key.extend(&p.location);
            }
            Self::Corrupted(c) => {
                key.push(3.0);
                key.push(c.gamma);
                c.target.push_key(key);
                c.contaminant.push_key(key);
            }
        }
    }

    /// Total order over canonical keys.
    pub fn canonical_cmp(&self, other: &Self) -> std::cmp::Ordering {
        cmp_keys(self.canonical_key().into_iter(), other.canonical_key().into_iter())
    }
}

impl From<AxisAlignedGaussian> for Distribution {
    fn from(g: AxisAlignedGaussian) -> Self {
        Self::Gaussian(g)
    }
}

impl From<UnivariateGaussian> for Distribution {
    fn from(g: UnivariateGaussian) -> Self {
        Self::Gaussian(g.into())
    }
}

impl From<MixtureModel> for Distribution {
    fn from(m: MixtureModel) -> Self {
        Self::Mixture(m)
    }
}

impl From<PointMass> for Distribution {
    fn from(p: PointMass) -> Self {
        Self::PointMass(p)
    }
}

impl From<CorruptedSource> for Distribution {
    fn from(c: CorruptedSource) -> Self {
        Self::Corrupted(c)
    }
}

impl Density for Distribution {
    fn dim(&self) -> usize {
        Distribution::dim(self)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian(g) => g.log_density(x),
            Self::Mixture(m) => m.log_density(x),
            Self::PointMass(p) => p.log_density(x),
            Self::Corrupted(c) => c.log_density(x),
        }
    }
}

impl Sampler for Distribution {
    fn dim(&self) -> usize {
        Distribution::dim(self)
    }

    fn sample_into(&self, rng: &mut Stream, out: &mut Vec<f64>) {
        match self {
            Self::Gaussian(g) => g.sample_into(rng, out),
            Self::Mixture(m) => m.sample_into(rng, out),
            Self::PointMass(p) => p.sample_into(rng, out),
            Self::Corrupted(c) => c.sample_into(rng, out),
        }
    }
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ModelSpec {
    Gaussian {
        mus: Vec<f64>,
        sigmas: Vec<f64>,
    },
    Mixture {
        weights: Vec<f64>,
        mus: Vec<Vec<f64>>,
        sigmas: Vec<Vec<f64>>,
    },
    PointMass {
        location: Vec<f64>,
    },
    Corrupted {
        gamma: f64,
        target: Box<Distribution>,
        contaminant: Box<Distribution>,
    },
}

impl From<Distribution> for ModelSpec {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Gaussian(g) => ModelSpec::Gaussian {
                mus: g.mus,
                sigmas: g.sigmas,
            },
            Distribution::Mixture(m) => ModelSpec::Mixture {
                weights: m.weights,
                mus: m.components.iter().map(|c| c.mus.clone()).collect(),
                sigmas: m.components.iter().map(|c| c.sigmas.clone()).collect(),
            },
            Distribution::PointMass(p) => ModelSpec::PointMass { location: p.location },
            Distribution::Corrupted(c) => ModelSpec::Corrupted {
                gamma: c.gamma,
                target: c.target,
                contaminant: c.contaminant,
            },
        }
    }
}

impl TryFrom<ModelSpec> for Distribution {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        Ok(match spec {
            ModelSpec::Gaussian { mus, sigmas } => AxisAlignedGaussian::new(mus, sigmas)?.into(),
            ModelSpec::Mixture { weights, mus, sigmas } => {
                if mus.len() != sigmas.len() {
                    return Err(invalid(
                        "sigmas",
                        format!("{} scale rows for {} mean rows", sigmas.len(), mus.len()),
                    ));
                }
                let components = mus
                    .into_iter()
                    .zip(sigmas)
                    .map(|(m, s)| AxisAlignedGaussian::new(m, s))
                    .collect::<Result<Vec<_>>>()?;
                MixtureModel::new(weights, components)?.into()
            }
            ModelSpec::PointMass { location } => {
                if location.is_empty() || location.iter().any(|x| !x.is_finite()) {
                    return Err(invalid("location", "must be a non-empty finite vector"));
                }
                PointMass { location }.into()
            }
            ModelSpec::Corrupted {
                gamma,
                target,
                contaminant,
            } => CorruptedSource::new(*target, gamma, *contaminant)?.into(),
        })
    }
}

/// Log-density that must be finite or `-inf`; anything else is a numeric
/// error.
pub(crate) fn checked_log_density<D: Density + ?Sized>(model: &D, x: &[f64]) -> Result<f64> {
    let lp = model.log_density(x);
    if lp.is_nan() || lp == f64::INFINITY {
        Err(Error::Numeric(format!("density is not finite at {x:?}")))
    } else {
        Ok(lp)
    }
}
