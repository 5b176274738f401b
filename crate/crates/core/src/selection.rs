//! Private hypothesis selection: a Scheffé tournament over a finite set of
//! candidate models, released through the exponential mechanism.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::distributions::{scheffe_region, Density, Distribution, EmpiricalView, ScheffeRegion};
use crate::error::{check_open, invalid, Error, Result};
use crate::privacy::PrivacyBudget;
use crate::rng::{uniform_open, Splitter, Stream};

/// Largest candidates × rows product for which log-densities are cached.
const DENSITY_CACHE_LIMIT: usize = 1 << 24;

/// Candidate models sorted by parameters, exact duplicates removed.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    candidates: Vec<Distribution>,
}

impl HypothesisSet {
    pub fn new(mut candidates: Vec<Distribution>) -> Result<Self> {
        let Some(first) = candidates.first() else {
            return Err(Error::InvalidInput("hypothesis set is empty".into()));
        };
        let dim = first.dim();
        if let Some(bad) = candidates.iter().find(|c| c.dim() != dim) {
            return Err(Error::InvalidInput(format!(
                "candidates mix dimensions {dim} and {}",
                bad.dim()
            )));
        }
        candidates.sort_by(Distribution::canonical_cmp);
        candidates.dedup_by(|a, b| a.canonical_key() == b.canonical_key());
        Ok(Self { candidates })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.candidates[0].dim()
    }

    pub fn candidates(&self) -> &[Distribution] {
        &self.candidates
    }

    pub fn get(&self, i: usize) -> &Distribution {
        &self.candidates[i]
    }

    pub fn into_candidates(self) -> Vec<Distribution> {
        self.candidates
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContestOutcome {
    IWins,
    JWins,
    Draw,
}

impl ContestOutcome {
    fn symbol(self) -> &'static str {
        match self {
            Self::IWins => "W",
            Self::JWins => "L",
            Self::Draw => "D",
        }
    }
}

/// Monte Carlo draws needed so a region mass has standard error at most
/// `α/16`.
pub fn min_contest_effort(alpha: f64) -> usize {
    (64.0 / (alpha * alpha)).ceil() as usize
}

fn check_data(data: &Dataset, dim: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidInput("selection needs data".into()));
    }
    if data.dim() != dim {
        return Err(Error::InvalidInput(format!(
            "data has {} columns but candidates have {dim}",
            data.dim()
        )));
    }
    Ok(())
}

fn resolved_mass(region: &ScheffeRegion<'_>, model: &Distribution, alpha: f64, effort: usize, rng: &mut Stream) -> Result<f64> {
    let bound = alpha / 16.0;
    let monte_carlo = match region {
        ScheffeRegion::Empty => false,
        ScheffeRegion::General { .. } => true,
        _ => model.gaussian_components().is_none(),
    };
    if monte_carlo {
        let std_error = 0.5 / (effort.max(1) as f64).sqrt();
        if std_error > bound {
            return Err(Error::Resolution { std_error, bound });
        }
    }
    Ok(region.mass(model, effort, rng)?.value)
}

/// Scheffé contest on `A = {f_i > f_j}`: the model whose mass on `A` is
/// closer to the empirical mass wins when it is closer by more than `α/4`.
pub fn pairwise_contest(
    fi: &Distribution,
    fj: &Distribution,
    data: &Dataset,
    alpha: f64,
    effort: usize,
    rng: &mut Stream,
) -> Result<ContestOutcome> {
    check_open("alpha", alpha, 0.0, 1.0 + f64::EPSILON)?;
    check_data(data, fi.dim())?;
    if fj.dim() != fi.dim() {
        return Err(Error::InvalidInput("contestants differ in dimension".into()));
    }
    let region = scheffe_region(fi, fj);
    let empirical = EmpiricalView::new(data).fraction(&region);
    let mass_i = resolved_mass(&region, fi, alpha, effort, rng)?;
    let mass_j = resolved_mass(&region, fj, alpha, effort, rng)?;
    Ok(judge(mass_i, mass_j, empirical, alpha / 4.0))
}

fn judge(mass_i: f64, mass_j: f64, empirical: f64, margin: f64) -> ContestOutcome {
    let (di, dj) = ((mass_i - empirical).abs(), (mass_j - empirical).abs());
    if di + margin < dj {
        ContestOutcome::IWins
    } else if dj + margin < di {
        ContestOutcome::JWins
    } else {
        ContestOutcome::Draw
    }
}

/// Per-candidate quantities the tournament is decided on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TournamentScores {
    /// `max_j |f_i(A_ij) − τ(A_ij)|`, where `τ` is the empirical measure.
    pub distances: Vec<f64>,
    /// Utility `−n · distance`; one changed row moves it by at most 1.
    pub utilities: Vec<f64>,
}

struct Tournament<'a> {
    hypotheses: &'a HypothesisSet,
    data: &'a Dataset,
    view: EmpiricalView<'a>,
    cache: Option<Vec<Vec<f64>>>,
    alpha: f64,
    effort: usize,
}

impl<'a> Tournament<'a> {
    fn new(hypotheses: &'a HypothesisSet, data: &'a Dataset, alpha: f64, effort: usize) -> Result<Self> {
        check_open("alpha", alpha, 0.0, 1.0 + f64::EPSILON)?;
        check_data(data, hypotheses.dim())?;
        let needs_densities = hypotheses.dim() > 1 || hypotheses.candidates.iter().any(|c| c.as_single_gaussian().is_none());
        let cache = (needs_densities && hypotheses.len() * data.len() <= DENSITY_CACHE_LIMIT).then(|| {
            hypotheses
                .candidates
                .par_iter()
                .map(|c| data.rows().map(|x| c.log_density(x)).collect())
                .collect()
        });
        Ok(Self {
            hypotheses,
            data,
            view: EmpiricalView::new(data),
            cache,
            alpha,
            effort,
        })
    }

    fn empirical(&self, i: usize, j: usize, region: &ScheffeRegion<'_>) -> f64 {
        match (region, &self.cache) {
            (ScheffeRegion::General { .. }, Some(cache)) => {
                let (a, b) = (&cache[i], &cache[j]);
                a.iter().zip(b).filter(|(x, y)| x > y).count() as f64 / self.data.len() as f64
            }
            _ => self.view.fraction(region),
        }
    }

    fn mass(&self, region: &ScheffeRegion<'_>, model: usize, stream: u64, splitter: &Splitter) -> Result<f64> {
        let mut rng = splitter.stream(stream);
        resolved_mass(region, self.hypotheses.get(model), self.alpha, self.effort, &mut rng)
    }

    fn pair_stream(&self, i: usize, j: usize) -> u64 {
        (i * self.hypotheses.len() + j) as u64
    }

    fn scores(&self, rng: &mut Stream) -> Result<TournamentScores> {
        let m = self.hypotheses.len();
        let splitter = Splitter::new(rng);
        let distances = (0..m)
            .into_par_iter()
            .map(|i| {
                let fi = self.hypotheses.get(i);
                let mut worst = 0.0f64;
                for j in (0..m).filter(|&j| j != i) {
                    let region = scheffe_region(fi, self.hypotheses.get(j));
                    let mass = self.mass(&region, i, self.pair_stream(i, j), &splitter)?;
                    worst = worst.max((mass - self.empirical(i, j, &region)).abs());
                }
                Ok(worst)
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = self.data.len() as f64;
        Ok(TournamentScores {
            utilities: distances.iter().map(|d| -n * d).collect(),
            distances,
        })
    }

    fn matrix(&self, rng: &mut Stream) -> Result<Vec<Vec<ContestOutcome>>> {
        let m = self.hypotheses.len();
        let splitter = Splitter::new(rng);
        (0..m)
            .into_par_iter()
            .map(|i| {
                (0..m)
                    .map(|j| {
                        if i == j {
                            return Ok(ContestOutcome::Draw);
                        }
                        let region = scheffe_region(self.hypotheses.get(i), self.hypotheses.get(j));
                        let mass_i = self.mass(&region, i, self.pair_stream(i, j), &splitter)?;
                        let mass_j = self.mass(&region, j, self.pair_stream(j, i) + (m * m) as u64, &splitter)?;
                        Ok(judge(mass_i, mass_j, self.empirical(i, j, &region), self.alpha / 4.0))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Tournament scores for every candidate. Masses the closed forms cannot
/// give are estimated with `effort` draws per pair.
pub fn tournament_scores(
    hypotheses: &HypothesisSet,
    data: &Dataset,
    alpha: f64,
    effort: usize,
    rng: &mut Stream,
) -> Result<TournamentScores> {
    Tournament::new(hypotheses, data, alpha, effort)?.scores(rng)
}

/// Outcome of every ordered contest; entry `(i, j)` is from `i`'s side.
pub fn contest_matrix(
    hypotheses: &HypothesisSet,
    data: &Dataset,
    alpha: f64,
    effort: usize,
    rng: &mut Stream,
) -> Result<Vec<Vec<ContestOutcome>>> {
    Tournament::new(hypotheses, data, alpha, effort)?.matrix(rng)
}

/// Writes the matrix as CSV rows of `W`, `L` and `D`.
pub fn write_contest_matrix<W: Write>(matrix: &[Vec<ContestOutcome>], mut out: W) -> Result<()> {
    for row in matrix {
        let line: Vec<&str> = row.iter().map(|o| o.symbol()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// A selected candidate with its tournament standing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub index: usize,
    pub model: Distribution,
    pub utility: f64,
    pub distance: f64,
    /// Privacy spent by the draw; zero for the non-private variant.
    pub spent: PrivacyBudget,
}

/// Draws an index with probability proportional to `exp(scale · u_i)`,
/// computed in log space.
pub fn exponential_mechanism(utilities: &[f64], scale: f64, rng: &mut Stream) -> Result<usize> {
    if utilities.is_empty() {
        return Err(Error::InvalidInput("exponential mechanism over no candidates".into()));
    }
    if utilities.iter().any(|u| !u.is_finite()) {
        return Err(Error::Numeric("non-finite utility".into()));
    }
    let top = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = utilities.iter().map(|u| (scale * (u - top)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let target = uniform_open(rng) * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return Ok(i);
        }
    }
    Ok(weights.iter().rposition(|&w| w > 0.0).expect("the top utility has weight one"))
}

/// Private selection at the full `budget.epsilon`: the tournament utility
/// has sensitivity 1 and the exponential mechanism runs at `ε/2`, so the
/// draw is `(ε/2, 0)`-DP. With probability `1 − β/2` the selection is
/// within `3·OPT + α/2` of the target once `n` is of order
/// `log(M/β)(1/α² + 1/(αε))`.
pub fn phs_select(
    budget: &PrivacyBudget,
    alpha: f64,
    beta: f64,
    hypotheses: &HypothesisSet,
    data: &Dataset,
    effort: usize,
    rng: &mut Stream,
) -> Result<Selection> {
    check_open("beta", beta, 0.0, 1.0)?;
    let spent = PrivacyBudget::new(budget.epsilon / 2.0, 0.0)?;
    let splitter = Splitter::new(rng);
    let scores = tournament_scores(hypotheses, data, alpha, effort, &mut splitter.stream(0))?;
    // sensitivity-1 utility at privacy ε/2: weight exp((ε/2) u / 2)
    let index = exponential_mechanism(&scores.utilities, spent.epsilon / 2.0, &mut splitter.stream(1))?;
    Ok(selection(hypotheses, &scores, index, spent))
}

/// Minimum-distance selection without noise; ties broken uniformly.
pub fn select_non_private(
    alpha: f64,
    hypotheses: &HypothesisSet,
    data: &Dataset,
    effort: usize,
    rng: &mut Stream,
) -> Result<Selection> {
    let splitter = Splitter::new(rng);
    let scores = tournament_scores(hypotheses, data, alpha, effort, &mut splitter.stream(0))?;
    let best = scores.utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..scores.utilities.len()).filter(|&i| scores.utilities[i] == best).collect();
    let pick = ((uniform_open(&mut splitter.stream(1)) * ties.len() as f64) as usize).min(ties.len() - 1);
    Ok(selection(hypotheses, &scores, ties[pick], PrivacyBudget { epsilon: 0.0, delta: 0.0 }))
}

fn selection(hypotheses: &HypothesisSet, scores: &TournamentScores, index: usize, spent: PrivacyBudget) -> Selection {
    Selection {
        index,
        model: hypotheses.get(index).clone(),
        utility: scores.utilities[index],
        distance: scores.distances[index],
        spent,
    }
}

/// Checks the contest margin can be resolved at `effort` draws.
pub fn check_effort(alpha: f64, effort: usize) -> Result<()> {
    if effort < min_contest_effort(alpha) {
        return Err(invalid(
            "effort",
            format!("{effort} draws cannot resolve margin {alpha}/16; need {}", min_contest_effort(alpha)),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample, AxisAlignedGaussian, MixtureModel};
    use crate::rng::stream;

    fn g(mu: f64, sigma: f64) -> Distribution {
        Distribution::univariate(mu, sigma).unwrap()
    }

    fn budget() -> PrivacyBudget {
        PrivacyBudget::new(1.0, 0.0).unwrap()
    }

    #[test]
    fn set_sorts_and_dedups() {
        let set = HypothesisSet::new(vec![g(1.0, 1.0), g(0.0, 1.0), g(1.0, 1.0)]).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.get(0), &g(0.0, 1.0));
        assert!(HypothesisSet::new(vec![]).is_err());
        let two: Distribution = AxisAlignedGaussian::identity(vec![0.0, 0.0]).unwrap().into();
        assert!(HypothesisSet::new(vec![g(0.0, 1.0), two]).is_err());
    }

    #[test]
    fn identical_contestants_draw() {
        let data = Dataset::univariate(vec![0.0, 1.0]);
        let out = pairwise_contest(&g(0.0, 1.0), &g(0.0, 1.0), &data, 0.5, 1000, &mut stream(0)).unwrap();
        assert_eq!(out, ContestOutcome::Draw);
    }

    #[test]
    fn clear_contest_is_won() {
        let (fi, fj) = (g(0.0, 1.0), g(10.0, 1.0));
        let wins = (0..100)
            .filter(|&s| {
                let data = sample(&fi, 10_000, &mut stream(s));
                pairwise_contest(&fi, &fj, &data, 0.25, 1000, &mut stream(s)).unwrap() == ContestOutcome::IWins
            })
            .count();
        assert!(wins >= 99);
        let data = sample(&fi, 1000, &mut stream(1));
        assert_eq!(
            pairwise_contest(&fj, &fi, &data, 0.25, 1000, &mut stream(0)).unwrap(),
            ContestOutcome::JWins
        );
    }

    #[test]
    fn coarse_monte_carlo_is_rejected() {
        let comps = vec![
            AxisAlignedGaussian::new(vec![0.0], vec![1.0]).unwrap(),
            AxisAlignedGaussian::new(vec![3.0], vec![1.0]).unwrap(),
        ];
        let mix: Distribution = MixtureModel::new(vec![0.5, 0.5], comps).unwrap().into();
        let data = sample(&mix, 100, &mut stream(0));
        let err = pairwise_contest(&mix, &g(0.0, 1.0), &data, 0.1, 1000, &mut stream(0)).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
        assert!(pairwise_contest(&mix, &g(0.0, 1.0), &data, 0.1, min_contest_effort(0.1), &mut stream(0)).is_ok());
    }

    #[test]
    fn sole_candidate_is_returned() {
        let set = HypothesisSet::new(vec![g(4.0, 2.0)]).unwrap();
        let data = Dataset::univariate(vec![0.0; 10]);
        let s = phs_select(&budget(), 0.2, 0.1, &set, &data, 1000, &mut stream(0)).unwrap();
        assert_eq!(s.model, g(4.0, 2.0));
        assert_eq!(s.spent.epsilon, 0.5);
    }

    #[test]
    fn two_candidate_selection() {
        let set = HypothesisSet::new(vec![g(0.0, 1.0), g(10.0, 1.0)]).unwrap();
        let hits = (0..100)
            .filter(|&s| {
                let data = sample(&g(0.0, 1.0), 5000, &mut stream(1000 + s));
                let pick = phs_select(&budget(), 0.2, 0.1, &set, &data, 1000, &mut stream(s)).unwrap();
                pick.model == g(0.0, 1.0)
            })
            .count();
        assert!(hits >= 99);
    }

    #[test]
    fn mechanism_prefers_higher_utility() {
        let mut rng = stream(4);
        let draws = 20_000;
        let ones = (0..draws)
            .filter(|_| exponential_mechanism(&[0.0, -2.0], 1.0, &mut rng).unwrap() == 1)
            .count() as f64;
        let expect = draws as f64 * (-2f64).exp() / (1.0 + (-2f64).exp());
        assert!((ones - expect).abs() < 5.0 * expect.sqrt());
        assert!(exponential_mechanism(&[], 1.0, &mut rng).is_err());
        assert!(exponential_mechanism(&[f64::NAN], 1.0, &mut rng).is_err());
    }

    #[test]
    fn selection_ignores_input_order() {
        let models = vec![g(0.0, 1.0), g(0.3, 1.2), g(-0.4, 0.8), g(2.0, 1.0)];
        let data = sample(&g(0.1, 1.0), 400, &mut stream(2));
        let mut reversed = models.clone();
        reversed.reverse();
        let a = phs_select(&budget(), 0.2, 0.1, &HypothesisSet::new(models).unwrap(), &data, 1000, &mut stream(9));
        let b = phs_select(&budget(), 0.2, 0.1, &HypothesisSet::new(reversed).unwrap(), &data, 1000, &mut stream(9));
        assert_eq!(a.unwrap().model, b.unwrap().model);
    }

    #[test]
    fn matrix_is_antisymmetric() {
        let set = HypothesisSet::new(vec![g(0.0, 1.0), g(5.0, 1.0), g(0.1, 1.0)]).unwrap();
        let data = sample(&g(0.0, 1.0), 2000, &mut stream(3));
        let m = contest_matrix(&set, &data, 0.2, 1000, &mut stream(0)).unwrap();
        for i in 0..3 {
            assert_eq!(m[i][i], ContestOutcome::Draw);
            for j in 0..3 {
                let flipped = match m[j][i] {
                    ContestOutcome::IWins => ContestOutcome::JWins,
                    ContestOutcome::JWins => ContestOutcome::IWins,
                    ContestOutcome::Draw => ContestOutcome::Draw,
                };
                assert_eq!(m[i][j], flipped);
            }
        }
        let mut buf = Vec::new();
        write_contest_matrix(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.split(',').count() == 3));
    }

    #[test]
    fn non_private_picks_minimum_distance() {
        let set = HypothesisSet::new(vec![g(0.0, 1.0), g(1.5, 1.0), g(0.0, 3.0)]).unwrap();
        let data = sample(&g(0.0, 1.0), 5000, &mut stream(6));
        let s = select_non_private(0.2, &set, &data, 1000, &mut stream(0)).unwrap();
        assert_eq!(s.model, g(0.0, 1.0));
        assert_eq!(s.spent.epsilon, 0.0);
    }
}
