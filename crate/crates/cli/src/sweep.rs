//! Seeded success-rate sweeps over `n` and one other parameter.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use dpmix::decoders::{
    identity_covariance_list_decoder, univariate_gaussian_decoder, univariate_mean_decoder, univariate_variance_decoder,
    ListParams,
};
use dpmix::distributions::{
    evaluate_tv, sample, std_normal_cdf, tv_univariate_gaussians, AxisAlignedGaussian, CorruptedSource, Distribution,
    MixtureModel, UnivariateGaussian,
};
use dpmix::learner::learn_mixture;
use dpmix::rng::{task_stream, Stream};
use dpmix::PrivacyBudget;

use crate::commands::{family, learner_config, load_model};
use crate::error::CliError;
use crate::output::{check_writable, emit, to_json};
use crate::settings::{Format, Settings, SweepParam, SweepTask};

/// Fixed CSV header.
pub const SWEEP_HEADER: &str = "n,param_name,param_value,trials,successes,success_rate,mean_tv,mean_runtime_s";

/// Offset of the default contaminant from the inlier mean, in inlier scales.
const CONTAMINANT_OFFSET: f64 = 55.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub param_name: &'static str,
    pub param_value: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Failed or crashed trials count as TV 1.
    pub mean_tv: f64,
    pub mean_runtime_s: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub task: SweepTask,
    pub param_name: &'static str,
    pub seed: u64,
    pub header: &'static str,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy)]
struct TrialResult {
    success: bool,
    tv: f64,
    runtime_s: f64,
}

impl TrialResult {
    fn failure(runtime_s: f64) -> Self {
        Self {
            success: false,
            tv: 1.0,
            runtime_s,
        }
    }
}

/// One grid point's settings, with the swept parameter applied.
fn with_param(base: &Settings, param: SweepParam, value: f64) -> Settings {
    let mut s = base.clone();
    match param {
        SweepParam::Epsilon => s.epsilon = Some(value),
        SweepParam::Delta => s.delta = Some(value),
        SweepParam::Alpha => s.alpha = Some(value),
        SweepParam::Beta => s.beta = Some(value),
        SweepParam::Gamma => s.gamma = Some(value),
    }
    s
}

fn current_value(s: &Settings, param: SweepParam) -> f64 {
    match param {
        SweepParam::Epsilon => s.epsilon(),
        SweepParam::Delta => s.delta(),
        SweepParam::Alpha => s.alpha(),
        SweepParam::Beta => s.beta(),
        SweepParam::Gamma => s.gamma(),
    }
}

/// Data source and the distribution success is measured against.
struct Experiment {
    source: Distribution,
    target: Distribution,
}

fn default_experiment(s: &Settings, task: SweepTask) -> Result<Experiment, CliError> {
    let gamma = s.gamma();
    let corrupt = |target: Distribution, contaminant: Distribution| -> Result<Experiment, CliError> {
        Ok(Experiment {
            source: CorruptedSource::new(target.clone(), gamma, contaminant)?.into(),
            target,
        })
    };
    match task {
        SweepTask::MeanDecoder | SweepTask::VarianceDecoder | SweepTask::GaussianDecoder => corrupt(
            Distribution::univariate(5.0, 1.0)?,
            Distribution::univariate(5.0 - CONTAMINANT_OFFSET, 1.0)?,
        ),
        SweepTask::IdentityDecoder => {
            let mus: Vec<f64> = (0..s.d()).map(|j| if j % 2 == 0 { 3.0 } else { -3.0 }).collect();
            let far: Vec<f64> = mus.iter().map(|m| m - CONTAMINANT_OFFSET).collect();
            corrupt(AxisAlignedGaussian::identity(mus)?.into(), AxisAlignedGaussian::identity(far)?.into())
        }
        SweepTask::Learner => {
            let k = s.k();
            let components = (0..k)
                .map(|i| {
                    let mu = if k == 1 { 0.0 } else { -10.0 + 20.0 * i as f64 / (k - 1) as f64 };
                    AxisAlignedGaussian::new(vec![mu], vec![1.0])
                })
                .collect::<Result<Vec<_>, _>>()?;
            let g: Distribution = MixtureModel::new(vec![1.0 / k as f64; k], components)?.into();
            Ok(Experiment {
                source: g.clone(),
                target: g,
            })
        }
    }
}

fn experiment(s: &Settings, task: SweepTask) -> Result<Experiment, CliError> {
    let Some(source) = &s.model else {
        return default_experiment(s, task);
    };
    let source = load_model(source)?;
    let target = match &source {
        Distribution::Corrupted(c) => c.target().clone(),
        other => other.clone(),
    };
    let decoder = !matches!(task, SweepTask::Learner);
    if decoder && target.as_single_gaussian().is_none() {
        return Err(CliError::input("decoder sweeps need a Gaussian (or corrupted Gaussian) model"));
    }
    if matches!(task, SweepTask::MeanDecoder | SweepTask::VarianceDecoder | SweepTask::GaussianDecoder) && target.dim() != 1 {
        return Err(CliError::input("univariate decoder sweeps need a one-dimensional model"));
    }
    Ok(Experiment { source, target })
}

fn univariate(target: &Distribution) -> UnivariateGaussian {
    target.as_single_gaussian().expect("checked when the experiment was built").marginal(0)
}

fn closest_tv(target: &UnivariateGaussian, candidates: impl Iterator<Item = (f64, f64)>) -> f64 {
    candidates
        .filter_map(|(mu, sigma)| UnivariateGaussian::new(mu, sigma).ok())
        .map(|c| tv_univariate_gaussians(target, &c))
        .fold(1.0, f64::min)
}

fn run_trial(task: SweepTask, s: &Settings, exp: &Experiment, n: usize, rng: &mut Stream) -> Result<(bool, f64), CliError> {
    let budget = PrivacyBudget::new(s.epsilon(), s.delta())?;
    let (alpha, beta, gamma) = (s.alpha(), s.beta(), s.gamma());
    let data = sample(&exp.source, n, rng);
    Ok(match task {
        SweepTask::MeanDecoder => {
            let g = univariate(&exp.target);
            let out = univariate_mean_decoder(beta, gamma, &budget, 1.5 * g.sigma, data.values(), rng)?;
            let hit = out.values.iter().any(|m| (m - g.mu).abs() <= g.sigma);
            (hit, closest_tv(&g, out.values.iter().map(|&m| (m, g.sigma))))
        }
        SweepTask::VarianceDecoder => {
            let g = univariate(&exp.target);
            let even = data.values().len() & !1;
            let out = univariate_variance_decoder(beta, gamma, &budget, &data.values()[..even], rng)?;
            let hit = out.values.iter().any(|&v| g.sigma <= v && v < 2.0 * g.sigma);
            (hit, closest_tv(&g, out.values.iter().map(|&v| (g.mu, v))))
        }
        SweepTask::GaussianDecoder => {
            let g = univariate(&exp.target);
            let params = ListParams::new(alpha, beta, gamma, budget)?
                .with_sample_constant(s.constant_c())?
                .allow_undersampled(true);
            let out = univariate_gaussian_decoder(&params, data.values(), rng)?;
            let hit = out.means.iter().any(|m| (m - g.mu).abs() <= alpha * g.sigma)
                && out.scales.iter().any(|v| (v - g.sigma).abs() <= alpha * g.sigma);
            let pairs = out.means.iter().flat_map(|&m| out.scales.iter().map(move |&v| (m, v)));
            (hit, closest_tv(&g, pairs))
        }
        SweepTask::IdentityDecoder => {
            let target = exp.target.as_single_gaussian().expect("checked when the experiment was built");
            let params = ListParams::new(alpha, beta, gamma, budget)?
                .with_sample_constant(s.constant_c())?
                .allow_undersampled(true);
            let list = identity_covariance_list_decoder(&params, &data, rng)?;
            if list.failed {
                return Ok((false, 1.0));
            }
            // identity Gaussians at distance r are 2Φ(r/2) − 1 apart
            let dist2: f64 = list
                .coordinates
                .iter()
                .zip(target.mus())
                .map(|(c, m)| c.means.iter().map(|x| (x - m).powi(2)).fold(f64::INFINITY, f64::min))
                .sum();
            let tv = 2.0 * std_normal_cdf(dist2.sqrt() / 2.0) - 1.0;
            (tv <= alpha, tv)
        }
        SweepTask::Learner => {
            let mut config = learner_config(s)?;
            config.allow_undersampled = true;
            config.seed = rand_seed(rng);
            let out = learn_mixture(&config, &family(s)?, &data)?;
            let model: Distribution = out.model.into();
            let tv = evaluate_tv(&exp.target, &model, s.effort.unwrap_or(10_000), rng)?.estimate;
            (tv <= alpha, tv)
        }
    })
}

fn rand_seed(rng: &mut Stream) -> u64 {
    use rand::RngCore;
    rng.next_u64()
}

fn trial(task: SweepTask, s: &Settings, exp: &Experiment, n: usize, rng: &mut Stream) -> TrialResult {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| run_trial(task, s, exp, n, rng)));
    let runtime_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(Ok((success, tv))) => TrialResult { success, tv, runtime_s },
        _ => TrialResult::failure(runtime_s),
    }
}

/// Runs every `(n, value)` grid point for `trials` trials in parallel.
/// Trial `t` of point `p` draws from its own stream, so results do not
/// depend on scheduling.
pub fn run_sweep(s: &Settings) -> Result<SweepSummary, CliError> {
    let task = s.task.unwrap_or(SweepTask::MeanDecoder);
    let param = s.param.unwrap_or(SweepParam::Epsilon);
    let mut ns = s.n.clone().unwrap_or_else(|| vec![1000]);
    let mut values = s.values.clone().unwrap_or_else(|| vec![current_value(s, param)]);
    let trials = s.trials();
    if ns.is_empty() || values.is_empty() {
        return Err(CliError::input("the sweep grid is empty"));
    }
    if trials == 0 {
        return Err(CliError::input("--trials must be at least 1"));
    }
    if ns.contains(&0) {
        return Err(CliError::input("every n must be at least 1"));
    }
    ns.sort_unstable();
    ns.dedup();
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut points = Vec::new();
    for &n in &ns {
        for &v in &values {
            let settings = with_param(s, param, v);
            // bad parameter values are an input error, not a failed trial
            PrivacyBudget::new(settings.epsilon(), settings.delta())?.check_top_level()?;
            ListParams::new(settings.alpha(), settings.beta(), settings.gamma(), PrivacyBudget::new(settings.epsilon(), settings.delta())?)?;
            let exp = experiment(&settings, task)?;
            points.push((n, v, settings, exp));
        }
    }

    let seed = s.seed();
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..trials).map(move |t| (p, t))).collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let (n, _, settings, exp) = &points[p];
            let mut rng = task_stream(seed, ((p as u64) << 32) | t as u64);
            trial(task, settings, exp, *n, &mut rng)
        })
        .collect();

    let rows = points
        .iter()
        .enumerate()
        .map(|(p, (n, v, _, _))| {
            let chunk = &results[p * trials..(p + 1) * trials];
            let successes = chunk.iter().filter(|r| r.success).count();
            let t = trials as f64;
            SweepRow {
                n: *n,
                param_name: param.name(),
                param_value: *v,
                trials,
                successes,
                success_rate: successes as f64 / t,
                mean_tv: chunk.iter().map(|r| r.tv).sum::<f64>() / t,
                mean_runtime_s: chunk.iter().map(|r| r.runtime_s).sum::<f64>() / t,
            }
        })
        .collect();
    Ok(SweepSummary {
        task,
        param_name: param.name(),
        seed,
        header: SWEEP_HEADER,
        rows,
    })
}

pub fn to_csv(summary: &SweepSummary) -> String {
    let mut text = format!("{SWEEP_HEADER}\n");
    for r in &summary.rows {
        text += &format!(
            "{},{},{:?},{},{},{:?},{:?},{:.6}\n",
            r.n, r.param_name, r.param_value, r.trials, r.successes, r.success_rate, r.mean_tv, r.mean_runtime_s
        );
    }
    text
}

pub fn sweep(s: &Settings) -> Result<(), CliError> {
    check_writable(s.output.as_deref())?;
    check_writable(s.summary.as_deref())?;
    let summary = run_sweep(s)?;
    let bytes = match s.format.unwrap_or(Format::Csv) {
        Format::Csv => to_csv(&summary).into_bytes(),
        Format::Json => to_json(&summary),
    };
    emit(s.output.as_deref(), &bytes)?;
    if let Some(path) = &s.summary {
        emit(Some(path), &to_json(&summary))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_row_shape() {
        let summary = SweepSummary {
            task: SweepTask::MeanDecoder,
            param_name: "epsilon",
            seed: 0,
            header: SWEEP_HEADER,
            rows: vec![SweepRow {
                n: 10,
                param_name: "epsilon",
                param_value: 0.5,
                trials: 2,
                successes: 1,
                success_rate: 0.5,
                mean_tv: 0.25,
                mean_runtime_s: 0.001,
            }],
        };
        let csv = to_csv(&summary);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "10,epsilon,0.5,2,1,0.5,0.25,0.001000");
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    }

    #[test]
    fn one_point_grid_gives_one_row() {
        let s = Settings {
            n: Some(vec![2000]),
            trials: Some(1),
            ..Settings::default()
        };
        let summary = run_sweep(&s).unwrap();
        assert_eq!(summary.rows.len(), 1);
        assert_eq!(summary.rows[0].trials, 1);
    }

    #[test]
    fn crashing_trials_are_failures() {
        // n = 1 is rejected by the decoder: every trial fails but the sweep completes
        let s = Settings {
            n: Some(vec![1]),
            trials: Some(3),
            task: Some(SweepTask::VarianceDecoder),
            ..Settings::default()
        };
        let row = &run_sweep(&s).unwrap().rows[0];
        assert_eq!(row.successes, 0);
        assert_eq!(row.mean_tv, 1.0);
    }
}
