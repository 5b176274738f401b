use std::path::{Path, PathBuf};

use serde::Serialize;

use dpmix::decoders::{DecoderReport, Family, ListParams};
use dpmix::distributions::{evaluate_tv, sample, Distribution, TvEstimate};
use dpmix::io::{model_to_json, parse_model, read_dataset_file, read_model_file, write_dataset};
use dpmix::learner::{learn_mixture, sample_size_plan, LearnerConfig, RunReport, SamplePlan};
use dpmix::rng::{stream, task_stream};
use dpmix::selection::{contest_matrix, write_contest_matrix};
use dpmix::{Dataset, PrivacyBudget};

use crate::error::{CliError, ExitStatus};
use crate::output::{check_readable, check_writable, emit, to_json};
use crate::settings::{FamilyName, Format, ModelSource, Settings};

/// Default Monte-Carlo draws for `eval`.
pub const EVAL_EFFORT: usize = 1_000_000;

/// Contest matrices beyond this many candidates are refused.
pub const MAX_MATRIX_CANDIDATES: usize = 2000;

pub fn load_model(source: &ModelSource) -> Result<Distribution, CliError> {
    Ok(match source {
        ModelSource::Path(p) => {
            check_readable(p)?;
            read_model_file(p)?
        }
        ModelSource::Inline(v) => parse_model(&v.to_string())?,
    })
}

pub fn budget(s: &Settings) -> Result<PrivacyBudget, CliError> {
    let b = PrivacyBudget::new(s.epsilon(), s.delta())?;
    b.check_top_level()?;
    Ok(b)
}

pub fn family(s: &Settings) -> Result<Family, CliError> {
    let d = s.d();
    let family = match s.family() {
        FamilyName::Univariate if d == 1 => Family::Univariate,
        FamilyName::Univariate => return Err(CliError::input("the univariate family needs --d 1")),
        FamilyName::AxisAligned => Family::AxisAligned { d },
        FamilyName::Identity => Family::Identity { d },
        FamilyName::KnownSigma => Family::KnownSigma {
            sigma: s.sigma.ok_or_else(|| CliError::input("the known-sigma family needs --sigma"))?,
        },
    };
    family.validate()?;
    Ok(family)
}

fn input_dataset(s: &Settings) -> Result<(PathBuf, Dataset), CliError> {
    let path = s.input.clone().ok_or_else(|| CliError::input("--input is required"))?;
    check_readable(&path)?;
    let data = read_dataset_file(&path)?;
    Ok((path, data))
}

fn only_format(s: &Settings, allowed: Format, command: &str) -> Result<(), CliError> {
    match s.format {
        Some(f) if f != allowed => Err(CliError::input(format!("{command} writes {allowed:?} only").to_lowercase())),
        _ => Ok(()),
    }
}

// gen ------------------------------------------------------------------------

pub fn gen(s: &Settings) -> Result<(), CliError> {
    only_format(s, Format::Csv, "gen")?;
    let source = s.model.as_ref().ok_or_else(|| CliError::input("gen needs --model"))?;
    check_writable(s.output.as_deref())?;
    let model = load_model(source)?;
    let n = s.single_n()?;
    if n == 0 {
        return Err(CliError::input("--n must be at least 1"));
    }
    let data = sample(&model, n, &mut stream(s.seed()));
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf)?;
    emit(s.output.as_deref(), &buf)
}

// decode ---------------------------------------------------------------------

#[derive(Serialize)]
struct DecodeOutput {
    #[serde(flatten)]
    family: Family,
    n: usize,
    required_n: usize,
    list_cap: f64,
    candidates: f64,
    #[serde(flatten)]
    report: DecoderReport,
}

pub fn decode(s: &Settings) -> Result<(), CliError> {
    check_writable(s.output.as_deref())?;
    let family = family(s)?;
    let (_, data) = input_dataset(s)?;
    let params = ListParams::new(s.alpha(), s.beta(), s.gamma(), budget(s)?)?
        .with_sample_constant(s.constant_c())?
        .allow_undersampled(s.force());
    let required_n = family.required_samples(&params)?;
    if data.len() < required_n && !s.force() {
        return Err(CliError::new(
            ExitStatus::Plan,
            format!(
                "the decoder plan needs n = {required_n} rows, the input has {}; pass --force to run anyway",
                data.len()
            ),
        ));
    }
    let list = family.decode(&params, &data, &mut stream(s.seed()))?;
    if list.failed {
        return Err(CliError::new(ExitStatus::DecoderFailure, "list decoder failed: too many heavy bins or none"));
    }
    let report = list.report()?;
    let bytes = match s.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&DecodeOutput {
            family,
            n: data.len(),
            required_n,
            list_cap: list.cap,
            candidates: list.count(),
            report,
        }),
        Format::Csv => {
            let mut text = String::from("coordinate,parameter,value\n");
            for (j, c) in list.coordinates.iter().enumerate() {
                for m in &c.means {
                    text += &format!("{j},mean,{m:?}\n");
                }
                for v in &c.scales {
                    text += &format!("{j},scale,{v:?}\n");
                }
            }
            text.into_bytes()
        }
    };
    emit(s.output.as_deref(), &bytes)
}

// learn ----------------------------------------------------------------------

#[derive(Serialize)]
struct LearnReport<'a> {
    plan: SamplePlan,
    n: usize,
    seed: u64,
    #[serde(flatten)]
    run: &'a RunReport,
}

pub fn learner_config(s: &Settings) -> Result<LearnerConfig, CliError> {
    let mut config = LearnerConfig::new(s.k(), s.alpha(), s.beta(), budget(s)?)?;
    config.sample_constant = s.constant_c();
    config.candidate_cap = s.candidate_cap();
    config.dedup_radius = s.dedup_radius();
    config.seed = s.seed();
    config.allow_undersampled = s.force();
    if let Some(effort) = s.effort {
        config.effort = effort;
    }
    config.validate()?;
    Ok(config)
}

pub fn learn(s: &Settings) -> Result<(), CliError> {
    only_format(s, Format::Json, "learn")?;
    for p in [&s.output, &s.report, &s.contest_matrix] {
        check_writable(p.as_deref())?;
    }
    let family = family(s)?;
    let config = learner_config(s)?;
    let (_, data) = input_dataset(s)?;
    let plan = sample_size_plan(&config, &family)?;
    let outcome = learn_mixture(&config, &family, &data)?;

    let matrix = match &s.contest_matrix {
        Some(path) => {
            let m = outcome.hypotheses.len();
            if m > MAX_MATRIX_CANDIDATES {
                return Err(CliError::input(format!(
                    "{m} candidates is too many for a contest matrix (limit {MAX_MATRIX_CANDIDATES})"
                )));
            }
            let (_, contest_data) = data.split_at(outcome.report.n1);
            let rows = contest_matrix(
                &outcome.hypotheses,
                &contest_data,
                config.alpha,
                config.effort,
                &mut task_stream(config.seed, 1),
            )?;
            let mut buf = Vec::new();
            write_contest_matrix(&rows, &mut buf)?;
            Some((path.clone(), buf))
        }
        None => None,
    };

    let model = Distribution::Mixture(outcome.model.clone());
    let report = LearnReport {
        plan,
        n: data.len(),
        seed: config.seed,
        run: &outcome.report,
    };
    match (&s.output, &s.report) {
        (Some(out), report_path) => {
            emit(Some(out), format!("{}\n", model_to_json(&model)).as_bytes())?;
            emit(report_path.as_deref(), &to_json(&report))?;
        }
        (None, Some(report_path)) => {
            emit(None, format!("{}\n", model_to_json(&model)).as_bytes())?;
            emit(Some(report_path), &to_json(&report))?;
        }
        (None, None) => {
            #[derive(Serialize)]
            struct Both<'a> {
                model: &'a Distribution,
                report: LearnReport<'a>,
            }
            emit(None, &to_json(&Both { model: &model, report }))?;
        }
    }
    if let Some((path, buf)) = matrix {
        emit(Some(&path), &buf)?;
    }
    Ok(())
}

// eval -----------------------------------------------------------------------

pub fn eval(s: &Settings, a: &Path, b: &Path) -> Result<(), CliError> {
    check_writable(s.output.as_deref())?;
    let p = load_model(&ModelSource::Path(a.to_path_buf()))?;
    let q = load_model(&ModelSource::Path(b.to_path_buf()))?;
    if p.dim() != q.dim() {
        return Err(CliError::input(format!("models have dimensions {} and {}", p.dim(), q.dim())));
    }
    let tv: TvEstimate = evaluate_tv(&p, &q, s.effort.unwrap_or(EVAL_EFFORT), &mut stream(s.seed()))?;
    let bytes = match s.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&tv),
        Format::Csv => {
            let method = serde_json::to_value(tv.method).expect("method serializes");
            format!(
                "estimate,std_error,method\n{:?},{:?},{}\n",
                tv.estimate,
                tv.std_error,
                method.as_str().unwrap_or_default()
            )
            .into_bytes()
        }
    };
    emit(s.output.as_deref(), &bytes)
}
