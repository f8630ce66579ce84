//! Executes a validated configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use msfi_core::bounds::{fit_constant, BoundCurve, BoundRegime, CurveArgs, FitPoint};
use msfi_core::estimators::{
    empirical_covariance, mixing_coefficient, sample_averages, variance_of_average, ergodic_average, Estimate,
    MixingQuery, FLAG_POOLED_MEAN,
};
use msfi_core::numeric::{compensated_sum, mean_and_variance};
use msfi_core::oracle::{self, CellLaw, Rational, TinyFieldSpec, TinyFunctional};
use msfi_core::rng::{replicate_seed, substream_seed};
use msfi_core::weights::DimensionContext;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind, MixingSettings};
use crate::error::CliError;
use crate::report::{Provenance, Report, ResultRow, Verdict};

pub const FLAG_EFRON_STEIN_HOLDS: &str = "efron-stein-holds";
pub const FLAG_EFRON_STEIN_VIOLATED: &str = "efron-stein-violated";

pub(crate) fn parse_rational(field: &str, text: &str) -> Result<Rational, CliError> {
    oracle::parse_rational(text).map_err(|e| CliError::Validation {
        field: field.to_string(),
        reason: e.to_string(),
    })
}

pub(crate) fn mixing_query(m: &MixingSettings, r: f64) -> MixingQuery {
    MixingQuery {
        r,
        d_cap: m.d_cap,
        family: m.family.clone(),
        anchor: m.anchor,
    }
}

/// Seed of sweep point `i`.
pub fn point_seed(seed: u64, i: usize) -> u64 {
    substream_seed(seed, i as u64)
}

struct Point {
    param: f64,
    estimate: Estimate,
    args: CurveArgs,
}

/// Validates, runs the sweep and fits every configured regime. Nothing is
/// written to disk; see [`Report::write`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report, CliError> {
    config.validate()?;
    let started = Instant::now();
    let points = match config.experiment {
        ExperimentKind::OracleCheck => oracle_points(config)?,
        _ => field_points(config)?,
    };
    let hash = config.hash();
    let (model_tag, d) = match &config.model {
        Some(spec) if config.experiment != ExperimentKind::OracleCheck => (spec.tag(), spec.grid.d),
        _ => ("oracle".to_string(), 1),
    };
    let functional = match config.experiment {
        ExperimentKind::OracleCheck => "threshold_count".to_string(),
        _ => config.functional.tag(),
    };
    let rows: Vec<ResultRow> = points
        .iter()
        .map(|p| ResultRow {
            experiment: config.experiment.name().to_string(),
            model_tag: model_tag.clone(),
            functional: functional.clone(),
            avg_kind: config.average.tag().to_string(),
            param_name: config.experiment.sweep_param().to_string(),
            param_value: p.param,
            value: p.estimate.value,
            std_error: p.estimate.std_error,
            n: p.estimate.n,
            seed: p.estimate.seed,
            flags: p.estimate.flags_joined(),
            config_hash: hash.clone(),
        })
        .collect();

    let ctx = DimensionContext::new(d)?;
    let fit_points: Vec<FitPoint> = points
        .iter()
        .map(|p| FitPoint {
            id: format!("{}={}", config.experiment.sweep_param(), p.param),
            args: p.args,
            value: p.estimate.value.abs(),
            std_error: p.estimate.std_error,
        })
        .collect();
    let mut verdicts = Vec::new();
    for r in &config.regimes {
        let mut regime = BoundRegime::new(r.kind);
        regime.params = r.params.clone();
        regime.params.entry("C".into()).or_insert(1.0);
        let curve = BoundCurve::new(regime, config.weight, ctx);
        let fit = fit_constant(&curve, &fit_points)?;
        verdicts.push(Verdict {
            regime: r.kind,
            params: r.params.clone(),
            c_fit: fit.c_fit,
            dominated: fit.dominated,
            margin: fit.margin,
            worst_point: fit.worst_point,
            points: fit_points.len(),
        });
    }
    Ok(Report {
        rows,
        verdicts,
        provenance: Provenance {
            config_hash: hash,
            seed: config.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
        },
    })
}

fn field_points(config: &ExperimentConfig) -> Result<Vec<Point>, CliError> {
    let spec = config.model()?;
    let (f, kind, reps) = (&config.functional, config.average, config.replicates);
    let mut out = Vec::with_capacity(config.sweep.len());
    match config.experiment {
        ExperimentKind::VarianceScan => {
            for (i, &l) in config.sweep.iter().enumerate() {
                let estimate = variance_of_average(spec, f, kind, l, reps, point_seed(config.seed, i))?;
                out.push(Point {
                    param: l,
                    estimate,
                    args: CurveArgs {
                        l: Some(l),
                        ..Default::default()
                    },
                });
            }
        }
        ExperimentKind::TailScan | ExperimentKind::MomentScan => {
            // One replicate set shared by the whole sweep.
            let l = config.l.expect("validated");
            let samples = sample_averages(spec, f, kind, l, reps, point_seed(config.seed, 0))?;
            let base = samples.variance().value;
            for &v in &config.sweep {
                let (estimate, args) = if config.experiment == ExperimentKind::TailScan {
                    let args = CurveArgs {
                        delta: Some(v),
                        l: Some(l),
                        ..Default::default()
                    };
                    (samples.tail(v), args)
                } else {
                    let p = v as u32;
                    let args = CurveArgs {
                        p: Some(p),
                        base: Some(base),
                        ..Default::default()
                    };
                    (samples.moment(p)?, args)
                };
                out.push(Point { param: v, estimate, args });
            }
        }
        ExperimentKind::CovarianceScan => {
            for (i, &x) in config.sweep.iter().enumerate() {
                let mut lag = vec![0.0; spec.grid.d];
                lag[0] = x;
                let estimate = empirical_covariance(spec, &lag, reps, point_seed(config.seed, i))?;
                out.push(Point {
                    param: x,
                    estimate,
                    args: CurveArgs {
                        x_norm: Some(x),
                        ..Default::default()
                    },
                });
            }
        }
        ExperimentKind::MixingScan => {
            let m = config.mixing.as_ref().expect("validated");
            for (i, &r) in config.sweep.iter().enumerate() {
                let estimate = mixing_coefficient(spec, &mixing_query(m, r), reps, point_seed(config.seed, i))?;
                out.push(Point {
                    param: r,
                    estimate,
                    args: CurveArgs {
                        r: Some(r),
                        d_cap: m.d_cap,
                        ..Default::default()
                    },
                });
            }
        }
        ExperimentKind::ErgodicScan => {
            let gen = spec.generator()?;
            for (i, &r) in config.sweep.iter().enumerate() {
                let seed = point_seed(config.seed, i);
                let averages: Vec<f64> = (0..reps)
                    .into_par_iter()
                    .map(|k| ergodic_average(&gen.sample(replicate_seed(seed, k as u64)), f, r))
                    .collect::<Result<_, _>>()?;
                out.push(Point {
                    param: r,
                    estimate: fluctuation(&averages, f.analytic_mean(spec), seed),
                    args: CurveArgs::default(),
                });
            }
        }
        ExperimentKind::OracleCheck => unreachable!("handled by oracle_points"),
    }
    Ok(out)
}

/// Root-mean-square deviation of ergodic averages from the mean, with a
/// delta-method standard error.
fn fluctuation(averages: &[f64], mean: Option<f64>, seed: u64) -> Estimate {
    let n = averages.len() as f64;
    let mut flags = BTreeSet::new();
    let m = mean.unwrap_or_else(|| {
        flags.insert(FLAG_POOLED_MEAN.to_string());
        compensated_sum(averages.iter().copied()) / n
    });
    let sq: Vec<f64> = averages.iter().map(|a| (a - m) * (a - m)).collect();
    let (msd, var_sq) = mean_and_variance(&sq);
    let sd = msd.sqrt();
    let se = if sd > 0.0 { (var_sq / n).sqrt() / (2.0 * sd) } else { 0.0 };
    Estimate::new(sd, se, averages.len(), seed).with_flags(flags)
}

fn oracle_points(config: &ExperimentConfig) -> Result<Vec<Point>, CliError> {
    let settings = config.oracle.as_ref().expect("validated");
    let p = parse_rational("oracle.p", &settings.p)?;
    let level = parse_rational("oracle.level", &settings.level)?;
    let mut out = Vec::new();
    for &cells in &config.sweep {
        let cells = cells as usize;
        let law = CellLaw::bernoulli(p.clone())?;
        let spec = TinyFieldSpec::iid(vec![law; cells])?;
        let es = oracle::efron_stein_check(&spec, &TinyFunctional::ThresholdCount { level: level.clone() })?;
        let flag = if es.holds {
            FLAG_EFRON_STEIN_HOLDS
        } else {
            FLAG_EFRON_STEIN_VIOLATED
        };
        let estimate = Estimate::new(oracle::to_f64(&es.variance), 0.0, spec.configurations().len(), config.seed)
            .with_flags([flag.to_string(), format!("rhs={}", es.rhs)]);
        out.push(Point {
            param: cells as f64,
            estimate,
            args: CurveArgs::default(),
        });
    }
    Ok(out)
}

/// Regime parameters as `k=v;k=v`.
pub fn params_joined(params: &BTreeMap<String, f64>) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}
