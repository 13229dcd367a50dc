//! One function per experiment kind. Each returns the CSV body and the JSON
//! summary; nothing here touches the file system except the oracle cache.

use serde::Serialize;
use serde_json::{json, Value};

use cluster_tails_core::clusters::{batch_functionals, ClusterLaw, ClusterParams};
use cluster_tails_core::estimate::{
    default_hill_k, default_s_grid, empirical_survival, hill_estimator, ratio_curve,
    ratio_curve_with, tauberian_slope, TailSample,
};
use cluster_tails_core::heavytail::{leading_order_tail, Denominator, OracleSettings, Target};
use cluster_tails_core::ldp::{
    ldp_max_sweep, ldp_sum_sweep, leftover_is_decreasing, leftover_scaling,
};
use cluster_tails_core::oracle::{
    exact_renewal_max_tail, exact_renewal_sum_tail, truncated_hawkes_sum_tail, DiscreteJointModel,
    DiscreteVariant,
};
use cluster_tails_core::report::csv_string;
use cluster_tails_core::{RngStream, Workers};

use crate::config::{Experiment, ExperimentConfig, Functional, Reference};
use crate::error::{CliError, CliResult};

pub struct Artifacts {
    pub csv: String,
    pub json: Value,
}

pub fn execute(
    cfg: &ExperimentConfig,
    workers: &Workers,
    oracle: &OracleSettings,
) -> CliResult<Artifacts> {
    cfg.validate()?;
    let mut a = match cfg.experiment {
        Experiment::ClusterTails => cluster_tails(cfg, workers)?,
        Experiment::TailRatio => tail_ratio(cfg, workers, oracle)?,
        Experiment::Hill => hill(cfg, workers)?,
        Experiment::Tauberian => tauberian(cfg, workers)?,
        Experiment::OracleCompare => oracle_compare(cfg, workers)?,
        Experiment::LdpMax => {
            let r = ldp_max_sweep(&cfg.sweep_config()?, cfg.seed, workers)?;
            Artifacts {
                csv: r.to_csv()?,
                json: parse(&r.summary_json()?),
            }
        }
        Experiment::LdpSum => {
            let r = ldp_sum_sweep(&cfg.sweep_config()?, cfg.seed, oracle, workers)?;
            Artifacts {
                csv: r.to_csv()?,
                json: parse(&r.summary_json()?),
            }
        }
        Experiment::Leftover => {
            let rows = leftover_scaling(&cfg.sweep_config()?, cfg.seed, workers)?;
            let (count, sum) = leftover_is_decreasing(&rows);
            Artifacts {
                csv: csv_string(&rows)?,
                json: json!({
                    "count_rate_decreasing": count,
                    "sum_rate_decreasing": sum,
                }),
            }
        }
    };
    if let Value::Object(map) = &mut a.json {
        map.insert("experiment".into(), json!(cfg.experiment.name()));
        map.insert("seed".into(), json!(cfg.seed));
    }
    Ok(a)
}

fn parse(text: &str) -> Value {
    serde_json::from_str(text).expect("summary is valid json")
}

/// Sample of `n` marks, cluster maxima or cluster sums.
fn functional_sample<L: ClusterLaw + ?Sized>(
    law: &L,
    params: &ClusterParams,
    functional: Functional,
    n: u64,
    seed: u64,
    workers: &Workers,
) -> CliResult<Vec<f64>> {
    Ok(match functional {
        Functional::Mark => workers.map_indexed(n, |i| {
            Ok(law.draw_pair(&mut RngStream::new(seed, i)).mark())
        })?,
        Functional::Max => batch_functionals(law, params, n, seed, workers)?.max,
        Functional::Sum => batch_functionals(law, params, n, seed, workers)?.sum,
    })
}

fn tail_sample(values: Vec<f64>) -> CliResult<TailSample> {
    Ok(TailSample::new(values)?)
}

#[derive(Serialize)]
struct SurvivalRow {
    functional: Functional,
    level: f64,
    x: f64,
    exceedances: usize,
    empirical: f64,
    ci_low: f64,
    ci_high: f64,
}

fn cluster_tails(cfg: &ExperimentConfig, workers: &Workers) -> CliResult<Artifacts> {
    let model = cfg.model()?;
    let n = cfg.clusters()?;
    let s = batch_functionals(model, &cfg.cluster_params()?, n, cfg.seed, workers)?;
    let grid = cfg.grid.clone().unwrap_or_default();
    let mean_size = s.mean_size();
    let mut rows = Vec::new();
    for (functional, values) in [(Functional::Max, s.max), (Functional::Sum, s.sum)] {
        let sample = tail_sample(values)?;
        for level in &grid.quantile_levels {
            let x = sample.quantile(*level);
            let e = empirical_survival(&sample, x);
            rows.push(SurvivalRow {
                functional,
                level: *level,
                x,
                exceedances: e.exceedances,
                empirical: e.probability,
                ci_low: e.ci_low,
                ci_high: e.ci_high,
            });
        }
    }
    let constants = model.constants()?;
    Ok(Artifacts {
        csv: csv_string(&rows)?,
        json: json!({
            "clusters": n,
            "mean_cluster_size": mean_size,
            "expected_cluster_size": constants.mean_cluster_size(),
            "model_constants": constants,
        }),
    })
}

fn tail_ratio(
    cfg: &ExperimentConfig,
    workers: &Workers,
    oracle: &OracleSettings,
) -> CliResult<Artifacts> {
    let model = cfg.model()?;
    let n = cfg.clusters()?;
    let functional = cfg.functional()?;
    let values = functional_sample(
        model,
        &cfg.cluster_params()?,
        functional,
        n,
        cfg.seed,
        workers,
    )?;
    let sample = tail_sample(values)?;
    let grid = cfg.grid.clone().unwrap_or_default();
    let target = Target::for_model(model.kind(), functional == Functional::Sum);
    let (curve, provenance) = match cfg.reference {
        Reference::Denominator => {
            let d = Denominator::new(model, target, oracle, workers)
                .map_err(|e| CliError::from_core(e, "model"))?;
            (
                ratio_curve(&sample, &d, &grid)?,
                serde_json::to_value(d.provenance()).expect("serializable"),
            )
        }
        Reference::LeadingOrder => (
            ratio_curve_with(&sample, |x| leading_order_tail(model, target, x), &grid)?,
            json!({"source": "closed_form"}),
        ),
    };
    Ok(Artifacts {
        csv: curve.to_csv()?,
        json: json!({
            "clusters": n,
            "functional": functional,
            "target": target,
            "reference": cfg.reference,
            "provenance": provenance,
            "model_constants": model.constants()?,
            "max_abs_deviation": curve.max_abs_deviation(),
            "note": "ratio band reflects numerator Monte Carlo error only",
        }),
    })
}

fn hill(cfg: &ExperimentConfig, workers: &Workers) -> CliResult<Artifacts> {
    let model = cfg.model()?;
    let n = cfg.clusters()?;
    let functional = cfg.functional()?;
    let sample = tail_sample(functional_sample(
        model,
        &cfg.cluster_params()?,
        functional,
        n,
        cfg.seed,
        workers,
    )?)?;
    let ks = cfg
        .hill_k
        .clone()
        .unwrap_or_else(|| vec![default_hill_k(sample.n())]);
    let rows = ks
        .iter()
        .map(|&k| hill_estimator(&sample, k).map_err(|e| CliError::from_core(e, "hill_k")))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Artifacts {
        csv: csv_string(&rows)?,
        json: json!({
            "clusters": n,
            "functional": functional,
            "mark_tail_index": model.mark_law().tail_index(),
            "estimates": rows,
        }),
    })
}

fn tauberian(cfg: &ExperimentConfig, workers: &Workers) -> CliResult<Artifacts> {
    let model = cfg.model()?;
    let n = cfg.clusters()?;
    let functional = cfg.functional()?;
    let sample = tail_sample(functional_sample(
        model,
        &cfg.cluster_params()?,
        functional,
        n,
        cfg.seed,
        workers,
    )?)?;
    let alpha = cfg
        .alpha
        .or(model.mark_law().tail_index())
        .expect("validated");
    let s_grid = cfg.s_grid.clone().unwrap_or_else(default_s_grid);
    let fit =
        tauberian_slope(&sample, alpha, &s_grid).map_err(|e| CliError::from_core(e, "s_grid"))?;
    Ok(Artifacts {
        csv: csv_string(&fit.points)?,
        json: json!({
            "clusters": n,
            "functional": functional,
            "alpha": alpha,
            "order": fit.order,
            "slope": fit.slope,
            "expected_slope": fit.expected_slope,
        }),
    })
}

/// Evaluation points: every simulated value, every support point and any
/// requested extras, deduplicated.
fn evaluation_points(model: &DiscreteJointModel, samples: &[&[f64]], extra: &[f64]) -> Vec<f64> {
    let mut xs: Vec<f64> = samples.iter().flat_map(|s| s.iter().copied()).collect();
    xs.extend(model.support().iter().map(|a| a.x_value));
    xs.extend(model.offspring().iter().map(|o| o.mark));
    xs.extend_from_slice(extra);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn empirical_tail(sorted: &[f64], x: f64) -> f64 {
    cluster_tails_core::estimate::count_above(sorted, x) as f64 / sorted.len() as f64
}

fn oracle_compare(cfg: &ExperimentConfig, workers: &Workers) -> CliResult<Artifacts> {
    let spec = cfg.discrete.as_ref().expect("validated");
    let model = spec.build()?;
    let n = cfg.clusters()?;
    let params = ClusterParams::default_for(model.kind());
    let s = batch_functionals(&model, &params, n, cfg.seed, workers)?;
    let (mut max, mut sum) = (s.max, s.sum);
    max.sort_by(f64::total_cmp);
    sum.sort_by(f64::total_cmp);
    let dkw = ((2.0f64 / 0.001).ln() / (2.0 * n as f64)).sqrt();
    match model.variant() {
        DiscreteVariant::Renewal => {
            #[derive(Serialize)]
            struct Row {
                x: f64,
                exact_max: f64,
                mc_max: f64,
                exact_sum: f64,
                mc_sum: f64,
            }
            let mut rows = Vec::new();
            let (mut ks_max, mut ks_sum) = (0.0f64, 0.0f64);
            for x in evaluation_points(&model, &[&max, &sum], &spec.x_values) {
                let r = Row {
                    x,
                    exact_max: exact_renewal_max_tail(&model, x)?,
                    mc_max: empirical_tail(&max, x),
                    exact_sum: exact_renewal_sum_tail(&model, x)
                        .map_err(|e| CliError::from_core(e, "discrete"))?,
                    mc_sum: empirical_tail(&sum, x),
                };
                ks_max = ks_max.max((r.exact_max - r.mc_max).abs());
                ks_sum = ks_sum.max((r.exact_sum - r.mc_sum).abs());
                rows.push(r);
            }
            Ok(Artifacts {
                csv: csv_string(&rows)?,
                json: json!({
                    "clusters": n,
                    "ks_max": ks_max,
                    "ks_sum": ks_sum,
                    "dkw_band_99_9": dkw,
                }),
            })
        }
        DiscreteVariant::Hawkes { .. } => {
            #[derive(Serialize)]
            struct Row {
                x: f64,
                lower: f64,
                upper: f64,
                mc_sum: f64,
            }
            let mut rows = Vec::new();
            let (mut outside, mut width) = (0.0f64, 0.0f64);
            for x in evaluation_points(&model, &[&sum], &spec.x_values) {
                let b = truncated_hawkes_sum_tail(&model, x, spec.bracket_tolerance)
                    .map_err(|e| CliError::from_core(e, "discrete"))?;
                let p = empirical_tail(&sum, x);
                outside = outside.max(b.lower - p).max(p - b.upper);
                width = width.max(b.width());
                rows.push(Row {
                    x,
                    lower: b.lower,
                    upper: b.upper,
                    mc_sum: p,
                });
            }
            Ok(Artifacts {
                csv: csv_string(&rows)?,
                json: json!({
                    "clusters": n,
                    "max_distance_outside_bracket": outside.max(0.0),
                    "max_bracket_width": width,
                    "dkw_band_99_9": dkw,
                }),
            })
        }
    }
}
