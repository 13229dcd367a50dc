//! Large-deviation sweeps over growing horizons.
//!
//! For each horizon `T` the window maximum and the centred window sum
//! `S_T - mu` are compared, on a grid `x >= gamma * nu * T`, with
//! `E[N_T] P(X > x)` and `nu T` times the cluster-sum denominator
//! respectively. The grid ends at the empirical `1 - min_exceedances / n`
//! quantile, beyond which nothing can be certified.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{count_above, log_grid, sorted_quantile, wilson_interval, Z95};
use crate::heavytail::{Denominator, OracleSettings, Target};
use crate::parallel::Workers;
use crate::process::{batch_windows, estimate_mean_sum, MeanEstimate, WindowConfig, WindowStats};
use crate::report;
use crate::rng::derive_seed;

pub const MIN_REPLICATIONS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Template; its `horizon` is replaced by each entry of `horizons`.
    pub window: WindowConfig,
    pub horizons: Vec<f64>,
    #[serde(default = "SweepConfig::default_gamma")]
    pub gamma: f64,
    pub replications: u64,
    #[serde(default = "SweepConfig::default_x_levels")]
    pub x_levels: usize,
    #[serde(default = "SweepConfig::default_pilot")]
    pub pilot_replications: u64,
    #[serde(default = "SweepConfig::default_min_exceedances")]
    pub min_exceedances: usize,
}

impl SweepConfig {
    fn default_gamma() -> f64 {
        0.5
    }

    fn default_x_levels() -> usize {
        20
    }

    fn default_pilot() -> u64 {
        100_000
    }

    fn default_min_exceedances() -> usize {
        50
    }

    pub fn new(window: WindowConfig, horizons: Vec<f64>, replications: u64) -> Self {
        Self {
            window,
            horizons,
            gamma: Self::default_gamma(),
            replications,
            x_levels: Self::default_x_levels(),
            pilot_replications: Self::default_pilot(),
            min_exceedances: Self::default_min_exceedances(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate().map_err(|e| e.within("window"))?;
        if self.horizons.is_empty() {
            return Err(Error::invalid("horizons", "must not be empty"));
        }
        if self.horizons.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::invalid("horizons", "horizons must be > 0"));
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("horizons", "must be strictly ascending"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid("gamma", "must be > 0"));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::invalid(
                "replications",
                format!("must be >= {MIN_REPLICATIONS}"),
            ));
        }
        if self.x_levels == 0 {
            return Err(Error::invalid("x_levels", "must be >= 1"));
        }
        if self.pilot_replications < crate::process::MIN_PILOT {
            return Err(Error::invalid(
                "pilot_replications",
                format!("must be >= {}", crate::process::MIN_PILOT),
            ));
        }
        if self.min_exceedances == 0 {
            return Err(Error::invalid("min_exceedances", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub horizon: f64,
    pub x: f64,
    pub exceedances: usize,
    pub empirical: f64,
    pub denominator: f64,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Sup of `|ratio - 1|` over the certified rows of this horizon.
    pub sup_abs_dev: f64,
    /// At least `min_exceedances` exceedances.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonSummary {
    pub horizon: f64,
    pub sup_abs_dev: f64,
    /// Binomial standard error of the ratio at the row attaining the sup.
    pub sup_se: f64,
    pub certified_x_low: Option<f64>,
    pub certified_x_high: Option<f64>,
    pub certified_rows: usize,
    pub expected_events: f64,
    pub mean_events: f64,
    /// Pilot estimate of `E[S_T]`; sum sweeps only.
    pub centre: Option<MeanEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Max,
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
    pub horizons: Vec<HorizonSummary>,
    pub monotone: bool,
}

impl SweepReport {
    pub fn sup_deviations(&self) -> Vec<f64> {
        self.horizons.iter().map(|h| h.sup_abs_dev).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        report::csv_string(&self.rows)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        report::write_csv(path, &self.rows)
    }

    /// JSON summary: per-horizon sups, certified ranges and the monotone flag.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            kind: SweepKind,
            monotone: bool,
            horizons: &'a [HorizonSummary],
        }
        report::json_string(&Summary {
            kind: self.kind,
            monotone: self.monotone,
            horizons: &self.horizons,
        })
    }
}

/// Nonincreasing up to one inversion that is within two standard errors.
pub fn is_monotone_within_noise(values: &[f64], ses: &[f64]) -> bool {
    let mut inversions = 0;
    for i in 1..values.len() {
        if values[i] > values[i - 1] {
            let tol = 2.0 * (ses[i].powi(2) + ses[i - 1].powi(2)).sqrt();
            if values[i] - values[i - 1] > tol {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= 1
}

fn horizon_seed(seed: u64, index: usize, pilot: bool) -> u64 {
    derive_seed(seed, 2 * index as u64 + pilot as u64)
}

fn grid(lo: f64, hi: f64, levels: usize) -> Vec<f64> {
    if hi <= lo || levels == 1 {
        vec![lo]
    } else {
        log_grid(lo, hi, levels)
    }
}

/// Rows for one horizon. `shift_se` widens the band for the uncertainty of
/// the centring constant.
fn rows_for(
    horizon: f64,
    sorted: &[f64],
    xs: &[f64],
    shift_se: f64,
    min_exceedances: usize,
    mut denominator: impl FnMut(f64) -> f64,
) -> (Vec<SweepRow>, f64, f64) {
    let n = sorted.len();
    let mut rows: Vec<SweepRow> = xs
        .iter()
        .map(|&x| {
            let k = count_above(sorted, x);
            let d = denominator(x);
            let p = k as f64 / n as f64;
            let (lo, _) = wilson_interval(count_above(sorted, x + Z95 * shift_se), n);
            let (_, hi) = wilson_interval(count_above(sorted, x - Z95 * shift_se), n);
            let ratio = p / d;
            SweepRow {
                horizon,
                x,
                exceedances: k,
                empirical: p,
                denominator: d,
                ratio,
                ci_low: (lo / d).min(ratio),
                ci_high: (hi / d).max(ratio),
                sup_abs_dev: 0.0,
                certified: k >= min_exceedances,
            }
        })
        .collect();
    let (mut sup, mut se) = (0.0f64, 0.0);
    for r in rows.iter().filter(|r| r.certified) {
        let dev = (r.ratio - 1.0).abs();
        if dev >= sup {
            sup = dev;
            se = r.ratio * ((1.0 - r.empirical) / (n as f64 * r.empirical)).sqrt();
        }
    }
    for r in &mut rows {
        r.sup_abs_dev = sup;
    }
    (rows, sup, se)
}

fn summarise(
    horizon: f64,
    rows: &[SweepRow],
    sup: f64,
    sup_se: f64,
    expected_events: f64,
    windows: &[WindowStats],
    centre: Option<MeanEstimate>,
) -> HorizonSummary {
    let certified: Vec<&SweepRow> = rows.iter().filter(|r| r.certified).collect();
    HorizonSummary {
        horizon,
        sup_abs_dev: sup,
        sup_se,
        certified_x_low: certified.first().map(|r| r.x),
        certified_x_high: certified.last().map(|r| r.x),
        certified_rows: certified.len(),
        expected_events,
        mean_events: windows.iter().map(|w| w.n_events as f64).sum::<f64>() / windows.len() as f64,
        centre,
    }
}

/// Max and sum sweeps sharing the simulated windows of each horizon.
pub fn ldp_sweeps(
    config: &SweepConfig,
    seed: u64,
    oracle: &OracleSettings,
    workers: &Workers,
) -> Result<(SweepReport, SweepReport)> {
    run(config, seed, oracle, workers, true, true).map(|(m, s)| (m.unwrap(), s.unwrap()))
}

pub fn ldp_max_sweep(config: &SweepConfig, seed: u64, workers: &Workers) -> Result<SweepReport> {
    run(
        config,
        seed,
        &OracleSettings::disabled(),
        workers,
        true,
        false,
    )
    .map(|(m, _)| m.unwrap())
}

pub fn ldp_sum_sweep(
    config: &SweepConfig,
    seed: u64,
    oracle: &OracleSettings,
    workers: &Workers,
) -> Result<SweepReport> {
    run(config, seed, oracle, workers, false, true).map(|(_, s)| s.unwrap())
}

fn run(
    config: &SweepConfig,
    seed: u64,
    oracle: &OracleSettings,
    workers: &Workers,
    want_max: bool,
    want_sum: bool,
) -> Result<(Option<SweepReport>, Option<SweepReport>)> {
    config.validate()?;
    let model = &config.window.model;
    let constants = model.constants().map_err(|e| e.within("window.model"))?;
    let mark = *model.mark_law();
    let sum_denominator = if want_sum {
        Some(Denominator::new(
            model,
            Target::for_model(model.kind(), true),
            oracle,
            workers,
        )?)
    } else {
        None
    };
    let nu = config.window.nu;

    let (mut max_rows, mut max_h) = (Vec::new(), Vec::new());
    let (mut sum_rows, mut sum_h) = (Vec::new(), Vec::new());
    for (i, &t) in config.horizons.iter().enumerate() {
        let window = config.window.with_horizon(t);
        let windows = batch_windows(
            &window,
            config.replications,
            horizon_seed(seed, i, false),
            workers,
        )?;
        let expected_events = constants.mean_window_events(nu, t);
        let lo = config.gamma * nu * t;
        let upper_level = 1.0 - config.min_exceedances as f64 / config.replications as f64;

        if want_max {
            let mut maxima: Vec<f64> = windows.iter().map(|w| w.max_in_window).collect();
            maxima.sort_by(f64::total_cmp);
            let xs = grid(lo, sorted_quantile(&maxima, upper_level), config.x_levels);
            let (rows, sup, se) = rows_for(t, &maxima, &xs, 0.0, config.min_exceedances, |x| {
                expected_events * mark.survival(x)
            });
            max_h.push(summarise(
                t,
                &rows,
                sup,
                se,
                expected_events,
                &windows,
                None,
            ));
            max_rows.extend(rows);
        }
        if let Some(den) = &sum_denominator {
            let centre = estimate_mean_sum(
                &window,
                config.pilot_replications,
                horizon_seed(seed, i, true),
                workers,
            )?;
            let mut dev: Vec<f64> = windows
                .iter()
                .map(|w| w.sum_in_window - centre.mean)
                .collect();
            dev.sort_by(f64::total_cmp);
            let xs = grid(lo, sorted_quantile(&dev, upper_level), config.x_levels);
            let (rows, sup, se) = rows_for(t, &dev, &xs, centre.se, config.min_exceedances, |x| {
                nu * t * den.eval(x)
            });
            sum_h.push(summarise(
                t,
                &rows,
                sup,
                se,
                expected_events,
                &windows,
                Some(centre),
            ));
            sum_rows.extend(rows);
        }
    }
    let finish = |kind, rows, horizons: Vec<HorizonSummary>| {
        let sups: Vec<f64> = horizons.iter().map(|h| h.sup_abs_dev).collect();
        let ses: Vec<f64> = horizons.iter().map(|h| h.sup_se).collect();
        SweepReport {
            kind,
            rows,
            monotone: is_monotone_within_noise(&sups, &ses),
            horizons,
        }
    };
    Ok((
        want_max.then(|| finish(SweepKind::Max, max_rows, max_h)),
        want_sum.then(|| finish(SweepKind::Sum, sum_rows, sum_h)),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeftoverRow {
    pub horizon: f64,
    /// `E[J_T] / T`.
    pub leftover_count_rate: f64,
    pub leftover_count_se: f64,
    /// `E[epsilon_T] / sqrt(T)`.
    pub leftover_sum_rate: f64,
    pub leftover_sum_se: f64,
}

/// Empirical `E[J_T]/T` and `E[epsilon_T]/sqrt(T)` per horizon.
pub fn leftover_scaling(
    config: &SweepConfig,
    seed: u64,
    workers: &Workers,
) -> Result<Vec<LeftoverRow>> {
    config.validate()?;
    config
        .horizons
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let windows = batch_windows(
                &config.window.with_horizon(t),
                config.replications,
                horizon_seed(seed, i, false),
                workers,
            )?;
            let j: Vec<f64> = windows.iter().map(|w| w.j_leftover as f64 / t).collect();
            let eps: Vec<f64> = windows.iter().map(|w| w.leftover_sum / t.sqrt()).collect();
            let (j, eps) = (
                MeanEstimate::from_values(&j),
                MeanEstimate::from_values(&eps),
            );
            Ok(LeftoverRow {
                horizon: t,
                leftover_count_rate: j.mean,
                leftover_count_se: j.se,
                leftover_sum_rate: eps.mean,
                leftover_sum_se: eps.se,
            })
        })
        .collect()
}

/// Strictly decreasing in both columns.
pub fn leftover_is_decreasing(rows: &[LeftoverRow]) -> (bool, bool) {
    let dec = |f: fn(&LeftoverRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    (dec(|r| r.leftover_count_rate), dec(|r| r.leftover_sum_rate))
}
