//! Empirical tail machinery: survival estimates with Wilson bands, ratio
//! curves against asymptotic denominators, the Hill estimator and a numeric
//! check of the Tauberian slope of Laplace-transform derivatives.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavytail::Denominator;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Sorted sample of nonnegative values.
#[derive(Debug, Clone, PartialEq)]
pub struct TailSample {
    values: Vec<f64>,
}

impl TailSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("values", "sample is empty"));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(
                "values",
                format!("{bad} is not a finite value >= 0"),
            ));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Number of values strictly above `x`.
    pub fn exceedances(&self, x: f64) -> usize {
        count_above(&self.values, x)
    }

    /// Type-1 empirical quantile: the smallest value with at least
    /// `level * n` values at or below it.
    pub fn quantile(&self, level: f64) -> f64 {
        sorted_quantile(&self.values, level)
    }
}

pub fn count_above(sorted: &[f64], x: f64) -> usize {
    sorted.len() - sorted.partition_point(|v| *v <= x)
}

pub fn sorted_quantile(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let idx = ((level * n as f64).ceil() as usize).clamp(1, n) - 1;
    sorted[idx]
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if k as f64 == n {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub exceedances: usize,
}

pub fn empirical_survival(sample: &TailSample, x: f64) -> SurvivalEstimate {
    let k = sample.exceedances(x);
    let (ci_low, ci_high) = wilson_interval(k, sample.n());
    SurvivalEstimate {
        probability: k as f64 / sample.n() as f64,
        ci_low,
        ci_high,
        exceedances: k,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "GridSpec::default_levels")]
    pub quantile_levels: Vec<f64>,
    #[serde(default = "GridSpec::default_min_exceedances")]
    pub min_exceedances: usize,
}

impl GridSpec {
    pub const DEFAULT_LEVELS: [f64; 5] = [0.99, 0.995, 0.999, 0.9995, 0.9999];

    fn default_levels() -> Vec<f64> {
        Self::DEFAULT_LEVELS.to_vec()
    }

    fn default_min_exceedances() -> usize {
        50
    }

    pub fn validate(&self) -> Result<()> {
        if self.quantile_levels.is_empty() {
            return Err(Error::invalid("quantile_levels", "must not be empty"));
        }
        if self.quantile_levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::invalid(
                "quantile_levels",
                "levels must lie in (0, 1)",
            ));
        }
        if self.quantile_levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "quantile_levels",
                "levels must be increasing",
            ));
        }
        Ok(())
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            quantile_levels: Self::default_levels(),
            min_exceedances: Self::default_min_exceedances(),
        }
    }
}

/// Empirical survival divided by a reference tail on an empirical-quantile
/// grid. The band carries the numerator's Wilson error only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioCurve {
    pub grid: Vec<f64>,
    pub exceedances: Vec<usize>,
    pub empirical: Vec<f64>,
    pub denominator: Vec<f64>,
    pub ratio: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRow {
    pub x: f64,
    pub exceedances: usize,
    pub empirical: f64,
    pub denominator: f64,
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RatioCurve {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn rows(&self) -> Vec<RatioRow> {
        (0..self.len())
            .map(|i| RatioRow {
                x: self.grid[i],
                exceedances: self.exceedances[i],
                empirical: self.empirical[i],
                denominator: self.denominator[i],
                ratio: self.ratio[i],
                ci_low: self.ci_low[i],
                ci_high: self.ci_high[i],
            })
            .collect()
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.ratio
            .iter()
            .map(|r| (r - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> Result<String> {
        crate::report::csv_string(&self.rows())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::report::write_csv(path, &self.rows())
    }
}

/// Grid points for `spec`, deduplicated and ascending.
pub fn quantile_grid(sample: &TailSample, spec: &GridSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut grid: Vec<f64> = spec
        .quantile_levels
        .iter()
        .map(|&l| sample.quantile(l))
        .collect();
    grid.dedup();
    Ok(grid)
}

/// Ratio curve against an arbitrary reference tail.
pub fn ratio_curve_with<F>(
    sample: &TailSample,
    mut denominator: F,
    spec: &GridSpec,
) -> Result<RatioCurve>
where
    F: FnMut(f64) -> Result<f64>,
{
    let grid = quantile_grid(sample, spec)?;
    let last = *grid.last().expect("grid is nonempty");
    let found = sample.exceedances(last);
    if found < spec.min_exceedances {
        return Err(Error::InsufficientExceedances {
            x: last,
            found,
            required: spec.min_exceedances,
        });
    }
    let mut c = RatioCurve {
        grid: Vec::new(),
        exceedances: Vec::new(),
        empirical: Vec::new(),
        denominator: Vec::new(),
        ratio: Vec::new(),
        ci_low: Vec::new(),
        ci_high: Vec::new(),
    };
    for x in grid {
        let est = empirical_survival(sample, x);
        let d = denominator(x)?;
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid(
                "denominator",
                format!("nonpositive value {d} at x = {x}"),
            ));
        }
        c.grid.push(x);
        c.exceedances.push(est.exceedances);
        c.empirical.push(est.probability);
        c.denominator.push(d);
        c.ratio.push(est.probability / d);
        c.ci_low.push(est.ci_low / d);
        c.ci_high.push(est.ci_high / d);
    }
    Ok(c)
}

/// Ratio curve against a model's asymptotic denominator.
pub fn ratio_curve(
    sample: &TailSample,
    denominator: &Denominator,
    spec: &GridSpec,
) -> Result<RatioCurve> {
    ratio_curve_with(sample, |x| Ok(denominator.eval(x)), spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillEstimate {
    pub k: usize,
    pub alpha_hat: f64,
    pub se: f64,
}

pub fn default_hill_k(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize
}

/// Hill estimator on the top `k` order statistics.
pub fn hill_estimator(sample: &TailSample, k: usize) -> Result<HillEstimate> {
    let n = sample.n();
    if k < 2 || k >= n {
        return Err(Error::invalid(
            "k",
            format!("need 2 <= k < n = {n}, got {k}"),
        ));
    }
    let v = sample.values();
    let reference = v[n - k - 1];
    if reference <= 0.0 {
        return Err(Error::invalid(
            "values",
            "top order statistics must be positive",
        ));
    }
    // log of the ratio keeps the estimate exactly invariant under scaling by
    // powers of two
    let mean = v[n - k..].iter().map(|x| (x / reference).ln()).sum::<f64>() / k as f64;
    if mean <= 0.0 {
        return Err(Error::DegenerateTail { k });
    }
    let alpha_hat = 1.0 / mean;
    Ok(HillEstimate {
        k,
        alpha_hat,
        se: alpha_hat / (k as f64).sqrt(),
    })
}

fn laplace_terms(sample: &TailSample, s: f64, order: u32) -> (f64, f64) {
    let sign = if order.is_multiple_of(2) { 1.0 } else { -1.0 };
    let n = sample.n() as f64;
    let (mut sum, mut sq) = (0.0, 0.0);
    for &x in sample.values() {
        let t = x.powi(order as i32) * (-s * x).exp();
        sum += t;
        sq += t * t;
    }
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (sign * mean, (var / n).sqrt())
}

/// Sample mean of `(-x)^order * exp(-s x)`.
pub fn laplace_derivative_mc(sample: &TailSample, s: f64, order: u32) -> f64 {
    laplace_terms(sample, s, order).0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauberianPoint {
    pub s: f64,
    pub value: f64,
    pub rel_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauberianFit {
    pub order: u32,
    pub slope: f64,
    /// `alpha - ceil(alpha)`.
    pub expected_slope: f64,
    pub points: Vec<TauberianPoint>,
}

/// `count` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[count - 1] = hi;
    g
}

pub fn default_s_grid() -> Vec<f64> {
    log_grid(1e-3, 1e-1, 9)
}

pub const MAX_REL_SE: f64 = 0.25;

/// Least-squares slope of `log |phi^(ceil alpha)(s)|` against `log s`.
pub fn tauberian_slope(sample: &TailSample, alpha: f64, s_grid: &[f64]) -> Result<TauberianFit> {
    if !(alpha > 0.0 && alpha.is_finite()) || alpha.fract() == 0.0 {
        return Err(Error::invalid("alpha", "must be positive and noninteger"));
    }
    if s_grid.len() < 2 || s_grid.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(Error::invalid(
            "s_grid",
            "need at least two positive points",
        ));
    }
    let order = alpha.ceil() as u32;
    let mut points = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let (value, se) = laplace_terms(sample, s, order);
        let rel_se = if value == 0.0 {
            f64::INFINITY
        } else {
            se / value.abs()
        };
        if rel_se > MAX_REL_SE {
            return Err(Error::UnstableEstimate { s, rel_se });
        }
        points.push(TauberianPoint { s, value, rel_se });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.s.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.value.abs().ln()).collect();
    Ok(TauberianFit {
        order,
        slope: least_squares_slope(&xs, &ys),
        expected_slope: alpha - alpha.ceil(),
        points,
    })
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
