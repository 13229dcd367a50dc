//! Asymptotic normalisers for the cluster functionals.
//!
//! | target        | denominator at `x`                                   |
//! |---------------|------------------------------------------------------|
//! | `RenewalMax`  | `(1 + E[K]) P(X > x)`                                |
//! | `RenewalSum`  | `P(X + E[X] K > x) + E[K] P(X > x)`                  |
//! | `HawkesMax`   | `P(X > x) / (1 - E[kappa])`                          |
//! | `HawkesSum`   | `P(X + c kappa > x) / (1 - E[kappa])`, `c = E[X] / (1 - E[kappa])` |
//!
//! The joint terms are evaluated exactly where the regime allows it. The
//! tail-equivalent regime goes through a Monte Carlo oracle whose tail table
//! is cached on disk keyed by model, target, sample size and seed.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::laws::{LightLaw, MarkLaw, ParetoLaw};
use super::model::{JointMarkModel, MarkPair, ModelConstants, ModelKind};
use crate::error::{Error, Result};
use crate::parallel::Workers;
use crate::rng::RngStream;
use crate::special::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    RenewalMax,
    RenewalSum,
    HawkesMax,
    HawkesSum,
}

impl Target {
    pub fn kind(self) -> ModelKind {
        match self {
            Target::RenewalMax | Target::RenewalSum => ModelKind::Renewal,
            Target::HawkesMax | Target::HawkesSum => ModelKind::Hawkes,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::RenewalMax => "renewal_max",
            Target::RenewalSum => "renewal_sum",
            Target::HawkesMax => "hawkes_max",
            Target::HawkesSum => "hawkes_sum",
        }
    }

    pub fn is_sum(self) -> bool {
        matches!(self, Target::RenewalSum | Target::HawkesSum)
    }

    /// The max or sum target matching the model kind.
    pub fn for_model(kind: ModelKind, sum: bool) -> Self {
        match (kind, sum) {
            (ModelKind::Renewal, false) => Target::RenewalMax,
            (ModelKind::Renewal, true) => Target::RenewalSum,
            (ModelKind::Hawkes, false) => Target::HawkesMax,
            (ModelKind::Hawkes, true) => Target::HawkesSum,
        }
    }
}

/// Monte Carlo oracle configuration. `cache_dir = None` disables the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSettings {
    pub cache_dir: Option<PathBuf>,
    pub sample_size: u64,
    pub seed: u64,
}

impl OracleSettings {
    pub const DEFAULT_SAMPLE_SIZE: u64 = 10_000_000;
    pub const DEFAULT_SEED: u64 = 0x0dd5_eed5;

    pub fn disabled() -> Self {
        Self {
            cache_dir: None,
            sample_size: Self::DEFAULT_SAMPLE_SIZE,
            seed: Self::DEFAULT_SEED,
        }
    }

    pub fn cached(dir: impl Into<PathBuf>) -> Self {
        Self {
            cache_dir: Some(dir.into()),
            ..Self::disabled()
        }
    }
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self::disabled()
    }
}

/// Where the joint-tail term of a denominator came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    MonteCarloOracle {
        sample_size: u64,
        seed: u64,
        cache_file: PathBuf,
    },
}

/// Survival table `x -> P(V > x)` of the oracle sample.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    xs: Vec<f64>,
    ps: Vec<f64>,
}

impl OracleTable {
    const GRID_POINTS: usize = 1024;
    const MIN_TOP_EXCEEDANCES: usize = 100;

    fn from_sorted(values: &[f64]) -> Self {
        let n = values.len();
        let lo = values[0].max(f64::MIN_POSITIVE);
        let top = n.saturating_sub(Self::MIN_TOP_EXCEEDANCES + 1);
        let hi = values[top].max(lo * (1.0 + 1e-9));
        let (llo, lhi) = (lo.ln(), hi.ln());
        let m = Self::GRID_POINTS;
        let mut xs = Vec::with_capacity(m);
        let mut ps = Vec::with_capacity(m);
        for i in 0..m {
            let x = (llo + (lhi - llo) * i as f64 / (m - 1) as f64).exp();
            let above = n - values.partition_point(|&v| v <= x);
            xs.push(x);
            ps.push(above as f64 / n as f64);
        }
        Self { xs, ps }
    }

    /// Log-log interpolation; power-law continuation past the last point.
    pub fn eval(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        if x < self.xs[0] {
            return 1.0;
        }
        if x >= self.xs[last] {
            let anchor = last.saturating_sub(self.xs.len() / 8);
            let slope = ((self.ps[last].ln() - self.ps[anchor].ln())
                / (self.xs[last].ln() - self.xs[anchor].ln()))
            .min(0.0);
            return self.ps[last] * (x / self.xs[last]).powf(slope);
        }
        let j = self.xs.partition_point(|&g| g <= x);
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let (p0, p1) = (self.ps[j - 1], self.ps[j]);
        if p1 <= 0.0 || p0 <= 0.0 {
            return p0 + (p1 - p0) * (x - x0) / (x1 - x0);
        }
        let t = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
        (p0.ln() + t * (p1.ln() - p0.ln())).exp()
    }

    fn write(&self, path: &Path, header: &str) -> Result<()> {
        let tmp = path.with_extension("csv.tmp");
        {
            let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut file = std::io::BufWriter::new(file);
            writeln!(file, "{header}").map_err(|e| Error::io(&tmp, e))?;
            let mut w = csv::Writer::from_writer(file);
            w.write_record(["x", "probability"])?;
            for (x, p) in self.xs.iter().zip(&self.ps) {
                w.write_record([x.to_string(), p.to_string()])?;
            }
            w.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// `Ok(None)` when the file is missing or was written for another key.
    fn read(path: &Path, header: &str) -> Result<Option<Self>> {
        let Ok(file) = fs::File::open(path) else {
            return Ok(None);
        };
        let mut reader = BufReader::new(file);
        let mut first = String::new();
        reader
            .read_line(&mut first)
            .map_err(|e| Error::io(path, e))?;
        if first.trim_end() != header {
            return Ok(None);
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut xs = Vec::new();
        let mut ps = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::CorruptCache {
                        path: path.into(),
                        reason: format!("bad field {i} in {rec:?}"),
                    })
            };
            xs.push(parse(0)?);
            ps.push(parse(1)?);
        }
        if xs.len() < 2 {
            return Err(Error::CorruptCache {
                path: path.into(),
                reason: "fewer than two grid points".into(),
            });
        }
        Ok(Some(Self { xs, ps }))
    }
}

#[derive(Debug, Clone)]
enum JointTerm {
    Unused,
    Exact { model: JointMarkModel, shift: f64 },
    Oracle(OracleTable),
}

/// A denominator bound to one model and target.
#[derive(Debug, Clone)]
pub struct Denominator {
    target: Target,
    mark: MarkLaw,
    constants: ModelConstants,
    joint: JointTerm,
    provenance: Provenance,
}

impl Denominator {
    pub fn new(
        model: &JointMarkModel,
        target: Target,
        oracle: &OracleSettings,
        workers: &Workers,
    ) -> Result<Self> {
        let constants = model.constants()?;
        if target.kind() != model.kind() {
            return Err(Error::IncompatibleTarget {
                target: target.name(),
                kind: model.kind().name(),
            });
        }
        let shift = joint_shift(&constants, target);
        let (joint, provenance) = if !target.is_sum() {
            (JointTerm::Unused, Provenance::ClosedForm)
        } else if has_closed_joint(model) {
            (
                JointTerm::Exact {
                    model: model.clone(),
                    shift,
                },
                Provenance::ClosedForm,
            )
        } else {
            let Some(dir) = &oracle.cache_dir else {
                return Err(Error::NoClosedForm {
                    what: format!("{} joint tail of {:?}", target.name(), model.regime()),
                });
            };
            let (table, file) = load_or_build_oracle(model, target, shift, oracle, dir, workers)?;
            (
                JointTerm::Oracle(table),
                Provenance::MonteCarloOracle {
                    sample_size: oracle.sample_size,
                    seed: oracle.seed,
                    cache_file: file,
                },
            )
        };
        Ok(Self {
            target,
            mark: *model.mark_law(),
            constants,
            joint,
            provenance,
        })
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn constants(&self) -> &ModelConstants {
        &self.constants
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// The joint tail `P(X + c K > x)` (or with `kappa`); `None` for max targets.
    pub fn joint_tail(&self, x: f64) -> Option<f64> {
        match &self.joint {
            JointTerm::Unused => None,
            JointTerm::Exact { model, shift } => {
                Some(exact_joint_tail(model, *shift, x).expect("closed form checked"))
            }
            JointTerm::Oracle(table) => Some(table.eval(x)),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let sx = self.mark.survival(x);
        let c = &self.constants;
        match self.target {
            Target::RenewalMax => (1.0 + c.mean_count) * sx,
            Target::RenewalSum => self.joint_tail(x).unwrap() + c.mean_count * sx,
            Target::HawkesMax => sx / (1.0 - c.mean_count),
            Target::HawkesSum => self.joint_tail(x).unwrap() / (1.0 - c.mean_count),
        }
    }
}

/// Closed-form denominator at `x`; `NoClosedForm` when the joint term needs
/// the Monte Carlo oracle.
pub fn theoretical_denominator(model: &JointMarkModel, target: Target, x: f64) -> Result<f64> {
    Ok(Denominator::new(
        model,
        target,
        &OracleSettings::disabled(),
        &Workers::single(),
    )?
    .eval(x))
}

/// The denominator with its joint term replaced by the regular-variation
/// asymptote: `P(X + c K > x)` becomes `P(X > x)` (light `K`), `c^alpha P(K > x)`
/// (light `X`), their sum (tail-equivalent) or `P((1 + c) X > x)`
/// (comonotone); a bounded `kappa` drops out of the Hawkes shift. Max
/// targets are returned unchanged.
pub fn leading_order_tail(model: &JointMarkModel, target: Target, x: f64) -> Result<f64> {
    let c = model.constants()?;
    if target.kind() != model.kind() {
        return Err(Error::IncompatibleTarget {
            target: target.name(),
            kind: model.kind().name(),
        });
    }
    let mark = model.mark_law();
    let sx = mark.survival(x);
    let count_tail = |count: &ParetoLaw| {
        let k_tail = count.survival(x.floor());
        c.mean_mark.powf(count.alpha) * k_tail
    };
    Ok(match (target, model) {
        (Target::RenewalMax, _) => (1.0 + c.mean_count) * sx,
        (Target::HawkesMax, _) => sx / (1.0 - c.mean_count),
        (Target::RenewalSum, JointMarkModel::IndependentLightCount { .. }) => {
            (1.0 + c.mean_count) * sx
        }
        (Target::RenewalSum, JointMarkModel::IndependentHeavyCount { count, .. }) => {
            count_tail(count)
        }
        (Target::RenewalSum, JointMarkModel::IndependentTailEquivalent { count, .. }) => {
            (1.0 + c.mean_count) * sx + count_tail(count)
        }
        (Target::RenewalSum, JointMarkModel::ComonotoneCount { .. }) => {
            mark.survival(x / (1.0 + c.mean_mark)) + c.mean_count * sx
        }
        (Target::HawkesSum, JointMarkModel::HawkesLightIntensity { .. }) => {
            sx / (1.0 - c.mean_count)
        }
        (
            Target::HawkesSum,
            JointMarkModel::HawkesComonotoneIntensity {
                target_mean_kappa, ..
            },
        ) => {
            let shift =
                c.sum_shift_hawkes.expect("hawkes constants") * target_mean_kappa / c.mean_mark;
            mark.survival(x / (1.0 + shift)) / (1.0 - c.mean_count)
        }
        _ => unreachable!("target kind checked against the model"),
    })
}

fn joint_shift(c: &ModelConstants, target: Target) -> f64 {
    match target {
        Target::HawkesSum => c.sum_shift_hawkes.expect("hawkes constants"),
        _ => c.mean_mark,
    }
}

fn has_closed_joint(model: &JointMarkModel) -> bool {
    !matches!(model, JointMarkModel::IndependentTailEquivalent { .. })
}

/// `P(X + shift * K > x)` for renewal regimes, `P(X + shift * kappa > x)` for
/// Hawkes regimes.
pub(crate) fn exact_joint_tail(model: &JointMarkModel, shift: f64, x: f64) -> Option<f64> {
    let c = shift;
    Some(match model {
        JointMarkModel::IndependentLightCount { mark, count_mean } => {
            poisson_count_joint_tail(mark, *count_mean, c, x)
        }
        JointMarkModel::IndependentHeavyCount { mark, count } => {
            ceil_count_joint_tail(mark, count, c, x)
        }
        JointMarkModel::IndependentTailEquivalent { .. } => return None,
        JointMarkModel::ComonotoneCount { mark } => {
            // X + c ceil(X) is nondecreasing in X; on (n-1, n] it covers
            // (n-1 + c n, n + c n]. Find the first interval reaching past x.
            if x < 0.0 {
                1.0
            } else {
                let n = (x / (1.0 + c)).floor() + 1.0;
                mark.survival((n - 1.0).max(x - c * n))
            }
        }
        JointMarkModel::HawkesComonotoneIntensity {
            mark,
            target_mean_kappa,
        } => {
            let factor = 1.0 + c * target_mean_kappa / mark.mean()?;
            mark.survival(x / factor)
        }
        JointMarkModel::HawkesLightIntensity {
            mark,
            target_mean_kappa,
            kappa_shape,
        } => {
            let scale = target_mean_kappa / kappa_shape.mean();
            match *kappa_shape {
                LightLaw::Constant { value } => mark.survival(x - c * scale * value),
                LightLaw::BoundedUniform { lo, hi } => {
                    let (a, b) = (scale * lo, scale * hi);
                    if c == 0.0 || b == a {
                        mark.survival(x - c * a)
                    } else {
                        mark.survival_integral(x - c * b, x - c * a) / (c * (b - a))
                    }
                }
                LightLaw::Exponential { rate } => {
                    // kappa ~ Exp(rate / scale); beyond u = x / c the mark term is 1
                    let r = rate / scale;
                    if c == 0.0 {
                        mark.survival(x)
                    } else {
                        let u_max = (x / c).max(0.0);
                        let f = |u: f64| mark.survival(x - c * u) * r * (-r * u).exp();
                        integrate(&f, 0.0, u_max, 1e-13) + (-r * u_max).exp()
                    }
                }
            }
        }
    })
}

fn poisson_count_joint_tail(mark: &MarkLaw, lambda: f64, c: f64, x: f64) -> f64 {
    if lambda == 0.0 {
        return mark.survival(x);
    }
    let k_max = (lambda + 40.0 * lambda.sqrt() + 60.0).ceil() as u64;
    let mut log_pmf = -lambda;
    let mut total = 0.0;
    for k in 0..=k_max {
        if k > 0 {
            log_pmf += lambda.ln() - (k as f64).ln();
        }
        total += log_pmf.exp() * mark.survival(x - c * k as f64);
    }
    total.min(1.0)
}

/// `P(X + c K > x)` for `K = ceil(Z)` independent of `X`. Finite sum: once
/// `P(X > x - c k) = 1` the remaining count mass `P(K >= k)` is added whole.
pub(crate) fn ceil_count_joint_tail(mark: &MarkLaw, count: &ParetoLaw, c: f64, x: f64) -> f64 {
    if c == 0.0 {
        return mark.survival(x);
    }
    let mut total = 0.0;
    let mut k = 1u64;
    loop {
        let sx = mark.survival(x - c * k as f64);
        if sx >= 1.0 {
            return (total + count.survival((k - 1) as f64)).min(1.0);
        }
        total += (count.survival((k - 1) as f64) - count.survival(k as f64)) * sx;
        k += 1;
    }
}

fn oracle_header(model: &JointMarkModel, target: Target, oracle: &OracleSettings) -> String {
    format!(
        "# cluster-tails oracle target={} seed={} sample_size={} model={}",
        target.name(),
        oracle.seed,
        oracle.sample_size,
        serde_json::to_string(model).expect("model serialises")
    )
}

/// Cache file name derived from model, target, sample size and seed.
pub fn oracle_cache_path(
    dir: &Path,
    model: &JointMarkModel,
    target: Target,
    oracle: &OracleSettings,
) -> PathBuf {
    let header = oracle_header(model, target, oracle);
    let digest = Sha256::digest(header.as_bytes());
    dir.join(format!(
        "{}-{}-n{}-s{}.csv",
        &hex::encode(digest)[..16],
        target.name(),
        oracle.sample_size,
        oracle.seed
    ))
}

fn load_or_build_oracle(
    model: &JointMarkModel,
    target: Target,
    shift: f64,
    oracle: &OracleSettings,
    dir: &Path,
    workers: &Workers,
) -> Result<(OracleTable, PathBuf)> {
    let header = oracle_header(model, target, oracle);
    let path = oracle_cache_path(dir, model, target, oracle);
    if let Some(table) = OracleTable::read(&path, &header)? {
        return Ok((table, path));
    }
    let values = oracle_sample(model, shift, oracle.sample_size, oracle.seed, workers)?;
    let table = OracleTable::from_sorted(&values);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    table.write(&path, &header)?;
    Ok((table, path))
}

/// Sorted sample of `X + shift * K` (or `kappa`).
pub(crate) fn oracle_sample(
    model: &JointMarkModel,
    shift: f64,
    n: u64,
    seed: u64,
    workers: &Workers,
) -> Result<Vec<f64>> {
    const BLOCK: u64 = 4096;
    let blocks = n.div_ceil(BLOCK);
    let chunks = workers.map_indexed(blocks, |b| {
        let mut rng = RngStream::new(seed, b);
        let len = BLOCK.min(n - b * BLOCK);
        Ok((0..len)
            .map(|_| match model.sample_joint(&mut rng) {
                MarkPair::Renewal { mark, count } => mark + shift * count as f64,
                MarkPair::Hawkes { mark, kappa } => mark + shift * kappa,
            })
            .collect::<Vec<f64>>())
    })?;
    let mut values: Vec<f64> = chunks.into_iter().flatten().collect();
    values.sort_unstable_by(f64::total_cmp);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pareto() -> MarkLaw {
        MarkLaw::pareto(1.0, 1.5)
    }

    fn light_count() -> JointMarkModel {
        JointMarkModel::IndependentLightCount {
            mark: pareto(),
            count_mean: 2.0,
        }
    }

    fn tail_equivalent() -> JointMarkModel {
        JointMarkModel::IndependentTailEquivalent {
            mark: pareto(),
            count: ParetoLaw {
                scale: 1.0,
                alpha: 1.5,
            },
        }
    }

    fn mc_tail(model: &JointMarkModel, shift: f64, x: f64, n: u64) -> f64 {
        let v = oracle_sample(model, shift, n, 77, &Workers::single()).unwrap();
        (v.len() - v.partition_point(|&s| s <= x)) as f64 / v.len() as f64
    }

    #[test]
    fn renewal_max_example() {
        let d = theoretical_denominator(&light_count(), Target::RenewalMax, 10.0).unwrap();
        assert!((d - 0.094_868).abs() < 1e-6, "{d}");
    }

    #[test]
    fn hawkes_max_example() {
        let model = JointMarkModel::HawkesLightIntensity {
            mark: pareto(),
            target_mean_kappa: 0.5,
            kappa_shape: LightLaw::BoundedUniform { lo: 0.5, hi: 1.5 },
        };
        let d = theoretical_denominator(&model, Target::HawkesMax, 10.0).unwrap();
        assert!((d - 0.063_246).abs() < 1e-6, "{d}");
    }

    #[test]
    fn hawkes_sum_comonotone_example() {
        let model = JointMarkModel::HawkesComonotoneIntensity {
            mark: pareto(),
            target_mean_kappa: 0.5,
        };
        let d = theoretical_denominator(&model, Target::HawkesSum, 10.0).unwrap();
        assert!((d - 2.0 * 5f64.powf(-1.5)).abs() < 1e-12);
        assert!((d - 0.17889).abs() < 1e-5);
        // Monte Carlo re-derivation of the joint term P(X + 6 kappa > 10)
        let p = mc_tail(&model, 6.0, 10.0, 2_000_000);
        let se = (p * (1.0 - p) / 2e6).sqrt();
        assert!((2.0 * p - d).abs() < 2.0 * 4.0 * se, "{p}");
    }

    #[test]
    fn target_must_match_model_kind() {
        let err = theoretical_denominator(&light_count(), Target::HawkesMax, 10.0).unwrap_err();
        assert!(matches!(err, Error::IncompatibleTarget { .. }));
    }

    #[test]
    fn tail_equivalent_needs_oracle() {
        let err =
            theoretical_denominator(&tail_equivalent(), Target::RenewalSum, 10.0).unwrap_err();
        assert!(matches!(err, Error::NoClosedForm { .. }));
        // the max target never needs it
        assert!(theoretical_denominator(&tail_equivalent(), Target::RenewalMax, 10.0).is_ok());
    }

    #[test]
    fn closed_joint_terms_match_monte_carlo() {
        let models = [
            (light_count(), 3.0),
            (
                JointMarkModel::IndependentHeavyCount {
                    mark: MarkLaw::Light(LightLaw::Exponential { rate: 1.0 }),
                    count: ParetoLaw {
                        scale: 1.0,
                        alpha: 1.5,
                    },
                },
                1.0,
            ),
            (JointMarkModel::ComonotoneCount { mark: pareto() }, 3.0),
            (
                JointMarkModel::HawkesLightIntensity {
                    mark: pareto(),
                    target_mean_kappa: 0.5,
                    kappa_shape: LightLaw::BoundedUniform { lo: 0.5, hi: 1.5 },
                },
                6.0,
            ),
            (
                JointMarkModel::HawkesLightIntensity {
                    mark: pareto(),
                    target_mean_kappa: 0.5,
                    kappa_shape: LightLaw::Exponential { rate: 1.0 },
                },
                6.0,
            ),
            (
                JointMarkModel::HawkesLightIntensity {
                    mark: MarkLaw::Light(LightLaw::BoundedUniform { lo: 0.5, hi: 2.0 }),
                    target_mean_kappa: 0.3,
                    kappa_shape: LightLaw::Constant { value: 1.0 },
                },
                1.25 / 0.7,
            ),
        ];
        let n = 1_000_000u64;
        for (model, shift) in &models {
            let sample = oracle_sample(model, *shift, n, 5, &Workers::single()).unwrap();
            for x in [1.5, 4.0, 9.5, 20.0, 60.0] {
                let exact = exact_joint_tail(model, *shift, x).unwrap();
                let above = sample.len() - sample.partition_point(|&v| v <= x);
                let p = above as f64 / n as f64;
                let se = (exact * (1.0 - exact) / n as f64).sqrt().max(1e-7);
                assert!(
                    (p - exact).abs() < 5.0 * se,
                    "{:?} x={x}: exact {exact} mc {p}",
                    model.regime()
                );
            }
        }
    }

    #[test]
    fn ceil_series_handles_zero_shift_and_small_x() {
        let count = ParetoLaw {
            scale: 1.0,
            alpha: 1.5,
        };
        assert_eq!(ceil_count_joint_tail(&pareto(), &count, 3.0, 0.5), 1.0);
        assert_eq!(
            ceil_count_joint_tail(&pareto(), &count, 0.0, 4.0),
            pareto().survival(4.0)
        );
    }

    #[test]
    fn leading_order_tail_is_asymptotic_to_the_denominator() {
        let dir = tempfile::tempdir().unwrap();
        let settings = OracleSettings {
            cache_dir: Some(dir.path().to_path_buf()),
            sample_size: 2_000_000,
            seed: 11,
        };
        let heavy = JointMarkModel::IndependentHeavyCount {
            mark: MarkLaw::Light(LightLaw::Exponential { rate: 1.0 }),
            count: ParetoLaw {
                scale: 1.0,
                alpha: 1.5,
            },
        };
        let hawkes_light = JointMarkModel::HawkesLightIntensity {
            mark: pareto(),
            target_mean_kappa: 0.5,
            kappa_shape: LightLaw::BoundedUniform { lo: 0.5, hi: 1.5 },
        };
        let hawkes_co = JointMarkModel::HawkesComonotoneIntensity {
            mark: pareto(),
            target_mean_kappa: 0.5,
        };
        let cases = [
            (light_count(), Target::RenewalSum, 0.02),
            (heavy, Target::RenewalSum, 0.02),
            (tail_equivalent(), Target::RenewalSum, 0.1),
            (
                JointMarkModel::ComonotoneCount { mark: pareto() },
                Target::RenewalSum,
                0.02,
            ),
            (hawkes_light, Target::HawkesSum, 0.02),
            (hawkes_co, Target::HawkesSum, 1e-12),
            (light_count(), Target::RenewalMax, 1e-12),
        ];
        let w = Workers::single();
        for (model, target, tol) in cases {
            let d = Denominator::new(&model, target, &settings, &w).unwrap();
            // far enough out for the asymptote, inside the oracle table for
            // the tail-equivalent case
            let x = if matches!(d.provenance(), Provenance::MonteCarloOracle { .. }) {
                2e3
            } else {
                1e6
            };
            let r = leading_order_tail(&model, target, x).unwrap() / d.eval(x);
            assert!((r - 1.0).abs() < tol, "{model:?} {target:?}: {r}");
        }
        // the exact heavy-count reference at integer x
        let heavy = JointMarkModel::IndependentHeavyCount {
            mark: MarkLaw::Light(LightLaw::Exponential { rate: 1.0 }),
            count: ParetoLaw {
                scale: 1.0,
                alpha: 1.5,
            },
        };
        let v = leading_order_tail(&heavy, Target::RenewalSum, 100.5).unwrap();
        assert!((v - 100f64.powf(-1.5)).abs() < 1e-15);
        assert!(leading_order_tail(&heavy, Target::HawkesSum, 1.0).is_err());
    }

    #[test]
    fn renewal_max_ratio_is_constant() {
        for model in [
            light_count(),
            JointMarkModel::ComonotoneCount { mark: pareto() },
            tail_equivalent(),
        ] {
            let c = model.constants().unwrap();
            for x in [1.5, 3.0, 10.0, 1e3, 1e6] {
                let d = theoretical_denominator(&model, Target::RenewalMax, x).unwrap();
                let r = d / pareto().survival(x);
                assert!((r - (1.0 + c.mean_count)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oracle_cache_round_trip_and_dual_route() {
        let dir = tempfile::tempdir().unwrap();
        let settings = OracleSettings {
            cache_dir: Some(dir.path().to_path_buf()),
            sample_size: 2_000_000,
            seed: 3,
        };
        let model = tail_equivalent();
        let w = Workers::single();
        let d1 = Denominator::new(&model, Target::RenewalSum, &settings, &w).unwrap();
        let Provenance::MonteCarloOracle { cache_file, .. } = d1.provenance().clone() else {
            panic!("expected oracle provenance")
        };
        assert!(cache_file.exists());
        let first = fs::read_to_string(&cache_file).unwrap();
        assert!(first
            .starts_with("# cluster-tails oracle target=renewal_sum seed=3 sample_size=2000000"));
        // second construction reads the cache and agrees exactly
        let d2 = Denominator::new(&model, Target::RenewalSum, &settings, &w).unwrap();
        let count = ParetoLaw {
            scale: 1.0,
            alpha: 1.5,
        };
        for x in [2.0, 10.0, 50.0, 300.0, 1500.0] {
            assert_eq!(d1.eval(x), d2.eval(x));
            // independent route: the exact finite series
            let exact = ceil_count_joint_tail(&pareto(), &count, 3.0, x);
            let mc = d1.joint_tail(x).unwrap();
            // four binomial standard errors plus 1% for grid interpolation
            let tol = 4.0 / (exact * settings.sample_size as f64).sqrt() + 0.01;
            assert!(
                (mc / exact - 1.0).abs() < tol,
                "x={x}: oracle {mc} series {exact}"
            );
        }
        // a different seed keys a different file
        let other = OracleSettings {
            seed: 4,
            ..settings.clone()
        };
        assert_ne!(
            oracle_cache_path(dir.path(), &model, Target::RenewalSum, &settings),
            oracle_cache_path(dir.path(), &model, Target::RenewalSum, &other)
        );
    }

    #[test]
    fn denominators_are_nonincreasing() {
        let dir = tempfile::tempdir().unwrap();
        let settings = OracleSettings {
            cache_dir: Some(dir.path().to_path_buf()),
            sample_size: 200_000,
            seed: 1,
        };
        let w = Workers::single();
        let cases = [
            (light_count(), Target::RenewalMax),
            (light_count(), Target::RenewalSum),
            (tail_equivalent(), Target::RenewalSum),
            (
                JointMarkModel::ComonotoneCount { mark: pareto() },
                Target::RenewalSum,
            ),
            (
                JointMarkModel::IndependentHeavyCount {
                    mark: MarkLaw::Light(LightLaw::Exponential { rate: 1.0 }),
                    count: ParetoLaw {
                        scale: 1.0,
                        alpha: 1.5,
                    },
                },
                Target::RenewalSum,
            ),
            (
                JointMarkModel::HawkesLightIntensity {
                    mark: pareto(),
                    target_mean_kappa: 0.5,
                    kappa_shape: LightLaw::Exponential { rate: 2.0 },
                },
                Target::HawkesSum,
            ),
            (
                JointMarkModel::HawkesComonotoneIntensity {
                    mark: pareto(),
                    target_mean_kappa: 0.5,
                },
                Target::HawkesMax,
            ),
        ];
        for (model, target) in cases {
            let d = Denominator::new(&model, target, &settings, &w).unwrap();
            let mut prev = f64::INFINITY;
            for i in 0..400 {
                let x = 0.5 * 1.03f64.powi(i);
                let v = d.eval(x);
                assert!(
                    v <= prev + 1e-15,
                    "{:?} {:?} at x={x}",
                    model.regime(),
                    target
                );
                prev = v;
            }
        }
    }
}
