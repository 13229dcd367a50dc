use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::laws::{LightLaw, MarkLaw, ParetoLaw};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Renewal clusters carry an offspring count `K`; Hawkes clusters an offspring
/// intensity `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Renewal,
    Hawkes,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Renewal => "renewal",
            ModelKind::Hawkes => "hawkes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    IndependentLightCount,
    IndependentHeavyCount,
    IndependentTailEquivalent,
    ComonotoneCount,
    HawkesLightIntensity,
    HawkesComonotoneIntensity,
}

fn default_kappa_shape() -> LightLaw {
    LightLaw::BoundedUniform { lo: 0.5, hi: 1.5 }
}

/// Law of the immigrant pair `(X, K)` (renewal) or `(X, kappa)` (Hawkes).
///
/// * `IndependentLightCount`: `K ~ Poisson(count_mean)` independent of `X`.
/// * `IndependentHeavyCount`: `K = ceil(Z)`, `Z ~ count`, independent of a
///   light-tailed `X`.
/// * `IndependentTailEquivalent`: as above with `X` and `Z` both Pareto.
/// * `ComonotoneCount`: `K = ceil(X)`.
/// * `HawkesLightIntensity`: `kappa = m V / E[V]`, `V ~ kappa_shape`
///   independent of `X`, `m = target_mean_kappa`.
/// * `HawkesComonotoneIntensity`: `kappa = m X / E[X]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case", deny_unknown_fields)]
pub enum JointMarkModel {
    IndependentLightCount {
        mark: MarkLaw,
        count_mean: f64,
    },
    IndependentHeavyCount {
        mark: MarkLaw,
        count: ParetoLaw,
    },
    IndependentTailEquivalent {
        mark: MarkLaw,
        count: ParetoLaw,
    },
    ComonotoneCount {
        mark: MarkLaw,
    },
    HawkesLightIntensity {
        mark: MarkLaw,
        target_mean_kappa: f64,
        #[serde(default = "default_kappa_shape")]
        kappa_shape: LightLaw,
    },
    HawkesComonotoneIntensity {
        mark: MarkLaw,
        target_mean_kappa: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkPair {
    Renewal { mark: f64, count: u64 },
    Hawkes { mark: f64, kappa: f64 },
}

impl MarkPair {
    pub fn mark(&self) -> f64 {
        match *self {
            MarkPair::Renewal { mark, .. } | MarkPair::Hawkes { mark, .. } => mark,
        }
    }
}

/// Exact analytic constants of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelConstants {
    /// `E[X]`
    pub mean_mark: f64,
    /// `E[K]` (renewal) or `E[kappa]` (Hawkes)
    pub mean_count: f64,
    /// `1 + E[K]`, renewal only
    pub max_constant_renewal: Option<f64>,
    /// `1 / (1 - E[kappa])`, Hawkes only
    pub max_constant_hawkes: Option<f64>,
    /// `E[X] / (1 - E[kappa])`, Hawkes only
    pub sum_shift_hawkes: Option<f64>,
}

impl ModelConstants {
    /// Expected number of events of one cluster, immigrant included.
    pub fn mean_cluster_size(&self) -> f64 {
        self.max_constant_renewal
            .or(self.max_constant_hawkes)
            .expect("one of the two constants is always set")
    }

    /// `E[N_T]` ignoring boundary truncation: `(1 + E[K]) nu T` or
    /// `nu T / (1 - E[kappa])`.
    pub fn mean_window_events(&self, nu: f64, horizon: f64) -> f64 {
        self.mean_cluster_size() * nu * horizon
    }
}

pub(crate) fn sample_poisson(mean: f64, rng: &mut RngStream) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive Poisson mean");
    d.sample(rng) as u64
}

impl JointMarkModel {
    pub fn regime(&self) -> Regime {
        match self {
            JointMarkModel::IndependentLightCount { .. } => Regime::IndependentLightCount,
            JointMarkModel::IndependentHeavyCount { .. } => Regime::IndependentHeavyCount,
            JointMarkModel::IndependentTailEquivalent { .. } => Regime::IndependentTailEquivalent,
            JointMarkModel::ComonotoneCount { .. } => Regime::ComonotoneCount,
            JointMarkModel::HawkesLightIntensity { .. } => Regime::HawkesLightIntensity,
            JointMarkModel::HawkesComonotoneIntensity { .. } => Regime::HawkesComonotoneIntensity,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.regime() {
            Regime::HawkesLightIntensity | Regime::HawkesComonotoneIntensity => ModelKind::Hawkes,
            _ => ModelKind::Renewal,
        }
    }

    pub fn mark_law(&self) -> &MarkLaw {
        match self {
            JointMarkModel::IndependentLightCount { mark, .. }
            | JointMarkModel::IndependentHeavyCount { mark, .. }
            | JointMarkModel::IndependentTailEquivalent { mark, .. }
            | JointMarkModel::ComonotoneCount { mark }
            | JointMarkModel::HawkesLightIntensity { mark, .. }
            | JointMarkModel::HawkesComonotoneIntensity { mark, .. } => mark,
        }
    }

    /// Check parameters; field paths in errors are relative to the model.
    pub fn validate(&self) -> Result<()> {
        self.mark_law().validate().map_err(|e| e.within("mark"))?;
        match self {
            JointMarkModel::IndependentLightCount { count_mean, .. } => {
                if !(count_mean.is_finite() && *count_mean >= 0.0) {
                    return Err(Error::invalid(
                        "count_mean",
                        format!("must be finite and >= 0, got {count_mean}"),
                    ));
                }
            }
            JointMarkModel::IndependentHeavyCount { count, .. }
            | JointMarkModel::IndependentTailEquivalent { count, .. } => {
                count.validate().map_err(|e| e.within("count"))?;
            }
            JointMarkModel::ComonotoneCount { .. } => {}
            JointMarkModel::HawkesLightIntensity {
                target_mean_kappa,
                kappa_shape,
                ..
            } => {
                check_kappa_mean(*target_mean_kappa)?;
                kappa_shape
                    .validate()
                    .map_err(|e| e.within("kappa_shape"))?;
            }
            JointMarkModel::HawkesComonotoneIntensity {
                target_mean_kappa, ..
            } => check_kappa_mean(*target_mean_kappa)?,
        }
        Ok(())
    }

    pub fn sample_joint(&self, rng: &mut RngStream) -> MarkPair {
        let mark = self.mark_law().sample(rng);
        match self {
            JointMarkModel::IndependentLightCount { count_mean, .. } => MarkPair::Renewal {
                mark,
                count: sample_poisson(*count_mean, rng),
            },
            JointMarkModel::IndependentHeavyCount { count, .. }
            | JointMarkModel::IndependentTailEquivalent { count, .. } => MarkPair::Renewal {
                mark,
                count: count.sample(rng).ceil() as u64,
            },
            JointMarkModel::ComonotoneCount { .. } => MarkPair::Renewal {
                mark,
                count: mark.ceil() as u64,
            },
            JointMarkModel::HawkesLightIntensity {
                target_mean_kappa,
                kappa_shape,
                ..
            } => MarkPair::Hawkes {
                mark,
                kappa: target_mean_kappa * kappa_shape.sample(rng) / kappa_shape.mean(),
            },
            JointMarkModel::HawkesComonotoneIntensity {
                mark: law,
                target_mean_kappa,
            } => MarkPair::Hawkes {
                mark,
                kappa: mark * target_mean_kappa / law.mean().unwrap_or(f64::INFINITY),
            },
        }
    }

    /// Analytic constants. Fails on infinite means or supercritical Hawkes
    /// intensities.
    pub fn constants(&self) -> Result<ModelConstants> {
        self.validate()?;
        self.mark_law()
            .validate_finite_mean()
            .map_err(|e| e.within("mark"))?;
        let mean_mark = self.mark_law().mean().expect("finite mean checked");
        let mean_count = match self {
            JointMarkModel::IndependentLightCount { count_mean, .. } => *count_mean,
            JointMarkModel::IndependentHeavyCount { count, .. }
            | JointMarkModel::IndependentTailEquivalent { count, .. } => {
                count.expected_ceil().ok_or_else(|| Error::InfiniteMean {
                    field: "count.alpha".into(),
                    alpha: count.alpha,
                })?
            }
            JointMarkModel::ComonotoneCount { mark } => {
                mark.expected_ceil().expect("finite mean checked")
            }
            JointMarkModel::HawkesLightIntensity {
                target_mean_kappa, ..
            }
            | JointMarkModel::HawkesComonotoneIntensity {
                target_mean_kappa, ..
            } => *target_mean_kappa,
        };
        Ok(match self.kind() {
            ModelKind::Renewal => ModelConstants {
                mean_mark,
                mean_count,
                max_constant_renewal: Some(1.0 + mean_count),
                max_constant_hawkes: None,
                sum_shift_hawkes: None,
            },
            ModelKind::Hawkes => ModelConstants {
                mean_mark,
                mean_count,
                max_constant_renewal: None,
                max_constant_hawkes: Some(1.0 / (1.0 - mean_count)),
                sum_shift_hawkes: Some(mean_mark / (1.0 - mean_count)),
            },
        })
    }
}

fn check_kappa_mean(m: f64) -> Result<()> {
    if !m.is_finite() || m < 0.0 {
        return Err(Error::invalid(
            "target_mean_kappa",
            format!("must be finite and >= 0, got {m}"),
        ));
    }
    if m >= 1.0 {
        return Err(Error::SupercriticalModel {
            field: "target_mean_kappa".into(),
            mean_kappa: m,
        });
    }
    Ok(())
}

/// Free-function form of [`JointMarkModel::sample_joint`].
pub fn sample_joint(model: &JointMarkModel, rng: &mut RngStream) -> MarkPair {
    model.sample_joint(rng)
}

/// Free-function form of [`JointMarkModel::constants`].
pub fn model_constants(model: &JointMarkModel) -> Result<ModelConstants> {
    model.constants()
}
