use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::hurwitz_zeta;

/// Pareto law with survival `(scale / x)^alpha` above `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParetoLaw {
    pub scale: f64,
    pub alpha: f64,
}

impl ParetoLaw {
    pub fn new(scale: f64, alpha: f64) -> Result<Self> {
        let law = Self { scale, alpha };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid(
                "scale",
                format!("must be > 0, got {}", self.scale),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(
                "alpha",
                format!("must be > 0, got {}", self.alpha),
            ));
        }
        Ok(())
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= self.scale {
            1.0
        } else {
            (self.scale / x).powf(self.alpha)
        }
    }

    /// Quantile at level `p` in [0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        self.scale * (1.0 - p).powf(-1.0 / self.alpha)
    }

    pub fn mean(&self) -> Option<f64> {
        (self.alpha > 1.0).then(|| self.alpha * self.scale / (self.alpha - 1.0))
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.scale * rng.open_unit().powf(-1.0 / self.alpha)
    }

    /// `E[ceil(Z)] = sum_{n >= 0} P(Z > n)`; finite iff `alpha > 1`.
    pub fn expected_ceil(&self) -> Option<f64> {
        if self.alpha <= 1.0 {
            return None;
        }
        let first = self.scale.floor() + 1.0;
        Some(first + self.scale.powf(self.alpha) * hurwitz_zeta(self.alpha, first))
    }

    pub(crate) fn survival_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let flat = (b.min(self.scale) - a).max(0.0);
        let lo = a.max(self.scale);
        if b <= lo {
            return flat;
        }
        let s = self.scale.powf(self.alpha);
        let tail = if (self.alpha - 1.0).abs() < 1e-12 {
            s * (b / lo).ln()
        } else {
            s * (b.powf(1.0 - self.alpha) - lo.powf(1.0 - self.alpha)) / (1.0 - self.alpha)
        };
        flat + tail
    }
}

/// Laws with every moment finite: waiting times, light marks, kappa shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum LightLaw {
    Exponential { rate: f64 },
    Constant { value: f64 },
    BoundedUniform { lo: f64, hi: f64 },
}

impl LightLaw {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be > 0, got {v}")))
            }
        };
        match *self {
            LightLaw::Exponential { rate } => positive("rate", rate),
            LightLaw::Constant { value } => positive("value", value),
            LightLaw::BoundedUniform { lo, hi } => {
                positive("lo", lo)?;
                positive("hi", hi)?;
                if hi <= lo {
                    return Err(Error::invalid(
                        "hi",
                        format!("must exceed lo = {lo}, got {hi}"),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            LightLaw::Exponential { rate } => 1.0 / rate,
            LightLaw::Constant { value } => value,
            LightLaw::BoundedUniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            LightLaw::Exponential { rate } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-rate * x).exp()
                }
            }
            LightLaw::Constant { value } => {
                if x < value {
                    1.0
                } else {
                    0.0
                }
            }
            LightLaw::BoundedUniform { lo, hi } => {
                if x <= lo {
                    1.0
                } else if x >= hi {
                    0.0
                } else {
                    (hi - x) / (hi - lo)
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            LightLaw::Exponential { rate } => -(1.0 - p).ln() / rate,
            LightLaw::Constant { value } => value,
            LightLaw::BoundedUniform { lo, hi } => lo + p * (hi - lo),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            LightLaw::Exponential { rate } => -rng.open_unit().ln() / rate,
            LightLaw::Constant { value } => value,
            LightLaw::BoundedUniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    pub fn expected_ceil(&self) -> f64 {
        match *self {
            LightLaw::Exponential { rate } => 1.0 / (1.0 - (-rate).exp()),
            LightLaw::Constant { value } => value.ceil(),
            LightLaw::BoundedUniform { hi, .. } => (0..=hi.ceil() as u64)
                .map(|n| self.survival(n as f64))
                .sum(),
        }
    }

    pub(crate) fn survival_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match *self {
            LightLaw::Exponential { rate } => {
                let flat = (b.min(0.0) - a).max(0.0);
                let lo = a.max(0.0);
                if b <= lo {
                    flat
                } else {
                    flat + ((-rate * lo).exp() - (-rate * b).exp()) / rate
                }
            }
            LightLaw::Constant { value } => (b.min(value) - a).max(0.0),
            LightLaw::BoundedUniform { lo, hi } => {
                let flat = (b.min(lo) - a).max(0.0);
                let l = a.max(lo);
                let r = b.min(hi);
                let ramp = if r > l {
                    // antiderivative of (hi - y) / (hi - lo)
                    let g = |y: f64| -(hi - y) * (hi - y) / (2.0 * (hi - lo));
                    g(r) - g(l)
                } else {
                    0.0
                };
                flat + ramp
            }
        }
    }
}

/// Marginal law of the marks `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "MarkLawRepr", into = "MarkLawRepr")]
pub enum MarkLaw {
    Pareto(ParetoLaw),
    Light(LightLaw),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
enum MarkLawRepr {
    Pareto { scale: f64, alpha: f64 },
    Exponential { rate: f64 },
    Constant { value: f64 },
    BoundedUniform { lo: f64, hi: f64 },
}

impl From<MarkLawRepr> for MarkLaw {
    fn from(r: MarkLawRepr) -> Self {
        match r {
            MarkLawRepr::Pareto { scale, alpha } => MarkLaw::Pareto(ParetoLaw { scale, alpha }),
            MarkLawRepr::Exponential { rate } => MarkLaw::Light(LightLaw::Exponential { rate }),
            MarkLawRepr::Constant { value } => MarkLaw::Light(LightLaw::Constant { value }),
            MarkLawRepr::BoundedUniform { lo, hi } => {
                MarkLaw::Light(LightLaw::BoundedUniform { lo, hi })
            }
        }
    }
}

impl From<MarkLaw> for MarkLawRepr {
    fn from(m: MarkLaw) -> Self {
        match m {
            MarkLaw::Pareto(ParetoLaw { scale, alpha }) => MarkLawRepr::Pareto { scale, alpha },
            MarkLaw::Light(LightLaw::Exponential { rate }) => MarkLawRepr::Exponential { rate },
            MarkLaw::Light(LightLaw::Constant { value }) => MarkLawRepr::Constant { value },
            MarkLaw::Light(LightLaw::BoundedUniform { lo, hi }) => {
                MarkLawRepr::BoundedUniform { lo, hi }
            }
        }
    }
}

impl From<ParetoLaw> for MarkLaw {
    fn from(p: ParetoLaw) -> Self {
        MarkLaw::Pareto(p)
    }
}

impl From<LightLaw> for MarkLaw {
    fn from(l: LightLaw) -> Self {
        MarkLaw::Light(l)
    }
}

impl MarkLaw {
    pub fn pareto(scale: f64, alpha: f64) -> Self {
        MarkLaw::Pareto(ParetoLaw { scale, alpha })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MarkLaw::Pareto(p) => p.validate(),
            MarkLaw::Light(l) => l.validate(),
        }
    }

    /// Validation plus `E[X] < inf`.
    pub fn validate_finite_mean(&self) -> Result<()> {
        self.validate()?;
        if let MarkLaw::Pareto(p) = self {
            if p.alpha <= 1.0 {
                return Err(Error::InfiniteMean {
                    field: "alpha".into(),
                    alpha: p.alpha,
                });
            }
        }
        Ok(())
    }

    pub fn survival(&self, x: f64) -> f64 {
        match self {
            MarkLaw::Pareto(p) => p.survival(x),
            MarkLaw::Light(l) => l.survival(x),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            MarkLaw::Pareto(law) => law.quantile(p),
            MarkLaw::Light(law) => law.quantile(p),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            MarkLaw::Pareto(p) => p.mean(),
            MarkLaw::Light(l) => Some(l.mean()),
        }
    }

    pub fn expected_ceil(&self) -> Option<f64> {
        match self {
            MarkLaw::Pareto(p) => p.expected_ceil(),
            MarkLaw::Light(l) => Some(l.expected_ceil()),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self {
            MarkLaw::Pareto(p) => p.sample(rng),
            MarkLaw::Light(l) => l.sample(rng),
        }
    }

    pub fn tail_index(&self) -> Option<f64> {
        match self {
            MarkLaw::Pareto(p) => Some(p.alpha),
            MarkLaw::Light(_) => None,
        }
    }

    /// `int_a^b P(X > y) dy`.
    pub(crate) fn survival_integral(&self, a: f64, b: f64) -> f64 {
        match self {
            MarkLaw::Pareto(p) => p.survival_integral(a, b),
            MarkLaw::Light(l) => l.survival_integral(a, b),
        }
    }
}

/// Free-function form of [`ParetoLaw::survival`].
pub fn pareto_survival(law: &ParetoLaw, x: f64) -> f64 {
    law.survival(x)
}

/// Free-function form of [`ParetoLaw::sample`].
pub fn sample_pareto(law: &ParetoLaw, rng: &mut RngStream) -> f64 {
    law.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ParetoLaw {
        ParetoLaw::new(1.0, 1.5).unwrap()
    }

    #[test]
    fn pareto_survival_examples() {
        let law = unit();
        assert!((pareto_survival(&law, 2.0) - 0.353_553_4).abs() < 1e-7);
        assert_eq!(pareto_survival(&law, 1.0), 1.0);
        assert_eq!(pareto_survival(&law, 0.5), 1.0);
    }

    #[test]
    fn pareto_rejects_bad_parameters() {
        assert!(matches!(
            ParetoLaw::new(0.0, 1.5),
            Err(Error::InvalidParameter { ref field, .. }) if field == "scale"
        ));
        assert!(ParetoLaw::new(1.0, -1.0).is_err());
    }

    #[test]
    fn sampler_median_and_support() {
        let law = unit();
        let mut rng = RngStream::new(11, 0);
        let mut xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_pareto(&law, &mut rng))
            .collect();
        assert!(xs.iter().all(|&x| x >= 1.0));
        xs.sort_by(f64::total_cmp);
        let median = xs[xs.len() / 2];
        let expected = 2f64.powf(2.0 / 3.0);
        assert!((median / expected - 1.0).abs() < 0.01, "median {median}");
    }

    #[test]
    fn expected_ceil_of_unit_pareto_is_one_plus_zeta() {
        // 1 + zeta(3/2)
        let v = unit().expected_ceil().unwrap();
        assert!((v - 3.612_375_348_685_488).abs() < 1e-9, "{v}");
        assert!(ParetoLaw::new(1.0, 0.9).unwrap().expected_ceil().is_none());
    }

    #[test]
    fn expected_ceil_matches_brute_force_for_fractional_scale() {
        let law = ParetoLaw::new(2.5, 2.2).unwrap();
        // direct summation with an integral tail correction
        let n_max = 2_000_000u64;
        let direct: f64 = (0..n_max).map(|n| law.survival(n as f64)).sum();
        let s = law.scale.powf(law.alpha);
        let tail = s * (n_max as f64 - 0.5).powf(1.0 - law.alpha) / (law.alpha - 1.0);
        assert!((law.expected_ceil().unwrap() - (direct + tail)).abs() < 1e-8);
    }

    #[test]
    fn light_expected_ceil_brute_force() {
        for law in [
            LightLaw::Exponential { rate: 0.7 },
            LightLaw::Constant { value: 2.3 },
            LightLaw::BoundedUniform { lo: 0.5, hi: 3.7 },
        ] {
            let direct: f64 = (0..10_000).map(|n| law.survival(n as f64)).sum();
            assert!((law.expected_ceil() - direct).abs() < 1e-9, "{law:?}");
        }
    }

    #[test]
    fn survival_integrals_match_quadrature() {
        let laws = [
            MarkLaw::pareto(1.0, 1.5),
            MarkLaw::pareto(2.0, 1.0),
            MarkLaw::Light(LightLaw::Exponential { rate: 2.0 }),
            MarkLaw::Light(LightLaw::Constant { value: 1.5 }),
            MarkLaw::Light(LightLaw::BoundedUniform { lo: 0.5, hi: 2.5 }),
        ];
        for law in laws {
            for (a, b) in [(-1.0, 0.3), (0.2, 3.0), (1.2, 40.0), (5.0, 6.0)] {
                let n = 200_000;
                let h = (b - a) / n as f64;
                let mid: f64 = (0..n)
                    .map(|i| law.survival(a + (i as f64 + 0.5) * h))
                    .sum::<f64>()
                    * h;
                let exact = law.survival_integral(a, b);
                // a jump in the survival function costs the midpoint rule up to h
                assert!(
                    (exact - mid).abs() < 1e-5 * (1.0 + exact) + h,
                    "{law:?} [{a},{b}] {exact} vs {mid}"
                );
            }
        }
    }

    #[test]
    fn mark_law_json_shape() {
        let m: MarkLaw =
            serde_json::from_str(r#"{"law":"pareto","scale":1.0,"alpha":1.5}"#).unwrap();
        assert_eq!(m, MarkLaw::pareto(1.0, 1.5));
        let e: MarkLaw = serde_json::from_str(r#"{"law":"exponential","rate":1.0}"#).unwrap();
        assert_eq!(e, MarkLaw::Light(LightLaw::Exponential { rate: 1.0 }));
        let back = serde_json::to_string(&m).unwrap();
        assert!(back.contains("\"law\":\"pareto\""));
    }

    #[test]
    fn infinite_mean_is_flagged() {
        let err = MarkLaw::pareto(1.0, 0.8)
            .validate_finite_mean()
            .unwrap_err();
        assert!(matches!(err, Error::InfiniteMean { .. }));
    }
}
