//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use cluster_tails_core::clusters::ClusterParams;
use cluster_tails_core::estimate::GridSpec;
use cluster_tails_core::heavytail::JointMarkModel;
use cluster_tails_core::ldp::SweepConfig;
use cluster_tails_core::oracle::{
    DiscreteAtom, DiscreteJointModel, DiscreteVariant, OffspringAtom,
};
use cluster_tails_core::process::WindowConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ClusterTails,
    TailRatio,
    Hill,
    Tauberian,
    OracleCompare,
    LdpMax,
    LdpSum,
    Leftover,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ClusterTails => "cluster-tails",
            Experiment::TailRatio => "tail-ratio",
            Experiment::Hill => "hill",
            Experiment::Tauberian => "tauberian",
            Experiment::OracleCompare => "oracle-compare",
            Experiment::LdpMax => "ldp-max",
            Experiment::LdpSum => "ldp-sum",
            Experiment::Leftover => "leftover",
        }
    }
}

/// Which sample a single-cluster experiment looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// Immigrant marks alone.
    Mark,
    Max,
    Sum,
}

/// Reference tail for `tail-ratio`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Full asymptotic denominator.
    #[default]
    Denominator,
    /// Joint term replaced by its power-law asymptote.
    LeadingOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSpec {
    #[serde(default = "DiscreteSpec::default_variant")]
    pub variant: DiscreteVariant,
    #[serde(default)]
    pub support: Option<Vec<DiscreteAtom>>,
    /// CSV with columns `x_value,k_value_or_kappa,probability`, relative to
    /// the config file.
    #[serde(default)]
    pub support_csv: Option<PathBuf>,
    #[serde(default)]
    pub offspring: Option<Vec<OffspringAtom>>,
    /// CSV with columns `mark,probability`.
    #[serde(default)]
    pub offspring_csv: Option<PathBuf>,
    /// Extra evaluation points besides the simulated values.
    #[serde(default)]
    pub x_values: Vec<f64>,
    #[serde(default)]
    pub bracket_tolerance: Option<f64>,
}

impl DiscreteSpec {
    fn default_variant() -> DiscreteVariant {
        DiscreteVariant::Renewal
    }

    pub fn build(&self) -> CliResult<DiscreteJointModel> {
        let support = match (&self.support, &self.support_csv) {
            (Some(s), None) => s.clone(),
            (None, Some(p)) => read_rows(p, "discrete.support_csv")?,
            _ => {
                return Err(CliError::config(
                    "discrete.support",
                    "exactly one of `support` and `support_csv` is required",
                ))
            }
        };
        let offspring = match (&self.offspring, &self.offspring_csv) {
            (Some(s), None) => s.clone(),
            (None, Some(p)) => read_rows(p, "discrete.offspring_csv")?,
            (None, None) => Vec::new(),
            _ => {
                return Err(CliError::config(
                    "discrete.offspring",
                    "give at most one of `offspring` and `offspring_csv`",
                ))
            }
        };
        DiscreteJointModel::build(support, offspring, self.variant)
            .map_err(|e| CliError::from_core(e, "discrete"))
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, field: &str) -> CliResult<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::config(field, format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::config(field, format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "SweepSpec::default_nu")]
    pub nu: f64,
    pub horizons: Vec<f64>,
    pub replications: u64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub x_levels: Option<usize>,
    #[serde(default)]
    pub pilot_replications: Option<u64>,
    #[serde(default)]
    pub min_exceedances: Option<usize>,
}

impl SweepSpec {
    fn default_nu() -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Mandatory: runs never fall back to a clock-derived seed.
    pub seed: u64,
    #[serde(default = "ExperimentConfig::default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<JointMarkModel>,
    #[serde(default)]
    pub cluster_params: Option<ClusterParams>,
    /// Number of simulated clusters (or marks).
    #[serde(default)]
    pub clusters: Option<u64>,
    #[serde(default)]
    pub functional: Option<Functional>,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub hill_k: Option<Vec<usize>>,
    #[serde(default)]
    pub s_grid: Option<Vec<f64>>,
    /// Tail index for the Tauberian check; defaults to the mark's.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub oracle_sample_size: Option<u64>,
    #[serde(default)]
    pub discrete: Option<DiscreteSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    fn default_workers() -> usize {
        1
    }

    /// Parse JSON, reporting the path of the offending field.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.to_string();
            if let Some(missing) = missing_field(&message) {
                path = if path == "." {
                    missing
                } else {
                    format!("{path}.{missing}")
                };
            } else if let Some(deeper) = refine_path(text, &path, &message) {
                path = deeper;
            }
            CliError::config(path, message)
        })
    }

    pub fn load(path: &Path) -> CliResult<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::config("<config>", format!("{}: {e}", path.display())))?;
        let text =
            std::str::from_utf8(&bytes).map_err(|e| CliError::config("<config>", e.to_string()))?;
        let mut cfg = Self::from_json(text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok((cfg, bytes))
    }

    /// Make CSV references absolute relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(d) = &mut self.discrete {
            for p in [&mut d.support_csv, &mut d.offspring_csv]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }

    pub fn model(&self) -> CliResult<&JointMarkModel> {
        self.model.as_ref().ok_or_else(|| {
            CliError::config(
                "model",
                format!("`{}` needs a model", self.experiment.name()),
            )
        })
    }

    pub fn clusters(&self) -> CliResult<u64> {
        match self.clusters {
            Some(0) => Err(CliError::config("clusters", "must be >= 1")),
            Some(n) => Ok(n),
            None => Err(CliError::config(
                "clusters",
                format!("`{}` needs `clusters`", self.experiment.name()),
            )),
        }
    }

    pub fn cluster_params(&self) -> CliResult<ClusterParams> {
        let kind = self.model()?.kind();
        let p = self
            .cluster_params
            .unwrap_or_else(|| ClusterParams::default_for(kind));
        p.validate()
            .map_err(|e| CliError::from_core(e, "cluster_params"))?;
        if p.kind() != kind {
            return Err(CliError::config(
                "cluster_params.kind",
                format!(
                    "{} parameters given for a {} model",
                    p.kind().name(),
                    kind.name()
                ),
            ));
        }
        Ok(p)
    }

    pub fn functional(&self) -> CliResult<Functional> {
        self.functional.ok_or_else(|| {
            CliError::config(
                "functional",
                format!("`{}` needs `functional`", self.experiment.name()),
            )
        })
    }

    pub fn sweep_config(&self) -> CliResult<SweepConfig> {
        let spec = self.sweep.as_ref().ok_or_else(|| {
            CliError::config(
                "sweep",
                format!("`{}` needs `sweep`", self.experiment.name()),
            )
        })?;
        let model = self.model()?.clone();
        let first = spec.horizons.first().copied().unwrap_or(1.0);
        let window = WindowConfig {
            model,
            cluster_params: self.cluster_params()?,
            nu: spec.nu,
            horizon: first,
        };
        let mut c = SweepConfig::new(window, spec.horizons.clone(), spec.replications);
        if let Some(g) = spec.gamma {
            c.gamma = g;
        }
        if let Some(l) = spec.x_levels {
            c.x_levels = l;
        }
        if let Some(p) = spec.pilot_replications {
            c.pilot_replications = p;
        }
        if let Some(m) = spec.min_exceedances {
            c.min_exceedances = m;
        }
        c.validate().map_err(|e| {
            let e = CliError::from_core(e, "");
            // window.* fields live at the top level or under sweep
            let field = e.field.as_deref().map(|f| {
                if let Some(rest) = f.strip_prefix("window.model") {
                    format!("model{rest}")
                } else if let Some(rest) = f.strip_prefix("window.cluster_params") {
                    format!("cluster_params{rest}")
                } else if let Some(rest) = f.strip_prefix("window.") {
                    format!("sweep.{rest}")
                } else {
                    format!("sweep.{f}")
                }
            });
            CliError { field, ..e }
        })?;
        Ok(c)
    }

    /// Check everything the chosen experiment needs without simulating.
    pub fn validate(&self) -> CliResult<()> {
        if self.workers == 0 {
            return Err(CliError::config("workers", "must be >= 1"));
        }
        if let Some(m) = &self.model {
            m.validate().map_err(|e| CliError::from_core(e, "model"))?;
            m.constants().map_err(|e| CliError::from_core(e, "model"))?;
        }
        if let Some(g) = &self.grid {
            g.validate().map_err(|e| CliError::from_core(e, "grid"))?;
        }
        match self.experiment {
            Experiment::ClusterTails => {
                self.cluster_params()?;
                self.clusters()?;
            }
            Experiment::TailRatio => {
                self.cluster_params()?;
                self.clusters()?;
                if self.functional()? == Functional::Mark {
                    return Err(CliError::config(
                        "functional",
                        "tail-ratio compares `max` or `sum`",
                    ));
                }
            }
            Experiment::Hill | Experiment::Tauberian => {
                self.cluster_params()?;
                self.clusters()?;
                self.functional()?;
                if self.experiment == Experiment::Hill {
                    if let Some(ks) = &self.hill_k {
                        if ks.is_empty() {
                            return Err(CliError::config("hill_k", "must not be empty"));
                        }
                    }
                } else if self.alpha.is_none() && self.model()?.mark_law().tail_index().is_none() {
                    return Err(CliError::config(
                        "alpha",
                        "light-tailed marks need an explicit `alpha`",
                    ));
                }
            }
            Experiment::OracleCompare => {
                self.clusters()?;
                let d = self.discrete.as_ref().ok_or_else(|| {
                    CliError::config("discrete", "`oracle-compare` needs `discrete`")
                })?;
                d.build()?;
            }
            Experiment::LdpMax | Experiment::LdpSum | Experiment::Leftover => {
                self.sweep_config()?;
            }
        }
        Ok(())
    }
}

const TAG_KEYS: [&str; 4] = ["regime", "law", "kind", "source"];

/// Internally tagged enums are buffered before deserialization, so the
/// reported path stops at the enum. Find the offending leaf below it: removing
/// the culprit changes the error, removing any other leaf does not.
fn refine_path(text: &str, path: &str, message: &str) -> Option<String> {
    let root: Value = serde_json::from_str(text).ok()?;
    let segments: Vec<&str> = if path == "." {
        Vec::new()
    } else {
        path.split('.').collect()
    };
    let base = segments.iter().try_fold(&root, |v, k| v.get(*k))?;
    if !base.is_object() {
        return None;
    }
    if let Some(variant) = message
        .strip_prefix("unknown variant `")
        .and_then(|m| m.split('`').next())
    {
        let mut found = None;
        visit_leaves(base, &mut Vec::new(), &mut |p, v| {
            if found.is_none() && v.as_str() == Some(variant) {
                found = Some(p.join("."));
            }
        });
        return found.map(|f| join_path(path, &f));
    }
    if let Some(key) = message
        .strip_prefix("unknown field `")
        .and_then(|m| m.split('`').next())
    {
        if !path.ends_with(key) {
            let mut found = None;
            visit_key(base, &mut Vec::new(), key, &mut found);
            return found.map(|f| join_path(path, &f));
        }
        return None;
    }
    let message = strip_position(message);
    let mut leaves = Vec::new();
    visit_leaves(base, &mut Vec::new(), &mut |p, _| leaves.push(p.join(".")));
    leaves.sort_by_key(|l| std::cmp::Reverse(l.matches('.').count()));
    for leaf in leaves {
        if TAG_KEYS.contains(&leaf.rsplit('.').next().unwrap_or("")) {
            continue;
        }
        let mut probe = root.clone();
        let full = join_path(path, &leaf);
        let mut keys: Vec<&str> = full.split('.').collect();
        let last = keys.pop()?;
        let parent = keys.iter().try_fold(&mut probe, |v, k| v.get_mut(*k))?;
        parent.as_object_mut()?.remove(last);
        let changed = match serde_json::from_value::<ExperimentConfig>(probe) {
            Ok(_) => true,
            Err(e) => strip_position(&e.to_string()) != message,
        };
        if changed {
            return Some(full);
        }
    }
    None
}

fn strip_position(message: &str) -> &str {
    match message.rfind(" at line ") {
        Some(i) => &message[..i],
        None => message,
    }
}

fn visit_key(v: &Value, prefix: &mut Vec<String>, key: &str, found: &mut Option<String>) {
    if let Some(map) = v.as_object() {
        for (k, child) in map {
            prefix.push(k.clone());
            if k == key && found.is_none() {
                *found = Some(prefix.join("."));
            }
            visit_key(child, prefix, key, found);
            prefix.pop();
        }
    }
}

fn join_path(parent: &str, child: &str) -> String {
    if parent == "." {
        child.to_string()
    } else {
        format!("{parent}.{child}")
    }
}

fn visit_leaves<'a>(
    v: &'a Value,
    prefix: &mut Vec<String>,
    f: &mut impl FnMut(&[String], &'a Value),
) {
    match v.as_object() {
        Some(map) => {
            for (k, child) in map {
                prefix.push(k.clone());
                visit_leaves(child, prefix, f);
                prefix.pop();
            }
        }
        None => f(prefix, v),
    }
}

fn missing_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    Some(rest.split('`').next()?.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ErrorKind;

    const RENEWAL: &str = r#"{
        "experiment": "tail-ratio",
        "seed": 7,
        "clusters": 1000,
        "functional": "max",
        "model": {"regime": "independent_light_count",
                  "mark": {"law": "pareto", "scale": 1.0, "alpha": 1.5},
                  "count_mean": 2.0}
    }"#;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::from_json(RENEWAL).unwrap();
        assert_eq!(c.experiment, Experiment::TailRatio);
        assert_eq!(c.workers, 1);
        c.validate().unwrap();
    }

    #[test]
    fn missing_seed_names_the_field() {
        let text = RENEWAL.replace("\"seed\": 7,", "");
        let e = ExperimentConfig::from_json(&text).unwrap_err();
        assert_eq!(e.kind, ErrorKind::ConfigError);
        assert_eq!(e.field.as_deref(), Some("seed"));
    }

    #[test]
    fn nested_type_errors_carry_paths() {
        let text = RENEWAL.replace("\"alpha\": 1.5", "\"alpha\": \"big\"");
        let e = ExperimentConfig::from_json(&text).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("model.mark.alpha"));
        let text = RENEWAL.replace("\"alpha\": 1.5", "\"alpha\": 1.5, \"shape\": 2");
        assert_eq!(
            ExperimentConfig::from_json(&text)
                .unwrap_err()
                .field
                .as_deref(),
            Some("model.mark.shape")
        );
        let text = RENEWAL.replace("\"clusters\"", "\"clusterz\"");
        assert_eq!(
            ExperimentConfig::from_json(&text).unwrap_err().kind,
            ErrorKind::ConfigError
        );
    }

    #[test]
    fn supercritical_model_is_a_model_error() {
        let text = r#"{"experiment": "cluster-tails", "seed": 1, "clusters": 10,
            "model": {"regime": "hawkes_light_intensity",
                      "mark": {"law": "pareto", "scale": 1.0, "alpha": 1.5},
                      "target_mean_kappa": 1.2}}"#;
        let e = ExperimentConfig::from_json(text)
            .unwrap()
            .validate()
            .unwrap_err();
        assert_eq!(e.kind, ErrorKind::ModelError);
        assert_eq!(e.field.as_deref(), Some("model.target_mean_kappa"));
    }

    #[test]
    fn experiment_requirements() {
        let mut c = ExperimentConfig::from_json(RENEWAL).unwrap();
        c.functional = Some(Functional::Mark);
        assert_eq!(
            c.validate().unwrap_err().field.as_deref(),
            Some("functional")
        );
        c.experiment = Experiment::LdpMax;
        assert_eq!(c.validate().unwrap_err().field.as_deref(), Some("sweep"));
        c.sweep = Some(SweepSpec {
            nu: 1.0,
            horizons: vec![10.0],
            replications: 10,
            gamma: None,
            x_levels: None,
            pilot_replications: None,
            min_exceedances: None,
        });
        assert_eq!(
            c.validate().unwrap_err().field.as_deref(),
            Some("sweep.replications")
        );
        c.sweep.as_mut().unwrap().replications = 10_000;
        c.sweep.as_mut().unwrap().nu = 0.0;
        assert_eq!(c.validate().unwrap_err().field.as_deref(), Some("sweep.nu"));
    }
}
