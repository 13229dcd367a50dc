//! Exact samplers for one generic cluster and its max / sum functionals.
//!
//! Renewal clusters have `K` first-generation offspring at renewal times with
//! marks drawn independently of `(X, K)`. Hawkes clusters are generated
//! breadth first: every event with intensity `kappa` gets `Poisson(kappa)`
//! children, each drawing a fresh `(mark, kappa)` pair from the regime and an
//! `Exp(decay_rate)` displacement from its parent.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heavytail::{sample_poisson, JointMarkModel, LightLaw, MarkPair, ModelKind};
use crate::parallel::Workers;
use crate::rng::RngStream;

/// Anything that can seed clusters: the continuous regimes and the discrete
/// oracle models.
pub trait ClusterLaw: Sync {
    fn kind(&self) -> ModelKind;
    /// Immigrant (or Hawkes child) pair.
    fn draw_pair(&self, rng: &mut RngStream) -> MarkPair;
    /// Mark of a renewal offspring, independent of the immigrant pair.
    fn draw_offspring_mark(&self, rng: &mut RngStream) -> f64;
}

impl ClusterLaw for JointMarkModel {
    fn kind(&self) -> ModelKind {
        JointMarkModel::kind(self)
    }

    fn draw_pair(&self, rng: &mut RngStream) -> MarkPair {
        self.sample_joint(rng)
    }

    fn draw_offspring_mark(&self, rng: &mut RngStream) -> f64 {
        self.mark_law().sample(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalParams {
    pub waiting_law: LightLaw,
}

impl Default for RenewalParams {
    fn default() -> Self {
        Self {
            waiting_law: LightLaw::Exponential { rate: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HawkesParams {
    /// Fertility profile `kappa * beta * exp(-beta t)`.
    #[serde(default = "HawkesParams::default_decay")]
    pub decay_rate: f64,
    #[serde(default = "HawkesParams::default_limit")]
    pub max_cluster_events: usize,
}

impl HawkesParams {
    fn default_decay() -> f64 {
        1.0
    }

    fn default_limit() -> usize {
        1_000_000
    }
}

impl Default for HawkesParams {
    fn default() -> Self {
        Self {
            decay_rate: Self::default_decay(),
            max_cluster_events: Self::default_limit(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterParams {
    Renewal(RenewalParams),
    Hawkes(HawkesParams),
}

impl ClusterParams {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Renewal => ClusterParams::Renewal(RenewalParams::default()),
            ModelKind::Hawkes => ClusterParams::Hawkes(HawkesParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ClusterParams::Renewal(_) => ModelKind::Renewal,
            ClusterParams::Hawkes(_) => ModelKind::Hawkes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClusterParams::Renewal(p) => p
                .waiting_law
                .validate()
                .map_err(|e| e.within("waiting_law")),
            ClusterParams::Hawkes(p) => {
                if !(p.decay_rate.is_finite() && p.decay_rate > 0.0) {
                    return Err(Error::invalid("decay_rate", "must be > 0"));
                }
                if p.max_cluster_events == 0 {
                    return Err(Error::invalid("max_cluster_events", "must be >= 1"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffspringEvent {
    /// Time since the immigrant.
    pub time_offset: f64,
    pub mark: f64,
    pub generation: u32,
    /// Index of the parent event; `None` when the parent is the immigrant.
    pub parent: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub immigrant_mark: f64,
    pub events: Vec<OffspringEvent>,
    pub model_kind: ModelKind,
}

impl Cluster {
    /// Number of points including the immigrant.
    pub fn size(&self) -> usize {
        1 + self.events.len()
    }
}

fn require<L: ClusterLaw + ?Sized>(law: &L, expected: ModelKind) -> Result<()> {
    if law.kind() != expected {
        return Err(Error::WrongModelKind {
            expected: expected.name(),
            found: law.kind().name(),
        });
    }
    Ok(())
}

/// Walk a renewal cluster, returning the immigrant mark.
pub(crate) fn walk_renewal<L, V>(
    law: &L,
    params: &RenewalParams,
    rng: &mut RngStream,
    mut visit: V,
) -> f64
where
    L: ClusterLaw + ?Sized,
    V: FnMut(OffspringEvent),
{
    let MarkPair::Renewal { mark, count } = law.draw_pair(rng) else {
        unreachable!("renewal law drew a hawkes pair")
    };
    let mut t = 0.0;
    for _ in 0..count {
        t += params.waiting_law.sample(rng);
        let m = law.draw_offspring_mark(rng);
        visit(OffspringEvent {
            time_offset: t,
            mark: m,
            generation: 1,
            parent: None,
        });
    }
    mark
}

/// Walk a Hawkes cluster breadth first, returning the immigrant mark.
pub(crate) fn walk_hawkes<L, V>(
    law: &L,
    params: &HawkesParams,
    rng: &mut RngStream,
    mut visit: V,
) -> Result<f64>
where
    L: ClusterLaw + ?Sized,
    V: FnMut(OffspringEvent),
{
    let MarkPair::Hawkes { mark, kappa } = law.draw_pair(rng) else {
        unreachable!("hawkes law drew a renewal pair")
    };
    // (kappa, time, generation, own index; None for the immigrant)
    let mut queue: VecDeque<(f64, f64, u32, Option<u32>)> = VecDeque::new();
    queue.push_back((kappa, 0.0, 0, None));
    let mut emitted: usize = 0;
    while let Some((kappa, time, generation, index)) = queue.pop_front() {
        let children = sample_poisson(kappa, rng);
        for _ in 0..children {
            if emitted >= params.max_cluster_events {
                return Err(Error::ClusterOverflow {
                    replication: rng.stream_id(),
                    limit: params.max_cluster_events,
                });
            }
            let MarkPair::Hawkes { mark: m, kappa: k } = law.draw_pair(rng) else {
                unreachable!()
            };
            let t = time - rng.open_unit().ln() / params.decay_rate;
            visit(OffspringEvent {
                time_offset: t,
                mark: m,
                generation: generation + 1,
                parent: index,
            });
            queue.push_back((k, t, generation + 1, Some(emitted as u32)));
            emitted += 1;
        }
    }
    Ok(mark)
}

pub fn sample_renewal_cluster<L: ClusterLaw + ?Sized>(
    law: &L,
    params: &RenewalParams,
    rng: &mut RngStream,
) -> Result<Cluster> {
    require(law, ModelKind::Renewal)?;
    let mut events = Vec::new();
    let immigrant_mark = walk_renewal(law, params, rng, |e| events.push(e));
    Ok(Cluster {
        immigrant_mark,
        events,
        model_kind: ModelKind::Renewal,
    })
}

pub fn sample_hawkes_cluster<L: ClusterLaw + ?Sized>(
    law: &L,
    params: &HawkesParams,
    rng: &mut RngStream,
) -> Result<Cluster> {
    require(law, ModelKind::Hawkes)?;
    let mut events = Vec::new();
    let immigrant_mark = walk_hawkes(law, params, rng, |e| events.push(e))?;
    Ok(Cluster {
        immigrant_mark,
        events,
        model_kind: ModelKind::Hawkes,
    })
}

/// Sample a cluster of whichever kind `params` selects.
pub fn sample_cluster<L: ClusterLaw + ?Sized>(
    law: &L,
    params: &ClusterParams,
    rng: &mut RngStream,
) -> Result<Cluster> {
    match params {
        ClusterParams::Renewal(p) => sample_renewal_cluster(law, p, rng),
        ClusterParams::Hawkes(p) => sample_hawkes_cluster(law, p, rng),
    }
}

/// `H`: maximum mark in the cluster.
pub fn functional_max(cluster: &Cluster) -> f64 {
    cluster
        .events
        .iter()
        .map(|e| e.mark)
        .fold(cluster.immigrant_mark, f64::max)
}

/// `D`: sum of all marks in the cluster.
pub fn functional_sum(cluster: &Cluster) -> f64 {
    cluster.immigrant_mark + cluster.events.iter().map(|e| e.mark).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterFunctionals {
    pub max: f64,
    pub sum: f64,
    pub size: u64,
}

/// `(H, D, size)` of one cluster without materialising its events. Consumes
/// the random stream exactly like [`sample_cluster`].
pub fn cluster_functionals<L: ClusterLaw + ?Sized>(
    law: &L,
    params: &ClusterParams,
    rng: &mut RngStream,
) -> Result<ClusterFunctionals> {
    require(law, params.kind())?;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut size = 1u64;
    let visit = |e: OffspringEvent| {
        max = max.max(e.mark);
        sum += e.mark;
        size += 1;
    };
    let x = match params {
        ClusterParams::Renewal(p) => walk_renewal(law, p, rng, visit),
        ClusterParams::Hawkes(p) => walk_hawkes(law, p, rng, visit)?,
    };
    Ok(ClusterFunctionals {
        max: max.max(x),
        sum: x + sum,
        size,
    })
}

/// `n` i.i.d. functional triples; replication `i` uses stream `(seed, i)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FunctionalSample {
    pub max: Vec<f64>,
    pub sum: Vec<f64>,
    pub size: Vec<u64>,
}

impl FunctionalSample {
    pub fn len(&self) -> usize {
        self.max.len()
    }

    pub fn is_empty(&self) -> bool {
        self.max.is_empty()
    }

    pub fn mean_size(&self) -> f64 {
        self.size.iter().map(|&s| s as f64).sum::<f64>() / self.len() as f64
    }
}

pub fn batch_functionals<L: ClusterLaw + ?Sized>(
    law: &L,
    params: &ClusterParams,
    n: u64,
    seed: u64,
    workers: &Workers,
) -> Result<FunctionalSample> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    require(law, params.kind())?;
    let triples = workers.map_indexed(n, |i| {
        let mut rng = RngStream::new(seed, i);
        cluster_functionals(law, params, &mut rng)
    })?;
    let mut out = FunctionalSample {
        max: Vec::with_capacity(n as usize),
        sum: Vec::with_capacity(n as usize),
        size: Vec::with_capacity(n as usize),
    };
    for t in triples {
        out.max.push(t.max);
        out.sum.push(t.sum);
        out.size.push(t.size);
    }
    Ok(out)
}
