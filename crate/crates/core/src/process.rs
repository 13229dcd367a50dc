//! The marked process on a window `[0, T]`.
//!
//! Immigrants arrive as a Poisson process of rate `nu` on `[0, T]`; each
//! starts an independent cluster. Events landing after `T` are left over.
//! Clusters born before time 0 are not simulated.

use serde::{Deserialize, Serialize};

use crate::clusters::{walk_hawkes, walk_renewal, ClusterLaw, ClusterParams, OffspringEvent};
use crate::error::{Error, Result};
use crate::heavytail::{sample_poisson, JointMarkModel};
use crate::parallel::Workers;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub model: JointMarkModel,
    pub cluster_params: ClusterParams,
    pub nu: f64,
    pub horizon: f64,
}

impl WindowConfig {
    /// Default cluster parameters for the model's kind.
    pub fn new(model: JointMarkModel, nu: f64, horizon: f64) -> Self {
        let cluster_params = ClusterParams::default_for(model.kind());
        Self {
            model,
            cluster_params,
            nu,
            horizon,
        }
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| e.within("model"))?;
        self.cluster_params
            .validate()
            .map_err(|e| e.within("cluster_params"))?;
        if self.cluster_params.kind() != self.model.kind() {
            return Err(Error::WrongModelKind {
                expected: self.model.kind().name(),
                found: self.cluster_params.kind().name(),
            });
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::invalid("nu", "must be > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon", "must be > 0"));
        }
        Ok(())
    }

    /// Mean number of events generated by clusters started in the window,
    /// ignoring boundary truncation.
    pub fn expected_events(&self) -> Result<f64> {
        let c = self.model.constants()?;
        Ok(c.mean_window_events(self.nu, self.horizon))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindowStats {
    /// `N_T`, immigrants included.
    pub n_events: u64,
    /// `J_T`: events of started clusters falling after `T`.
    pub j_leftover: u64,
    /// `S_T`.
    pub sum_in_window: f64,
    pub max_in_window: f64,
    /// `epsilon_T`: marks of the left-over events.
    pub leftover_sum: f64,
    /// `C_T`.
    pub n_clusters: u64,
    /// Sum of the cluster sums `D_i` over started clusters.
    pub cluster_sum_total: f64,
    /// Largest cluster maximum `H_i` over started clusters.
    pub cluster_max: f64,
}

/// One window for an arbitrary cluster law.
pub fn simulate_window_with<L: ClusterLaw + ?Sized>(
    law: &L,
    params: &ClusterParams,
    nu: f64,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<WindowStats> {
    let clusters = sample_poisson(nu * horizon, rng);
    let mut s = WindowStats {
        n_clusters: clusters,
        ..WindowStats::default()
    };
    for _ in 0..clusters {
        let start = horizon * rng.open_unit();
        let (mut n_in, mut j, mut sum_in, mut max_in, mut left, mut csum, mut cmax) =
            (0u64, 0u64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let visit = |e: OffspringEvent| {
            csum += e.mark;
            cmax = cmax.max(e.mark);
            if start + e.time_offset <= horizon {
                n_in += 1;
                sum_in += e.mark;
                max_in = max_in.max(e.mark);
            } else {
                j += 1;
                left += e.mark;
            }
        };
        let x = match params {
            ClusterParams::Renewal(p) => walk_renewal(law, p, rng, visit),
            ClusterParams::Hawkes(p) => walk_hawkes(law, p, rng, visit)?,
        };
        s.n_events += 1 + n_in;
        s.j_leftover += j;
        s.sum_in_window += x + sum_in;
        s.max_in_window = s.max_in_window.max(x).max(max_in);
        s.leftover_sum += left;
        s.cluster_sum_total += x + csum;
        s.cluster_max = s.cluster_max.max(x).max(cmax);
    }
    Ok(s)
}

pub fn simulate_window(config: &WindowConfig, rng: &mut RngStream) -> Result<WindowStats> {
    config.validate()?;
    simulate_window_with(
        &config.model,
        &config.cluster_params,
        config.nu,
        config.horizon,
        rng,
    )
}

/// `n` windows; replication `i` uses stream `(seed, i)`.
pub fn batch_windows(
    config: &WindowConfig,
    n: u64,
    seed: u64,
    workers: &Workers,
) -> Result<Vec<WindowStats>> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    config.validate()?;
    workers.map_indexed(n, |i| {
        let mut rng = RngStream::new(seed, i);
        simulate_window_with(
            &config.model,
            &config.cluster_params,
            config.nu,
            config.horizon,
            &mut rng,
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

impl MeanEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            se: (var / n as f64).sqrt(),
            n: n as u64,
        }
    }
}

pub const MIN_PILOT: u64 = 1000;

/// Pilot Monte Carlo estimate of `E[S_T]`.
pub fn estimate_mean_sum(
    config: &WindowConfig,
    pilot_n: u64,
    seed: u64,
    workers: &Workers,
) -> Result<MeanEstimate> {
    if pilot_n < MIN_PILOT {
        return Err(Error::invalid("pilot_n", format!("must be >= {MIN_PILOT}")));
    }
    let windows = batch_windows(config, pilot_n, seed, workers)?;
    let sums: Vec<f64> = windows.iter().map(|w| w.sum_in_window).collect();
    Ok(MeanEstimate::from_values(&sums))
}
