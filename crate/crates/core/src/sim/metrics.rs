//! Per-step records and per-run summaries.

use serde::Serialize;

use crate::netmodel::BsId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRecord {
    pub members: Vec<BsId>,
    pub head: BsId,
    pub action: usize,
    pub cost: f64,
    pub utility: f64,
    /// The cost was replaced by the penalty.
    pub penalised: bool,
    /// Probability of the most likely action after the update.
    pub top_probability: f64,
    pub max_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: u64,
    pub active: Vec<bool>,
    /// Transmit power setting in watts.
    pub power: Vec<f64>,
    /// Total drawn power in watts.
    pub total_power: Vec<f64>,
    pub load: Vec<f64>,
    pub raw_load: Vec<f64>,
    pub station_cost: Vec<f64>,
    pub clusters: Vec<ClusterRecord>,
    /// Sum of cluster costs (penalties included).
    pub network_cost: f64,
    pub uncovered_ues: usize,
    pub load_converged: bool,
}

impl StepRecord {
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn mean_cluster_size(&self) -> f64 {
        if self.clusters.is_empty() {
            return 0.0;
        }
        self.clusters.iter().map(|c| c.members.len()).sum::<usize>() as f64
            / self.clusters.len() as f64
    }
}

/// Summary of one run over its post-burn-in window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub mean_cost_per_bs: f64,
    pub mean_energy_per_bs: f64,
    pub mean_load: f64,
    pub cluster_count: f64,
    pub mean_cluster_size: f64,
    /// Energy in joules per counted station over the window, one entry per station.
    pub energy_per_bs: Vec<f64>,
    pub window_steps: usize,
}

/// Index of the first step inside the summary window.
pub fn window_start(steps: usize, burn_in: f64) -> usize {
    ((steps as f64 * burn_in).floor() as usize).min(steps.saturating_sub(1))
}

/// Summarises `records` over the stations in `counted`, skipping the burn-in.
/// One step lasts one second, so energy in joules is the summed power in watts.
pub fn summarize(records: &[StepRecord], counted: &[BsId], burn_in: f64, seed: u64) -> RunSummary {
    let window = &records[window_start(records.len(), burn_in)..];
    let n = window.len().max(1) as f64;
    let nb = counted.len().max(1) as f64;
    let mean_over = |f: &dyn Fn(&StepRecord) -> f64| window.iter().map(f).sum::<f64>() / n;

    let energy_per_bs: Vec<f64> = counted
        .iter()
        .map(|&b| window.iter().map(|r| r.total_power[b]).sum())
        .collect();
    RunSummary {
        seed,
        mean_cost_per_bs: mean_over(&|r| counted.iter().map(|&b| r.station_cost[b]).sum::<f64>() / nb),
        mean_energy_per_bs: energy_per_bs.iter().sum::<f64>() / nb,
        mean_load: mean_over(&|r| counted.iter().map(|&b| r.load[b]).sum::<f64>() / nb),
        cluster_count: mean_over(&|r| r.cluster_count() as f64),
        mean_cluster_size: mean_over(&|r| r.mean_cluster_size()),
        energy_per_bs,
        window_steps: window.len(),
    }
}
