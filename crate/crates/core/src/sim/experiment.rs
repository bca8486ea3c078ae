//! Monte-Carlo runs and parameter sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::config::{Mode, ScenarioConfig};
use super::metrics::{summarize, RunSummary, StepRecord};
use super::world::World;
use crate::clustering::{ClusterPartition, SimilarityGraph};
use crate::error::{invalid, Error, Result};
use crate::netmodel::{BsId, Position};

/// Everything one run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    /// Per-step records; empty unless requested.
    pub records: Vec<StepRecord>,
    pub partition: Option<ClusterPartition>,
    pub graph: Option<SimilarityGraph>,
    pub positions: Vec<Position>,
    pub rho_hat: Vec<f64>,
}

pub fn run_single(cfg: &ScenarioConfig, mode: Mode, seed: u64, keep_records: bool) -> Result<RunOutput> {
    let mut world = World::new(cfg, mode, seed)?;
    let records = world.run(cfg.run.steps)?;
    let summary = summarize(&records, &world.counted_stations(), cfg.run.burn_in, seed);
    Ok(RunOutput {
        summary,
        records: if keep_records { records } else { Vec::new() },
        partition: world.partition.clone(),
        graph: world.graph.clone(),
        positions: world.net.stations.iter().map(|bs| bs.position).collect(),
        rho_hat: world.estimate.rho_hat.clone(),
    })
}

/// Run-level mean with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci95: f64,
}

impl Estimate {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                ci95: f64::NAN,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, ci95: 0.0 };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self {
            mean,
            ci95: 1.96 * var.sqrt() / (n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub runs: usize,
    pub cost_per_bs: Estimate,
    pub energy_per_bs: Estimate,
    pub load: Estimate,
    pub cluster_count: Estimate,
    pub mean_cluster_size: Estimate,
    /// One energy sample per counted station per run.
    pub energy_samples: Vec<f64>,
}

impl Aggregate {
    pub fn of(summaries: &[RunSummary]) -> Self {
        let pick = |f: fn(&RunSummary) -> f64| Estimate::of(&summaries.iter().map(f).collect::<Vec<_>>());
        Self {
            runs: summaries.len(),
            cost_per_bs: pick(|s| s.mean_cost_per_bs),
            energy_per_bs: pick(|s| s.mean_energy_per_bs),
            load: pick(|s| s.mean_load),
            cluster_count: pick(|s| s.cluster_count),
            mean_cluster_size: pick(|s| s.mean_cluster_size),
            energy_samples: summaries.iter().flat_map(|s| s.energy_per_bs.iter().copied()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub mode: Mode,
    pub config: ScenarioConfig,
    pub outputs: Vec<RunOutput>,
    pub aggregate: Aggregate,
}

/// `cfg.run.runs` independent runs with seeds `seed, seed + 1, ...`, executed
/// in parallel and collected in seed order.
pub fn run_experiment(cfg: &ScenarioConfig, mode: Mode, keep_records: bool) -> Result<Experiment> {
    let outputs = (0..cfg.run.runs as u64)
        .into_par_iter()
        .map(|r| run_single(cfg, mode, cfg.run.seed.wrapping_add(r), keep_records))
        .collect::<Result<Vec<_>>>()?;
    let summaries: Vec<RunSummary> = outputs.iter().map(|o| o.summary.clone()).collect();
    Ok(Experiment {
        mode,
        config: cfg.clone(),
        aggregate: Aggregate::of(&summaries),
        outputs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVar {
    Ues,
    SmallCells,
    EpsilonD,
    Theta,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::Ues => "ues",
            SweepVar::SmallCells => "small_cells",
            SweepVar::EpsilonD => "eps_d",
            SweepVar::Theta => "theta",
        }
    }

    pub fn apply(&self, cfg: &mut ScenarioConfig, value: f64) {
        match self {
            SweepVar::Ues => cfg.layout.ues = value.round() as usize,
            SweepVar::SmallCells => cfg.layout.small_cells = value.round() as usize,
            SweepVar::EpsilonD => cfg.clustering.epsilon_d_m = value,
            SweepVar::Theta => cfg.clustering.theta = value,
        }
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ues" => Ok(SweepVar::Ues),
            "small_cells" | "sbs" => Ok(SweepVar::SmallCells),
            "eps_d" | "epsilon_d" => Ok(SweepVar::EpsilonD),
            "theta" => Ok(SweepVar::Theta),
            other => Err(invalid(format!("unknown sweep variable {other:?}"))),
        }
    }
}

/// One swept variable and its values, written `name=start:stop:step` (stop
/// inclusive) or `name=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self.values.iter().map(f64::to_string).collect();
        write!(f, "{}={}", self.var.name(), vals.join(","))
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, spec) = s
            .split_once('=')
            .ok_or_else(|| invalid(format!("sweep {s:?} is not name=values")))?;
        let var: SweepVar = name.trim().parse()?;
        let num = |x: &str| -> Result<f64> {
            x.trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("bad number {x:?} in sweep {s:?}")))
        };
        let values = if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            let [start, stop, step] = parts[..] else {
                return Err(invalid(format!("range {spec:?} is not start:stop:step")));
            };
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(invalid(format!("range {spec:?} needs step > 0 and stop >= start")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| start + i as f64 * step).collect()
        } else {
            spec.split(',').map(num).collect::<Result<Vec<_>>>()?
        };
        if values.is_empty() {
            return Err(invalid(format!("sweep {s:?} has no values")));
        }
        Ok(Sweep { var, values })
    }
}

/// Every combination of the sweeps' values, first sweep varying slowest.
/// Each point is validated.
pub fn sweep_points(base: &ScenarioConfig, sweeps: &[Sweep]) -> Result<Vec<ScenarioConfig>> {
    let mut points = vec![base.clone()];
    for sweep in sweeps {
        points = points
            .into_iter()
            .flat_map(|p| {
                sweep.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    sweep.var.apply(&mut q, v);
                    q
                })
            })
            .collect();
    }
    for p in &points {
        p.validate()?;
    }
    Ok(points)
}

/// Runs every mode at every sweep point, in point-major order.
pub fn run_sweep(
    base: &ScenarioConfig,
    sweeps: &[Sweep],
    modes: &[Mode],
    keep_records: bool,
) -> Result<Vec<Experiment>> {
    let points = sweep_points(base, sweeps)?;
    let mut out = Vec::with_capacity(points.len() * modes.len());
    for p in &points {
        for &mode in modes {
            out.push(run_experiment(p, mode, keep_records)?);
        }
    }
    Ok(out)
}

/// Pooled energy samples of every experiment in `mode`.
pub fn pooled_energy(experiments: &[Experiment], mode: Mode) -> Vec<f64> {
    experiments
        .iter()
        .filter(|e| e.mode == mode)
        .flat_map(|e| e.aggregate.energy_samples.iter().copied())
        .collect()
}

/// Sorted samples paired with their empirical CDF value `i / n`.
pub fn ecdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}

/// Empirical quantile by the nearest-rank rule.
pub fn quantile(samples: &[f64], p: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Spearman rank correlation, with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return f64::NAN;
    }
    cov / (vx * vy).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Small cells and their cluster index in `partition`.
pub fn cluster_labels(partition: &ClusterPartition) -> Vec<(BsId, usize)> {
    let mut out: Vec<(BsId, usize)> = partition
        .clusters
        .iter()
        .enumerate()
        .flat_map(|(c, members)| members.iter().map(move |&b| (b, c)))
        .collect();
    out.sort_unstable();
    out
}
