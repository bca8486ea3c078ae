//! CSV writers. Floats carry nine significant digits.

use std::path::Path;

use super::config::Mode;
use super::experiment::{cluster_labels, ecdf, pooled_energy, Experiment};
use crate::error::Result;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "mode",
    "ue_count",
    "mean_cost_per_bs",
    "mean_energy_per_bs",
    "mean_load",
    "cluster_count",
    "mean_cluster_size",
    "ci95",
    "energy_ci95",
    "small_cells",
    "epsilon_d_m",
    "theta",
    "runs",
    "seed",
];

pub fn write_summary(path: &Path, experiments: &[Experiment]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for e in experiments {
        let a = &e.aggregate;
        let c = &e.config;
        w.write_record([
            e.mode.as_str().to_string(),
            c.layout.ues.to_string(),
            fmt_f64(a.cost_per_bs.mean),
            fmt_f64(a.energy_per_bs.mean),
            fmt_f64(a.load.mean),
            fmt_f64(a.cluster_count.mean),
            fmt_f64(a.mean_cluster_size.mean),
            fmt_f64(a.cost_per_bs.ci95),
            fmt_f64(a.energy_per_bs.ci95),
            c.layout.small_cells.to_string(),
            fmt_f64(c.clustering.epsilon_d_m),
            fmt_f64(c.clustering.theta),
            a.runs.to_string(),
            c.run.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-mode empirical CDF of per-station energy, pooled over all experiments.
pub fn write_energy_cdf(path: &Path, experiments: &[Experiment]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["mode", "sample", "ecdf"])?;
    for mode in Mode::ALL {
        for (x, p) in ecdf(&pooled_energy(experiments, mode)) {
            w.write_record([mode.as_str().to_string(), fmt_f64(x), fmt_f64(p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-station rows (`steps.csv`) and per-cluster learner rows (`learners.csv`)
/// for every kept record.
pub fn write_trace(dir: &Path, experiments: &[Experiment]) -> Result<()> {
    let mut steps = csv::Writer::from_path(dir.join("steps.csv"))?;
    steps.write_record([
        "point", "mode", "run_seed", "t", "bs", "active", "power_w", "total_power_w", "load",
        "raw_load", "cost",
    ])?;
    let mut learners = csv::Writer::from_path(dir.join("learners.csv"))?;
    learners.write_record([
        "point",
        "mode",
        "run_seed",
        "t",
        "cluster",
        "members",
        "head",
        "action",
        "utility",
        "penalised",
        "top_probability",
        "max_regret",
    ])?;
    for (point, e) in experiments.iter().enumerate() {
        for out in &e.outputs {
            let seed = out.summary.seed.to_string();
            for r in &out.records {
                for b in 0..r.active.len() {
                    steps.write_record([
                        point.to_string(),
                        e.mode.as_str().to_string(),
                        seed.clone(),
                        r.t.to_string(),
                        b.to_string(),
                        u8::from(r.active[b]).to_string(),
                        fmt_f64(r.power[b]),
                        fmt_f64(r.total_power[b]),
                        fmt_f64(r.load[b]),
                        fmt_f64(r.raw_load[b]),
                        fmt_f64(r.station_cost[b]),
                    ])?;
                }
                for (c, cl) in r.clusters.iter().enumerate() {
                    let members: Vec<String> = cl.members.iter().map(|m| m.to_string()).collect();
                    learners.write_record([
                        point.to_string(),
                        e.mode.as_str().to_string(),
                        seed.clone(),
                        r.t.to_string(),
                        c.to_string(),
                        members.join(" "),
                        cl.head.to_string(),
                        cl.action.to_string(),
                        fmt_f64(cl.utility),
                        u8::from(cl.penalised).to_string(),
                        fmt_f64(cl.top_probability),
                        fmt_f64(cl.max_regret),
                    ])?;
                }
            }
        }
    }
    steps.flush()?;
    learners.flush()?;
    Ok(())
}

/// Final partition (`clusters.csv`) and similarity graph (`similarity.csv`) of
/// the first run of each experiment.
pub fn write_cluster_dump(dir: &Path, experiments: &[Experiment]) -> Result<()> {
    let mut clusters = csv::Writer::from_path(dir.join("clusters.csv"))?;
    clusters.write_record(["point", "mode", "bs", "x_m", "y_m", "rho_hat", "cluster", "is_head"])?;
    let mut sim = csv::Writer::from_path(dir.join("similarity.csv"))?;
    sim.write_record(["point", "mode", "bs_i", "bs_j", "adjacent", "s_dist", "s_load", "s_joint", "laplacian"])?;
    for (point, e) in experiments.iter().enumerate() {
        let Some(out) = e.outputs.first() else { continue };
        if let Some(p) = &out.partition {
            for (b, c) in cluster_labels(p) {
                clusters.write_record([
                    point.to_string(),
                    e.mode.as_str().to_string(),
                    b.to_string(),
                    fmt_f64(out.positions[b].x),
                    fmt_f64(out.positions[b].y),
                    fmt_f64(out.rho_hat[b]),
                    c.to_string(),
                    u8::from(p.heads[c] == b).to_string(),
                ])?;
            }
        }
        if let Some(g) = &out.graph {
            for (i, &bi) in g.ids.iter().enumerate() {
                for (j, &bj) in g.ids.iter().enumerate() {
                    sim.write_record([
                        point.to_string(),
                        e.mode.as_str().to_string(),
                        bi.to_string(),
                        bj.to_string(),
                        u8::from(g.adjacency[(i, j)] != 0.0).to_string(),
                        fmt_f64(g.s_dist[(i, j)]),
                        fmt_f64(g.s_load[(i, j)]),
                        fmt_f64(g.s_joint[(i, j)]),
                        fmt_f64(g.laplacian[(i, j)]),
                    ])?;
                }
            }
        }
    }
    clusters.flush()?;
    sim.flush()?;
    Ok(())
}
