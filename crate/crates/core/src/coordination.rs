//! Intra-cluster coordination: head election and UE offloading.
//!
//! Within a cluster the head time-shares the channel among members, so the
//! cluster acts as one super cell. UEs attached to the cluster are spread over
//! its active members to minimise the summed member load. The relaxed
//! assignment problem
//!
//! ```text
//! minimise   sum_b sum_m c_bm z_bm
//! subject to sum_b z_bm = 1        for every UE m
//!            0 <= z_bm <= 1
//! ```
//!
//! with `c_bm = traffic_m / R_b(x_m)` has no constraint linking UEs, so its
//! optimum puts each UE's whole mass on its cheapest member.
//! [`ScheduleLp::standard_form`] exposes the LP for checking against generic
//! solvers.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::netmodel::{rate, BsId, Network, NetworkConfiguration, Orthogonality};

/// The member with the highest load; ties go to the lowest id.
pub fn elect_head(cluster: &[BsId], loads: &[f64]) -> Result<BsId> {
    cluster
        .iter()
        .copied()
        .reduce(|best, b| {
            let (lb, lbest) = (loads[b], loads[best]);
            if lb > lbest || (lb == lbest && b < best) {
                b
            } else {
                best
            }
        })
        .ok_or(Error::EmptyCluster)
}

/// The relaxed scheduling LP of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleLp {
    /// Cluster members in ascending id order; rows of `costs`.
    pub members: Vec<BsId>,
    pub active: Vec<bool>,
    /// UE indices; columns of `costs`.
    pub ues: Vec<usize>,
    /// `c_bm`, the load UE `m` would put on member `b`. Ignored for inactive members.
    pub costs: DMatrix<f64>,
}

/// `minimise c.x  s.t.  a_eq x = b_eq,  0 <= x <= 1` over one variable per
/// (active member, UE) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub c: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    /// `(row, col)` in `costs` for each variable.
    pub vars: Vec<(usize, usize)>,
}

impl ScheduleLp {
    pub fn new(
        members: Vec<BsId>,
        active: Vec<bool>,
        ues: Vec<usize>,
        costs: DMatrix<f64>,
    ) -> Result<Self> {
        if members.len() != active.len()
            || costs.nrows() != members.len()
            || costs.ncols() != ues.len()
        {
            return Err(invalid("schedule LP dimensions do not match"));
        }
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("cluster members must be sorted and distinct"));
        }
        Ok(Self {
            members,
            active,
            ues,
            costs,
        })
    }

    /// Cost coefficients from the rates under `cfg`, whose loads are held
    /// fixed while the schedule is solved.
    pub fn build(
        net: &Network,
        cfg: &NetworkConfiguration,
        orth: &Orthogonality,
        members: &[BsId],
        ues: &[usize],
    ) -> Result<Self> {
        let mut members = members.to_vec();
        members.sort_unstable();
        let active: Vec<bool> = members.iter().map(|&b| cfg.active[b]).collect();
        let mut costs = DMatrix::from_element(members.len(), ues.len(), f64::INFINITY);
        for (i, &b) in members.iter().enumerate() {
            if !active[i] {
                continue;
            }
            for (j, &m) in ues.iter().enumerate() {
                costs[(i, j)] = net.ues[m].traffic_rate / rate(net, m, b, cfg, orth)?;
            }
        }
        Self::new(members, active, ues.to_vec(), costs)
    }

    pub fn standard_form(&self) -> StandardForm {
        let vars: Vec<(usize, usize)> = (0..self.ues.len())
            .flat_map(|j| {
                (0..self.members.len())
                    .filter(|&i| self.active[i])
                    .map(move |i| (i, j))
            })
            .collect();
        let c = vars.iter().map(|&(i, j)| self.costs[(i, j)]).collect();
        let a_eq = (0..self.ues.len())
            .map(|j| vars.iter().map(|&(_, col)| if col == j { 1.0 } else { 0.0 }).collect())
            .collect();
        StandardForm {
            c,
            a_eq,
            b_eq: vec![1.0; self.ues.len()],
            vars,
        }
    }

    /// `sum c_bm z_bm` over active members.
    pub fn objective(&self, z: &DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        for j in 0..self.ues.len() {
            for i in 0..self.members.len() {
                if self.active[i] && z[(i, j)] != 0.0 {
                    total += self.costs[(i, j)] * z[(i, j)];
                }
            }
        }
        total
    }

    /// Column sums equal one, entries in [0, 1], and no mass on sleeping members.
    pub fn is_feasible(&self, z: &DMatrix<f64>, tol: f64) -> bool {
        (0..self.ues.len()).all(|j| {
            let col_ok = (0..self.members.len()).all(|i| {
                let v = z[(i, j)];
                (-tol..=1.0 + tol).contains(&v) && (self.active[i] || v == 0.0)
            });
            col_ok && (z.column(j).sum() - 1.0).abs() <= tol
        })
    }

    pub fn solve(&self) -> Result<Schedule> {
        let n_active = self.active.iter().filter(|&&a| a).count();
        if n_active == 0 && !self.ues.is_empty() {
            return Err(Error::UncoveredUes {
                ues: self.ues.len(),
            });
        }
        let (rows, cols) = (self.members.len(), self.ues.len());
        let mut fractional = DMatrix::zeros(rows, cols);
        for j in 0..cols {
            let best = (0..rows)
                .filter(|&i| self.active[i])
                .min_by(|&a, &b| self.costs[(a, j)].total_cmp(&self.costs[(b, j)]).then(a.cmp(&b)))
                .expect("at least one active member");
            fractional[(best, j)] = 1.0;
        }
        let binary = round_schedule(&fractional);
        let assignment = (0..cols)
            .map(|j| {
                let i = (0..rows).find(|&i| binary[(i, j)] == 1.0).expect("one-hot column");
                self.members[i]
            })
            .collect();
        let cluster_load = self.objective(&binary);
        Ok(Schedule {
            members: self.members.clone(),
            ues: self.ues.clone(),
            fractional_objective: self.objective(&fractional),
            fractional,
            binary,
            assignment,
            cluster_load,
            overloaded: cluster_load > 1.0,
        })
    }
}

/// `z_bm = 1` for the member with the largest fractional value in each column;
/// ties go to the lowest row (lowest id).
pub fn round_schedule(fractional: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = fractional.shape();
    let mut binary = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        let mut best = 0;
        for i in 1..rows {
            if fractional[(i, j)] > fractional[(best, j)] {
                best = i;
            }
        }
        if rows > 0 {
            binary[(best, j)] = 1.0;
        }
    }
    binary
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub members: Vec<BsId>,
    pub ues: Vec<usize>,
    pub fractional: DMatrix<f64>,
    pub binary: DMatrix<f64>,
    /// Serving member of each UE, parallel to `ues`.
    pub assignment: Vec<BsId>,
    pub fractional_objective: f64,
    /// Summed member load of the rounded schedule, before clamping.
    pub cluster_load: f64,
    /// The members cannot time-share within one frame.
    pub overloaded: bool,
}

/// Builds and solves the scheduling LP of one cluster.
pub fn solve_cluster_schedule(
    net: &Network,
    cfg: &NetworkConfiguration,
    orth: &Orthogonality,
    members: &[BsId],
    ues: &[usize],
) -> Result<Schedule> {
    ScheduleLp::build(net, cfg, orth, members, ues)?.solve()
}
