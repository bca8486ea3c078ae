//! One simulated network evolving step by step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Mode, ScenarioConfig};
use super::metrics::{ClusterRecord, StepRecord};
use super::scenario::{build_network, generate_scenario};
use crate::association::{associate_all, update_load_estimate, LoadEstimate};
use crate::clustering::{cluster_small_cells, ClusterPartition, SimilarityGraph};
use crate::coordination::solve_cluster_schedule;
use crate::error::Result;
use crate::learning::{build_action_set, cluster_cost, station_cost, ClusterLearner};
use crate::netmodel::{
    compute_loads, total_power, BaseStation, BsId, BsKind, Network, NetworkConfiguration,
    Orthogonality,
};

/// RNG stream for station and UE placement.
pub const LAYOUT_STREAM: u64 = 0;
/// RNG stream for shadowing.
pub const SHADOWING_STREAM: u64 = 1;
/// RNG stream for clustering and action sampling.
pub const LEARNING_STREAM: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
pub struct World {
    pub cfg: ScenarioConfig,
    pub mode: Mode,
    pub seed: u64,
    pub net: Network,
    pub state: NetworkConfiguration,
    pub estimate: LoadEstimate,
    pub partition: Option<ClusterPartition>,
    /// One learner per cluster, parallel to `partition.clusters`.
    pub learners: Vec<ClusterLearner>,
    /// Similarity graph of the latest re-clustering.
    pub graph: Option<SimilarityGraph>,
    pub small_cells: Vec<BsId>,
    t: u64,
    rng: ChaCha8Rng,
}

impl World {
    /// Draws the layout for `seed` and starts with every station on at full power.
    pub fn new(cfg: &ScenarioConfig, mode: Mode, seed: u64) -> Result<Self> {
        let (stations, ues) = generate_scenario(cfg, &mut stream_rng(seed, LAYOUT_STREAM))?;
        let net = build_network(cfg, stations, ues, &mut stream_rng(seed, SHADOWING_STREAM))?;
        Ok(Self::from_network(cfg, mode, seed, net))
    }

    pub fn from_network(cfg: &ScenarioConfig, mode: Mode, seed: u64, net: Network) -> Self {
        let n = net.stations.len();
        let small_cells = net.small_cells().map(|bs| bs.id).collect();
        Self {
            cfg: cfg.clone(),
            mode,
            seed,
            state: NetworkConfiguration::all_active(&net.stations),
            estimate: LoadEstimate::new(n),
            partition: None,
            learners: Vec::new(),
            graph: None,
            small_cells,
            net,
            t: 0,
            rng: stream_rng(seed, LEARNING_STREAM),
        }
    }

    /// Index of the next step.
    pub fn time(&self) -> u64 {
        self.t
    }

    /// Stations included in per-BS summaries.
    pub fn counted_stations(&self) -> Vec<BsId> {
        if self.cfg.metrics.include_macro {
            (0..self.net.stations.len()).collect()
        } else {
            self.small_cells.clone()
        }
    }

    pub fn orthogonality(&self) -> Orthogonality {
        let n = self.net.stations.len();
        match (&self.partition, self.mode) {
            (Some(p), Mode::LearningClustered) => p.orthogonality(n),
            _ => Orthogonality::none(n),
        }
    }

    /// Cost charged to `members` when their UEs cannot be served or a power
    /// budget is broken.
    pub fn penalty(&self, members: &[BsId]) -> f64 {
        let l = &self.cfg.learning;
        l.penalty.unwrap_or_else(|| {
            let p_max: f64 = members.iter().map(|&b| self.net.stations[b].p_max).sum();
            l.alpha * p_max + l.beta * members.len() as f64
        })
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        let t = self.t;
        let n = self.net.stations.len();

        // Load advertisement.
        if t >= 1 {
            self.estimate =
                update_load_estimate(&self.estimate, &self.state.load, t, self.cfg.association.config().nu);
        }

        if t.is_multiple_of(self.cfg.clustering.recluster_every) {
            self.recluster(t)?;
        }

        // Actions.
        let mut played = Vec::with_capacity(self.learners.len());
        if self.mode == Mode::Classical {
            for bs in &self.net.stations {
                self.state.power[bs.id] = bs.p_max;
                self.state.active[bs.id] = true;
            }
        } else {
            for learner in &self.learners {
                let a = learner.sample_action(&mut self.rng);
                learner.actions[a].apply(&mut self.state);
                played.push(a);
            }
        }

        // Association, then in-cluster scheduling against last step's loads.
        let delta = match self.mode {
            Mode::Classical => 0.0,
            _ => self.cfg.association.delta,
        };
        let mut assignment = associate_all(&self.net, &self.state, &self.estimate, delta);
        let orth = self.orthogonality();
        let clusters: Vec<Vec<BsId>> = self
            .partition
            .as_ref()
            .map(|p| p.clusters.clone())
            .unwrap_or_default();
        let mut unschedulable = vec![false; clusters.len()];
        if self.mode != Mode::Classical {
            for (c, members) in clusters.iter().enumerate() {
                let ues: Vec<usize> = (0..assignment.len())
                    .filter(|&m| assignment[m].is_some_and(|b| members.contains(&b)))
                    .collect();
                if ues.is_empty() {
                    continue;
                }
                match solve_cluster_schedule(&self.net, &self.state, &orth, members, &ues) {
                    Ok(schedule) => {
                        for (&m, &b) in schedule.ues.iter().zip(&schedule.assignment) {
                            assignment[m] = Some(b);
                        }
                    }
                    Err(_) => unschedulable[c] = true,
                }
            }
        }

        let solution = compute_loads(&self.net, &self.state, &assignment, &orth, &self.cfg.load.params())?;
        self.state.load = solution.load.clone();
        for (ue, serving) in self.net.ues.iter_mut().zip(&assignment) {
            ue.serving_bs = *serving;
        }

        // Costs and learning.
        let cost_params = self.cfg.learning.cost();
        let station_costs: Vec<f64> = self
            .net
            .stations
            .iter()
            .map(|bs| station_cost(bs, &self.state, solution.raw[bs.id], &cost_params))
            .collect();
        let total: Vec<f64> = self
            .net
            .stations
            .iter()
            .map(|bs| total_power(bs, &self.state))
            .collect();

        let mut records = Vec::with_capacity(clusters.len());
        let mut network_cost = 0.0;
        for (c, members) in clusters.iter().enumerate() {
            let over_budget = members
                .iter()
                .any(|&b| total[b] > self.net.stations[b].p_max * (1.0 + 1e-12));
            let penalised = unschedulable[c] || over_budget;
            let cost = if penalised {
                self.penalty(members)
            } else {
                cluster_cost(&self.net.stations, members, &self.state, &solution.raw, &cost_params)
            };
            network_cost += cost;
            let (action, top_probability, max_regret) = match self.learners.get_mut(c) {
                Some(learner) if self.mode != Mode::Classical => {
                    learner.update(played[c], -cost);
                    (played[c], learner.mode().1, learner.max_regret())
                }
                _ => (0, 1.0, 0.0),
            };
            records.push(ClusterRecord {
                members: members.clone(),
                head: self.partition.as_ref().map_or(members[0], |p| p.heads[c]),
                action,
                cost,
                utility: -cost,
                penalised,
                top_probability,
                max_regret,
            });
        }

        let record = StepRecord {
            t,
            active: self.state.active.clone(),
            power: self.state.power.clone(),
            total_power: total,
            load: solution.load,
            raw_load: solution.raw,
            station_cost: station_costs,
            clusters: records,
            network_cost,
            uncovered_ues: assignment.iter().filter(|a| a.is_none()).count(),
            load_converged: solution.converged,
        };
        debug_assert_eq!(record.active.len(), n);
        self.t += 1;
        Ok(record)
    }

    /// Runs `steps` steps and returns their records.
    pub fn run(&mut self, steps: u64) -> Result<Vec<StepRecord>> {
        (0..steps).map(|_| self.step()).collect()
    }

    fn recluster(&mut self, t: u64) -> Result<()> {
        let ids = &self.small_cells;
        if ids.is_empty() {
            self.partition = Some(ClusterPartition::new(Vec::new(), &[], t)?);
            self.learners.clear();
            return Ok(());
        }
        let loads = &self.estimate.rho_hat;
        let partition = match self.mode {
            Mode::Classical => ClusterPartition::singletons(ids, loads, t)?,
            Mode::LearningNoClusters => match self.partition.take() {
                Some(p) => p,
                None => ClusterPartition::singletons(ids, loads, t)?,
            },
            Mode::LearningClustered => {
                let positions: Vec<_> = ids.iter().map(|&b| self.net.stations[b].position).collect();
                let small_loads: Vec<f64> = ids.iter().map(|&b| loads[b]).collect();
                let (partition, graph) = cluster_small_cells(
                    ids,
                    &positions,
                    &small_loads,
                    loads,
                    &self.cfg.clustering.similarity(),
                    t,
                    &mut self.rng,
                )?;
                self.graph = Some(graph);
                partition
            }
        };

        let mut old: Vec<Option<ClusterLearner>> = self.learners.drain(..).map(Some).collect();
        let mut learners = Vec::with_capacity(partition.len());
        for members in &partition.clusters {
            let kept = old
                .iter_mut()
                .find(|l| l.as_ref().is_some_and(|l| &l.members == members))
                .and_then(Option::take);
            let learner = match kept {
                Some(l) => l,
                None => {
                    let stations: Vec<&BaseStation> =
                        members.iter().map(|&b| &self.net.stations[b]).collect();
                    debug_assert!(stations.iter().all(|bs| bs.kind == BsKind::Small));
                    let actions = build_action_set(
                        &stations,
                        &self.cfg.learning.power_levels,
                        self.cfg.learning.max_actions,
                    )?;
                    ClusterLearner::new(members.clone(), actions, self.cfg.learning.learner())
                }
            };
            learners.push(learner);
        }
        self.partition = Some(partition);
        self.learners = learners;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.layout.small_cells = 6;
        cfg.layout.ues = 20;
        cfg.clustering.recluster_every = 10;
        cfg
    }

    #[test]
    fn classical_never_changes_state() {
        let cfg = small_config();
        let mut world = World::new(&cfg, Mode::Classical, 3).unwrap();
        let records = world.run(60).unwrap();
        for r in &records {
            assert!(r.active.iter().all(|&a| a));
            for bs in &world.net.stations {
                assert_eq!(r.power[bs.id], bs.p_max);
            }
            assert_eq!(r.uncovered_ues, 0);
        }
        assert!(world.learners.iter().all(|l| l.steps() == 0));
    }

    #[test]
    fn every_ue_is_served_once() {
        for mode in Mode::ALL {
            let cfg = small_config();
            let mut world = World::new(&cfg, mode, 8).unwrap();
            for _ in 0..30 {
                let r = world.step().unwrap();
                assert_eq!(r.uncovered_ues, 0);
                for ue in &world.net.ues {
                    let b = ue.serving_bs.expect("macro always covers");
                    assert!(r.active[b]);
                }
                let p = world.partition.as_ref().unwrap();
                assert!(p.covers_exactly(&world.small_cells));
                assert_eq!(world.learners.len(), p.len());
            }
        }
    }

    #[test]
    fn no_cluster_mode_uses_singletons() {
        let cfg = small_config();
        let mut world = World::new(&cfg, Mode::LearningNoClusters, 1).unwrap();
        let r = world.run(25).unwrap();
        assert!(r.iter().all(|s| s.clusters.iter().all(|c| c.members.len() == 1)));
        assert!(world.learners.iter().all(|l| l.steps() == 25));
        assert!(world.learners.iter().all(|l| l.actions.len() == 2));
    }

    #[test]
    fn macro_is_never_a_player() {
        let cfg = small_config();
        let mut world = World::new(&cfg, Mode::LearningClustered, 2).unwrap();
        for r in world.run(40).unwrap() {
            assert!(r.active[0]);
            assert!(r.clusters.iter().all(|c| !c.members.contains(&0)));
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let cfg = small_config();
        let a = World::new(&cfg, Mode::LearningClustered, 9).unwrap().run(30).unwrap();
        let b = World::new(&cfg, Mode::LearningClustered, 9).unwrap().run(30).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn idle_network_learns_to_sleep() {
        // With no traffic, sleeping saves (q - 1) p_idle per station at no load cost.
        let mut cfg = small_config();
        cfg.layout.ues = 0;
        let mut world = World::new(&cfg, Mode::LearningNoClusters, 4).unwrap();
        world.run(3000).unwrap();
        for l in &world.learners {
            let sleep = l.actions.iter().position(|a| a.active_count() == 0).unwrap();
            assert!(l.u_hat[sleep] >= l.u_hat.iter().copied().fold(f64::MIN, f64::max) - 1e-12);
            assert_eq!(l.mode().0, sleep);
        }
    }

    #[test]
    fn penalty_default() {
        let cfg = small_config();
        let world = World::new(&cfg, Mode::LearningClustered, 1).unwrap();
        // Two small cells at 1 W: 0.5 * 2 + 0.5 * 2.
        assert!((world.penalty(&[1, 2]) - 2.0).abs() < 1e-9);
    }
}
