//! Regret-based learning for the cluster sleep/wake game.
//!
//! Each cluster is a player whose action fixes the power and on/off state of
//! every member. A player keeps, per action, a utility estimate `u_hat` and a
//! regret estimate `r_hat`, and moves its mixed strategy `pi` toward the
//! Boltzmann-Gibbs distribution over the positive regrets. All three
//! recursions use step sizes of the form `1 / t^phi`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::netmodel::{total_power, BaseStation, BsId, NetworkConfiguration};

/// Step-size schedule for stochastic-approximation recursions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    /// `1 / t^phi`.
    Power(f64),
    Constant(f64),
}

impl StepSize {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            StepSize::Power(phi) => (t.max(1) as f64).powf(-phi),
            StepSize::Constant(c) => c,
        }
    }

    /// Whether `sum xi(t)` diverges while `sum xi(t)^2` converges. For
    /// `1/t^phi` that is exactly `1/2 < phi <= 1` (p-series test).
    pub fn is_admissible(&self) -> bool {
        match *self {
            StepSize::Power(phi) => phi > 0.5 && phi <= 1.0,
            StepSize::Constant(_) => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSize::Power(phi) => phi > 0.0,
            StepSize::Constant(c) => c > 0.0 && c <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("step size {self:?} must lie in (0, 1]")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberConfig {
    pub bs: BsId,
    /// Transmit power in watts; zero while asleep.
    pub power: f64,
    pub active: bool,
}

/// One configuration for every member of a cluster, in ascending member order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAction {
    pub members: Vec<MemberConfig>,
}

impl ClusterAction {
    pub fn apply(&self, cfg: &mut NetworkConfiguration) {
        for m in &self.members {
            cfg.power[m.bs] = m.power;
            cfg.active[m.bs] = m.active;
        }
    }

    pub fn active_count(&self) -> usize {
        self.members.iter().filter(|m| m.active).count()
    }
}

pub const DEFAULT_ACTION_CAP: usize = 1024;

/// Cartesian product of per-member options. Each member may transmit at any
/// of `power_levels` (fractions of its `p_max`, in the given order) or sleep.
/// The first member varies slowest.
pub fn build_action_set(
    members: &[&BaseStation],
    power_levels: &[f64],
    cap: usize,
) -> Result<Vec<ClusterAction>> {
    if members.is_empty() {
        return Err(Error::EmptyCluster);
    }
    if power_levels.is_empty() || power_levels.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
        return Err(invalid("power levels must be fractions of p_max in (0, 1]"));
    }
    let options = power_levels.len() + 1;
    let size = u32::try_from(members.len())
        .ok()
        .and_then(|n| options.checked_pow(n))
        .filter(|&s| s <= cap)
        .ok_or(Error::ActionSpaceTooLarge {
            size: options.saturating_pow(members.len().min(64) as u32),
            cap,
        })?;

    let mut sorted: Vec<&BaseStation> = members.to_vec();
    sorted.sort_by_key(|bs| bs.id);
    let actions = (0..size)
        .map(|code| {
            let mut rest = code;
            let mut configs = vec![
                MemberConfig {
                    bs: 0,
                    power: 0.0,
                    active: false
                };
                sorted.len()
            ];
            for (slot, bs) in sorted.iter().enumerate().rev() {
                let choice = rest % options;
                rest /= options;
                configs[slot] = match power_levels.get(choice) {
                    Some(level) => MemberConfig {
                        bs: bs.id,
                        power: level * bs.p_max,
                        active: true,
                    },
                    None => MemberConfig {
                        bs: bs.id,
                        power: 0.0,
                        active: false,
                    },
                };
            }
            ClusterAction { members: configs }
        })
        .collect();
    Ok(actions)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Weight on power, per watt.
    pub alpha: f64,
    /// Weight on load.
    pub beta: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
        }
    }
}

/// Per-station cost `alpha * P_total + beta * rho`, where `rho` is the
/// unclamped load.
pub fn station_cost(
    bs: &BaseStation,
    cfg: &NetworkConfiguration,
    raw_load: f64,
    params: &CostParams,
) -> f64 {
    params.alpha * total_power(bs, cfg) + params.beta * raw_load
}

/// Sum of [`station_cost`] over the members of a cluster. The utility of the
/// cluster is the negated cost.
pub fn cluster_cost(
    stations: &[BaseStation],
    members: &[BsId],
    cfg: &NetworkConfiguration,
    raw_loads: &[f64],
    params: &CostParams,
) -> f64 {
    members
        .iter()
        .map(|&b| station_cost(&stations[b], cfg, raw_loads[b], params))
        .sum()
}

/// Boltzmann-Gibbs distribution over positive regrets at inverse temperature `kappa`.
pub fn bg_distribution(r_hat: &[f64], kappa: f64) -> Vec<f64> {
    let scaled: Vec<f64> = r_hat.iter().map(|r| kappa * r.max(0.0)).collect();
    let top = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scaled.iter().map(|s| (s - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub kappa: f64,
    pub utility_rate: StepSize,
    pub regret_rate: StepSize,
    pub strategy_rate: StepSize,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            kappa: 10.0,
            utility_rate: StepSize::Power(0.6),
            regret_rate: StepSize::Power(0.7),
            strategy_rate: StepSize::Power(0.8),
        }
    }
}

impl LearnerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(invalid("kappa must be positive"));
        }
        self.utility_rate.validate()?;
        self.regret_rate.validate()?;
        self.strategy_rate.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLearner {
    pub members: Vec<BsId>,
    pub actions: Vec<ClusterAction>,
    pub pi: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub params: LearnerParams,
    t: u64,
    last_utility: Option<f64>,
}

impl ClusterLearner {
    /// Uniform strategy with zero utility and regret estimates.
    pub fn new(members: Vec<BsId>, actions: Vec<ClusterAction>, params: LearnerParams) -> Self {
        let n = actions.len();
        Self {
            members,
            actions,
            pi: vec![1.0 / n as f64; n],
            u_hat: vec![0.0; n],
            r_hat: vec![0.0; n],
            params,
            t: 0,
            last_utility: None,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn last_utility(&self) -> Option<f64> {
        self.last_utility
    }

    /// Inverse-CDF draw from `pi`.
    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.pi, rng.random::<f64>())
    }

    /// One round of the three coupled recursions after playing `played` and
    /// observing `utility`.
    ///
    /// The regret recursion compares each action's previous utility estimate
    /// with the utility realised in the previous round; on the first round the
    /// current utility stands in for it. The strategy moves toward the
    /// Boltzmann-Gibbs distribution of the previous regrets.
    pub fn update(&mut self, played: usize, utility: f64) {
        self.t += 1;
        let t = self.t;
        let tau = self.params.utility_rate.at(t);
        let iota = self.params.regret_rate.at(t);
        let eps = self.params.strategy_rate.at(t);
        let previous = self.last_utility.unwrap_or(utility);

        let target = bg_distribution(&self.r_hat, self.params.kappa);
        for i in 0..self.actions.len() {
            let u_old = self.u_hat[i];
            if i == played {
                self.u_hat[i] = u_old + tau * (utility - u_old);
            }
            self.r_hat[i] += iota * (u_old - previous - self.r_hat[i]);
            self.pi[i] += eps * (target[i] - self.pi[i]);
        }
        renormalize(&mut self.pi);
        self.last_utility = Some(utility);
    }

    pub fn max_regret(&self) -> f64 {
        self.r_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_regret(&self) -> f64 {
        self.r_hat.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index and probability of the most likely action.
    pub fn mode(&self) -> (usize, f64) {
        self.pi
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best })
    }
}

/// Free-function form of [`ClusterLearner::update`].
pub fn learner_update(mut learner: ClusterLearner, played: usize, utility: f64) -> ClusterLearner {
    learner.update(played, utility);
    learner
}

/// Smallest index whose cumulative probability exceeds `u`; falls back to the
/// last index with positive mass when rounding leaves `u` above the total.
pub fn sample_index(pi: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in pi.iter().enumerate() {
        acc += p;
        if u < acc && p > 0.0 {
            return i;
        }
    }
    pi.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn renormalize(pi: &mut [f64]) {
    for p in pi.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{BsKind, Position};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cells(n: usize) -> Vec<BaseStation> {
        (0..n)
            .map(|b| {
                BaseStation::new(b, BsKind::Small, Position::new(b as f64, 0.0), 1.0, 0.1, 1.1)
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn action_set_sizes_and_order() {
        let bs = cells(3);
        let one = build_action_set(&[&bs[0]], &[1.0], DEFAULT_ACTION_CAP).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(
            one[0].members[0],
            MemberConfig {
                bs: 0,
                power: 1.0,
                active: true
            }
        );
        assert!(!one[1].members[0].active);

        let two = build_action_set(&[&bs[1], &bs[0]], &[1.0], DEFAULT_ACTION_CAP).unwrap();
        assert_eq!(two.len(), 4);
        let states: Vec<(bool, bool)> =
            two.iter().map(|a| (a.members[0].active, a.members[1].active)).collect();
        assert_eq!(states, vec![(true, true), (true, false), (false, true), (false, false)]);
        assert_eq!(two[0].members[0].bs, 0);

        let three = build_action_set(&[&bs[0], &bs[1], &bs[2]], &[0.5, 1.0], DEFAULT_ACTION_CAP)
            .unwrap();
        assert_eq!(three.len(), 27);
        assert_eq!(three[0].members[2].power, 0.5);
        assert_eq!(three[1].members[2].power, 1.0);
    }

    #[test]
    fn action_cap_is_enforced() {
        let bs = cells(11);
        let refs: Vec<&BaseStation> = bs.iter().collect();
        assert!(matches!(
            build_action_set(&refs, &[1.0], DEFAULT_ACTION_CAP),
            Err(Error::ActionSpaceTooLarge { size: 2048, cap: 1024 })
        ));
        assert!(build_action_set(&refs[..10], &[1.0], DEFAULT_ACTION_CAP).is_ok());
        assert!(matches!(build_action_set(&[], &[1.0], 8), Err(Error::EmptyCluster)));
    }

    #[test]
    fn cost_examples() {
        let bs = cells(2);
        let params = CostParams::default();
        let mut cfg = NetworkConfiguration::all_active(&bs);
        cfg.active = vec![false, false];
        let cost = cluster_cost(&bs, &[0, 1], &cfg, &[0.0, 0.0], &params);
        assert!((cost - 2.0 * 0.5 * 0.1).abs() < 1e-15);

        // rho = 0.4 with P_total = 0.5 W.
        let one = BaseStation::new(0, BsKind::Small, Position::default(), 1.0, 0.1, 1.0 + 1.0)
            .unwrap();
        let mut cfg = NetworkConfiguration::all_active(std::slice::from_ref(&one));
        cfg.load[0] = 0.3;
        assert!((total_power(&one, &cfg) - 0.5).abs() < 1e-15);
        let cost = cluster_cost(std::slice::from_ref(&one), &[0], &cfg, &[0.4], &params);
        assert!((cost - 0.45).abs() < 1e-15);

        let idle = NetworkConfiguration::all_active(&bs);
        let double = CostParams {
            alpha: 1.0,
            beta: 0.5,
        };
        let a = cluster_cost(&bs, &[0, 1], &idle, &[0.0, 0.0], &params);
        let b = cluster_cost(&bs, &[0, 1], &idle, &[0.0, 0.0], &double);
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn bg_examples() {
        assert_eq!(bg_distribution(&[-1.0, -0.5, 0.0], 10.0), vec![1.0 / 3.0; 3]);
        let g = bg_distribution(&[0.1, 0.0], 10.0);
        let e = std::f64::consts::E;
        assert!((g[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((g[0] - 0.7311).abs() < 1e-4 && (g[1] - 0.2689).abs() < 1e-4);
        // No overflow for large regrets.
        let g = bg_distribution(&[500.0, 0.0], 10.0);
        assert_eq!(g, vec![1.0, 0.0]);
    }

    #[test]
    fn bg_approaches_uniform_as_kappa_vanishes() {
        let r = [3.0, -2.0, 0.5, 7.5];
        let g = bg_distribution(&r, 1e-6);
        assert!(g.iter().all(|p| (p - 0.25).abs() < 1e-3));
    }

    fn two_action_learner() -> ClusterLearner {
        let bs = cells(1);
        let actions = build_action_set(&[&bs[0]], &[1.0], 8).unwrap();
        ClusterLearner::new(vec![0], actions, LearnerParams::default())
    }

    #[test]
    fn first_update_takes_full_steps() {
        let mut l = two_action_learner();
        l.r_hat = vec![0.3, 0.0];
        let target = bg_distribution(&l.r_hat, l.params.kappa);
        l.update(1, -0.7);
        assert_eq!(l.u_hat, vec![0.0, -0.7]);
        for (p, g) in l.pi.iter().zip(&target) {
            assert_close!(*p, *g, 1e-15);
        }
        // r_hat = u_hat_old - u_prev with u_prev falling back to -0.7.
        assert_eq!(l.r_hat, vec![0.7, 0.7]);
    }

    /// Mass on the worse action at the rest point of the mean dynamics for two
    /// actions whose utilities differ by `gap`: the regret of the better action
    /// is `p * gap`, so `p = 1 / (1 + exp(kappa * p * gap))`. Solved by bisection.
    fn two_action_rest_point(kappa: f64, gap: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - 1.0 / (1.0 + (kappa * mid * gap).exp()) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn concentrates_on_better_action() {
        let rest = 1.0 - two_action_rest_point(10.0, 1.0);
        assert!((rest - 0.8366).abs() < 1e-3, "{rest}");
        for seed in 0..5 {
            let mut l = two_action_learner();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10_000 {
                let a = l.sample_action(&mut rng);
                l.update(a, if a == 0 { -1.0 } else { 0.0 });
                assert!((l.pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            assert!((l.pi[1] - rest).abs() < 0.03, "seed {seed}: {:?}", l.pi);
            assert!(l.pi[1] > l.pi[0]);
        }
    }

    #[test]
    fn sampling() {
        assert_eq!(sample_index(&[1.0, 0.0, 0.0], 0.999_999), 0);
        assert_eq!(sample_index(&[0.0, 1.0], 0.0), 1);
        assert_eq!(sample_index(&[0.5, 0.5, 0.0], 1.0), 1);

        let l = {
            let bs = cells(2);
            let actions = build_action_set(&[&bs[0], &bs[1]], &[1.0], 8).unwrap();
            ClusterLearner::new(vec![0, 1], actions, LearnerParams::default())
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0usize; 4];
        for _ in 0..100_000 {
            counts[l.sample_action(&mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 100_000.0 - 0.25).abs() < 0.01);
        }

        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| l.sample_action(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));
    }

    #[test]
    fn admissible_exponents() {
        for phi in [0.6, 0.7, 0.8, 0.9, 1.0] {
            assert!(StepSize::Power(phi).is_admissible());
        }
        for phi in [0.5, 0.3, 1.2] {
            assert!(!StepSize::Power(phi).is_admissible());
        }
        assert!(!StepSize::Constant(0.1).is_admissible());
        assert_eq!(StepSize::Power(0.6).at(1), 1.0);
    }

    proptest! {
        #[test]
        fn strategy_stays_on_simplex(
            utilities in prop::collection::vec(-20.0..0.0f64, 2..9),
            seed in 0u64..1000,
            kappa in 0.1..50.0f64,
        ) {
            let bs = cells(3);
            let actions = build_action_set(&[&bs[0], &bs[1], &bs[2]], &[1.0], 8).unwrap();
            let params = LearnerParams { kappa, ..LearnerParams::default() };
            let mut l = ClusterLearner::new(vec![0, 1, 2], actions, params);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..300 {
                let a = l.sample_action(&mut rng);
                l.update(a, utilities[a % utilities.len()]);
                prop_assert!(l.pi.iter().all(|&p| p >= 0.0));
                prop_assert!((l.pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(l.u_hat.iter().chain(&l.r_hat).all(|v| v.is_finite()));
            }
        }

        #[test]
        fn bg_is_permutation_equivariant(r in prop::collection::vec(-3.0..3.0f64, 2..8), shift in 0usize..8) {
            let g = bg_distribution(&r, 10.0);
            let mut rotated = r.clone();
            let k = shift % r.len();
            rotated.rotate_left(k);
            let mut expected = g.clone();
            expected.rotate_left(k);
            let h = bg_distribution(&rotated, 10.0);
            for (a, b) in h.iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-15);
            }
            prop_assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
