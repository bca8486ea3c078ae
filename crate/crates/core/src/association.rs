//! Load-aware UE association and slow load estimation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::learning::StepSize;
use crate::netmodel::{BsId, Network, NetworkConfiguration};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationConfig {
    /// Load aversion; zero gives plain strongest-signal association.
    pub delta: f64,
    /// Step size of the load estimator, much slower than association.
    pub nu: StepSize,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            nu: StepSize::Power(0.9),
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) {
            return Err(invalid(format!("delta must be >= 0, got {}", self.delta)));
        }
        self.nu.validate()
    }
}

/// Advertised loads and the previous step's measured loads.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadEstimate {
    pub rho_hat: Vec<f64>,
    pub last_rho: Vec<f64>,
}

impl LoadEstimate {
    pub fn new(n_stations: usize) -> Self {
        Self {
            rho_hat: vec![0.0; n_stations],
            last_rho: vec![0.0; n_stations],
        }
    }
}

/// Serving station for `ue`: the argmax of `(1 - rho_hat)^delta * P * I * h`.
///
/// Sleeping stations are never chosen. Ties go to the stronger raw received
/// power, then to the lower id.
pub fn associate(
    net: &Network,
    ue: usize,
    cfg: &NetworkConfiguration,
    est: &LoadEstimate,
    delta: f64,
) -> Result<BsId> {
    let gains = net.gains_of(ue);
    let mut best: Option<(f64, f64, BsId)> = None;
    for b in 0..net.stations.len() {
        if !cfg.active[b] {
            continue;
        }
        let rx = cfg.power[b] * gains[b];
        let headroom = (1.0 - est.rho_hat[b]).clamp(0.0, 1.0);
        let score = headroom.powf(delta) * rx;
        let better = match best {
            None => true,
            Some((s, r, _)) => score > s || (score == s && rx > r),
        };
        if better {
            best = Some((score, rx, b));
        }
    }
    best.map(|(_, _, b)| b).ok_or(Error::NoCoverage)
}

/// Associates every UE; `None` marks a UE with no active station in reach.
pub fn associate_all(
    net: &Network,
    cfg: &NetworkConfiguration,
    est: &LoadEstimate,
    delta: f64,
) -> Vec<Option<BsId>> {
    (0..net.ues.len())
        .map(|m| associate(net, m, cfg, est, delta).ok())
        .collect()
}

/// `rho_hat(t) = rho_hat(t-1) + nu(t) (rho(t-1) - rho_hat(t-1))`.
pub fn update_load_estimate(
    est: &LoadEstimate,
    rho_prev: &[f64],
    t: u64,
    schedule: StepSize,
) -> LoadEstimate {
    update_load_estimate_with(est, rho_prev, schedule.at(t))
}

pub fn update_load_estimate_with(est: &LoadEstimate, rho_prev: &[f64], nu: f64) -> LoadEstimate {
    let rho_hat = est
        .rho_hat
        .iter()
        .zip(rho_prev)
        .map(|(h, r)| h + nu * (r - h))
        .collect();
    LoadEstimate {
        rho_hat,
        last_rho: rho_prev.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{BaseStation, BsKind, ChannelModel, Position, UserEquipment};
    use proptest::prelude::*;

    /// Two or more small cells seen by one UE through the given gains.
    fn net_with_gains(gains: Vec<f64>) -> Network {
        let stations = (0..gains.len())
            .map(|b| {
                BaseStation::new(b, BsKind::Small, Position::new(b as f64, 0.0), 1.0, 0.1, 1.1)
                    .unwrap()
            })
            .collect();
        let ues = vec![UserEquipment::new(0, Position::default(), 1e5).unwrap()];
        Network::with_gains(stations, ues, ChannelModel::default(), vec![gains]).unwrap()
    }

    fn estimate(rho_hat: Vec<f64>) -> LoadEstimate {
        LoadEstimate {
            last_rho: vec![0.0; rho_hat.len()],
            rho_hat,
        }
    }

    #[test]
    fn zero_delta_is_strongest_signal() {
        let net = net_with_gains(vec![1e-9, 3e-9, 2e-9]);
        let cfg = NetworkConfiguration::all_active(&net.stations);
        let est = estimate(vec![0.0, 0.99, 0.0]);
        assert_eq!(associate(&net, 0, &cfg, &est, 0.0).unwrap(), 1);
    }

    #[test]
    fn load_breaks_equal_signal() {
        let net = net_with_gains(vec![1e-9, 1e-9]);
        let cfg = NetworkConfiguration::all_active(&net.stations);
        let est = estimate(vec![0.9, 0.1]);
        assert_eq!(associate(&net, 0, &cfg, &est, 1.0).unwrap(), 1);
    }

    #[test]
    fn hand_evaluated_scores() {
        // P_rx = (2, 1) mW, rho_hat = (0.75, 0), delta = 2: scores (0.125, 1).
        let net = net_with_gains(vec![2e-3, 1e-3]);
        let cfg = NetworkConfiguration::all_active(&net.stations);
        let est = estimate(vec![0.75, 0.0]);
        assert_eq!(associate(&net, 0, &cfg, &est, 2.0).unwrap(), 1);
        assert_eq!(associate(&net, 0, &cfg, &est, 0.0).unwrap(), 0);
    }

    #[test]
    fn sleeping_stations_are_skipped() {
        let net = net_with_gains(vec![1e-6, 1e-12]);
        let mut cfg = NetworkConfiguration::all_active(&net.stations);
        cfg.active[0] = false;
        let est = LoadEstimate::new(2);
        assert_eq!(associate(&net, 0, &cfg, &est, 1.0).unwrap(), 1);
        cfg.active[1] = false;
        assert!(matches!(associate(&net, 0, &cfg, &est, 1.0), Err(Error::NoCoverage)));
        assert_eq!(associate_all(&net, &cfg, &est, 1.0), vec![None]);
    }

    #[test]
    fn ties_prefer_raw_power_then_low_id() {
        // Equal scores 0.5e-9 but different raw power.
        let net = net_with_gains(vec![1e-9, 0.5e-9, 0.5e-9]);
        let cfg = NetworkConfiguration::all_active(&net.stations);
        let est = estimate(vec![0.5, 0.0, 0.0]);
        assert_eq!(associate(&net, 0, &cfg, &est, 1.0).unwrap(), 0);
        let est = estimate(vec![1.0, 0.0, 0.0]);
        assert_eq!(associate(&net, 0, &cfg, &est, 1.0).unwrap(), 1);
    }

    #[test]
    fn estimator_examples() {
        let est = estimate(vec![0.4]);
        assert_eq!(update_load_estimate_with(&est, &[0.8], 1.0).rho_hat, vec![0.8]);
        let half = update_load_estimate_with(&est, &[0.8], 0.5).rho_hat[0];
        assert!((half - 0.6).abs() < 1e-15);
        assert_eq!(update_load_estimate(&est, &[0.8], 1, StepSize::Power(0.9)).rho_hat, vec![0.8]);

        let mut est = estimate(vec![0.0]);
        for t in 1..=2000 {
            est = update_load_estimate(&est, &[0.35], t, StepSize::Power(0.9));
        }
        assert!((est.rho_hat[0] - 0.35).abs() < 1e-9);
        assert_eq!(est.last_rho, vec![0.35]);
    }

    proptest! {
        #[test]
        fn estimate_stays_in_unit_interval(
            start in 0.0..=1.0f64,
            rhos in prop::collection::vec(0.0..=1.0f64, 1..50),
            nu in 0.001..=1.0f64,
        ) {
            let mut est = estimate(vec![start]);
            for r in rhos {
                est = update_load_estimate_with(&est, &[r], nu);
                prop_assert!((0.0..=1.0).contains(&est.rho_hat[0]));
            }
        }

        #[test]
        fn association_invariants(
            gains in prop::collection::vec(1e-12..1e-6f64, 2..6),
            loads in prop::collection::vec(0.0..1.0f64, 6),
            delta in 0.0..5.0f64,
            scale in 1e-3..1e3f64,
        ) {
            let n = gains.len();
            let net = net_with_gains(gains.clone());
            let cfg = NetworkConfiguration::all_active(&net.stations);
            let est = estimate(loads[..n].to_vec());
            let pick = associate(&net, 0, &cfg, &est, delta).unwrap();

            let scaled = net_with_gains(gains.iter().map(|g| (g * scale).min(1.0)).collect());
            if gains.iter().all(|g| g * scale <= 1.0) {
                prop_assert_eq!(associate(&scaled, 0, &cfg, &est, delta).unwrap(), pick);
            }

            // Equal received power: the lighter-loaded station wins for any delta > 0.
            let equal = net_with_gains(vec![1e-9, 1e-9]);
            let cfg2 = NetworkConfiguration::all_active(&equal.stations);
            let (a, b) = (loads[0], loads[1]);
            if a != b && delta > 0.0 {
                let winner = associate(&equal, 0, &cfg2, &estimate(vec![a, b]), delta).unwrap();
                prop_assert_eq!(winner, if a < b { 0 } else { 1 });
            }
        }
    }
}
