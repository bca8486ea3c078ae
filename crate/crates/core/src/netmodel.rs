//! Downlink radio and power model.
//!
//! All base stations share one carrier. A UE's rate is the Shannon rate of its
//! SINR, where each interferer radiates with its *effective* power, i.e. its
//! transmit power scaled by its load (duty cycle). Base stations that share a
//! cluster are time-orthogonalised by the cluster head and do not interfere
//! with one another.
//!
//! Loads and rates are mutually dependent, so [`compute_loads`] solves the
//! coupling with a damped fixed-point iteration.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Index of a base station in [`Network::stations`].
pub type BsId = usize;

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BsKind {
    Macro,
    Small,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub id: BsId,
    pub kind: BsKind,
    pub position: Position,
    /// Maximum transmit power in watts.
    pub p_max: f64,
    /// Baseband power drawn while asleep, in watts.
    pub p_idle: f64,
    /// Activation overhead factor; an active station draws `q * p_idle` on top of its radiated power.
    pub q: f64,
    pub never_sleeps: bool,
}

impl BaseStation {
    pub fn new(
        id: BsId,
        kind: BsKind,
        position: Position,
        p_max: f64,
        p_idle: f64,
        q: f64,
    ) -> Result<Self> {
        if !(q > 1.0) {
            return Err(invalid(format!("q must exceed 1, got {q}")));
        }
        if !(p_idle >= 0.0 && p_idle < p_max) {
            return Err(invalid(format!(
                "need 0 <= p_idle < p_max, got p_idle={p_idle}, p_max={p_max}"
            )));
        }
        Ok(Self {
            id,
            kind,
            position,
            p_max,
            p_idle,
            q,
            never_sleeps: kind == BsKind::Macro,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserEquipment {
    pub id: usize,
    pub position: Position,
    /// Offered traffic in bits/s (packet rate times mean packet size).
    pub traffic_rate: f64,
    pub serving_bs: Option<BsId>,
}

impl UserEquipment {
    pub fn new(id: usize, position: Position, traffic_rate: f64) -> Result<Self> {
        if !(traffic_rate > 0.0) {
            return Err(invalid(format!("traffic rate must be positive, got {traffic_rate}")));
        }
        Ok(Self {
            id,
            position,
            traffic_rate,
            serving_bs: None,
        })
    }
}

/// `PL(d) = intercept + slope * log10(d / 1 km)` in dB, with `d` clamped below
/// at `min_distance_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDistancePathLoss {
    pub intercept_db: f64,
    pub slope_db: f64,
    pub min_distance_m: f64,
}

impl LogDistancePathLoss {
    pub const MACRO: Self = Self {
        intercept_db: 128.1,
        slope_db: 37.6,
        min_distance_m: 35.0,
    };
    pub const SMALL: Self = Self {
        intercept_db: 140.7,
        slope_db: 37.6,
        min_distance_m: 10.0,
    };

    pub fn loss_db(&self, distance_m: f64) -> f64 {
        let d_km = distance_m.max(self.min_distance_m) / 1000.0;
        self.intercept_db + self.slope_db * d_km.log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub pathloss_macro: LogDistancePathLoss,
    pub pathloss_small: LogDistancePathLoss,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            noise_psd_dbm_hz: -174.0,
            pathloss_macro: LogDistancePathLoss::MACRO,
            pathloss_small: LogDistancePathLoss::SMALL,
        }
    }
}

impl ChannelModel {
    pub fn pathloss(&self, kind: BsKind) -> &LogDistancePathLoss {
        match kind {
            BsKind::Macro => &self.pathloss_macro,
            BsKind::Small => &self.pathloss_small,
        }
    }

    /// Noise power over the whole band, in watts.
    pub fn noise_power(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz) * self.bandwidth_hz
    }

    /// Linear channel gain `10^(-PL/10)` from `bs` to location `x`.
    pub fn gain(&self, bs: &BaseStation, x: Position) -> f64 {
        let pl = self.pathloss(bs.kind).loss_db(bs.position.distance(&x));
        10f64.powf(-pl / 10.0).min(1.0)
    }
}

/// Free-function form of [`ChannelModel::gain`] using the default path-loss models.
pub fn channel_gain(bs: &BaseStation, x: Position) -> f64 {
    ChannelModel::default().gain(bs, x)
}

/// Shannon rate for the given received signal, interference and noise powers.
pub fn shannon_rate(bandwidth_hz: f64, signal: f64, interference: f64, noise: f64) -> f64 {
    bandwidth_hz * (1.0 + signal / (interference + noise)).log2()
}

/// Static description of a drop: stations, UEs, and the link gain of every
/// (UE, station) pair. UEs do not move within a run, so gains are computed once.
#[derive(Debug, Clone)]
pub struct Network {
    pub stations: Vec<BaseStation>,
    pub ues: Vec<UserEquipment>,
    pub channel: ChannelModel,
    gains: Vec<Vec<f64>>,
}

impl Network {
    pub fn new(stations: Vec<BaseStation>, ues: Vec<UserEquipment>, channel: ChannelModel) -> Self {
        let gains = ues
            .iter()
            .map(|ue| stations.iter().map(|bs| channel.gain(bs, ue.position)).collect())
            .collect();
        Self {
            stations,
            ues,
            channel,
            gains,
        }
    }

    /// Builds a network with caller-supplied gains, indexed `[ue][bs]`.
    pub fn with_gains(
        stations: Vec<BaseStation>,
        ues: Vec<UserEquipment>,
        channel: ChannelModel,
        gains: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if gains.len() != ues.len() || gains.iter().any(|row| row.len() != stations.len()) {
            return Err(invalid("gain table must be |UE| x |BS|"));
        }
        if gains.iter().flatten().any(|&g| !(g > 0.0 && g <= 1.0)) {
            return Err(invalid("channel gains must lie in (0, 1]"));
        }
        Ok(Self {
            stations,
            ues,
            channel,
            gains,
        })
    }

    /// Multiplies every link gain by `factor(ue, bs)`, clamping the result to (0, 1].
    pub fn apply_fading(&mut self, mut factor: impl FnMut(usize, BsId) -> f64) {
        for (m, row) in self.gains.iter_mut().enumerate() {
            for (b, g) in row.iter_mut().enumerate() {
                *g = (*g * factor(m, b)).clamp(f64::MIN_POSITIVE, 1.0);
            }
        }
    }

    pub fn gain(&self, ue: usize, bs: BsId) -> f64 {
        self.gains[ue][bs]
    }

    pub fn gains_of(&self, ue: usize) -> &[f64] {
        &self.gains[ue]
    }

    pub fn small_cells(&self) -> impl Iterator<Item = &BaseStation> {
        self.stations.iter().filter(|bs| bs.kind == BsKind::Small)
    }
}

/// Per-station power, on/off state, and load.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfiguration {
    pub power: Vec<f64>,
    pub active: Vec<bool>,
    /// Loads used as the interference duty cycle; kept within [0, 1].
    pub load: Vec<f64>,
}

impl NetworkConfiguration {
    /// Every station on at full power with zero load.
    pub fn all_active(stations: &[BaseStation]) -> Self {
        Self {
            power: stations.iter().map(|bs| bs.p_max).collect(),
            active: vec![true; stations.len()],
            load: vec![0.0; stations.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn indicator(&self, bs: BsId) -> f64 {
        if self.active[bs] {
            1.0
        } else {
            0.0
        }
    }

    /// Effective radiated power `rho * P * I`.
    pub fn work_power(&self, bs: BsId) -> f64 {
        self.load[bs].clamp(0.0, 1.0) * self.power[bs] * self.indicator(bs)
    }
}

/// Which stations are time-orthogonalised with each other.
///
/// Stations in the same group never interfere. Stations without a group (the
/// macro cell) interfere with everyone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orthogonality {
    group_of: Vec<Option<usize>>,
}

impl Orthogonality {
    /// No coordination; every other active station interferes.
    pub fn none(n_stations: usize) -> Self {
        Self {
            group_of: vec![None; n_stations],
        }
    }

    pub fn from_groups(n_stations: usize, groups: &[Vec<BsId>]) -> Self {
        let mut group_of = vec![None; n_stations];
        for (g, members) in groups.iter().enumerate() {
            for &b in members {
                group_of[b] = Some(g);
            }
        }
        Self { group_of }
    }

    pub fn group_of(&self, bs: BsId) -> Option<usize> {
        self.group_of[bs]
    }

    pub fn coordinated(&self, a: BsId, b: BsId) -> bool {
        a == b || matches!((self.group_of[a], self.group_of[b]), (Some(x), Some(y)) if x == y)
    }
}

/// Interference seen by `ue` when served by `serving`, in watts.
pub fn interference(
    net: &Network,
    ue: usize,
    serving: BsId,
    cfg: &NetworkConfiguration,
    orth: &Orthogonality,
) -> f64 {
    let gains = net.gains_of(ue);
    (0..net.stations.len())
        .filter(|&b| !orth.coordinated(serving, b))
        .map(|b| cfg.work_power(b) * gains[b])
        .sum()
}

/// Downlink rate in bits/s delivered to `ue` by `serving`.
pub fn rate(
    net: &Network,
    ue: usize,
    serving: BsId,
    cfg: &NetworkConfiguration,
    orth: &Orthogonality,
) -> Result<f64> {
    if !cfg.active[serving] {
        return Err(Error::InactiveServer(serving));
    }
    let signal = cfg.power[serving] * net.gain(ue, serving);
    let interf = interference(net, ue, serving, cfg, orth);
    Ok(shannon_rate(
        net.channel.bandwidth_hz,
        signal,
        interf,
        net.channel.noise_power(),
    ))
}

/// Radiated plus circuit power: `p_idle` asleep, `rho * P + q * p_idle` awake.
///
/// The duty cycle is capped at one; overload is accounted for in the load term
/// of the cost instead.
pub fn total_power(bs: &BaseStation, cfg: &NetworkConfiguration) -> f64 {
    if cfg.active[bs.id] {
        cfg.work_power(bs.id) + bs.q * bs.p_idle
    } else {
        bs.p_idle
    }
}

/// Rejects configurations where some station draws more than its `p_max`.
pub fn check_power_budget(stations: &[BaseStation], cfg: &NetworkConfiguration) -> Result<()> {
    for bs in stations {
        if cfg.power[bs.id] > bs.p_max * (1.0 + 1e-12) {
            return Err(Error::PowerBudget {
                bs: bs.id,
                total: cfg.power[bs.id],
                max: bs.p_max,
            });
        }
        let total = total_power(bs, cfg);
        if total > bs.p_max * (1.0 + 1e-12) {
            return Err(Error::PowerBudget {
                bs: bs.id,
                total,
                max: bs.p_max,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointParams {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointParams {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadSolution {
    /// Loads clamped to [0, 1].
    pub load: Vec<f64>,
    /// Unclamped loads; above one means the station cannot carry its traffic.
    pub raw: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// One evaluation of `rho_b = sum_m z_bm * traffic_m / R_b(x_m)` with the
/// interference frozen at `cfg.load`.
pub fn evaluate_loads(
    net: &Network,
    cfg: &NetworkConfiguration,
    assignment: &[Option<BsId>],
    orth: &Orthogonality,
) -> Result<Vec<f64>> {
    let mut load = vec![0.0; net.stations.len()];
    for (m, serving) in assignment.iter().enumerate() {
        if let Some(b) = *serving {
            let r = rate(net, m, b, cfg, orth)?;
            load[b] += net.ues[m].traffic_rate / r;
        }
    }
    Ok(load)
}

/// Solves the load/rate coupling by damped fixed-point iteration starting from
/// `cfg.load`. UEs with no server (`None`) carry no load.
///
/// On non-convergence the last iterate is returned with `converged == false`.
pub fn compute_loads(
    net: &Network,
    cfg: &NetworkConfiguration,
    assignment: &[Option<BsId>],
    orth: &Orthogonality,
    params: &FixedPointParams,
) -> Result<LoadSolution> {
    let gamma = params.damping;
    let mut work = cfg.clone();
    let mut raw: Vec<f64> = cfg.load.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        let next = evaluate_loads(net, &work, assignment, orth)?;
        iterations += 1;
        let residual = next
            .iter()
            .zip(&raw)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual < params.tolerance {
            raw = next;
            converged = true;
            break;
        }
        for (r, n) in raw.iter_mut().zip(&next) {
            *r = (1.0 - gamma) * *r + gamma * n;
        }
        for (w, r) in work.load.iter_mut().zip(&raw) {
            *w = r.clamp(0.0, 1.0);
        }
    }
    let load = raw.iter().map(|r| r.clamp(0.0, 1.0)).collect();
    Ok(LoadSolution {
        load,
        raw,
        iterations,
        converged,
    })
}
