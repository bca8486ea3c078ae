//! Random drops of small cells and UEs around a central macro cell.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::netmodel::{BaseStation, BsKind, Network, Position, UserEquipment};

/// Draws allowed per node before the layout is declared too dense.
pub const MAX_DRAWS: usize = 10_000;

/// Id of the macro cell in every generated network.
pub const MACRO_ID: usize = 0;

/// Places the macro cell at the centre, then the small cells, then the UEs.
///
/// UEs are drawn after every station, so for a fixed seed a drop with more UEs
/// extends a drop with fewer.
pub fn generate_scenario(
    cfg: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<BaseStation>, Vec<UserEquipment>)> {
    let l = &cfg.layout;
    let p = &cfg.power;
    let centre = Position::new(l.width_m / 2.0, l.height_m / 2.0);

    let mut stations = vec![BaseStation::new(
        MACRO_ID,
        BsKind::Macro,
        centre,
        p.macro_p_max_w(),
        p.macro_p_idle_w,
        p.macro_q,
    )?];

    for id in 1..=l.small_cells {
        let pos = draw(rng, l.width_m, l.height_m, "small cell", |x| {
            stations.iter().all(|bs| {
                let min = match bs.kind {
                    BsKind::Macro => l.min_macro_small_m,
                    BsKind::Small => l.min_small_small_m,
                };
                bs.position.distance(x) >= min
            })
        })?;
        stations.push(BaseStation::new(
            id,
            BsKind::Small,
            pos,
            p.small_p_max_w(),
            p.small_p_idle_w,
            p.small_q,
        )?);
    }

    let ues = (0..l.ues)
        .map(|id| {
            let pos = draw(rng, l.width_m, l.height_m, "UE", |x| {
                stations.iter().all(|bs| {
                    let min = match bs.kind {
                        BsKind::Macro => l.min_macro_ue_m,
                        BsKind::Small => l.min_small_ue_m,
                    };
                    bs.position.distance(x) >= min
                })
            })?;
            UserEquipment::new(id, pos, cfg.traffic.rate_bps)
        })
        .collect::<Result<_>>()?;

    Ok((stations, ues))
}

fn draw(
    rng: &mut ChaCha8Rng,
    width: f64,
    height: f64,
    what: &'static str,
    ok: impl Fn(&Position) -> bool,
) -> Result<Position> {
    for _ in 0..MAX_DRAWS {
        let x = Position::new(rng.random::<f64>() * width, rng.random::<f64>() * height);
        if ok(&x) {
            return Ok(x);
        }
    }
    Err(Error::InfeasibleDensity {
        what,
        attempts: MAX_DRAWS,
    })
}

/// Builds the network and, when enabled, applies log-normal shadowing drawn
/// from `shadow_rng` in UE-major order.
pub fn build_network(
    cfg: &ScenarioConfig,
    stations: Vec<BaseStation>,
    ues: Vec<UserEquipment>,
    shadow_rng: &mut ChaCha8Rng,
) -> Result<Network> {
    let mut net = Network::new(stations, ues, cfg.channel_model());
    let sd = cfg.channel.shadowing_std_db;
    if sd > 0.0 {
        let normal = Normal::new(0.0, sd)
            .map_err(|e| crate::error::invalid(format!("shadowing: {e}")))?;
        net.apply_fading(|_, _| 10f64.powf(-normal.sample(shadow_rng) / 10.0));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn macro_only_network() {
        let mut cfg = ScenarioConfig::default();
        cfg.layout.small_cells = 0;
        let (bs, ues) = generate_scenario(&cfg, &mut rng(3)).unwrap();
        assert_eq!(bs.len(), 1);
        assert_eq!(bs[0].kind, BsKind::Macro);
        assert_eq!(bs[0].position, Position::new(350.0, 350.0));
        assert_eq!(ues.len(), cfg.layout.ues);
    }

    #[test]
    fn same_seed_same_layout() {
        let cfg = ScenarioConfig::default();
        let a = generate_scenario(&cfg, &mut rng(11)).unwrap();
        let b = generate_scenario(&cfg, &mut rng(11)).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(&cfg, &mut rng(12)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn ue_drops_are_nested() {
        let mut cfg = ScenarioConfig::default();
        cfg.layout.ues = 10;
        let (bs_small, ues_small) = generate_scenario(&cfg, &mut rng(5)).unwrap();
        cfg.layout.ues = 40;
        let (bs_large, ues_large) = generate_scenario(&cfg, &mut rng(5)).unwrap();
        assert_eq!(bs_small, bs_large);
        assert_eq!(ues_small[..], ues_large[..10]);
    }

    #[test]
    fn minimum_distances_hold() {
        let cfg = ScenarioConfig::default();
        let l = &cfg.layout;
        for seed in 0..1000 {
            let (bs, ues) = generate_scenario(&cfg, &mut rng(seed)).unwrap();
            let m = &bs[0];
            for (i, a) in bs.iter().enumerate().skip(1) {
                assert!(a.position.distance(&m.position) >= l.min_macro_small_m);
                for b in &bs[i + 1..] {
                    assert!(a.position.distance(&b.position) >= l.min_small_small_m);
                }
                assert!((0.0..=l.width_m).contains(&a.position.x));
                assert!((0.0..=l.height_m).contains(&a.position.y));
            }
            for u in &ues {
                assert!(u.position.distance(&m.position) >= l.min_macro_ue_m);
                for b in &bs[1..] {
                    assert!(u.position.distance(&b.position) >= l.min_small_ue_m);
                }
            }
        }
    }

    #[test]
    fn overcrowded_layout_is_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.layout.width_m = 100.0;
        cfg.layout.height_m = 100.0;
        cfg.layout.small_cells = 20;
        let err = generate_scenario(&cfg, &mut rng(1)).unwrap_err();
        assert!(matches!(
            err,
            Error::InfeasibleDensity {
                what: "small cell",
                attempts: MAX_DRAWS
            }
        ));
    }

    #[test]
    fn shadowing_changes_gains_only_when_enabled() {
        let mut cfg = ScenarioConfig::default();
        let (bs, ues) = generate_scenario(&cfg, &mut rng(2)).unwrap();
        let plain = build_network(&cfg, bs.clone(), ues.clone(), &mut rng(9)).unwrap();
        let reference = Network::new(bs.clone(), ues.clone(), cfg.channel_model());
        assert_eq!(plain.gains_of(0), reference.gains_of(0));

        cfg.channel.shadowing_std_db = 8.0;
        let shadowed = build_network(&cfg, bs, ues, &mut rng(9)).unwrap();
        assert_ne!(shadowed.gains_of(0), reference.gains_of(0));
    }
}
