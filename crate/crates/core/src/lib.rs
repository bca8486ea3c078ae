//! Energy-aware sleep/wake control for small-cell networks: a load-coupled
//! downlink model, spectral clustering of small cells, in-cluster scheduling,
//! load-aware association, regret-based learning and a Monte-Carlo simulator.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
    }};
}

pub mod association;
pub mod clustering;
pub mod coordination;
pub mod eigen;
pub mod error;
pub mod learning;
pub mod netmodel;
pub mod sim;

pub use association::{associate, AssociationConfig, LoadEstimate};
pub use clustering::{
    select_k, spectral_cluster, ClusterPartition, LaplacianKind, LoadSign, SimilarityConfig,
    SimilarityGraph,
};
pub use coordination::{solve_cluster_schedule, Schedule, ScheduleLp};
pub use error::{Error, Result};
pub use learning::{ClusterAction, ClusterLearner, CostParams, LearnerParams, StepSize};
pub use netmodel::{
    BaseStation, BsId, BsKind, ChannelModel, Network, NetworkConfiguration, Orthogonality,
    Position, UserEquipment,
};
pub use sim::{Mode, ScenarioConfig};
