use thiserror::Error;

use crate::netmodel::BsId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inactive server: base station {0} is asleep")]
    InactiveServer(BsId),

    #[error("no coverage: every base station is asleep")]
    NoCoverage,

    #[error("uncovered UEs: {ues} UEs belong to a cluster with no active member")]
    UncoveredUes { ues: usize },

    #[error("cluster is empty")]
    EmptyCluster,

    #[error(
        "action space of {size} exceeds the cap of {cap}; reduce power levels or cluster size"
    )]
    ActionSpaceTooLarge { size: usize, cap: usize },

    #[error("power budget exceeded at base station {bs}: {total} W > {max} W")]
    PowerBudget { bs: BsId, total: f64, max: f64 },

    #[error("infeasible density: could not place {what} after {attempts} draws")]
    InfeasibleDensity { what: &'static str, attempts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
