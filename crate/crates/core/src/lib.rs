//! Geometry-based stochastic channel simulator for the 6-100 GHz band.
//!
//! Implements the 3GPP TR 38.900 channel model: scenario parameter tables,
//! LOS probability and pathloss (TR Tables 7.4.1-1 / 7.4.2-1), O2I
//! penetration, spatially correlated shadow fading, cross-correlated
//! large-scale parameters, the step 5-11 cluster/ray fading procedure,
//! analog MIMO beamforming (power method and sector cell scan), spatial
//! consistency updates (Procedure A) and blockage model A. A CLI harness
//! runs time-stepped link simulations and writes reproducible CSV traces.
//!
//! The numeric core is generic over the scalar type via [`num::Float`]
//! (`f32` or `f64`); the aliases below fix `f64`, which is what the CLI and
//! the test suites use.

pub mod antenna;
pub mod beamforming;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod geom;
pub mod large_scale;
pub mod link_engine;
pub mod num;
pub mod params;
pub mod propagation;
pub mod rng;
pub mod scenario;
pub mod small_scale;

use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Errors surfaced by the model and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate link: endpoints coincide")]
    DegenerateLink,
    #[error("mobility trace is empty")]
    EmptyTrace,
    #[error("time {t} s outside trace span [{start}, {end}] s")]
    TimeOutsideTrace { t: f64, start: f64, end: f64 },
    #[error("antenna element index {index} out of range ({count} elements)")]
    ElementOutOfRange { index: usize, count: usize },
    #[error("sector {sector} out of range (1..={count})")]
    SectorOutOfRange { sector: usize, count: usize },
    #[error("{quantity} = {value} outside validity range [{min}, {max}]")]
    OutOfValidityRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("geometric LOS mode requires building data")]
    MissingBuildings,
    #[error("O2I penetration requested for an outdoor UT")]
    OutdoorUt,
    #[error("no parameter table for {scenario} / {condition}")]
    MissingTable {
        scenario: &'static str,
        condition: &'static str,
    },
    #[error("parameter data error: {0}")]
    ParamData(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("power method on a zero channel matrix")]
    ZeroMatrix,
    #[error("no base station to attach to")]
    NoBaseStation,
    #[error("UT {0} is not attached to any BS")]
    UnattachedUt(usize),
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

// Concrete double-precision aliases for the main model types.
pub type Vec3 = geom::Vec3<f64>;
pub type ScenarioParams = scenario::ScenarioParams<f64>;
pub type NodeState = scenario::NodeState<f64>;
pub type Building = scenario::Building<f64>;
pub type AntennaPanel = antenna::AntennaPanel<f64>;
pub type BeamformingVector = antenna::BeamformingVector<f64>;
pub type LspTable = params::LspTable<f64>;
pub type LspSet = large_scale::LspSet<f64>;
pub type ChannelRealization = small_scale::ChannelRealization<f64>;
pub type BlockageState = dynamics::BlockageState<f64>;
pub type SubcarrierGrid = link_engine::SubcarrierGrid<f64>;
pub type SinrSample = link_engine::SinrSample<f64>;
pub use config::SimConfig;
