//! Joint downlink/uplink 3D deployment of a UAV swarm that charges and then
//! collects data from wireless-powered NB-IoT devices.
//!
//! The crate is organised bottom-up: [`model`] holds the data types, [`channel`]
//! the air-to-ground path loss, [`numerics`] the generic solvers, and the
//! remaining modules the optimization steps and the loop that alternates them.
//!
//! ```
//! use uavdeploy::model::{generate_scenario, ScenarioSpec};
//! use uavdeploy::orchestrator::{run, RunOptions};
//!
//! let scn = generate_scenario(&ScenarioSpec::urban_disc(6, 75.0, 1)).unwrap();
//! let scn = uavdeploy::model::Scenario { uav_count: 2, channel_count: 2, ..scn };
//! let out = run(&scn, &RunOptions { max_iters: 2, ..Default::default() }).unwrap();
//! assert!(out.report.sum_throughput >= out.initial_value);
//! ```

pub mod channel;
pub mod dl_opt;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod orchestrator;
pub mod placement;
pub mod time_sched;
pub mod ul_opt;

pub use error::{Error, Result};
pub use model::{
    AssociationState, ChannelParams, Deployment, RadioParams, Scenario, ScenarioSpec, Schedule, SolutionReport,
    TimeAllocation,
};
pub use orchestrator::{run, Access, Infrastructure, RunOptions, RunResult, TimeMode};
pub use time_sched::SchedulingPolicy;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/scheduling.md")]
    mod scheduling {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
