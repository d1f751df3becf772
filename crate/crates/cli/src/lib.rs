//! Library surface of the `coordmap` binary: the subcommand argument
//! structs and their implementations, callable directly from integration
//! tests.

pub mod cluster;
pub mod common;
pub mod detect;
pub mod evaluate;
pub mod simulate;

pub use cluster::{cmd_cluster, ClusterArgs};
pub use detect::{cmd_detect, DetectArgs, DetectSummary, Method};
pub use evaluate::{cmd_eval, EvalArgs};
pub use simulate::{cmd_simulate, SimulateArgs};
