//! Virtual-model-control rocking-cut simulator.
//!
//! The crate couples a rigid-body manipulator to a virtual mechanism of
//! saturating springs, dampers and rail masses via Jacobian-transpose torque
//! mapping, runs the hybrid cutting/raising controller against a penalty
//! contact environment, and computes cutting metrics from the resulting
//! traces.

pub mod chain;
pub mod dynamics;
pub mod vmc;
pub mod toymodel;
pub mod environment;
pub mod rocking;
pub mod metrics;
pub mod scenario;
pub mod sim;
pub mod cli;
