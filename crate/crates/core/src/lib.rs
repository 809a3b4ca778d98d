//! Interactive lattice-Boltzmann free-surface simulator with a remote
//! steering interface.
//!
//! The solver ([`lattice`], [`boundary`], [`free_surface`], [`sim`]) is
//! driven by the steering [`engine`], which applies client edits strictly
//! between iterations and publishes immutable snapshots. The [`protocol`]
//! codec and the [`server`] expose it over TCP and WebSocket; [`runner`]
//! provides the headless scenario runner and benchmark.

pub mod boundary;
pub mod client;
pub mod engine;
pub mod error;
pub mod extract;
pub mod free_surface;
pub mod lattice;
pub mod protocol;
pub mod runner;
pub mod scenario;
pub mod server;
pub mod sim;

pub use error::SimError;
pub use sim::{PhaseTimings, Simulation, StepDiagnostics};
