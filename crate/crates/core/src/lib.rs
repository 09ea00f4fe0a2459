//! Discrete-event simulation of TCP Tahoe and Reno sharing a dumbbell
//! bottleneck with a CBR stream, under random (Bernoulli) packet loss.
//!
//! ```
//! use tcpsim::{build_paper_topology, run_scenario, PaperOverrides, TcpVariant};
//!
//! let o = PaperOverrides { duration_s: Some(2.0), ..Default::default() };
//! let cfg = build_paper_topology(0.0, TcpVariant::Reno, &o).unwrap();
//! let run = run_scenario(&cfg).unwrap();
//! assert!(run.summary(1).unwrap().goodput_bps > 0.0);
//! ```

pub mod engine;
pub mod error;
pub mod metrics;
pub mod netmodel;
pub mod scenario;
pub mod tcp;
pub mod traffic;

pub use engine::{EventHandle, EventQueue, RandomSource, SimTime};
pub use error::{ConfigError, ProtocolFault, SimError};
pub use metrics::{FlowSummary, TraceKind, TraceLog, TraceRecord};
pub use scenario::{
    build_paper_topology, run_scenario, run_sweep, PaperOverrides, RunFailure, RunResult, ScenarioConfig, SweepTable,
};
pub use tcp::{TcpParams, TcpVariant};
