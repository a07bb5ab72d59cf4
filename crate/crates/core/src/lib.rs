//! Hybrid human+machine forecasting engine.
//!
//! The crate covers the computational core of a crowd forecasting
//! tournament: scoring forecasts with Brier rules, aggregating human
//! forecasts and blending them with automated time-series models, choosing
//! which forecasts to collect under a budget, and simulating whole
//! tournaments to study scale and allocation.

pub mod aggregation;
pub mod allocation;
pub mod domain;
pub mod error;
pub mod exec;
pub mod io;
pub mod replay;
pub mod scoring;
pub mod simulator;
pub mod stats;
pub mod tsmodels;

pub use domain::{Day, Fill, Forecast, Ifp, IfpKind, Source, Timestamp, TournamentLog};
pub use error::{Error, Result};
pub use exec::Exec;
