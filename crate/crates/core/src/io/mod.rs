//! Files in and out: canonical CSV schemas, mapped ingestion of external
//! forecast exports, the JSON run configuration, tabular reports and run
//! manifests.
//!
//! Canonical schemas (UTF-8, comma separated, header row, ISO-8601 dates,
//! `|` between list items):
//!
//! | file | columns |
//! |------|---------|
//! | `ifps.csv` | `ifp_id,title,kind,options,open_date,close_date,resolved_option,series_ref,thresholds,horizon_kind` |
//! | `forecasts.csv` | `ifp_id,source,date,ordinal,probs` |
//! | `conditions.csv` | `user_id,condition` |
//! | `series.csv` | `series_id,date,value` |
//!
//! Sources are written `human:<id>`, `machine:<id>` or `slot:<id>`.

mod canonical;
mod config;
mod ingest;
mod manifest;
mod reports;

pub use canonical::*;
pub use config::{AllocationSection, MachineSection, RunConfig, ScoringSection, SparsitySection};
pub use ingest::{ingest, write_rejects, IngestMapping, Ingested, ProbabilityScale, Reject, DEFAULT_MAX_REJECT_RATE};
pub use manifest::{sha256_file, sha256_hex, FileDigest, RunManifest};
pub use reports::*;
