//! Run configuration, snapshots and CSV output.

pub mod config;
pub mod csv;
pub mod snapshot;

pub use config::{parse_config, Check, ConnectionConfig, GridConfig, OutputConfig, RunConfig};
pub use csv::{diagnostics_csv, gn_csv, slack_csv};
pub use snapshot::{decode_snapshot, encode_snapshot, read_snapshot, write_snapshot};
