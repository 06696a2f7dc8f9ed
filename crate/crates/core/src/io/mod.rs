//! File formats: tensor containers, checkpoints, CSV/JSON tables and PNG
//! export.

mod checkpoint;
pub mod container;
pub mod png;
mod table;

pub use checkpoint::{load_checkpoint, read_manifest, save_checkpoint, CheckpointManifest, ParamEntry};
pub use container::{read_tensor, write_tensor};
pub use table::{config_hash, provenance_line, read_csv, read_json, write_csv, write_json, TOOL_VERSION};
