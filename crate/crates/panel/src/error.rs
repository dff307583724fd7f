use std::path::PathBuf;

use segtrade_core::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum PanelError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("equilibrium solve failed in year {year} (block {block}): {source}")]
    Simulation {
        year: i32,
        block: usize,
        #[source]
        source: ModelError,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, row {row}: {message}")]
    Parse { path: PathBuf, row: u64, message: String },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: &'static str },

    #[error("{table}, row {row}: duplicate key {key}")]
    DuplicateKey { table: &'static str, row: u64, key: String },

    #[error("{table}: unbalanced panel: {detail}")]
    Unbalanced { table: &'static str, detail: String },

    #[error("{table}, row {row}: {field} = {value} is out of range")]
    OutOfRange { table: &'static str, row: u64, field: &'static str, value: f64 },

    #[error("code `{code}` is not in the {table} concordance (nearest documented entry: {nearest})")]
    UnmappedCode { code: String, table: &'static str, nearest: String },
}

pub type Result<T, E = PanelError> = std::result::Result<T, E>;
