use std::path::PathBuf;

use thiserror::Error;

use segtrade_core::ModelError;
use segtrade_econometrics::EstimationError;
use segtrade_panel::PanelError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Panel(#[from] PanelError),

    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;
pub const EXIT_ESTIMATION: u8 = 4;

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::NonConvergence { .. } => EXIT_CONVERGENCE,
        _ => EXIT_VALIDATION,
    }
}

fn panel_code(e: &PanelError) -> u8 {
    match e {
        PanelError::Simulation { source, .. } => model_code(source),
        _ => EXIT_VALIDATION,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_VALIDATION,
            CliError::Model(e) => model_code(e),
            CliError::Panel(e) => panel_code(e),
            CliError::Estimation(EstimationError::Panel(e)) => panel_code(e),
            CliError::Estimation(_) => EXIT_ESTIMATION,
        }
    }
}
