use segtrade_panel::PanelError;

#[derive(Debug, thiserror::Error)]
pub enum EstimationError {
    #[error(transparent)]
    Panel(#[from] PanelError),

    #[error("region {region} has zero employment in {year}; exposure is undefined")]
    UndefinedExposure { region: String, year: i32 },

    #[error("region {region} has zero male employment in {year}; the female-to-male ratio is undefined")]
    UndefinedOutcome { region: String, year: i32 },

    #[error("singular design: column(s) {} are collinear with the others or have no variation", .columns.join(", "))]
    SingularDesign { columns: Vec<String> },

    #[error("need at least 2 clusters, found {found}")]
    TooFewClusters { found: usize },

    #[error("shock-level variance needs more shocks than parameters ({shocks} shocks, {params} parameters)")]
    TooFewShocks { shocks: usize, params: usize },

    #[error("{n} observations cannot identify {k} parameters")]
    TooFewObservations { n: usize, k: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = EstimationError> = std::result::Result<T, E>;
