//! Synthetic labor and trade panels generated from the segmented trade
//! model, their CSV representation, and the industry concordances used to
//! line up survey and trade classifications.

pub mod concordance;
pub mod data;
pub mod error;
pub mod io;
pub mod sim;

pub use concordance::{map_code, Concordance, ConcordanceRow, Mapping, EBOPS_TO_ENPE, ISIC_TO_ENPE};
pub use data::{ControlsRow, EmploymentRow, ExportRow, GdpRow, Panel};
pub use error::{PanelError, Result};
pub use io::{read_panel, write_panel, write_table, PanelPaths};
pub use sim::{simulate, simulate_panel, ControlProcess, DestinationProfile, GdpProcess, SimConfig, Simulation, TradeGeometry};
