//! CSV ingestion, report serialization and run configuration.

mod config;
mod panel;
mod report;

pub use config::{GridSpec, RunConfig, SparsitySpec, OUTPUT_DIR_ENV};
pub use panel::{
    align_state, apply_transform, load_panel_csv, load_state_csv, write_panel_csv, Layout, PanelData, StateSeries,
    StateTransform,
};
pub use report::{format_float, render, write_report, Cell, Format, Table};
