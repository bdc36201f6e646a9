//! Configuration files and result export.

mod config;
mod export;

pub use config::{
    config_to_string, default_pulse, load_config, parse_config, save_config, BoundsBlock, ConfigFile,
    OptimizationBlock, SimulationBlock,
};
pub use export::{
    export_spectrum, fmt_number, loss_table_to_string, series_to_string, spectrum_records, spectrum_to_string,
    to_json, write_text, Format, SpectrumRecord, SPECTRUM_HEADER,
};
