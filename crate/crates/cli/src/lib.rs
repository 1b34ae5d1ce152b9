//! Command-line front end of `gcnsbm`: run specifications, config files,
//! presets, result tables and plots.

pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod plot;
pub mod presets;
pub mod run;
pub mod spec;
pub mod table;
