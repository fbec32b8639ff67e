//! Command-line front end: config parsing, experiment dispatch, validation
//! suites, CSV and SVG emission.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod manifest;
pub mod plot;
pub mod presets;
