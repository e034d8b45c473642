//! Configuration, dispatch and report emission behind the `dilatest` binary.

mod config;
mod emit;
mod run;

pub use config::{Bracket, Command, FamilyKind, GridConfig, MaximalConfig, RunConfig};
pub use emit::{emit, format_float, render, to_csv, to_json, Format};
pub use run::{run, Meta, Report, Table};
