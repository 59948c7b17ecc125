//! Library surface of the `retrodict` command-line tool: scenario-file
//! schema, pipeline execution, report emission, plotting and verification.

pub mod error;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod schema;
pub mod verify;

pub use error::{CliError, CliResult};
pub use pipeline::{build_scenario, run_pipeline, PipelineOptions};
pub use schema::{parse_scenario_file, parse_scenario_str, ScenarioFile};
