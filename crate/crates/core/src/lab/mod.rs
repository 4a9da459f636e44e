//! Experiment harness: configurations, errors against analytic or overkill
//! references, convergence tables, file output and the oracle suite.

mod config;
mod measure;
mod output;
mod run;
mod verify;

pub use config::{ExperimentConfig, Mode, ProblemId, ReferenceKind, SolverKind};
pub use measure::{
    ancestor_map, effectivity, error_exactness, overkill_reference, triple_norm_error, Overkill,
    Reference, ERROR_EXACTNESS_BOOST,
};
pub use output::{format_csv, parse_csv, render_markdown, write_state_vtk, CSV_HEADER};
pub use run::{build_problem, execute, initial_mesh, run_experiment, ExperimentOutput, TableRow};
pub use verify::{verify, OracleCheck};
