//! Script language, planner and runner behind the `qtoroidal` binary.

pub mod dsl;
pub mod plan;
pub mod run;

pub use dsl::{parse, ParseError, Script};
pub use plan::{plan, Defaults, Job};
pub use run::{run, RunOptions, RunReport};
