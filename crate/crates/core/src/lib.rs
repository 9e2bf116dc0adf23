pub mod coverage;
pub mod dsl;
pub mod gateway;
pub mod prompts;
pub mod runner;
pub mod spec_index;
pub mod triage;
pub mod workflow;
