//! Dataset ingestion, preprocessing, symmetry/assembler records, evaluation
//! pipelines, and SVG plots around `symcloud-core`.

pub mod config;
pub mod pipeline;
pub mod plot;
pub mod records;
pub mod xyz;

use std::fmt;

/// Single-line error for machine-parsable failure output.
#[derive(Debug, Clone)]
pub struct CliError {
    message: String,
}

impl CliError {
    pub fn new(message: impl Into<String>) -> Self {
        // One line: newlines would break the JSONL error contract.
        let message = message.into().replace('\n', " ");
        Self { message }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
