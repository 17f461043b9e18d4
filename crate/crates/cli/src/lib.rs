//! Batch pipeline around `cccp-core`: corpus files, model files, score
//! tables, reports and the `cccp` command line.

pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod models;
pub mod output;
pub mod pipeline;
pub mod tables;
