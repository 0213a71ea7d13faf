//! Vulnerability detection over token-level semantic vulnerability graphs.
//!
//! Pipeline: [`lexer`] turns a C/C++ function into tokens, [`svg`] links them
//! with sequential, data-flow, control-flow and poacher-flow edges, [`embed`]
//! gives every node a feature vector, and [`nn`] runs a residual two-layer GCN
//! with a detection head and a CWE head trained under focal loss. [`corpus`]
//! loads and synthesizes labelled datasets; [`run`] ties everything together
//! for the command-line tool.

pub mod config;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod lexer;
pub mod nn;
pub mod run;
pub mod svg;

pub use config::AnalysisConfig;
pub use error::{Error, ErrorFamily, Result};
