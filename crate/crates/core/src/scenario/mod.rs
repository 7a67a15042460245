//! Scenario files in, result bundles out.

mod file;
mod output;

pub use file::*;
pub use output::{fixed, sci, sha256_hex, FileEntry, OutputError, ResultBundle, RunManifest, Table};

use thiserror::Error;

use crate::error::ModelError;

/// Problems with a scenario document. Keys are dotted paths, e.g.
/// `deployment.altitude_km`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {message}")]
    Io { path: String, message: String },

    #[error("malformed scenario: {0}")]
    Malformed(String),

    #[error("unknown key `{key}`")]
    UnknownKey { key: String },

    #[error("key `{key}` must be a {expected}")]
    WrongType { key: String, expected: String },

    #[error("key `{key}` = {value} {constraint}")]
    OutOfRange { key: String, value: String, constraint: String },

    #[error("unsupported scenario version {0}; this build reads version 1")]
    UnsupportedVersion(i64),

    #[error("section [{section}] rejected: {source}")]
    Model {
        section: &'static str,
        #[source]
        source: ModelError,
    },
}
