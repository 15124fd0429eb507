//! Command-line pipeline: synthesize or ingest a forum, fit topics, train, evaluate,
//! ablate and recommend. Every command writes a `manifest.json` with checksums.

mod args;
mod commands;
mod manifest;

use std::fmt;

pub use args::*;
pub use commands::*;
pub use manifest::{sha256_file, Artifact, RunManifest, MANIFEST_FILE};

/// Bad arguments or configuration; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// 2 for usage and configuration errors anywhere in the chain, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let is_usage = err.chain().any(|cause| {
        cause.is::<UsageError>() || cause.downcast_ref::<forumrec::Error>().is_some_and(forumrec::Error::is_usage)
    });
    if is_usage {
        EXIT_USAGE
    } else {
        EXIT_FAILURE
    }
}

pub fn run(command: &Command) -> anyhow::Result<Report> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Lda(a) => cmd_lda(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Recommend(a) => cmd_recommend(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Verify(a) => cmd_verify(a),
    }
}
