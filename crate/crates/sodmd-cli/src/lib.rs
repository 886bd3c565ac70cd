//! Library surface of the `sodmd` command-line tool: subcommand
//! implementations and the model-file format, kept out of `main` so
//! integration tests can drive them directly.

pub mod commands;
pub mod model_file;

/// Process exit code for an error, stable for scripting: 2 for bad input,
/// 3 for data-format problems, 4 for numerical degeneracy, 1 otherwise.
pub fn exit_code(error: &sodmd::Error) -> i32 {
    match error {
        sodmd::Error::InvalidInput(_) | sodmd::Error::MissingInitialVelocity { .. } => 2,
        sodmd::Error::Format { .. } => 3,
        sodmd::Error::DegenerateData(_) => 4,
        _ => 1,
    }
}
