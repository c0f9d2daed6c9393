//! Batch front-end for the contact-jet toolkit: problem specifications,
//! the built-in acceptance battery, reports and replay.

pub mod cases;
pub mod error;
pub mod replay;
pub mod report;
pub mod run;
pub mod spec;
pub mod suite;

pub use error::{CliError, CliResult};
pub use report::{RunReport, Verdict};
pub use suite::{run_suite, SuiteOptions};

/// Exit code for input errors.
pub const EXIT_INPUT: i32 = 3;

/// Applies the `CONTACT_THREADS` override to the global pool.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("CONTACT_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input("CONTACT_THREADS", format!("expected a positive integer, got `{v}`")))?;
    // a pool that already exists keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
