//! Command-line driver: configuration, the adaptive loop, one-shot solves
//! and the matrix-level verification battery.

pub mod adapt;
pub mod config;
pub mod problem;
pub mod solve;
pub mod verify;

use clustergap::Error;

pub const THREADS_ENV: &str = "CLUSTER_GAP_THREADS";

pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_SPECTRUM: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;
pub const EXIT_NOT_CONVERGED: i32 = 5;

/// Exit status for an error chain: distinct codes for an empty contour and
/// for non-convergence.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        match cause.downcast_ref::<Error>() {
            Some(Error::NoSpectrumInContour { .. }) => return EXIT_NO_SPECTRUM,
            Some(Error::NotConverged { .. }) => return EXIT_NOT_CONVERGED,
            _ => {}
        }
    }
    EXIT_ERROR
}

/// Thread count from the flag, else from `CLUSTER_GAP_THREADS`.
pub fn thread_count(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let n: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("{THREADS_ENV} = `{v}` is not a count"))?;
            anyhow::ensure!(n > 0, "{THREADS_ENV} must be positive");
            Ok(Some(n))
        }
        _ => Ok(None),
    }
}

/// Sizes the global rayon pool; a no-op in sequential builds.
pub fn configure_threads(threads: Option<usize>) -> anyhow::Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}
