//! Deterministic random streams.
//!
//! Every unit of parallel work gets its own ChaCha8 stream selected by
//! `(seed, stream)`, so results do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Name of the environment variable capping the worker count.
pub const THREADS_ENV: &str = "EWA_AGG_THREADS";

/// Stream offsets for the different consumers of one seed, so that e.g. the
/// coupling sample and the reference sample never share a stream.
pub mod streams {
    pub const REPLICATES: u64 = 0;
    pub const COUPLED: u64 = 1 << 40;
    pub const REFERENCE: u64 = 2 << 40;
    pub const MGF: u64 = 3 << 40;
    pub const DV: u64 = 4 << 40;
    pub const SCENARIO: u64 = 5 << 40;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Reads [`THREADS_ENV`]. `Ok(None)` when unset or empty.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(s) if s.trim().is_empty() => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::invalid(format!(
                "{THREADS_ENV} must be a positive integer, got {s:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs `f` inside a rayon pool of `threads` workers (global pool when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
    }
}
