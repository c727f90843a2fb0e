//! Map/reduce over a slice, on the rayon pool or on the calling thread.
//!
//! `Execution::Parallel` only runs in parallel when the crate is built with
//! the `parallel` feature; otherwise it falls back to the sequential loop.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether `Parallel` actually uses more than one thread in this build.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// `identity` must be neutral for `reduce`; it may be used any number of times.
pub(crate) fn map_reduce<T, R, M, F, I>(
    items: &[T],
    exec: Execution,
    map: M,
    identity: I,
    reduce: F,
) -> R
where
    T: Sync,
    R: Send,
    M: Fn(&T) -> R + Sync + Send,
    F: Fn(R, R) -> R + Sync + Send,
    I: Fn() -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items
            .par_iter()
            .fold(&identity, |acc, x| reduce(acc, map(x)))
            .reduce(&identity, &reduce),
        _ => items.iter().map(map).fold(identity(), reduce),
    }
}
