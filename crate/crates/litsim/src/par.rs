//! Data-parallel map helper with a sequential fallback.
//!
//! Work items are independent, so the output is identical regardless of the
//! execution mode; only wall-clock time changes. With the `parallel` feature
//! disabled the rayon path is compiled out entirely.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
///
/// Runs on the current rayon pool when `parallel` is true and the feature is
/// enabled; otherwise runs sequentially.
pub(crate) fn map_slice<T, U, F>(items: &[T], parallel: bool, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items.par_iter().map(&f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}
