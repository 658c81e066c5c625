//! Parallel-or-sequential iteration helpers.
//!
//! With the `parallel` feature (default) the indexed maps fan out over
//! rayon's thread pool; without it they run sequentially. Both paths write
//! each element into its own slot and leave any floating-point reduction to
//! the caller's sequential fold, so results are bit-identical regardless of
//! feature setting or thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n` and collects results in index order.
pub fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Always-sequential twin of [`map_indexed`]; the bench suite uses it as the
/// baseline the parallel path is compared against.
pub fn map_indexed_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}
