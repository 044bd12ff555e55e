//! Data-parallel helpers.
//!
//! With the `parallel` feature these fan out on rayon's global pool; without
//! it they are plain sequential loops. Outputs are always collected in input
//! order so downstream reductions are bit-identical between the two builds.
//! A pool with a single worker runs the loop inline, skipping rayon's
//! scheduling overhead.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if rayon::current_num_threads() == 1 {
            items.iter().map(f).collect()
        } else {
            items.par_iter().map(f).collect()
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Map `f` over an index range, preserving order.
pub fn map_range<R, F>(range: Range<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if rayon::current_num_threads() == 1 {
            range.map(f).collect()
        } else {
            range.into_par_iter().map(f).collect()
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.map(f).collect()
    }
}

/// Whether this build fans out on rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
