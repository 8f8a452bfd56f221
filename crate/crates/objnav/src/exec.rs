//! Data-parallel execution helpers with a sequential fallback.
//!
//! Every parallel site in the crate routes through these functions. Results
//! are independent of scheduling because each work item owns its random
//! stream, so the parallel and sequential paths produce identical output.

/// Map over mutable items in place. Parallel when the `parallel` feature is
/// enabled.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, item)| f(i, item));
    }
    #[cfg(not(feature = "parallel"))]
    for (i, item) in items.iter_mut().enumerate() {
        f(i, item);
    }
}

/// Always-sequential variant, kept callable for benchmarking both paths.
pub fn for_each_mut_seq<T, F>(items: &mut [T], f: F)
where
    F: Fn(usize, &mut T),
{
    for (i, item) in items.iter_mut().enumerate() {
        f(i, item);
    }
}

/// Map items to results, preserving order.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(|t| f(t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    items.iter().map(|t| f(t)).collect()
}

/// Always-sequential variant of [`map_collect`].
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(|t| f(t)).collect()
}
