//! Data-parallel helpers. With the `parallel` feature these fan out over the
//! rayon pool; without it they run the same closures sequentially. Results
//! are identical either way because every closure is a pure function of its
//! index.
//!
//! `grain` is the smallest number of items handed to one task. Inputs no
//! larger than one grain skip the pool entirely.

/// Maps `f` over `0..len`, preserving order.
pub fn map_indices<T, F>(len: usize, grain: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let grain = grain.max(1);
        if len > grain {
            return (0..len).into_par_iter().with_min_len(grain).map(f).collect();
        }
    }
    let _ = grain;
    (0..len).map(f).collect()
}

/// Fills `out` in chunks of `chunk` elements; `f` receives the chunk index
/// and the mutable chunk.
pub fn fill_chunks<T, F>(out: &mut [T], chunk: usize, grain: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let grain = grain.max(1);
        if out.len().div_ceil(chunk) > grain {
            out.par_chunks_mut(chunk).with_min_len(grain).enumerate().for_each(|(k, c)| f(k, c));
            return;
        }
    }
    let _ = grain;
    out.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
}

/// True when the crate was built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
