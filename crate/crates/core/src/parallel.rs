use rayon::prelude::*;

fn parallel_enabled(n: usize) -> bool {
    n > 1 && rayon::current_num_threads() > 1
}

/// Map over `0..n`, in parallel when the current rayon pool has more than
/// one thread. Results are always returned in index order.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel_enabled(n) {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Run `f(i, chunk)` on consecutive `chunk`-sized pieces of `out`.
pub(crate) fn for_each_chunk<F>(out: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if chunk == 0 {
        return;
    }
    if parallel_enabled(out.len() / chunk) {
        out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    } else {
        out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}
