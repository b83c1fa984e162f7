//! Execution shims for the data-parallel node loops.
//!
//! With the `parallel` feature (default) the indexed maps run on the rayon
//! pool; without it they fall back to plain sequential loops. Reductions that
//! feed reported numbers are kept sequential everywhere so that outputs are
//! byte-identical run to run regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` to a vector, in parallel when the `parallel` feature is on.
/// Each slot is computed independently, so the result does not depend on
/// scheduling.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Sequential variant, always available (used by the benches for the
/// parallel-vs-sequential comparison).
pub fn map_collect_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Mutate the chunks of `data` indexed per node, in parallel when enabled.
/// `width` is the number of consecutive entries per node.
pub fn for_each_node_chunk<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert_eq!(data.len() % width.max(1), 0);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, chunk)| f(i, chunk));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_collect_matches_sequential() {
        let a = map_collect(100, |i| (i as f64).sqrt());
        let b = map_collect_seq(100, |i| (i as f64).sqrt());
        assert_eq!(a, b);
    }

    #[test]
    fn chunked_mutation_touches_every_node() {
        let mut data = vec![0.0; 12];
        for_each_node_chunk(&mut data, 3, |i, c| {
            for (j, v) in c.iter_mut().enumerate() {
                *v = (i * 3 + j) as f64;
            }
        });
        assert_eq!(data, (0..12).map(|k| k as f64).collect::<Vec<_>>());
    }
}
