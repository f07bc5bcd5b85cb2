//! Node-parallel loops and reductions whose results do not depend on the
//! number of worker threads.
//!
//! Reductions split the index range at fixed midpoints down to fixed-size
//! leaves, so the floating-point association order is a function of the
//! length alone.

use rayon::prelude::*;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "LLB_THREADS";

const LEAF: usize = 256;
const MIN_NODES_PER_TASK: usize = 64;

/// Worker count requested through [`THREADS_ENV`], if set and valid.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` on a dedicated pool with `threads` workers, or on the global pool.
pub fn install<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// Fills `out`, viewed as consecutive per-node chunks of `per_node` items.
pub fn fill_nodes<T, F>(out: &mut [T], per_node: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    out.par_chunks_mut(per_node)
        .with_min_len(MIN_NODES_PER_TASK)
        .enumerate()
        .for_each(|(node, chunk)| f(node, chunk));
}

/// Builds a vector of one value per node.
pub fn map_nodes<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .with_min_len(MIN_NODES_PER_TASK)
        .map(&f)
        .collect()
}

fn reduce<F, C>(lo: usize, hi: usize, identity: f64, f: &F, combine: &C) -> f64
where
    F: Fn(usize) -> f64 + Sync,
    C: Fn(f64, f64) -> f64 + Sync,
{
    if hi - lo <= LEAF {
        return (lo..hi).fold(identity, |acc, i| combine(acc, f(i)));
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = rayon::join(
        || reduce(lo, mid, identity, f, combine),
        || reduce(mid, hi, identity, f, combine),
    );
    combine(a, b)
}

/// Deterministic sum of `f(i)` over `0..n`.
pub fn sum_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
    reduce(0, n, 0.0, &f, &|a, b| a + b)
}

/// Maximum of `f(i)` over `0..n` (`-inf` when empty; NaN entries are skipped).
pub fn max_by<F: Fn(usize) -> f64 + Sync>(n: usize, f: F) -> f64 {
    reduce(0, n, f64::NEG_INFINITY, &f, &f64::max)
}

pub fn sum(values: &[f64]) -> f64 {
    sum_by(values.len(), |i| values[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_independent_of_thread_count() {
        let values: Vec<f64> = (0..10_000)
            .map(|i| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (1.0 + i as f64))
            .collect();
        let one = install(Some(1), || sum(&values));
        let two = install(Some(2), || sum(&values));
        let eight = install(Some(8), || sum(&values));
        assert_eq!(one.to_bits(), two.to_bits());
        assert_eq!(one.to_bits(), eight.to_bits());
    }

    #[test]
    fn empty_reductions() {
        assert_eq!(sum(&[]), 0.0);
        assert_eq!(max_by(0, |_| 1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn max_matches_sequential() {
        let values: Vec<f64> = (0..3000).map(|i| ((i * 7919) % 1013) as f64).collect();
        let expected = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max_by(values.len(), |i| values[i]), expected);
    }
}
