//! Data-parallel loop helpers.
//!
//! With the `parallel` feature (on by default) cell loops and sample batches
//! run on the rayon pool. Without it every helper degrades to a plain
//! sequential iterator. Reductions split the index range into fixed-size
//! chunks, sum each chunk sequentially and then add the partial sums in
//! chunk order, so a result is bitwise identical for any worker count and
//! for either build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Cells per reduction chunk.
pub const CHUNK: usize = 4096;

/// Evaluates `f` at every index in `0..len` and collects the results in order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Deterministic sum of `f(i)` over `0..len`.
pub fn sum_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partials = map_indexed(chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(len);
        let mut acc = 0.0;
        for i in start..end {
            acc += f(i);
        }
        acc
    });
    partials.into_iter().sum()
}

/// Maximum of `f(i)` over `0..len`; `-inf` for an empty range. NaN wins.
pub fn max_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partials = map_indexed(chunks, |c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(len);
        let mut acc = f64::NEG_INFINITY;
        for i in start..end {
            acc = nan_max(acc, f(i));
        }
        acc
    });
    partials.into_iter().fold(f64::NEG_INFINITY, nan_max)
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_sequential_chunking() {
        let len = 3 * CHUNK + 17;
        let f = |i: usize| 1.0 / (1.0 + i as f64);
        let mut expected = 0.0;
        for c in 0..len.div_ceil(CHUNK) {
            let mut acc = 0.0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
                acc += f(i);
            }
            expected += acc;
        }
        assert_eq!(sum_indexed(len, f).to_bits(), expected.to_bits());
    }

    #[test]
    fn max_propagates_nan() {
        assert!(max_indexed(10, |i| if i == 7 { f64::NAN } else { i as f64 }).is_nan());
        assert_eq!(max_indexed(10, |i| i as f64), 9.0);
        assert_eq!(max_indexed(0, |i| i as f64), f64::NEG_INFINITY);
    }

    #[test]
    fn map_preserves_order() {
        let v = map_indexed(10_000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
