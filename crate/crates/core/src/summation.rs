//! Order-stable reductions over records.
//!
//! Records are split into fixed-size chunks; each chunk is folded
//! sequentially and the chunk partials are merged pairwise in index order.
//! Chunk boundaries do not depend on the rayon pool, so results are
//! bit-identical for any thread count.

use rayon::prelude::*;

pub(crate) const CHUNK: usize = 2048;

pub(crate) fn chunked_reduce<T, I, F, M>(n: usize, init: I, fold: F, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync,
    F: Fn(&mut T, usize) + Sync,
    M: Fn(&mut T, T),
{
    let n_chunks = n.div_ceil(CHUNK).max(1);
    let mut parts: Vec<T> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * CHUNK..n.min((c + 1) * CHUNK) {
                fold(&mut acc, i);
            }
            acc
        })
        .collect();
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                merge(&mut a, b);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().expect("at least one chunk")
}

pub(crate) fn add_into(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

/// Pairwise sum of a slice.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 64 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
