// SPDX-License-Identifier: Apache-2.0

//! Order-preserving parallel map used by every fan-out in the crate.
//!
//! `workers == 1` always runs inline on the calling thread. Without the
//! `parallel` feature every call is sequential.

/// Maps `f` over `items`, returning results in input order.
///
/// `workers == 0` uses the global pool; any other value above one builds a
/// dedicated pool of that size.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if workers == 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    if workers == 0 {
        return items.par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running sequentially");
            items.iter().map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: &[T], _workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_worker_count() {
        let items: Vec<u64> = (0..200).collect();
        let expect: Vec<u64> = items.iter().map(|x| x * x).collect();
        for w in [0, 1, 3, 8] {
            assert_eq!(map_ordered(&items, w, |x| x * x), expect);
        }
    }
}
