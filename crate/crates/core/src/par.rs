//! Order-preserving data parallelism with a sequential fallback.
//!
//! With the `parallel` feature (default) [`ExecPolicy::Parallel`] fans work
//! out on the current rayon pool; without it, every policy runs sequentially.
//! Results are always returned in input order, so output never depends on
//! the policy.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecPolicy {
    Sequential,
    #[default]
    Parallel,
}

impl ExecPolicy {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecPolicy::Parallel
    }
}

pub fn map<T, R, F>(policy: ExecPolicy, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = policy;
    items.iter().map(f).collect()
}

/// Like [`map`], short-circuiting on the first error in input order.
pub fn try_map<T, R, E, F>(policy: ExecPolicy, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map(policy, items, f).into_iter().collect()
}

/// Run `f` inside a pool of `threads` workers (sequentially if the feature
/// is off or `threads <= 1`).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if threads > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => return pool.install(f),
            Err(e) => log::warn!("cannot build a {threads}-thread pool, running inline: {e}"),
        }
    }
    let _ = threads;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u32> = (0..1000).collect();
        let seq = map(ExecPolicy::Sequential, &items, |x| x * 3);
        let par = with_threads(4, || map(ExecPolicy::Parallel, &items, |x| x * 3));
        assert_eq!(seq, par);
    }

    #[test]
    fn first_error_in_input_order() {
        let items: Vec<u32> = (0..100).collect();
        let r: Result<Vec<u32>, u32> =
            try_map(ExecPolicy::Parallel, &items, |&x| if x % 30 == 29 { Err(x) } else { Ok(x) });
        assert_eq!(r, Err(29));
    }
}
