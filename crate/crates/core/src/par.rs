//! Data-parallel helpers. With the `parallel` feature the work is spread over
//! the rayon pool; without it, or after `set_parallel(false)`, every helper
//! runs sequentially. Results are always produced in index order, so output
//! does not depend on the execution mode.

use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};

static ENABLED: AtomicBool = AtomicBool::new(true);

/// Switch between the parallel and sequential code paths at run time.
/// Has no effect when the crate is built without the `parallel` feature.
pub fn set_parallel(on: bool) {
    ENABLED.store(on, Ordering::Relaxed);
}

/// Cap the worker count of the global pool. Must run before any parallel
/// work; later calls fail.
pub fn init_threads(n: usize) -> crate::Result<()> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| crate::Error::InvalidInput(format!("thread pool: {e}")))?;
    }
    if n == 1 {
        set_parallel(false);
    }
    Ok(())
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && ENABLED.load(Ordering::Relaxed)
}

/// `range.map(f).collect()`, in order.
pub fn map<T, F>(range: Range<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && range.len() > 1 {
        use rayon::prelude::*;
        return range.into_par_iter().map(f).collect();
    }
    range.map(f).collect()
}

/// Like `map` over a slice.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map(0..items.len(), |k| f(&items[k]))
}

/// `max(f(k))` over the range, ignoring NaN; `0.0` for an empty range.
pub fn max<F>(range: Range<usize>, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map(range, f).into_iter().fold(0.0, |m, v| if v > m { v } else { m })
}
