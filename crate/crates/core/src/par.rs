//! Optional data parallelism.
//!
//! With the `parallel` feature (default) independent jobs are spread over the
//! rayon pool; without it everything runs on the calling thread. Results are
//! always collected in input order, so output never depends on scheduling.

/// Environment variable that caps the worker count of the global pool.
pub const THREADS_ENV: &str = "ILLCLUST_THREADS";

/// Map `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Map `f` over a slice, returning results in slice order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Whether this build can run jobs concurrently.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Read the worker cap from [`THREADS_ENV`]. `None` when unset or invalid.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Size the global pool from [`THREADS_ENV`]. Must be called before any
/// parallel work; later calls are ignored. A no-op in sequential builds.
pub fn init_global_pool_from_env() {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads_from_env() {
        // the pool may already be initialised by an earlier call
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Run `f` with at most `threads` workers. Sequential builds just call `f`.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
