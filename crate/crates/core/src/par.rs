//! Share-nothing batch execution with a sequential fallback.

/// How a batch of independent jobs is executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    /// rayon work-stealing when the `parallel` feature is on, sequential
    /// otherwise.
    #[default]
    Parallel,
    Sequential,
}

impl Parallelism {
    pub fn available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Maps `f` over `items`, preserving input order in the output.
pub fn map<T, R, F>(mode: Parallelism, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}
