//! Selection between the rayon-backed and the single-threaded executors.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    #[default]
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl ExecMode {
    /// Parallel when the `parallel` feature is compiled in.
    pub fn best() -> Self {
        #[cfg(feature = "parallel")]
        {
            ExecMode::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            ExecMode::Sequential
        }
    }

    pub fn is_parallel(self) -> bool {
        !matches!(self, ExecMode::Sequential)
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let xs: Vec<u32> = (0..100).collect();
        let seq = map(ExecMode::Sequential, &xs, |x| x * 2);
        let best = map(ExecMode::best(), &xs, |x| x * 2);
        assert_eq!(seq, best);
        assert_eq!(seq[99], 198);
    }
}
