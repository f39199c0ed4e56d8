//! Execution strategy for the data-parallel loops.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs
//! on the global rayon pool. Without it every strategy runs sequentially, so
//! callers never need their own `cfg` gates. Results are identical across
//! strategies: work items never share mutable state and outputs are always
//! assembled in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this strategy actually fans out in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `0..n`, returning results in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Calls `f(row_index, row)` for each `width`-sized chunk of `data`.
    pub fn for_each_row<T, F>(self, data: &mut [T], width: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_chunks_mut(width)
                .enumerate()
                .for_each(|(r, row)| f(r, row));
            return;
        }
        data.chunks_mut(width).enumerate().for_each(|(r, row)| f(r, row));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let seq = Execution::Sequential.map_indexed(100, |i| i * i);
        let par = Execution::Parallel.map_indexed(100, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn rows_visited_once() {
        let mut a = vec![0usize; 12];
        Execution::Parallel.for_each_row(&mut a, 4, |r, row| row.iter_mut().for_each(|v| *v += r + 1));
        assert_eq!(a, vec![1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3]);
    }
}
