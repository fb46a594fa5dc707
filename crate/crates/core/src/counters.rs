use std::sync::atomic::{AtomicU64, Ordering};

/// Shared evaluation tallies. Workers accumulate locally and add once per task,
/// so totals are exact and independent of scheduling.
#[derive(Debug, Default)]
pub struct Counters {
    influence: AtomicU64,
    kernel: AtomicU64,
}

impl Counters {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add_influence(&self, n: u64) {
        if n > 0 {
            self.influence.fetch_add(n, Ordering::Relaxed);
        }
    }

    #[inline]
    pub fn add_kernel(&self, n: u64) {
        if n > 0 {
            self.kernel.fetch_add(n, Ordering::Relaxed);
        }
    }

    /// Number of connected influence functional evaluations.
    pub fn influence(&self) -> u64 {
        self.influence.load(Ordering::Relaxed)
    }

    /// Number of kernel evaluations.
    pub fn kernel(&self) -> u64 {
        self.kernel.load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            influence: self.influence(),
            kernel: self.kernel(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct CounterSnapshot {
    pub influence: u64,
    pub kernel: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    #[test]
    fn concurrent_increments_are_exact() {
        let c = Counters::new();
        (0..1000u64).into_par_iter().for_each(|i| {
            c.add_influence(i);
            c.add_kernel(1);
        });
        assert_eq!(c.influence(), 999 * 1000 / 2);
        assert_eq!(c.kernel(), 1000);
    }
}
