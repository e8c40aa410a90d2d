//! A minimal indexed worker pool.
//!
//! Jobs are independent and identified by index; results come back in index
//! order regardless of which worker ran what, so parallel runs are
//! byte-identical to sequential ones.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Runs `job(0..jobs)` on `workers` threads (0 means all available cores)
/// and returns the results in index order.
pub fn run_indexed<T, F>(jobs: usize, workers: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if jobs == 0 {
        return Vec::new();
    }
    let workers = if workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        workers
    }
    .min(jobs);

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..jobs).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let out = job(i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every job slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_come_back_in_index_order() {
        let out = run_indexed(100, 4, |i| i * i);
        assert_eq!(out.len(), 100);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let one = run_indexed(37, 1, |i| (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let many = run_indexed(37, 8, |i| (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let auto = run_indexed(37, 0, |i| (i as u64).wrapping_mul(0x9e3779b97f4a7c15));
        assert_eq!(one, many);
        assert_eq!(one, auto);
    }

    #[test]
    fn zero_jobs_is_empty() {
        let out: Vec<u8> = run_indexed(0, 4, |_| 0);
        assert!(out.is_empty());
    }
}
