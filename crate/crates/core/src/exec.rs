//! Deterministic fan-out over worker threads. Work is split into contiguous
//! index ranges, each range runs on its own thread, and results come back in
//! range order, so folded output never depends on the worker count.

use std::ops::Range;

/// Splits `0..total` into at most `workers` contiguous, non-empty ranges.
pub fn split_ranges(total: u64, workers: usize) -> Vec<Range<u64>> {
    let workers = workers.max(1) as u64;
    if total == 0 {
        return Vec::new();
    }
    let parts = workers.min(total);
    let base = total / parts;
    let extra = total % parts;
    let mut out = Vec::with_capacity(parts as usize);
    let mut start = 0;
    for i in 0..parts {
        let len = base + u64::from(i < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}

/// Applies `f` to each range of [`split_ranges`] and returns the results in
/// range order. With one worker (or one range) everything runs on the
/// calling thread.
pub fn parallel_chunks<U, F>(total: u64, workers: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(Range<u64>) -> U + Sync,
{
    let ranges = split_ranges(total, workers);
    if ranges.len() <= 1 {
        return ranges.into_iter().map(f).collect();
    }
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|range| scope.spawn(move || f(range)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_tile_the_interval() {
        for total in [0u64, 1, 2, 7, 100] {
            for workers in [1usize, 2, 3, 8, 200] {
                let ranges = split_ranges(total, workers);
                let mut expect = 0;
                for r in &ranges {
                    assert_eq!(r.start, expect);
                    assert!(r.end > r.start);
                    expect = r.end;
                }
                assert_eq!(expect, total);
                assert!(ranges.len() <= workers.max(1));
            }
        }
    }

    #[test]
    fn chunked_results_are_worker_count_independent() {
        let sum_of = |workers: usize| -> u64 {
            parallel_chunks(1000, workers, |range| range.map(|i| i * i).sum::<u64>())
                .into_iter()
                .sum()
        };
        let baseline = sum_of(1);
        for workers in [2, 3, 7] {
            assert_eq!(sum_of(workers), baseline);
        }
    }

    #[test]
    fn flattened_per_item_results_keep_index_order() {
        let collect = |workers: usize| -> Vec<u64> {
            parallel_chunks(37, workers, |range| range.collect::<Vec<_>>())
                .into_iter()
                .flatten()
                .collect()
        };
        let expected: Vec<u64> = (0..37).collect();
        for workers in [1, 2, 5] {
            assert_eq!(collect(workers), expected);
        }
    }
}
