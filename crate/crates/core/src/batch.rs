use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

/// Splits `0..n` into consecutive batches and runs `f` on each with at most
/// `max_in_flight` batches executing at once. Outputs come back in batch order.
pub(crate) fn map_batches<T, F>(n: usize, batch_size: usize, max_in_flight: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync,
{
    let batch_size = batch_size.max(1);
    let ranges: Vec<Range<usize>> = (0..n).step_by(batch_size).map(|s| s..(s + batch_size).min(n)).collect();
    if ranges.len() <= 1 || max_in_flight <= 1 {
        return ranges.into_iter().map(&f).collect();
    }
    let slots: Vec<Mutex<Option<T>>> = ranges.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..max_in_flight.min(ranges.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(range) = ranges.get(i) else { break };
                let out = f(range.clone());
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().unwrap().expect("every batch ran")).collect()
}
