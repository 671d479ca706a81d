//! Detection metrics.

/// Hausdorff distance between two break sets, in percent of `n`.
///
/// Both empty gives 0; exactly one empty gives `None` (no meaningful
/// distance, excluded from averages).
pub fn hausdorff(a: &[usize], b: &[usize], n: usize) -> Option<f64> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Some(0.0),
        (true, false) | (false, true) => return None,
        _ => {}
    }
    let directed = |from: &[usize], to: &[usize]| {
        from.iter()
            .map(|&i| to.iter().map(|&j| i.abs_diff(j)).min().expect("non-empty"))
            .max()
            .expect("non-empty")
    };
    let d = directed(a, b).max(directed(b, a));
    Some(d as f64 * 100.0 / n as f64)
}

/// Percentage of `true` entries.
pub fn percent_correct(hits: &[bool]) -> f64 {
    if hits.is_empty() {
        return 0.0;
    }
    100.0 * hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
}
