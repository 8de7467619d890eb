use std::collections::VecDeque;

/// Indices of the local maxima of `values` that clear `threshold`.
///
/// Index `i` survives when `values[i] >= threshold` and no sample within
/// `window` samples on either side (`|j - i| < window`) beats it; ties go to
/// the earlier sample. Runs in O(N) with a monotonic deque.
pub fn cluster_indices(values: &[f64], threshold: f64, window: usize) -> Vec<usize> {
    let n = values.len();
    let window = window.max(1);
    let mut out = Vec::new();
    let mut deque: VecDeque<usize> = VecDeque::new();
    // Front of the deque: loudest (earliest on ties) sample of
    // [i - window + 1, i + window - 1].
    let mut hi = 0;
    for i in 0..n {
        let right = (i + window - 1).min(n - 1);
        while hi <= right {
            while let Some(&back) = deque.back() {
                if values[hi] > values[back] {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(hi);
            hi += 1;
        }
        let left = i.saturating_sub(window - 1);
        while let Some(&front) = deque.front() {
            if front < left {
                deque.pop_front();
            } else {
                break;
            }
        }
        if values[i] >= threshold && deque.front() == Some(&i) {
            out.push(i);
        }
    }
    out
}
