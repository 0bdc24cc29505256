//! Centered sliding-average smoothing along time.

/// Default window, in steps (one day of hourly data).
pub const DEFAULT_WINDOW: usize = 24;

/// Inclusive window bounds around `i`: `(w - 1) / 2` steps before and `w / 2` after,
/// truncated at the series ends.
#[inline]
pub fn window_bounds(i: usize, window: usize, len: usize) -> (usize, usize) {
    let w = window.clamp(1, len.max(1));
    let before = (w - 1) / 2;
    let after = w / 2;
    (i.saturating_sub(before), (i + after).min(len - 1))
}

/// Centered moving average. Windows wider than the series act as the full series length;
/// boundaries average over the samples that exist. Deviations from the first sample in the
/// window are averaged, which keeps constant series exact.
pub fn smooth_series(values: &[f64], window: usize) -> Vec<f64> {
    let len = values.len();
    if len == 0 || window <= 1 {
        return values.to_vec();
    }
    (0..len)
        .map(|i| {
            let (lo, hi) = window_bounds(i, window, len);
            let anchor = values[lo];
            let dev: f64 = values[lo..=hi].iter().map(|v| v - anchor).sum();
            anchor + dev / (hi - lo + 1) as f64
        })
        .collect()
}
