/// Mean and population standard deviation of one smoothing window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothed {
    pub mean: f64,
    pub std: f64,
}

/// Centered moving average. Point `i` averages `series[i - (w-1)/2 ..= i + w/2]`
/// truncated at the edges.
pub fn moving_average(series: &[f64], window: usize) -> Vec<Smoothed> {
    assert!(window >= 1, "window must be at least 1");
    let n = series.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub((window - 1) / 2);
            let hi = (i + window / 2 + 1).min(n);
            let w = &series[lo..hi];
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64;
            Smoothed {
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

/// Median of a sample; `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    })
}
