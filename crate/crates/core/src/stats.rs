//! Small numeric helpers shared across modules.

/// Linear-interpolation quantile (the "type 7" definition) of `sorted`,
/// which must be non-empty and ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population (divide-by-n) standard deviation.
pub fn std_pop(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    quantile_sorted(&sorted(values), 0.5)
}

/// Equal-frequency edges `[min, q(1/n), ..., q((n-1)/n), max]` with
/// duplicates removed, so the result is strictly increasing. A constant
/// column yields a single edge.
pub fn quantile_edges(values: &[f64], n_bins: usize) -> Vec<f64> {
    let s = sorted(values);
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|i| quantile_sorted(&s, i as f64 / n_bins as f64))
        .collect();
    edges.dedup();
    edges
}

/// Bin index of `v` given strictly increasing `edges`: the number of
/// interior edges `<= v`, so a value sitting on an edge falls to the right.
pub fn bin_of(edges: &[f64], v: f64) -> usize {
    if edges.len() <= 2 {
        return 0;
    }
    edges[1..edges.len() - 1].iter().filter(|&&e| e <= v).count()
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}
