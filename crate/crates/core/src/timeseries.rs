//! Explainers for univariate time-series scores: segment-level Shapley
//! attribution and counterfactual repair of anomalous windows.
//!
//! Players are contiguous, nearly equal segments of the window. An
//! "absent" segment takes its values from a reference series.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::TimeseriesWindow;
use crate::error::{Error, Result};
use crate::models::ThresholdDetector;
use crate::stats;

/// Values standing in for absent segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reference {
    Constant(f64),
    Series(Vec<f64>),
}

impl Reference {
    pub fn resolve(&self, len: usize) -> Result<Vec<f64>> {
        match self {
            Reference::Constant(c) => Ok(vec![*c; len]),
            Reference::Series(v) if v.len() == len => Ok(v.clone()),
            Reference::Series(v) => Err(Error::Width {
                expected: len,
                actual: v.len(),
            }),
        }
    }
}

/// Splits `0..n` into `s` contiguous ranges; the first `n % s` get one
/// extra point.
pub fn segments(n: usize, s: usize) -> Result<Vec<(usize, usize)>> {
    if s == 0 || s > n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} points into {s} segments"
        )));
    }
    let (base, extra) = (n / s, n % s);
    let mut out = Vec::with_capacity(s);
    let mut start = 0;
    for i in 0..s {
        let end = start + base + usize::from(i < extra);
        out.push((start, end));
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsShapConfig {
    pub n_segments: usize,
    /// Segment counts up to this are solved exactly.
    pub exact_max: usize,
    pub n_permutations: usize,
}

impl Default for TsShapConfig {
    fn default() -> Self {
        Self {
            n_segments: 8,
            exact_max: 10,
            n_permutations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesAttribution {
    pub name: String,
    pub timestamps: Vec<i64>,
    pub values: Vec<f64>,
    pub reference: Vec<f64>,
    /// Half-open index ranges, one per segment.
    pub segments: Vec<(usize, usize)>,
    pub scores: Vec<f64>,
    /// Score of the all-reference window.
    pub base_score: f64,
    /// Score of the window itself.
    pub score: f64,
    pub exact: bool,
}

impl TimeseriesAttribution {
    /// Segment scores broadcast to timestamps.
    pub fn point_scores(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for (&(a, b), s) in self.segments.iter().zip(&self.scores) {
            out[a..b].fill(*s);
        }
        out
    }
}

fn compose(values: &[f64], reference: &[f64], segs: &[(usize, usize)], present: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut out = reference.to_vec();
    for (i, &(a, b)) in segs.iter().enumerate() {
        if present(i) {
            out[a..b].copy_from_slice(&values[a..b]);
        }
    }
    out
}

/// Shapley attribution of `score(window)` over contiguous segments.
pub fn ts_shap(
    score: &dyn Fn(&[f64]) -> f64,
    window: &TimeseriesWindow,
    reference: &Reference,
    cfg: &TsShapConfig,
    seed: u64,
) -> Result<TimeseriesAttribution> {
    let values = window.values();
    let reference = reference.resolve(values.len())?;
    let segs = segments(values.len(), cfg.n_segments)?;
    let s = segs.len();
    let exact = s <= cfg.exact_max;
    let mut phi = vec![0.0; s];
    let base_score = score(&reference);
    let full = score(values);
    if exact {
        let v: Vec<f64> = (0..1usize << s)
            .map(|mask| score(&compose(values, &reference, &segs, |i| mask >> i & 1 == 1)))
            .collect();
        let weight: Vec<f64> = (0..s)
            .map(|k| stats::factorial(k) * stats::factorial(s - k - 1) / stats::factorial(s))
            .collect();
        for (j, p) in phi.iter_mut().enumerate() {
            for mask in (0..1usize << s).filter(|m| m >> j & 1 == 0) {
                *p += weight[mask.count_ones() as usize] * (v[mask | 1 << j] - v[mask]);
            }
        }
    } else {
        if cfg.n_permutations == 0 {
            return Err(Error::InvalidArgument("n_permutations must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..s).collect();
        for _ in 0..cfg.n_permutations {
            order.shuffle(&mut rng);
            let mut current = reference.clone();
            let mut prev = base_score;
            for &j in &order {
                let (a, b) = segs[j];
                current[a..b].copy_from_slice(&values[a..b]);
                let now = score(&current);
                phi[j] += now - prev;
                prev = now;
            }
        }
        phi.iter_mut().for_each(|p| *p /= cfg.n_permutations as f64);
    }
    Ok(TimeseriesAttribution {
        name: window.name().to_string(),
        timestamps: window.timestamps().to_vec(),
        values: values.to_vec(),
        reference,
        segments: segs,
        scores: phi,
        base_score,
        score: full,
        exact,
    })
}

/// [`ts_shap`] on a detector's score, with the training mean as the
/// default reference.
pub fn ts_shap_detector(
    detector: &ThresholdDetector,
    window: &TimeseriesWindow,
    reference: Option<&Reference>,
    cfg: &TsShapConfig,
    seed: u64,
) -> Result<TimeseriesAttribution> {
    let default = Reference::Constant(detector.train_mean);
    ts_shap(&|v| detector.score_values(v), window, reference.unwrap_or(&default), cfg, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsCfConfig {
    pub n_segments: usize,
    /// Largest share of points that may be replaced.
    pub max_fraction: f64,
}

impl Default for TsCfConfig {
    fn default() -> Self {
        Self {
            n_segments: 8,
            max_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesCf {
    pub name: String,
    pub timestamps: Vec<i64>,
    pub original: Vec<f64>,
    pub modified: Vec<f64>,
    pub modified_indices: Vec<usize>,
    pub score_before: f64,
    pub score_after: f64,
    /// The modified window is no longer anomalous.
    pub valid: bool,
}

/// Greedy window repair for an anomalous window.
///
/// Segments are replaced by reference values, each step taking the one
/// that lowers the detector score most, until the window is normal or the
/// replaced share would exceed `max_fraction`. Replaced points are then
/// restored one at a time wherever the window stays normal. When no
/// replacement helps, the result is returned with `valid == false`.
pub fn ts_counterfactual(
    detector: &ThresholdDetector,
    window: &TimeseriesWindow,
    reference: Option<&Reference>,
    cfg: &TsCfConfig,
) -> Result<TimeseriesCf> {
    let original = window.values();
    let n = original.len();
    if !detector.is_anomalous(original) {
        return Err(Error::Precondition(format!(
            "window `{}` is not anomalous (score {:.4} <= kappa {})",
            window.name(),
            detector.score_values(original),
            detector.kappa
        )));
    }
    let reference = reference
        .cloned()
        .unwrap_or(Reference::Constant(detector.train_mean))
        .resolve(n)?;
    let segs = segments(n, cfg.n_segments.min(n))?;
    let cap = (cfg.max_fraction * n as f64).floor() as usize;
    let mut current = original.to_vec();
    let mut replaced = vec![false; segs.len()];
    let mut used = 0;
    let mut score = detector.score_values(&current);
    while detector.is_anomalous(&current) {
        let mut best: Option<(f64, usize)> = None;
        for (j, &(a, b)) in segs.iter().enumerate() {
            if replaced[j] || used + (b - a) > cap {
                continue;
            }
            let mut trial = current.clone();
            trial[a..b].copy_from_slice(&reference[a..b]);
            let s = detector.score_values(&trial);
            if best.is_none_or(|(bs, _)| s < bs) {
                best = Some((s, j));
            }
        }
        match best {
            Some((s, j)) if s < score => {
                let (a, b) = segs[j];
                current[a..b].copy_from_slice(&reference[a..b]);
                replaced[j] = true;
                used += b - a;
                score = s;
            }
            _ => break,
        }
    }
    let valid = !detector.is_anomalous(&current);
    if valid {
        for i in 0..n {
            if current[i].to_bits() == original[i].to_bits() {
                continue;
            }
            let kept = current[i];
            current[i] = original[i];
            if detector.is_anomalous(&current) {
                current[i] = kept;
            }
        }
    }
    let modified_indices = (0..n)
        .filter(|&i| current[i].to_bits() != original[i].to_bits())
        .collect();
    Ok(TimeseriesCf {
        name: window.name().to_string(),
        timestamps: window.timestamps().to_vec(),
        original: original.to_vec(),
        score_before: detector.score_values(original),
        score_after: detector.score_values(&current),
        modified: current,
        modified_indices,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_timeseries;
    use proptest::prelude::*;

    fn series(values: &[f64]) -> TimeseriesWindow {
        make_timeseries((0..values.len() as i64).map(|t| t * 60).collect(), values.to_vec(), "m").unwrap()
    }

    fn detector() -> ThresholdDetector {
        ThresholdDetector { train_mean: 1.0, train_std: 0.5, kappa: 3.0 }
    }

    fn spiky() -> Vec<f64> {
        let mut v: Vec<f64> = (0..16).map(|i| 1.0 + 0.2 * ((i as f64) * 0.9).sin()).collect();
        v[9] = 6.0;
        v
    }

    #[test]
    fn segments_spread_remainder_left() {
        assert_eq!(segments(10, 4).unwrap(), vec![(0, 3), (3, 6), (6, 8), (8, 10)]);
        assert_eq!(segments(4, 4).unwrap(), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert!(segments(3, 4).is_err());
        assert!(segments(3, 0).is_err());
    }

    #[test]
    fn unread_segment_gets_zero() {
        let w = series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let f = |v: &[f64]| v[0] * v[1] + v[5].powi(2) + v[7];
        let cfg = TsShapConfig { n_segments: 4, ..Default::default() };
        let r = ts_shap(&f, &w, &Reference::Constant(0.5), &cfg, 0).unwrap();
        assert!(r.scores[1].abs() < 1e-9);
    }

    #[test]
    fn single_index_score() {
        let w = series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let cfg = TsShapConfig { n_segments: 3, ..Default::default() };
        let r = ts_shap(&|v: &[f64]| v[4], &w, &Reference::Constant(0.0), &cfg, 0).unwrap();
        assert_eq!(r.scores, vec![0.0, 0.0, 5.0]);
    }

    /// Direct subset enumeration over segments.
    fn brute(f: &dyn Fn(&[f64]) -> f64, x: &[f64], r: &[f64], segs: &[(usize, usize)]) -> Vec<f64> {
        let s = segs.len();
        let v = |mask: usize| {
            let mut z = r.to_vec();
            for (i, &(a, b)) in segs.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    z[a..b].copy_from_slice(&x[a..b]);
                }
            }
            f(&z)
        };
        (0..s)
            .map(|j| {
                let mut total = 0.0;
                for mask in 0..1usize << s {
                    if mask >> j & 1 == 1 {
                        continue;
                    }
                    let k = mask.count_ones() as usize;
                    let w = stats::factorial(k) * stats::factorial(s - k - 1) / stats::factorial(s);
                    total += w * (v(mask | 1 << j) - v(mask));
                }
                total
            })
            .collect()
    }

    #[test]
    fn detector_spike_matches_brute_force() {
        let d = detector();
        let w = series(&spiky());
        let cfg = TsShapConfig { n_segments: 4, ..Default::default() };
        let r = ts_shap_detector(&d, &w, None, &cfg, 0).unwrap();
        let want = brute(&|v| d.score_values(v), w.values(), &[1.0; 16], &r.segments);
        for (g, e) in r.scores.iter().zip(&want) {
            assert!((g - e).abs() < 1e-9);
        }
        assert!((r.base_score + r.scores.iter().sum::<f64>() - r.score).abs() < 1e-9);
        assert_eq!(stats::argmax(&r.scores), 2);
    }

    #[test]
    fn sampled_mode_is_efficient_and_deterministic() {
        let v: Vec<f64> = (0..48).map(|i| (i as f64 * 0.3).sin()).collect();
        let w = series(&v);
        let f = |z: &[f64]| z.iter().map(|a| a * a).sum::<f64>().sqrt();
        let cfg = TsShapConfig { n_segments: 12, ..Default::default() };
        let a = ts_shap(&f, &w, &Reference::Constant(0.1), &cfg, 9).unwrap();
        assert!(!a.exact);
        assert!((a.base_score + a.scores.iter().sum::<f64>() - a.score).abs() < 1e-9);
        assert_eq!(a, ts_shap(&f, &w, &Reference::Constant(0.1), &cfg, 9).unwrap());
    }

    #[test]
    fn single_spike_repair_touches_only_the_spike() {
        let d = detector();
        let v = spiky();
        let r = ts_counterfactual(&d, &series(&v), None, &TsCfConfig::default()).unwrap();
        assert!(r.valid);
        assert!(!d.is_anomalous(&r.modified));
        // Oracle: no single point other than the spike, and no pair, fixes it
        // without touching the spike; the spike alone does.
        let fixes = |idx: &[usize]| {
            let mut z = v.clone();
            idx.iter().for_each(|&i| z[i] = 1.0);
            !d.is_anomalous(&z)
        };
        let singles: Vec<usize> = (0..16).filter(|&i| fixes(&[i])).collect();
        assert_eq!(singles, vec![9]);
        assert!((0..16).all(|i| (0..16).all(|j| i == 9 || j == 9 || !fixes(&[i, j]))));
        assert_eq!(r.modified_indices, singles);
        for i in 0..16 {
            if i != 9 {
                assert_eq!(r.modified[i].to_bits(), v[i].to_bits());
            }
        }
    }

    #[test]
    fn normal_window_is_a_precondition_error() {
        let r = ts_counterfactual(&detector(), &series(&[1.0; 8]), None, &TsCfConfig::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn self_reference_cannot_help() {
        let v = spiky();
        let r = ts_counterfactual(&detector(), &series(&v), Some(&Reference::Series(v.clone())), &TsCfConfig::default()).unwrap();
        assert!(!r.valid);
        assert!(r.modified_indices.is_empty());
        assert_eq!(r.score_after, r.score_before);
    }

    #[test]
    fn fraction_cap_is_respected() {
        let v: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 9.0 } else { 1.0 }).collect();
        let cfg = TsCfConfig { max_fraction: 0.25, ..Default::default() };
        let r = ts_counterfactual(&detector(), &series(&v), None, &cfg).unwrap();
        assert!(!r.valid);
        assert!(r.modified_indices.len() <= 4);
        assert!(r.score_after <= r.score_before);
    }

    proptest! {
        #[test]
        fn exact_efficiency_for_random_scores(
            vals in prop::collection::vec(-3.0..3.0f64, 12),
            coef in prop::collection::vec(-1.0..1.0f64, 12),
            s in 1usize..=6,
            r in -1.0..1.0f64,
        ) {
            let w = series(&vals);
            let c = coef.clone();
            let f = move |z: &[f64]| {
                let lin: f64 = z.iter().zip(&c).map(|(a, b)| a * b).sum();
                lin.tanh() + z[0] * z[11] + z.iter().cloned().fold(f64::MIN, f64::max)
            };
            let cfg = TsShapConfig { n_segments: s, ..Default::default() };
            let a = ts_shap(&f, &w, &Reference::Constant(r), &cfg, 0).unwrap();
            prop_assert!((a.base_score + a.scores.iter().sum::<f64>() - a.score).abs() < 1e-6);
        }

        #[test]
        fn repairs_are_self_consistent(spikes in prop::collection::vec((0usize..16, 3.0..9.0f64), 1..4)) {
            let d = detector();
            let mut v = vec![1.0; 16];
            for (i, h) in &spikes {
                v[*i] = *h;
            }
            prop_assume!(d.is_anomalous(&v));
            let r = ts_counterfactual(&d, &series(&v), None, &TsCfConfig::default()).unwrap();
            prop_assert_eq!(r.valid, !d.is_anomalous(&r.modified));
            for i in 0..16 {
                if !r.modified_indices.contains(&i) {
                    prop_assert_eq!(r.modified[i].to_bits(), v[i].to_bits());
                }
            }
        }
    }
}
