//! Weighted empirical distributions and the verification statistics built on
//! them: two-sample and one-sample Kolmogorov–Smirnov, Wasserstein-1,
//! percentile bootstrap, effective sample size, and split-R̂.

use crate::numeric::logsumexp;
use crate::rng::Gen;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Sorted sample with normalized weights and its effective sample size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    weights: Vec<f64>,
    ess: f64,
}

impl EmpiricalDistribution {
    /// Equal-weight sample.
    pub fn from_unweighted(mut values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "empty sample");
        assert!(values.iter().all(|v| v.is_finite()), "non-finite sample value");
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = values.len();
        let w = 1.0 / n as f64;
        EmpiricalDistribution { values, weights: vec![w; n], ess: n as f64 }
    }

    /// Sample with log-scale importance weights; weights are normalized to
    /// sum to one and carried through sorting.
    pub fn from_log_weighted(pairs: Vec<(f64, f64)>) -> Self {
        assert!(!pairs.is_empty(), "empty sample");
        let logs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let norm = logsumexp(&logs);
        assert!(norm.is_finite(), "all weights vanish");
        let mut items: Vec<(f64, f64)> =
            pairs.iter().map(|&(v, lw)| (v, (lw - norm).exp())).collect();
        items.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (values, weights): (Vec<f64>, Vec<f64>) = items.into_iter().unzip();
        assert!(values.iter().all(|v| v.is_finite()), "non-finite sample value");
        let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
        let ess = 1.0 / sum_sq;
        EmpiricalDistribution { values, weights, ess }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ess(&self) -> f64 {
        self.ess
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Weighted mean.
    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Total weight at or below x.
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (v, w) in self.values.iter().zip(&self.weights) {
            if *v <= x {
                acc += w;
            } else {
                break;
            }
        }
        acc
    }
}

/// Verdict of a distributional comparison.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
    pub ess_a: f64,
    pub ess_b: f64,
}

/// Two-sample Kolmogorov–Smirnov statistic over the merged support, with the
/// asymptotic critical value c(level)·√((n₁+n₂)/(n₁n₂)) where the sample
/// sizes are the effective sample sizes.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution, level: f64) -> KsOutcome {
    assert!(level > 0.0 && level < 1.0);
    let statistic = ks_statistic(a, b);
    let (na, nb) = (a.ess(), b.ess());
    let c = (-(level / 2.0).ln() / 2.0).sqrt();
    let critical = c * ((na + nb) / (na * nb)).sqrt();
    KsOutcome { statistic, critical, pass: statistic <= critical, ess_a: na, ess_b: nb }
}

/// Sup-distance between the two weighted ECDFs (merge walk).
pub fn ks_statistic(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let mut i = 0;
    let mut j = 0;
    let mut fa = 0.0;
    let mut fb = 0.0;
    let mut sup: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let va = if i < a.len() { a.values[i] } else { f64::INFINITY };
        let vb = if j < b.len() { b.values[j] } else { f64::INFINITY };
        let x = va.min(vb);
        while i < a.len() && a.values[i] == x {
            fa += a.weights[i];
            i += 1;
        }
        while j < b.len() && b.values[j] == x {
            fb += b.weights[j];
            j += 1;
        }
        sup = sup.max((fa - fb).abs());
    }
    sup.min(1.0)
}

/// One-sample sup-distance between a weighted ECDF and a reference CDF,
/// evaluated on both sides of every jump.
pub fn ks_vs_cdf(a: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut sup: f64 = 0.0;
    for (v, w) in a.values.iter().zip(&a.weights) {
        let c = cdf(*v);
        sup = sup.max((c - acc).abs());
        acc += w;
        sup = sup.max((c - acc).abs());
    }
    sup.min(1.0)
}

/// Wasserstein-1 distance ∫|F_a − F_b| between the two weighted ECDFs.
pub fn wasserstein1(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let mut points: Vec<(f64, f64, f64)> = Vec::with_capacity(a.len() + b.len());
    for (v, w) in a.values.iter().zip(&a.weights) {
        points.push((*v, *w, 0.0));
    }
    for (v, w) in b.values.iter().zip(&b.weights) {
        points.push((*v, 0.0, *w));
    }
    points.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut fa = 0.0f64;
    let mut fb = 0.0f64;
    let mut acc = 0.0f64;
    let mut prev = points[0].0;
    for (x, wa, wb) in points {
        acc += (fa - fb).abs() * (x - prev);
        fa += wa;
        fb += wb;
        prev = x;
    }
    acc
}

/// Effective sample size (Σw)²/Σw² of raw (linear-scale) weights.
pub fn ess(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// Percentile bootstrap confidence interval for `functional` of the sample;
/// resamples respect the weights. Returns (lo, hi) at the given coverage.
pub fn bootstrap_ci(
    d: &EmpiricalDistribution,
    functional: impl Fn(&[f64]) -> f64,
    coverage: f64,
    boots: usize,
    g: &mut Gen,
) -> (f64, f64) {
    assert!(coverage > 0.0 && coverage < 1.0);
    assert!(boots >= 20);
    let n = d.len();
    // inverse-CDF index table for weighted resampling
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in &d.weights {
        acc += w;
        cum.push(acc);
    }
    let mut stats = Vec::with_capacity(boots);
    let mut scratch = vec![0.0; n];
    for _ in 0..boots {
        for slot in scratch.iter_mut() {
            let u: f64 = g.gen::<f64>() * acc;
            let idx = cum.partition_point(|c| *c < u).min(n - 1);
            *slot = d.values[idx];
        }
        stats.push(functional(&scratch));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail = 0.5 * (1.0 - coverage);
    let lo_idx = ((boots as f64 * tail).floor() as usize).min(boots - 1);
    let hi_idx = ((boots as f64 * (1.0 - tail)).ceil() as usize).saturating_sub(1).min(boots - 1);
    (stats[lo_idx], stats[hi_idx])
}

/// Split-R̂ over a set of chains: each chain is halved, and the usual
/// between/within variance ratio is computed over the half-chains.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    assert!(!chains.is_empty());
    let mut halves: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        assert!(c.len() >= 4, "chain too short for split-Rhat");
        let mid = c.len() / 2;
        halves.push(&c[..mid]);
        halves.push(&c[mid..]);
    }
    let n = halves.iter().map(|h| h.len()).min().unwrap() as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> =
        halves.iter().map(|h| h.iter().sum::<f64>() / h.len() as f64).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| {
            h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (h.len() as f64 - 1.0)
        })
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return 1.0;
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}
