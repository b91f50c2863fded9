#![allow(dead_code)]

use hslg_core::quad::{cdf_table, eval_cdf_table};

/// Tabulated quadrature CDF of a density, the reference oracle for
/// sampler-vs-density KS tests.
pub struct QuadCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl QuadCdf {
    pub fn new(f: impl Fn(f64) -> f64, a: f64, b: f64, cells: usize) -> Self {
        let (xs, cdf) = cdf_table(&f, a, b, cells);
        QuadCdf { xs, cdf }
    }

    pub fn at(&self, x: f64) -> f64 {
        eval_cdf_table(&self.xs, &self.cdf, x)
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().unwrap()
    }
}

/// One-sample KS critical value at significance `level` for sample size `n`.
pub fn ks_one_sample_critical(level: f64, n: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / n.sqrt()
}

/// Batch-means standard error for a correlated (MCMC) scalar trace.
pub fn batch_means_stderr(trace: &[f64], batches: usize) -> f64 {
    assert!(batches >= 2 && trace.len() >= 2 * batches);
    let per = trace.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| trace[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}
