//! Two-layer random walks with soft non-intersection weights.
//!
//! A path is a pair of length-n walks (S₁, S₂) with f_θ increments. The soft
//! weight W_n = exp(−e^{S₂(1)−S₁(2)} − Σ_{k=2}^{n−1}(e^{S₂(k)−S₁(k+1)} +
//! e^{S₂(k)−S₁(k)})) penalizes the second walk rising above the first; the
//! prefix form Ŵ_r and the suffix form W_{r→n} multiply back to W_n exactly.
//! All soft expectations here are importance-sampling estimates under the
//! free law; none of them run Markov chains.

use crate::distributions::{sample_f_theta, sample_g_alpha};
use crate::numeric::{GridInverseCdf, QuantizedSum};
use crate::quad::{cdf_table, eval_cdf_table};
use crate::rng::{par_replica_fold, Gen, RngStream};
use crate::special::{normal_cdf, trigamma};
use crate::stats::{ess, ks_vs_cdf, EmpiricalDistribution};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum InitError {
    #[error("initial condition value must be finite")]
    NonFinite,
    #[error("density table grid must be strictly increasing with >= 2 points")]
    BadGrid,
    #[error("density table values must be nonnegative, finite, not all zero")]
    BadValues,
    #[error("tail rate must be positive and the table must obey h(x) <= M exp(-|x|/M)")]
    TailBound,
    #[error("g_alpha initial condition requires alpha > 0")]
    NonPositiveAlpha,
}

/// Initial condition for one walk: a point mass, the boundary density g_α,
/// or a tabulated density with an exponential tail certificate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum InitCondition {
    Dirac(f64),
    DensityGAlpha(f64),
    DensityTable { grid: Vec<f64>, values: Vec<f64>, tail_rate: f64 },
}

impl InitCondition {
    pub fn validate(&self) -> Result<(), InitError> {
        match self {
            InitCondition::Dirac(a) => {
                if a.is_finite() {
                    Ok(())
                } else {
                    Err(InitError::NonFinite)
                }
            }
            InitCondition::DensityGAlpha(alpha) => {
                if *alpha > 0.0 && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(InitError::NonPositiveAlpha)
                }
            }
            InitCondition::DensityTable { grid, values, tail_rate } => {
                if grid.len() < 2
                    || grid.len() != values.len()
                    || grid.windows(2).any(|w| !(w[1] > w[0]))
                    || grid.iter().any(|x| !x.is_finite())
                {
                    return Err(InitError::BadGrid);
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0)
                    || values.iter().all(|v| *v == 0.0)
                {
                    return Err(InitError::BadValues);
                }
                let m = *tail_rate;
                if !(m > 0.0) || !m.is_finite() {
                    return Err(InitError::TailBound);
                }
                for (x, v) in grid.iter().zip(values) {
                    if *v > m * (-x.abs() / m).exp() {
                        return Err(InitError::TailBound);
                    }
                }
                Ok(())
            }
        }
    }

    pub(crate) fn compiled(&self) -> CompiledInit {
        self.validate().expect("invalid initial condition");
        match self {
            InitCondition::Dirac(a) => CompiledInit::Dirac(*a),
            InitCondition::DensityGAlpha(alpha) => CompiledInit::GAlpha(*alpha),
            InitCondition::DensityTable { grid, values, .. } => {
                CompiledInit::Table(GridInverseCdf::new(grid.clone(), values))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum CompiledInit {
    Dirac(f64),
    GAlpha(f64),
    Table(GridInverseCdf),
}

impl CompiledInit {
    pub(crate) fn sample(&self, g: &mut Gen) -> f64 {
        match self {
            CompiledInit::Dirac(a) => *a,
            CompiledInit::GAlpha(alpha) => sample_g_alpha(*alpha, g),
            CompiledInit::Table(inv) => inv.invert(g.gen::<f64>()),
        }
    }
}

/// A sampled two-layer path; `log_weight` is 0 for free draws and log W_n
/// (≤ 0) once soft-weighted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoWalkPath {
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub log_weight: f64,
}

impl TwoWalkPath {
    pub fn n(&self) -> usize {
        self.s1.len()
    }
}

/// Draw a free two-layer path: starts from h₁, h₂, then n−1 f_θ increments
/// per walk (walk 1 fully, then walk 2).
pub fn sample_free(
    n: usize,
    h1: &InitCondition,
    h2: &InitCondition,
    theta: f64,
    g: &mut Gen,
) -> TwoWalkPath {
    assert!(n >= 1, "need n >= 1");
    let c1 = h1.compiled();
    let c2 = h2.compiled();
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    sample_free_into(&c1, &c2, theta, g, &mut s1, &mut s2);
    TwoWalkPath { s1, s2, log_weight: 0.0 }
}

pub(crate) fn sample_free_into(
    c1: &CompiledInit,
    c2: &CompiledInit,
    theta: f64,
    g: &mut Gen,
    s1: &mut [f64],
    s2: &mut [f64],
) {
    let n = s1.len();
    s1[0] = c1.sample(g);
    for k in 1..n {
        s1[k] = s1[k - 1] + sample_f_theta(theta, g);
    }
    s2[0] = c2.sample(g);
    for k in 1..n {
        s2[k] = s2[k - 1] + sample_f_theta(theta, g);
    }
}

// Weight terms, in math indices (walks are 1-based):
//   E(k) = exp(S₂(k) − S₁(k+1))  for k = 1..n−1
//   D(k) = exp(S₂(k) − S₁(k))    for k = 2..n
// W_n uses E(1..n−1) and D(2..n−1); Ŵ_a uses E(1..a−1) and D(2..a);
// W_{r→n} uses E(r..n−1) and D(r+1..n−1). Terms are summed on a quantum grid
// shared by all three forms so every prefix/suffix partition is exact.
fn weight_quantizer(s1: &[f64], s2: &[f64]) -> QuantizedSum {
    let n = s1.len();
    let mut max_t = 0.0f64;
    for k in 1..n {
        let e = (s2[k - 1] - s1[k]).exp();
        if e.is_finite() && e > max_t {
            max_t = e;
        }
        let d = (s2[k] - s1[k]).exp();
        if d.is_finite() && d > max_t {
            max_t = d;
        }
    }
    QuantizedSum::for_terms(max_t, 2 * n)
}

fn term_e(s1: &[f64], s2: &[f64], k: usize) -> f64 {
    (s2[k - 1] - s1[k]).exp()
}

fn term_d(s1: &[f64], s2: &[f64], k: usize) -> f64 {
    (s2[k - 1] - s1[k - 1]).exp()
}

/// log W_n of the path; requires n ≥ 2.
pub fn log_w(path: &TwoWalkPath) -> f64 {
    log_w_split(path, 1)
}

/// log Ŵ_r: the prefix weight, with Ŵ₁ = 1; requires 1 ≤ r ≤ n.
pub fn log_w_hat(path: &TwoWalkPath, r: usize) -> f64 {
    let (s1, s2) = (&path.s1, &path.s2);
    let n = s1.len();
    assert!(r >= 1 && r <= n, "log_w_hat: r out of range");
    let q = weight_quantizer(s1, s2);
    let sum = q.sum(
        (1..r).flat_map(|k| [term_e(s1, s2, k), term_d(s1, s2, k + 1)].into_iter()),
    );
    -sum
}

/// log W_{r→n}: the suffix weight from index r; requires 1 ≤ r ≤ n−1.
pub fn log_w_split(path: &TwoWalkPath, r: usize) -> f64 {
    let (s1, s2) = (&path.s1, &path.s2);
    let n = s1.len();
    assert!(n >= 2, "log_w_split: need n >= 2");
    assert!(r >= 1 && r < n, "log_w_split: r out of range");
    let q = weight_quantizer(s1, s2);
    let sum = q.sum(
        std::iter::once(term_e(s1, s2, r)).chain(
            (r + 1..n).flat_map(|k| [term_e(s1, s2, k), term_d(s1, s2, k)].into_iter()),
        ),
    );
    -sum
}

/// Mean and standard error of W_n under the free law.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EwEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub reps: u64,
}

/// Monte Carlo estimate of E[W_n] under free walks from (h₁, h₂).
pub fn estimate_ew(
    n: usize,
    h1: &InitCondition,
    h2: &InitCondition,
    theta: f64,
    reps: u64,
    stream: RngStream,
) -> EwEstimate {
    assert!(n >= 2, "estimate_ew: need n >= 2");
    assert!(reps >= 100, "estimate_ew: need reps >= 100");
    let c1 = h1.compiled();
    let c2 = h2.compiled();
    let (sum, sum_sq) = par_replica_fold(
        reps,
        4096,
        |range| {
            let mut s1 = vec![0.0; n];
            let mut s2 = vec![0.0; n];
            let mut acc = (0.0f64, 0.0f64);
            for i in range {
                let mut g = stream.substream(i).generator();
                sample_free_into(&c1, &c2, theta, &mut g, &mut s1, &mut s2);
                let w = path_log_w(&s1, &s2).exp();
                acc.0 += w;
                acc.1 += w * w;
            }
            acc
        },
        |t: (f64, f64), a| (t.0 + a.0, t.1 + a.1),
        (0.0, 0.0),
    );
    let r = reps as f64;
    let mean = sum / r;
    let var = ((sum_sq - sum * sum / r) / (r - 1.0)).max(0.0);
    EwEstimate { mean, stderr: (var / r).sqrt(), reps }
}

pub(crate) fn path_log_w(s1: &[f64], s2: &[f64]) -> f64 {
    let n = s1.len();
    let q = weight_quantizer(s1, s2);
    let sum = q.sum(
        std::iter::once(term_e(s1, s2, 1))
            .chain((2..n).flat_map(|k| [term_e(s1, s2, k), term_d(s1, s2, k)].into_iter())),
    );
    -sum
}

/// Weighted draws of a path functional under the soft-free measure.
#[derive(Clone, Debug)]
pub struct WeightedValues<T> {
    pub items: Vec<(T, f64)>,
    pub ess: f64,
    pub low_ess: bool,
}

/// Importance sampling under the soft measure: free proposals weighted by
/// W_n. `f` extracts the functional of interest from each path.
pub fn soft_free_collect<T: Send>(
    n: usize,
    h1: &InitCondition,
    h2: &InitCondition,
    theta: f64,
    reps: u64,
    stream: RngStream,
    f: impl Fn(&[f64], &[f64]) -> T + Sync,
) -> WeightedValues<T> {
    assert!(n >= 2);
    assert!(reps >= 1);
    let c1 = h1.compiled();
    let c2 = h2.compiled();
    let items = par_replica_fold(
        reps,
        4096,
        |range| {
            let mut s1 = vec![0.0; n];
            let mut s2 = vec![0.0; n];
            let mut out = Vec::with_capacity(range.clone().count());
            for i in range {
                let mut g = stream.substream(i).generator();
                sample_free_into(&c1, &c2, theta, &mut g, &mut s1, &mut s2);
                out.push((f(&s1, &s2), path_log_w(&s1, &s2)));
            }
            out
        },
        |mut acc: Vec<(T, f64)>, mut part| {
            acc.append(&mut part);
            acc
        },
        Vec::new(),
    );
    let weights: Vec<f64> = items.iter().map(|p| p.1.exp()).collect();
    let e = ess(&weights);
    WeightedValues { items, ess: e, low_ess: e < 50.0 }
}

/// Soft-weighted full paths (small-reps convenience around
/// [`soft_free_collect`]).
pub fn soft_free_sample(
    n: usize,
    h1: &InitCondition,
    h2: &InitCondition,
    theta: f64,
    reps: u64,
    stream: RngStream,
) -> WeightedValues<TwoWalkPath> {
    let mut out = soft_free_collect(n, h1, h2, theta, reps, stream, |s1, s2| TwoWalkPath {
        s1: s1.to_vec(),
        s2: s2.to_vec(),
        log_weight: 0.0,
    });
    for (path, lw) in out.items.iter_mut() {
        path.log_weight = *lw;
    }
    out
}

/// Probability that free walks from Dirac(a₁), Dirac(a₂) keep S₁(k) ≥ S₂(k)
/// for all k in [2, n−1], with binomial standard error.
pub fn nonintersect_prob(
    n: usize,
    a1: f64,
    a2: f64,
    theta: f64,
    reps: u64,
    stream: RngStream,
) -> (f64, f64) {
    assert!(n >= 2);
    if n == 2 {
        return (1.0, 0.0);
    }
    assert!(reps >= 1000, "nonintersect_prob: need reps >= 1000");
    let hits = par_replica_fold(
        reps,
        8192,
        |range| {
            let mut hits = 0u64;
            for i in range {
                let mut g = stream.substream(i).generator();
                let mut x = a1;
                let mut y = a2;
                let mut ok = true;
                for _ in 2..n {
                    x += sample_f_theta(theta, &mut g);
                    y += sample_f_theta(theta, &mut g);
                    if x < y {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    hits += 1;
                }
            }
            hits
        },
        |t: u64, a| t + a,
        0u64,
    );
    let p = hits as f64 / reps as f64;
    (p, (p * (1.0 - p) / reps as f64).sqrt())
}

/// Diffusive-scale limit variance σ² = 4ψ′(θ) of the gap walk S₁ − S₂.
pub fn sigma_sq(theta: f64) -> f64 {
    4.0 * trigamma(theta)
}

/// Per-time KS comparison of the rescaled gap against Brownian motion
/// conditioned to stay positive.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiffusiveReport {
    pub z: f64,
    pub sigma_sq: f64,
    pub per_time: Vec<(f64, f64)>,
    pub ess: f64,
    pub low_start_warning: bool,
}

/// Under the soft measure from Dirac(x_n), Dirac(y_n), compare the law of
/// (S₁(⌈nt⌉) − S₂(⌈nt⌉))/√n at t ∈ {1/4, 1/2, 1} with the marginal at time t
/// of Brownian motion (variance σ² per unit time) started at
/// z = (x_n − y_n)/√n > 0 and conditioned to stay positive on [0, 1].
pub fn diffusive_check(
    n: usize,
    x_n: f64,
    y_n: f64,
    theta: f64,
    reps: u64,
    stream: RngStream,
) -> DiffusiveReport {
    assert!(n >= 8);
    let sq = sigma_sq(theta);
    let sigma = sq.sqrt();
    let root_n = (n as f64).sqrt();
    let z = (x_n - y_n) / root_n;
    assert!(z > 0.0, "diffusive_check: start gap must be positive");
    let times = [0.25, 0.5, 1.0];
    let idx: Vec<usize> = times
        .iter()
        .map(|t| (((n as f64) * t).ceil() as usize).clamp(2, n) - 1)
        .collect();
    let collected = soft_free_collect(
        n,
        &InitCondition::Dirac(x_n),
        &InitCondition::Dirac(y_n),
        theta,
        reps,
        stream,
        |s1, s2| idx.iter().map(|&k| (s1[k] - s2[k]) / root_n).collect::<Vec<f64>>(),
    );
    let mut per_time = Vec::new();
    for (ti, &t) in times.iter().enumerate() {
        let pairs: Vec<(f64, f64)> =
            collected.items.iter().map(|(us, lw)| (us[ti], *lw)).collect();
        let d = EmpiricalDistribution::from_log_weighted(pairs);
        let dens = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let sd = sigma * t.sqrt();
            let phi = |c: f64| (-0.5 * ((u - c) / sd).powi(2)).exp();
            let killed = phi(z) - phi(-z);
            let surv = if t < 1.0 { 2.0 * normal_cdf(u / (sigma * (1.0 - t).sqrt())) - 1.0 } else { 1.0 };
            (killed * surv).max(0.0)
        };
        let hi = z + 8.0 * sigma;
        let (xs, cdf) = cdf_table(&dens, 0.0, hi, 4000);
        let ks = ks_vs_cdf(&d, |x| eval_cdf_table(&xs, &cdf, x));
        per_time.push((t, ks));
    }
    DiffusiveReport {
        z,
        sigma_sq: sq,
        per_time,
        ess: collected.ess,
        low_start_warning: (x_n - y_n) < 1.0,
    }
}
