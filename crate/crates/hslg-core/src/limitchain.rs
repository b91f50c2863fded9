//! The limiting two-layer Markov chain (S₁↑, S₂↑): importance sampling of
//! its first r steps through the prefix-weight measure, direct evaluation of
//! the entry density p₀^V and transition density p^V, and a sequential
//! sampler driven by those densities. The two samplers are independent
//! constructions of the same law and cross-validate each other.

use crate::distributions::{density_f_theta, density_g_alpha, sample_f_theta, sample_g_alpha};
use crate::numeric::GridInverseCdf;
use crate::rng::{par_replica_fold, Gen, RngStream};
use crate::softwalks::{log_w_hat, TwoWalkPath};
use crate::stats::ess;
use crate::vfunction::{v_interpolate, VTable};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("step {step}: {limit} consecutive rejections; table range too narrow for the proposal")]
    TooManyRejections { step: usize, limit: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ImportanceLG,
    SequentialPV,
}

/// First r steps of the chain; `s1up[0] == 0` always.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainPrefix {
    pub s1up: Vec<f64>,
    pub s2up: Vec<f64>,
    pub provenance: Provenance,
}

impl ChainPrefix {
    pub fn r(&self) -> usize {
        self.s1up.len()
    }
}

/// Weighted prefixes with their self-normalization diagnostics; `raw_mean`
/// is the unnormalized mean weight (should be 1 in expectation).
#[derive(Clone, Debug)]
pub struct WeightedPrefixes {
    pub prefixes: Vec<(ChainPrefix, f64)>,
    pub ess: f64,
    pub low_ess: bool,
    pub raw_mean: (f64, f64),
}

/// Draw weighted chain prefixes: free pairs from (Dirac(0), g_α) carrying
/// log weight log Ŵ_r + log V̂(S₂(r) − S₁(r)).
pub fn sample_lg_prefix(
    r: usize,
    table: &VTable,
    theta: f64,
    alpha: f64,
    reps: u64,
    stream: RngStream,
) -> WeightedPrefixes {
    assert!(r >= 1);
    assert!(reps >= 2);
    let prefixes = par_replica_fold(
        reps,
        4096,
        |range| {
            let mut out = Vec::with_capacity(range.clone().count());
            for i in range {
                let mut g = stream.substream(i).generator();
                let mut s1 = vec![0.0; r];
                for k in 1..r {
                    s1[k] = s1[k - 1] + sample_f_theta(theta, &mut g);
                }
                let mut s2 = vec![0.0; r];
                s2[0] = sample_g_alpha(alpha, &mut g);
                for k in 1..r {
                    s2[k] = s2[k - 1] + sample_f_theta(theta, &mut g);
                }
                let path = TwoWalkPath { s1, s2, log_weight: 0.0 };
                let lw = log_w_hat(&path, r)
                    + v_interpolate(table, path.s2[r - 1] - path.s1[r - 1]).ln();
                out.push((
                    ChainPrefix {
                        s1up: path.s1,
                        s2up: path.s2,
                        provenance: Provenance::ImportanceLG,
                    },
                    lw,
                ));
            }
            out
        },
        |mut acc: Vec<(ChainPrefix, f64)>, mut part| {
            acc.append(&mut part);
            acc
        },
        Vec::new(),
    );
    let weights: Vec<f64> = prefixes.iter().map(|p| p.1.exp()).collect();
    let e = ess(&weights);
    let n = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / n;
    let var = weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (n - 1.0);
    WeightedPrefixes {
        prefixes,
        ess: e,
        low_ess: e < 100.0,
        raw_mean: (mean, (var / n).sqrt()),
    }
}

/// Systematic resampling of weighted prefixes to `count` unweighted ones.
pub fn resample_systematic(
    weighted: &WeightedPrefixes,
    count: usize,
    g: &mut Gen,
) -> Vec<ChainPrefix> {
    assert!(count >= 1);
    let max_lw = weighted
        .prefixes
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut cum = Vec::with_capacity(weighted.prefixes.len());
    let mut total = 0.0;
    for (_, lw) in &weighted.prefixes {
        total += (lw - max_lw).exp();
        cum.push(total);
    }
    assert!(total > 0.0, "all weights vanished");
    let u0 = g.gen::<f64>();
    let mut out = Vec::with_capacity(count);
    let mut src = 0usize;
    for i in 0..count {
        let target = (i as f64 + u0) / count as f64 * total;
        while src + 1 < cum.len() && cum[src] < target {
            src += 1;
        }
        out.push(weighted.prefixes[src].0.clone());
    }
    out
}

/// Entry density p₀^V(y) = V̂(y) g_α(y).
pub fn eval_p0v(y: f64, table: &VTable, alpha: f64) -> f64 {
    v_interpolate(table, y) * density_g_alpha(y, alpha)
}

/// Transition density p^V((x₁,y₁) → (x₂,y₂)).
pub fn eval_pv(from: (f64, f64), to: (f64, f64), table: &VTable, theta: f64) -> f64 {
    let (x1, y1) = from;
    let (x2, y2) = to;
    let ratio = v_interpolate(table, y2 - x2) / v_interpolate(table, y1 - x1);
    ratio
        * density_f_theta(x2 - x1, theta)
        * density_f_theta(y2 - y1, theta)
        * (-(y1 - x2).exp() - (y2 - x2).exp()).exp()
}

const REJECTION_LIMIT: u32 = 10_000;

/// Grid inverse-CDF for the entry density, spanning the far-left g_α tail
/// through the table's right edge.
fn entry_cdf(table: &VTable, alpha: f64) -> GridInverseCdf {
    let lo = (-40.0f64).min(table.grid[0]);
    let hi = table.grid[table.grid.len() - 1] + 6.0;
    let pts = 8193;
    let xs: Vec<f64> = (0..pts)
        .map(|i| lo + (hi - lo) * i as f64 / (pts - 1) as f64)
        .collect();
    let dens: Vec<f64> = xs.iter().map(|&y| eval_p0v(y, table, alpha)).collect();
    GridInverseCdf::new(xs, &dens)
}

/// Sequential sampler: S₂↑(1) by inverse CDF of p₀^V, then rejection steps
/// with f_θ ⊗ f_θ proposals thinned by the p^V acceptance factor.
pub fn sample_sequential_pv(
    r: usize,
    table: &VTable,
    theta: f64,
    alpha: f64,
    reps: u64,
    stream: RngStream,
) -> Result<Vec<ChainPrefix>, ChainError> {
    assert!(r >= 1);
    let inv = entry_cdf(table, alpha);
    let v_max = table.v_max();
    let results = par_replica_fold(
        reps,
        1024,
        |range| {
            let mut out = Vec::with_capacity(range.clone().count());
            for i in range {
                let mut g = stream.substream(i).generator();
                out.push(sample_one_sequential(r, table, theta, v_max, &inv, &mut g));
            }
            out
        },
        |mut acc: Vec<Result<ChainPrefix, ChainError>>, mut part| {
            acc.append(&mut part);
            acc
        },
        Vec::new(),
    );
    results.into_iter().collect()
}

fn sample_one_sequential(
    r: usize,
    table: &VTable,
    theta: f64,
    v_max: f64,
    inv: &GridInverseCdf,
    g: &mut Gen,
) -> Result<ChainPrefix, ChainError> {
    let mut s1 = vec![0.0; r];
    let mut s2 = vec![0.0; r];
    s2[0] = inv.invert(g.gen::<f64>());
    for k in 1..r {
        let (x1, y1) = (s1[k - 1], s2[k - 1]);
        let mut rejected = 0u32;
        loop {
            let x2 = x1 + sample_f_theta(theta, g);
            let y2 = y1 + sample_f_theta(theta, g);
            let accept = v_interpolate(table, y2 - x2) / v_max
                * (-(y1 - x2).exp() - (y2 - x2).exp()).exp();
            if g.gen::<f64>() < accept {
                s1[k] = x2;
                s2[k] = y2;
                break;
            }
            rejected += 1;
            if rejected >= REJECTION_LIMIT {
                return Err(ChainError::TooManyRejections { step: k, limit: REJECTION_LIMIT });
            }
        }
    }
    Ok(ChainPrefix { s1up: s1, s2up: s2, provenance: Provenance::SequentialPV })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    // Synthetic monotone table: v(z) = 2/(1+e^z); plumbing tests only.
    fn synthetic_table() -> VTable {
        let grid: Vec<f64> = (0..=80).map(|i| -8.0 + 0.25 * i as f64).collect();
        let v: Vec<f64> = grid.iter().map(|z| 2.0 / (1.0 + z.exp())).collect();
        let m = grid.len();
        VTable {
            schema_version: 1,
            grid,
            v,
            stderr: vec![0.0; m],
            flags: vec![true; m],
            n_used: 64,
            theta: 1.0,
            alpha: 1.0,
            denom: (1.0, 0.0),
            reps: 0,
            seed: 0,
            stream_id: 0,
        }
    }

    #[test]
    fn first_entry_is_zero() {
        let t = synthetic_table();
        let w = sample_lg_prefix(3, &t, 1.0, 1.0, 64, RngStream::new(41, 0));
        for (p, _) in &w.prefixes {
            assert_eq!(p.s1up[0], 0.0);
        }
        let seq = sample_sequential_pv(3, &t, 1.0, 1.0, 64, RngStream::new(42, 0)).unwrap();
        for p in &seq {
            assert_eq!(p.s1up[0], 0.0);
        }
    }

    #[test]
    fn r1_weight_is_pure_v() {
        let t = synthetic_table();
        let w = sample_lg_prefix(1, &t, 1.0, 1.0, 32, RngStream::new(43, 0));
        for (p, lw) in &w.prefixes {
            let expect = v_interpolate(&t, p.s2up[0]).ln();
            assert_eq!(*lw, expect);
        }
    }

    #[test]
    fn far_start_pv_equals_product() {
        let t = synthetic_table();
        let from = (40.0, -40.0);
        let to = (40.5, -39.5);
        let full = eval_pv(from, to, &t, 1.0);
        let ratio = v_interpolate(&t, to.1 - to.0) / v_interpolate(&t, from.1 - from.0);
        let bare = ratio
            * density_f_theta(to.0 - from.0, 1.0)
            * density_f_theta(to.1 - from.1, 1.0);
        assert!((full - bare).abs() <= 1e-12 * bare.abs());
    }

    #[test]
    fn resampling_concentrated_weight() {
        let t = synthetic_table();
        let mut w = sample_lg_prefix(2, &t, 1.0, 1.0, 16, RngStream::new(44, 0));
        for (i, (_, lw)) in w.prefixes.iter_mut().enumerate() {
            *lw = if i == 5 { 0.0 } else { -1e9 };
        }
        let mut g = RngStream::new(45, 0).generator();
        let out = resample_systematic(&w, 10, &mut g);
        for p in &out {
            assert_eq!(p.s1up, w.prefixes[5].0.s1up);
        }
    }

    #[test]
    fn acceptance_factor_at_most_one() {
        let t = synthetic_table();
        let v_max = t.v_max();
        let mut g = RngStream::new(46, 0).generator();
        for _ in 0..500 {
            let y2: f64 = g.gen::<f64>() * 8.0 - 4.0;
            let x2: f64 = g.gen::<f64>() * 8.0 - 4.0;
            let acc = v_interpolate(&t, y2 - x2) / v_max
                * (-(0.3 - x2).exp() - (y2 - x2).exp()).exp();
            assert!(acc <= 1.0);
        }
    }
}
