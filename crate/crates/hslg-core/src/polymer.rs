//! Log-space partition-function recursion on the half-space lattice
//! {(m, n): 1 ≤ n ≤ m}, anti-diagonal increment extraction, and the
//! half-layer evolution of general anti-diagonal initial data.
//!
//! Disorder is never stored: log-weights are drawn (or replayed) in one
//! frozen sweep order — layers m + n = ℓ for ℓ = 2..2N, then m ascending —
//! so a recorded draw sequence can be replayed cell-for-cell by oracles.

use crate::distributions::{sample_log_inv_gamma, PolymerParams};
use crate::numeric::lse2;
use crate::rng::Gen;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Anti-diagonal initial data for the recursion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum InitialData {
    /// Z(k, 0) = 1 at k = 1, else 0.
    Delta,
    /// Z(k−1, −k+1) = e^{h(k)}.
    General(Vec<f64>),
}

impl InitialData {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            InitialData::Delta => Ok(()),
            InitialData::General(h) => {
                if h.is_empty() {
                    Err("general initial data must be nonempty".into())
                } else if h.iter().any(|x| !x.is_finite()) {
                    Err("general initial data must be finite".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// One anti-diagonal layer of log partition values: entry k (1-based) is
/// log Z(N+k−1, N−k+1).
#[derive(Clone, Debug)]
pub struct LogZLayer {
    pub layer_index: usize,
    pub values: Vec<f64>,
}

impl LogZLayer {
    /// Lattice point of 1-based entry k; always satisfies j ≤ i.
    pub fn lattice_point(&self, k: usize) -> (usize, i64) {
        assert!(k >= 1 && k <= self.values.len());
        (self.layer_index + k - 1, self.layer_index as i64 - k as i64 + 1)
    }
}

/// Visit every disorder cell in the frozen sweep order.
pub fn disorder_sweep(big_n: usize, mut f: impl FnMut(usize, usize)) {
    for l in 2..=2 * big_n {
        for m in (l + 1) / 2..=l - 1 {
            f(m, l - m);
        }
    }
}

/// Gamma shape of the weight at (m, n): boundary on the diagonal, bulk off.
pub fn weight_shape(params: &PolymerParams, m: usize, n: usize) -> f64 {
    if m == n {
        params.alpha() + params.theta()
    } else {
        2.0 * params.theta()
    }
}

/// Run the recursion with delta initial data against a supplied log-weight
/// source and return the full anti-diagonal layer at m + n = 2N.
pub fn layer_from_disorder(
    big_n: usize,
    mut logw: impl FnMut(usize, usize) -> f64,
) -> LogZLayer {
    assert!(big_n >= 1);
    let mut prev: Vec<f64> = Vec::new();
    let mut prev_lo = 1usize;
    for l in 2..=2 * big_n {
        let lo = (l + 1) / 2;
        let hi = l - 1;
        let mut cur = Vec::with_capacity(hi - lo + 1);
        for m in lo..=hi {
            let n = l - m;
            let w = logw(m, n);
            let val = if m == n {
                // diagonal rule Z(n,n) = W·Z(n,n−1)
                let parent = if m == 1 { 0.0 } else { prev[m - prev_lo] };
                w + parent
            } else {
                let up = if m - 1 >= prev_lo && m - 1 <= l - 2 {
                    prev[m - 1 - prev_lo]
                } else {
                    f64::NEG_INFINITY
                };
                let left = if n == 1 {
                    if m == 1 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    prev[m - prev_lo]
                };
                w + lse2(up, left)
            };
            cur.push(val);
        }
        prev = cur;
        prev_lo = lo;
    }
    LogZLayer { layer_index: big_n, values: prev }
}

/// Increments along the anti-diagonal from a supplied log-weight source.
pub fn increments_from_disorder(
    big_n: usize,
    r: usize,
    logw: impl FnMut(usize, usize) -> f64,
) -> Vec<f64> {
    assert!(r >= 1 && r <= big_n, "need 1 <= r <= N");
    let layer = layer_from_disorder(big_n, logw);
    (0..r).map(|k| layer.values[k] - layer.values[0]).collect()
}

/// Full log-partition table for every cell with m + n ≤ 2N, drawn in the
/// same frozen order; reference-grade (dense storage) for cross-checks.
pub fn log_partition_table(
    big_n: usize,
    mut logw: impl FnMut(usize, usize) -> f64,
) -> HashMap<(usize, usize), f64> {
    let mut z = HashMap::new();
    disorder_sweep(big_n, |m, n| {
        let w = logw(m, n);
        let val = if m == n {
            let parent = if m == 1 { 0.0 } else { z[&(m, n - 1)] };
            w + parent
        } else {
            let up = z.get(&(m - 1, n)).copied().unwrap_or(f64::NEG_INFINITY);
            let left = if n == 1 {
                if m == 1 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                z[&(m, n - 1)]
            };
            w + lse2(up, left)
        };
        z.insert((m, n), val);
    });
    z
}

/// Linear-space partition sum over every up-right path (1,1) → (m,n) that
/// stays in {j ≤ i}, multiplying the weight exp(logw) of each visited cell.
/// Independent of the layer recursion — paths are enumerated as explicit
/// step sequences — so it serves as the exact reference on small lattices.
pub fn path_sum(m: usize, n: usize, logw: &HashMap<(usize, usize), f64>) -> f64 {
    let steps = (m - 1) + (n - 1);
    assert!(steps < 31, "path enumeration is exponential; keep m + n small");
    let mut total = 0.0f64;
    for mask in 0u32..(1u32 << steps) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let (mut i, mut j) = (1usize, 1usize);
        let mut prod = logw[&(1, 1)].exp();
        let mut ok = true;
        for b in 0..steps {
            if mask >> b & 1 == 1 {
                j += 1;
            } else {
                i += 1;
            }
            if j > i {
                ok = false;
                break;
            }
            prod *= logw[&(i, j)].exp();
        }
        if ok {
            total += prod;
        }
    }
    total
}

/// One disorder realization: free-energy increments
/// (log Z(N+k−1, N−k+1) − log Z(N, N)) for k = 1..r, delta initial data.
pub fn simulate_increments(
    params: &PolymerParams,
    big_n: usize,
    r: usize,
    g: &mut Gen,
) -> Vec<f64> {
    increments_from_disorder(big_n, r, |m, n| {
        sample_log_inv_gamma(weight_shape(params, m, n), g)
    })
}

/// Evolve general anti-diagonal initial data h through N double half-layer
/// updates and return the increments relative to the diagonal entry.
/// Entries k ≤ r after N steps are exact when h has length ≥ N + r + 1
/// (information propagates one entry per step, so the truncated far end
/// never reaches them).
pub fn evolve_stationary(
    params: &PolymerParams,
    h: &[f64],
    steps: usize,
    r: usize,
    g: &mut Gen,
) -> Vec<f64> {
    assert!(r >= 1);
    assert!(h.len() >= steps + r + 1, "initial data too short: need K >= N + r + 1");
    assert!(h.iter().all(|x| x.is_finite()), "initial data must be finite");
    let bulk = 2.0 * params.theta();
    let diag = params.alpha() + params.theta();
    let mut state: Vec<f64> = h.iter().map(|x| x - h[0]).collect();
    for _ in 0..steps {
        let w = state.len();
        let mut odd = Vec::with_capacity(w - 1);
        for k in 0..w - 1 {
            odd.push(sample_log_inv_gamma(bulk, g) + lse2(state[k], state[k + 1]));
        }
        let mut even = Vec::with_capacity(w - 1);
        even.push(sample_log_inv_gamma(diag, g) + odd[0]);
        for k in 1..w - 1 {
            even.push(sample_log_inv_gamma(bulk, g) + lse2(odd[k - 1], odd[k]));
        }
        state = even;
    }
    (0..r).map(|k| state[k] - state[0]).collect()
}
