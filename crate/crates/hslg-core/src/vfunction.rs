//! Monte Carlo estimation and tabulation of the Doob function
//! V(z) = lim_n E[W_n | S₂ starts at z] / E[W_n | S₂ starts ~ g_α].
//!
//! One pass of the kernel serves every grid point and every scheduled walk
//! length at once: the increment draws are shared (common random numbers),
//! the start value only shifts the exponent of the start penalty, and the
//! soft-weight log-sum is checkpointed at each scheduled length. Sharing
//! draws collapses the ratio variance and makes monotonicity in z hold
//! pathwise, not just in expectation.

use crate::distributions::{sample_f_theta, sample_g_alpha};
use crate::numeric::StreamingLse;
use crate::rng::{par_replica_fold, RngStream};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VError {
    #[error("denominator estimate {mean:.3e} is within 3 stderr ({stderr:.3e}) of zero; increase reps")]
    DenominatorVanishing { mean: f64, stderr: f64 },
    #[error("doubling stabilization failed at {failed} of {total} grid points (allowed {allowed}): first failures at z = {examples:?}")]
    NotConverged { failed: usize, total: usize, allowed: usize, examples: Vec<f64> },
    #[error("estimate at z = {z} is not strictly positive")]
    NonPositive { z: f64 },
    #[error("table i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("table parse: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VEstimate {
    pub v: f64,
    pub stderr: f64,
}

/// Accepted table of V̂ on a grid, at the largest scheduled walk length.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VTable {
    pub schema_version: u32,
    pub grid: Vec<f64>,
    pub v: Vec<f64>,
    pub stderr: Vec<f64>,
    pub flags: Vec<bool>,
    pub n_used: usize,
    pub theta: f64,
    pub alpha: f64,
    pub denom: (f64, f64),
    pub reps: u64,
    pub seed: u64,
    pub stream_id: u64,
}

impl VTable {
    pub fn save_json(&self, path: &Path) -> Result<(), VError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, VError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Upper bound for V̂ on the whole line (the table is nonincreasing and
    /// left-clamped, so the first entry dominates).
    pub fn v_max(&self) -> f64 {
        self.v[0]
    }
}

/// Default tabulation grid: z ∈ [−8, 12] with spacing 0.25.
pub fn default_grid() -> Vec<f64> {
    (0..=80).map(|i| -8.0 + 0.25 * i as f64).collect()
}

struct GridPass {
    // per (schedule index s, grid index z): Σa, Σa², Σab
    a: Vec<(f64, f64, f64)>,
    // per schedule index: Σb, Σb²
    b: Vec<(f64, f64)>,
}

/// One CRN sweep: for each replica, one shared pair of increment streams and
/// one g_α start; numerator weights for every z in `zs` and the denominator
/// weight are read off the same soft-weight log-sum, checkpointed at every
/// scheduled length.
fn crn_pass(
    zs: &[f64],
    theta: f64,
    alpha: f64,
    schedule: &[usize],
    reps: u64,
    stream: RngStream,
) -> GridPass {
    let n_max = *schedule.iter().max().unwrap();
    assert!(schedule.iter().all(|&n| n >= 2));
    let nz = zs.len();
    let ns = schedule.len();
    par_replica_fold(
        reps,
        2048,
        |range| {
            let mut acc = GridPass { a: vec![(0.0, 0.0, 0.0); ns * nz], b: vec![(0.0, 0.0); ns] };
            let mut logt = vec![f64::NEG_INFINITY; ns];
            for i in range {
                let mut g = stream.substream(i).generator();
                let y = sample_g_alpha(alpha, &mut g);
                let mut lse = StreamingLse::new();
                // cd = C_k − D_k: (S₂ increments so far) − (S₁ increments so far)
                let mut cd = 0.0f64;
                for k in 1..n_max {
                    if k >= 2 {
                        lse.add(cd);
                    }
                    let xi = sample_f_theta(theta, &mut g);
                    let e_term = cd - xi;
                    lse.add(e_term);
                    let eta = sample_f_theta(theta, &mut g);
                    cd = e_term + eta;
                    for (s, &n) in schedule.iter().enumerate() {
                        if k + 1 == n {
                            logt[s] = lse.value();
                        }
                    }
                }
                for s in 0..ns {
                    let b = (-(y + logt[s]).exp()).exp();
                    acc.b[s].0 += b;
                    acc.b[s].1 += b * b;
                    for (zi, &z) in zs.iter().enumerate() {
                        let a = (-(z + logt[s]).exp()).exp();
                        let cell = &mut acc.a[s * nz + zi];
                        cell.0 += a;
                        cell.1 += a * a;
                        cell.2 += a * b;
                    }
                }
            }
            acc
        },
        |mut tot: GridPass, part| {
            for (t, p) in tot.a.iter_mut().zip(&part.a) {
                t.0 += p.0;
                t.1 += p.1;
                t.2 += p.2;
            }
            for (t, p) in tot.b.iter_mut().zip(&part.b) {
                t.0 += p.0;
                t.1 += p.1;
            }
            tot
        },
        GridPass { a: vec![(0.0, 0.0, 0.0); ns * nz], b: vec![(0.0, 0.0); ns] },
    )
}

struct RatioStats {
    v: Vec<Vec<f64>>,
    stderr: Vec<Vec<f64>>,
    denom: Vec<(f64, f64)>,
}

fn reduce_pass(pass: &GridPass, nz: usize, reps: u64) -> Result<RatioStats, VError> {
    let r = reps as f64;
    let ns = pass.b.len();
    let mut out = RatioStats { v: Vec::new(), stderr: Vec::new(), denom: Vec::new() };
    for s in 0..ns {
        let (sb, sbb) = pass.b[s];
        let bbar = sb / r;
        let s_bb = ((sbb - sb * sb / r) / (r - 1.0)).max(0.0);
        let se_b = (s_bb / r).sqrt();
        if bbar <= 3.0 * se_b {
            return Err(VError::DenominatorVanishing { mean: bbar, stderr: se_b });
        }
        let mut vs = Vec::with_capacity(nz);
        let mut ses = Vec::with_capacity(nz);
        for zi in 0..nz {
            let (sa, saa, sab) = pass.a[s * nz + zi];
            let abar = sa / r;
            let s_aa = ((saa - sa * sa / r) / (r - 1.0)).max(0.0);
            let s_ab = (sab - sa * sb / r) / (r - 1.0);
            let var = (s_aa / (bbar * bbar) + abar * abar * s_bb / bbar.powi(4)
                - 2.0 * abar * s_ab / bbar.powi(3))
                / r;
            vs.push(abar / bbar);
            ses.push(var.max(0.0).sqrt());
        }
        out.v.push(vs);
        out.stderr.push(ses);
        out.denom.push((bbar, se_b));
    }
    Ok(out)
}

/// Estimate V(z) at a single walk length n ≥ 16.
pub fn estimate_v(
    z: f64,
    n: usize,
    theta: f64,
    alpha: f64,
    reps: u64,
    stream: RngStream,
) -> Result<VEstimate, VError> {
    assert!(alpha > 0.0, "estimate_v: need alpha > 0");
    assert!(n >= 16, "estimate_v: need n >= 16");
    let pass = crn_pass(&[z], theta, alpha, &[n], reps, stream);
    let stats = reduce_pass(&pass, 1, reps)?;
    Ok(VEstimate { v: stats.v[0][0], stderr: stats.stderr[0][0] })
}

/// The two-argument form V(x, y): the weight depends only on differences, so
/// this is exactly `estimate_v(y − x, …)`.
pub fn estimate_v_from(
    x: f64,
    y: f64,
    n: usize,
    theta: f64,
    alpha: f64,
    reps: u64,
    stream: RngStream,
) -> Result<VEstimate, VError> {
    estimate_v(y - x, n, theta, alpha, reps, stream)
}

/// Build a [`VTable`] on the grid, estimating at every length in the
/// schedule with shared draws and accepting the largest; per-point doubling
/// flags compare the last two schedule entries.
pub fn build_v_table(
    grid: &[f64],
    n_schedule: &[usize],
    theta: f64,
    alpha: f64,
    reps: u64,
    stream: RngStream,
) -> Result<VTable, VError> {
    assert!(alpha > 0.0);
    assert!(!grid.is_empty() && grid.windows(2).all(|w| w[1] > w[0]), "grid must be strictly increasing");
    assert!(n_schedule.len() >= 2, "schedule needs at least two lengths");
    assert!(
        n_schedule.windows(2).all(|w| w[1] >= w[0]),
        "schedule must be nondecreasing"
    );
    let pass = crn_pass(grid, theta, alpha, n_schedule, reps, stream);
    let stats = reduce_pass(&pass, grid.len(), reps)?;
    let last = n_schedule.len() - 1;
    let prev = last - 1;
    let mut flags = Vec::with_capacity(grid.len());
    let mut failures = Vec::new();
    for zi in 0..grid.len() {
        let (v_n, se_n) = (stats.v[last][zi], stats.stderr[last][zi]);
        let (v_h, se_h) = (stats.v[prev][zi], stats.stderr[prev][zi]);
        let tol = (2.0 * (se_n * se_n + se_h * se_h).sqrt()).max(0.05 * v_n);
        let ok = (v_n - v_h).abs() <= tol;
        flags.push(ok);
        if !ok {
            failures.push(grid[zi]);
        }
        if !(v_n > 0.0) {
            return Err(VError::NonPositive { z: grid[zi] });
        }
    }
    let allowed = grid.len() / 10;
    if failures.len() > allowed {
        failures.truncate(8);
        return Err(VError::NotConverged {
            failed: flags.iter().filter(|f| !**f).count(),
            total: grid.len(),
            allowed,
            examples: failures,
        });
    }
    Ok(VTable {
        schema_version: 1,
        grid: grid.to_vec(),
        v: stats.v[last].clone(),
        stderr: stats.stderr[last].clone(),
        flags,
        n_used: n_schedule[last],
        theta,
        alpha,
        denom: stats.denom[last],
        reps,
        seed: stream.seed,
        stream_id: stream.stream_id,
    })
}

/// Evaluate the table at z: piecewise linear inside the grid, clamped on the
/// left, log-linear extrapolation on the right.
pub fn v_interpolate(table: &VTable, z: f64) -> f64 {
    let g = &table.grid;
    let v = &table.v;
    let m = g.len();
    if z <= g[0] {
        return v[0];
    }
    if z >= g[m - 1] {
        if m == 1 {
            return v[m - 1];
        }
        let slope = (v[m - 1].ln() - v[m - 2].ln()) / (g[m - 1] - g[m - 2]);
        return (v[m - 1].ln() + slope * (z - g[m - 1])).exp();
    }
    let hi = g.partition_point(|&x| x < z);
    let lo = hi - 1;
    if g[hi] == z {
        return v[hi];
    }
    let t = (z - g[lo]) / (g[hi] - g[lo]);
    v[lo] + t * (v[hi] - v[lo])
}
