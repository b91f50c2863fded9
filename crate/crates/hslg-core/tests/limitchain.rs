mod common;

use std::sync::OnceLock;

use common::QuadCdf;
use hslg_core::distributions::{density_f_theta, density_g_alpha};
use hslg_core::limitchain::{
    eval_p0v, eval_pv, sample_lg_prefix, sample_sequential_pv, ChainPrefix, Provenance,
};
use hslg_core::quad::{integrate, integrate_2d};
use hslg_core::stats::{ks_statistic, EmpiricalDistribution};
use hslg_core::vfunction::{build_v_table, v_interpolate, VTable};
use hslg_core::RngStream;

fn table() -> &'static VTable {
    static TABLE: OnceLock<VTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Wider than the default grid on the left: the importance weights
        // probe V̂ at gaps below −8, where a clamped table would bias the
        // raw-mean identity.
        let grid: Vec<f64> = (0..=128).map(|i| -20.0 + 0.25 * i as f64).collect();
        build_v_table(&grid, &[256, 512], 1.0, 1.0, 300_000, RngStream::new(400, 0)).unwrap()
    })
}

#[test]
fn entry_density_integrates_to_one() {
    let mass = integrate(&|y| eval_p0v(y, table(), 1.0), -60.0, 12.0, 1e-8);
    assert!((mass - 1.0).abs() < 0.03, "∫p₀ = {mass}");
}

#[test]
fn transition_density_integrates_to_one() {
    let from = (0.0, -1.0);
    let mass = integrate_2d(
        &|x2, y2| eval_pv(from, (x2, y2), table(), 1.0),
        -15.0,
        15.0,
        -16.0,
        14.0,
        1e-6,
    );
    assert!((mass - 1.0).abs() < 0.05, "∫∫p = {mass}");
}

#[test]
fn far_start_transition_drops_soft_factor() {
    let from = (30.0, 0.0);
    let to = (30.7, 0.4);
    let got = eval_pv(from, to, table(), 1.0);
    let want = v_interpolate(table(), to.1 - to.0) / v_interpolate(table(), from.1 - from.0)
        * density_f_theta(to.0 - from.0, 1.0)
        * density_f_theta(to.1 - from.1, 1.0);
    assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
}

#[test]
fn importance_weight_at_length_one_is_v() {
    let w = sample_lg_prefix(1, table(), 1.0, 1.0, 2000, RngStream::new(401, 0));
    for (p, lw) in &w.prefixes {
        assert_eq!(p.s1up, vec![0.0]);
        let expect = v_interpolate(table(), p.s2up[0]).ln();
        assert_eq!(*lw, expect);
    }
    assert!(w.raw_mean.0.is_finite() && w.raw_mean.0 > 0.0);
}

#[test]
fn raw_mean_weight_is_one() {
    for (i, r) in [1usize, 2, 4].iter().enumerate() {
        let w = sample_lg_prefix(*r, table(), 1.0, 1.0, 200_000, RngStream::new(402, i as u64));
        let (mean, se) = w.raw_mean;
        // 0.01 covers the finite-length bias of the table's V estimates.
        assert!(
            (mean - 1.0).abs() <= 3.0 * se + 0.01,
            "r={r}: mean {mean}, 3se {}",
            3.0 * se
        );
    }
}

#[test]
fn sequential_entry_matches_quadrature() {
    let t = table();
    let draws = sample_sequential_pv(1, t, 1.0, 1.0, 100_000, RngStream::new(403, 0)).unwrap();
    let vals: Vec<f64> = draws.iter().map(|p| p.s2up[0]).collect();
    let oracle = QuadCdf::new(|y| eval_p0v(y, t, 1.0), -60.0, 12.0, 8000);
    let total = oracle.total();
    let ks = hslg_core::stats::ks_vs_cdf(&EmpiricalDistribution::from_unweighted(vals), |y| {
        oracle.at(y) / total
    });
    assert!(ks <= 0.01, "KS {ks}");
}

fn lg_marginal(r: usize, reps: u64, seed: u64, pick: impl Fn(&ChainPrefix) -> f64) -> EmpiricalDistribution {
    let w = sample_lg_prefix(r, table(), 1.0, 1.0, reps, RngStream::new(seed, 0));
    assert!(!w.low_ess, "ESS {}", w.ess);
    EmpiricalDistribution::from_log_weighted(
        w.prefixes.iter().map(|(p, lw)| (pick(p), *lw)).collect(),
    )
}

fn seq_marginal(r: usize, reps: u64, seed: u64, pick: impl Fn(&ChainPrefix) -> f64) -> EmpiricalDistribution {
    let draws = sample_sequential_pv(r, table(), 1.0, 1.0, reps, RngStream::new(seed, 0)).unwrap();
    for p in &draws {
        assert_eq!(p.s1up[0], 0.0);
        assert!(matches!(p.provenance, Provenance::SequentialPV));
    }
    EmpiricalDistribution::from_unweighted(draws.iter().map(&pick).collect())
}

#[test]
fn samplers_agree_at_length_two() {
    let a = lg_marginal(2, 200_000, 404, |p| p.s1up[1]);
    let b = seq_marginal(2, 100_000, 405, |p| p.s1up[1]);
    let ks = ks_statistic(&a, &b);
    assert!(ks <= 0.02, "KS {ks} (ESS {})", a.ess());
}

#[test]
fn samplers_agree_at_length_three() {
    let a = lg_marginal(3, 200_000, 406, |p| p.s1up[2]);
    let b = seq_marginal(3, 100_000, 407, |p| p.s1up[2]);
    let ks = ks_statistic(&a, &b);
    assert!(ks <= 0.03, "KS {ks} (ESS {})", a.ess());
}

#[test]
fn soft_ordering_suppresses_overshoot() {
    let draws = sample_sequential_pv(8, table(), 1.0, 1.0, 20_000, RngStream::new(408, 0)).unwrap();
    for k in 0..8 {
        let hits = draws
            .iter()
            .filter(|p| p.s2up[k] - p.s1up[k] > 4.0)
            .count();
        assert!(
            (hits as f64) < 1e-3 * draws.len() as f64,
            "k={}: {hits} overshoots",
            k + 1
        );
    }
}

#[test]
fn step_law_depends_only_on_current_pair() {
    let draws = sample_sequential_pv(3, table(), 1.0, 1.0, 200_000, RngStream::new(409, 0)).unwrap();
    let cell = 0.4;
    let mut bins: std::collections::HashMap<(i64, i64), Vec<(f64, f64, f64)>> =
        std::collections::HashMap::new();
    for p in &draws {
        let key = (
            (p.s1up[1] / cell).floor() as i64,
            (p.s2up[1] / cell).floor() as i64,
        );
        bins.entry(key)
            .or_default()
            .push((p.s2up[0], p.s1up[2] - p.s1up[1], p.s2up[2] - p.s2up[1]));
    }
    let mut tested = 0usize;
    let mut passed = 0usize;
    for pts in bins.values_mut() {
        if pts.len() < 400 {
            continue;
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (lo, hi) = pts.split_at(pts.len() / 2);
        for pick in [1usize, 2] {
            let a = EmpiricalDistribution::from_unweighted(
                lo.iter().map(|t| if pick == 1 { t.1 } else { t.2 }).collect(),
            );
            let b = EmpiricalDistribution::from_unweighted(
                hi.iter().map(|t| if pick == 1 { t.1 } else { t.2 }).collect(),
            );
            let ks = ks_statistic(&a, &b);
            let n_eff = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
            let crit = (-(0.001f64 / 2.0).ln() / 2.0).sqrt() / n_eff.sqrt();
            tested += 1;
            if ks <= crit {
                passed += 1;
            }
        }
    }
    assert!(tested >= 20, "only {tested} cell tests");
    assert!(
        passed as f64 >= 0.9 * tested as f64,
        "{passed}/{tested} conditional comparisons passed"
    );
}

#[test]
fn entry_density_uses_v_times_g() {
    let t = table();
    for y in [-3.0, -1.0, 0.0, 1.5] {
        let want = v_interpolate(t, y) * density_g_alpha(y, 1.0);
        assert_eq!(eval_p0v(y, t, 1.0), want);
    }
}
