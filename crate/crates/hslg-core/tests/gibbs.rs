mod common;

use std::collections::BTreeMap;

use common::QuadCdf;
use hslg_core::distributions::PolymerParams;
use hslg_core::gibbs::{
    build_irw, build_mirw, build_phi, build_phi_with_floor, build_rect, build_upsilon,
    conditional_logdensity, conditional_mass_diagnostic, conditional_mode, heat_bath_sweep,
    irw_sample, run_coupled_mcmc, run_mcmc, wprw_importance_sample, DomainSpecJson, EdgeColor,
    GibbsDomain, GibbsState, Vertex,
};
use hslg_core::special::gamma_cdf;
use hslg_core::stats::{ks_statistic, ks_vs_cdf, EmpiricalDistribution};
use hslg_core::RngStream;

fn params() -> PolymerParams {
    PolymerParams::new(1.0, 1.0).unwrap()
}

fn run_chain(domain: &GibbsDomain, burn: u64, n: usize, thin: u64, seed: u64) -> Vec<GibbsState> {
    let mut g = RngStream::new(seed, 0).generator();
    let mut state = GibbsState::new(domain);
    for _ in 0..burn {
        heat_bath_sweep(domain, &mut state, &mut g);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..thin {
            heat_bath_sweep(domain, &mut state, &mut g);
        }
        out.push(state.clone());
    }
    out
}

#[test]
fn frozen_fixture_matches_builder() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/phi2.json"
    ))
    .unwrap();
    let spec: DomainSpecJson = serde_json::from_str(&text).unwrap();
    let loaded = GibbsDomain::from_spec_json(&spec).unwrap();
    let built = build_phi(2, 0.5, -0.25, &params()).unwrap();
    let a = serde_json::to_value(loaded.to_spec_json()).unwrap();
    let b = serde_json::to_value(built.to_spec_json()).unwrap();
    assert_eq!(a, b);
    let reserialized = serde_json::to_value(&spec).unwrap();
    assert_eq!(a, reserialized);
}

#[test]
fn conditional_grid_mass_matches_quadrature() {
    let dom = build_irw(4, 0.0, -1.0, &params()).unwrap();
    let mut g = RngStream::new(501, 0).generator();
    let mut state = GibbsState::new(&dom);
    for sweeps in [10u64, 40] {
        for _ in 0..sweeps {
            heat_bath_sweep(&dom, &mut state, &mut g);
        }
        for &v in dom.interior() {
            let (grid_mass, quad_mass) = conditional_mass_diagnostic(&dom, &state, v);
            let rel = (grid_mass - quad_mass).abs() / quad_mass;
            assert!(rel <= 1e-6, "{v:?}: grid {grid_mass} vs quad {quad_mass}");
        }
    }
}

#[test]
fn closed_form_mode_maximizes_logdensity() {
    let dom = build_phi(3, 0.4, -0.6, &params()).unwrap();
    let mut g = RngStream::new(502, 0).generator();
    let mut state = GibbsState::new(&dom);
    for _ in 0..25 {
        heat_bath_sweep(&dom, &mut state, &mut g);
    }
    // Bisect on a wide central difference of the log-density: the derivative
    // has a well-conditioned sign even where the density itself is flat.
    let step = 1e-5;
    for &v in dom.interior() {
        let m = conditional_mode(&dom, &state, v);
        let slope = |u: f64| {
            conditional_logdensity(&dom, &state, v, u + step)
                - conditional_logdensity(&dom, &state, v, u - step)
        };
        let mut lo = m - 2.0;
        let mut hi = m + 2.0;
        assert!(slope(lo) > 0.0 && slope(hi) < 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let numeric = 0.5 * (lo + hi);
        assert!((m - numeric).abs() <= 1e-8, "{v:?}: {m} vs {numeric}");
    }
}

#[test]
fn conditionals_are_log_concave() {
    let dom = build_irw(3, 0.2, -0.4, &params()).unwrap();
    let mut g = RngStream::new(503, 0).generator();
    let mut state = GibbsState::new(&dom);
    for _ in 0..15 {
        heat_bath_sweep(&dom, &mut state, &mut g);
    }
    let h = 0.05;
    for &v in dom.interior() {
        let center = conditional_mode(&dom, &state, v);
        for k in -40..=40 {
            let u = center + h * k as f64;
            let second = conditional_logdensity(&dom, &state, v, u - h)
                - 2.0 * conditional_logdensity(&dom, &state, v, u)
                + conditional_logdensity(&dom, &state, v, u + h);
            assert!(second <= 1e-12, "{v:?} at {u}: {second}");
        }
    }
}

#[test]
fn single_vertex_sampler_matches_quadrature() {
    let p = params();
    let boundary: BTreeMap<Vertex, f64> =
        [((1, 1), 0.3), ((1, 3), -0.2), ((2, 1), 0.1), ((2, 3), -0.5)]
            .into_iter()
            .collect();
    let dom = build_rect(2..=2, 2..=2, boundary, &p).unwrap();
    let mut g = RngStream::new(504, 0).generator();
    let mut state = GibbsState::new(&dom);
    let mut vals = Vec::with_capacity(100_000);
    for _ in 0..100_000 {
        heat_bath_sweep(&dom, &mut state, &mut g);
        vals.push(state.value(&dom, (2, 2)));
    }
    let mode = conditional_mode(&dom, &state, (2, 2));
    let dref = &dom;
    let sref = GibbsState::new(&dom);
    let oracle = QuadCdf::new(
        move |u| {
            (conditional_logdensity(dref, &sref, (2, 2), u)).exp()
        },
        mode - 45.0,
        mode + 45.0,
        8000,
    );
    let total = oracle.total();
    let ks = ks_vs_cdf(&EmpiricalDistribution::from_unweighted(vals), |u| {
        oracle.at(u) / total
    });
    assert!(ks <= 0.006, "KS {ks}");
}

#[test]
fn single_site_chain_matches_gamma_oracle() {
    let b = -0.4;
    let run = irw_sample(1, 0.0, b, &params(), 200, 1, 30_000, 4, RngStream::new(505, 0)).unwrap();
    let vals: Vec<f64> = run
        .samples
        .iter()
        .map(|s| s.value(&run.domain, (2, 1)))
        .collect();
    let ks = ks_vs_cdf(&EmpiricalDistribution::from_unweighted(vals), |u| {
        gamma_cdf(2.0, (u - b).exp())
    });
    assert!(ks <= 0.01, "KS {ks}");
}

#[test]
fn yellow_gap_is_gamma_distributed() {
    let run = irw_sample(
        4,
        0.3,
        -0.2,
        &params(),
        default_burn(4),
        4,
        20_000,
        4,
        RngStream::new(506, 0),
    )
    .unwrap();
    let vals: Vec<f64> = run
        .samples
        .iter()
        .map(|s| (s.value(&run.domain, (2, 1)) - s.value(&run.domain, (2, 2))).exp())
        .collect();
    let ks = ks_vs_cdf(&EmpiricalDistribution::from_unweighted(vals), |x| {
        if x <= 0.0 {
            0.0
        } else {
            gamma_cdf(2.0, x)
        }
    });
    assert!(ks <= 0.02, "KS {ks}");
}

fn default_burn(t: usize) -> u64 {
    hslg_core::gibbs::default_burn_in(t)
}

#[test]
fn coupled_boundaries_keep_order() {
    let p = params();
    let dom = build_irw(4, 0.0, -1.0, &p).unwrap();
    let mut lo: BTreeMap<Vertex, f64> = dom.boundary().clone();
    let mut hi = lo.clone();
    lo.insert((1, 7), 0.0);
    lo.insert((2, 8), -1.0);
    hi.insert((1, 7), 1.0);
    hi.insert((2, 8), 0.0);
    let dom_lo = dom.with_boundary(lo.clone()).unwrap();
    let dom_hi = dom.with_boundary(hi.clone()).unwrap();
    let mut g = RngStream::new(507, 0).generator();
    let (sl, sh) = run_coupled_mcmc(&dom, lo, hi, 10_000, &mut g).unwrap();
    for &v in dom.interior() {
        assert!(
            sl.value(&dom_lo, v) <= sh.value(&dom_hi, v),
            "{v:?}: {} > {}",
            sl.value(&dom_lo, v),
            sh.value(&dom_hi, v)
        );
    }
}

#[test]
fn finite_floor_equals_reweighted_open_chain() {
    let p = params();
    let (a, b) = (0.4, -0.3);
    let floor = [-3.0, -3.5, -2.5];
    let observables: [Vertex; 3] = [(2, 1), (1, 2), (2, 5)];
    let chains = 8usize;
    let (burn, n, thin) = (3000u64, 400usize, 5u64);

    let dom_floor = build_phi_with_floor(3, a, b, &floor, &p).unwrap();
    let dom_open = build_phi(3, a, b, &p).unwrap();

    let mut lhs: Vec<Vec<f64>> = vec![Vec::new(); 3];
    let mut rhs: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for c in 0..chains {
        let states = run_chain(&dom_floor, burn, n, thin, 508 + c as u64);
        for (oi, &v) in observables.iter().enumerate() {
            let m: f64 = states
                .iter()
                .map(|s| s.value(&dom_floor, v).tanh())
                .sum::<f64>()
                / n as f64;
            lhs[oi].push(m);
        }

        let states = run_chain(&dom_open, burn, n, thin, 608 + c as u64);
        let log_w: Vec<f64> = states
            .iter()
            .map(|s| {
                let mut h = 0.0;
                for (j, &cj) in floor.iter().enumerate() {
                    let j1 = 2 * j as i64 + 1;
                    h += (cj - s.value(&dom_open, (2, j1))).exp();
                    if j < floor.len() - 1 {
                        h += (cj - s.value(&dom_open, (2, j1 + 2))).exp();
                    }
                }
                -h
            })
            .collect();
        let max_lw = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let wsum: f64 = log_w.iter().map(|lw| (lw - max_lw).exp()).sum();
        for (oi, &v) in observables.iter().enumerate() {
            let num: f64 = states
                .iter()
                .zip(&log_w)
                .map(|(s, lw)| s.value(&dom_open, v).tanh() * (lw - max_lw).exp())
                .sum();
            rhs[oi].push(num / wsum);
        }
    }

    for oi in 0..3 {
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = |xs: &[f64], m: f64| {
            (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
        };
        let (ml, mr) = (mean(&lhs[oi]), mean(&rhs[oi]));
        let se = ((sd(&lhs[oi], ml).powi(2) + sd(&rhs[oi], mr).powi(2)) / chains as f64).sqrt();
        assert!(
            (ml - mr).abs() <= 3.0 * se,
            "{:?}: {ml} vs {mr}, 3se {}",
            observables[oi],
            3.0 * se
        );
    }
}

#[test]
fn boundary_translation_shifts_values_exactly() {
    let p = params();
    let base = build_irw(3, 0.0, -0.25, &p).unwrap();
    let c = 2.5;
    let mut shifted_boundary = base.boundary().clone();
    for (_, val) in shifted_boundary.iter_mut() {
        if val.is_finite() {
            *val += c;
        }
    }
    let shifted = base.with_boundary(shifted_boundary).unwrap();
    let mut g1 = RngStream::new(509, 0).generator();
    let mut g2 = RngStream::new(509, 0).generator();
    let s1 = run_mcmc(&base, 200, &mut g1);
    let s2 = run_mcmc(&shifted, 200, &mut g2);
    for &v in base.interior() {
        let want = s1.value(&base, v) + c;
        assert_eq!(s2.value(&shifted, v), want, "{v:?}");
    }
}

#[test]
fn window_and_multilayer_builders_are_consistent() {
    let p = params();
    let ups = build_upsilon(3, 2, 0.2, -0.1, &[1.0, 0.8, 1.2], &p).unwrap();
    let ceiling_row = 2;
    let mut saw_ceiling_edge = false;
    for &(tail, head, color) in ups.edges() {
        assert_ne!(tail.0, 2 * 2 + 1, "floor row edges must be dropped");
        assert_ne!(head.0, 2 * 2 + 1);
        if tail.0 == ceiling_row || head.0 == ceiling_row {
            saw_ceiling_edge = true;
            assert_eq!(color, EdgeColor::Black, "{tail:?}->{head:?}");
            assert_eq!(head.0, ceiling_row, "ceiling edges must point into the ceiling");
        }
    }
    assert!(saw_ceiling_edge);

    let mirw = build_mirw(2, 3, &[0.2, 0.4], &[-0.1, 0.1], &[0.9], &p).unwrap();
    assert_eq!(mirw.interior().len(), 2 * (2 * 3 - 2) + 2 * (2 * 3 - 1));
    for &(tail, head, _) in mirw.edges() {
        assert!(tail.0 <= 2 * 2 && head.0 <= 2 * 2, "no floor-row edges");
    }
}

#[test]
fn pinned_chain_matches_weighted_walk_pair() {
    let p = params();
    let t = 3usize;
    let (x, y) = (0.5, -0.5);
    let run = irw_sample(
        t,
        x,
        y,
        &p,
        default_burn(t),
        t as u64,
        20_000,
        4,
        RngStream::new(510, 0),
    )
    .unwrap();
    let w = wprw_importance_sample(t, x, y, &p, 200_000, RngStream::new(511, 0));
    assert!(!w.low_ess, "ESS {}", w.ess);

    // Interior coordinate map: row 1 odd slots ↔ first walk, row 2 even
    // slots ↔ second walk, i = 1..T−1 (slot T is the pin).
    for i in 1..t {
        let mc = EmpiricalDistribution::from_unweighted(
            run.samples
                .iter()
                .map(|s| s.value(&run.domain, (1, 2 * i as i64 - 1)))
                .collect(),
        );
        let is = EmpiricalDistribution::from_log_weighted(
            w.items.iter().map(|(path, lw)| (path.s1[i - 1], *lw)).collect(),
        );
        let ks = ks_statistic(&mc, &is);
        assert!(ks <= 0.05, "first walk slot {i}: KS {ks}");

        let mc = EmpiricalDistribution::from_unweighted(
            run.samples
                .iter()
                .map(|s| s.value(&run.domain, (2, 2 * i as i64)))
                .collect(),
        );
        let is = EmpiricalDistribution::from_log_weighted(
            w.items.iter().map(|(path, lw)| (path.s2[i - 1], *lw)).collect(),
        );
        let ks = ks_statistic(&mc, &is);
        assert!(ks <= 0.05, "second walk slot {i}: KS {ks}");
    }
}

#[test]
fn long_chain_stays_on_diffusive_scale() {
    let t = 100usize;
    let dom = build_irw(t, 0.0, 0.0, &params()).unwrap();
    let states = run_chain(&dom, default_burn(t), 30, 50, 512);
    let bound = 6.0 * (t as f64).sqrt();
    let mut within = 0usize;
    for s in &states {
        let sup = dom
            .interior()
            .iter()
            .filter(|v| v.0 == 1)
            .map(|&v| s.value(&dom, v).abs())
            .fold(0.0f64, f64::max);
        if sup <= bound {
            within += 1;
        }
    }
    assert!(
        within as f64 >= 0.95 * states.len() as f64,
        "{within}/{} inside {bound}",
        states.len()
    );
}
