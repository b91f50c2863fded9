//! The ten acceptance criteria, runnable at two scales: `Full` is the
//! release gate (the numbers the integration suite pins), `Quick` is a
//! smoke profile with reduced replica counts and correspondingly reduced
//! effective-sample floors — distance thresholds stay identical.
//!
//! Criteria that need the reference V table (A2, A3, A6, A7, A9) share one
//! build per profile: schedule {64, 128, 256, 512} with 10⁶ common-random-
//! number replicas on the grid [−20, 12] step 0.25 at full scale, schedule
//! {64, 128} with 10⁵ replicas on [−14, 12] step 0.5 for the smoke profile
//! (the short schedule cannot resolve the slowly-converging deep-left tail,
//! and nothing at smoke scale queries it).

use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::Instant;

use crate::distributions::{
    density_f_theta, density_g_alpha, sample_log_inv_gamma, PolymerParams,
};
use crate::gibbs::{
    build_irw, default_burn_in, irw_sample, run_coupled_mcmc, run_mcmc, wprw_importance_sample,
};
use crate::limitchain::{eval_p0v, eval_pv, sample_lg_prefix, sample_sequential_pv};
use crate::polymer::{
    disorder_sweep, evolve_stationary, log_partition_table, path_sum, simulate_increments,
    weight_shape,
};
use crate::quad::{integrate, integrate_2d};
use crate::rng::{par_replica_fold, RngStream};
use crate::softwalks::{
    log_w, log_w_hat, log_w_split, nonintersect_prob, sigma_sq, soft_free_collect, InitCondition,
    TwoWalkPath,
};
use crate::special::gamma_cdf;
use crate::stats::{ks_statistic, ks_vs_cdf, EmpiricalDistribution};
use crate::vfunction::{build_v_table, estimate_v, VTable};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Quick,
    Full,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Quick => "quick",
            Profile::Full => "full",
        }
    }
}

/// Outcome of one criterion. `detail` holds the measured statistics and is
/// deterministic in the profile; `seconds` is the only timing field.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionVerdict {
    pub id: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

struct Scale {
    a1_cases: u64,
    a2_tol_2d: f64,
    a2_half_width: f64,
    a3_reps: u64,
    a4_reps: u64,
    a5_reps: u64,
    a5_ess_floor: f64,
    a6_limit_reps: u64,
    a6_limit_ess_floor: f64,
    a6_replicas: u64,
    a6_slack: f64,
    a7_prefixes: u64,
    a8_mcmc_reps: u64,
    a8_chains: usize,
    a8_is_reps: u64,
    a8_ess_floor: f64,
}

fn scale(profile: Profile) -> Scale {
    match profile {
        Profile::Full => Scale {
            a1_cases: 1000,
            a2_tol_2d: 1e-6,
            a2_half_width: 15.0,
            a3_reps: 1_000_000,
            a4_reps: 200_000,
            a5_reps: 4_800_000,
            a5_ess_floor: 1e5,
            a6_limit_reps: 600_000,
            a6_limit_ess_floor: 1e5,
            a6_replicas: 10_000,
            a6_slack: 0.01,
            a7_prefixes: 20_000,
            a8_mcmc_reps: 50_000,
            a8_chains: 16,
            a8_is_reps: 2_000_000,
            a8_ess_floor: 5e4,
        },
        Profile::Quick => Scale {
            a1_cases: 100,
            a2_tol_2d: 1e-5,
            a2_half_width: 12.0,
            a3_reps: 100_000,
            a4_reps: 20_000,
            a5_reps: 200_000,
            a5_ess_floor: 2e3,
            a6_limit_reps: 100_000,
            a6_limit_ess_floor: 1e4,
            a6_replicas: 2_000,
            a6_slack: 0.03,
            a7_prefixes: 4_000,
            a8_mcmc_reps: 10_000,
            a8_chains: 8,
            a8_is_reps: 200_000,
            a8_ess_floor: 5e3,
        },
    }
}

static FULL_TABLE: OnceLock<VTable> = OnceLock::new();
static QUICK_TABLE: OnceLock<VTable> = OnceLock::new();

/// The shared reference table for the profile, built on first use.
pub fn reference_table(profile: Profile) -> &'static VTable {
    let build = move || {
        let (grid_min, step_inv, schedule, reps, sub): (i32, i32, &[usize], u64, u64) =
            match profile {
                Profile::Full => (-20, 4, &[64, 128, 256, 512], 1_000_000, 0),
                Profile::Quick => (-14, 2, &[64, 128], 100_000, 1),
            };
        let grid: Vec<f64> =
            (grid_min * step_inv..=12 * step_inv).map(|i| i as f64 / step_inv as f64).collect();
        build_v_table(&grid, schedule, 1.0, 1.0, reps, RngStream::new(901, sub))
            .expect("reference table build must pass its convergence gate")
    };
    match profile {
        Profile::Full => FULL_TABLE.get_or_init(build),
        Profile::Quick => QUICK_TABLE.get_or_init(build),
    }
}

fn params() -> PolymerParams {
    PolymerParams::new(1.0, 1.0).unwrap()
}

pub fn a1_exact_algebra(profile: Profile) -> CriterionVerdict {
    let t0 = Instant::now();
    let s = scale(profile);
    let quantum = (2.0f64).powi(-20);
    let p = params();

    let mut g = RngStream::new(902, 0).generator();
    for _ in 0..s.a1_cases {
        let n = 2 + (g.gen::<u32>() % 38) as usize;
        let s1: Vec<f64> = (0..n).map(|_| g.gen::<f64>() * 60.0 - 30.0).collect();
        let s2: Vec<f64> = (0..n).map(|_| g.gen::<f64>() * 60.0 - 30.0).collect();
        let r = 1 + (g.gen::<u32>() as usize) % (n - 1);
        let path = TwoWalkPath { s1, s2, log_weight: 0.0 };
        let parts = log_w_hat(&path, r) + log_w_split(&path, r);
        assert_eq!(log_w(&path).to_bits(), parts.to_bits(), "weight split at r = {r}");
    }

    for _ in 0..s.a1_cases {
        let x = g.gen::<f64>() * 80.0 - 40.0;
        let th = 0.1 + g.gen::<f64>() * 5.9;
        assert_eq!(density_f_theta(x, th).to_bits(), density_f_theta(-x, th).to_bits());
    }

    for case in 0..s.a1_cases {
        let mut gd = RngStream::new(902, 1).substream(case).generator();
        let a = (gd.gen::<i32>() % (1 << 21)) as f64 * quantum;
        let b = (gd.gen::<i32>() % (1 << 21)) as f64 * quantum;
        let c = (gd.gen::<i32>() % (1 << 22)) as f64 * quantum;
        let d1 = build_irw(2, a, b, &p).unwrap();
        let d2 = build_irw(2, a + c, b + c, &p).unwrap();
        let s1 = run_mcmc(&d1, 2, &mut RngStream::new(902, 2).substream(case).generator());
        let s2 = run_mcmc(&d2, 2, &mut RngStream::new(902, 2).substream(case).generator());
        let b1: Vec<u64> = s1.rel_values().iter().map(|x| x.to_bits()).collect();
        let b2: Vec<u64> = s2.rel_values().iter().map(|x| x.to_bits()).collect();
        assert_eq!(b1, b2, "translated chain diverged in anchored coordinates (c = {c})");
    }

    for case in 0..s.a1_cases {
        let mut gd = RngStream::new(902, 3).substream(case).generator();
        let a = gd.gen::<f64>() * 2.0 - 1.0;
        let b = gd.gen::<f64>() * 2.0 - 1.0;
        let template = build_irw(2, a, b, &p).unwrap();
        let mut low = template.boundary().clone();
        let mut high = template.boundary().clone();
        for (_, v) in low.iter_mut() {
            if v.is_finite() {
                *v -= 0.05 + gd.gen::<f64>();
            }
        }
        for (_, v) in high.iter_mut() {
            if v.is_finite() {
                *v += 0.05 + gd.gen::<f64>();
            }
        }
        let (lo, hi) = run_coupled_mcmc(
            &template,
            low.clone(),
            high.clone(),
            2,
            &mut RngStream::new(902, 4).substream(case).generator(),
        )
        .expect("coupled sweep must preserve vertexwise order");
        let dom_lo = template.with_boundary(low).unwrap();
        let dom_hi = template.with_boundary(high).unwrap();
        for v in dom_lo.interior() {
            assert!(
                lo.value(&dom_lo, *v) <= hi.value(&dom_hi, *v),
                "final coupled state out of order at {v:?}"
            );
        }
    }

    for case in 0..s.a1_cases {
        let mut gd = RngStream::new(902, 5).substream(case).generator();
        let z1 = gd.gen::<f64>() * 20.0 - 14.0;
        let dz = 0.1 + gd.gen::<f64>() * 6.0;
        let st = RngStream::new(902, 6).substream(case);
        let v1 = estimate_v(z1, 16, 1.0, 1.0, 512, st).unwrap().v;
        let v2 = estimate_v(z1 + dz, 16, 1.0, 1.0, 512, st).unwrap().v;
        assert!(v2 <= v1, "shared-draw estimate rose: v({z1}) = {v1} < v({}) = {v2}", z1 + dz);
    }

    let seconds = t0.elapsed().as_secs_f64();
    CriterionVerdict {
        id: "A1",
        pass: seconds < 60.0,
        detail: format!(
            "weight split, f_theta symmetry, translation equivariance, coupled order, \
             shared-draw monotonicity: {} cases each, all bit-exact",
            s.a1_cases
        ),
        seconds,
    }
}

pub fn a2_density_normalizations(profile: Profile) -> CriterionVerdict {
    let t0 = Instant::now();
    let s = scale(profile);
    let mut worst_f = 0.0f64;
    let mut worst_g = 0.0f64;
    for shape in [0.5, 1.0, 2.0, 5.0] {
        let fi = integrate(&|x| density_f_theta(x, shape), -40.0, 40.0, 1e-10);
        let gi = integrate(&|x| density_g_alpha(x, shape), -40.0, 40.0, 1e-10);
        worst_f = worst_f.max((fi - 1.0).abs());
        worst_g = worst_g.max((gi - 1.0).abs());
    }
    let t = reference_table(profile);
    let p0 = integrate(&|y| eval_p0v(y, t, 1.0), -60.0, 18.0, 1e-8);
    let from = (0.0, 0.5);
    let w = s.a2_half_width;
    let pv = integrate_2d(
        &|x2, y2| eval_pv(from, (x2, y2), t, 1.0),
        -w,
        w,
        -w + 0.5,
        w + 0.5,
        s.a2_tol_2d,
    );
    let seconds = t0.elapsed().as_secs_f64();
    let pass = worst_f <= 1e-8
        && worst_g <= 1e-8
        && (p0 - 1.0).abs() <= 0.03
        && (pv - 1.0).abs() <= 0.05
        && seconds < 300.0;
    CriterionVerdict {
        id: "A2",
        pass,
        detail: format!(
            "|∫f−1| ≤ {worst_f:.2e}, |∫g−1| ≤ {worst_g:.2e}, ∫p0 = {p0:.4}, ∬p = {pv:.4}"
        ),
        seconds,
    }
}

pub fn a3_importance_identity(profile: Profile) -> CriterionVerdict {
    let t0 = Instant::now();
    let s = scale(profile);
    let t = reference_table(profile);
    // systematic uncertainty the table contributes to the identity: its
    // pointwise stderr averaged under the entry-density mass
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..t.grid.len() {
        let w = density_g_alpha(t.grid[i], 1.0);
        num += w * t.stderr[i];
        den += w * t.v[i];
    }
    let se_table = num / den;
    let mut pass = true;
    let mut lines = Vec::new();
    for (i, r) in [1usize, 2, 4].into_iter().enumerate() {
        let w = sample_lg_prefix(r, t, 1.0, 1.0, s.a3_reps, RngStream::new(903, i as u64));
        let (mean, se_mc) = w.raw_mean;
        let se = (se_mc * se_mc + se_table * se_table).sqrt();
        let ok = (mean - 1.0).abs() <= 3.0 * se;
        pass &= ok;
        lines.push(format!("r={r}: {mean:.4}±{se:.4}"));
    }
    let seconds = t0.elapsed().as_secs_f64();
    pass &= seconds < 600.0;
    CriterionVerdict {
        id: "A3",
        pass,
        detail: format!("E[Ŵ_r·V̂] {}", lines.join(", ")),
        seconds,
    }
}

pub fn a4_nonintersection_scaling(profile: Profile) -> CriterionVerdict {
    let t0 = Instant::now();
    let s = scale(profile);
    let mut scaled = Vec::new();
    for (i, n) in [100usize, 400, 1600].into_iter().enumerate() {
        let (prob, _) =
            nonintersect_prob(n, 1.0, 0.0, 1.0, s.a4_reps, RngStream::new(904, i as u64));
        scaled.push((n as f64).sqrt() * prob);
    }
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / hi;
    let seconds = t0.elapsed().as_secs_f64();
    let pass = spread < 0.15 && seconds < 300.0;
    CriterionVerdict {
        id: "A4",
        pass,
        detail: format!("√n·P(NI) = {scaled:.4?}, spread {:.1}%", 100.0 * spread),
        seconds,
    }
}

pub fn a5_meander_endpoint(profile: Profile) -> CriterionVerdict {
    let t0 = Instant::now();
    let s = scale(profile);
    let n = 400usize;
    let root_n = (n as f64).sqrt();
    let w = soft_free_collect(
        n,
        &InitCondition::Dirac(0.0),
        &InitCondition::DensityGAlpha(1.0),
        1.0,
        s.a5_reps,
        RngStream::new(905, 0),
        move |s1, s2| (s1[n - 1] - s2[n - 1]) / root_n,
    );
    let d = EmpiricalDistribution::from_log_weighted(w.items.clone());
    let ss = sigma_sq(1.0);
    let ks = ks_vs_cdf(&d, |x| {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x * x / (2.0 * ss)).exp()
        }
    });
    let seconds = t0.elapsed().as_secs_f64();
    let pass = w.ess >= s.a5_ess_floor && ks <= 0.05 && seconds < 900.0;
    CriterionVerdict {
        id: "A5",
        pass,
        detail: format!("KS vs Rayleigh {ks:.4}, ESS {:.0}", w.ess),
        seconds,
    }
}

pub fn a6_desk_scale_convergence(profile: Profile) -> CriterionVerdict {
    let t0 = Instant::now();
    let s = scale(profile);
    let p = params();
    let t = reference_table(profile);
    let lg = sample_lg_prefix(3, t, 1.0, 1.0, s.a6_limit_reps, RngStream::new(907, 0));
    let limit_k2 = EmpiricalDistribution::from_log_weighted(
        lg.prefixes.iter().map(|(c, lw)| (c.s1up[1], *lw)).collect(),
    );
    let limit_k3 = EmpiricalDistribution::from_log_weighted(
        lg.prefixes.iter().map(|(c, lw)| (c.s1up[2], *lw)).collect(),
    );
    let mut ks2 = Vec::new();
    let mut ks3 = Vec::new();
    for (i, big_n) in [50usize, 100, 200].into_iter().enumerate() {
        let stream = RngStream::new(906, i as u64);
        let incs = par_replica_fold(
            s.a6_replicas,
            64,
            |range| {
                let mut out = Vec::with_capacity(range.clone().count());
                for rep in range {
                    let mut g = stream.substream(rep).generator();
                    let inc = simulate_increments(&p, big_n, 3, &mut g);
                    out.push((inc[1], inc[2]));
                }
                out
            },
            |mut acc: Vec<(f64, f64)>, mut part| {
                acc.append(&mut part);
                acc
            },
            Vec::new(),
        );
        let d2 = EmpiricalDistribution::from_unweighted(incs.iter().map(|x| x.0).collect());
        let d3 = EmpiricalDistribution::from_unweighted(incs.iter().map(|x| x.1).collect());
        ks2.push(ks_statistic(&d2, &limit_k2));
        ks3.push(ks_statistic(&d3, &limit_k3));
    }
    let monotone = |ks: &[f64]| ks.windows(2).all(|w| w[1] <= w[0] + s.a6_slack);
    let seconds = t0.elapsed().as_secs_f64();
    let pass = lg.ess >= s.a6_limit_ess_floor
        && monotone(&ks2)
        && monotone(&ks3)
        && ks2[2] <= 0.05
        && ks3[2] <= 0.05;
    CriterionVerdict {
        id: "A6",
        pass,
        detail: format!(
            "KS to limit chain over N∈{{50,100,200}}: k=2 {ks2:.4?}, k=3 {ks3:.4?}, \
             limit ESS {:.0}",
            lg.ess
        ),
        seconds,
    }
}

pub fn a7_stationarity(profile: Profile) -> CriterionVerdict {
    let t0 = Instant::now();
    let s = scale(profile);
    let p = params();
    let t = reference_table(profile);
    let steps = 100usize;
    let r = 2usize;
    let prefixes =
        sample_sequential_pv(steps + r + 1, t, 1.0, 1.0, s.a7_prefixes, RngStream::new(908, 0))
            .expect("sequential prefixes must sample without rejection blow-up");
    let input: Vec<f64> = prefixes.iter().map(|c| c.s1up[1]).collect();
    let stream = RngStream::new(909, 0);
    let evolved = par_replica_fold(
        prefixes.len() as u64,
        64,
        |range| {
            let mut out = Vec::with_capacity(range.clone().count());
            for rep in range {
                let mut g = stream.substream(rep).generator();
                let h = &prefixes[rep as usize].s1up;
                out.push(evolve_stationary(&p, h, steps, r, &mut g)[1]);
            }
            out
        },
        |mut acc: Vec<f64>, mut part| {
            acc.append(&mut part);
            acc
        },
        Vec::new(),
    );
    let ks = ks_statistic(
        &EmpiricalDistribution::from_unweighted(evolved),
        &EmpiricalDistribution::from_unweighted(input),
    );
    let seconds = t0.elapsed().as_secs_f64();
    let pass = ks <= 0.05 && seconds < 1800.0;
    CriterionVerdict {
        id: "A7",
        pass,
        detail: format!("increment KS after {steps} evolution steps: {ks:.4}"),
        seconds,
    }
}

pub fn a8_irw_wprw_equivalence(profile: Profile) -> CriterionVerdict {
    let t0 = Instant::now();
    let s = scale(profile);
    let p = params();
    let t = 8usize;
    let (a, b) = (0.5, -0.5);
    let run = irw_sample(
        t,
        a,
        b,
        &p,
        default_burn_in(t),
        t as u64,
        s.a8_mcmc_reps,
        s.a8_chains,
        RngStream::new(910, 0),
    )
    .expect("chains must pass split-Rhat");
    let wp = wprw_importance_sample(t, a, b, &p, s.a8_is_reps, RngStream::new(911, 0));
    let mut worst = 0.0f64;
    for i in 1..t {
        let mc1 = EmpiricalDistribution::from_unweighted(
            run.samples.iter().map(|st| st.value(&run.domain, (1, 2 * i as i64 - 1))).collect(),
        );
        let w1 = EmpiricalDistribution::from_log_weighted(
            wp.items.iter().map(|(path, lw)| (path.s1[i - 1], *lw)).collect(),
        );
        worst = worst.max(ks_statistic(&mc1, &w1));
        let mc2 = EmpiricalDistribution::from_unweighted(
            run.samples.iter().map(|st| st.value(&run.domain, (2, 2 * i as i64))).collect(),
        );
        let w2 = EmpiricalDistribution::from_log_weighted(
            wp.items.iter().map(|(path, lw)| (path.s2[i - 1], *lw)).collect(),
        );
        worst = worst.max(ks_statistic(&mc2, &w2));
    }
    let yellow = EmpiricalDistribution::from_unweighted(
        run.samples
            .iter()
            .map(|st| (st.value(&run.domain, (2, 1)) - st.value(&run.domain, (2, 2))).exp())
            .collect(),
    );
    let ks_yellow = ks_vs_cdf(&yellow, |x| gamma_cdf(p.alpha() + p.theta(), x));
    let seconds = t0.elapsed().as_secs_f64();
    let pass =
        worst <= 0.07 && ks_yellow <= 0.02 && wp.ess >= s.a8_ess_floor && seconds < 1200.0;
    CriterionVerdict {
        id: "A8",
        pass,
        detail: format!(
            "worst coordinate KS {worst:.4}, yellow-gap KS {ks_yellow:.4}, importance ESS {:.0}",
            wp.ess
        ),
        seconds,
    }
}

pub fn a9_vtable_convergence(profile: Profile) -> CriterionVerdict {
    let t0 = Instant::now();
    let t = reference_table(profile);
    let flagged = t.flags.iter().filter(|f| **f).count();
    let frac = flagged as f64 / t.flags.len() as f64;
    let positive = t.v.iter().all(|v| *v > 0.0);
    let seconds = t0.elapsed().as_secs_f64();
    let pass = frac >= 0.9 && positive && seconds < 1800.0;
    CriterionVerdict {
        id: "A9",
        pass,
        detail: format!(
            "{flagged}/{} grid points stabilization-flagged ({:.1}%), all positive: {positive}",
            t.flags.len(),
            100.0 * frac
        ),
        seconds,
    }
}

pub fn a10_polymer_oracle(_profile: Profile) -> CriterionVerdict {
    let t0 = Instant::now();
    let param_sets = [
        PolymerParams::new(1.0, 1.0).unwrap(),
        PolymerParams::new(1.0, 0.7).unwrap(),
        PolymerParams::new(0.5, 2.0).unwrap(),
        PolymerParams::new(2.0, -0.5).unwrap(),
    ];
    let mut worst = 0.0f64;
    for real in 0..100u64 {
        let big_n = 1 + (real as usize) % 5;
        let p = &param_sets[(real as usize / 5) % param_sets.len()];
        let mut g = RngStream::new(912, real).generator();
        let mut map = HashMap::new();
        disorder_sweep(big_n, |m, n| {
            map.insert((m, n), sample_log_inv_gamma(weight_shape(p, m, n), &mut g));
        });
        let z = log_partition_table(big_n, |m, n| map[&(m, n)]);
        for (&(m, n), &logz) in &z {
            let oracle = path_sum(m, n, &map).ln();
            worst = worst.max((logz - oracle).abs());
        }
    }
    let seconds = t0.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && seconds < 60.0;
    CriterionVerdict {
        id: "A10",
        pass,
        detail: format!("100 realizations, N ≤ 5, worst log-space gap {worst:.2e}"),
        seconds,
    }
}

/// All ten criteria in order.
pub fn run_all(profile: Profile) -> Vec<CriterionVerdict> {
    vec![
        a1_exact_algebra(profile),
        a2_density_normalizations(profile),
        a3_importance_identity(profile),
        a4_nonintersection_scaling(profile),
        a5_meander_endpoint(profile),
        a6_desk_scale_convergence(profile),
        a7_stationarity(profile),
        a8_irw_wprw_equivalence(profile),
        a9_vtable_convergence(profile),
        a10_polymer_oracle(profile),
    ]
}
