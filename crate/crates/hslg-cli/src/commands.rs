//! One function per subcommand. Each resolves its parameters (flag over
//! config-file entry over built-in default), materializes them into the
//! stored config, opens a run directory, computes, and closes the run with
//! CSV tables, `.dat` series, and a deterministic summary.

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use hslg_core::distributions::PolymerParams;
use hslg_core::gibbs::{default_burn_in, irw_sample, wprw_importance_sample};
use hslg_core::harness::criteria::{self, Profile};
use hslg_core::limitchain::{sample_lg_prefix, sample_sequential_pv};
use hslg_core::polymer::{evolve_stationary as evolve_increments, simulate_increments};
use hslg_core::rng::par_replica_fold;
use hslg_core::softwalks::{nonintersect_prob, sigma_sq, soft_free_collect, InitCondition};
use hslg_core::special::gamma_cdf;
use hslg_core::stats::{ks_statistic, ks_two_sample, ks_vs_cdf, EmpiricalDistribution};
use hslg_core::vfunction::{build_v_table, estimate_v as estimate_v_point};
use hslg_core::{ecdf_points, load_required_table, ExperimentConfig, PlotSpec, RunWriter};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Args, Debug)]
pub struct RunOpts {
    /// JSON config file; explicit command-line flags override its entries
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Run directory (default: $HSLG_OUTPUT_DIR/<experiment>, else runs/<experiment>)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Root seed for the run's random streams
    #[arg(long)]
    pub seed: Option<u64>,
}

fn default_output_root() -> PathBuf {
    std::env::var_os("HSLG_OUTPUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn resolve(name: &str, opts: &RunOpts) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let c = ExperimentConfig::load(path)?;
            c.require_experiment(name, path)?;
            c
        }
        None => ExperimentConfig::new(name, 0),
    };
    cfg.experiment = name.to_string();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_deref().map(PathBuf::from))
        .unwrap_or_else(|| default_output_root().join(name));
    Ok((cfg, out))
}

fn param_f64(cfg: &mut ExperimentConfig, key: &str, flag: Option<f64>, default: f64) -> f64 {
    let v = flag.or_else(|| cfg.get_f64(key)).unwrap_or(default);
    cfg.set(key, v);
    v
}

fn param_u64(cfg: &mut ExperimentConfig, key: &str, flag: Option<u64>, default: u64) -> u64 {
    let v = flag.or_else(|| cfg.get_u64(key)).unwrap_or(default);
    cfg.set(key, v);
    v
}

fn param_usize(
    cfg: &mut ExperimentConfig,
    key: &str,
    flag: Option<usize>,
    default: usize,
) -> usize {
    param_u64(cfg, key, flag.map(|v| v as u64), default as u64) as usize
}

fn param_str(
    cfg: &mut ExperimentConfig,
    key: &str,
    flag: Option<String>,
    default: &str,
) -> String {
    let v = flag
        .or_else(|| cfg.get_str(key).map(str::to_string))
        .unwrap_or_else(|| default.to_string());
    cfg.set(key, v.as_str());
    v
}

/// The table path comes from the flag or the stored config; loading failure
/// (or no path at all) is the dedicated missing-dependency error.
fn param_table(
    cfg: &mut ExperimentConfig,
    flag: Option<PathBuf>,
    theta: f64,
    alpha: f64,
) -> Result<hslg_core::vfunction::VTable> {
    let path = flag.or_else(|| cfg.get_str("vtable").map(PathBuf::from));
    let table = load_required_table(path.as_deref())?;
    cfg.set("vtable", path.unwrap().display().to_string());
    ensure!(
        (table.theta - theta).abs() < 1e-12 && (table.alpha - alpha).abs() < 1e-12,
        "V table was built for θ = {}, α = {} but this run uses θ = {theta}, α = {alpha}",
        table.theta,
        table.alpha
    );
    Ok(table)
}

fn plot(file: &str, x: &str, y: &str, title: &str) -> PlotSpec {
    PlotSpec {
        file: file.to_string(),
        x_label: x.to_string(),
        y_label: y.to_string(),
        title: title.to_string(),
    }
}

fn mean_and_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad {what} entry {s:?}")))
        .collect()
}

pub fn polymer_increments(
    run: &RunOpts,
    big_n: Option<usize>,
    r: Option<usize>,
    theta: Option<f64>,
    alpha: Option<f64>,
    reps: Option<u64>,
) -> Result<i32> {
    let (mut cfg, out) = resolve("polymer-increments", run)?;
    let big_n = param_usize(&mut cfg, "big_n", big_n, 100);
    let r = param_usize(&mut cfg, "r", r, 3);
    let theta = param_f64(&mut cfg, "theta", theta, 1.0);
    let alpha = param_f64(&mut cfg, "alpha", alpha, 1.0);
    let reps = param_u64(&mut cfg, "reps", reps, 2000);
    ensure!(r >= 1 && r <= big_n, "need 1 ≤ r ≤ N");
    ensure!(reps >= 2, "need at least 2 replicas");
    let p = PolymerParams::new(theta, alpha)?;
    let mut w = RunWriter::create(&out, &cfg)?;

    let incs = par_replica_fold(
        reps,
        64,
        |range| {
            let mut block = Vec::with_capacity(range.clone().count());
            for rep in range {
                let mut g = cfg.stream(rep).generator();
                block.push(simulate_increments(&p, big_n, r, &mut g));
            }
            block
        },
        |mut acc: Vec<Vec<f64>>, mut part| {
            acc.append(&mut part);
            acc
        },
        Vec::new(),
    );

    let rows = incs.iter().enumerate().flat_map(|(rep, v)| {
        v.iter().enumerate().map(move |(k, x)| format!("{rep},{},{x}", k + 1)).collect::<Vec<_>>()
    });
    w.write_csv("increments.csv", "replica,k,increment", rows)?;
    let col = r.min(2) - 1;
    let d = EmpiricalDistribution::from_unweighted(incs.iter().map(|v| v[col]).collect());
    w.write_series("ecdf_increment.dat", &ecdf_points(&d))?;
    w.write_plots(&[plot(
        "ecdf_increment.dat",
        "increment",
        "F",
        &format!("free-energy increment k = {} at N = {big_n}", col + 1),
    )])?;
    let stats: Vec<_> = (0..r)
        .map(|k| {
            let (m, sd) = mean_and_sd(&incs.iter().map(|v| v[k]).collect::<Vec<_>>());
            json!({"k": k + 1, "mean": m, "stddev": sd})
        })
        .collect();
    w.finish(reps, json!({"increments": stats, "ecdf_coordinate": col + 1}))?;
    println!(
        "polymer-increments: {reps} realizations at N = {big_n}, r = {r} → {}",
        out.display()
    );
    Ok(0)
}

pub fn evolve_stationary(
    run: &RunOpts,
    vtable: Option<PathBuf>,
    steps: Option<usize>,
    r: Option<usize>,
    theta: Option<f64>,
    alpha: Option<f64>,
    reps: Option<u64>,
) -> Result<i32> {
    let (mut cfg, out) = resolve("evolve-stationary", run)?;
    let steps = param_usize(&mut cfg, "steps", steps, 50);
    let r = param_usize(&mut cfg, "r", r, 2);
    let theta = param_f64(&mut cfg, "theta", theta, 1.0);
    let alpha = param_f64(&mut cfg, "alpha", alpha, 1.0);
    let reps = param_u64(&mut cfg, "reps", reps, 2000);
    ensure!(r >= 2, "need r ≥ 2 so there is an increment to compare");
    let table = param_table(&mut cfg, vtable, theta, alpha)?;
    let p = PolymerParams::new(theta, alpha)?;
    let mut w = RunWriter::create(&out, &cfg)?;

    let prefixes = sample_sequential_pv(steps + r + 1, &table, theta, alpha, reps, cfg.stream(0))?;
    let input: Vec<f64> = prefixes.iter().map(|c| c.s1up[1]).collect();
    let evolved = par_replica_fold(
        prefixes.len() as u64,
        64,
        |range| {
            let mut block = Vec::with_capacity(range.clone().count());
            for rep in range {
                let mut g = cfg.stream(1).substream(rep).generator();
                block.push(evolve_increments(&p, &prefixes[rep as usize].s1up, steps, r, &mut g)[1]);
            }
            block
        },
        |mut acc: Vec<f64>, mut part| {
            acc.append(&mut part);
            acc
        },
        Vec::new(),
    );

    let rows = input
        .iter()
        .zip(&evolved)
        .enumerate()
        .map(|(rep, (i, e))| format!("{rep},{i},{e}"));
    w.write_csv("stationarity.csv", "replica,input_increment,evolved_increment", rows)?;
    let d_in = EmpiricalDistribution::from_unweighted(input.clone());
    let d_out = EmpiricalDistribution::from_unweighted(evolved.clone());
    let ks = ks_statistic(&d_out, &d_in);
    w.write_series("ecdf_input.dat", &ecdf_points(&d_in))?;
    w.write_series("ecdf_evolved.dat", &ecdf_points(&d_out))?;
    w.write_plots(&[
        plot("ecdf_input.dat", "increment", "F", "stationary increment before evolution"),
        plot("ecdf_evolved.dat", "increment", "F", &format!("increment after {steps} steps")),
    ])?;
    w.finish(
        reps,
        json!({"steps": steps, "r": r, "ks": ks, "stationary_at_5pct": ks <= 0.05}),
    )?;
    println!(
        "evolve-stationary: increment KS after {steps} steps = {ks:.4} → {}",
        out.display()
    );
    Ok(0)
}

pub fn estimate_v(
    run: &RunOpts,
    z: Option<f64>,
    n: Option<usize>,
    theta: Option<f64>,
    alpha: Option<f64>,
    reps: Option<u64>,
) -> Result<i32> {
    let (mut cfg, out) = resolve("estimate-v", run)?;
    let z = param_f64(&mut cfg, "z", z, 0.0);
    let n = param_usize(&mut cfg, "n", n, 512);
    let theta = param_f64(&mut cfg, "theta", theta, 1.0);
    let alpha = param_f64(&mut cfg, "alpha", alpha, 1.0);
    let reps = param_u64(&mut cfg, "reps", reps, 200_000);
    let mut w = RunWriter::create(&out, &cfg)?;
    let est = estimate_v_point(z, n, theta, alpha, reps, cfg.stream(0))?;
    w.write_csv(
        "estimate.csv",
        "z,n,reps,v,stderr",
        vec![format!("{z},{n},{reps},{},{}", est.v, est.stderr)],
    )?;
    w.write_series("vhat.dat", &[(z, est.v)])?;
    w.write_plots(&[plot("vhat.dat", "z", "V(z)", "single-point V estimate")])?;
    w.finish(reps, json!({"v": est.v, "stderr": est.stderr}))?;
    println!(
        "estimate-v: V({z}) ≈ {:.6} ± {:.6} at n = {n} → {}",
        est.v,
        est.stderr,
        out.display()
    );
    Ok(0)
}

pub fn build_vtable(
    run: &RunOpts,
    grid_min: Option<f64>,
    grid_max: Option<f64>,
    grid_step: Option<f64>,
    schedule: Option<String>,
    theta: Option<f64>,
    alpha: Option<f64>,
    reps: Option<u64>,
) -> Result<i32> {
    let (mut cfg, out) = resolve("build-vtable", run)?;
    let grid_min = param_f64(&mut cfg, "grid_min", grid_min, -8.0);
    let grid_max = param_f64(&mut cfg, "grid_max", grid_max, 12.0);
    let grid_step = param_f64(&mut cfg, "grid_step", grid_step, 0.25);
    let schedule_text = param_str(&mut cfg, "schedule", schedule, "64,128,256,512");
    let theta = param_f64(&mut cfg, "theta", theta, 1.0);
    let alpha = param_f64(&mut cfg, "alpha", alpha, 1.0);
    let reps = param_u64(&mut cfg, "reps", reps, 200_000);
    ensure!(grid_step > 0.0 && grid_max > grid_min, "need grid_min < grid_max and grid_step > 0");
    let count = ((grid_max - grid_min) / grid_step).round() as usize + 1;
    ensure!(count <= 4096, "grid of {count} points is too fine");
    let grid: Vec<f64> = (0..count).map(|i| grid_min + i as f64 * grid_step).collect();
    let schedule = parse_usize_list(&schedule_text, "schedule")?;

    let mut w = RunWriter::create(&out, &cfg)?;
    let table = build_v_table(&grid, &schedule, theta, alpha, reps, cfg.stream(0))?;
    w.write_json("vtable.json", &table)?;
    let rows = (0..table.grid.len()).map(|i| {
        format!(
            "{},{},{},{}",
            table.grid[i],
            table.v[i],
            table.stderr[i],
            u8::from(table.flags[i])
        )
    });
    w.write_csv("vtable.csv", "z,v,stderr,stabilized", rows)?;
    let pts: Vec<(f64, f64)> = table.grid.iter().copied().zip(table.v.iter().copied()).collect();
    w.write_series("vtable.dat", &pts)?;
    w.write_plots(&[plot("vtable.dat", "z", "V(z)", "boundary correction on the grid")])?;
    let flagged = table.flags.iter().filter(|f| **f).count();
    w.finish(
        reps,
        json!({
            "artifact": "vtable.json",
            "grid_points": table.grid.len(),
            "n_used": table.n_used,
            "stabilized_fraction": flagged as f64 / table.flags.len() as f64,
            "all_positive": table.v.iter().all(|v| *v > 0.0),
        }),
    )?;
    println!(
        "build-vtable: {} points, schedule {:?}, {flagged} stabilized → {}/vtable.json",
        table.grid.len(),
        schedule,
        out.display()
    );
    Ok(0)
}

pub fn limit_chain(
    run: &RunOpts,
    vtable: Option<PathBuf>,
    r: Option<usize>,
    sampler: Option<String>,
    theta: Option<f64>,
    alpha: Option<f64>,
    reps: Option<u64>,
) -> Result<i32> {
    let (mut cfg, out) = resolve("limit-chain", run)?;
    let r = param_usize(&mut cfg, "r", r, 4);
    let sampler = param_str(&mut cfg, "sampler", sampler, "sequential");
    let theta = param_f64(&mut cfg, "theta", theta, 1.0);
    let alpha = param_f64(&mut cfg, "alpha", alpha, 1.0);
    let reps = param_u64(&mut cfg, "reps", reps, 100_000);
    let table = param_table(&mut cfg, vtable, theta, alpha)?;
    let mut w = RunWriter::create(&out, &cfg)?;

    let (chains, summary): (Vec<(hslg_core::limitchain::ChainPrefix, f64)>, _) =
        match sampler.as_str() {
            "sequential" => {
                let prefixes = sample_sequential_pv(r, &table, theta, alpha, reps, cfg.stream(0))?;
                let n = prefixes.len() as u64;
                (
                    prefixes.into_iter().map(|c| (c, 0.0)).collect(),
                    json!({"sampler": "sequential", "r": r, "replicas": n}),
                )
            }
            "lg" => {
                let wp = sample_lg_prefix(r, &table, theta, alpha, reps, cfg.stream(0));
                let summary = json!({
                    "sampler": "lg",
                    "r": r,
                    "ess": wp.ess,
                    "low_ess": wp.low_ess,
                    "raw_mean": wp.raw_mean.0,
                    "raw_mean_stderr": wp.raw_mean.1,
                });
                (wp.prefixes, summary)
            }
            other => bail!("sampler must be `sequential` or `lg`, got {other:?}"),
        };

    let rows = chains.iter().enumerate().flat_map(|(rep, (c, lw))| {
        (0..c.s1up.len())
            .map(move |k| format!("{rep},{},{},{},{lw}", k + 1, c.s1up[k], c.s2up[k]))
            .collect::<Vec<_>>()
    });
    w.write_csv("chain.csv", "replica,k,s1up,s2up,log_weight", rows)?;
    let last = EmpiricalDistribution::from_log_weighted(
        chains.iter().map(|(c, lw)| (c.s1up[r - 1], *lw)).collect(),
    );
    w.write_series("ecdf_s1_last.dat", &ecdf_points(&last))?;
    w.write_plots(&[plot(
        "ecdf_s1_last.dat",
        "S1_up(r)",
        "F",
        &format!("top-layer value at slot r = {r}"),
    )])?;
    w.finish(reps, summary)?;
    println!(
        "limit-chain: {} prefixes of length {r} via {sampler} → {}",
        chains.len(),
        out.display()
    );
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn gibbs_sample(
    run: &RunOpts,
    t: Option<usize>,
    a: Option<f64>,
    b: Option<f64>,
    theta: Option<f64>,
    alpha: Option<f64>,
    burn_in: Option<u64>,
    thin: Option<u64>,
    reps: Option<u64>,
    chains: Option<usize>,
) -> Result<i32> {
    let (mut cfg, out) = resolve("gibbs-sample", run)?;
    let t = param_usize(&mut cfg, "t", t, 6);
    let a = param_f64(&mut cfg, "a", a, 0.5);
    let b = param_f64(&mut cfg, "b", b, -0.5);
    let theta = param_f64(&mut cfg, "theta", theta, 1.0);
    let alpha = param_f64(&mut cfg, "alpha", alpha, 1.0);
    let burn_in = param_u64(&mut cfg, "burn_in", burn_in, default_burn_in(t));
    let thin = param_u64(&mut cfg, "thin", thin, t as u64);
    let reps = param_u64(&mut cfg, "reps", reps, 20_000);
    let chains = param_usize(&mut cfg, "chains", chains, 8);
    let p = PolymerParams::new(theta, alpha)?;
    let mut w = RunWriter::create(&out, &cfg)?;

    let run_out = irw_sample(t, a, b, &p, burn_in, thin, reps, chains, cfg.stream(0))?;
    let names: Vec<String> =
        run_out.domain.interior().iter().map(|(i, j)| format!("v{i}_{j}")).collect();
    let header = format!("sample,{}", names.join(","));
    let rows = run_out.samples.iter().enumerate().map(|(idx, st)| {
        let vals: Vec<String> = run_out
            .domain
            .interior()
            .iter()
            .map(|v| format!("{}", st.value(&run_out.domain, *v)))
            .collect();
        format!("{idx},{}", vals.join(","))
    });
    w.write_csv("gibbs.csv", &header, rows)?;
    let first = *run_out.domain.interior().first().context("domain has no interior")?;
    let d = EmpiricalDistribution::from_unweighted(
        run_out.samples.iter().map(|st| st.value(&run_out.domain, first)).collect(),
    );
    w.write_series("ecdf_first_vertex.dat", &ecdf_points(&d))?;
    w.write_plots(&[plot(
        "ecdf_first_vertex.dat",
        &format!("v{}_{}", first.0, first.1),
        "F",
        "first interior vertex under the Gibbs measure",
    )])?;
    let worst_rhat = run_out.rhat.iter().map(|(_, r)| *r).fold(0.0f64, f64::max);
    let rhat: Vec<_> = run_out
        .rhat
        .iter()
        .map(|((i, j), r)| json!({"vertex": format!("v{i}_{j}"), "rhat": r}))
        .collect();
    w.finish(
        run_out.samples.len() as u64,
        json!({
            "t": t, "a": a, "b": b,
            "chains": run_out.chains,
            "per_chain": run_out.per_chain,
            "worst_rhat": worst_rhat,
            "rhat": rhat,
        }),
    )?;
    println!(
        "gibbs-sample: {} samples over {} chains, worst split-Rhat {worst_rhat:.4} → {}",
        run_out.samples.len(),
        run_out.chains,
        out.display()
    );
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
pub fn irw_vs_wprw(
    run: &RunOpts,
    t: Option<usize>,
    a: Option<f64>,
    b: Option<f64>,
    theta: Option<f64>,
    alpha: Option<f64>,
    mcmc_reps: Option<u64>,
    chains: Option<usize>,
    burn_in: Option<u64>,
    thin: Option<u64>,
    is_reps: Option<u64>,
    level: Option<f64>,
) -> Result<i32> {
    let (mut cfg, out) = resolve("irw-vs-wprw", run)?;
    let t = param_usize(&mut cfg, "t", t, 8);
    let a = param_f64(&mut cfg, "a", a, 0.5);
    let b = param_f64(&mut cfg, "b", b, -0.5);
    let theta = param_f64(&mut cfg, "theta", theta, 1.0);
    let alpha = param_f64(&mut cfg, "alpha", alpha, 1.0);
    let mcmc_reps = param_u64(&mut cfg, "mcmc_reps", mcmc_reps, 20_000);
    let chains = param_usize(&mut cfg, "chains", chains, 8);
    let burn_in = param_u64(&mut cfg, "burn_in", burn_in, default_burn_in(t));
    let thin = param_u64(&mut cfg, "thin", thin, t as u64);
    let is_reps = param_u64(&mut cfg, "is_reps", is_reps, 200_000);
    let level = param_f64(&mut cfg, "level", level, 0.05);
    ensure!(t >= 2, "need a window of at least two slots");
    let p = PolymerParams::new(theta, alpha)?;
    let mut w = RunWriter::create(&out, &cfg)?;

    let mc = irw_sample(t, a, b, &p, burn_in, thin, mcmc_reps, chains, cfg.stream(0))?;
    let wp = wprw_importance_sample(t, a, b, &p, is_reps, cfg.stream(1));

    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut all_pass = true;
    for i in 1..t {
        for (layer, vertex, value) in [
            (1i64, (1i64, 2 * i as i64 - 1), i - 1),
            (2i64, (2i64, 2 * i as i64), i - 1),
        ] {
            let mc_d = EmpiricalDistribution::from_unweighted(
                mc.samples.iter().map(|st| st.value(&mc.domain, vertex)).collect(),
            );
            let is_d = EmpiricalDistribution::from_log_weighted(
                wp.items
                    .iter()
                    .map(|(path, lw)| {
                        (if layer == 1 { path.s1[value] } else { path.s2[value] }, *lw)
                    })
                    .collect(),
            );
            let o = ks_two_sample(&mc_d, &is_d, level);
            worst = worst.max(o.statistic);
            all_pass &= o.pass;
            rows.push(format!(
                "{layer},{},{},{},{}",
                i,
                o.statistic,
                o.critical,
                u8::from(o.pass)
            ));
        }
    }
    w.write_csv("comparisons.csv", "layer,slot,ks,critical,pass", rows)?;

    let yellow = EmpiricalDistribution::from_unweighted(
        mc.samples
            .iter()
            .map(|st| (st.value(&mc.domain, (2, 1)) - st.value(&mc.domain, (2, 2))).exp())
            .collect(),
    );
    let yellow_ks = ks_vs_cdf(&yellow, |x| gamma_cdf(alpha + theta, x));

    let first = (1i64, 1i64);
    let mc_first = EmpiricalDistribution::from_unweighted(
        mc.samples.iter().map(|st| st.value(&mc.domain, first)).collect(),
    );
    let is_first = EmpiricalDistribution::from_log_weighted(
        wp.items.iter().map(|(path, lw)| (path.s1[0], *lw)).collect(),
    );
    w.write_series("ecdf_mcmc_v1_1.dat", &ecdf_points(&mc_first))?;
    w.write_series("ecdf_importance_v1_1.dat", &ecdf_points(&is_first))?;
    w.write_plots(&[
        plot("ecdf_mcmc_v1_1.dat", "v1_1", "F", "heat-bath marginal at the first slot"),
        plot("ecdf_importance_v1_1.dat", "v1_1", "F", "importance-sampling marginal at the first slot"),
    ])?;
    w.finish(
        mcmc_reps + is_reps,
        json!({
            "worst_ks": worst,
            "all_coordinates_pass": all_pass,
            "yellow_gap_ks": yellow_ks,
            "importance_ess": wp.ess,
            "level": level,
        }),
    )?;
    println!(
        "irw-vs-wprw: worst coordinate KS {worst:.4} ({}), yellow-gap KS {yellow_ks:.4} → {}",
        if all_pass { "all pass" } else { "mismatch" },
        out.display()
    );
    Ok(0)
}

pub fn meander_check(
    run: &RunOpts,
    n: Option<usize>,
    theta: Option<f64>,
    alpha: Option<f64>,
    reps: Option<u64>,
) -> Result<i32> {
    let (mut cfg, out) = resolve("meander-check", run)?;
    let n = param_usize(&mut cfg, "n", n, 400);
    let theta = param_f64(&mut cfg, "theta", theta, 1.0);
    let alpha = param_f64(&mut cfg, "alpha", alpha, 1.0);
    let reps = param_u64(&mut cfg, "reps", reps, 200_000);
    ensure!(n >= 2, "need n ≥ 2");
    let mut w = RunWriter::create(&out, &cfg)?;

    let root_n = (n as f64).sqrt();
    let wv = soft_free_collect(
        n,
        &InitCondition::Dirac(0.0),
        &InitCondition::DensityGAlpha(alpha),
        theta,
        reps,
        cfg.stream(0),
        move |s1, s2| (s1[n - 1] - s2[n - 1]) / root_n,
    );
    let d = EmpiricalDistribution::from_log_weighted(wv.items.clone());
    let ss = sigma_sq(theta);
    let rayleigh = move |x: f64| {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x * x / (2.0 * ss)).exp()
        }
    };
    let ks = ks_vs_cdf(&d, rayleigh);

    let rows = wv.items.iter().map(|(x, lw)| format!("{x},{lw}"));
    w.write_csv("endpoint.csv", "value,log_weight", rows)?;
    w.write_series("ecdf_endpoint.dat", &ecdf_points(&d))?;
    let hi = 5.0 * ss.sqrt();
    let reference: Vec<(f64, f64)> =
        (0..=200).map(|i| i as f64 * hi / 200.0).map(|x| (x, rayleigh(x))).collect();
    w.write_series("rayleigh_cdf.dat", &reference)?;
    w.write_plots(&[
        plot("ecdf_endpoint.dat", "gap/√n", "F", "scaled endpoint gap under the soft measure"),
        plot("rayleigh_cdf.dat", "gap/√n", "F", "Rayleigh reference CDF"),
    ])?;
    w.finish(
        reps,
        json!({"n": n, "ks": ks, "ess": wv.ess, "sigma_sq": ss, "pass_at_5pct": ks <= 0.05}),
    )?;
    println!(
        "meander-check: KS vs Rayleigh {ks:.4}, ESS {:.0} → {}",
        wv.ess,
        out.display()
    );
    Ok(0)
}

pub fn ni_scaling(
    run: &RunOpts,
    sizes: Option<String>,
    a1: Option<f64>,
    a2: Option<f64>,
    theta: Option<f64>,
    reps: Option<u64>,
) -> Result<i32> {
    let (mut cfg, out) = resolve("ni-scaling", run)?;
    let sizes_text = param_str(&mut cfg, "sizes", sizes, "100,400,1600");
    let a1 = param_f64(&mut cfg, "a1", a1, 1.0);
    let a2 = param_f64(&mut cfg, "a2", a2, 0.0);
    let theta = param_f64(&mut cfg, "theta", theta, 1.0);
    let reps = param_u64(&mut cfg, "reps", reps, 50_000);
    let sizes = parse_usize_list(&sizes_text, "sizes")?;
    ensure!(!sizes.is_empty() && sizes.iter().all(|n| *n >= 2), "sizes must all be ≥ 2");
    let mut w = RunWriter::create(&out, &cfg)?;

    let mut rows = Vec::new();
    let mut scaled_pts = Vec::new();
    for (i, n) in sizes.iter().enumerate() {
        let (prob, se) = nonintersect_prob(*n, a1, a2, theta, reps, cfg.stream(i as u64));
        let scaled = (*n as f64).sqrt() * prob;
        rows.push(format!("{n},{prob},{se},{scaled}"));
        scaled_pts.push((*n as f64, scaled));
    }
    w.write_csv("scaling.csv", "n,prob,stderr,scaled_prob", rows)?;
    w.write_series("scaled.dat", &scaled_pts)?;
    w.write_plots(&[plot("scaled.dat", "n", "sqrt(n)·P(NI)", "non-intersection scaling")])?;
    let lo = scaled_pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = scaled_pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / hi;
    w.finish(
        reps * sizes.len() as u64,
        json!({
            "sizes": sizes,
            "scaled": scaled_pts.iter().map(|p| p.1).collect::<Vec<_>>(),
            "spread": spread,
        }),
    )?;
    println!(
        "ni-scaling: √n·P over {sizes:?} spreads {:.1}% → {}",
        100.0 * spread,
        out.display()
    );
    Ok(0)
}

fn read_csv_column(
    path: &Path,
    column: &str,
    weight_column: Option<&str>,
) -> Result<EmpiricalDistribution> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().with_context(|| format!("{} is empty", path.display()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .with_context(|| format!("{} has no column {name:?}", path.display()))
    };
    let vi = find(column)?;
    let wi = weight_column.map(find).transpose()?;
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |idx: usize| {
            fields
                .get(idx)
                .with_context(|| format!("{} line {}: too few fields", path.display(), lineno + 2))?
                .trim()
                .parse::<f64>()
                .with_context(|| format!("{} line {}: bad number", path.display(), lineno + 2))
        };
        let v = parse(vi)?;
        let lw = match wi {
            Some(idx) => parse(idx)?,
            None => 0.0,
        };
        values.push((v, lw));
    }
    ensure!(values.len() >= 2, "{} has fewer than 2 data rows", path.display());
    Ok(match wi {
        Some(_) => EmpiricalDistribution::from_log_weighted(values),
        None => EmpiricalDistribution::from_unweighted(values.into_iter().map(|p| p.0).collect()),
    })
}

pub fn ks_compare(
    run: &RunOpts,
    file_a: Option<PathBuf>,
    file_b: Option<PathBuf>,
    column: Option<String>,
    weight_column: Option<String>,
    level: Option<f64>,
) -> Result<i32> {
    let (mut cfg, out) = resolve("ks-compare", run)?;
    let file_a = file_a
        .or_else(|| cfg.get_str("file_a").map(PathBuf::from))
        .context("ks-compare needs FILE_A (argument or config entry)")?;
    let file_b = file_b
        .or_else(|| cfg.get_str("file_b").map(PathBuf::from))
        .context("ks-compare needs FILE_B (argument or config entry)")?;
    cfg.set("file_a", file_a.display().to_string());
    cfg.set("file_b", file_b.display().to_string());
    let column = param_str(&mut cfg, "column", column, "value");
    let weight_column = weight_column.or_else(|| cfg.get_str("weight_column").map(str::to_string));
    if let Some(wc) = &weight_column {
        cfg.set("weight_column", wc.as_str());
    }
    let level = param_f64(&mut cfg, "level", level, 0.05);

    let da = read_csv_column(&file_a, &column, weight_column.as_deref())?;
    let db = read_csv_column(&file_b, &column, weight_column.as_deref())?;
    let o = ks_two_sample(&da, &db, level);

    let mut w = RunWriter::create(&out, &cfg)?;
    w.write_csv(
        "result.csv",
        "statistic,critical,pass,ess_a,ess_b",
        vec![format!(
            "{},{},{},{},{}",
            o.statistic,
            o.critical,
            u8::from(o.pass),
            o.ess_a,
            o.ess_b
        )],
    )?;
    w.write_series("ecdf_a.dat", &ecdf_points(&da))?;
    w.write_series("ecdf_b.dat", &ecdf_points(&db))?;
    w.write_plots(&[
        plot("ecdf_a.dat", &column, "F", &format!("{}", file_a.display())),
        plot("ecdf_b.dat", &column, "F", &format!("{}", file_b.display())),
    ])?;
    let replicas = (da.values().len() + db.values().len()) as u64;
    w.finish(
        replicas,
        json!({
            "statistic": o.statistic,
            "critical": o.critical,
            "pass": o.pass,
            "ess_a": o.ess_a,
            "ess_b": o.ess_b,
            "level": level,
        }),
    )?;
    println!(
        "ks-compare: statistic {:.6} vs critical {:.6} → {} ({})",
        o.statistic,
        o.critical,
        if o.pass { "pass" } else { "mismatch" },
        out.display()
    );
    Ok(0)
}

pub fn verify_all(run: &RunOpts, profile: Option<String>) -> Result<i32> {
    let (mut cfg, out) = resolve("verify-all", run)?;
    let profile_name = param_str(&mut cfg, "profile", profile, "quick");
    let profile = match profile_name.as_str() {
        "quick" => Profile::Quick,
        "full" => Profile::Full,
        other => bail!("profile must be `quick` or `full`, got {other:?}"),
    };
    let mut w = RunWriter::create(&out, &cfg)?;

    let verdicts = criteria::run_all(profile);
    println!("acceptance criteria at profile `{profile_name}`:");
    for v in &verdicts {
        println!(
            "  {:<4} {:<4} {} ({:.1}s)",
            v.id,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            v.seconds
        );
    }
    let rows = verdicts.iter().map(|v| {
        format!("{},{},\"{}\"", v.id, u8::from(v.pass), v.detail.replace('"', "\"\""))
    });
    w.write_csv("verdicts.csv", "id,pass,detail", rows)?;
    let pts: Vec<(f64, f64)> = verdicts
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 + 1.0, f64::from(u8::from(v.pass))))
        .collect();
    w.write_series("verdicts.dat", &pts)?;
    w.write_plots(&[plot("verdicts.dat", "criterion index", "pass", "acceptance verdicts")])?;
    let all_pass = verdicts.iter().all(|v| v.pass);
    w.finish(
        verdicts.len() as u64,
        json!({
            "profile": profile_name,
            "all_pass": all_pass,
            "verdicts": verdicts
                .iter()
                .map(|v| json!({"id": v.id, "pass": v.pass, "detail": v.detail}))
                .collect::<Vec<_>>(),
        }),
    )?;
    println!(
        "verify-all: {} → {}",
        if all_pass { "all criteria pass" } else { "FAILURES present" },
        out.display()
    );
    Ok(if all_pass { 0 } else { 1 })
}
