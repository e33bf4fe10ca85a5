//! The six subcommands: simulate, fit, mcem, waic, mlsurface, map.
//!
//! Every subcommand resolves its output directory (from `--out` or the
//! `BILASSO_OUTPUT_ROOT` environment variable), runs deterministically from
//! its seed, and leaves exactly one `manifest.json` behind. Flag values
//! override an optional TOML config file; the merged configuration is what
//! the manifest records.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use bilasso::gibbs::{posterior_summary, run_chain, GibbsConfig, LambdaMode};
use bilasso::map_solver::{
    objective, solve_map, verify_map_equivalence, MapConfig, PenaltyWeights,
};
use bilasso::mcem::{run_mcem, McemConfig, McemStatus};
use bilasso::rng::SeededStream;
use bilasso::selection::{
    ml_surface, waic_grid_search, BoundaryFlag, LambdaGrid, WaicTable,
};
use bilasso::sim::{simulate, SimConfig};
use bilasso::{Dataset, GroupStructure, ModelState, PriorConfig};

use crate::io;
use crate::manifest::ManifestBuilder;
use crate::svg;

pub const OUTPUT_ROOT_ENV: &str = "BILASSO_OUTPUT_ROOT";

// ---------------------------------------------------------------------------
// shared plumbing

fn resolve_out(out: &Option<PathBuf>, subcommand: &str) -> Result<PathBuf> {
    let dir = match out {
        Some(p) => p.clone(),
        None => match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(subcommand),
            None => bail!("provide --out or set {OUTPUT_ROOT_ENV}"),
        },
    };
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn init_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

/// Optional TOML config file; flags override its values.
struct FileConfig(Option<toml::Table>);

impl FileConfig {
    fn load(path: &Option<PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self(None)),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                Ok(Self(Some(text.parse::<toml::Table>()?)))
            }
        }
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.0.as_ref()?.get(key)?.as_float().or_else(|| {
            self.0
                .as_ref()
                .unwrap()
                .get(key)
                .unwrap()
                .as_integer()
                .map(|v| v as f64)
        })
    }

    fn usize(&self, key: &str) -> Option<usize> {
        self.0
            .as_ref()?
            .get(key)?
            .as_integer()
            .and_then(|v| usize::try_from(v).ok())
    }
}

fn merge_f64(flag: Option<f64>, cfg: &FileConfig, key: &str, default: f64) -> f64 {
    flag.or_else(|| cfg.f64(key)).unwrap_or(default)
}

fn merge_usize(flag: Option<usize>, cfg: &FileConfig, key: &str, default: usize) -> usize {
    flag.or_else(|| cfg.usize(key)).unwrap_or(default)
}

fn load_inputs(
    x: &Path,
    y: &Path,
    groups: &Path,
    manifest: &mut ManifestBuilder,
) -> Result<(Dataset, GroupStructure)> {
    manifest.checksum_input(x)?;
    manifest.checksum_input(y)?;
    manifest.checksum_input(groups)?;
    let xm = io::read_matrix_csv(x)?;
    let ym = io::read_matrix_csv(y)?;
    let g = io::read_groups_csv(groups)?;
    let data = Dataset::new_relaxed(xm, ym)?;
    if data.d() != g.num_snps() {
        bail!(
            "X has {} columns but the groups file covers {} SNPs",
            data.d(),
            g.num_snps()
        );
    }
    Ok((data, g))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in a.iter().zip(b) {
        sxy += (x - ma) * (y - mb);
        sxx += (x - ma) * (x - ma);
        syy += (y - mb) * (y - mb);
    }
    sxy / (sxx * syy).sqrt()
}

fn grid_from_flags(
    min: f64,
    max: f64,
    points: usize,
    lambda1: &Option<String>,
    lambda2: &Option<String>,
) -> Result<LambdaGrid> {
    let parse_list = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("{e}: {v}")))
            .collect()
    };
    match (lambda1, lambda2) {
        (None, None) => Ok(LambdaGrid::log_spaced(min, max, points)?),
        (Some(l1), Some(l2)) => Ok(LambdaGrid::new(parse_list(l1)?, parse_list(l2)?)?),
        _ => bail!("--lambda1-grid and --lambda2-grid must be given together"),
    }
}

fn prior_from(cfg: &FileConfig) -> PriorConfig {
    let d = PriorConfig::default();
    PriorConfig {
        a_sigma: merge_f64(None, cfg, "a_sigma", d.a_sigma),
        b_sigma: merge_f64(None, cfg, "b_sigma", d.b_sigma),
        r1: merge_f64(None, cfg, "r1", d.r1),
        delta1: merge_f64(None, cfg, "delta1", d.delta1),
        r2: merge_f64(None, cfg, "r2", d.r2),
        delta2: merge_f64(None, cfg, "delta2", d.delta2),
    }
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of subjects.
    #[arg(long)]
    n: Option<usize>,
    /// Number of SNPs.
    #[arg(long)]
    d: Option<usize>,
    /// Number of equal-sized gene groups; must divide d.
    #[arg(long = "K")]
    num_groups: Option<usize>,
    /// Number of imaging phenotypes.
    #[arg(long)]
    c: Option<usize>,
    #[arg(long = "lambda1-sq")]
    lambda1_sq: Option<f64>,
    #[arg(long = "lambda2-sq")]
    lambda2_sq: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    seed: u64,
    /// Output directory (default: $BILASSO_OUTPUT_ROOT/simulate).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = FileConfig::load(&args.config)?;
    let sim = SimConfig {
        n: merge_usize(args.n, &cfg, "n", 500),
        d: merge_usize(args.d, &cfg, "d", 200),
        num_groups: merge_usize(args.num_groups, &cfg, "K", 20),
        c: merge_usize(args.c, &cfg, "c", 5),
        lambda1_sq: merge_f64(args.lambda1_sq, &cfg, "lambda1_sq", 2.0),
        lambda2_sq: merge_f64(args.lambda2_sq, &cfg, "lambda2_sq", 2.0),
        sigma2: merge_f64(args.sigma2, &cfg, "sigma2", 2.0),
        seed: args.seed,
    };
    let out = resolve_out(&args.out, "simulate")?;
    let manifest = ManifestBuilder::new(
        "simulate",
        json!({
            "n": sim.n, "d": sim.d, "K": sim.num_groups, "c": sim.c,
            "lambda1_sq": sim.lambda1_sq, "lambda2_sq": sim.lambda2_sq,
            "sigma2": sim.sigma2,
        }),
        Some(args.seed),
    );

    let result = simulate(&sim)?;
    io::write_matrix_csv(&out.join("X.csv"), &result.data.x().to_owned(), "snp_")?;
    io::write_matrix_csv(&out.join("Y.csv"), &result.data.y().to_owned(), "pheno_")?;
    io::write_groups_csv(&out.join("groups.csv"), &result.groups)?;
    io::write_matrix_csv(&out.join("W_true.csv"), &result.w_true, "pheno_")?;

    let scales = out.join("scales.csv");
    let mut w = csv::Writer::from_path(&scales)?;
    w.write_record(["snp_index", "group_id", "tau2", "omega2"])?;
    for i in 0..sim.d {
        let k = result.groups.group_of(i);
        w.write_record([
            (i + 1).to_string(),
            (k + 1).to_string(),
            io::fmt_f64(result.tau2_true[k]),
            io::fmt_f64(result.omega2_true[i]),
        ])?;
    }
    w.flush()?;

    manifest.write(&out)?;
    eprintln!("simulate: wrote case files to {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// fit

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMode {
    Fixed,
    FullyBayes,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    groups: PathBuf,
    #[arg(long, value_enum)]
    mode: FitMode,
    /// Fixed value (fixed mode) or initial value (fully-bayes mode).
    #[arg(long = "lambda1-sq")]
    lambda1_sq: Option<f64>,
    #[arg(long = "lambda2-sq")]
    lambda2_sq: Option<f64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: u64,
    /// Optional W_true.csv for truth-vs-estimate scatter data.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Also emit minimal SVG plots.
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    init_jobs(args.jobs)?;
    let cfg = FileConfig::load(&args.config)?;
    let chains = merge_usize(args.chains, &cfg, "chains", 1);
    if chains == 0 {
        bail!("--chains must be at least 1");
    }
    let mode = match args.mode {
        FitMode::Fixed => LambdaMode::FixedLambda,
        FitMode::FullyBayes => LambdaMode::FullyBayes,
    };
    let lambda1_sq = merge_f64(args.lambda1_sq, &cfg, "lambda1_sq", 1.0);
    let lambda2_sq = merge_f64(args.lambda2_sq, &cfg, "lambda2_sq", 1.0);
    if mode == LambdaMode::FixedLambda && (args.lambda1_sq.is_none() || args.lambda2_sq.is_none())
    {
        if cfg.f64("lambda1_sq").is_none() || cfg.f64("lambda2_sq").is_none() {
            bail!("fixed mode requires --lambda1-sq and --lambda2-sq");
        }
    }
    let gibbs = GibbsConfig {
        n_iter: merge_usize(args.iters, &cfg, "iters", 10_000),
        burn_in: merge_usize(args.burn_in, &cfg, "burn_in", 2_000),
        thin: merge_usize(args.thin, &cfg, "thin", 2),
        mode,
        lambda1_sq,
        lambda2_sq,
        eps_scale: merge_f64(None, &cfg, "eps_scale", 1e-12),
    };
    gibbs.validate()?;
    let prior = prior_from(&cfg);

    let out = resolve_out(&args.out, "fit")?;
    let mut manifest = ManifestBuilder::new(
        "fit",
        json!({
            "mode": format!("{:?}", args.mode), "chains": chains,
            "iters": gibbs.n_iter, "burn_in": gibbs.burn_in, "thin": gibbs.thin,
            "lambda1_sq": lambda1_sq, "lambda2_sq": lambda2_sq,
        }),
        Some(args.seed),
    );
    let (data, groups) = load_inputs(&args.x, &args.y, &args.groups, &mut manifest)?;
    if let Some(truth) = &args.truth {
        manifest.checksum_input(truth)?;
    }

    let chain_outputs: Vec<_> = (0..chains)
        .into_par_iter()
        .map(|i| {
            let mut stream = SeededStream::new(args.seed, i as u64);
            run_chain(&data, &groups, &prior, &gibbs, &mut stream)
        })
        .collect::<std::result::Result<_, _>>()?;

    let mut pooled: Vec<ModelState> = Vec::new();
    for (i, chain) in chain_outputs.iter().enumerate() {
        io::write_chain_csv(&out.join(format!("chain_{}.csv", i + 1)), &chain.draws)?;
        pooled.extend(chain.draws.iter().cloned());
    }
    let summary = posterior_summary(&pooled)?;
    io::write_matrix_csv(&out.join("W_mean.csv"), &summary.w_mean, "pheno_")?;
    io::write_matrix_csv(&out.join("W_lower.csv"), &summary.w_lower, "pheno_")?;
    io::write_matrix_csv(&out.join("W_upper.csv"), &summary.w_upper, "pheno_")?;

    let mut summary_json = json!({
        "sigma2_mean": summary.sigma2_mean,
        "lambda1_sq_mean": summary.lambda1_sq_mean,
        "lambda2_sq_mean": summary.lambda2_sq_mean,
        "draws": pooled.len(),
    });
    if let Some(truth_path) = &args.truth {
        let w_true = io::read_matrix_csv(truth_path)?;
        io::write_scatter_csv(&out.join("scatter.csv"), &w_true, &summary.w_mean)?;
        let t: Vec<f64> = w_true.iter().copied().collect();
        let e: Vec<f64> = summary.w_mean.iter().copied().collect();
        summary_json["correlation"] = json!(pearson(&t, &e));
        if args.svg {
            svg::write_scatter(
                &out.join("scatter.svg"),
                "posterior mean vs truth",
                &t,
                &e,
            )?;
        }
    }
    std::fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary_json)?,
    )?;

    if args.svg {
        let traces: Vec<Vec<f64>> = chain_outputs
            .iter()
            .map(|c| c.draws.iter().map(|s| s.lambda1_sq).collect())
            .collect();
        svg::write_traces(&out.join("lambda1_sq_trace.svg"), "lambda1_sq chains", &traces)?;
    }

    manifest.write(&out)?;
    eprintln!("fit: wrote {} chains to {}", chains, out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// mcem

#[derive(Args, Debug)]
pub struct McemArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    groups: PathBuf,
    /// Initial (λ₁², λ₂²): either "v" (used for both) or "v1,v2". Repeatable.
    #[arg(long = "init", required = true)]
    inits: Vec<String>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Divergence cap on either λ² estimate.
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_init(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [v] => {
            let v: f64 = v.parse().context("--init")?;
            Ok((v, v))
        }
        [a, b] => Ok((a.parse().context("--init")?, b.parse().context("--init")?)),
        _ => bail!("--init expects \"v\" or \"v1,v2\", got {s:?}"),
    }
}

pub fn cmd_mcem(args: &McemArgs) -> Result<()> {
    init_jobs(args.jobs)?;
    let cfg = FileConfig::load(&args.config)?;
    let max_iters = merge_usize(args.max_iters, &cfg, "max_iters", 50);
    let inits: Vec<(f64, f64)> = args
        .inits
        .iter()
        .map(|s| parse_init(s))
        .collect::<Result<_>>()?;

    let out = resolve_out(&args.out, "mcem")?;
    let mut manifest = ManifestBuilder::new(
        "mcem",
        json!({
            "inits": inits.iter().map(|(a, b)| json!([a, b])).collect::<Vec<_>>(),
            "max_iters": max_iters,
        }),
        Some(args.seed),
    );
    let (data, groups) = load_inputs(&args.x, &args.y, &args.groups, &mut manifest)?;
    let prior = prior_from(&cfg);

    let traces: Vec<_> = inits
        .par_iter()
        .enumerate()
        .map(|(i, &lambda_init)| {
            let mut mc = McemConfig::with_defaults(max_iters);
            mc.lambda_init = lambda_init;
            mc.convergence_tol = merge_f64(args.tol, &cfg, "tol", mc.convergence_tol);
            mc.divergence_cap = merge_f64(args.cap, &cfg, "cap", mc.divergence_cap);
            let mut stream = SeededStream::new(args.seed, i as u64);
            run_mcem(&data, &groups, &prior, &mc, &mut stream)
        })
        .collect::<std::result::Result<_, _>>()?;

    let mut statuses = Vec::new();
    for (i, trace) in traces.iter().enumerate() {
        let path = out.join(format!("trace_{}.csv", i + 1));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["iter", "lambda1_sq", "lambda2_sq"])?;
        for (t, (l1, l2)) in trace.lambdas.iter().enumerate() {
            w.write_record([t.to_string(), io::fmt_f64(*l1), io::fmt_f64(*l2)])?;
        }
        w.flush()?;
        let last = trace.lambdas.last().unwrap();
        statuses.push(json!({
            "init": inits[i],
            "status": format!("{:?}", trace.status),
            "final_lambda1_sq": last.0,
            "final_lambda2_sq": last.1,
            "iterations": trace.lambdas.len() - 1,
        }));
    }
    std::fs::write(
        out.join("statuses.json"),
        serde_json::to_string_pretty(&statuses)?,
    )?;
    manifest.annotate("statuses", json!(statuses));

    if args.svg {
        let l1_traces: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| t.lambdas.iter().map(|p| p.0).collect())
            .collect();
        svg::write_traces(&out.join("lambda1_sq_trace.svg"), "MCEM lambda1_sq", &l1_traces)?;
    }

    manifest.write(&out)?;
    let diverged = traces.iter().any(|t| t.status == McemStatus::Diverged);
    eprintln!(
        "mcem: {} runs written to {}{}",
        traces.len(),
        out.display(),
        if diverged { " (divergence detected)" } else { "" }
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// waic

#[derive(Args, Debug)]
pub struct WaicArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    groups: PathBuf,
    #[arg(long = "grid-min")]
    grid_min: Option<f64>,
    #[arg(long = "grid-max")]
    grid_max: Option<f64>,
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    /// Explicit comma-separated λ₁² grid (with --lambda2-grid).
    #[arg(long = "lambda1-grid")]
    lambda1_grid: Option<String>,
    #[arg(long = "lambda2-grid")]
    lambda2_grid: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn write_waic_csv(path: &Path, table: &WaicTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lambda1_sq", "lambda2_sq", "lppd", "p_waic", "waic", "error"])?;
    for row in &table.rows {
        w.write_record([
            io::fmt_f64(row.lambda1_sq),
            io::fmt_f64(row.lambda2_sq),
            io::fmt_f64(row.lppd),
            io::fmt_f64(row.p_waic),
            io::fmt_f64(row.waic),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_waic(args: &WaicArgs) -> Result<()> {
    init_jobs(args.jobs)?;
    let cfg = FileConfig::load(&args.config)?;
    let grid = grid_from_flags(
        merge_f64(args.grid_min, &cfg, "grid_min", 1e-2),
        merge_f64(args.grid_max, &cfg, "grid_max", 1e3),
        merge_usize(args.grid_points, &cfg, "grid_points", 15),
        &args.lambda1_grid,
        &args.lambda2_grid,
    )?;
    let gibbs = GibbsConfig {
        n_iter: merge_usize(args.iters, &cfg, "iters", 10_000),
        burn_in: merge_usize(args.burn_in, &cfg, "burn_in", 2_000),
        thin: merge_usize(args.thin, &cfg, "thin", 2),
        ..GibbsConfig::default()
    };
    gibbs.validate()?;
    let prior = prior_from(&cfg);

    let out = resolve_out(&args.out, "waic")?;
    let mut manifest = ManifestBuilder::new(
        "waic",
        json!({
            "grid_lambda1_sq": grid.values1(), "grid_lambda2_sq": grid.values2(),
            "iters": gibbs.n_iter, "burn_in": gibbs.burn_in, "thin": gibbs.thin,
        }),
        Some(args.seed),
    );
    let (data, groups) = load_inputs(&args.x, &args.y, &args.groups, &mut manifest)?;
    if let Some(truth) = &args.truth {
        manifest.checksum_input(truth)?;
    }

    let table = waic_grid_search(&data, &groups, &prior, &grid, &gibbs, args.seed, 0)?;
    write_waic_csv(&out.join("waic.csv"), &table)?;
    let best = table
        .argmin()
        .ok_or_else(|| anyhow!("every grid point failed; no argmin"))?;
    let mut argmin_json = json!({
        "lambda1_sq": best.lambda1_sq,
        "lambda2_sq": best.lambda2_sq,
        "waic": best.waic,
        "lppd": best.lppd,
        "p_waic": best.p_waic,
    });

    // follow-up fit at the argmin, on a substream past the grid's range
    let refit_config = GibbsConfig {
        mode: LambdaMode::FixedLambda,
        lambda1_sq: best.lambda1_sq,
        lambda2_sq: best.lambda2_sq,
        ..gibbs.clone()
    };
    let mut stream = SeededStream::new(args.seed, grid.len() as u64);
    let chain = run_chain(&data, &groups, &prior, &refit_config, &mut stream)?;
    let summary = posterior_summary(&chain.draws)?;
    io::write_matrix_csv(&out.join("W_argmin_mean.csv"), &summary.w_mean, "pheno_")?;

    if let Some(truth_path) = &args.truth {
        let w_true = io::read_matrix_csv(truth_path)?;
        io::write_scatter_csv(&out.join("scatter_argmin.csv"), &w_true, &summary.w_mean)?;
        let t: Vec<f64> = w_true.iter().copied().collect();
        let e: Vec<f64> = summary.w_mean.iter().copied().collect();
        argmin_json["correlation"] = json!(pearson(&t, &e));
        if args.svg {
            svg::write_scatter(
                &out.join("scatter_argmin.svg"),
                "WAIC-argmin posterior mean vs truth",
                &t,
                &e,
            )?;
        }
    }
    std::fs::write(
        out.join("argmin.json"),
        serde_json::to_string_pretty(&argmin_json)?,
    )?;

    manifest.write(&out)?;
    eprintln!(
        "waic: argmin at lambda1_sq={}, lambda2_sq={} ({})",
        best.lambda1_sq,
        best.lambda2_sq,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// mlsurface

#[derive(Args, Debug)]
pub struct MlSurfaceArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    groups: PathBuf,
    #[arg(long = "grid-min")]
    grid_min: Option<f64>,
    #[arg(long = "grid-max")]
    grid_max: Option<f64>,
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    #[arg(long = "lambda1-grid")]
    lambda1_grid: Option<String>,
    #[arg(long = "lambda2-grid")]
    lambda2_grid: Option<String>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn cmd_mlsurface(args: &MlSurfaceArgs) -> Result<()> {
    init_jobs(args.jobs)?;
    let cfg = FileConfig::load(&args.config)?;
    let grid = grid_from_flags(
        merge_f64(args.grid_min, &cfg, "grid_min", 1e-2),
        merge_f64(args.grid_max, &cfg, "grid_max", 1e3),
        merge_usize(args.grid_points, &cfg, "grid_points", 15),
        &args.lambda1_grid,
        &args.lambda2_grid,
    )?;
    let prior = prior_from(&cfg);

    let out = resolve_out(&args.out, "mlsurface")?;
    let mut manifest = ManifestBuilder::new(
        "mlsurface",
        json!({
            "grid_lambda1_sq": grid.values1(), "grid_lambda2_sq": grid.values2(),
        }),
        None,
    );
    let (data, groups) = load_inputs(&args.x, &args.y, &args.groups, &mut manifest)?;

    let surface = ml_surface(&data, &groups, &prior, &grid)?;
    let mut w = csv::Writer::from_path(out.join("surface.csv"))?;
    w.write_record(["lambda1_sq", "lambda2_sq", "log_ml"])?;
    for (l1, l2, v) in &surface.rows {
        w.write_record([io::fmt_f64(*l1), io::fmt_f64(*l2), io::fmt_f64(*v)])?;
    }
    w.flush()?;

    let boundary = match surface.boundary {
        BoundaryFlag::Interior => "interior",
        BoundaryFlag::Boundary => "boundary",
        BoundaryFlag::Tie => "tie",
    };
    let argmax_json = json!({
        "lambda1_sq": surface.argmax.0,
        "lambda2_sq": surface.argmax.1,
        "log_ml": surface.argmax.2,
        "boundary": boundary,
        "range": surface.range(),
    });
    std::fs::write(
        out.join("argmax.json"),
        serde_json::to_string_pretty(&argmax_json)?,
    )?;

    manifest.write(&out)?;
    eprintln!(
        "mlsurface: argmax at lambda1_sq={}, lambda2_sq={} ({boundary})",
        surface.argmax.0, surface.argmax.1
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// map

#[derive(Args, Debug)]
pub struct MapArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    groups: PathBuf,
    /// Direct group-level penalty weight (exclusive with --from-lambda).
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    /// Derive γᵢ = 2σλᵢ from --sigma2/--lambda1-sq/--lambda2-sq.
    #[arg(long = "from-lambda")]
    from_lambda: bool,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long = "lambda1-sq")]
    lambda1_sq: Option<f64>,
    #[arg(long = "lambda2-sq")]
    lambda2_sq: Option<f64>,
    /// Run the posterior-mode equivalence check (requires --from-lambda and --seed).
    #[arg(long)]
    verify: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    perturbations: Option<usize>,
    #[arg(long)]
    magnitude: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn cmd_map(args: &MapArgs) -> Result<()> {
    let cfg = FileConfig::load(&args.config)?;
    let solver = MapConfig {
        max_iters: merge_usize(args.max_iters, &cfg, "max_iters", 5_000),
        tol: merge_f64(args.tol, &cfg, "tol", 1e-10),
    };
    solver.validate()?;

    let (pen, lambda_setup) = if args.from_lambda {
        let sigma2 = args
            .sigma2
            .or_else(|| cfg.f64("sigma2"))
            .ok_or_else(|| anyhow!("--from-lambda requires --sigma2"))?;
        let l1 = args
            .lambda1_sq
            .or_else(|| cfg.f64("lambda1_sq"))
            .ok_or_else(|| anyhow!("--from-lambda requires --lambda1-sq"))?;
        let l2 = args
            .lambda2_sq
            .or_else(|| cfg.f64("lambda2_sq"))
            .ok_or_else(|| anyhow!("--from-lambda requires --lambda2-sq"))?;
        (PenaltyWeights::from_lambda(sigma2, l1, l2)?, Some((sigma2, l1, l2)))
    } else {
        let g1 = args
            .gamma1
            .or_else(|| cfg.f64("gamma1"))
            .ok_or_else(|| anyhow!("provide --gamma1/--gamma2 or --from-lambda"))?;
        let g2 = args
            .gamma2
            .or_else(|| cfg.f64("gamma2"))
            .ok_or_else(|| anyhow!("provide --gamma1/--gamma2 or --from-lambda"))?;
        (PenaltyWeights::new(g1, g2)?, None)
    };
    if args.verify && lambda_setup.is_none() {
        bail!("--verify requires --from-lambda");
    }
    if args.verify && args.seed.is_none() {
        bail!("--verify requires --seed");
    }

    let out = resolve_out(&args.out, "map")?;
    let mut manifest = ManifestBuilder::new(
        "map",
        json!({
            "gamma1": pen.gamma1, "gamma2": pen.gamma2,
            "from_lambda": lambda_setup.map(|(s, l1, l2)| json!([s, l1, l2])),
            "max_iters": solver.max_iters, "tol": solver.tol,
            "verify": args.verify,
        }),
        args.seed,
    );
    let (data, groups) = load_inputs(&args.x, &args.y, &args.groups, &mut manifest)?;

    let (solution, equivalence) = if args.verify {
        let (sigma2, l1, l2) = lambda_setup.unwrap();
        let mut stream = SeededStream::new(args.seed.unwrap(), 0);
        let n_random = merge_usize(args.perturbations, &cfg, "perturbations", 100);
        let magnitude = merge_f64(args.magnitude, &cfg, "magnitude", 1e-3);
        let (sol, report) = verify_map_equivalence(
            &data, &groups, sigma2, l1, l2, &solver, n_random, magnitude, &mut stream,
        )?;
        (sol, Some(report))
    } else {
        (solve_map(&data, &groups, &pen, &solver)?, None)
    };

    io::write_matrix_csv(&out.join("W_hat.csv"), &solution.w, "pheno_")?;
    let report_json = json!({
        "converged": solution.converged,
        "iterations": solution.iters,
        "objective_initial": solution.objective_trace.first(),
        "objective_final": solution.objective_trace.last(),
        "objective_check": objective(&data, &groups, solution.w.view(), &pen)?,
    });
    std::fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&report_json)?,
    )?;
    if let Some(report) = equivalence {
        let eq_json = json!({
            "log_post_at_solution": report.log_post_at_solution,
            "best_perturbed": report.best_perturbed,
            "max_improvement": report.max_improvement,
            "is_local_max": report.is_local_max,
            "n_perturbations": report.n_perturbations,
        });
        std::fs::write(
            out.join("equivalence.json"),
            serde_json::to_string_pretty(&eq_json)?,
        )?;
    }

    manifest.write(&out)?;
    eprintln!(
        "map: converged={} after {} iterations ({})",
        solution.converged,
        solution.iters,
        out.display()
    );
    Ok(())
}
