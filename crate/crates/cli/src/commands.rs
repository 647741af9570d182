use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use riskfilt::io::{fmt_f64, read_covariance, write_kernel, write_paths, CsvOut};
use riskfilt::{
    check_conditions, cm_verify, config_hash, discrepancy_report, extract_kernel, leg_gains_from, mc_compare,
    optimal_risk, risk_neutral_gains, rs_gains, rs_gains_from, simulate_path, solve_backward_gamma,
    solve_backward_linearized, solve_forward_gamma, Comparison, ConditionId, Error, GeneralRsFilter, Mat2, Model,
    ModelConfig, NoiseMode, Result, RsDriftForm, Strategy,
};
use serde_json::{json, Value};

pub const THREADS_ENV: &str = "RISKFILT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "riskfilt", version, about = "LEG and risk-sensitive filtering experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Model file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Horizon; defaults to the model file's T.
    #[arg(long = "T", value_name = "T")]
    horizon: Option<f64>,
    /// Seed for all randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long)]
    n: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; falls back to RISKFILT_THREADS, then to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward and backward Riccati solutions and condition checks.
    Riccati {
        #[command(flatten)]
        common: Common,
    },
    /// LEG and RS kernels for one or more horizons.
    Kernels {
        #[command(flatten)]
        common: Common,
        /// Write every stride-th node in each direction.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Riccati-Volterra solve and general RS filter from covariance samples.
    Volterra {
        #[command(flatten)]
        common: Common,
        /// Covariance samples with columns t,s,value.
        #[arg(long)]
        kernel: Option<PathBuf>,
        /// Mean samples with columns t,value; zero when omitted.
        #[arg(long)]
        mean: Option<PathBuf>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Simulated signal and observation paths.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo comparison of the LEG, RS and risk-neutral filters.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo check of the conditional Cameron-Martin formula.
    VerifyCm {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        m11: f64,
        #[arg(long, default_value_t = 0.0)]
        m12: f64,
        #[arg(long, default_value_t = 0.0)]
        m22: f64,
    },
    /// Example-model oracles and the LEG/RS discrepancy report.
    Example4 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        stride: Option<usize>,
    },
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Riccati { common } => ("riccati", common),
            Command::Kernels { common, .. } => ("kernels", common),
            Command::Volterra { common, .. } => ("volterra", common),
            Command::Simulate { common } => ("simulate", common),
            Command::Compare { common } => ("compare", common),
            Command::VerifyCm { common, .. } => ("verify-cm", common),
            Command::Example4 { common, .. } => ("example4", common),
        }
    }
}

/// Resolved inputs shared by every subcommand.
struct Ctx {
    config: ModelConfig,
    out: PathBuf,
    entries: BTreeMap<String, String>,
}

impl Ctx {
    fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_owned(), value.to_string());
    }

    fn hash(&self) -> String {
        config_hash(&self.entries)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn horizon(&mut self, common: &Common) -> f64 {
        let h = common.horizon.unwrap_or(self.config.horizon);
        self.set("run.T", fmt_f64(h));
        h
    }

    fn seed(&mut self, common: &Common) -> u64 {
        let s = common.seed.or(self.config.experiment.seed).unwrap_or(0);
        self.set("run.seed", s);
        s
    }

    fn paths(&mut self, common: &Common, default: usize) -> Result<usize> {
        let n = common.n.or(self.config.experiment.n).unwrap_or(default);
        if n == 0 {
            return Err(Error::Config {
                key: "n".into(),
                message: "must be at least 1".into(),
            });
        }
        self.set("run.n", n);
        Ok(n)
    }

    fn stride(&mut self, stride: Option<usize>, default: usize) -> Result<usize> {
        let s = stride.or(self.config.experiment.stride).unwrap_or(default);
        if s == 0 {
            return Err(Error::Config {
                key: "stride".into(),
                message: "must be at least 1".into(),
            });
        }
        self.set("run.stride", s);
        Ok(s)
    }

    fn write_json(&self, name: &str, mut body: Value) -> Result<()> {
        let mut doc = serde_json::Map::new();
        doc.insert("config_hash".into(), self.hash().into());
        if let Value::Object(m) = &mut body {
            doc.append(m);
        }
        let text = serde_json::to_string_pretty(&Value::Object(doc)).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(self.path(name), text + "\n")?;
        Ok(())
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(k) = flag {
        return Ok(k);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config {
            key: THREADS_ENV.into(),
            message: format!("expected a thread count, got {v:?}"),
        }),
        Err(_) => Ok(0),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let (name, common) = cli.command.parts();
    let threads = thread_count(common.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let config = ModelConfig::load(&common.config)?;
    fs::create_dir_all(&common.out)?;
    let mut ctx = Ctx {
        entries: config.canonical(),
        config,
        out: common.out.clone(),
    };
    ctx.set("run.command", name);
    pool.install(|| dispatch(&cli.command, &mut ctx))
}

fn dispatch(command: &Command, ctx: &mut Ctx) -> Result<()> {
    match command {
        Command::Riccati { common } => riccati(ctx, common),
        Command::Kernels { common, stride } => kernels(ctx, common, *stride),
        Command::Volterra {
            common,
            kernel,
            mean,
            stride,
        } => volterra(ctx, common, kernel.as_deref(), mean.as_deref(), *stride),
        Command::Simulate { common } => simulate(ctx, common),
        Command::Compare { common } => compare(ctx, common),
        Command::VerifyCm { common, m11, m12, m22 } => verify_cm(ctx, common, Mat2::new(*m11, *m12, *m22)),
        Command::Example4 { stride, .. } => example4(ctx, *stride),
    }
}

fn condition_name(c: ConditionId) -> &'static str {
    match c {
        ConditionId::Cmu => "C_mu",
        ConditionId::CmuStar => "C_mu*",
        ConditionId::CmuStarStar => "C_mu**",
    }
}

fn conditions_json(model: &Model, m: &Mat2) -> Value {
    let reports: Vec<Value> = check_conditions(model, m)
        .into_iter()
        .map(|r| json!({ "condition": condition_name(r.condition), "satisfied": r.satisfied, "witness": r.witness }))
        .collect();
    Value::Array(reports)
}

fn riccati(ctx: &mut Ctx, common: &Common) -> Result<()> {
    let horizon = ctx.horizon(common);
    let model = ctx.config.model(horizon)?;
    let hash = ctx.hash();
    ctx.write_json(
        "conditions.json",
        json!({ "T": horizon, "mu": model.mu(), "conditions": conditions_json(&model, &Mat2::zero()) }),
    )?;
    let forward = solve_forward_gamma(&model)?;
    write_paths(ctx.path("gammaXX.csv"), &hash, &["gammaXX"], &[&forward.gamma_xx])?;
    let direct = solve_backward_gamma(&model, &forward.gamma_xx)?;
    let linear = solve_backward_linearized(&model, &forward.gamma_xx)?;
    write_paths(
        ctx.path("Gamma.csv"),
        &hash,
        &["Gamma", "phi1", "phi2", "Gamma_linearized"],
        &[&direct.gamma, &linear.phi1, &linear.phi2, &linear.gamma],
    )
}

fn horizons(ctx: &mut Ctx, common: &Common) -> Vec<f64> {
    let list = match common.horizon {
        Some(h) => vec![h],
        None if !ctx.config.experiment.horizons.is_empty() => ctx.config.experiment.horizons.clone(),
        None => vec![ctx.config.horizon],
    };
    ctx.set(
        "run.horizons",
        list.iter().map(|&h| fmt_f64(h)).collect::<Vec<_>>().join(","),
    );
    list
}

fn kernels(ctx: &mut Ctx, common: &Common, stride: Option<usize>) -> Result<()> {
    let list = horizons(ctx, common);
    let stride = ctx.stride(stride, 1)?;
    let hash = ctx.hash();
    let longest = list.iter().copied().fold(f64::MIN, f64::max);
    let full = ctx.config.model(longest)?;
    let forward = solve_forward_gamma(&full)?;
    for &h in &list {
        let leg = extract_kernel(&leg_gains_from(&full, &forward, h)?)?;
        write_kernel(ctx.path(&format!("leg_kernel_T{h}.csv")), &hash, &leg, stride)?;
        let rs_kernel = extract_kernel(&rs_gains(&ctx.config.model(h)?)?)?;
        write_kernel(ctx.path(&format!("rs_kernel_T{h}.csv")), &hash, &rs_kernel, stride)?;
    }
    Ok(())
}

fn volterra(
    ctx: &mut Ctx,
    common: &Common,
    kernel: Option<&Path>,
    mean: Option<&Path>,
    stride: Option<usize>,
) -> Result<()> {
    let horizon = ctx.horizon(common);
    let seed = ctx.seed(common);
    let stride = ctx.stride(stride, 1)?;
    let kernel = kernel
        .map(Path::to_path_buf)
        .or_else(|| ctx.config.experiment.kernel.clone())
        .ok_or_else(|| Error::Config {
            key: "experiment.kernel".into(),
            message: "no covariance file given".into(),
        })?;
    let mean = mean
        .map(Path::to_path_buf)
        .or_else(|| ctx.config.experiment.mean.clone());
    let model = ctx.config.model(horizon)?;
    let cov = read_covariance(&kernel, mean.as_deref(), model.grid())?;
    ctx.set(
        "run.kernel",
        cov.kernel()
            .entries()
            .map(|(_, _, v)| fmt_f64(v))
            .collect::<Vec<_>>()
            .join(","),
    );
    ctx.set(
        "run.mean",
        cov.mean()
            .values()
            .iter()
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>()
            .join(","),
    );
    let hash = ctx.hash();
    let filter = GeneralRsFilter::new(&cov, &model, RsDriftForm::default())?;
    write_kernel(ctx.path("volterra_gamma.csv"), &hash, &filter.solution().gamma, stride)?;
    write_paths(
        ctx.path("volterra_diag.csv"),
        &hash,
        &["gamma_diag", "gain"],
        &[&filter.solution().diag, filter.gain()],
    )?;
    let path = simulate_path(&model, seed, 0, NoiseMode::Gaussian);
    let (h, z) = filter.apply(&path.dy)?;
    write_paths(
        ctx.path("volterra_filter.csv"),
        &hash,
        &["X", "Y", "Z", "h"],
        &[&path.x, &path.y, &z.z, &h],
    )
}

fn simulate(ctx: &mut Ctx, common: &Common) -> Result<()> {
    let horizon = ctx.horizon(common);
    let seed = ctx.seed(common);
    let n = ctx.paths(common, 1)?;
    let model = ctx.config.model(horizon)?;
    let hash = ctx.hash();
    let mut out = CsvOut::create(ctx.path("paths.csv"), &hash, &["path", "t", "X", "Y"])?;
    for bundle in riskfilt::simulate_paths(&model, n, seed, NoiseMode::Gaussian) {
        for i in 0..model.grid().len() {
            let index = bundle.index.to_string();
            out.row([
                index,
                fmt_f64(model.grid().t(i)),
                fmt_f64(bundle.x.at(i)),
                fmt_f64(bundle.y.at(i)),
            ])?;
        }
    }
    out.finish()
}

fn estimate_fields(e: &riskfilt::McEstimate) -> [String; 4] {
    [
        fmt_f64(e.mean),
        fmt_f64(e.stderr),
        e.n.to_string(),
        fmt_f64(e.tail_weight),
    ]
}

fn compare(ctx: &mut Ctx, common: &Common) -> Result<()> {
    let horizon = ctx.horizon(common);
    let seed = ctx.seed(common);
    let n = ctx.paths(common, 10_000)?;
    let model = ctx.config.model(horizon)?;
    let hash = ctx.hash();
    let forward = solve_forward_gamma(&model)?;
    let strategies = vec![
        Strategy::new("LEG", leg_gains_from(&model, &forward, horizon)?),
        Strategy::new("RS", rs_gains_from(&model, &forward, RsDriftForm::default())?),
        Strategy::new("risk-neutral", risk_neutral_gains(&model)?),
    ];
    let result: Comparison = mc_compare(&model, &strategies, n, seed)?;
    let risk = optimal_risk(&model, horizon)?;

    let mut out = CsvOut::create(
        ctx.path("compare.csv"),
        &hash,
        &["strategy", "mean", "stderr", "n", "tail_weight"],
    )?;
    for s in &result.strategies {
        let [m, se, n, tw] = estimate_fields(&s.estimate);
        out.row([s.strategy.clone(), m, se, n, tw])?;
    }
    out.finish()?;
    let mut out = CsvOut::create(
        ctx.path("paired.csv"),
        &hash,
        &["first", "second", "mean", "stderr", "n", "tail_weight"],
    )?;
    for p in &result.paired {
        let [m, se, n, tw] = estimate_fields(&p.estimate);
        out.row([p.first.clone(), p.second.clone(), m, se, n, tw])?;
    }
    out.finish()?;

    let strategies: Vec<Value> = result
        .strategies
        .iter()
        .map(|s| {
            json!({
                "strategy": s.strategy,
                "mean": s.estimate.mean,
                "stderr": s.estimate.stderr,
                "n": s.estimate.n,
                "seed": seed,
                "tail_weight": s.estimate.tail_weight,
            })
        })
        .collect();
    let paired: Vec<Value> = result
        .paired
        .iter()
        .map(|p| json!({ "first": p.first, "second": p.second, "mean": p.estimate.mean, "stderr": p.estimate.stderr, "n": p.estimate.n }))
        .collect();
    ctx.write_json(
        "compare.json",
        json!({ "seed": seed, "n": n, "T": horizon, "optimal_risk": risk, "strategies": strategies, "paired": paired }),
    )
}

fn verify_cm(ctx: &mut Ctx, common: &Common, m: Mat2) -> Result<()> {
    let horizon = ctx.horizon(common);
    let seed = ctx.seed(common);
    let n = ctx.paths(common, 10_000)?;
    ctx.set(
        "run.M",
        format!("{},{},{}", fmt_f64(m.l11), fmt_f64(m.l12), fmt_f64(m.l22)),
    );
    let model = ctx.config.model(horizon)?;
    let v = cm_verify(&model, &m, &risk_neutral_gains(&model)?, n, seed)?;
    ctx.write_json(
        "verify_cm.json",
        json!({
            "seed": seed,
            "n": n,
            "T": horizon,
            "strategy": "risk-neutral",
            "lhs": { "mean": v.lhs.mean, "stderr": v.lhs.stderr },
            "rhs": { "mean": v.rhs.mean, "stderr": v.rhs.stderr },
            "difference": v.difference,
            "pooled_stderr": v.pooled_stderr,
            "within_3_stderr": v.within(3.0),
        }),
    )
}

fn example4(ctx: &mut Ctx, stride: Option<usize>) -> Result<()> {
    let unit = ctx.config.steps as f64 / ctx.config.horizon;
    if (unit - unit.round()).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "grid must have a whole number of steps per unit time, got {unit}"
        )));
    }
    let unit = unit.round() as usize;
    ctx.set("run.steps_per_unit", unit);
    let stride = ctx.stride(stride, (unit / 20).max(1))?;
    let hash = ctx.hash();
    let report = discrepancy_report(unit, stride)?;
    let mut out = CsvOut::create(
        ctx.path("discrepancy.csv"),
        &hash,
        &["T", "t", "s", "Hbar", "Hhat_numeric", "Hhat_printed"],
    )?;
    for r in &report.rows {
        out.numbers(&[r.horizon, r.t, r.s, r.hbar, r.hhat_numeric, r.hhat_printed])?;
    }
    out.finish()?;
    fs::write(
        ctx.path("discrepancy.txt"),
        format!("# config_hash={hash}\n{}", report.summary()),
    )?;
    oracles(ctx, unit, &hash)
}

/// Riccati solutions for the example model against their closed forms.
fn oracles(ctx: &Ctx, unit: usize, hash: &str) -> Result<()> {
    use riskfilt::example::{big_gamma, gamma_xx, phi1, phi2};
    let grid = riskfilt::TimeGrid::new(1.0, unit)?;
    let model = riskfilt::validate_model(&riskfilt::ModelSpec::worked_example(1.0), &grid)?;
    let forward = solve_forward_gamma(&model)?;
    let direct = solve_backward_gamma(&model, &forward.gamma_xx)?;
    let linear = solve_backward_linearized(&model, &forward.gamma_xx)?;
    let dev = |f: &dyn Fn(usize) -> f64| (0..grid.len()).map(f).fold(0.0f64, f64::max);
    let rows = [
        (
            "gammaXX",
            dev(&|i| (forward.gamma_xx.at(i) - gamma_xx(grid.t(i))).abs()),
        ),
        (
            "Gamma",
            dev(&|i| (direct.gamma.at(i) - big_gamma(1.0, grid.t(i))).abs()),
        ),
        ("phi1", dev(&|i| (linear.phi1.at(i) - phi1(1.0, grid.t(i))).abs())),
        ("phi2", dev(&|i| (linear.phi2.at(i) - phi2(1.0, grid.t(i))).abs())),
        (
            "Gamma_direct_vs_linearized",
            dev(&|i| (direct.gamma.at(i) - linear.gamma.at(i)).abs()),
        ),
    ];
    let mut out = CsvOut::create(ctx.path("oracles.csv"), hash, &["quantity", "max_abs_dev"])?;
    for (name, d) in rows {
        out.row([name.to_owned(), fmt_f64(d)])?;
    }
    out.finish()
}
