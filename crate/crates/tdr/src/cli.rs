//! Command-line front end: reproduces the throughput–delay–reliability
//! curves as self-describing CSV tables, runs the optimizers, and
//! cross-validates analytic results against the simulator.
//!
//! Configuration comes from a `key=value` file plus `--key value` overrides
//! (the `SEED` environment variable slots between the two). Every output
//! starts with a `#`-prefixed header block carrying the schema version and
//! the full effective configuration, so a result file can be re-run as a
//! config file.

use crate::model::{HopPlan, NetworkParams};
use crate::quadrature::QuadratureSpec;
use crate::sim::{DelayConvention, SimConfig};
use crate::{analytic, bounds, optimize, sim};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::PathBuf;

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("infeasible optimization: {0}")]
    Infeasible(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    /// 2 = usage/config error, 3 = infeasible optimization,
    /// 4 = numeric failure (tolerance unreachable or regime out of range).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::Quadrature(q) => CliError::Numeric(q.to_string()),
            crate::Error::ConditionalUnderflow { .. } => CliError::Numeric(e.to_string()),
            crate::Error::InfeasibleAllocation { .. } => CliError::Infeasible(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<sim::SimError> for CliError {
    fn from(e: sim::SimError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

/// Effective run configuration after merging defaults, the config file, the
/// `SEED` environment variable, and command-line flags (in that order).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    /// End-to-end distance, used when `hops` is not given.
    pub d: f64,
    /// Per-hop distances.
    pub hops: Option<Vec<f64>>,
    /// Per-hop retransmission budgets.
    pub budgets: Option<Vec<u32>>,
    /// End-to-end retransmission budget (config key `D`).
    pub total_budget: Option<u32>,
    /// Largest hop count scanned (config key `N_max`).
    pub n_max: usize,
    pub trials: u64,
    pub seed: u64,
    pub quad_rel_tol: f64,
    pub delay_convention: DelayConvention,
    /// Simulation truncation radius; auto-derived when absent.
    pub region_radius: Option<f64>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            p: 0.5,
            alpha: 3.0,
            beta: 3.0,
            d: 1.0,
            hops: None,
            budgets: None,
            total_budget: None,
            n_max: 8,
            trials: 1000,
            seed: 0,
            quad_rel_tol: 1e-9,
            delay_convention: DelayConvention::AnalyticCompatible,
            region_radius: None,
            output: None,
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("key {key}: expected a number, got {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("key {key}: cannot parse item {item:?}")))
        })
        .collect()
}

fn parse_convention(value: &str) -> Result<DelayConvention, CliError> {
    match value {
        "analytic-compatible" => Ok(DelayConvention::AnalyticCompatible),
        "stop-on-failure" => Ok(DelayConvention::StopOnFailure),
        other => Err(CliError::Usage(format!(
            "delay_convention must be analytic-compatible or stop-on-failure, got {other:?}"
        ))),
    }
}

fn convention_name(c: DelayConvention) -> &'static str {
    match c {
        DelayConvention::AnalyticCompatible => "analytic-compatible",
        DelayConvention::StopOnFailure => "stop-on-failure",
    }
}

impl RunConfig {
    /// Applies one `key=value` assignment; unknown keys are rejected.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "lambda" => self.lambda = parse_f64(key, value)?,
            "p" => self.p = parse_f64(key, value)?,
            "alpha" => self.alpha = parse_f64(key, value)?,
            "beta" => self.beta = parse_f64(key, value)?,
            "d" => self.d = parse_f64(key, value)?,
            "hops" => self.hops = Some(parse_list(key, value)?),
            "budgets" => self.budgets = Some(parse_list(key, value)?),
            "D" => {
                self.total_budget = Some(value.parse().map_err(|_| {
                    CliError::Usage(format!("key D: expected a non-negative integer, got {value:?}"))
                })?)
            }
            "N_max" => {
                self.n_max = value.parse().map_err(|_| {
                    CliError::Usage(format!("key N_max: expected a positive integer, got {value:?}"))
                })?
            }
            "trials" => {
                self.trials = value.parse().map_err(|_| {
                    CliError::Usage(format!("key trials: expected an integer, got {value:?}"))
                })?
            }
            "seed" => {
                self.seed = value.parse().map_err(|_| {
                    CliError::Usage(format!("key seed: expected an integer, got {value:?}"))
                })?
            }
            "quad_rel_tol" => self.quad_rel_tol = parse_f64(key, value)?,
            "delay_convention" => self.delay_convention = parse_convention(value)?,
            "region_radius" => self.region_radius = Some(parse_f64(key, value)?),
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(CliError::Usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Parses a config file: `key=value` lines, `#` comments, blank lines.
    pub fn parse_file(text: &str) -> Result<Self, CliError> {
        let mut config = Self::default();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("line {}: expected key=value, got {line:?}", number + 1))
            })?;
            config.apply(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Serializes the configuration; `parse_file` of the result reproduces
    /// `self` exactly.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lambda={}", self.lambda);
        let _ = writeln!(out, "p={}", self.p);
        let _ = writeln!(out, "alpha={}", self.alpha);
        let _ = writeln!(out, "beta={}", self.beta);
        let _ = writeln!(out, "d={}", self.d);
        if let Some(hops) = &self.hops {
            let items: Vec<String> = hops.iter().map(|h| h.to_string()).collect();
            let _ = writeln!(out, "hops={}", items.join(","));
        }
        if let Some(budgets) = &self.budgets {
            let items: Vec<String> = budgets.iter().map(|b| b.to_string()).collect();
            let _ = writeln!(out, "budgets={}", items.join(","));
        }
        if let Some(d) = self.total_budget {
            let _ = writeln!(out, "D={d}");
        }
        let _ = writeln!(out, "N_max={}", self.n_max);
        let _ = writeln!(out, "trials={}", self.trials);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "quad_rel_tol={}", self.quad_rel_tol);
        let _ = writeln!(out, "delay_convention={}", convention_name(self.delay_convention));
        if let Some(r) = self.region_radius {
            let _ = writeln!(out, "region_radius={r}");
        }
        if let Some(path) = &self.output {
            let _ = writeln!(out, "output={}", path.display());
        }
        out
    }

    fn params(&self) -> Result<NetworkParams, CliError> {
        NetworkParams::new(self.lambda, self.p, self.alpha, self.beta)
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    fn quadrature(&self) -> Result<QuadratureSpec, CliError> {
        let abs_tol = (self.quad_rel_tol * 1e-3).min(1e-12);
        QuadratureSpec::new(self.quad_rel_tol, abs_tol, 4096)
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    fn sim_config(&self) -> SimConfig {
        SimConfig {
            trials: self.trials,
            seed: self.seed,
            region_radius: self.region_radius,
            delay_convention: self.delay_convention,
            confidence: 0.95,
            ..SimConfig::default()
        }
    }

    /// Per-hop distances: explicit `hops`, or the single hop `d`.
    fn hop_distances(&self) -> Vec<f64> {
        self.hops.clone().unwrap_or_else(|| vec![self.d])
    }

    fn require_total_budget(&self, command: &str) -> Result<u32, CliError> {
        self.total_budget
            .ok_or_else(|| CliError::Usage(format!("{command} requires the D key (total budget)")))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tdr",
    about = "Throughput, delay, and reliability of ARQ links in Poisson interference fields",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Success probability vs retransmission budget: exact, bounds, simulated.
    DrCurve(CommandArgs),
    /// Two-hop transmission capacity vs the first hop's budget share.
    TcVsD1(CommandArgs),
    /// Capacity lower bound vs hop count for equidistant relays.
    TcVsHops(CommandArgs),
    /// Optimal per-hop budget allocation (and optionally the hop-count scan).
    Optimize(OptimizeArgs),
    /// Monte Carlo estimates with analytic cross-checks.
    Simulate(CommandArgs),
}

#[derive(Debug, Args)]
struct CommandArgs {
    /// Plain-text key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    /// Comma-separated per-hop distances.
    #[arg(long, allow_hyphen_values = true)]
    hops: Option<String>,
    /// Comma-separated per-hop budgets.
    #[arg(long)]
    budgets: Option<String>,
    /// End-to-end retransmission budget.
    #[arg(long = "D")]
    total_budget: Option<u32>,
    #[arg(long = "N_max")]
    n_max: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "quad_rel_tol", alias = "quad-rel-tol")]
    quad_rel_tol: Option<f64>,
    /// analytic-compatible or stop-on-failure.
    #[arg(long = "delay_convention", alias = "delay-convention")]
    delay_convention: Option<String>,
    /// Simulation truncation radius in meters (auto-derived when omitted).
    #[arg(long = "region_radius", alias = "region-radius")]
    region_radius: Option<f64>,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    emit_plot: bool,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: CommandArgs,
    /// Append the equidistant hop-count scan to the report.
    #[arg(long)]
    hop_table: bool,
}

impl CommandArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::parse_file(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        // Environment seed sits between the file and explicit flags.
        if let Ok(seed) = std::env::var("SEED") {
            config.apply("seed", &seed)?;
        }
        if let Some(v) = self.lambda {
            config.lambda = v;
        }
        if let Some(v) = self.p {
            config.p = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.beta {
            config.beta = v;
        }
        if let Some(v) = self.d {
            config.d = v;
        }
        if let Some(v) = &self.hops {
            config.apply("hops", v)?;
        }
        if let Some(v) = &self.budgets {
            config.apply("budgets", v)?;
        }
        if let Some(v) = self.total_budget {
            config.total_budget = Some(v);
        }
        if let Some(v) = self.n_max {
            config.n_max = v;
        }
        if let Some(v) = self.trials {
            config.trials = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.quad_rel_tol {
            config.quad_rel_tol = v;
        }
        if let Some(v) = &self.delay_convention {
            config.delay_convention = parse_convention(v)?;
        }
        if let Some(v) = self.region_radius {
            config.region_radius = Some(v);
        }
        if let Some(v) = &self.output {
            config.output = Some(v.clone());
        }
        Ok(config)
    }
}

/// Entry point used by the binary; parses `args` and runs the command.
pub fn run_from_args<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        // clap renders its own rich message; preserve it.
        let _ = e.print();
        CliError::Usage(String::new())
    })?;
    match cli.command {
        Command::DrCurve(args) => cmd_dr_curve(&args.resolve()?, args.emit_plot),
        Command::TcVsD1(args) => cmd_tc_vs_d1(&args.resolve()?, args.emit_plot),
        Command::TcVsHops(args) => cmd_tc_vs_hops(&args.resolve()?, args.emit_plot),
        Command::Optimize(args) => cmd_optimize(&args.common.resolve()?, args.hop_table),
        Command::Simulate(args) => cmd_simulate(&args.resolve()?, args.emit_plot),
    }
}

fn fmt_float(x: f64) -> String {
    format!("{x:.12e}")
}

struct CsvBuilder {
    text: String,
}

impl CsvBuilder {
    fn new(command: &str, config: &RunConfig, columns: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# schema=tdr.{command}.v{SCHEMA_VERSION}");
        for line in config.to_config_string().lines() {
            let _ = writeln!(text, "# {line}");
        }
        let _ = writeln!(text, "{}", columns.join(","));
        Self { text }
    }

    fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    fn finish(self, config: &RunConfig, plot: Option<String>) -> Result<(), CliError> {
        match &config.output {
            Some(path) => {
                std::fs::write(path, self.text.as_bytes())?;
                if let Some(script) = plot {
                    std::fs::write(path.with_extension("gp"), script.as_bytes())?;
                }
            }
            None => {
                if plot.is_some() {
                    log::warn!("--emit-plot needs an output path; skipping the plot script");
                }
                print!("{}", self.text);
            }
        }
        Ok(())
    }
}

fn plot_script(csv: &RunConfig, xlabel: &str, ylabel: &str, series: &[(usize, &str)]) -> Option<String> {
    let path = csv.output.as_ref()?;
    let name = path.file_name()?.to_string_lossy().into_owned();
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator \",\"");
    let _ = writeln!(s, "set datafile commentschars \"#\"");
    let _ = writeln!(s, "set key outside");
    let _ = writeln!(s, "set xlabel \"{xlabel}\"");
    let _ = writeln!(s, "set ylabel \"{ylabel}\"");
    let pieces: Vec<String> = series
        .iter()
        .map(|(column, title)| {
            format!("\"{name}\" using 1:{column} with linespoints title \"{title}\"")
        })
        .collect();
    let _ = writeln!(s, "plot {}", pieces.join(", \\\n     "));
    Some(s)
}

fn stability_flag(lost_digits: f64) -> &'static str {
    if lost_digits > crate::numerics::UNSTABLE_LOST_DIGITS {
        "unstable"
    } else {
        "ok"
    }
}

/// Success probability vs budget for a one- or two-hop route: exact value,
/// both bounds, and the simulator with its confidence interval.
fn cmd_dr_curve(config: &RunConfig, emit_plot: bool) -> Result<(), CliError> {
    let params = config.params()?;
    let quad = config.quadrature()?;
    let max_budget = config.require_total_budget("dr-curve")?;
    let distances = config.hop_distances();
    let columns = ["D", "exact", "upper", "lower", "simulated", "ci_lo", "ci_hi", "flag"];
    let mut csv = CsvBuilder::new("dr-curve", config, &columns);

    match distances.len() {
        1 => {
            let d = distances[0];
            let sim_points = sim::sweep_single_hop(d, max_budget, &params, &config.sim_config())?;
            for budget in 0..=max_budget {
                let exact = analytic::success_prob_single(budget, d, &params, &quad)?;
                let pair = bounds::bracket(budget, d, &params, &quad)?;
                let sim_est = &sim_points[budget as usize];
                csv.row(&[
                    budget.to_string(),
                    fmt_float(exact.value),
                    fmt_float(pair.value.upper),
                    fmt_float(pair.value.lower),
                    fmt_float(sim_est.p_success.estimate),
                    fmt_float(sim_est.p_success.low),
                    fmt_float(sim_est.p_success.high),
                    stability_flag(exact.lost_digits.max(pair.lost_digits)).to_string(),
                ]);
            }
        }
        2 => {
            let (d1, d2) = (distances[0], distances[1]);
            for budget in 0..=max_budget {
                // Split each total optimally, as the route operator would.
                let alloc = optimize::allocate_budgets(&distances, budget, &params)?;
                let (b1, b2) = (alloc.integer_budgets[0], alloc.integer_budgets[1]);
                let exact =
                    analytic::success_prob_two_hop_exact(b1, b2, d1, d2, &params, &quad)?;
                let plan = HopPlan::new(distances.clone(), alloc.integer_budgets.clone())
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                let tightness = bounds::plan_tightness(&plan, &params, &quad)?;
                let lower = bounds::success_lower_bound_multi(&plan, &params, tightness.value);
                // No product-form upper bound exists across hops; the
                // intersection bound (each hop alone must succeed) is the
                // reported upper envelope.
                let upper = bounds::success_upper_bound_single(b1, d1, &params)
                    .min(bounds::success_upper_bound_single(b2, d2, &params));
                let est = sim::estimate_success(&plan, &params, &config.sim_config())?;
                csv.row(&[
                    budget.to_string(),
                    fmt_float(exact.value),
                    fmt_float(upper),
                    fmt_float(lower),
                    fmt_float(est.p_success.estimate),
                    fmt_float(est.p_success.low),
                    fmt_float(est.p_success.high),
                    stability_flag(exact.lost_digits.max(tightness.lost_digits)).to_string(),
                ]);
                csv.comment(&format!("split D={budget}: budgets={b1}|{b2}"));
            }
        }
        n => {
            return Err(CliError::Usage(format!(
                "dr-curve supports 1 or 2 hops, got {n}"
            )))
        }
    }

    let plot = emit_plot.then(|| {
        plot_script(
            config,
            "D",
            "success probability",
            &[(2, "exact"), (3, "upper"), (4, "lower"), (5, "simulated")],
        )
    });
    csv.finish(config, plot.flatten())
}

/// Two-hop capacity against the first hop's budget share at fixed total.
fn cmd_tc_vs_d1(config: &RunConfig, emit_plot: bool) -> Result<(), CliError> {
    let params = config.params()?;
    let quad = config.quadrature()?;
    let total = config.require_total_budget("tc-vs-d1")?;
    let distances = config.hops.clone().unwrap_or_else(|| vec![config.d / 2.0; 2]);
    if distances.len() != 2 {
        return Err(CliError::Usage(format!(
            "tc-vs-d1 needs exactly two hops, got {}",
            distances.len()
        )));
    }
    let (d1, d2) = (distances[0], distances[1]);

    let sim_points = sim::sweep_two_hop_splits(d1, d2, total, &params, &config.sim_config())?;
    let columns = ["D1", "D2", "exact_tc", "lb_tc", "sim_tc", "ci_lo", "ci_hi", "flag"];
    let mut csv = CsvBuilder::new("tc-vs-d1", config, &columns);

    let mut best: Vec<(f64, u32)> = vec![(f64::NEG_INFINITY, 0); 3];
    for b1 in 0..=total {
        let b2 = total - b1;
        let exact =
            analytic::transmission_capacity_two_hop_exact(b1, b2, d1, d2, &params, &quad)?;
        let plan = HopPlan::new(vec![d1, d2], vec![b1, b2])
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let tightness = bounds::plan_tightness(&plan, &params, &quad)?;
        let lb = bounds::tc_lower_bound(&plan, &params, tightness.value);
        let est = &sim_points[b1 as usize];
        // Capacity CI from the Wilson interval on success at fixed delay.
        let scale = params.density_rate() / est.mean_delay.estimate;
        for (slot, value) in
            [exact.value.capacity, lb.capacity, est.capacity].into_iter().enumerate()
        {
            if value > best[slot].0 {
                best[slot] = (value, b1);
            }
        }
        csv.row(&[
            b1.to_string(),
            b2.to_string(),
            fmt_float(exact.value.capacity),
            fmt_float(lb.capacity),
            fmt_float(est.capacity),
            fmt_float(est.p_success.low * scale),
            fmt_float(est.p_success.high * scale),
            stability_flag(exact.lost_digits.max(tightness.lost_digits)).to_string(),
        ]);
    }
    csv.comment(&format!("argmax exact_tc D1={}", best[0].1));
    csv.comment(&format!("argmax lb_tc D1={}", best[1].1));
    csv.comment(&format!("argmax sim_tc D1={}", best[2].1));

    let plot = emit_plot.then(|| {
        plot_script(
            config,
            "D1",
            "transmission capacity",
            &[(3, "exact"), (4, "lower bound"), (5, "simulated")],
        )
    });
    csv.finish(config, plot.flatten())
}

/// Capacity lower bound vs hop count with equidistant relays and floor
/// budgets, plus the sparse-regime approximation and a simulation overlay.
fn cmd_tc_vs_hops(config: &RunConfig, emit_plot: bool) -> Result<(), CliError> {
    let params = config.params()?;
    let quad = config.quadrature()?;
    let total = config.require_total_budget("tc-vs-hops")?;
    if config.n_max < 1 {
        return Err(CliError::Usage("N_max must be at least 1".into()));
    }
    let d_total = config.d;
    let tightness = bounds::tightness_constant(total, d_total, &params, &quad)?;
    let scan = optimize::optimal_hop_count(d_total, total, &params, tightness.value, config.n_max);

    let columns =
        ["N", "per_hop_budget", "lb_tc", "lb_tc_spread", "sim_tc", "ci_lo", "ci_hi", "sparse_approx"];
    let mut csv = CsvBuilder::new("tc-vs-hops", config, &columns);
    let mut best_sim = (f64::NEG_INFINITY, 1usize);
    for row in &scan.rows {
        let plan = HopPlan::equidistant(d_total, row.hops, row.per_hop_budget)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let est = sim::estimate_success(&plan, &params, &config.sim_config())?;
        let sparse = optimize::sparse_tc_approximation(row.hops, d_total, total, &params);
        let scale = params.density_rate() / est.mean_delay.estimate;
        if est.capacity > best_sim.0 {
            best_sim = (est.capacity, row.hops);
        }
        csv.row(&[
            row.hops.to_string(),
            row.per_hop_budget.to_string(),
            fmt_float(row.bound.capacity),
            fmt_float(row.bound_remainder_spread.capacity),
            fmt_float(est.capacity),
            fmt_float(est.p_success.low * scale),
            fmt_float(est.p_success.high * scale),
            fmt_float(sparse.value),
        ]);
    }
    csv.comment(&format!("argmax lb_tc N={}", scan.best_hops));
    csv.comment(&format!("argmax sim_tc N={}", best_sim.1));
    csv.comment(&format!("tightness_c={}", fmt_float(tightness.value)));

    let plot = emit_plot.then(|| {
        plot_script(
            config,
            "N",
            "transmission capacity",
            &[(3, "lower bound"), (5, "simulated"), (8, "sparse approx")],
        )
    });
    csv.finish(config, plot.flatten())
}

/// Budget allocation report: continuous and integer budgets, the multiplier,
/// and the objective, echoed as JSON lines; optionally the hop-count table.
fn cmd_optimize(config: &RunConfig, hop_table: bool) -> Result<(), CliError> {
    let params = config.params()?;
    let quad = config.quadrature()?;
    let total = config.require_total_budget("optimize")?;
    let distances = config.hop_distances();
    let alloc = optimize::allocate_budgets(&distances, total, &params)?;

    let mut out = String::new();
    let _ = writeln!(out, "distances: {distances:?}");
    let _ = writeln!(out, "total budget: {total}");
    let _ = writeln!(
        out,
        "continuous budgets: [{}]",
        alloc.continuous_budgets.iter().map(|b| format!("{b:.6}")).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(out, "integer budgets: {:?}", alloc.integer_budgets);
    let _ = writeln!(out, "multiplier: {:.9e}", alloc.multiplier);
    let _ = writeln!(out, "objective: {:.9e}", alloc.objective);

    let mut json_lines = vec![serde_json::to_string(&alloc)
        .map_err(|e| CliError::Usage(format!("serialization: {e}")))?];

    if hop_table {
        let tightness = bounds::tightness_constant(total, config.d, &params, &quad)?;
        let scan =
            optimize::optimal_hop_count(config.d, total, &params, tightness.value, config.n_max);
        let _ = writeln!(out, "hop-count scan (c={:.6}):", tightness.value);
        for row in &scan.rows {
            let _ = writeln!(
                out,
                "  N={} per-hop D={} lb_tc={:.9e}",
                row.hops, row.per_hop_budget, row.bound.capacity
            );
            json_lines.push(
                serde_json::to_string(row)
                    .map_err(|e| CliError::Usage(format!("serialization: {e}")))?,
            );
        }
        let _ = writeln!(out, "best N: {}", scan.best_hops);
    }

    print!("{out}");
    let json_blob = json_lines.join("\n") + "\n";
    match &config.output {
        Some(path) => std::fs::write(path, json_blob)?,
        None => print!("{json_blob}"),
    }
    Ok(())
}

/// Monte Carlo sweep: one row per sweep point, with the exact value and an
/// in-interval check wherever the analytic side is available.
fn cmd_simulate(config: &RunConfig, emit_plot: bool) -> Result<(), CliError> {
    let params = config.params()?;
    let quad = config.quadrature()?;
    let columns = [
        "point", "budgets", "p_success", "ci_lo", "ci_hi", "mean_delay", "delay_lo", "delay_hi",
        "capacity", "exact", "within_ci",
    ];
    let mut csv = CsvBuilder::new("simulate", config, &columns);
    let distances = config.hop_distances();

    struct Row {
        point: String,
        budgets: Vec<u32>,
        estimate: sim::SimEstimate,
        exact: Option<f64>,
    }
    let mut rows: Vec<Row> = Vec::new();

    if let Some(budgets) = &config.budgets {
        if budgets.len() != distances.len() {
            return Err(CliError::Usage(format!(
                "budgets ({}) and hops ({}) differ in length",
                budgets.len(),
                distances.len()
            )));
        }
        let plan = HopPlan::new(distances.clone(), budgets.clone())
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let estimate = sim::estimate_success(&plan, &params, &config.sim_config())?;
        let exact = match distances.len() {
            1 => Some(analytic::success_prob_single(budgets[0], distances[0], &params, &quad)?.value),
            2 => Some(
                analytic::success_prob_two_hop_exact(
                    budgets[0], budgets[1], distances[0], distances[1], &params, &quad,
                )?
                .value,
            ),
            _ => None,
        };
        rows.push(Row { point: "plan".into(), budgets: budgets.clone(), estimate, exact });
    } else if let Some(max_budget) = config.total_budget {
        if distances.len() != 1 {
            return Err(CliError::Usage(
                "a D sweep needs a single-hop route; give budgets for multi-hop plans".into(),
            ));
        }
        let d = distances[0];
        let sweep = sim::sweep_single_hop(d, max_budget, &params, &config.sim_config())?;
        for (budget, estimate) in sweep.into_iter().enumerate() {
            let exact =
                analytic::success_prob_single(budget as u32, d, &params, &quad)?.value;
            rows.push(Row {
                point: format!("D={budget}"),
                budgets: vec![budget as u32],
                estimate,
                exact: Some(exact),
            });
        }
    }
    // Neither budgets nor D: an empty sweep, header-only output.

    let mut all_within = true;
    let mut any_exact = false;
    for row in &rows {
        let (within_text, within) = match row.exact {
            Some(exact) => {
                any_exact = true;
                let inside =
                    exact >= row.estimate.p_success.low && exact <= row.estimate.p_success.high;
                (if inside { "yes" } else { "no" }.to_string(), inside)
            }
            None => ("n/a".to_string(), true),
        };
        all_within &= within;
        csv.row(&[
            row.point.clone(),
            row.budgets.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("|"),
            fmt_float(row.estimate.p_success.estimate),
            fmt_float(row.estimate.p_success.low),
            fmt_float(row.estimate.p_success.high),
            fmt_float(row.estimate.mean_delay.estimate),
            fmt_float(row.estimate.mean_delay.low),
            fmt_float(row.estimate.mean_delay.high),
            fmt_float(row.estimate.capacity),
            row.exact.map(fmt_float).unwrap_or_else(|| "".into()),
            within_text,
        ]);
    }
    if any_exact {
        csv.comment(&format!("analytic within CI: {}", if all_within { "yes" } else { "no" }));
    }

    let plot = emit_plot.then(|| {
        plot_script(config, "point", "success probability", &[(3, "simulated"), (10, "exact")])
    });
    csv.finish(config, plot.flatten())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_serialization() {
        let config = RunConfig {
            lambda: 0.25,
            hops: Some(vec![0.5, 1.5]),
            budgets: Some(vec![1, 3]),
            total_budget: Some(4),
            quad_rel_tol: 1e-7,
            delay_convention: DelayConvention::StopOnFailure,
            region_radius: Some(60.0),
            output: Some(PathBuf::from("out.csv")),
            ..RunConfig::default()
        };
        let text = config.to_config_string();
        let parsed = RunConfig::parse_file(&text).unwrap();
        assert_eq!(parsed, config);

        // Defaults round-trip too.
        let default = RunConfig::default();
        assert_eq!(RunConfig::parse_file(&default.to_config_string()).unwrap(), default);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse_file("lambda=0.1\nbogus=3\n").unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let parsed = RunConfig::parse_file("# header\n\nlambda=0.2\n  # indented comment\n").unwrap();
        assert_eq!(parsed.lambda, 0.2);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(RunConfig::parse_file("lambda 0.2\n").is_err());
        assert!(RunConfig::parse_file("lambda=abc\n").is_err());
        assert!(RunConfig::parse_file("budgets=1,x\n").is_err());
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Infeasible("x".into()).exit_code(), 3);
        assert_eq!(CliError::Numeric("x".into()).exit_code(), 4);

        let quad_err: CliError = crate::Error::Quadrature(
            crate::quadrature::QuadratureError::ToleranceNotMet {
                achieved: 1.0,
                requested: 0.5,
                subdivisions: 1,
            },
        )
        .into();
        assert_eq!(quad_err.exit_code(), 4);
        let infeasible: CliError =
            crate::Error::InfeasibleAllocation { reason: "no hops".into() }.into();
        assert_eq!(infeasible.exit_code(), 3);
    }

    #[test]
    fn empty_hops_list_parses_to_empty() {
        let parsed = RunConfig::parse_file("hops=\n").unwrap();
        assert_eq!(parsed.hops, Some(vec![]));
    }
}
