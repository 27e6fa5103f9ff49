//! The `xpoint` command-line tool.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use xpoint_core::experiments::{SweepMode, SweepRow};
use xpoint_core::pagerank::{self, DEFAULT_P};
use xpoint_core::{fdsim, linalg, EigenSystem, OpAmpParams, SimConfig};

use crate::error::Error;
use crate::harness::{self, SweepSpec};
use crate::io::{self, RankFile, Summary};
use crate::manifest::{self, RunManifest};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NO_CONVERGENCE: u8 = 2;
pub const EXIT_INSTABILITY: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "xpoint", version, about = "Crosspoint eigenvector circuit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one matrix and write its trace and summary.
    Simulate(SimulateArgs),
    /// Run a delta, size or variation campaign.
    Sweep(SweepArgs),
    /// Rank the pages of a citation edge list.
    Pagerank(PagerankArgs),
    /// Repeat the run recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
struct CircuitArgs {
    /// Finite-difference step L0 * omega0 * dt.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Op-amp DC open-loop gain.
    #[arg(long, default_value_t = OpAmpParams::DEFAULT_L0)]
    l0: f64,
    /// Op-amp gain-bandwidth product in Hz.
    #[arg(long = "gbw-hz", default_value_t = OpAmpParams::DEFAULT_GBW_HZ)]
    gbw_hz: f64,
    /// Supply rail in volts.
    #[arg(long, default_value_t = OpAmpParams::DEFAULT_V_SUPP)]
    vsupp: f64,
    /// Initial output voltage.
    #[arg(long, default_value_t = 1e-3)]
    x0: f64,
    /// Simulation horizon in seconds.
    #[arg(long, default_value_t = 1e-3)]
    tmax: f64,
    /// Relative distance to the steady state that counts as computed.
    #[arg(long = "conv-tol", default_value_t = 1e-3)]
    conv_tol: f64,
    /// Settling window after the first saturation, in multiples of its time.
    #[arg(long = "settle-factor", default_value_t = 5.0)]
    settle_factor: f64,
    /// Steps between recorded samples (default: at most 10000 samples).
    #[arg(long)]
    stride: Option<usize>,
}

impl CircuitArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            alpha: self.alpha,
            x0: self.x0,
            t_max: self.tmax,
            conv_tol: self.conv_tol,
            record_stride: self.stride,
            settle_factor: self.settle_factor,
        }
    }

    fn params(&self) -> xpoint_core::Result<OpAmpParams> {
        OpAmpParams::from_gbw_hz(self.l0, self.gbw_hz, self.vsupp)
    }

    fn record(&self, map: &mut BTreeMap<String, Value>) {
        map.insert("alpha".into(), json!(self.alpha));
        map.insert("l0".into(), json!(self.l0));
        map.insert("gbw-hz".into(), json!(self.gbw_hz));
        map.insert("vsupp".into(), json!(self.vsupp));
        map.insert("x0".into(), json!(self.x0));
        map.insert("tmax".into(), json!(self.tmax));
        map.insert("conv-tol".into(), json!(self.conv_tol));
        map.insert("settle-factor".into(), json!(self.settle_factor));
        map.insert("stride".into(), json!(self.stride));
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, env = "XPOINT_OUT_DIR", default_value = "xpoint-out")]
    out: PathBuf,
    /// Print a machine-readable summary on standard output.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Matrix CSV (no header), or a system JSON with its own mismatch and amplifier.
    matrix: PathBuf,
    /// Uniform eigenvalue mismatch.
    #[arg(long, default_value_t = 0.01, allow_hyphen_values = true)]
    delta: f64,
    #[command(flatten)]
    circuit: CircuitArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Delta,
    Size,
    Variation,
}

impl Mode {
    fn sweep_mode(self) -> SweepMode {
        match self {
            Mode::Delta => SweepMode::Delta,
            Mode::Size => SweepMode::Size,
            Mode::Variation => SweepMode::Variation,
        }
    }
}

/// Matrix sizes: `3..30` (inclusive), `3..30:3` (with step) or `3,6,9`.
#[derive(Debug, Clone, PartialEq)]
struct Sizes(Vec<usize>);

impl FromStr for Sizes {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("'{t}' is not a size"));
        let sizes = if let Some((lo, rest)) = s.split_once("..") {
            let (hi, step) = match rest.split_once(':') {
                Some((hi, step)) => (num(hi)?, num(step)?),
                None => (num(rest)?, 1),
            };
            if step == 0 {
                return Err("step must be positive".into());
            }
            (num(lo)?..=hi).step_by(step).collect()
        } else {
            s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(format!("'{s}' gives no usable sizes"));
        }
        Ok(Sizes(sizes))
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Matrix CSV for delta and variation sweeps.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Sizes for the size sweep.
    #[arg(long, default_value = "3..30")]
    sizes: Sizes,
    /// Comma-separated mismatches (delta and size sweeps).
    #[arg(long, value_delimiter = ',')]
    deltas: Vec<f64>,
    /// Random matrices per (size, delta), or variation trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed for trial seeds.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Upper end of the per-amplifier mismatch range (variation sweep).
    #[arg(long = "delta-max", default_value_t = 0.02)]
    delta_max: f64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Discard rows from an earlier run in the output directory.
    #[arg(long)]
    fresh: bool,
    #[command(flatten)]
    circuit: CircuitArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct PagerankArgs {
    /// Edge list: one "from to" pair of 1-based page numbers per line.
    edges: PathBuf,
    /// Keep only the first N pages.
    #[arg(long = "subset-n")]
    subset_n: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Random-walk probability.
    #[arg(long, default_value_t = DEFAULT_P)]
    p: f64,
    /// Pages to print.
    #[arg(long, default_value_t = 10)]
    topk: usize,
    #[command(flatten)]
    circuit: CircuitArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Output directory for the repeated run.
    #[arg(long)]
    out: PathBuf,
}

/// Runs the tool on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Pagerank(a) => rank(&a),
        Command::Replay(a) => replay(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure_code(&e))
        }
    }
}

fn failure_code(e: &anyhow::Error) -> u8 {
    let model = e.chain().find_map(|c| match c.downcast_ref::<Error>() {
        Some(Error::Model(m)) => Some(m),
        _ => c.downcast_ref::<xpoint_core::Error>(),
    });
    match model {
        Some(xpoint_core::Error::Instability { .. } | xpoint_core::Error::NonFinite) => EXIT_INSTABILITY,
        _ => EXIT_USAGE,
    }
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<u8> {
    let is_system = a.matrix.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let sys = if is_system {
        io::read_system(&a.matrix)?
    } else {
        let m = io::read_matrix(&a.matrix)?;
        EigenSystem::from_matrix(m, a.delta, a.circuit.params()?).map_err(Error::from)?
    };
    let cfg = a.circuit.config();
    let oracle = xpoint_core::circuit::dominant(sys.coefficients()).map_err(Error::from)?;
    let trace = fdsim::simulate(&sys, &cfg).map_err(Error::from)?;
    let lambda_h = sys.spectral_abscissa().map_err(Error::from)?;
    let summary = Summary {
        computing_time_s: trace.computing_time,
        epsilon: linalg::solution_error(&trace.steady_state, &oracle.vector).map_err(Error::from)?,
        lambda_h,
        saturated_index: trace.saturated_index.map(|k| k + 1),
    };

    let out = &a.output.out;
    prepare_out(out)?;
    let mut params = BTreeMap::new();
    if !is_system {
        params.insert("delta".into(), json!(a.delta));
    }
    a.circuit.record(&mut params);
    let mut m = RunManifest::new("simulate", params, None);
    m.add_input("matrix", &a.matrix)?;
    m.outputs = vec!["trace.csv".into(), "summary.json".into()];
    io::write_trace(&out.join("trace.csv"), &trace)?;
    io::write_json(&out.join("summary.json"), &summary)?;
    m.save(out)?;

    if a.output.json {
        println!("{}", serde_json::to_string(&summary)?);
    } else {
        match summary.computing_time_s {
            Some(t) => println!(
                "computed in {:.3} us, epsilon {:.3e}, lambda_h {:.4e}",
                t * 1e6,
                summary.epsilon,
                lambda_h
            ),
            None => println!("no convergence within {} s (lambda_h {:.4e})", cfg.t_max, lambda_h),
        }
    }
    Ok(if summary.computing_time_s.is_some() { EXIT_OK } else { EXIT_NO_CONVERGENCE })
}

fn sweep(a: &SweepArgs) -> anyhow::Result<u8> {
    let mode = a.mode.sweep_mode();
    let matrix = match (&a.matrix, mode) {
        (Some(path), _) => Some(io::read_matrix(path)?),
        (None, SweepMode::Size) => None,
        (None, _) => bail!("--mode {} needs --matrix", mode.as_str()),
    };
    let deltas = match (a.deltas.is_empty(), mode) {
        (false, _) => a.deltas.clone(),
        (true, SweepMode::Delta) => vec![0.003, 0.006, 0.012, 0.024, 0.048, 0.06],
        (true, _) => vec![0.003, 0.01, 0.02, 0.04],
    };
    let trials = a.trials.unwrap_or(if mode == SweepMode::Variation { 10 } else { 100 });
    let spec = SweepSpec {
        mode,
        matrix,
        sizes: a.sizes.0.clone(),
        deltas,
        trials,
        base_seed: a.seed,
        delta_max: a.delta_max,
        cfg: a.circuit.config(),
        params: a.circuit.params()?,
    };

    let mut params = BTreeMap::new();
    params.insert("mode".into(), json!(mode.as_str()));
    match mode {
        SweepMode::Delta => {
            params.insert("deltas".into(), json!(spec.deltas));
        }
        SweepMode::Size => {
            params.insert("sizes".into(), json!(spec.sizes));
            params.insert("deltas".into(), json!(spec.deltas));
            params.insert("trials".into(), json!(trials));
        }
        SweepMode::Variation => {
            params.insert("delta-max".into(), json!(spec.delta_max));
            params.insert("trials".into(), json!(trials));
        }
    }
    if mode != SweepMode::Delta {
        params.insert("seed".into(), json!(a.seed));
    }
    a.circuit.record(&mut params);
    let mut m = RunManifest::new("sweep", params, (mode != SweepMode::Delta).then_some(a.seed));
    if let Some(path) = &a.matrix {
        m.add_input("--matrix", path)?;
    }
    m.outputs = vec!["sweep.csv".into(), "sweep.json".into()];

    let out = &a.output.out;
    prepare_out(out)?;
    let rows_path = out.join("sweep.csv");
    let manifest_path = out.join(manifest::FILE_NAME);
    if rows_path.exists() {
        let resumable = manifest_path.exists() && RunManifest::load(&manifest_path)?.same_run(&m);
        if a.fresh {
            fs::remove_file(&rows_path).with_context(|| format!("removing {}", rows_path.display()))?;
        } else if resumable {
            eprintln!("resuming from {}", rows_path.display());
        } else {
            bail!(
                "{} holds rows from a different run; pass --fresh to discard them",
                rows_path.display()
            );
        }
    }
    m.save(out)?;

    if let Some(threads) = a.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    let progress = |k: usize, total: usize, row: &SweepRow| {
        let time = row
            .computing_time
            .map_or_else(|| "-".to_string(), |t| format!("{:.3} us", t * 1e6));
        let trial = row.trial.map_or_else(String::new, |t| format!(" trial {t}"));
        eprintln!("[{k}/{total}] N={} delta={}{trial}: {time}", row.n, row.delta);
    };
    let report = harness::run_sweep(&spec, Some(out), Some(&progress))?;

    if a.output.json {
        println!("{}", serde_json::to_string(&io::ReportFile::from(&report))?);
    } else {
        for agg in &report.aggregates {
            let t = agg.computing_time.map_or("-".to_string(), |s| format!("{:.3} us", s.mean * 1e6));
            let e = agg.epsilon.map_or("-".to_string(), |s| format!("{:.3e}", s.mean));
            let varied = if agg.varied { " varied" } else { "" };
            println!("N={} delta={}{varied}: time {t}, epsilon {e}, rows {}", agg.n, agg.delta, agg.rows);
        }
    }
    let failures: usize = report.aggregates.iter().map(|a| a.failures).sum();
    if failures > 0 {
        eprintln!("{failures} trial(s) failed; see the error column of sweep.csv");
    }
    Ok(EXIT_OK)
}

fn rank(a: &PagerankArgs) -> anyhow::Result<u8> {
    let mut graph = io::load_edge_list(&a.edges)?;
    if let Some(n) = a.subset_n {
        graph = graph.subset(n).map_err(Error::from)?;
    }
    let t = pagerank::transition_matrix(&graph, a.p).map_err(Error::from)?;
    let cfg = a.circuit.config();
    let result = pagerank::rank(&t, a.delta, &cfg, a.circuit.params()?).map_err(Error::from)?;

    let out = &a.output.out;
    prepare_out(out)?;
    let mut params = BTreeMap::new();
    params.insert("subset-n".into(), json!(a.subset_n));
    params.insert("delta".into(), json!(a.delta));
    params.insert("p".into(), json!(a.p));
    params.insert("topk".into(), json!(a.topk));
    a.circuit.record(&mut params);
    let mut m = RunManifest::new("pagerank", params, None);
    m.add_input("edges", &a.edges)?;
    m.outputs = vec!["rank.json".into(), "rank.csv".into()];
    let file = RankFile::from(&result);
    io::write_json(&out.join("rank.json"), &file)?;
    io::write_rank_csv(&out.join("rank.csv"), &result)?;
    m.save(out)?;

    if a.output.json {
        println!(
            "{}",
            serde_json::to_string(&json!({
                "pages": graph.n(),
                "links": graph.link_count(),
                "computing_time_s": result.computing_time,
                "epsilon": result.epsilon,
                "top": file.order.iter().take(a.topk).collect::<Vec<_>>(),
            }))?
        );
    } else {
        println!("{} pages, {} links", graph.n(), graph.link_count());
        match result.computing_time {
            Some(t) => println!("computed in {:.3} us, epsilon {:.3e}", t * 1e6, result.epsilon),
            None => println!("no convergence within {} s", cfg.t_max),
        }
        for (rank, &page) in result.order.iter().take(a.topk).enumerate() {
            println!("{:>4}  page {:>5}  {:.6}", rank + 1, page + 1, result.scores[page]);
        }
    }
    Ok(if result.computing_time.is_some() { EXIT_OK } else { EXIT_NO_CONVERGENCE })
}

fn replay(a: &ReplayArgs) -> anyhow::Result<u8> {
    let m = RunManifest::load(&a.manifest)?;
    m.verify_inputs()?;
    let mut args = vec!["xpoint".to_string()];
    args.extend(m.to_args());
    args.push(format!("--out={}", a.out.display()));
    eprintln!("replaying: {}", args[1..].join(" "));
    let cli = Cli::try_parse_from(&args).context("manifest does not describe a valid command")?;
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Pagerank(a) => rank(&a),
        Command::Replay(_) => bail!("a manifest cannot replay a replay"),
    }
}
