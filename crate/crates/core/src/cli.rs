//! The `otmkit` command line: argument parsing, dispatch and JSON reports.
//!
//! Exit codes: 0 success, 1 input or precondition error, 2 non-convergence
//! (the partial result is still reported).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::chains::{
    cost_matrix, graph_to_chain, structure_check, CostSpec, DanglingPolicy, InitialPolicy,
    MarkovChain, Metric,
};
use crate::error::{Error, Result};
use crate::grad::{backward, finite_difference_check, full_gradient, GradientBundle};
use crate::io;
use crate::ot::SinkhornOptions;
use crate::otm::{
    dwl_depth_k, dwl_depth_k_sparse, dwl_infinity, extract_optimal_coupling, otc_estimate,
    otm_general_p, rate_bound, sup_norm, truncated_geometric, wl_depth_k, wl_infinity,
    DiscountParams, FixedPointResult, HorizonDistribution, Init, DEFAULT_RELATIVE_TOL,
};
use crate::reference::{lower_bound_check, simulate_discounted_cost, truncation_horizon};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "otmkit", version, about = "Optimal transport Markov distances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one distance.
    Distance(RunArgs),
    /// Distance and its partials with respect to C, both kernels and both initials.
    Gradient(RunArgs),
    /// Tabulate WL, discounted WL, OTM and OTC estimates with bound checks.
    Compare(RunArgs),
    /// Structure checks, convergence envelopes, rate bound replay, Monte Carlo check.
    Diagnose(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Wl,
    Dwl,
    DwlInf,
    OtmP,
    Otc,
    WlInf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Tsv,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// First chain: JSON chain file, or TSV edge list (labels from `<file>.labels.json` if present).
    pub x: PathBuf,
    /// Second chain.
    pub y: PathBuf,
    #[arg(long, value_enum, default_value = "dwl-inf")]
    pub mode: Mode,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Fixed-point tolerance (default 1e-8 * max|C|).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: usize,
    /// Sinkhorn iteration-cap growth per sweep (0 = off).
    #[arg(long, default_value_t = 0)]
    pub schedule: usize,
    /// Restrict cell problems to kernel supports (finite depth).
    #[arg(long)]
    pub sparse: bool,
    #[arg(long, default_value = "deltaC")]
    pub init: String,
    /// `labels:<metric>` or `file:<csv>`.
    #[arg(long, default_value = "labels:euclidean")]
    pub cost: String,
    /// JSON array with the horizon law.
    #[arg(long)]
    pub p: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Also compare the gradient with finite differences.
    #[arg(long)]
    pub check_fd: bool,
    /// Upstream matrix dL/dC* (CSV or JSON); the bundle is then the pullback.
    #[arg(long)]
    pub upstream: Option<PathBuf>,
    /// Discount schedule for `--mode otc`, strictly decreasing.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.5,0.2,0.1,0.05,0.02,0.01"
    )]
    pub deltas: Vec<f64>,
    /// Self-loop probability for graph inputs.
    #[arg(long, default_value_t = 0.0)]
    pub lazy: f64,
    /// Start graph inputs from their stationary distribution.
    #[arg(long)]
    pub stationary: bool,
    /// Monte Carlo paths for `diagnose`.
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub inputs: BTreeMap<String, InputDigest>,
    pub settings: Value,
    pub result: Value,
    pub converged: bool,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
}

/// What a command produced before it is wrapped in a report.
struct Outcome {
    result: Value,
    converged: bool,
    tsv: Option<String>,
}

struct Inputs {
    x: MarkovChain,
    y: MarkovChain,
    cost: Array2<f64>,
    digests: BTreeMap<String, InputDigest>,
}

fn digest(path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path)?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn load_chain(
    path: &Path,
    args: &RunArgs,
    digests: &mut BTreeMap<String, InputDigest>,
    key: &str,
) -> Result<MarkovChain> {
    digests.insert(key.into(), digest(path)?);
    if path.extension().is_some_and(|e| e == "tsv") {
        let labels = path.with_extension("labels.json");
        let labels = labels.exists().then_some(labels);
        if let Some(l) = &labels {
            digests.insert(format!("{key}_labels"), digest(l)?);
        }
        let graph = io::read_graph_tsv(path, labels.as_deref())?;
        let initial = if args.stationary {
            InitialPolicy::Stationary
        } else {
            InitialPolicy::Uniform
        };
        graph_to_chain(&graph, DanglingPolicy::SelfLoop, args.lazy, &initial)
    } else {
        io::read_chain(path)
    }
}

fn load_inputs(args: &RunArgs) -> Result<Inputs> {
    let mut digests = BTreeMap::new();
    let x = load_chain(&args.x, args, &mut digests, "x")?;
    let y = load_chain(&args.y, args, &mut digests, "y")?;
    let cost = if let Some(metric) = args.cost.strip_prefix("labels:") {
        cost_matrix(&x, &y, CostSpec::new(Metric::from_str(metric)?))?
    } else if let Some(path) = args.cost.strip_prefix("file:") {
        let path = Path::new(path);
        digests.insert("cost".into(), digest(path)?);
        io::read_cost_csv(path)?
    } else {
        return Err(Error::Parse(format!(
            "--cost must be labels:<metric> or file:<path>, got '{}'",
            args.cost
        )));
    };
    if cost.dim() != (x.n_states(), y.n_states()) {
        return Err(Error::DimensionMismatch(format!(
            "cost is {:?}, chains have {} and {} states",
            cost.dim(),
            x.n_states(),
            y.n_states()
        )));
    }
    if let Some(p) = &args.p {
        digests.insert("p".into(), digest(p)?);
    }
    if let Some(u) = &args.upstream {
        digests.insert("upstream".into(), digest(u)?);
    }
    Ok(Inputs {
        x,
        y,
        cost,
        digests,
    })
}

fn params(args: &RunArgs) -> Result<DiscountParams> {
    let mut p = DiscountParams::infinite(args.delta, args.epsilon)
        .with_max_iter(args.max_iter)
        .with_schedule(args.schedule)
        .with_init(Init::from_str(&args.init)?);
    p.tol = args.tol;
    Ok(p)
}

fn settings(args: &RunArgs) -> Value {
    json!({
        "mode": args.mode,
        "depth": args.depth,
        "delta": args.delta,
        "epsilon": args.epsilon,
        "tol": args.tol,
        "tol_default_relative": DEFAULT_RELATIVE_TOL,
        "max_iter": args.max_iter,
        "schedule": args.schedule,
        "sparse": args.sparse,
        "init": args.init,
        "cost": args.cost,
        "sinkhorn_tol": SinkhornOptions::default().tol,
        "sinkhorn_max_iter": SinkhornOptions::default().max_iter,
        "deltas": args.deltas,
        "lazy": args.lazy,
        "stationary": args.stationary,
        "format": args.format,
    })
}

fn matrix(a: &Array2<f64>) -> Value {
    json!(a.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

fn fixed_point_json(r: &FixedPointResult) -> Value {
    json!({
        "value": r.value,
        "iterations": r.iterations,
        "residual": r.residual,
        "converged": r.converged,
        "cell_work": r.cell_work,
        "cost_final": matrix(&r.cost_final),
    })
}

/// Runs a fixed-point computation; non-convergence keeps the partial result.
fn settle(res: Result<FixedPointResult>) -> Result<FixedPointResult> {
    match res {
        Err(Error::NotConverged {
            partial: Some(p), ..
        }) => Ok(*p),
        other => other,
    }
}

fn horizon(args: &RunArgs) -> Result<HorizonDistribution> {
    match &args.p {
        Some(p) => io::read_horizon(p),
        None => truncated_geometric(args.delta, args.depth),
    }
}

fn cmd_distance(args: &RunArgs, inp: &Inputs) -> Result<Outcome> {
    let (x, y, c) = (&inp.x, &inp.y, &inp.cost);
    let p = params(args)?;
    let finite = |delta: f64| DiscountParams {
        depth: crate::otm::Depth::Finite(args.depth),
        delta,
        ..p
    };
    let run_finite = |delta: f64| {
        if args.sparse {
            dwl_depth_k_sparse(x, y, c, &finite(delta))
        } else {
            dwl_depth_k(x, y, c, &finite(delta))
        }
    };
    if args.sparse && !matches!(args.mode, Mode::Wl | Mode::Dwl) {
        return Err(Error::InvalidParameter(
            "--sparse applies to --mode wl and dwl".into(),
        ));
    }
    let single = |r: FixedPointResult| {
        let tsv = format!(
            "{}\t{}\t{}\t{}\n",
            r.value, r.iterations, r.residual, r.converged
        );
        Outcome {
            converged: r.converged,
            result: fixed_point_json(&r),
            tsv: Some(tsv),
        }
    };
    Ok(match args.mode {
        Mode::Wl => single(run_finite(0.0)?),
        Mode::Dwl => single(run_finite(args.delta)?),
        Mode::DwlInf => single(settle(dwl_infinity(x, y, c, &p))?),
        Mode::OtmP => single(otm_general_p(x, y, c, &horizon(args)?, args.epsilon)?),
        Mode::WlInf => {
            let tol = args.tol.unwrap_or(1e-9);
            match wl_infinity(x, y, c, tol, args.max_iter) {
                Ok(r) => Outcome {
                    converged: true,
                    tsv: Some(format!(
                        "{}\t{}\t{}\t{}\n",
                        r.value, r.iterations, r.gap, true
                    )),
                    result: serde_json::to_value(&r)?,
                },
                Err(Error::NotConverged {
                    iterations,
                    residual,
                    ..
                }) => Outcome {
                    converged: false,
                    tsv: None,
                    result: json!({"iterations": iterations, "gap": residual, "converged": false}),
                },
                Err(e) => return Err(e),
            }
        }
        Mode::Otc => {
            let est = otc_estimate(x, y, c, &args.deltas, args.epsilon, &p)?;
            let tsv = est
                .entries
                .iter()
                .map(|e| {
                    format!(
                        "{}\t{}\t{}\t{}\n",
                        e.delta, e.value, e.iterations, e.converged
                    )
                })
                .collect();
            Outcome {
                converged: est.entries.iter().all(|e| e.converged),
                result: serde_json::to_value(&est)?,
                tsv: Some(tsv),
            }
        }
    })
}

fn bundle_json(b: &GradientBundle) -> Value {
    json!({
        "d_C": matrix(&b.d_c),
        "d_mX": matrix(&b.d_mx),
        "d_mY": matrix(&b.d_my),
        "d_nuX": b.d_nux.to_vec(),
        "d_nuY": b.d_nuy.to_vec(),
    })
}

fn cmd_gradient(args: &RunArgs, inp: &Inputs) -> Result<Outcome> {
    if !(args.delta > 0.0) || !(args.epsilon > 0.0) {
        return Err(Error::InvalidParameter(
            "gradient requires --delta > 0 and --epsilon > 0".into(),
        ));
    }
    let (x, y, c) = (&inp.x, &inp.y, &inp.cost);
    let p = params(args)?;
    let (result, bundle) = match &args.upstream {
        None => full_gradient(x, y, c, &p)?,
        Some(path) => {
            let upstream = io::read_matrix(path)?;
            let r = dwl_infinity(x, y, c, &p)?;
            let back = backward(&r, &upstream)?;
            let bundle = GradientBundle {
                d_c: back.d_c,
                d_mx: back.d_mx,
                d_my: back.d_my,
                d_nux: ndarray::Array1::zeros(x.n_states()),
                d_nuy: ndarray::Array1::zeros(y.n_states()),
            };
            (r, bundle)
        }
    };
    if !bundle.is_finite() {
        return Err(Error::PreconditionViolated("non-finite gradient".into()));
    }
    let mut out = json!({
        "value": result.value,
        "iterations": result.iterations,
        "residual": result.residual,
        "converged": result.converged,
        "gradient": bundle_json(&bundle),
    });
    if args.check_fd {
        let report = finite_difference_check(x, y, c, &p, 4, &[1e-4, 1e-5, 1e-6], args.seed)?;
        out["finite_differences"] = json!({
            "seed": report.seed,
            "max_rel_error": report.max_rel_error.iter().cloned().collect::<BTreeMap<_, _>>(),
            "worst": report.worst(),
            "directions_per_target": 4,
        });
    }
    Ok(Outcome {
        result: out,
        converged: result.converged,
        tsv: None,
    })
}

fn cmd_compare(args: &RunArgs, inp: &Inputs) -> Result<Outcome> {
    let (x, y, c) = (&inp.x, &inp.y, &inp.cost);
    let p = params(args)?;
    let mut rows: Vec<(String, f64)> = Vec::new();
    let mut converged = true;
    for k in 0..=args.depth {
        rows.push((format!("wl_depth_{k}"), wl_depth_k(x, y, c, k, 0.0)?.value));
    }
    let dwl = dwl_depth_k(
        x,
        y,
        c,
        &DiscountParams::finite(args.delta, args.epsilon, args.depth),
    )?;
    rows.push((format!("dwl_depth_{}", args.depth), dwl.value));
    if args.delta > 0.0 {
        let inf = settle(dwl_infinity(x, y, c, &p))?;
        converged &= inf.converged;
        rows.push(("dwl_infinity".into(), inf.value));
    }
    let h = horizon(args)?;
    let bound = lower_bound_check(x, y, c, &h)?;
    rows.push(("otm_p".into(), bound.lhs));
    rows.push(("wl_average".into(), bound.rhs));
    let stationary = [x, y]
        .iter()
        .all(|ch| ch.balance_residual() <= crate::otm::STATIONARITY_THRESHOLD);
    let otc = if stationary {
        Some(otc_estimate(x, y, c, &args.deltas, 0.0, &p)?)
    } else if args.mode == Mode::Otc {
        let worst = x.balance_residual().max(y.balance_residual());
        return Err(Error::NotStationary(worst));
    } else {
        None
    };
    let mut flags = json!({
        "lower_bound_holds": bound.holds,
        "lower_bound_slack": bound.lhs - bound.rhs,
    });
    if let Some(est) = &otc {
        rows.push(("otc_estimate".into(), est.estimate));
        converged &= est.entries.iter().all(|e| e.converged);
        flags["otc_nondecreasing"] = json!(est.nondecreasing);
        flags["otm_below_otc"] = json!(bound.lhs <= est.estimate + 1e-9);
    }
    let tsv = rows.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect();
    let table: BTreeMap<_, _> = rows.into_iter().collect();
    Ok(Outcome {
        result: json!({
            "values": table,
            "flags": flags,
            "stationary": stationary,
            "otc": otc,
        }),
        converged,
        tsv: Some(tsv),
    })
}

fn cmd_diagnose(args: &RunArgs, inp: &Inputs) -> Result<Outcome> {
    let (x, y, c) = (&inp.x, &inp.y, &inp.cost);
    let sx = structure_check(x);
    let sy = structure_check(y);
    let mut out = json!({
        "structure": {"x": sx, "y": sy},
        "wl_infinity_eligible": sx.wl_infinity_eligible() && sy.wl_infinity_eligible(),
    });
    let mut converged = true;
    if sx.wl_infinity_eligible() && sy.wl_infinity_eligible() {
        let tol = args.tol.unwrap_or(1e-9);
        match wl_infinity(x, y, c, tol, args.max_iter.min(100_000)) {
            Ok(r) => out["wl_infinity"] = serde_json::to_value(&r)?,
            Err(Error::NotConverged { residual, .. }) => {
                converged = false;
                out["wl_infinity"] = json!({"converged": false, "gap": residual});
            }
            Err(e) => return Err(e),
        }
    }
    if args.delta > 0.0 {
        let p = params(args)?.recording_iterates();
        let r = settle(dwl_infinity(x, y, c, &p))?;
        converged &= r.converged;
        let norm = sup_norm(c);
        let fixed = &r.cost_final;
        let distances: Vec<f64> = r
            .iterates
            .iter()
            .map(|it| sup_norm(&(it - fixed)))
            .collect();
        let bounds: Vec<f64> = (0..distances.len())
            .map(|k| rate_bound(args.delta, k, norm))
            .collect();
        // slack for the gap between the stored iterate and the true fixed point
        let slack = r.residual / args.delta + 1e-12 * norm;
        let holds = distances.iter().zip(&bounds).all(|(d, b)| *d <= b + slack);
        out["rate_bound"] = json!({
            "distance_to_final": distances,
            "bound": bounds,
            "holds": holds,
            "residual_trace": r.residual_trace,
        });
        out["dwl_infinity"] =
            json!({"value": r.value, "iterations": r.iterations, "converged": r.converged});
        if r.converged && args.paths > 0 {
            let policy = extract_optimal_coupling(&r, x, y)?;
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                    (l.min(v), h.max(v))
                });
            let h = truncation_horizon(args.delta, hi - lo, 1e-6 * norm.max(1e-300));
            let mc = simulate_discounted_cost(&policy, c, args.delta, h, args.paths, args.seed)?;
            let z = mc.z_score(r.value);
            out["monte_carlo"] = json!({
                "estimate": mc,
                "target": r.value,
                "z_score": if z.is_finite() { json!(z) } else { Value::Null },
                "within_3se": z <= 3.0,
                "entropic": args.epsilon > 0.0,
            });
        }
    }
    Ok(Outcome {
        result: out,
        converged,
        tsv: None,
    })
}

type Handler = fn(&RunArgs, &Inputs) -> Result<Outcome>;

fn dispatch(command: &Command) -> (&RunArgs, Handler, &'static str) {
    match command {
        Command::Distance(a) => (a, cmd_distance, "distance"),
        Command::Gradient(a) => (a, cmd_gradient, "gradient"),
        Command::Compare(a) => (a, cmd_compare, "compare"),
        Command::Diagnose(a) => (a, cmd_diagnose, "diagnose"),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn error_json(e: &Error) -> String {
    let body = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
    format!(
        "{}\n",
        serde_json::to_string_pretty(&body).expect("serializable")
    )
}

fn execute(cli: &Cli, argv: &[String]) -> Result<i32> {
    let start = Instant::now();
    let (args, run, name) = dispatch(&cli.command);
    if let Some(t) = args.threads {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    if args.format == Format::Tsv
        && !matches!(cli.command, Command::Distance(_) | Command::Compare(_))
    {
        return Err(Error::InvalidParameter(
            "--format tsv is available for distance and compare".into(),
        ));
    }
    let inputs = load_inputs(args)?;
    log::info!(
        "{name}: {} x {} states",
        inputs.x.n_states(),
        inputs.y.n_states()
    );
    let outcome = run(args, &inputs)?;
    let code = if outcome.converged { 0 } else { 2 };
    if args.format == Format::Tsv {
        emit(outcome.tsv.as_deref().unwrap_or(""), args.out.as_deref())?;
        return Ok(code);
    }
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        tool: "otmkit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: argv.to_vec(),
        inputs: inputs.digests,
        settings: settings(args),
        result: outcome.result,
        converged: outcome.converged,
        seed: Some(args.seed),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let text = format!("{}\n", serde_json::to_string_pretty(&report)?);
    emit(&text, args.out.as_deref())?;
    Ok(code)
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let echo: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let body = json!({"error": {"kind": "Usage", "message": e.to_string()}});
            println!(
                "{}",
                serde_json::to_string_pretty(&body).expect("serializable")
            );
            return 1;
        }
    };
    match execute(&cli, &echo) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            let out = dispatch(&cli.command).0.out.clone();
            let text = error_json(&e);
            if emit(&text, out.as_deref()).is_err() {
                print!("{text}");
            }
            1
        }
    }
}

/// Log level from `OTMKIT_LOG` (default `warn`).
pub fn init_logging() {
    let env = env_logger::Env::default().filter_or("OTMKIT_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}
