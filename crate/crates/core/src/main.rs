use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use aoi_drift::dtmc::{self, Solver};
use aoi_drift::experiments::config::parse_config;
use aoi_drift::experiments::format::fmt_num;
use aoi_drift::experiments::{
    fig3_csv, fig4_csv, run_verify, sweep_fig3, sweep_fig4, CompareOptions, Engines, Fig3Spec,
    Fig4Spec, VerifyGrid,
};
use aoi_drift::{analytic, sim, Channel, DriftModel};

/// Exit codes: 0 success, 1 verification mismatch, 2 usage or parameter error.
const EXIT_MISMATCH: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "aoi-drift",
    version,
    about = "Age of Information under clock drift"
)]
struct Cli {
    /// Flat `key = value` file supplying defaults for flags not given.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form mean, pmf prefix or p_max at one parameter point.
    Analytic(AnalyticArgs),
    /// Seeded Monte Carlo run at one parameter point.
    Simulate(SimulateArgs),
    /// Solve the truncated joint Markov chain at one parameter point.
    Dtmc(DtmcArgs),
    /// Average AoI against K for several p.
    SweepFig3(Fig3Args),
    /// p_max against K for several AoI thresholds.
    SweepFig4(Fig4Args),
    /// The six-slot ternary walkthrough trace.
    TraceFig2(TraceArgs),
    /// Three-way comparison over the verification grid.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Constant drift d (slots).
    #[arg(long, allow_hyphen_values = true)]
    d: Option<i64>,
    /// Maximum positive drift K (slots).
    #[arg(long = "K", allow_hyphen_values = true)]
    k: Option<i64>,
    /// Per-value drift probability p.
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    /// P[drift = -1].
    #[arg(long, allow_hyphen_values = true)]
    pm: Option<f64>,
    /// P[drift = 0].
    #[arg(long, allow_hyphen_values = true)]
    p0: Option<f64>,
    /// P[drift = +1].
    #[arg(long, allow_hyphen_values = true)]
    p1: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write output here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AnalyticKind {
    Deterministic,
    Positive,
    Ternary,
    Pmax,
}

#[derive(Args, Debug)]
struct AnalyticArgs {
    kind: AnalyticKind,
    #[command(flatten)]
    model: ModelArgs,
    /// Channel success probability.
    #[arg(long, allow_hyphen_values = true)]
    ps: f64,
    /// Average-AoI threshold (pmax only).
    #[arg(long, allow_hyphen_values = true)]
    th: Option<f64>,
    /// Print the average AoI (default when nothing else is requested).
    #[arg(long)]
    mean: bool,
    /// Print P[AoI = i] for i = 1..=N.
    #[arg(long, value_name = "N")]
    pmf: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    ps: f64,
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Power,
    Direct,
}

#[derive(Args, Debug)]
struct DtmcArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    ps: f64,
    /// Truncation index; defaults to the geometric-tail rule.
    #[arg(long)]
    imax: Option<usize>,
    /// Dump the stationary vector as `k,i,pi` rows.
    #[arg(long)]
    dump: bool,
    #[arg(long, value_enum, default_value_t = SolverArg::Power)]
    solver: SolverArg,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct Fig3Args {
    /// K values: inclusive range `a..b` or list `1,2,4`.
    #[arg(long = "K", default_value = "1..10")]
    k: String,
    #[arg(long, default_value = "0.1,0.4,0.8,1")]
    p: String,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    ps: f64,
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated subset of analytic,sim,dtmc.
    #[arg(long, default_value = "analytic,sim,dtmc")]
    engines: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct Fig4Args {
    #[arg(long = "K", default_value = "1..10")]
    k: String,
    #[arg(long, default_value = "3,5,8")]
    th: String,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    ps: f64,
    /// Cross-check each row by simulating at p = p_max.
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1_000_000)]
    slots: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Channel success probabilities, e.g. `0.2,0.5,0.8`.
    #[arg(long)]
    ps: Option<String>,
    /// Constant drifts, e.g. `0,1,5`.
    #[arg(long)]
    d: Option<String>,
    /// Positive-drift points `K:p`, comma-separated.
    #[arg(long)]
    positive: Option<String>,
    /// Ternary points `p_-1:p_0:p_1`, comma-separated.
    #[arg(long)]
    ternary: Option<String>,
    /// Restrict to these families (deterministic,positive,ternary).
    #[arg(long)]
    families: Option<String>,
    /// Negative control: shift every closed-form mean by this amount.
    #[arg(long, hide = true, default_value_t = 0.0, allow_hyphen_values = true)]
    analytic_offset: f64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

type CliResult = Result<ExitCode, String>;

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let args = match apply_config(raw) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Analytic(a) => cmd_analytic(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Dtmc(a) => cmd_dtmc(a),
        Command::SweepFig3(a) => cmd_sweep_fig3(a),
        Command::SweepFig4(a) => cmd_sweep_fig4(a),
        Command::TraceFig2(a) => cmd_trace_fig2(a),
        Command::Verify(a) => cmd_verify(a),
    };
    result.unwrap_or_else(|msg| {
        eprintln!("error: {msg}");
        ExitCode::from(EXIT_USAGE)
    })
}

/// Strip `--config PATH` from the arguments and append the file's settings
/// as flags for every key the command line does not already set.
fn apply_config(mut args: Vec<String>) -> Result<Vec<String>, String> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" {
            if i + 1 >= args.len() {
                return Err("--config needs a path".into());
            }
            path = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("reading {path}: {e}"))?;
    let pairs = parse_config(&text)?;

    let root = Cli::command();
    let Some(sub_name) = args.iter().skip(1).find(|a| !a.starts_with('-')).cloned() else {
        return Ok(args);
    };
    let Some(sub) = root.find_subcommand(&sub_name) else {
        return Ok(args);
    };
    let known_anywhere = |key: &str| {
        root.get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(key)))
    };
    let mut extra = Vec::new();
    for (key, value) in pairs {
        let Some(arg) = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
        else {
            if known_anywhere(&key) {
                continue;
            }
            return Err(format!("unknown config key `{key}`"));
        };
        let flag = format!("--{key}");
        let given = args
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        if arg.get_action().takes_values() {
            extra.push(flag);
            extra.push(value);
        } else {
            match value.as_str() {
                "true" | "1" | "yes" => extra.push(flag),
                "false" | "0" | "no" => {}
                other => {
                    return Err(format!(
                        "config key `{key}`: expected a boolean, got `{other}`"
                    ))
                }
            }
        }
    }
    args.extend(extra);
    Ok(args)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn channel(ps: f64) -> Result<Channel, String> {
    Channel::new(ps).map_err(|e| e.to_string())
}

/// Pick the model family from whichever flags are present.
fn model_from_flags(m: &ModelArgs, family: Option<AnalyticKind>) -> Result<DriftModel, String> {
    let det = m.d.is_some();
    let pos = m.k.is_some() || m.p.is_some();
    let ter = m.pm.is_some() || m.p0.is_some() || m.p1.is_some();
    let family = match family {
        Some(f) => f,
        None => match (det, pos, ter) {
            (true, false, false) => AnalyticKind::Deterministic,
            (false, true, false) => AnalyticKind::Positive,
            (false, false, true) => AnalyticKind::Ternary,
            (false, false, false) => {
                return Err("no model given: use --d, --K/--p or --pm/--p0/--p1".into())
            }
            _ => return Err("model flags from more than one family".into()),
        },
    };
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("missing --{name}"));
    let model = match family {
        AnalyticKind::Deterministic => DriftModel::deterministic(m.d.ok_or("missing --d")?),
        AnalyticKind::Positive => DriftModel::positive(m.k.ok_or("missing --K")?, need(m.p, "p")?),
        AnalyticKind::Ternary => {
            DriftModel::ternary(need(m.pm, "pm")?, need(m.p0, "p0")?, need(m.p1, "p1")?)
        }
        AnalyticKind::Pmax => return Err("p_max takes no drift model".into()),
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

fn cmd_analytic(a: AnalyticArgs) -> CliResult {
    let ch = channel(a.ps)?;
    let out = a.output.out.as_deref();
    if a.kind == AnalyticKind::Pmax {
        let k = a.model.k.ok_or("missing --K")?;
        let th = a.th.ok_or("missing --th")?;
        let p = analytic::p_max(k, ch, th).map_err(|e| e.to_string())?;
        let text = match a.output.format {
            Format::Csv => format!("{}\n", fmt_num(p)),
            Format::Json => format!("{}\n", json!({ "K": k, "ps": a.ps, "th": th, "p_max": p })),
        };
        emit(out, &text)?;
        return Ok(ExitCode::SUCCESS);
    }
    let model = model_from_flags(&a.model, Some(a.kind))?;
    let mean = analytic::avg_aoi(&model, ch).map_err(|e| e.to_string())?;
    let pmf = analytic::aoi_pmf(&model, ch).map_err(|e| e.to_string())?;
    let show_mean = a.mean || a.pmf.is_none();
    let prefix: Vec<f64> = (1..=a.pmf.unwrap_or(0)).map(|i| pmf.prob(i)).collect();
    let text = match a.output.format {
        Format::Csv => {
            let mut s = String::new();
            if show_mean {
                s.push_str(&format!("{}\n", fmt_num(mean)));
            }
            if a.pmf.is_some() {
                s.push_str("i,prob\n");
                for (n, p) in prefix.iter().enumerate() {
                    s.push_str(&format!("{},{}\n", n + 1, fmt_num(*p)));
                }
            }
            s
        }
        Format::Json => {
            let mut v = json!({ "model": model, "ps": a.ps });
            if show_mean {
                v["mean"] = json!(mean);
            }
            if a.pmf.is_some() {
                v["pmf"] = json!(prefix);
            }
            format!("{v}\n")
        }
    };
    emit(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let ch = channel(a.ps)?;
    let model = model_from_flags(&a.model, None)?;
    let stats = sim::run(&model, ch, a.slots, a.seed).map_err(|e| e.to_string())?;
    let text = match a.output.format {
        Format::Csv => format!(
            "n_slots,seed,mean_sim,sim_std_error\n{},{},{},{}\n",
            stats.n_slots,
            stats.seed,
            fmt_num(stats.mean_aoi),
            fmt_num(stats.std_error)
        ),
        Format::Json => format!(
            "{}\n",
            json!({ "model": model, "ps": a.ps, "stats": stats })
        ),
    };
    emit(a.output.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_dtmc(a: DtmcArgs) -> CliResult {
    let ch = channel(a.ps)?;
    let model = model_from_flags(&a.model, None)?;
    let i_max = a
        .imax
        .unwrap_or_else(|| dtmc::default_chain_truncation(&model, ch));
    let chain = dtmc::build_chain(&model, ch, i_max).map_err(|e| e.to_string())?;
    let sol = match a.solver {
        SolverArg::Power => dtmc::stationary(&chain, dtmc::DEFAULT_TOL, dtmc::DEFAULT_MAX_ITER),
        SolverArg::Direct => dtmc::stationary_direct(&chain),
    }
    .map_err(|e| e.to_string())?;
    let text = if a.dump {
        match a.output.format {
            Format::Csv => {
                let mut s = String::from("k,i,pi\n");
                for (k, i, p) in sol.rows() {
                    s.push_str(&format!("{k},{i},{}\n", fmt_num(p)));
                }
                s
            }
            Format::Json => {
                let rows: Vec<_> = sol
                    .rows()
                    .map(|(k, i, p)| json!({ "k": k, "i": i, "pi": p }))
                    .collect();
                format!("{}\n", json!(rows))
            }
        }
    } else {
        let est = dtmc::mean_aoi(&sol).map_err(|e| e.to_string())?;
        let solver = match sol.solver {
            Solver::PowerIteration => "power",
            Solver::Direct => "direct",
        };
        match a.output.format {
            Format::Csv => format!(
                "mean_dtmc,residual_bound,i_max,solver,iterations,convergence_error\n{},{},{},{},{},{}\n",
                fmt_num(est.mean),
                fmt_num(est.residual_bound),
                i_max,
                solver,
                sol.iterations,
                fmt_num(sol.convergence_error)
            ),
            Format::Json => format!(
                "{}\n",
                json!({
                    "model": model,
                    "ps": a.ps,
                    "i_max": i_max,
                    "mean_dtmc": est.mean,
                    "residual_bound": est.residual_bound,
                    "solver": sol.solver,
                    "iterations": sol.iterations,
                    "convergence_error": sol.convergence_error,
                })
            ),
        }
    };
    emit(a.output.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

/// `a..b`, `a..=b` (both inclusive) or a comma list.
fn parse_int_list(s: &str) -> Result<Vec<i64>, String> {
    let bad = || format!("malformed integer list `{s}`");
    if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(format!("empty range `{s}`"));
        }
        return Ok((lo..=hi).collect());
    }
    let v: Vec<i64> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    Ok(v)
}

fn parse_float_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("malformed number list `{s}`"))
        })
        .collect()
}

fn parse_tuples(s: &str, arity: usize) -> Result<Vec<Vec<f64>>, String> {
    s.split(',')
        .map(|t| {
            let parts = t
                .split(':')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("malformed point `{t}`"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if parts.len() != arity {
                return Err(format!("point `{t}` needs {arity} values"));
            }
            Ok(parts)
        })
        .collect()
}

fn cmd_sweep_fig3(a: Fig3Args) -> CliResult {
    let spec = Fig3Spec {
        k_values: parse_int_list(&a.k)?,
        p_values: parse_float_list(&a.p)?,
        p_s: a.ps,
        n_slots: a.slots,
        seed: a.seed,
        engines: Engines::parse(&a.engines)?,
    };
    let rows = sweep_fig3(&spec).map_err(|e| e.to_string())?;
    let text = match a.output.format {
        Format::Csv => fig3_csv(&rows),
        Format::Json => format!(
            "{}\n",
            serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?
        ),
    };
    emit(a.output.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep_fig4(a: Fig4Args) -> CliResult {
    let spec = Fig4Spec {
        k_values: parse_int_list(&a.k)?,
        thresholds: parse_float_list(&a.th)?,
        p_s: a.ps,
        simulate: a.simulate,
        n_slots: a.slots,
        seed: a.seed,
    };
    let rows = sweep_fig4(&spec).map_err(|e| e.to_string())?;
    let text = match a.output.format {
        Format::Csv => fig4_csv(&rows),
        Format::Json => format!(
            "{}\n",
            serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?
        ),
    };
    emit(a.output.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace_fig2(a: TraceArgs) -> CliResult {
    // Any ternary model with all three drift values in its support replays
    // the schedule identically.
    let model = DriftModel::ternary(0.25, 0.5, 0.25);
    let trace =
        sim::run_trace(&model, &sim::reference_trace_schedule(), 1).map_err(|e| e.to_string())?;
    emit(a.out.as_deref(), &trace.to_csv())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let mut grid = VerifyGrid::default();
    if let Some(s) = &a.ps {
        grid.p_s = parse_float_list(s)?;
    }
    if let Some(s) = &a.d {
        grid.deterministic = parse_int_list(s)?;
    }
    if let Some(s) = &a.positive {
        grid.positive = parse_tuples(s, 2)?
            .into_iter()
            .map(|t| {
                if t[0].fract() != 0.0 {
                    return Err(format!("K = {} must be an integer", t[0]));
                }
                Ok((t[0] as i64, t[1]))
            })
            .collect::<Result<_, String>>()?;
    }
    if let Some(s) = &a.ternary {
        grid.ternary = parse_tuples(s, 3)?
            .into_iter()
            .map(|t| (t[0], t[1], t[2]))
            .collect();
    }
    if let Some(f) = &a.families {
        let fams: Vec<&str> = f.split(',').map(str::trim).collect();
        if let Some(bad) = fams
            .iter()
            .find(|x| !["deterministic", "positive", "ternary"].contains(x))
        {
            return Err(format!("unknown family `{bad}`"));
        }
        if !fams.contains(&"deterministic") {
            grid.deterministic.clear();
        }
        if !fams.contains(&"positive") {
            grid.positive.clear();
        }
        if !fams.contains(&"ternary") {
            grid.ternary.clear();
        }
    }
    if grid.points().is_empty() {
        return Err("empty verification grid".into());
    }
    let opts = CompareOptions {
        analytic_offset: a.analytic_offset,
    };
    let report = run_verify(&grid, a.slots, a.seed, &opts).map_err(|e| e.to_string())?;
    emit(a.out.as_deref(), &format!("{}\n", report.to_json()))?;
    let s = report.summary;
    eprintln!(
        "verify: {} points, {} ok, {} infeasible, {} mismatch",
        s.total, s.ok, s.infeasible, s.mismatch
    );
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_MISMATCH)
    })
}
