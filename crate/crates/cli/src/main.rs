//! `campanato`: oscillation profiles, Campanato norms, transport solves and
//! estimate verification from a TOML configuration.

mod commands;
mod config;
mod failure;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use campanato_core::grid::write_atomic;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use toml::Value;

use failure::{Failure, EXIT_VERIFY};

#[derive(Parser)]
#[command(
    name = "campanato",
    version,
    about = "Generalized Campanato norms and transport estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Campanato seminorm (or full / tilde norm) of a function.
    Norm(Flags),
    /// Dyadic oscillation profiles, CSV rows (x0, j, r, osc).
    Osc(Flags),
    /// Moment projection onto polynomials of degree N.
    Project(Flags),
    /// Mollifier-weighted minimal polynomial with δ continuation.
    Minpoly(Flags),
    /// The dyadic sequence operator, optionally with the two-operator bound.
    Seqop(Flags),
    /// Transport solve by characteristics; grid snapshots.
    Solve(Flags),
    /// Inequality verification; exit 1 when a check fails.
    Verify(Flags),
    /// The sawtooth counterexample.
    ExampleB(Flags),
    /// Registry functions and velocity fields.
    ListFunctions(Flags),
    /// Runs the `command` key of the configuration file.
    Run(Flags),
}

/// Every flag sets the config key shown in brackets and wins over the file.
#[derive(Args, Clone, Default)]
struct Flags {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Any key: `--set params.p=3` (TOML value syntax; bare words are strings).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// [seed]
    #[arg(long)]
    seed: Option<u64>,
    /// [threads], 0 = all cores
    #[arg(long)]
    threads: Option<usize>,
    /// [function.spec] registry spec, `random_bump` or grid file
    #[arg(long, short)]
    function: Option<String>,
    /// [function.dim]
    #[arg(long)]
    dim: Option<usize>,
    /// [function.other]
    #[arg(long)]
    other: Option<String>,
    /// [params.s]
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    /// [params.q]
    #[arg(long)]
    q: Option<f64>,
    /// [params.p]
    #[arg(long)]
    p: Option<f64>,
    /// [params.degree]
    #[arg(long, allow_hyphen_values = true)]
    degree: Option<i32>,
    /// [params.k]
    #[arg(long)]
    k: Option<u32>,
    /// [window.j_min]
    #[arg(long, allow_hyphen_values = true)]
    j_min: Option<i32>,
    /// [window.j_max]
    #[arg(long, allow_hyphen_values = true)]
    j_max: Option<i32>,
    /// [base.per_axis]
    #[arg(long)]
    per_axis: Option<usize>,
    /// [base.half]
    #[arg(long)]
    half: Option<f64>,
    /// [point.x0], comma separated
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    /// [point.r]
    #[arg(long)]
    r: Option<f64>,
    /// [norm.kind] seminorm, full or tilde
    #[arg(long)]
    kind: Option<String>,
    /// [transport.problem]
    #[arg(long)]
    problem: Option<String>,
    /// [transport.velocity]
    #[arg(long)]
    velocity: Option<String>,
    /// [transport.source]
    #[arg(long)]
    source: Option<String>,
    /// [transport.horizon]
    #[arg(long)]
    horizon: Option<f64>,
    /// [transport.dt]
    #[arg(long)]
    dt: Option<f64>,
    /// [verify.inequality]
    #[arg(long)]
    inequality: Option<String>,
    /// [seqop.input]
    #[arg(long)]
    input: Option<PathBuf>,
    /// [seqop.alpha]
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// [seqop.beta]
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// [output.report], JSON; stdout when unset
    #[arg(long)]
    report: Option<PathBuf>,
    /// [output.csv]
    #[arg(long)]
    csv: Option<PathBuf>,
    /// [output.grid]
    #[arg(long)]
    grid: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Result<Vec<(String, Value)>, Failure> {
        let mut out: Vec<(String, Value)> = Vec::new();
        let mut put = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                out.push((key.to_string(), v));
            }
        };
        let float = |x: Option<f64>| x.map(Value::Float);
        let int = |x: Option<i64>| x.map(Value::Integer);
        let string = |x: &Option<String>| x.clone().map(Value::String);
        let path = |x: &Option<PathBuf>| x.as_ref().map(|p| Value::String(p.display().to_string()));
        put("seed", int(self.seed.map(|x| x as i64)));
        put("threads", int(self.threads.map(|x| x as i64)));
        put("function.spec", string(&self.function));
        put("function.dim", int(self.dim.map(|x| x as i64)));
        put("function.other", string(&self.other));
        put("params.s", float(self.s));
        put("params.q", float(self.q));
        put("params.p", float(self.p));
        put("params.degree", int(self.degree.map(i64::from)));
        put("params.k", int(self.k.map(i64::from)));
        put("window.j_min", int(self.j_min.map(i64::from)));
        put("window.j_max", int(self.j_max.map(i64::from)));
        put("base.per_axis", int(self.per_axis.map(|x| x as i64)));
        put("base.half", float(self.half));
        put(
            "point.x0",
            self.x0
                .as_ref()
                .map(|v| Value::Array(v.iter().map(|x| Value::Float(*x)).collect())),
        );
        put("point.r", float(self.r));
        put("norm.kind", string(&self.kind));
        put("transport.problem", string(&self.problem));
        put("transport.velocity", string(&self.velocity));
        put("transport.source", string(&self.source));
        put("transport.horizon", float(self.horizon));
        put("transport.dt", float(self.dt));
        put("verify.inequality", string(&self.inequality));
        put("seqop.input", path(&self.input));
        put("seqop.alpha", float(self.alpha));
        put("seqop.beta", float(self.beta));
        put("output.report", path(&self.report));
        put("output.csv", path(&self.csv));
        put("output.grid", path(&self.grid));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("--set {kv}: expected KEY=VALUE")))?;
            out.push((k.trim().to_string(), config::parse_value(v.trim())));
        }
        Ok(out)
    }
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    let (name, flags) = match cli.command {
        Command::Norm(f) => ("norm", f),
        Command::Osc(f) => ("osc", f),
        Command::Project(f) => ("project", f),
        Command::Minpoly(f) => ("minpoly", f),
        Command::Seqop(f) => ("seqop", f),
        Command::Solve(f) => ("solve", f),
        Command::Verify(f) => ("verify", f),
        Command::ExampleB(f) => ("example-b", f),
        Command::ListFunctions(f) => ("list-functions", f),
        Command::Run(f) => ("", f),
    };
    let mut cfg = config::load(flags.config.as_deref(), &flags.overrides()?)?;
    let command = if name.is_empty() {
        cfg.command
            .clone()
            .ok_or_else(|| Failure::usage("command: `run` needs a `command` key"))?
    } else {
        name.to_string()
    };
    cfg.command = Some(command.clone());
    let job = commands::prepare(&command, &cfg)?;

    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| Failure::field("threads", e))?;
    }
    let outcome = job.run()?;

    let record = json!({ "command": command, "config": cfg, "pass": outcome.pass, "result": outcome.result });
    let text = serde_json::to_string_pretty(&record).expect("reports serialize") + "\n";
    let write = |path: &PathBuf, bytes: &[u8]| write_atomic(path, bytes).map_err(|e| Failure::compute("output", e));
    match &cfg.output.report {
        Some(path) => write(path, text.as_bytes())?,
        None if command == "list-functions" => print!("{}", table(&outcome.result)),
        None => print!("{text}"),
    }
    if let (Some(path), Some(csv)) = (&cfg.output.csv, &outcome.csv) {
        write(path, csv.as_bytes())?;
    }
    Ok(outcome.pass)
}

fn table(listing: &serde_json::Value) -> String {
    let mut out = String::new();
    for (title, key) in [("functions", "functions"), ("velocities", "velocities")] {
        out.push_str(&format!("{title}:\n"));
        for e in listing[key].as_array().into_iter().flatten() {
            let name = e["name"].as_str().unwrap_or_default();
            let params = e["params"].as_str().unwrap_or_default();
            let spec = if params.is_empty() {
                name.to_string()
            } else {
                format!("{name}({params})")
            };
            out.push_str(&format!(
                "  {spec:<36} dim {:<4} {}\n",
                e["dim"].as_str().unwrap_or_default(),
                e["description"].as_str().unwrap_or_default()
            ));
        }
    }
    out.push_str("problems:\n");
    for p in listing["problems"].as_array().into_iter().flatten() {
        out.push_str(&format!("  {}\n", p.as_str().unwrap_or_default()));
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("campanato: verification failed");
            ExitCode::from(EXIT_VERIFY as u8)
        }
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("campanato: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
