//! Command-line front end: builds a JSON experiment document from a config
//! file and flags, then hands it to the harness.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ksphere::harness::{parse_config, run_experiment};
use serde_json::{json, Map, Value};

/// Environment variable naming the default output root.
const OUT_ENV: &str = "KSPHERE_OUT";
const DEFAULT_OUT: &str = "ksphere-out";

#[derive(Parser, Debug)]
#[command(name = "ksphere", version, about = "Cubic Kolmogorov systems with an invariant unit sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify exactly whether the unit sphere is invariant.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        /// Polynomial components, e.g. "x1 - x1^3 - x1*x2^2 - x1*x3^2" (give three).
        #[arg(long, num_args = 3, value_names = ["P1", "P2", "P3"], conflicts_with_all = ["alpha", "d"])]
        field: Option<Vec<String>>,
    },
    /// Locate the on-sphere equilibria and classify the regime.
    Equilibria {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Integrate one deterministic trajectory.
    SimulateOde {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        time: TimeArgs,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// rk4 (fixed step) or rk45 (adaptive).
        #[arg(long)]
        method: Option<String>,
        /// Relative tolerance for rk45.
        #[arg(long)]
        rtol: Option<f64>,
        /// Absolute tolerance for rk45.
        #[arg(long)]
        atol: Option<f64>,
        /// Keep every n-th step in the output.
        #[arg(long)]
        record_every: Option<usize>,
    },
    /// Simulate one Euler–Maruyama path.
    SimulateSde {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        time: TimeArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
    /// Run a seeded ensemble of paths and summarize endpoints and tails.
    Ensemble {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        time: TimeArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        paths: PathArgs,
    },
    /// Tabulate the stationary density on a coordinate ray.
    Density {
        #[command(flatten)]
        model: ModelArgs,
        /// Noise intensity.
        #[arg(long)]
        sigma: Option<f64>,
        /// Zero-based coordinate of the ray.
        #[arg(long)]
        axis: Option<usize>,
        /// Right end of the tabulation grid.
        #[arg(long)]
        x_max: Option<f64>,
        /// Number of grid points.
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Run ensembles over a grid of noise levels.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        time: TimeArgs,
        /// Noise levels, comma separated.
        #[arg(long, value_delimiter = ',')]
        sigma_grid: Option<Vec<f64>>,
        /// Master seed; every path seed derives from it.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        paths: PathArgs,
    },
    /// Emit a fan of deterministic trajectories with omega-limit labels.
    Figure1 {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        time: TimeArgs,
        /// Starts per kind (interior, on-sphere).
        #[arg(long)]
        n_starts: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Growth rates, comma separated; "p/q" keeps them exact.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Option<Vec<String>>,
    /// Interaction shifts, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    d: Option<Vec<String>>,
    /// Output directory. Defaults to $KSPHERE_OUT/<mode> or ./ksphere-out/<mode>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TimeArgs {
    /// Time horizon.
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Step size.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    /// Noise intensity.
    #[arg(long)]
    sigma: Option<f64>,
    /// Master seed; every path seed derives from it.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct PathArgs {
    /// Number of paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Extinction threshold on |x_i(T)|.
    #[arg(long)]
    eps_abs: Option<f64>,
}

/// Sets `key` when the flag was given.
fn put<T: Into<Value>>(doc: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        doc.insert(key.to_string(), v.into());
    }
}

fn load_base(path: Option<&Path>) -> Result<Map<String, Value>, String> {
    let Some(path) = path else { return Ok(Map::new()) };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    match serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))? {
        Value::Object(m) => Ok(m),
        _ => Err(format!("{}: top level must be an object", path.display())),
    }
}

fn apply_model(doc: &mut Map<String, Value>, m: &ModelArgs) {
    if m.alpha.is_none() && m.d.is_none() {
        return;
    }
    let model = doc.entry("model").or_insert_with(|| json!({}));
    if !model.is_object() {
        *model = json!({});
    }
    let obj = model.as_object_mut().expect("object");
    if m.alpha.is_some() {
        obj.remove("general");
        obj.remove("field");
    }
    put(obj, "alpha", m.alpha.clone());
    put(obj, "d", m.d.clone());
}

fn apply_time(doc: &mut Map<String, Value>, t: &TimeArgs) {
    put(doc, "T", t.horizon);
    put(doc, "dt", t.dt);
}

fn apply_paths(doc: &mut Map<String, Value>, p: &PathArgs) {
    put(doc, "n_paths", p.paths);
    put(doc, "eps_abs", p.eps_abs);
}

/// Merges the config file and flags into one document.
fn build_document(cmd: &Command) -> Result<(Map<String, Value>, Option<PathBuf>), String> {
    let (mode, model) = match cmd {
        Command::Verify { model, .. } => ("verify", model),
        Command::Equilibria { model } => ("equilibria", model),
        Command::SimulateOde { model, .. } => ("simulate-ode", model),
        Command::SimulateSde { model, .. } => ("simulate-sde", model),
        Command::Ensemble { model, .. } => ("ensemble", model),
        Command::Density { model, .. } => ("density", model),
        Command::Sweep { model, .. } => ("sweep", model),
        Command::Figure1 { model, .. } => ("figure1", model),
    };
    let mut doc = load_base(model.config.as_deref())?;
    doc.insert("mode".into(), mode.into());
    apply_model(&mut doc, model);
    match cmd {
        Command::Verify { field, .. } => {
            if let Some(f) = field {
                doc.insert("model".into(), json!({ "field": f }));
            }
        }
        Command::Equilibria { .. } => {}
        Command::SimulateOde { time, x0, method, rtol, atol, record_every, .. } => {
            apply_time(&mut doc, time);
            put(&mut doc, "x0", x0.clone());
            put(&mut doc, "method", method.clone());
            put(&mut doc, "rtol", *rtol);
            put(&mut doc, "atol", *atol);
            put(&mut doc, "record_every", *record_every);
        }
        Command::SimulateSde { time, noise, x0, .. } => {
            apply_time(&mut doc, time);
            put(&mut doc, "sigma", noise.sigma);
            put(&mut doc, "seed", noise.seed);
            put(&mut doc, "x0", x0.clone());
        }
        Command::Ensemble { time, noise, paths, .. } => {
            apply_time(&mut doc, time);
            put(&mut doc, "sigma", noise.sigma);
            put(&mut doc, "seed", noise.seed);
            apply_paths(&mut doc, paths);
        }
        Command::Density { sigma, axis, x_max, n_points, .. } => {
            put(&mut doc, "sigma", *sigma);
            put(&mut doc, "axis", *axis);
            put(&mut doc, "x_max", *x_max);
            put(&mut doc, "n_points", *n_points);
        }
        Command::Sweep { time, sigma_grid, seed, paths, .. } => {
            apply_time(&mut doc, time);
            put(&mut doc, "sigma_grid", sigma_grid.clone());
            put(&mut doc, "seed", *seed);
            apply_paths(&mut doc, paths);
        }
        Command::Figure1 { time, n_starts, .. } => {
            apply_time(&mut doc, time);
            put(&mut doc, "n_starts", *n_starts);
        }
    }
    Ok((doc, model.out.clone()))
}

fn output_root(flag: Option<PathBuf>, from_config: Option<PathBuf>, mode: &str) -> PathBuf {
    flag.or(from_config).unwrap_or_else(|| {
        let base = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        base.join(mode)
    })
}

fn run(cli: Cli) -> Result<bool, (u8, String)> {
    let (doc, out_flag) = build_document(&cli.command).map_err(|e| (1, e))?;
    let mode = doc["mode"].as_str().unwrap_or_default().to_string();
    let text = Value::Object(doc).to_string();
    let cfg = parse_config(&text).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    let root = output_root(out_flag, cfg.output_dir.clone(), &mode);
    let outcome = run_experiment(&cfg, &root).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    let text = serde_json::to_string_pretty(&outcome.summary).expect("summary is valid JSON");
    // A closed pipe on stdout is not a failure of the run.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    eprintln!("wrote {} files to {}", outcome.outputs.len(), root.display());
    if !outcome.success {
        if let Some(v) = outcome.summary.get("violations").and_then(Value::as_array) {
            for line in v.iter().filter_map(Value::as_str) {
                eprintln!("violation: {line}");
            }
        }
    }
    Ok(outcome.success)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
