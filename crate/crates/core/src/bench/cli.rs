//! Command-line front end. Every config key doubles as a `--key value` flag.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::aggregate::{aggregate, Metric};
use super::config::ExperimentConfig;
use super::curve::LearningCurve;
use super::experiment::{run_experiment, run_repro, DEFAULT_GRID_STEP};
use super::policy_grid::{export_policy_grid, write_grid_csv};
use crate::cmaes::test_functions::{minimize, rosenbrock, sphere};
use crate::ddpg::{actor_network, critic_network};
use crate::error::Error;
use crate::nn::{checkpoint, gradcheck::check_gradients};
use crate::CmaesConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const USAGE: &str = "\
usage: mcbench <command> [options]

commands:
  run          run one experiment over its seeds
               [--config FILE] [--seed-base N] [--<key> VALUE ...]
  repro        run the four comparison studies into --output
               [--config FILE] [--seed-base N] [--<key> VALUE ...]
  aggregate    average curve CSVs onto an interaction grid
               [--metric return|length] [--grid-step N] [--output FILE] CURVE.csv ...
  policy-grid  tabulate a saved actor over position x velocity
               --actor FILE [--resolution N] [--output FILE] [--env.<key> VALUE ...]
  validate     CMA-ES test-function suite and gradient checks

config keys: see `mcbench keys`";

/// Failure that maps onto an exit code.
enum Fail {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } => Fail::Usage(e.to_string()),
            _ => Fail::Runtime(e.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Fail>;

/// `--flag value` pairs and bare positionals, in order.
struct Args {
    flags: Vec<(String, String)>,
    positional: Vec<String>,
}

fn split_args(argv: &[String]) -> std::result::Result<Args, Fail> {
    let mut flags = Vec::new();
    let mut positional = Vec::new();
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if let Some(name) = a.strip_prefix("--") {
            let (name, value) = match name.split_once('=') {
                Some((n, v)) => (n.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| Fail::Usage(format!("flag --{name} needs a value")))?;
                    (name.to_string(), v.clone())
                }
            };
            flags.push((name, value));
        } else {
            positional.push(a.clone());
        }
    }
    Ok(Args { flags, positional })
}

fn parse_flag<T: std::str::FromStr>(name: &str, value: &str) -> std::result::Result<T, Fail> {
    value
        .parse()
        .map_err(|_| Fail::Usage(format!("bad value {value:?} for --{name}")))
}

/// Builds the config from defaults, then `--config`, then the other flags,
/// then `--seed-base`.
fn experiment_config(args: &Args) -> std::result::Result<ExperimentConfig, Fail> {
    let mut config = ExperimentConfig::default();
    for (name, value) in &args.flags {
        if name == "config" {
            config
                .apply_file(value)
                .map_err(|e| Fail::Usage(format!("cannot use config file: {e}")))?;
        }
    }
    let mut seed_base = 0;
    for (name, value) in &args.flags {
        match name.as_str() {
            "config" => {}
            "seed-base" => seed_base = parse_flag(name, value)?,
            key => config.set(key, value)?,
        }
    }
    config.offset_seeds(seed_base)?;
    config.validate()?;
    Ok(config)
}

fn no_positionals(args: &Args) -> CliResult {
    match args.positional.first() {
        Some(p) => Err(Fail::Usage(format!("unexpected argument {p:?}"))),
        None => Ok(()),
    }
}

fn cmd_run(args: &Args, out: &mut dyn Write) -> CliResult {
    no_positionals(args)?;
    let config = experiment_config(args)?;
    let curves = run_experiment(&config)?;
    for c in &curves {
        let tail = c.last_episodes(10);
        let mean = tail.iter().map(|e| e.episode_return).sum::<f64>() / tail.len().max(1) as f64;
        let _ = writeln!(
            out,
            "{} seed {}: {} episodes, {} interactions, last-10 mean return {:.2}",
            c.algorithm,
            c.seed,
            c.len(),
            c.total_interactions(),
            mean
        );
    }
    let _ = writeln!(out, "wrote {}", config.output.display());
    Ok(())
}

fn cmd_repro(args: &Args, out: &mut dyn Write) -> CliResult {
    no_positionals(args)?;
    let config = experiment_config(args)?;
    run_repro(&config, |msg| eprintln!("running {msg}"))?;
    let _ = writeln!(out, "wrote {}", config.output.display());
    Ok(())
}

/// Reads `{algorithm}_seed{n}.csv` names back into tags; anything else is
/// tagged by position.
fn curve_tags(path: &Path, index: usize) -> (String, u64) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    if let Some((alg, seed)) = stem.rsplit_once("_seed") {
        if let Ok(seed) = seed.parse() {
            return (alg.to_string(), seed);
        }
    }
    ("curve".to_string(), index as u64)
}

fn cmd_aggregate(args: &Args, out: &mut dyn Write) -> CliResult {
    let mut metric = Metric::Return;
    let mut grid_step = DEFAULT_GRID_STEP;
    let mut output: Option<PathBuf> = None;
    for (name, value) in &args.flags {
        match name.as_str() {
            "metric" => metric = value.parse()?,
            "grid-step" => grid_step = parse_flag(name, value)?,
            "output" => output = Some(PathBuf::from(value)),
            other => return Err(Fail::Usage(format!("unknown flag --{other} for aggregate"))),
        }
    }
    if args.positional.is_empty() {
        return Err(Fail::Usage("aggregate needs at least one curve CSV".into()));
    }
    let mut curves = Vec::with_capacity(args.positional.len());
    for (i, p) in args.positional.iter().enumerate() {
        let path = Path::new(p);
        let (alg, seed) = curve_tags(path, i);
        curves.push(LearningCurve::read_csv(path, alg, seed).map_err(|e| Fail::Usage(e.to_string()))?);
    }
    let agg = aggregate(&curves, grid_step, metric)?;
    match output {
        Some(path) => agg.write_csv(path)?,
        None => {
            let _ = out.write_all(agg.to_csv().as_bytes());
        }
    }
    Ok(())
}

fn cmd_policy_grid(args: &Args, out: &mut dyn Write) -> CliResult {
    let mut actor: Option<PathBuf> = None;
    let mut resolution = 101;
    let mut output: Option<PathBuf> = None;
    let mut config = ExperimentConfig::default();
    for (name, value) in &args.flags {
        match name.as_str() {
            "actor" => actor = Some(PathBuf::from(value)),
            "resolution" => resolution = parse_flag(name, value)?,
            "output" => output = Some(PathBuf::from(value)),
            key if key.starts_with("env.") => config.set(key, value)?,
            other => return Err(Fail::Usage(format!("unknown flag --{other} for policy-grid"))),
        }
    }
    no_positionals(args)?;
    let path = actor.ok_or_else(|| Fail::Usage("policy-grid needs --actor".into()))?;
    let net = checkpoint::load::<f64>(&path).map_err(|e| Fail::Usage(e.to_string()))?;
    let grid = export_policy_grid(&net, resolution, &config.env)?;
    match output {
        Some(p) => write_grid_csv(&grid, p)?,
        None => {
            let _ = out.write_all(super::policy_grid::grid_to_csv(&grid).as_bytes());
        }
    }
    Ok(())
}

fn cmd_validate(args: &Args, out: &mut dyn Write) -> CliResult {
    no_positionals(args)?;
    if let Some((name, _)) = args.flags.first() {
        return Err(Fail::Usage(format!("unknown flag --{name} for validate")));
    }
    let mut all = true;
    let mut line = |ok: bool, text: String| {
        all &= ok;
        let _ = writeln!(out, "[{}] {text}", if ok { "PASS" } else { "FAIL" });
    };

    let mut solved = 0;
    let mut healthy = true;
    for seed in 0..10 {
        let r = minimize(sphere, &[1.0; 10], CmaesConfig::default(), seed, 5000, 1e-10, true)?;
        solved += usize::from(r.best_value < 1e-10);
        healthy &= r.invariants_held() && r.worst_asymmetry < 1e-12;
    }
    line(solved == 10, format!("sphere n=10 below 1e-10 within 5000 evaluations: {solved}/10 seeds"));

    let mut solved = 0;
    for seed in 0..10 {
        let r = minimize(rosenbrock, &[0.0; 5], CmaesConfig::default(), seed, 30_000, 1e-6, true)?;
        solved += usize::from(r.best_value < 1e-6);
        healthy &= r.invariants_held() && r.worst_asymmetry < 1e-12;
    }
    line(solved >= 8, format!("rosenbrock n=5 below 1e-6 within 30000 evaluations: {solved}/10 seeds"));
    line(healthy, "covariance symmetric positive definite and sigma > 0 throughout".into());

    let mut worst = 0.0f64;
    let mut compared = 0;
    for seed in 0..20 {
        let x = [0.37 - 0.05 * seed as f64, 0.8 - 0.07 * seed as f64];
        let nets = [
            (actor_network::<f64>((5, 5), seed)?, None),
            (actor_network::<f64>((20, 10), seed)?, None),
            (critic_network::<f64>((20, 10), seed)?, Some([0.6 - 0.05 * seed as f64])),
        ];
        for (net, aux) in &nets {
            let r = check_gradients(net, &x, aux.as_ref().map(|a| a.as_slice()), 1e-5, 1e-8)?;
            worst = worst.max(r.max_relative_error);
            compared += r.compared;
        }
    }
    line(
        worst < 1e-5,
        format!("backprop vs central differences: max relative error {worst:.2e} over {compared} coordinates"),
    );

    if all {
        Ok(())
    } else {
        Err(Fail::Runtime("validation failed".into()))
    }
}

/// Runs the CLI on `argv` (without the program name) and returns the exit
/// code.
pub fn cli_main(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some((command, rest)) = argv.split_first() else {
        let _ = writeln!(err, "{USAGE}");
        return EXIT_USAGE;
    };
    let result = split_args(rest).and_then(|args| match command.as_str() {
        "run" => cmd_run(&args, out),
        "repro" => cmd_repro(&args, out),
        "aggregate" => cmd_aggregate(&args, out),
        "policy-grid" => cmd_policy_grid(&args, out),
        "validate" => cmd_validate(&args, out),
        "keys" => {
            let _ = out.write_all(ExperimentConfig::default().to_text().as_bytes());
            Ok(())
        }
        "help" | "-h" | "--help" => {
            let _ = writeln!(out, "{USAGE}");
            Ok(())
        }
        other => Err(Fail::Usage(format!("unknown command {other:?}\n{USAGE}"))),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(Fail::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Fail::Runtime(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}
