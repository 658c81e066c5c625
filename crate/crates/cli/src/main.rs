//! Command-line front end for coreset-based structured pruning.
//!
//! Exit codes: 0 on success, 1 when the input was invalid (bad arguments,
//! malformed files, impossible budgets), 2 when a valid request failed at
//! runtime (non-convergent search, i/o). With `--json`, errors go to stderr
//! as a single `{"error":{"kind","message"}}` object instead of prose.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use neural_coreset::activations::ActivationKind;
use neural_coreset::coreset::required_sample_size;
use neural_coreset::counterexample::{build_sphere_points, violation_with_target};
use neural_coreset::error::{Error, Result};
use neural_coreset::metrics::network_l1_error;
use neural_coreset::network::{load_model, save_model};
use neural_coreset::pipeline::{prune_network, PruneMethod, PruneSpec};
use neural_coreset::rng::{rng_from_seed, uniform_in_ball};
use neural_coreset::sweep::{
    calibrate_c, load_queries_csv, run_sweep, CalibrationConfig, SweepConfig,
};
use neural_coreset::tensor::Tensor;

#[derive(Parser)]
#[command(
    name = "neural-coreset",
    version,
    about = "Structured pruning of neural networks via sensitivity-sampled coresets"
)]
struct Cli {
    /// Report errors as a JSON object on stderr.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prune every prunable layer of a model to the given budgets.
    Prune(PruneArgs),
    /// Mean L1 distance between two models' outputs over a query batch.
    Eval(EvalArgs),
    /// Run an error sweep over a (method, budget, trial) grid.
    Sweep(SweepArgs),
    /// Emit hard instances where any proper subset has relative error 1.
    Counterexample(CounterexampleArgs),
    /// Print the sample size the accuracy bound demands.
    Bound(BoundArgs),
    /// Calibrate the constant in the sample-size bound empirically.
    Calibrate(CalibrateArgs),
}

fn parse_method(s: &str) -> Result<PruneMethod, String> {
    PruneMethod::from_str(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct PruneArgs {
    /// Model file to prune (.nnj).
    #[arg(long)]
    model: PathBuf,

    /// Comma-separated budgets, one per prunable layer pair, bottom to top.
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<usize>,

    /// Selection method: coreset, uniform, or percentile.
    #[arg(long, default_value = "coreset", value_parser = parse_method)]
    method: PruneMethod,

    /// Input-ball radius, propagated through the layers unless the model
    /// carries explicit per-layer bounds.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Master seed for the sampling draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Where to write the pruned model.
    #[arg(long)]
    out: PathBuf,

    /// Where to write the JSON report (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,

    /// Failure probability for the certified-accuracy column of the report.
    #[arg(long)]
    delta: Option<f64>,

    /// Constant in the sample-size bound.
    #[arg(long, default_value_t = 1.0)]
    c: f64,

    /// Redraw until each pruned layer's width equals its budget.
    #[arg(long)]
    exact_width: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Reference model (.nnj).
    #[arg(long)]
    original: PathBuf,

    /// Model to compare against the reference (.nnj).
    #[arg(long)]
    pruned: PathBuf,

    /// CSV of query inputs, one flattened input per row. Rows with norm
    /// above the ball radius (--ball, default 1) are rescaled onto its
    /// boundary.
    #[arg(long, conflicts_with = "count")]
    queries: Option<PathBuf>,

    /// Query-ball radius: alone, queries are sampled uniformly inside it;
    /// with --queries, rows outside it are rescaled onto it.
    #[arg(long)]
    ball: Option<f64>,

    /// Number of sampled queries in --ball mode.
    #[arg(long, default_value_t = 100, requires = "ball")]
    count: usize,

    /// Seed for --ball sampling mode.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config (JSON).
    #[arg(long)]
    config: PathBuf,

    /// Where to write the CSV (method,budget,trial,mean_abs_err).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CounterexampleArgs {
    /// Number of sphere points.
    #[arg(long)]
    n: usize,

    /// Ambient dimension (3 or more recommended).
    #[arg(long)]
    d: usize,

    /// Sphere radius.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    /// The subset under test is the first subset-size indices.
    #[arg(long)]
    subset_size: usize,

    /// Query-ball radius the witnesses must stay inside.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Seed for placing the sphere points.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Where to write the JSON witnesses (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    /// Total sensitivity of the instance.
    #[arg(long)]
    t: f64,

    /// Point dimension.
    #[arg(long)]
    d: usize,

    /// Additive accuracy target.
    #[arg(long)]
    eps: f64,

    /// Failure probability.
    #[arg(long)]
    delta: f64,

    /// Constant in the bound.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Additive accuracy target.
    #[arg(long)]
    eps: f64,

    /// Failure probability target.
    #[arg(long)]
    delta: f64,

    /// Calibration config (JSON).
    #[arg(long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        // Bad arguments are validation failures.
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if cli.json {
                let payload = serde_json::json!({
                    "error": {"kind": err.kind(), "message": err.to_string()}
                });
                eprintln!("{payload}");
            } else {
                eprintln!("error: {err}");
            }
            ExitCode::from(if err.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(command: &Command) -> Result<()> {
    match command {
        Command::Prune(args) => cmd_prune(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Counterexample(args) => cmd_counterexample(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Calibrate(args) => cmd_calibrate(args),
    }
}

fn cmd_prune(args: &PruneArgs) -> Result<()> {
    let net = load_model(&args.model)?;
    let spec = PruneSpec {
        budgets: args.budgets.clone(),
        method: args.method,
        input_beta: args.beta,
        per_layer_beta: None,
        delta: args.delta,
        c: args.c,
        seed: args.seed,
        exact_width: args.exact_width,
    };
    let (pruned, report) = prune_network(&net, &spec)?;
    save_model(&pruned, &args.out)?;
    let text = serde_json::to_string_pretty(&report).expect("report serialization is infallible");
    match &args.report {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let original = load_model(&args.original)?;
    let pruned = load_model(&args.pruned)?;
    let shape = original.input_shape().to_vec();
    let dim: usize = shape.iter().product();

    if let Some(beta) = args.ball {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "ball",
                reason: format!("must be positive and finite, got {beta}"),
            });
        }
    }

    let rows: Vec<Vec<f64>> = if let Some(queries) = &args.queries {
        let beta = args.ball.unwrap_or(1.0);
        let loaded = load_queries_csv(queries, dim, beta, true)?;
        if loaded.rescaled > 0 {
            eprintln!(
                "{} of {} query rows rescaled onto the ball of radius {beta}",
                loaded.rescaled,
                loaded.queries.len()
            );
        }
        loaded.queries
    } else if let Some(beta) = args.ball {
        let mut rng = rng_from_seed(args.seed);
        (0..args.count)
            .map(|_| uniform_in_ball(&mut rng, dim, beta))
            .collect()
    } else {
        return Err(Error::InvalidParameter {
            name: "queries",
            reason: "provide --queries FILE or --ball RADIUS".to_string(),
        });
    };

    let tensors: Result<Vec<Tensor>> = rows
        .into_iter()
        .map(|row| Tensor::new(shape.clone(), row))
        .collect();
    let err = network_l1_error(&original, &pruned, &tensors?)?;
    println!("{err}");
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let config: SweepConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: format!(
            "{} (line {}, column {})",
            args.config.display(),
            e.line(),
            e.column()
        ),
        reason: e.to_string(),
    })?;
    let report = run_sweep(&config)?;
    if report.rescaled_queries > 0 {
        eprintln!(
            "{} query rows rescaled onto the ball boundary",
            report.rescaled_queries
        );
    }
    report.write_csv(&args.out)?;
    eprintln!("wrote {} rows to {}", report.rows.len(), args.out.display());
    Ok(())
}

fn cmd_counterexample(args: &CounterexampleArgs) -> Result<()> {
    let points = build_sphere_points(args.n, args.d, args.alpha, args.seed)?;
    if args.subset_size >= args.n {
        return Err(Error::InvalidSubset(format!(
            "subset of size {} is not proper for {} points",
            args.subset_size, args.n
        )));
    }
    let subset: Vec<usize> = (0..args.subset_size).collect();
    let witnesses: Result<Vec<_>> = (args.subset_size..args.n)
        .map(|target| {
            violation_with_target(&points, &subset, target, ActivationKind::Relu, args.beta)
        })
        .collect();
    let witnesses = witnesses?;
    let payload = serde_json::json!({
        "n": args.n,
        "d": args.d,
        "alpha": args.alpha,
        "beta": args.beta,
        "seed": args.seed,
        "activation": "relu",
        "subset": subset,
        "points": points.points(),
        "witnesses": witnesses,
    });
    let text = serde_json::to_string_pretty(&payload).expect("payload serialization is infallible");
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    let worst = witnesses
        .iter()
        .map(|w| (w.ratio - 1.0).abs())
        .fold(0.0f64, f64::max);
    eprintln!("{} witnesses, max |ratio - 1| = {worst}", witnesses.len());
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> Result<()> {
    let m = required_sample_size(args.t, args.d, args.eps, args.delta, args.c)?;
    println!("{m}");
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let config: CalibrationConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: format!(
            "{} (line {}, column {})",
            args.config.display(),
            e.line(),
            e.column()
        ),
        reason: e.to_string(),
    })?;
    let result = calibrate_c(args.eps, args.delta, &config)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&result).expect("result serialization is infallible")
    );
    Ok(())
}
