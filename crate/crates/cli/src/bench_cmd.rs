//! The `bench` subcommand: drive the experiment harness over a task family
//! and write the report as JSON, CSV and a printed table.

use std::path::PathBuf;

use clap::Args;

use fastgw::experiments::{
    run_benchmark, BenchSpec, BenchTask, GrayscaleImage, Metric, ModeSelection,
};
use fastgw::{Config, Error, Result};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Task family: random1d | random2d | timeseries | digits | horse
    #[arg(long)]
    pub task: String,

    /// Comma-separated 1D sizes (random1d, timeseries)
    #[arg(long)]
    pub sizes: Option<String>,

    /// Comma-separated grid sides (random2d, horse)
    #[arg(long)]
    pub sides: Option<String>,

    /// Single grid side, shorthand for --sides with one entry (and the
    /// digit image side)
    #[arg(long)]
    pub side: Option<usize>,

    /// Objective: gw | fgw (defaults: gw for the random tasks, fgw for
    /// timeseries, digits and horse)
    #[arg(long)]
    pub metric: Option<String>,

    /// Timed repetitions per case (one warm-up run is always discarded)
    #[arg(long, default_value_t = 3)]
    pub reps: usize,

    /// Gradient modes: fast | naive | both | fast,naive
    #[arg(long, default_value = "both")]
    pub modes: String,

    /// Entropic regularization (task-specific default)
    #[arg(long)]
    pub eps: Option<f64>,

    /// FGW trade-off (task-specific default)
    #[arg(long)]
    pub theta: Option<f64>,

    /// Mirror-descent iterations
    #[arg(long, default_value_t = 10)]
    pub iters: usize,

    /// Per-iteration inner Sinkhorn sweep budget
    #[arg(long, default_value_t = 10)]
    pub sinkhorn_budget: usize,

    /// Cap for the final inner solve. The benchmark default equals the
    /// budget (the regime the reference timings use); raise it to make the
    /// timed solves polish their plans to --tol
    #[arg(long, default_value_t = 10)]
    pub sinkhorn_max_iters: usize,

    /// Inner Sinkhorn marginal tolerance
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Source image for the digits/horse tasks (synthetic if omitted)
    #[arg(long)]
    pub source: Option<PathBuf>,

    /// Target image for the horse task
    #[arg(long)]
    pub target: Option<PathBuf>,

    /// Output prefix: writes <prefix>.json and <prefix>.csv
    #[arg(long)]
    pub out: Option<String>,
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim().parse::<usize>().map_err(|_| Error::ConfigInvalid {
                reason: format!("bad {what} entry {t:?}"),
            })
        })
        .collect()
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let sides = match (&args.sides, args.side) {
        (Some(list), _) => Some(parse_usize_list(list, "--sides")?),
        (None, Some(side)) => Some(vec![side]),
        (None, None) => None,
    };
    let sizes = args
        .sizes
        .as_ref()
        .map(|s| parse_usize_list(s, "--sizes"))
        .transpose()?;

    let source_image = args
        .source
        .as_ref()
        .map(GrayscaleImage::load)
        .transpose()?;
    let target_image = args
        .target
        .as_ref()
        .map(GrayscaleImage::load)
        .transpose()?;

    // task-specific defaults, all overridable
    let (task, default_metric, default_eps, default_theta) = match args.task.as_str() {
        "random1d" => (
            BenchTask::Random1d {
                sizes: sizes.unwrap_or_else(|| vec![250, 500, 1000]),
            },
            Metric::Gw,
            0.002,
            0.5,
        ),
        "random2d" => (
            BenchTask::Random2d {
                sides: sides.unwrap_or_else(|| vec![10, 20, 30]),
            },
            Metric::Gw,
            0.004,
            0.5,
        ),
        "timeseries" => (
            BenchTask::TimeSeries {
                sizes: sizes.unwrap_or_else(|| vec![200, 400, 800]),
            },
            Metric::Fgw,
            0.002,
            0.5,
        ),
        "digits" => (
            BenchTask::Digits {
                side: args.side.unwrap_or(28),
                image: source_image.clone(),
            },
            Metric::Fgw,
            100.0,
            0.1,
        ),
        "horse" => (
            BenchTask::Horse {
                sides: sides.unwrap_or_else(|| vec![20, 30, 40]),
                pair: match (source_image, target_image) {
                    (Some(a), Some(b)) => Some((a, b)),
                    (None, None) => None,
                    _ => {
                        return Err(Error::ConfigInvalid {
                            reason: "horse task needs both --source and --target, or neither"
                                .into(),
                        })
                    }
                },
            },
            Metric::Fgw,
            100.0,
            0.8,
        ),
        other => {
            return Err(Error::ConfigInvalid {
                reason: format!(
                    "unknown task {other:?} (random1d|random2d|timeseries|digits|horse)"
                ),
            })
        }
    };

    let metric = match args.metric.as_deref() {
        None => default_metric,
        Some("gw") => Metric::Gw,
        Some("fgw") => Metric::Fgw,
        Some(other) => {
            return Err(Error::ConfigInvalid {
                reason: format!("unknown metric {other:?} (gw|fgw)"),
            })
        }
    };
    let modes = match args.modes.as_str() {
        "fast" => ModeSelection {
            fast: true,
            naive: false,
        },
        "naive" => ModeSelection {
            fast: false,
            naive: true,
        },
        "both" | "fast,naive" | "naive,fast" => ModeSelection::both(),
        other => {
            return Err(Error::ConfigInvalid {
                reason: format!("unknown modes {other:?} (fast|naive|both)"),
            })
        }
    };

    let config = Config::new(args.eps.unwrap_or(default_eps))
        .with_theta(args.theta.unwrap_or(default_theta))
        .with_outer_iterations(args.iters)
        .with_sinkhorn_sweep_budget(Some(args.sinkhorn_budget))
        .with_sinkhorn_limits(args.sinkhorn_max_iters, args.tol);

    let spec = BenchSpec {
        task,
        metric,
        repetitions: args.reps,
        modes,
        config,
        seed: args.seed,
    };
    let report = run_benchmark(&spec)?;

    let prefix = args
        .out
        .clone()
        .unwrap_or_else(|| format!("bench_{}", args.task));
    std::fs::write(format!("{prefix}.json"), report.to_json())?;
    std::fs::write(format!("{prefix}.csv"), report.to_csv())?;
    print!("{}", report.human_table());
    println!("wrote {prefix}.json and {prefix}.csv");
    Ok(0)
}
