//! The `gw` and `fgw` subcommands: load or generate a problem, solve it in
//! the requested gradient mode(s), write the plan and result files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde_json::json;

use fastgw::experiments::{
    feature_cost_from_images, gen_random_measure_1d, gen_random_measure_2d, index_feature_cost_1d,
    manhattan_feature_cost_2d, GrayscaleImage, GRAY_LEVEL_SCALE,
};
use fastgw::sinkhorn::sinkhorn;
use fastgw::solver::MirrorDescentTrace;
use fastgw::{
    entropic_fgw, entropic_gw, Config, Costs, Error, GradientMode, Grid, Measure, Result,
    SolveResult,
};

use crate::echo::{GridEcho, RunConfigEcho, SolverEcho};
use crate::io::{write_plan_csv, PlanFormat};

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Generate random inputs on a unit-interval/-square grid: "1d" or "2d"
    #[arg(long, value_name = "DIM")]
    pub random: Option<String>,

    /// Grid size for --random 1d
    #[arg(long)]
    pub n: Option<usize>,

    /// Grid side for --random 2d, or the subsampling side for image inputs
    #[arg(long)]
    pub side: Option<usize>,

    /// Source input: measure CSV (`weight` or `index,weight` lines) or a
    /// PGM/CSV image
    #[arg(long)]
    pub source: Option<PathBuf>,

    /// Target input, same formats as --source
    #[arg(long)]
    pub target: Option<PathBuf>,

    /// Treat CSV inputs as grayscale image matrices
    #[arg(long)]
    pub image: bool,

    /// Grid spacing h; defaults to 1/(points-1) for 1D inputs and 1 for
    /// images
    #[arg(long)]
    pub h: Option<f64>,

    /// Distance exponent k
    #[arg(long, default_value_t = 1)]
    pub k: u32,

    /// Entropic regularization
    #[arg(long, default_value_t = 0.002)]
    pub eps: f64,

    /// Mirror-descent penalty; defaults to eps
    #[arg(long)]
    pub tau: Option<f64>,

    /// Mirror-descent iterations
    #[arg(long, default_value_t = 10)]
    pub iters: usize,

    /// Per-iteration inner Sinkhorn sweep budget (0 = unbudgeted)
    #[arg(long, default_value_t = 10)]
    pub sinkhorn_budget: usize,

    /// Sweep cap for the final inner solve, which polishes the plan to
    /// --tol
    #[arg(long, default_value_t = 10_000)]
    pub sinkhorn_max_iters: usize,

    /// Inner Sinkhorn marginal tolerance
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,

    /// Use plain-domain Sinkhorn scaling instead of the log domain
    #[arg(long)]
    pub plain_domain: bool,

    /// Gradient mode: fast | naive | both
    #[arg(long, default_value = "fast")]
    pub mode: String,

    /// Seed for generated inputs (source uses `seed`, target `seed + 1`)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Plan output path (default <subcommand>_plan.csv)
    #[arg(long)]
    pub plan_out: Option<PathBuf>,

    /// Result JSON path (default <subcommand>_result.json)
    #[arg(long)]
    pub result_out: Option<PathBuf>,

    /// Plan format: auto | dense | sparse
    #[arg(long, default_value = "auto")]
    pub plan_format: String,

    /// Entries at or below this are dropped from sparse plans
    #[arg(long, default_value_t = 1e-12)]
    pub sparse_threshold: f64,
}

#[derive(Debug, Args)]
pub struct FgwArgs {
    #[command(flatten)]
    pub solve: SolveArgs,

    /// FGW trade-off in [0, 1]
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,

    /// Feature-cost CSV matrix; defaults to |i-p| (random 1d), Manhattan
    /// index distance (random 2d) or gray-level differences (images)
    #[arg(long)]
    pub cost: Option<PathBuf>,

    /// At theta = 0, check the plan against standalone entropic OT on the
    /// squared feature costs and fail (exit 2) on mismatch
    #[arg(long)]
    pub verify_endpoint: bool,
}

struct Problem {
    u: Measure,
    v: Measure,
    default_costs: Option<Costs>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Fast,
    Naive,
    Both,
}

impl Mode {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Self::Fast),
            "naive" => Ok(Self::Naive),
            "both" => Ok(Self::Both),
            other => Err(Error::ConfigInvalid {
                reason: format!("unknown mode {other:?} (fast|naive|both)"),
            }),
        }
    }
}

pub fn cmd_gw(args: &SolveArgs) -> Result<i32> {
    run_solve(args, None)
}

pub fn cmd_fgw(args: &FgwArgs) -> Result<i32> {
    run_solve(&args.solve, Some(args))
}

fn run_solve(args: &SolveArgs, fgw: Option<&FgwArgs>) -> Result<i32> {
    let subcommand = if fgw.is_some() { "fgw" } else { "gw" };
    let mode = Mode::parse(&args.mode)?;
    let plan_format = PlanFormat::parse(&args.plan_format)?;
    let problem = load_problem(args)?;

    let costs = match fgw {
        None => None,
        Some(f) => Some(match &f.cost {
            Some(path) => Costs::new(crate::io::read_matrix_csv(path)?)?,
            None => problem.default_costs.clone().ok_or(Error::ConfigInvalid {
                reason: "no default feature costs for these inputs; pass --cost".into(),
            })?,
        }),
    };

    let mut config = Config::new(args.eps)
        .with_outer_iterations(args.iters)
        .with_sinkhorn_sweep_budget((args.sinkhorn_budget > 0).then_some(args.sinkhorn_budget))
        .with_sinkhorn_limits(args.sinkhorn_max_iters, args.tol)
        .with_log_domain(!args.plain_domain);
    if let Some(tau) = args.tau {
        config = config.with_tau(tau);
    }
    if let Some(f) = fgw {
        config = config.with_theta(f.theta);
    }

    let solve_in = |gm: GradientMode| -> Result<(SolveResult<f64>, MirrorDescentTrace<f64>, f64)> {
        let start = Instant::now();
        let out = match &costs {
            None => entropic_gw(&problem.u, &problem.v, &config, gm)?,
            Some(c) => entropic_fgw(&problem.u, &problem.v, c, &config, gm)?,
        };
        Ok((out.0, out.1, start.elapsed().as_secs_f64()))
    };

    let (primary, trace, solve_s) = match mode {
        Mode::Fast | Mode::Both => solve_in(GradientMode::Fast)?,
        Mode::Naive => solve_in(GradientMode::Naive)?,
    };
    let (naive_extra, plan_diff) = if mode == Mode::Both {
        let (naive_res, naive_trace, naive_s) = solve_in(GradientMode::Naive)?;
        let diff = primary.plan.frobenius_distance(&naive_res.plan);
        (Some((naive_res, naive_trace, naive_s)), Some(diff))
    } else {
        (None, None)
    };

    let plan_out = args
        .plan_out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{subcommand}_plan.csv")));
    let result_out = args
        .result_out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{subcommand}_result.json")));
    let written_format = write_plan_csv(&plan_out, &primary.plan, plan_format, args.sparse_threshold)?;

    // built-in endpoint assertion for fgw --verify-endpoint
    let mut exit_code = 0;
    let endpoint_check = match fgw {
        Some(f) if f.verify_endpoint && f.theta == 0.0 => {
            let c = costs.as_ref().expect("fgw has costs");
            // the standalone solve gets the solver's total sweep allowance,
            // so the dual sequences agree sweep for sweep even when the
            // tolerance is out of reach
            let budget = config
                .sinkhorn_sweep_budget
                .unwrap_or(config.sinkhorn_max_iterations)
                .min(config.sinkhorn_max_iterations);
            let allowance = config.outer_iterations * budget + config.sinkhorn_max_iterations;
            let (ot_plan, _) = sinkhorn(
                &c.squared(),
                &problem.u,
                &problem.v,
                config.epsilon,
                allowance,
                config.sinkhorn_tolerance,
                config.log_domain,
            )?;
            let diff = primary.plan.frobenius_distance(&ot_plan);
            let passed = diff <= 1e-12;
            if !passed {
                exit_code = 2;
            }
            Some(json!({ "check": "theta0-sinkhorn-equivalence", "frobenius": diff, "passed": passed }))
        }
        Some(f) if f.verify_endpoint => Some(json!({
            "check": "theta0-sinkhorn-equivalence",
            "skipped": "theta != 0",
        })),
        _ => None,
    };

    let echo = build_echo(subcommand, args, fgw, &problem, &plan_out, &result_out);
    let mut output = json!({
        "config": echo,
        "result": {
            "gw_objective": primary.gw_objective,
            "entropic_objective": primary.entropic_objective,
            "iterations": primary.iterations_used,
            "marginal_violation": primary.marginal_violation,
        },
        "timings": timings_json(&trace, solve_s),
        "plan_file": plan_out.display().to_string(),
        "plan_format": written_format,
    });
    if let Some(diff) = plan_diff {
        output["plan_diff_fro"] = json!(diff);
    }
    if let Some((naive_res, naive_trace, naive_s)) = &naive_extra {
        output["naive"] = json!({
            "gw_objective": naive_res.gw_objective,
            "marginal_violation": naive_res.marginal_violation,
            "timings": timings_json(naive_trace, *naive_s),
        });
        if let (Some(f), Some(n)) = (
            Some(solve_s).filter(|s| *s > 0.0),
            Some(*naive_s).filter(|s| *s > 0.0),
        ) {
            output["speedup"] = json!(n / f);
        }
    }
    if let Some(check) = endpoint_check {
        output["endpoint_check"] = check;
    }

    let text = serde_json::to_string_pretty(&output).expect("result serializes");
    std::fs::write(&result_out, &text)?;
    println!("{text}");
    Ok(exit_code)
}

fn timings_json(trace: &MirrorDescentTrace<f64>, solve_s: f64) -> serde_json::Value {
    let gradient: f64 = trace.records.iter().map(|r| r.gradient_seconds).sum();
    let sink: f64 = trace.records.iter().map(|r| r.sinkhorn_seconds).sum();
    json!({
        "setup_s": trace.setup_seconds,
        "solve_s": solve_s,
        "gradient_s_total": gradient,
        "sinkhorn_s_total": sink,
    })
}

fn load_problem(args: &SolveArgs) -> Result<Problem> {
    match args.random.as_deref() {
        Some("1d") => {
            let n = args.n.ok_or(Error::ConfigInvalid {
                reason: "--random 1d needs --n".into(),
            })?;
            let u = random_1d(n, args, args.seed)?;
            let v = random_1d(n, args, args.seed.wrapping_add(1))?;
            Ok(Problem {
                u,
                v,
                default_costs: Some(index_feature_cost_1d(n, n)),
            })
        }
        Some("2d") => {
            let side = args.side.ok_or(Error::ConfigInvalid {
                reason: "--random 2d needs --side".into(),
            })?;
            let u = random_2d(side, args, args.seed)?;
            let v = random_2d(side, args, args.seed.wrapping_add(1))?;
            Ok(Problem {
                u,
                v,
                default_costs: Some(manhattan_feature_cost_2d(side)),
            })
        }
        Some(other) => Err(Error::ConfigInvalid {
            reason: format!("unknown --random kind {other:?} (1d|2d)"),
        }),
        None => {
            let source = args.source.as_ref().ok_or(Error::ConfigInvalid {
                reason: "pass --random, or --source and --target".into(),
            })?;
            let target = args.target.as_ref().ok_or(Error::ConfigInvalid {
                reason: "--source needs a matching --target".into(),
            })?;
            if is_image(source, args.image) != is_image(target, args.image) {
                return Err(Error::ConfigInvalid {
                    reason: "source and target must both be measures or both images".into(),
                });
            }
            if is_image(source, args.image) {
                let a = load_image_input(source, args)?;
                let b = load_image_input(target, args)?;
                let h = args.h.unwrap_or(1.0);
                let u = a.to_measure(h, args.k)?;
                let v = b.to_measure(h, args.k)?;
                let costs = feature_cost_from_images(&a, &b, GRAY_LEVEL_SCALE)?;
                Ok(Problem {
                    u,
                    v,
                    default_costs: Some(costs),
                })
            } else {
                let u = measure_from_csv(source, args)?;
                let v = measure_from_csv(target, args)?;
                Ok(Problem {
                    u,
                    v,
                    default_costs: None,
                })
            }
        }
    }
}

fn random_1d(n: usize, args: &SolveArgs, seed: u64) -> Result<Measure> {
    let m = gen_random_measure_1d(n, args.k, seed)?;
    match args.h {
        None => Ok(m),
        Some(h) => Measure::from_array(
            m.weights().clone(),
            fastgw::Grid1d::new(n, h, args.k)?,
        ),
    }
}

fn random_2d(side: usize, args: &SolveArgs, seed: u64) -> Result<Measure> {
    let m = gen_random_measure_2d(side, args.k, seed)?;
    match args.h {
        None => Ok(m),
        Some(h) => Measure::from_array(
            m.weights().clone(),
            fastgw::Grid2d::new(side, h, args.k)?,
        ),
    }
}

fn is_image(path: &Path, force_image: bool) -> bool {
    force_image
        || path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

fn load_image_input(path: &Path, args: &SolveArgs) -> Result<GrayscaleImage> {
    let img = GrayscaleImage::load(path)?;
    match args.side {
        Some(side) => img.subsample(side),
        None if img.width() == img.height() => Ok(img),
        None => Err(Error::NotSquareGrid {
            rows: img.height(),
            cols: img.width(),
        }),
    }
}

fn measure_from_csv(path: &Path, args: &SolveArgs) -> Result<Measure> {
    let weights = crate::io::read_measure_csv(path)?;
    let n = weights.len();
    let h = args
        .h
        .unwrap_or(if n > 1 { 1.0 / (n as f64 - 1.0) } else { 1.0 });
    Measure::new(weights, fastgw::Grid1d::new(n, h, args.k)?)
}

fn build_echo(
    subcommand: &str,
    args: &SolveArgs,
    fgw: Option<&FgwArgs>,
    problem: &Problem,
    plan_out: &Path,
    result_out: &Path,
) -> RunConfigEcho {
    let grid_of = |g: &Grid<f64>| -> (String, f64, u32) {
        match g {
            Grid::Line(l) => ("1d".into(), l.spacing(), l.power()),
            Grid::Square(s) => ("2d".into(), s.spacing(), s.power()),
        }
    };
    let (kind, h_source, k_source) = grid_of(problem.u.grid());
    let (_, h_target, k_target) = grid_of(problem.v.grid());
    RunConfigEcho {
        subcommand: subcommand.into(),
        random: args.random.clone(),
        n: args.n,
        side: args.side,
        source: args.source.as_ref().map(|p| p.display().to_string()),
        target: args.target.as_ref().map(|p| p.display().to_string()),
        cost: fgw
            .and_then(|f| f.cost.as_ref())
            .map(|p| p.display().to_string()),
        image: args.image,
        grid: GridEcho {
            kind,
            points_source: problem.u.len(),
            points_target: problem.v.len(),
            h_source,
            h_target,
            k_source,
            k_target,
        },
        solver: SolverEcho {
            epsilon: args.eps,
            tau: args.tau.unwrap_or(args.eps),
            theta: fgw.map(|f| f.theta),
            outer_iterations: args.iters,
            sinkhorn_max_iterations: args.sinkhorn_max_iters,
            sinkhorn_sweep_budget: (args.sinkhorn_budget > 0).then_some(args.sinkhorn_budget),
            sinkhorn_tolerance: args.tol,
            log_domain: !args.plain_domain,
        },
        mode: args.mode.clone(),
        seed: args.seed,
        plan_out: plan_out.display().to_string(),
        result_out: result_out.display().to_string(),
        plan_format: args.plan_format.clone(),
        sparse_threshold: args.sparse_threshold,
    }
}
