//! Timing harness: runs the solvers in fast and naive gradient modes over a
//! ladder of sizes, reports wall times, plan discrepancies between the
//! modes, and fitted log-log complexity slopes.
//!
//! Protocol per case: one warm-up run is discarded, then each repetition is
//! timed with a monotonic clock around the full solver call (workspace
//! setup inside the solver is also reported separately from the solver's
//! own trace). Means and medians are both recorded; the CSV column carries
//! the mean. The discrepancy column is the worst Frobenius distance between
//! fast-mode and naive-mode plans across repetitions, computed by the same
//! comparator the solver tests use.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{SolveResult, SolverConfig};
use crate::cost::FeatureCost;
use crate::dense::MATERIALIZATION_GUARD;
use crate::error::{Error, Result};
use crate::experiments::generators::{
    gen_random_measure_1d, gen_random_measure_2d, gen_two_hump_series, index_feature_cost_1d,
    manhattan_feature_cost_2d, synthetic_deformation_pair, synthetic_digit, HumpShape,
};
use crate::experiments::image::{feature_cost_from_images, GrayscaleImage, GRAY_LEVEL_SCALE};
use crate::gradient::GradientMode;
use crate::measure::DiscreteMeasure;
use crate::solver::{entropic_fgw, entropic_gw, MirrorDescentTrace};

/// Least-squares slope of `ln t` against `ln n`. `None` for fewer than
/// three points or nonpositive coordinates.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 || points.iter().any(|(n, t)| *n <= 0.0 || *t <= 0.0) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, t)| t.ln()).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Which objective the benchmark solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Gw,
    Fgw,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Gw => "gw",
            Metric::Fgw => "fgw",
        }
    }
}

/// Gradient modes to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSelection {
    pub fast: bool,
    pub naive: bool,
}

impl ModeSelection {
    pub fn both() -> Self {
        Self {
            fast: true,
            naive: true,
        }
    }

    pub fn fast_only() -> Self {
        Self {
            fast: true,
            naive: false,
        }
    }
}

/// The experiment families.
#[derive(Debug, Clone)]
pub enum BenchTask {
    /// Random measures on the 1D unit-interval grid, feature costs `|i-p|`.
    Random1d { sizes: Vec<usize> },
    /// Random measures on square grids over the unit square, Manhattan
    /// index feature costs.
    Random2d { sides: Vec<usize> },
    /// Two-hump series alignment (source humps at 0.2/0.7, target at
    /// 0.3/0.6), feature cost = signal difference.
    TimeSeries { sizes: Vec<usize> },
    /// A digit image aligned against its translated, rotated and mirrored
    /// copies; one row per transform. `h = 1`, feature costs in gray levels.
    Digits {
        side: usize,
        image: Option<GrayscaleImage>,
    },
    /// Two frames of a deforming shape, subsampled to each side, with
    /// `h = 100 / side`.
    Horse {
        sides: Vec<usize>,
        pair: Option<(GrayscaleImage, GrayscaleImage)>,
    },
}

impl BenchTask {
    pub fn name(&self) -> &'static str {
        match self {
            BenchTask::Random1d { .. } => "random1d",
            BenchTask::Random2d { .. } => "random2d",
            BenchTask::TimeSeries { .. } => "timeseries",
            BenchTask::Digits { .. } => "digits",
            BenchTask::Horse { .. } => "horse",
        }
    }
}

/// Full description of one benchmark invocation.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub task: BenchTask,
    pub metric: Metric,
    pub repetitions: usize,
    pub modes: ModeSelection,
    pub config: SolverConfig<f64>,
    pub seed: u64,
}

/// One benchmark row (one size, or one digit transform).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub time_fast_s: Option<f64>,
    pub time_fast_median_s: Option<f64>,
    pub setup_fast_s: Option<f64>,
    pub time_naive_s: Option<f64>,
    pub time_naive_median_s: Option<f64>,
    pub setup_naive_s: Option<f64>,
    /// `time_naive_s / time_fast_s` when both modes ran.
    pub speedup: Option<f64>,
    /// Worst `||P_fast - P_naive||_F` across repetitions.
    pub plan_diff_fro: Option<f64>,
}

/// Echo of the parameters a report was produced with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchParams {
    pub task: String,
    pub metric: String,
    pub epsilon: f64,
    pub tau: f64,
    pub theta: f64,
    pub outer_iterations: usize,
    pub sinkhorn_max_iterations: usize,
    pub sinkhorn_sweep_budget: Option<usize>,
    pub sinkhorn_tolerance: f64,
    pub log_domain: bool,
    pub repetitions: usize,
    pub seed: u64,
    pub modes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub params: BenchParams,
    pub rows: Vec<BenchRow>,
    /// Log-log slope of the fast-mode mean times; needs three distinct sizes.
    pub fitted_slope_fast: Option<f64>,
    pub fitted_slope_naive: Option<f64>,
}

impl BenchReport {
    /// Pinned CSV schema: `N,time_fast_s,time_naive_s,speedup,plan_diff_fro`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,time_fast_s,time_naive_s,speedup,plan_diff_fro\n");
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.n,
                fmt(row.time_fast_s),
                fmt(row.time_naive_s),
                fmt(row.speedup),
                fmt(row.plan_diff_fro),
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Terminal-friendly rendering with the slope footer.
    pub fn human_table(&self) -> String {
        let mut out = format!(
            "task {} ({}), {} repetition(s), seed {}\n",
            self.params.task, self.params.metric, self.params.repetitions, self.params.seed
        );
        out.push_str(&format!(
            "{:>12} {:>14} {:>14} {:>10} {:>14}\n",
            "N", "fast (s)", "naive (s)", "speedup", "plan diff"
        ));
        for row in &self.rows {
            let name = match &row.label {
                Some(l) => format!("{} {}", row.n, l),
                None => row.n.to_string(),
            };
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:>12} {:>14} {:>14} {:>10} {:>14}\n",
                name,
                fmt(row.time_fast_s),
                fmt(row.time_naive_s),
                row.speedup
                    .map(|s| format!("{s:.2}"))
                    .unwrap_or_else(|| "-".into()),
                fmt(row.plan_diff_fro),
            ));
        }
        if let Some(s) = self.fitted_slope_fast {
            out.push_str(&format!("fitted slope (fast):  {s:.3}\n"));
        }
        if let Some(s) = self.fitted_slope_naive {
            out.push_str(&format!("fitted slope (naive): {s:.3}\n"));
        }
        out
    }
}

struct Instance {
    u: DiscreteMeasure<f64>,
    v: DiscreteMeasure<f64>,
    costs: Option<FeatureCost<f64>>,
}

struct Case {
    n: usize,
    label: Option<String>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

fn sub_seed(seed: u64, case: u64, rep: u64, lane: u64) -> u64 {
    splitmix64(seed ^ splitmix64(case ^ splitmix64(rep ^ splitmix64(lane))))
}

/// Run the spec end to end.
pub fn run_benchmark(spec: &BenchSpec) -> Result<BenchReport> {
    spec.config.validate()?;
    if spec.repetitions == 0 {
        return Err(Error::ConfigInvalid {
            reason: "repetitions must be at least 1".into(),
        });
    }
    if !spec.modes.fast && !spec.modes.naive {
        return Err(Error::ConfigInvalid {
            reason: "at least one gradient mode must be selected".into(),
        });
    }
    let cases = cases_of(&spec.task)?;

    let mut rows = Vec::with_capacity(cases.len());
    for (ci, case) in cases.iter().enumerate() {
        let naive_fits = case.n <= MATERIALIZATION_GUARD;
        if spec.modes.naive && !naive_fits && !spec.modes.fast {
            return Err(Error::NaiveTooLarge {
                points: case.n,
                guard: MATERIALIZATION_GUARD,
            });
        }
        let run_naive = spec.modes.naive && naive_fits;
        if spec.modes.naive && !naive_fits {
            log::warn!(
                "naive mode skipped at N = {} (guard {MATERIALIZATION_GUARD})",
                case.n
            );
        }

        // warm-up, discarded
        let warm = instance_of(spec, ci, 0)?;
        if spec.modes.fast {
            solve(spec, &warm, GradientMode::Fast)?;
        }
        if run_naive {
            solve(spec, &warm, GradientMode::Naive)?;
        }

        let mut fast_times = Vec::new();
        let mut naive_times = Vec::new();
        let mut fast_setups = Vec::new();
        let mut naive_setups = Vec::new();
        let mut worst_diff: Option<f64> = None;
        for rep in 0..spec.repetitions {
            let inst = instance_of(spec, ci, rep)?;
            let fast = if spec.modes.fast {
                let t = Instant::now();
                let (res, trace) = solve(spec, &inst, GradientMode::Fast)?;
                fast_times.push(t.elapsed().as_secs_f64());
                fast_setups.push(trace.setup_seconds);
                Some(res)
            } else {
                None
            };
            let naive = if run_naive {
                let t = Instant::now();
                let (res, trace) = solve(spec, &inst, GradientMode::Naive)?;
                naive_times.push(t.elapsed().as_secs_f64());
                naive_setups.push(trace.setup_seconds);
                Some(res)
            } else {
                None
            };
            if let (Some(f), Some(nv)) = (&fast, &naive) {
                let diff = f.plan.frobenius_distance(&nv.plan);
                worst_diff = Some(worst_diff.map_or(diff, |w: f64| w.max(diff)));
            }
        }

        let time_fast = mean(&fast_times);
        let time_naive = mean(&naive_times);
        rows.push(BenchRow {
            n: case.n,
            label: case.label.clone(),
            time_fast_s: time_fast,
            time_fast_median_s: median(&fast_times),
            setup_fast_s: mean(&fast_setups),
            time_naive_s: time_naive,
            time_naive_median_s: median(&naive_times),
            setup_naive_s: mean(&naive_setups),
            speedup: match (time_fast, time_naive) {
                (Some(f), Some(n)) if f > 0.0 => Some(n / f),
                _ => None,
            },
            plan_diff_fro: worst_diff,
        });
    }

    let slope_points = |pick: fn(&BenchRow) -> Option<f64>| -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| pick(r).map(|t| (r.n as f64, t)))
            .collect();
        pts.dedup_by(|a, b| a.0 == b.0);
        pts
    };
    let fitted_slope_fast = fit_loglog_slope(&slope_points(|r| r.time_fast_s));
    let fitted_slope_naive = fit_loglog_slope(&slope_points(|r| r.time_naive_s));

    let mut modes = Vec::new();
    if spec.modes.fast {
        modes.push("fast".to_string());
    }
    if spec.modes.naive {
        modes.push("naive".to_string());
    }
    Ok(BenchReport {
        params: BenchParams {
            task: spec.task.name().into(),
            metric: spec.metric.name().into(),
            epsilon: spec.config.epsilon,
            tau: spec.config.tau,
            theta: spec.config.theta,
            outer_iterations: spec.config.outer_iterations,
            sinkhorn_max_iterations: spec.config.sinkhorn_max_iterations,
            sinkhorn_sweep_budget: spec.config.sinkhorn_sweep_budget,
            sinkhorn_tolerance: spec.config.sinkhorn_tolerance,
            log_domain: spec.config.log_domain,
            repetitions: spec.repetitions,
            seed: spec.seed,
            modes,
        },
        rows,
        fitted_slope_fast,
        fitted_slope_naive,
    })
}

fn mean(times: &[f64]) -> Option<f64> {
    if times.is_empty() {
        None
    } else {
        Some(times.iter().sum::<f64>() / times.len() as f64)
    }
}

fn median(times: &[f64]) -> Option<f64> {
    if times.is_empty() {
        return None;
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

fn ascending(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::ConfigInvalid {
            reason: "size list must not be empty".into(),
        });
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ConfigInvalid {
            reason: "sizes must be strictly ascending".into(),
        });
    }
    Ok(())
}

fn cases_of(task: &BenchTask) -> Result<Vec<Case>> {
    Ok(match task {
        BenchTask::Random1d { sizes } | BenchTask::TimeSeries { sizes } => {
            ascending(sizes)?;
            sizes.iter().map(|&n| Case { n, label: None }).collect()
        }
        BenchTask::Random2d { sides } => {
            ascending(sides)?;
            sides
                .iter()
                .map(|&s| Case {
                    n: s * s,
                    label: Some(format!("{s}x{s}")),
                })
                .collect()
        }
        BenchTask::Digits { side, .. } => ["translation", "rotation", "reflection"]
            .iter()
            .map(|l| Case {
                n: side * side,
                label: Some((*l).to_string()),
            })
            .collect(),
        BenchTask::Horse { sides, .. } => {
            ascending(sides)?;
            sides
                .iter()
                .map(|&s| Case {
                    n: s * s,
                    label: Some(format!("{s}x{s}")),
                })
                .collect()
        }
    })
}

fn instance_of(spec: &BenchSpec, case_index: usize, rep: usize) -> Result<Instance> {
    let ci = case_index as u64;
    let rep = rep as u64;
    match &spec.task {
        BenchTask::Random1d { sizes } => {
            let n = sizes[case_index];
            let u = gen_random_measure_1d(n, 1, sub_seed(spec.seed, ci, rep, 0))?;
            let v = gen_random_measure_1d(n, 1, sub_seed(spec.seed, ci, rep, 1))?;
            let costs = (spec.metric == Metric::Fgw).then(|| index_feature_cost_1d(n, n));
            Ok(Instance { u, v, costs })
        }
        BenchTask::Random2d { sides } => {
            let side = sides[case_index];
            let u = gen_random_measure_2d(side, 1, sub_seed(spec.seed, ci, rep, 0))?;
            let v = gen_random_measure_2d(side, 1, sub_seed(spec.seed, ci, rep, 1))?;
            let costs = (spec.metric == Metric::Fgw).then(|| manhattan_feature_cost_2d(side));
            Ok(Instance { u, v, costs })
        }
        BenchTask::TimeSeries { sizes } => {
            let n = sizes[case_index];
            let series = gen_two_hump_series(
                n,
                (0.2, 0.7),
                (0.3, 0.6),
                &HumpShape::default(),
                Some(sub_seed(spec.seed, ci, rep, 2)),
            )?;
            Ok(Instance {
                u: series.source,
                v: series.target,
                costs: Some(series.costs),
            })
        }
        BenchTask::Digits { side, image } => {
            let base = match image {
                Some(img) => img.subsample(*side)?,
                None => synthetic_digit(*side),
            };
            let shift = (*side as i64 / 9).max(1);
            let transformed = match case_index {
                0 => base.translated(shift, shift),
                1 => base.rotated90(1),
                _ => base.mirrored(),
            };
            let u = base.to_measure(1.0, 1)?;
            let v = transformed.to_measure(1.0, 1)?;
            let costs = feature_cost_from_images(&base, &transformed, GRAY_LEVEL_SCALE)?;
            Ok(Instance {
                u,
                v,
                costs: Some(costs),
            })
        }
        BenchTask::Horse { sides, pair } => {
            let side = sides[case_index];
            let (a, b) = match pair {
                Some((a, b)) => (a.clone(), b.clone()),
                None => synthetic_deformation_pair(512),
            };
            let (a, b) = (a.subsample(side)?, b.subsample(side)?);
            let h = 100.0 / side as f64;
            let u = a.to_measure(h, 1)?;
            let v = b.to_measure(h, 1)?;
            let costs = feature_cost_from_images(&a, &b, GRAY_LEVEL_SCALE)?;
            Ok(Instance {
                u,
                v,
                costs: Some(costs),
            })
        }
    }
}

fn solve(
    spec: &BenchSpec,
    inst: &Instance,
    mode: GradientMode,
) -> Result<(SolveResult<f64>, MirrorDescentTrace<f64>)> {
    match spec.metric {
        Metric::Gw => entropic_gw(&inst.u, &inst.v, &spec.config, mode),
        Metric::Fgw => {
            let costs = inst.costs.as_ref().expect("fgw instances carry costs");
            entropic_fgw(&inst.u, &inst.v, costs, &spec.config, mode)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fitter_recovers_exact_powers() {
        for p in [2.0, 3.0] {
            let points: Vec<(f64, f64)> = [250.0, 500.0, 1000.0, 2000.0]
                .iter()
                .map(|&n: &f64| (n, 3.2e-9 * n.powf(p)))
                .collect();
            let slope = fit_loglog_slope(&points).unwrap();
            assert!((slope - p).abs() <= 0.01, "slope = {slope}");
        }
    }

    #[test]
    fn slope_fitter_needs_three_points() {
        assert!(fit_loglog_slope(&[(10.0, 1.0), (20.0, 2.0)]).is_none());
        assert!(fit_loglog_slope(&[(10.0, 1.0), (20.0, 0.0), (30.0, 2.0)]).is_none());
    }

    #[test]
    fn smoke_random1d_both_modes() {
        let spec = BenchSpec {
            task: BenchTask::Random1d {
                sizes: vec![16, 24],
            },
            metric: Metric::Gw,
            repetitions: 1,
            modes: ModeSelection::both(),
            config: SolverConfig::new(0.05).with_outer_iterations(3),
            seed: 5,
        };
        let report = run_benchmark(&spec).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.time_fast_s.unwrap() > 0.0);
            assert!(row.time_naive_s.unwrap() > 0.0);
            assert!(row.plan_diff_fro.unwrap() <= 1e-12);
            assert!(row.speedup.is_some());
        }
        // two sizes only: no slope
        assert!(report.fitted_slope_fast.is_none());
        let csv = report.to_csv();
        assert!(csv.starts_with("N,time_fast_s,time_naive_s,speedup,plan_diff_fro\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn plan_discrepancies_are_deterministic() {
        let spec = BenchSpec {
            task: BenchTask::Random1d { sizes: vec![20] },
            metric: Metric::Fgw,
            repetitions: 2,
            modes: ModeSelection::both(),
            config: SolverConfig::new(0.05).with_outer_iterations(2),
            seed: 11,
        };
        let a = run_benchmark(&spec).unwrap();
        let b = run_benchmark(&spec).unwrap();
        assert_eq!(a.rows[0].plan_diff_fro, b.rows[0].plan_diff_fro);
    }

    #[test]
    fn naive_only_above_guard_is_refused() {
        let spec = BenchSpec {
            task: BenchTask::Random2d { sides: vec![96] }, // 9216 points
            metric: Metric::Gw,
            repetitions: 1,
            modes: ModeSelection {
                fast: false,
                naive: true,
            },
            config: SolverConfig::new(0.05),
            seed: 1,
        };
        assert!(matches!(
            run_benchmark(&spec),
            Err(Error::NaiveTooLarge { .. })
        ));
    }

    #[test]
    fn digits_task_produces_labeled_rows() {
        let spec = BenchSpec {
            task: BenchTask::Digits {
                side: 10,
                image: None,
            },
            metric: Metric::Fgw,
            repetitions: 1,
            modes: ModeSelection::both(),
            config: SolverConfig::new(30.0).with_theta(0.1).with_outer_iterations(3),
            seed: 2,
        };
        let report = run_benchmark(&spec).unwrap();
        let labels: Vec<_> = report
            .rows
            .iter()
            .map(|r| r.label.clone().unwrap())
            .collect();
        assert_eq!(labels, ["translation", "rotation", "reflection"]);
        for row in &report.rows {
            assert!(row.plan_diff_fro.unwrap() <= 1e-11);
        }
    }

    #[test]
    fn sizes_must_ascend() {
        let spec = BenchSpec {
            task: BenchTask::Random1d {
                sizes: vec![30, 20],
            },
            metric: Metric::Gw,
            repetitions: 1,
            modes: ModeSelection::fast_only(),
            config: SolverConfig::new(0.05),
            seed: 0,
        };
        assert!(matches!(
            run_benchmark(&spec),
            Err(Error::ConfigInvalid { .. })
        ));
    }
}
