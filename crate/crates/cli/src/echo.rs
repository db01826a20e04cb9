//! Resolved run configuration, echoed verbatim into every output JSON so a
//! result file fully documents the run that produced it.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfigEcho {
    pub subcommand: String,
    pub random: Option<String>,
    pub n: Option<usize>,
    pub side: Option<usize>,
    pub source: Option<String>,
    pub target: Option<String>,
    pub cost: Option<String>,
    pub image: bool,
    pub grid: GridEcho,
    pub solver: SolverEcho,
    pub mode: String,
    pub seed: u64,
    pub plan_out: String,
    pub result_out: String,
    pub plan_format: String,
    pub sparse_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEcho {
    /// "1d" or "2d"
    pub kind: String,
    pub points_source: usize,
    pub points_target: usize,
    pub h_source: f64,
    pub h_target: f64,
    pub k_source: u32,
    pub k_target: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverEcho {
    pub epsilon: f64,
    pub tau: f64,
    pub theta: Option<f64>,
    pub outer_iterations: usize,
    pub sinkhorn_max_iterations: usize,
    pub sinkhorn_sweep_budget: Option<usize>,
    pub sinkhorn_tolerance: f64,
    pub log_domain: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips_through_json() {
        let echo = RunConfigEcho {
            subcommand: "gw".into(),
            random: Some("1d".into()),
            n: Some(500),
            side: None,
            source: None,
            target: None,
            cost: None,
            image: false,
            grid: GridEcho {
                kind: "1d".into(),
                points_source: 500,
                points_target: 500,
                h_source: 1.0 / 499.0,
                h_target: 1.0 / 499.0,
                k_source: 1,
                k_target: 1,
            },
            solver: SolverEcho {
                epsilon: 0.002,
                tau: 0.002,
                theta: None,
                outer_iterations: 10,
                sinkhorn_max_iterations: 10_000,
                sinkhorn_sweep_budget: Some(10),
                sinkhorn_tolerance: 1e-9,
                log_domain: true,
            },
            mode: "both".into(),
            seed: 7,
            plan_out: "gw_plan.csv".into(),
            result_out: "gw_result.json".into(),
            plan_format: "auto".into(),
            sparse_threshold: 1e-12,
        };
        let text = serde_json::to_string(&echo).unwrap();
        let parsed: RunConfigEcho = serde_json::from_str(&text).unwrap();
        assert_eq!(echo, parsed);
    }
}
