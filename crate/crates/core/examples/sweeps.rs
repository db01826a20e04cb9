use std::time::Instant;

use fastgw::experiments::gen_random_measure_1d;
use fastgw::{entropic_gw, Config, GradientMode};

fn probe(n: usize, cfg: &Config, mode: GradientMode, label: &str) -> f64 {
    let u = gen_random_measure_1d(n, 1, 7).unwrap();
    let v = gen_random_measure_1d(n, 1, 8).unwrap();
    let t = Instant::now();
    let (res, trace) = entropic_gw(&u, &v, cfg, mode).unwrap();
    let dt = t.elapsed().as_secs_f64();
    let sweeps: usize = trace.records.iter().map(|r| r.sinkhorn_sweeps).sum();
    let grad: f64 = trace.records.iter().map(|r| r.gradient_seconds).sum();
    let sink: f64 = trace.records.iter().map(|r| r.sinkhorn_seconds).sum();
    println!(
        "{label:>6} N={n:<5}: total {dt:8.3}s grad {grad:8.3}s sink {sink:7.3}s sweeps {sweeps:5} viol {:.2e} obj {:.6e}",
        res.marginal_violation, res.gw_objective
    );
    dt
}

fn main() {
    // paper-parity inner policy: budget = cap = 10
    let parity = Config::new(0.002)
        .with_sinkhorn_sweep_budget(Some(10))
        .with_sinkhorn_limits(10, 1e-9);
    let mut fast_pts = Vec::new();
    let mut naive_pts = Vec::new();
    for n in [250usize, 500, 1000, 2000] {
        let t = probe(n, &parity, GradientMode::Fast, "fast");
        fast_pts.push((n as f64, t));
    }
    for n in [250usize, 500, 1000] {
        let t = probe(n, &parity, GradientMode::Naive, "naive");
        naive_pts.push((n as f64, t));
    }
    let sf = fastgw::experiments::fit_loglog_slope(&fast_pts).unwrap();
    let sn = fastgw::experiments::fit_loglog_slope(&naive_pts).unwrap();
    println!("fast slope {sf:.3}  naive slope {sn:.3}");
    println!("speedup at N=1000: {:.1}", naive_pts[2].1 / fast_pts[2].1);

    // polished default at N=500 for the quality mode
    let polished = Config::new(0.002);
    probe(500, &polished, GradientMode::Fast, "fastP");
}
