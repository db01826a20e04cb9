//! The `verify` subcommand: an executable ledger of the oracle and
//! invariant checks. Prints one PASS/FAIL line per check; exits 0 when all
//! pass, 2 otherwise.

use clap::Args;
use ndarray::{Array2, Axis};

use fastgw::dense::{dense_distance_matrix, dense_distance_matrix_pow, naive_triple_product};
use fastgw::experiments::gen_random_measure_1d;
use fastgw::gradient::{gw_gradient, GradientWorkspace};
use fastgw::multiply::{
    apply_distance_1d, apply_distance_2d, apply_lower, apply_lower_counted,
    apply_lower_with_table, apply_upper, triple_product_1d, triple_product_2d, BinomialTable,
};
use fastgw::sinkhorn::sinkhorn;
use fastgw::{
    entropic_gw, Config, DiscreteMeasure, GradientMode, Grid, Grid1d, Grid2d, Measure, Result,
};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Largest 1D size exercised by the multiply oracles
    #[arg(long, default_value_t = 256)]
    pub n: usize,

    /// Largest 2D side exercised
    #[arg(long, default_value_t = 12)]
    pub side: usize,

    /// Largest distance exponent exercised
    #[arg(long, default_value_t = 3)]
    pub k: u32,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Test hook: corrupt an internal table to prove the oracle checks can
    /// fail ("binomial" flips one coefficient)
    #[arg(long, value_name = "FAULT")]
    pub inject_fault: Option<String>,
}

struct Ledger {
    failures: Vec<String>,
}

impl Ledger {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, detail: String, ok: bool) {
        if ok {
            println!("PASS {name} ({detail})");
        } else {
            println!("FAIL {name} ({detail})");
            self.failures.push(name.to_string());
        }
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn rel_mat_err(got: &Array2<f64>, want: &Array2<f64>) -> f64 {
    let num = fastgw::plan::frobenius_diff(got, want);
    let den = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let mut ledger = Ledger::new();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let fault_binomial = args.inject_fault.as_deref() == Some("binomial");

    // multiply-oracle-1d: recursion vs entrywise dense matrix
    {
        let mut worst: f64 = 0.0;
        for k in 1..=args.k {
            for n in [16usize, 64, args.n.max(65)] {
                let x = rand_vec(&mut rng, n);
                let got = if fault_binomial {
                    let mut table = BinomialTable::new(k as usize + 1);
                    table.override_entry(k as usize + 1, k as usize, 7.0);
                    apply_lower_with_table(&x, k, &table)?
                } else {
                    apply_lower(&x, k)?
                };
                let mut want = vec![0.0; n];
                for i in 0..n {
                    for j in 0..i {
                        want[i] += ((i - j) as f64).powi(k as i32) * x[j];
                    }
                }
                worst = worst.max(rel_err(&got, &want));
            }
        }
        ledger.check(
            "multiply-oracle-1d",
            format!("worst rel err {worst:.3e}, bound 1e-12"),
            worst <= 1e-12,
        );
    }

    // multiply-oracle-2d: Kronecker expansion vs dense Manhattan matrix
    {
        let mut worst: f64 = 0.0;
        for k in 1..=args.k.min(3) {
            for side in [4usize, 8, args.side.max(9)] {
                let g = Grid2d::new(side, 0.3, k)?;
                let x = rand_vec(&mut rng, side * side);
                let got = apply_distance_2d(&x, &g, None)?;
                let d = dense_distance_matrix(&Grid::Square(g), true)?;
                let want: Vec<f64> = d
                    .rows()
                    .into_iter()
                    .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
                    .collect();
                worst = worst.max(rel_err(&got, &want));
            }
        }
        ledger.check(
            "multiply-oracle-2d",
            format!("worst rel err {worst:.3e}, bound 1e-11"),
            worst <= 1e-11,
        );
    }

    // operation-count: exact arithmetic tally of the lower sweep
    {
        let mut ok = true;
        let mut detail = String::new();
        for k in 1..=args.k {
            let n = args.n.max(4);
            let x = rand_vec(&mut rng, n);
            let (_, count) = apply_lower_counted(&x, k)?;
            let mults = (n as u64 - 1) * (k as u64) * (k as u64 + 1) / 2;
            let adds = (n as u64 - 1) * (k as u64 + 1) * (k as u64 + 2) / 2;
            if count.multiplications != mults || count.additions != adds {
                ok = false;
                detail = format!(
                    "k={k}: got {}x/{}+, want {mults}x/{adds}+",
                    count.multiplications, count.additions
                );
                break;
            }
        }
        if ok {
            detail = format!("(N-1)k(k+1)/2 multiplications at k <= {}", args.k);
        }
        ledger.check("operation-count", detail, ok);
    }

    // upper-reversal: bitwise identity with reverse(lower(reverse(x)))
    {
        let x = rand_vec(&mut rng, args.n.max(8));
        let k = args.k.max(1);
        let got = apply_upper(&x, k)?;
        let mut rev = x.clone();
        rev.reverse();
        let mut want = apply_lower(&rev, k)?;
        want.reverse();
        let ok = got
            .iter()
            .zip(&want)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ledger.check("upper-reversal", "bit-exact mirror recursion".into(), ok);
    }

    // triple-product oracles
    {
        let n = args.n.clamp(32, 256);
        let gx = Grid1d::new(n, 1.0 / (n as f64 - 1.0), 1)?;
        let gy = Grid1d::new(n, 0.7 / (n as f64 - 1.0), 2)?;
        let plan = Array2::from_shape_fn((n, n), |_| rng.random::<f64>());
        let fast = triple_product_1d(&plan, &gx, &gy)?;
        let naive = naive_triple_product(&plan, &Grid::Line(gx), &Grid::Line(gy), true)?;
        let err = rel_mat_err(&fast, &naive);
        ledger.check(
            "triple-product-1d",
            format!("N={n}, rel err {err:.3e}, bound 1e-12"),
            err <= 1e-12,
        );

        let side = args.side.clamp(4, 16);
        let g2 = Grid2d::new(side, 1.0 / (side as f64 - 1.0), 1)?;
        let plan2 = Array2::from_shape_fn((side * side, side * side), |_| rng.random::<f64>());
        let fast2 = triple_product_2d(&plan2, &g2, &g2)?;
        let naive2 = naive_triple_product(&plan2, &Grid::Square(g2), &Grid::Square(g2), true)?;
        let err2 = rel_mat_err(&fast2, &naive2);
        ledger.check(
            "triple-product-2d",
            format!("side={side}, rel err {err2:.3e}, bound 1e-11"),
            err2 <= 1e-11,
        );
    }

    // gradient-brute-force and gradient-finite-difference at N = 8
    {
        let mut plan = Array2::from_shape_fn((8, 8), |_| 0.05 + rng.random::<f64>());
        let total: f64 = plan.sum();
        plan.mapv_inplace(|v| v / total);
        let g = Grid1d::new(8, 0.25, 1)?;
        let u = DiscreteMeasure::from_array(plan.sum_axis(Axis(1)), g)?;
        let v = DiscreteMeasure::from_array(plan.sum_axis(Axis(0)), g)?;
        let ws = GradientWorkspace::gw(&u, &v)?;
        let grad = gw_gradient(&plan, &ws, GradientMode::Fast)?;

        let dx = dense_distance_matrix(u.grid(), true)?;
        let dy = dense_distance_matrix(v.grid(), true)?;
        let brute = Array2::from_shape_fn((8, 8), |(i, p)| {
            let mut s = 0.0;
            for j in 0..8 {
                for q in 0..8 {
                    let d = dx[(i, j)] - dy[(p, q)];
                    s += d * d * plan[(j, q)];
                }
            }
            2.0 * s
        });
        let err = rel_mat_err(&grad, &brute);
        ledger.check(
            "gradient-brute-force",
            format!("N=8 rel err {err:.3e}, bound 1e-11"),
            err <= 1e-11,
        );

        let brute_obj = |p: &Array2<f64>| -> f64 {
            let mut e = 0.0;
            for i in 0..8 {
                for j in 0..8 {
                    for a in 0..8 {
                        for b in 0..8 {
                            let d = dx[(i, j)] - dy[(a, b)];
                            e += d * d * p[(i, a)] * p[(j, b)];
                        }
                    }
                }
            }
            e
        };
        let delta = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..8 {
            for p in 0..8 {
                let mut plus = plan.clone();
                plus[(i, p)] += delta;
                let mut minus = plan.clone();
                minus[(i, p)] -= delta;
                let fd = (brute_obj(&plus) - brute_obj(&minus)) / (2.0 * delta);
                worst = worst.max((fd - grad[(i, p)]).abs() / grad[(i, p)].abs().max(1.0));
            }
        }
        ledger.check(
            "gradient-finite-difference",
            format!("N=8 worst rel err {worst:.3e}, bound 1e-5"),
            worst <= 1e-5,
        );
    }

    // sinkhorn contracts
    {
        let u = gen_random_measure_1d(24, 1, args.seed.wrapping_add(11))?;
        let v = gen_random_measure_1d(24, 1, args.seed.wrapping_add(12))?;
        let zero = Array2::<f64>::zeros((24, 24));
        let (plan, _) = sinkhorn(&zero, &u, &v, 1.0, 1000, 1e-10, true)?;
        let mut worst: f64 = 0.0;
        for ((i, p), g) in plan.values().indexed_iter() {
            worst = worst.max((g - u.weights()[i] * v.weights()[p]).abs());
        }
        ledger.check(
            "sinkhorn-zero-cost",
            format!("|plan - u v^T| <= {worst:.3e}, bound 1e-10"),
            worst <= 1e-10,
        );

        let gm = Grid1d::new(2, 1.0, 1)?;
        let half = Measure::new(vec![0.5, 0.5], gm)?;
        let cost = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
        let (plan2, _) = sinkhorn(&cost, &half, &half, 1.0, 10_000, 1e-12, true)?;
        let sigma = 1.0 / (1.0 + (-1.0f64).exp());
        let want = ndarray::array![
            [sigma / 2.0, (1.0 - sigma) / 2.0],
            [(1.0 - sigma) / 2.0, sigma / 2.0]
        ];
        let err = fastgw::plan::frobenius_diff(plan2.values(), &want);
        ledger.check(
            "sinkhorn-gibbs-2x2",
            format!("closed-form err {err:.3e}, bound 1e-10"),
            err <= 1e-10,
        );

        let cost3 = Array2::from_shape_fn((24, 24), |_| rng.random::<f64>());
        let (plan3, run3) = sinkhorn(&cost3, &u, &v, 0.05, 10_000, 1e-9, true)?;
        let viol = plan3.marginal_violation();
        ledger.check(
            "sinkhorn-marginals",
            format!(
                "violation {viol:.3e} after {} sweeps, bound 1e-9",
                run3.sweeps
            ),
            run3.converged && viol <= 1e-9,
        );
    }

    // reversal-equivariance of a full solve at N = 100
    {
        let u = gen_random_measure_1d(100, 1, args.seed.wrapping_add(21))?;
        let v = gen_random_measure_1d(100, 1, args.seed.wrapping_add(22))?;
        let cfg = Config::new(0.01).with_sinkhorn_limits(300, 1e-15);
        let (res, _) = entropic_gw(&u, &v, &cfg, GradientMode::Fast)?;
        let (res_rev, _) = entropic_gw(&u.reversed(), &v, &cfg, GradientMode::Fast)?;
        let flipped =
            Array2::from_shape_fn((100, 100), |(i, p)| res.plan.values()[(99 - i, p)]);
        let diff = fastgw::plan::frobenius_diff(res_rev.plan.values(), &flipped);
        ledger.check(
            "reversal-equivariance",
            format!("N=100 Frobenius diff {diff:.3e}, bound 1e-10"),
            diff <= 1e-10,
        );
    }

    // mode-equivalence of full solves
    {
        let u = gen_random_measure_1d(60, 1, args.seed.wrapping_add(31))?;
        let v = gen_random_measure_1d(60, 1, args.seed.wrapping_add(32))?;
        let cfg = Config::new(0.01);
        let (fast, _) = entropic_gw(&u, &v, &cfg, GradientMode::Fast)?;
        let (naive, _) = entropic_gw(&u, &v, &cfg, GradientMode::Naive)?;
        let diff = fast.plan.frobenius_distance(&naive.plan);
        ledger.check(
            "mode-equivalence-1d",
            format!("N=60 plan diff {diff:.3e}, bound 1e-12"),
            diff <= 1e-12,
        );
    }

    // power-override consistency: doubled power equals entrywise square
    {
        let n = args.n.clamp(16, 128);
        let g = Grid1d::new(n, 0.05, 2)?;
        let x = rand_vec(&mut rng, n);
        let got = apply_distance_1d(&x, &g, Some(4))?;
        let d2 = dense_distance_matrix_pow(&Grid::Line(g), 4, true)?;
        let want: Vec<f64> = d2
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        let err = rel_err(&got, &want);
        ledger.check(
            "power-override",
            format!("rel err {err:.3e}, bound 1e-12"),
            err <= 1e-12,
        );
    }

    if ledger.failures.is_empty() {
        println!("verify: all checks passed");
        Ok(0)
    } else {
        eprintln!("verify: FAILED checks: {}", ledger.failures.join(", "));
        Ok(2)
    }
}
