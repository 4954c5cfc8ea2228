//! One PASS/FAIL line per acceptance criterion. Runs without the test
//! harness so the lines are always printed; exits non-zero on any failure.

mod common;

use std::time::{Duration, Instant};

use common::{greedy_principal_angles, mu_ball_lines_in_plane};
use grasscode::blichfeldt::DensityParams;
use grasscode::bounds::{crossover_delta_star, crossover_lp_hamming, rankin_sq_bound, RatePoint};
use grasscode::bounds::{rate_hamming, rate_rankin_new};
use grasscode::geometry::embedding_radius;
use grasscode::packing::{icosahedron_lines, optimize_restarts, three_lines, OptimizeOptions};
use grasscode::rng;
use grasscode::verify::{verify_counting, verify_isometry, verify_total_density};
use grasscode::volume::{estimate_mu_ball, exponent_trace, sample_uniform_subspace, Estimator};
use grasscode::principal_angles;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn crossover_table() -> Outcome {
    let (o, t) = timed(|| {
        let table = [(2, 1.37, 0.01), (3, 1.717, 0.005), (4, 1.992, 0.005), (5, 2.231, 0.005), (10, 3.161, 0.005)];
        let mut passed = true;
        let mut parts = Vec::new();
        for (k, want, tol) in table {
            match crossover_delta_star(k) {
                Ok(v) => {
                    passed &= (v - want).abs() <= tol;
                    parts.push(format!("k={k}: {v:.4}"));
                }
                Err(e) => {
                    passed = false;
                    parts.push(format!("k={k}: {e}"));
                }
            }
        }
        Outcome { passed, detail: parts.join(", ") }
    });
    Outcome { passed: o.passed && t < Duration::from_secs(1), detail: format!("{} in {:.3}s", o.detail, t.as_secs_f64()) }
}

fn lp_hamming_crossing() -> Outcome {
    let a = crossover_lp_hamming(2).unwrap_or(f64::NAN);
    let b = crossover_lp_hamming(3).unwrap_or(f64::NAN);
    Outcome {
        passed: (a - 0.74).abs() <= 0.01 && (b - 1.31).abs() <= 0.01,
        detail: format!("k=2: {a:.4}, k=3: {b:.4}"),
    }
}

fn isometry_suite() -> Outcome {
    let (o, t) = timed(|| match verify_isometry(1000, 2024) {
        Ok(r) => Outcome {
            passed: r.passed,
            detail: format!(
                "max |d^2 - |dPi|^2/2|/k = {:.2e}, max norm error = {:.2e}",
                r.max_isometry_error_per_k, r.max_norm_error
            ),
        },
        Err(e) => Outcome { passed: false, detail: e.to_string() },
    });
    Outcome { passed: o.passed && t < Duration::from_secs(10), detail: format!("{} in {:.2}s", o.detail, t.as_secs_f64()) }
}

fn principal_angle_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, n) in [(1, 3), (2, 4), (2, 5)] {
        for t in 0..100 {
            let mut s = rng::stream(77, (k * 10 + n) as u64 * 1000 + t);
            let p = sample_uniform_subspace(n, k, &mut s).unwrap();
            let q = sample_uniform_subspace(n, k, &mut s).unwrap();
            let svd = principal_angles(&p, &q).unwrap();
            let greedy = greedy_principal_angles(&p, &q);
            for (a, b) in svd.theta().iter().zip(&greedy) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Outcome { passed: worst <= 1e-6, detail: format!("max angle difference {worst:.2e}") }
}

fn density_suite() -> Outcome {
    let (o, t) = timed(|| match verify_total_density(100, 1) {
        Ok((r, ok)) => Outcome {
            passed: ok && r.max_total_density <= 1.0 + 1e-9 && r.max_quadratic_lhs <= 1e-9,
            detail: format!(
                "{} points, max total density {:.12}, max quadratic LHS {:.2e}",
                r.trials, r.max_total_density, r.max_quadratic_lhs
            ),
        },
        Err(e) => Outcome { passed: false, detail: e.to_string() },
    });
    Outcome { passed: o.passed && t < Duration::from_secs(30), detail: format!("{} in {:.2}s", o.detail, t.as_secs_f64()) }
}

fn volume_closed_loop() -> Outcome {
    let r = embedding_radius(1, 2);
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, frac) in [0.2, 0.5, 0.85].into_iter().enumerate() {
        let rho = frac * r;
        let params = DensityParams::from_rho(rho, r).unwrap();
        let est = estimate_mu_ball(&params, 1, 2, 200_000, 500 + i as u64).unwrap();
        let exact = mu_ball_lines_in_plane(rho);
        let z = (est.mean - exact).abs() / est.stderr;
        passed &= z <= 3.0;
        parts.push(format!("rho={rho:.3}: {z:.2} sigma"));
    }
    Outcome { passed, detail: parts.join(", ") }
}

fn exponent_approach() -> Outcome {
    let (o, t) = timed(|| match exponent_trace(0.5, 2, &[8, 16, 32], 1_000_000, Estimator::Rescaled, 0) {
        Ok(rows) => {
            let target = 0.5f64.ln();
            let gaps: Vec<f64> = rows.iter().map(|p| (p.normalized_log.unwrap() - target).abs()).collect();
            let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
            let logs: Vec<String> = rows.iter().map(|p| format!("n={}: {:.4}", p.n, p.normalized_log.unwrap())).collect();
            Outcome {
                passed: decreasing && gaps[2] <= 0.25,
                detail: format!("{} (ln 0.5 = {target:.4})", logs.join(", ")),
            }
        }
        Err(e) => Outcome { passed: false, detail: e.to_string() },
    });
    Outcome { passed: o.passed && t < Duration::from_secs(300), detail: format!("{} in {:.1}s", o.detail, t.as_secs_f64()) }
}

fn counting_bound() -> Outcome {
    match verify_counting(200, 20_000, 8) {
        Ok((s, _)) => Outcome {
            passed: s.passed && s.codes == 200,
            detail: format!("{} codes, {} failures, largest M = {}, max ratio {:.3}", s.codes, s.failures, s.largest_code, s.max_ratio),
        },
        Err(e) => Outcome { passed: false, detail: e.to_string() },
    }
}

fn packing_optima() -> Outcome {
    let opts = OptimizeOptions::default();
    let three = optimize_restarts(3, 1, 2, 20, &opts, 0).map(|o| o.best.code.min_distance_sq());
    let six = optimize_restarts(6, 1, 3, 20, &opts, 0).map(|o| o.best.code.min_distance_sq());
    let (three, six) = (three.unwrap_or(0.0), six.unwrap_or(0.0));
    let oracle3 = three_lines().min_distance_sq();
    let oracle6 = icosahedron_lines().min_distance_sq();
    let bound3 = rankin_sq_bound(3, 1, 2).unwrap();
    let bound6 = rankin_sq_bound(6, 1, 3).unwrap();
    Outcome {
        passed: three >= 0.749
            && six >= 0.79
            && (oracle3 - bound3).abs() < 1e-12
            && (oracle6 - bound6).abs() < 1e-12
            && (bound3 - 0.75).abs() < 1e-12
            && (bound6 - 0.8).abs() < 1e-12,
        detail: format!("M=3: {three:.6} (oracle {oracle3:.6}), M=6: {six:.6} (oracle {oracle6:.6})"),
    }
}

fn bound_ordering() -> Outcome {
    let points = 512;
    let mut passed = true;
    let mut parts = Vec::new();
    for k in [2usize, 3, 5] {
        let top = (k as f64).sqrt();
        let grid: Vec<RatePoint> = (1..=points)
            .map(|i| RatePoint::evaluate(top * i as f64 / (points + 1) as f64, k).unwrap())
            .collect();
        let ordered = grid.iter().all(|p| p.r_gv <= p.r_rankin && p.r_rankin < p.r_hamming);
        let signs: Vec<bool> = grid.iter().map(|p| p.r_rankin > p.r_lp).collect();
        let flips: Vec<usize> = (1..signs.len()).filter(|&i| signs[i] != signs[i - 1]).collect();
        let star = crossover_delta_star(k).unwrap_or(f64::NAN);
        let at_star = flips.len() == 1 && {
            let i = flips[0];
            grid[i - 1].delta <= star && star <= grid[i].delta
        };
        let fig = k != 3
            || grid.iter().filter(|p| p.delta < 1.7).all(|p| p.r_lp >= p.r_rankin && p.r_rankin >= p.r_gv);
        passed &= ordered && at_star && fig;
        parts.push(format!("k={k}: ordered={ordered}, flips={}, at delta*={at_star}", flips.len()));
    }
    Outcome { passed, detail: parts.join("; ") }
}

fn rankin_hamming_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 1..=10usize {
        let top = (k as f64 / 2.0).sqrt();
        for i in 1..=500 {
            let d = top * i as f64 / 500.0;
            let diff = (rate_rankin_new(d, k).unwrap() - rate_hamming(std::f64::consts::SQRT_2 * d, k).unwrap()).abs();
            worst = worst.max(diff);
        }
    }
    Outcome { passed: worst <= 1e-12, detail: format!("max difference {worst:.2e}") }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("crossover table", crossover_table),
        ("LP/Hamming crossing", lp_hamming_crossing),
        ("isometry suite", isometry_suite),
        ("principal-angle oracle", principal_angle_oracle),
        ("total-density suite", density_suite),
        ("volume closed loop", volume_closed_loop),
        ("exponent approach", exponent_approach),
        ("counting bound", counting_bound),
        ("packing optima", packing_optima),
        ("bound ordering", bound_ordering),
        ("Rankin/Hamming identity", rankin_hamming_identity),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!("criterion {:>2} {}: {} ({})", i + 1, if o.passed { "PASS" } else { "FAIL" }, name, o.detail);
        if !o.passed {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
