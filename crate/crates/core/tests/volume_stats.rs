use grasscode::geometry::{principal_angles, projection_matrix, PrincipalAngles};
use grasscode::rng;
use grasscode::volume::{estimate_mu_ball, estimate_mu_ball_rescaled, omega_unnormalized, sample_uniform_subspace, trace_params};
use grasscode::Subspace;
use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::FRAC_PI_2;

/// Largest principal angle between `span(e_1..e_k)` and `count` uniform planes.
fn largest_angles(k: usize, n: usize, count: usize, seed: u64) -> Vec<f64> {
    let p0 = Subspace::coordinate(k, n).unwrap();
    let mut s = rng::stream(seed, 0);
    (0..count)
        .map(|_| principal_angles(&p0, &sample_uniform_subspace(n, k, &mut s).unwrap()).unwrap().theta()[0])
        .collect()
}

/// Kolmogorov-Smirnov statistic of `xs` against `cdf`.
fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

// 1% critical value of the one-sample KS statistic
fn ks_critical(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[test]
fn line_angle_is_uniform_in_the_plane() {
    let n = 20_000;
    let d = ks_statistic(largest_angles(1, 2, n, 1), |t| t / FRAC_PI_2);
    assert!(d < ks_critical(n), "D = {d}");
}

#[test]
fn line_angle_in_five_space_follows_sin_cubed() {
    // int_0^t sin^3 = 2/3 - cos t + cos^3 t / 3
    let cdf = |t: f64| (2.0 / 3.0 - t.cos() + t.cos().powi(3) / 3.0) * 1.5;
    let n = 20_000;
    let d = ks_statistic(largest_angles(1, 5, n, 2), cdf);
    assert!(d < ks_critical(n), "D = {d}");
}

#[test]
fn two_planes_in_six_space_follow_omega() {
    let (k, n) = (2, 6);
    let bins = 12;
    // expected mass of each theta_1 bin by midpoint rule on the ordered region
    let grid = 600;
    let h = FRAC_PI_2 / grid as f64;
    let mut mass = vec![0.0; bins];
    for i in 0..grid {
        let t1 = (i as f64 + 0.5) * h;
        for j in 0..grid {
            let t2 = (j as f64 + 0.5) * h;
            if t2 >= t1 {
                continue;
            }
            let w = omega_unnormalized(&PrincipalAngles::new(vec![t1, t2]).unwrap(), k, n).unwrap();
            mass[((t1 / FRAC_PI_2) * bins as f64) as usize] += w;
        }
    }
    let total: f64 = mass.iter().sum();
    let samples = 30_000;
    let mut counts = vec![0usize; bins];
    for t in largest_angles(k, n, samples, 3) {
        counts[((t / FRAC_PI_2 * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let mut chi2 = 0.0;
    let mut used = 0;
    for (c, m) in counts.iter().zip(&mass) {
        let expected = samples as f64 * m / total;
        if expected < 5.0 {
            continue;
        }
        chi2 += (*c as f64 - expected).powi(2) / expected;
        used += 1;
    }
    let critical = ChiSquared::new((used - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 = {chi2}, critical = {critical}, counts = {counts:?}");
}

#[test]
fn mean_projector_is_isotropic() {
    let (k, n, samples) = (2, 5, 20_000);
    let mut s = rng::stream(4, 0);
    let mut sum = DMatrix::<f64>::zeros(n, n);
    for _ in 0..samples {
        sum += projection_matrix(&sample_uniform_subspace(n, k, &mut s).unwrap());
    }
    let mean = sum / samples as f64;
    let target = DMatrix::<f64>::identity(n, n) * (k as f64 / n as f64);
    let err = (mean - target).amax();
    assert!(err < 0.01, "{err}");
}

#[test]
fn rescaled_and_direct_estimators_agree() {
    let (k, n) = (2, 8);
    let params = trace_params(0.5, k, n).unwrap();
    let direct = estimate_mu_ball(&params, k, n, 2_000_000, 5).unwrap();
    let rescaled = estimate_mu_ball_rescaled(&params, k, n, 200_000, 2f64.powf(-4.5), 6).unwrap();
    let sigma = (direct.stderr.powi(2) + rescaled.stderr.powi(2)).sqrt();
    assert!(direct.hits > 0);
    assert!((direct.mean - rescaled.mean).abs() <= 4.0 * sigma, "{direct:?} vs {rescaled:?}");
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let params = trace_params(0.4, 2, 9).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_mu_ball_rescaled(&params, 2, 9, 30_000, 0.1, 8).unwrap())
    };
    assert_eq!(run(1), run(4));
}
