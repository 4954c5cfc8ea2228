//! Principal-angle volume form and Monte-Carlo ball masses.
//!
//! For a fixed plane `p0` and a uniformly distributed plane `Q`, the principal
//! angles between them have density proportional to
//!
//! ```text
//! prod_i sin(theta_i)^(n - 2k) * prod_{i<j} (sin^2 theta_i - sin^2 theta_j)
//! ```
//!
//! on `pi/2 > theta_1 > ... > theta_k > 0`. The normalized mass of a ball,
//! `mu(B_rho) = E[tau(d(p0, Q))]`, is therefore estimated by averaging `tau`
//! over uniform planes, and the normalizing constant of the volume form is
//! never needed.
//!
//! Plain averaging stops working once `mu` drops below roughly the inverse
//! sample count. [`estimate_mu_ball_rescaled`] handles that regime. In the
//! variables `t_i = tan^2 theta_i` the density is
//! `h(t) prod_i (1 + t_i)^(-n/2)` where `h` is homogeneous of degree
//! `k(n - k)/2 - k`. Substituting `t = lambda u` for `0 < lambda <= 1` gives
//!
//! ```text
//! E[f(T)] = lambda^(k(n-k)/2) E[ f(lambda T) prod_i ((1 + T_i) / (1 + lambda T_i))^(n/2) ]
//! ```
//!
//! which is exact for every `lambda`, still averages over uniform planes,
//! and with small `lambda` pulls the samples into the ball.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::blichfeldt::{tau, DensityParams};
use crate::format::fmt_sig;
use crate::geometry::{embedding_radius, validate_dims, PrincipalAngles, Subspace};
use crate::packing::Code;
use crate::rng;
use crate::{Error, Result};

/// Samples per independently seeded block.
pub const BLOCK_SIZE: usize = 4096;

/// Smallest sample count accepted by the estimators.
pub const MIN_SAMPLES: usize = 100;

/// Number of standard errors allowed in the counting-bound check.
pub const COUNTING_SIGMAS: f64 = 3.0;

/// For codes with `delta > CLAMP * r` the counting bound is evaluated at
/// `CLAMP * r`; an `(M, delta)` code is also an `(M, delta')` code for every
/// `delta' <= delta`, and at `delta' = r` the density vanishes.
pub const COUNTING_DELTA_CLAMP: f64 = 0.95;

/// Unnormalized volume form of the principal angles (`2k <= n`).
///
/// Returns zero on the boundary of the ordered simplex (repeated angles, or a
/// zero angle when `n > 2k`).
pub fn omega_unnormalized(theta: &PrincipalAngles, k: usize, n: usize) -> Result<f64> {
    if k == 0 || 2 * k > n {
        return Err(Error::Domain(format!("volume form needs 1 <= k <= n/2, got k = {k}, n = {n}")));
    }
    if theta.len() != k {
        return Err(Error::Domain(format!("expected {k} angles, got {}", theta.len())));
    }
    let sines: Vec<f64> = theta.theta().iter().map(|t| t.sin()).collect();
    let mut value: f64 = sines.iter().map(|s| s.powi((n - 2 * k) as i32)).product();
    for i in 0..k {
        for j in (i + 1)..k {
            value *= sines[i] * sines[i] - sines[j] * sines[j];
        }
    }
    Ok(value.max(0.0))
}

/// Orthonormalized `k x n` Gaussian matrix.
fn gaussian_frame(k: usize, n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    'retry: loop {
        let mut a = DMatrix::from_fn(k, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        for i in 0..k {
            let mut v = a.row(i).transpose();
            for _ in 0..2 {
                for j in 0..i {
                    let q = a.row(j).transpose();
                    let c = q.dot(&v);
                    v.axpy(-c, &q, 1.0);
                }
            }
            let norm = v.norm();
            if norm < 1e-8 {
                continue 'retry;
            }
            a.set_row(i, &(v / norm).transpose());
        }
        return a;
    }
}

/// A uniformly distributed plane (`1 <= k <= n/2`): the row space of a
/// Gaussian matrix.
pub fn sample_uniform_subspace(n: usize, k: usize, rng: &mut impl Rng) -> Result<Subspace> {
    validate_dims(k, n, false)?;
    Ok(Subspace::from_orthonormal(gaussian_frame(k, n, rng)))
}

/// Monte-Carlo estimate of `mu(B_rho)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub rho: f64,
    pub k: usize,
    pub n: usize,
    /// `lambda` of the rescaled estimator; 1 for plain averaging.
    pub scale: f64,
    /// Samples with a non-zero contribution.
    pub hits: usize,
}

impl VolumeEstimate {
    pub fn relative_stderr(&self) -> f64 {
        if self.mean > 0.0 {
            self.stderr / self.mean
        } else {
            f64::INFINITY
        }
    }
}

/// Running mean / second moment (Welford), mergeable in a fixed order.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
    hits: usize,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        if x > 0.0 {
            self.hits += 1;
        }
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.count as f64 * w,
            hits: self.hits + other.hits,
        }
    }

    fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.count - 1) as f64).sqrt() / (self.count as f64).sqrt()
    }
}

/// Runs `samples` draws of `draw` split into seeded blocks, in parallel, and
/// merges the blocks in index order.
fn block_average<F>(samples: usize, seed: u64, stream_offset: u64, draw: F) -> Moments
where
    F: Fn(&mut rng::Stream) -> f64 + Sync,
{
    let blocks = samples.div_ceil(BLOCK_SIZE);
    let parts: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut stream = rng::stream(seed, stream_offset + b as u64);
            let count = BLOCK_SIZE.min(samples - b * BLOCK_SIZE);
            let mut m = Moments::default();
            for _ in 0..count {
                m.push(draw(&mut stream));
            }
            m
        })
        .collect();
    parts.into_iter().fold(Moments::default(), Moments::merge)
}

fn check_estimator_args(params: &DensityParams, k: usize, n: usize, samples: usize) -> Result<()> {
    validate_dims(k, n, false)?;
    if samples < MIN_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    if params.is_degenerate() {
        return Err(Error::DegenerateBeta);
    }
    Ok(())
}

/// Squared chordal distance from `span(e_1..e_k)` to a frame: the squared
/// norm of its last `n - k` columns.
fn distance_sq_to_coordinate_plane(frame: &DMatrix<f64>) -> f64 {
    let k = frame.nrows();
    frame.columns(k, frame.ncols() - k).norm_squared()
}

/// Plain Monte-Carlo estimate of `mu(B_rho)`: the average of
/// `tau(d(p0, Q))` over uniform planes `Q`.
pub fn estimate_mu_ball(
    params: &DensityParams,
    k: usize,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    check_estimator_args(params, k, n, samples)?;
    let m = block_average(samples, seed, 0, |stream| {
        let frame = gaussian_frame(k, n, stream);
        let d = distance_sq_to_coordinate_plane(&frame).sqrt();
        tau(d, params).expect("checked params")
    });
    Ok(VolumeEstimate {
        mean: m.mean,
        stderr: m.stderr(),
        samples,
        rho: params.rho,
        k,
        n,
        scale: 1.0,
        hits: m.hits,
    })
}

/// Eigenvalues of a small symmetric matrix in ascending order.
fn sym_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = match m.nrows() {
        1 => vec![m[(0, 0)]],
        2 => {
            let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            vec![mid - rad, mid + rad]
        }
        _ => SymmetricEigen::new(m).eigenvalues.iter().copied().collect(),
    };
    ev.sort_by(f64::total_cmp);
    ev
}

/// `tan^2` of the principal angles between `span(e_1..e_k)` and a frame.
/// Cosines and sines come from separate Gram matrices so that neither end of
/// the range loses precision.
fn tan_sq_to_coordinate_plane(frame: &DMatrix<f64>) -> Vec<f64> {
    let k = frame.nrows();
    let c = frame.columns(0, k);
    let s = frame.columns(k, frame.ncols() - k);
    let cos_sq = sym_eigenvalues(c * c.transpose());
    let mut sin_sq = sym_eigenvalues(s * s.transpose());
    sin_sq.reverse();
    cos_sq
        .iter()
        .zip(&sin_sq)
        .map(|(&c2, &s2)| {
            let (c2, s2) = (c2.max(0.0), s2.max(0.0));
            if c2 > 0.0 {
                s2 / c2
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Contribution of one sample `t = tan^2 theta` to the rescaled estimator.
fn rescaled_term(t: &[f64], scale: f64, k: usize, n: usize, params: &DensityParams) -> f64 {
    let half_n = 0.5 * n as f64;
    let mut d_sq = 0.0;
    let mut log_w = 0.5 * (k * (n - k)) as f64 * scale.ln();
    for &ti in t {
        if !ti.is_finite() {
            return 0.0;
        }
        let u = scale * ti;
        d_sq += u / (1.0 + u);
        log_w += half_n * (ti.ln_1p() - u.ln_1p());
    }
    if d_sq > params.rho * params.rho {
        return 0.0;
    }
    tau(d_sq.sqrt(), params).expect("checked params") * log_w.exp()
}

/// Exact reweighted estimate of `mu(B_rho)` with shrink factor
/// `0 < scale <= 1` (see the module docs). `scale = 1` is plain averaging.
pub fn estimate_mu_ball_rescaled(
    params: &DensityParams,
    k: usize,
    n: usize,
    samples: usize,
    scale: f64,
    seed: u64,
) -> Result<VolumeEstimate> {
    check_estimator_args(params, k, n, samples)?;
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::Domain(format!("scale = {scale} outside (0, 1]")));
    }
    let m = block_average(samples, seed, 0, |stream| {
        let t = tan_sq_to_coordinate_plane(&gaussian_frame(k, n, stream));
        rescaled_term(&t, scale, k, n, params)
    });
    Ok(VolumeEstimate {
        mean: m.mean,
        stderr: m.stderr(),
        samples,
        rho: params.rho,
        k,
        n,
        scale,
        hits: m.hits,
    })
}

/// Pilot-run grid of shrink factors: `2^0, 2^-1/2, ..., 2^-40`.
const PILOT_STEPS: usize = 81;
/// Pilot draws are taken from streams at this offset.
const PILOT_STREAM_OFFSET: u64 = 1 << 40;

/// Largest fraction of pilot draws that may land in the ball. Beyond it the
/// weights are driven by the rare large-angle tail, and the pilot's error
/// estimate becomes badly optimistic.
pub const MAX_PILOT_HIT_FRACTION: f64 = 0.5;

/// Picks the shrink factor with the smallest relative standard error on a
/// pilot sample of uniform planes (reused across all candidate factors),
/// scanning down from 1 until more than [`MAX_PILOT_HIT_FRACTION`] of the
/// draws hit.
pub fn choose_scale(params: &DensityParams, k: usize, n: usize, pilot: usize, seed: u64) -> Result<f64> {
    check_estimator_args(params, k, n, pilot)?;
    let draws: Vec<Vec<f64>> = {
        let blocks = pilot.div_ceil(BLOCK_SIZE);
        (0..blocks)
            .into_par_iter()
            .flat_map_iter(|b| {
                let mut stream = rng::stream(seed, PILOT_STREAM_OFFSET + b as u64);
                let count = BLOCK_SIZE.min(pilot - b * BLOCK_SIZE);
                (0..count)
                    .map(|_| tan_sq_to_coordinate_plane(&gaussian_frame(k, n, &mut stream)))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let mut best = (f64::INFINITY, 1.0);
    for step in 0..PILOT_STEPS {
        let scale = 2f64.powf(-0.5 * step as f64);
        let mut m = Moments::default();
        for t in &draws {
            m.push(rescaled_term(t, scale, k, n, params));
        }
        if m.hits as f64 > MAX_PILOT_HIT_FRACTION * draws.len() as f64 {
            break;
        }
        // Too few hits make the pilot's own error estimate unreliable.
        if m.hits < 20 || m.mean <= 0.0 {
            continue;
        }
        let rel = m.stderr() / m.mean;
        if rel < best.0 {
            best = (rel, scale);
        }
    }
    Ok(best.1)
}

/// Which estimator an exponent trace uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Direct,
    Rescaled,
}

/// One row of an exponent trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub n: usize,
    pub samples: usize,
    pub mu_hat: f64,
    pub stderr: f64,
    /// `ln(mu_hat) / (n k)`; `None` when the ball was never hit.
    pub normalized_log: Option<f64>,
    pub scale: f64,
}

/// Ball parameters for the exponent trace at dimension `n`:
/// `rho = ratio * r(n)` with the finite-`n` radius.
pub fn trace_params(ratio: f64, k: usize, n: usize) -> Result<DensityParams> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Domain(format!("ratio = {ratio} outside (0, 1)")));
    }
    validate_dims(k, n, false)?;
    let r = embedding_radius(k, n);
    DensityParams::from_rho(ratio * r, r)
}

/// One point of the exponent trace; a zero estimate is reported with
/// `normalized_log = None` rather than as an error.
pub fn exponent_trace_point(
    ratio: f64,
    k: usize,
    n: usize,
    samples: usize,
    estimator: Estimator,
    seed: u64,
) -> Result<TracePoint> {
    if 2 * k >= n {
        return Err(Error::Domain(format!("exponent trace needs n > 2k, got k = {k}, n = {n}")));
    }
    let params = trace_params(ratio, k, n)?;
    let point_seed = rng::child_seed(seed, n as u64);
    let est = match estimator {
        Estimator::Direct => estimate_mu_ball(&params, k, n, samples, point_seed)?,
        Estimator::Rescaled => {
            let pilot = (samples / 10).clamp(MIN_SAMPLES, 50_000);
            let scale = choose_scale(&params, k, n, pilot, point_seed)?;
            estimate_mu_ball_rescaled(&params, k, n, samples, scale, point_seed)?
        }
    };
    let normalized_log = (est.mean > 0.0).then(|| est.mean.ln() / (n * k) as f64);
    Ok(TracePoint { n, samples, mu_hat: est.mean, stderr: est.stderr, normalized_log, scale: est.scale })
}

/// `(1/(nk)) ln mu_hat(B_rho)` along `n_list`, with `rho = ratio * r(n)`.
/// The values approach `ln ratio` as `n` grows.
pub fn exponent_trace(
    ratio: f64,
    k: usize,
    n_list: &[usize],
    samples: usize,
    estimator: Estimator,
    seed: u64,
) -> Result<Vec<TracePoint>> {
    n_list
        .iter()
        .map(|&n| {
            let p = exponent_trace_point(ratio, k, n, samples, estimator, seed)?;
            if p.normalized_log.is_none() {
                return Err(Error::InsufficientSamples { n });
            }
            Ok(p)
        })
        .collect()
}

pub const TRACE_CSV_HEADER: &str = "n,samples,mu_hat,stderr,normalized_log";

/// CSV rows; a missed ball is written as `insufficient` in the last column.
pub fn write_trace_csv<W: Write>(mut out: W, rows: &[TracePoint]) -> std::io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for p in rows {
        let log = p.normalized_log.map(fmt_sig).unwrap_or_else(|| "insufficient".into());
        writeln!(out, "{},{},{},{},{}", p.n, p.samples, fmt_sig(p.mu_hat), fmt_sig(p.stderr), log)?;
    }
    Ok(())
}

/// Outcome of the check `M mu_hat <= 1 + 3 M stderr`.
#[derive(Clone, Debug, Serialize)]
pub struct CountingReport {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    /// Distance the ball was built from (possibly clamped, see
    /// [`COUNTING_DELTA_CLAMP`]).
    pub delta: f64,
    pub rho: f64,
    pub mu_hat: f64,
    pub stderr: f64,
    pub lhs: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Checks the counting inequality `M mu(B_rho) <= 1` for a code with a
/// plain Monte-Carlo estimate of `mu`.
pub fn counting_bound_check(code: &Code, samples: usize, seed: u64) -> Result<CountingReport> {
    let (m, k, n) = (code.len(), code.k(), code.n());
    let r = embedding_radius(k, n);
    let delta = code.min_distance().min(COUNTING_DELTA_CLAMP * r);
    let params = DensityParams::new(delta, r)?;
    let est = estimate_mu_ball(&params, k, n, samples, seed)?;
    let lhs = m as f64 * est.mean;
    let threshold = 1.0 + COUNTING_SIGMAS * m as f64 * est.stderr;
    Ok(CountingReport {
        m,
        k,
        n,
        delta,
        rho: params.rho,
        mu_hat: est.mean,
        stderr: est.stderr,
        lhs,
        threshold,
        passed: lhs <= threshold,
    })
}
