//! Randomized verification campaigns behind `grasscode verify`.
//!
//! Every campaign derives one random stream per trial from the master seed,
//! runs trials in parallel and merges the results in trial order, so reports
//! are identical for any thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::blichfeldt::{verify_density, DensityCampaign, DensityReport};
use crate::bounds::rankin_sq_bound;
use crate::geometry::{chordal_distance, embed, embedding_radius, projection_matrix};
use crate::packing::{greedy_packing, random_code, Code, GreedyOptions};
use crate::rng;
use crate::volume::{counting_bound_check, sample_uniform_subspace, CountingReport};
use crate::Result;

/// `|d^2 - |Pi_p - Pi_q|^2 / 2| <= ISOMETRY_TOL * k`.
pub const ISOMETRY_TOL: f64 = 1e-9;
/// `| |Phi(p)| - r | <= EMBED_NORM_TOL`.
pub const EMBED_NORM_TOL: f64 = 1e-10;
/// Slack on the finite Rankin bound for random codes.
pub const RANKIN_TOL: f64 = 1e-9;

/// Dimension pairs cycled through by the isometry campaign.
pub const ISOMETRY_DIMS: [(usize, usize); 4] = [(1, 4), (2, 6), (3, 10), (5, 20)];
/// Dimension pairs cycled through by the counting campaign.
pub const COUNTING_DIMS: [(usize, usize); 3] = [(1, 4), (2, 6), (2, 8)];

#[derive(Clone, Debug, Serialize)]
pub struct IsometryReport {
    pub trials: usize,
    /// max over pairs of `|d^2 - |Pi_p - Pi_q|^2 / 2| / k`.
    pub max_isometry_error_per_k: f64,
    /// max over pairs of `| |Phi(p) - Phi(q)| - sqrt 2 d |`.
    pub max_embedding_distance_error: f64,
    /// max over planes of `| |Phi(p)| - r |`, also over the flattened coordinates.
    pub max_norm_error: f64,
    pub max_trace: f64,
    /// max over pairs of `d(p, q) - d(q, p)`; exactly zero when symmetric.
    pub max_asymmetry: f64,
    pub passed: bool,
}

pub fn verify_isometry(trials: usize, seed: u64) -> Result<IsometryReport> {
    struct One {
        iso: f64,
        emb: f64,
        norm: f64,
        trace: f64,
        asym: f64,
    }
    let rows: Vec<One> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<One> {
            let (k, n) = ISOMETRY_DIMS[t % ISOMETRY_DIMS.len()];
            let mut s = rng::stream(seed, t as u64);
            let p = sample_uniform_subspace(n, k, &mut s)?;
            let q = sample_uniform_subspace(n, k, &mut s)?;
            let d = chordal_distance(&p, &q)?;
            let half_sq = 0.5 * (projection_matrix(&p) - projection_matrix(&q)).norm_squared();
            let (ep, eq) = (embed(&p), embed(&q));
            let r = embedding_radius(k, n);
            let norm = [ep.norm(), eq.norm(), ep.coords().norm(), eq.coords().norm()]
                .iter()
                .map(|v| (v - r).abs())
                .fold(0.0, f64::max);
            Ok(One {
                iso: (d * d - half_sq).abs() / k as f64,
                emb: ((ep.matrix() - eq.matrix()).norm() - std::f64::consts::SQRT_2 * d).abs(),
                norm,
                trace: ep.matrix().trace().abs().max(eq.matrix().trace().abs()),
                asym: (d - chordal_distance(&q, &p)?).abs(),
            })
        })
        .collect::<Result<_>>()?;
    let max = |f: fn(&One) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let report = IsometryReport {
        trials,
        max_isometry_error_per_k: max(|o| o.iso),
        max_embedding_distance_error: max(|o| o.emb),
        max_norm_error: max(|o| o.norm),
        max_trace: max(|o| o.trace),
        max_asymmetry: max(|o| o.asym),
        passed: false,
    };
    let passed = report.max_isometry_error_per_k <= ISOMETRY_TOL
        && report.max_norm_error <= EMBED_NORM_TOL
        && report.max_trace <= 1e-12
        && report.max_asymmetry == 0.0;
    Ok(IsometryReport { passed, ..report })
}

/// Total-density campaign: `trials` random spherical codes, 100 points each.
pub fn verify_total_density(trials: usize, seed: u64) -> Result<(DensityReport, bool)> {
    let report = verify_density(&DensityCampaign { codes: trials, seed, ..Default::default() })?;
    let ok = report.density_ok();
    Ok((report, ok))
}

#[derive(Clone, Debug, Serialize)]
pub struct RankinInequalityReport {
    pub density: DensityReport,
    /// max over random Grassmannian codes of `delta^2 - rankin_sq_bound`.
    pub max_rankin_excess: f64,
    pub codes_checked: usize,
    pub passed: bool,
}

/// The quadratic inequality on random spherical codes, plus the finite
/// Rankin bound on random Grassmannian codes.
pub fn verify_rankin_inequality(trials: usize, seed: u64) -> Result<RankinInequalityReport> {
    let density = verify_density(&DensityCampaign { codes: trials, seed, ..Default::default() })?;
    let excess: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut s = rng::stream(rng::child_seed(seed, 1), t as u64);
            let (k, n) = COUNTING_DIMS[t % COUNTING_DIMS.len()];
            let m = s.random_range(2..=40);
            let code = random_code(m, k, n, &mut s)?;
            Ok(code.min_distance_sq() - rankin_sq_bound(m, k, n)?)
        })
        .collect::<Result<_>>()?;
    let max_rankin_excess = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let passed = density.quadratic_ok() && max_rankin_excess <= RANKIN_TOL;
    Ok(RankinInequalityReport { density, max_rankin_excess, codes_checked: trials, passed })
}

#[derive(Clone, Debug, Serialize)]
pub struct CountingCampaignReport {
    pub codes: usize,
    pub samples_per_code: usize,
    pub failures: usize,
    /// max over codes of `M mu_hat / (1 + 3 M stderr)`.
    pub max_ratio: f64,
    pub largest_code: usize,
    pub passed: bool,
}

/// A random valid code for trial `t`: greedy packings at a random distance
/// on even trials, independent uniform planes on odd ones.
pub fn campaign_code(t: usize, seed: u64) -> Result<Code> {
    let (k, n) = COUNTING_DIMS[t % COUNTING_DIMS.len()];
    let mut s = rng::stream(seed, t as u64);
    if t.is_multiple_of(2) {
        let r = embedding_radius(k, n);
        let delta = s.random_range(0.3 * r..0.95 * r);
        let opts = GreedyOptions { max_consecutive_rejections: 100, max_planes: 60 };
        greedy_packing(delta, k, n, opts, &mut s)
    } else {
        let m = s.random_range(1..=30);
        random_code(m, k, n, &mut s)
    }
}

pub fn verify_counting(trials: usize, samples: usize, seed: u64) -> Result<(CountingCampaignReport, Vec<CountingReport>)> {
    let reports: Vec<CountingReport> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let code = campaign_code(t, seed)?;
            counting_bound_check(&code, samples, rng::child_seed(seed, t as u64))
        })
        .collect::<Result<_>>()?;
    let failures = reports.iter().filter(|r| !r.passed).count();
    let summary = CountingCampaignReport {
        codes: trials,
        samples_per_code: samples,
        failures,
        max_ratio: reports.iter().map(|r| r.lhs / r.threshold).fold(0.0, f64::max),
        largest_code: reports.iter().map(|r| r.m).max().unwrap_or(0),
        passed: failures == 0,
    };
    Ok((summary, reports))
}
