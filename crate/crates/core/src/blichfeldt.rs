//! Blichfeldt-type densities.
//!
//! A code in `G(k, n)` with distance `delta` embeds as a spherical code on the
//! sphere of radius `r`, with angular distance `2 alpha` where
//! `delta = sqrt 2 r sin alpha`. Setting `sin beta = sqrt 2 sin alpha`, every
//! codeword carries the density
//!
//! ```text
//! tau(d) = 2 cos beta / (r^2 sin^2 beta) (rho^2 - d^2)   for d <= rho
//! ```
//!
//! on the Grassmannian ball of radius `rho = sqrt 2 r sin(beta/2)`. On the
//! unit sphere the same density reads `sigma(s) = cos beta / sin^2 beta
//! (P^2 - s^2)` on a cap of chordal radius `P = 2 sin(beta/2)`, and the sum of
//! the `sigma` over all codewords is at most one everywhere. That bound is
//! what turns the mass of a single ball into a bound on the code size.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::rng;
use crate::{Error, Result};

/// Slack allowed on "total density <= 1" and on the quadratic inequality.
pub const DENSITY_TOL: f64 = 1e-9;

/// Unit-norm tolerance for points of a spherical code.
pub const UNIT_TOL: f64 = 1e-12;

/// The chain `delta -> alpha -> beta -> rho, P` for a code of distance
/// `delta` embedded on a sphere of radius `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityParams {
    pub delta: f64,
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub cap_radius: f64,
    sin_beta: f64,
    cos_beta: f64,
}

impl DensityParams {
    /// Requires `0 < delta <= r`.
    pub fn new(delta: f64, r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("radius r = {r} must be positive")));
        }
        if !(delta > 0.0 && delta <= r) {
            return Err(Error::Domain(format!("delta = {delta} outside (0, r = {r}]")));
        }
        let sin_beta = delta / r;
        let cos_beta = (1.0 - sin_beta * sin_beta).max(0.0).sqrt();
        let alpha = (sin_beta / std::f64::consts::SQRT_2).asin();
        let beta = sin_beta.asin();
        // sin(beta/2) via sin beta and cos beta, exact at beta = pi/2
        let half = (0.5 * sin_beta * sin_beta / (1.0 + cos_beta)).sqrt();
        Ok(Self {
            delta,
            r,
            alpha,
            beta,
            rho: std::f64::consts::SQRT_2 * r * half,
            cap_radius: 2.0 * half,
            sin_beta,
            cos_beta,
        })
    }

    /// Parameters for a code of minimum chordal distance `delta_tilde` on
    /// the unit sphere (`delta_tilde = 2 sin alpha`).
    pub fn for_unit_sphere(delta_tilde: f64) -> Result<Self> {
        Self::new(delta_tilde / std::f64::consts::SQRT_2, 1.0)
    }

    /// The parameters whose ball radius is `rho` (`0 < rho <= r`).
    pub fn from_rho(rho: f64, r: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= r) {
            return Err(Error::Domain(format!("rho = {rho} outside (0, r = {r}]")));
        }
        let t = 1.0 - (rho / r).powi(2);
        Self::new(r * (1.0 - t * t).sqrt(), r)
    }

    /// `r sqrt(1 - sqrt(1 - delta^2 / r^2))`, the closed form of `rho`.
    pub fn rho_closed_form(&self) -> f64 {
        let x = (self.delta / self.r).powi(2);
        self.r * (1.0 - (1.0 - x).sqrt()).sqrt()
    }

    pub fn sin_beta(&self) -> f64 {
        self.sin_beta
    }

    pub fn cos_beta(&self) -> f64 {
        self.cos_beta
    }

    pub fn is_degenerate(&self) -> bool {
        self.cos_beta <= 0.0
    }

    /// Value of `tau` at the center.
    pub fn tau_max(&self) -> Result<f64> {
        tau(0.0, self)
    }

    fn nondegenerate(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(Error::DegenerateBeta)
        } else {
            Ok(())
        }
    }
}

/// Density on `G(k, n)` at chordal distance `d` from its center.
pub fn tau(d: f64, params: &DensityParams) -> Result<f64> {
    params.nondegenerate()?;
    if !(d >= 0.0) {
        return Err(Error::Domain(format!("distance {d} must be non-negative")));
    }
    if d > params.rho {
        return Ok(0.0);
    }
    let coeff = 2.0 * params.cos_beta / (params.r * params.r * params.sin_beta * params.sin_beta);
    Ok((coeff * (params.rho * params.rho - d * d)).max(0.0))
}

/// Density on the unit sphere at chordal distance `s` from the cap center.
pub fn sigma(s: f64, params: &DensityParams) -> Result<f64> {
    params.nondegenerate()?;
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("distance {s} must be non-negative")));
    }
    let p = params.cap_radius;
    if s > p {
        return Ok(0.0);
    }
    let coeff = params.cos_beta / (params.sin_beta * params.sin_beta);
    Ok((coeff * (p * p - s * s)).max(0.0))
}

/// A finite set of unit vectors in `R^D`.
#[derive(Clone, Debug)]
pub struct SphericalCode {
    dim: usize,
    points: Vec<DVector<f64>>,
    min_distance: f64,
}

impl SphericalCode {
    /// Points must share a dimension and have unit norm.
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Domain("a spherical code needs at least one point".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { left: (dim, 1), right: (p.len(), 1) });
            }
            if (p.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::Domain(format!("point has norm {}", p.norm())));
            }
        }
        let min_distance = min_pairwise_distance(&points);
        Ok(Self { dim, points, min_distance })
    }

    /// Normalizes every point first.
    pub fn normalized(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.iter().any(|p| !(p.norm() > 0.0)) {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        Self::new(points.into_iter().map(|p| p.normalize()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Minimum pairwise Euclidean distance; `+inf` for a single point.
    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    /// Codewords within the cap radius of `z`, with their distances.
    pub fn near(&self, z: &DVector<f64>, params: &DensityParams) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, x)| (i, (x - z).norm()))
            .filter(|&(_, d)| d <= params.cap_radius)
            .collect()
    }
}

fn min_pairwise_distance(points: &[DVector<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.min((&points[i] - &points[j]).norm());
        }
    }
    best
}

fn check_point(code: &SphericalCode, z: &DVector<f64>) -> Result<()> {
    if z.len() != code.dim() {
        return Err(Error::DimensionMismatch { left: (code.dim(), 1), right: (z.len(), 1) });
    }
    if (z.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::Domain(format!("evaluation point has norm {}", z.norm())));
    }
    Ok(())
}

/// `sum_x sigma(|x - z|)` over the code.
pub fn total_density(code: &SphericalCode, z: &DVector<f64>, params: &DensityParams) -> Result<f64> {
    check_point(code, z)?;
    params.nondegenerate()?;
    code.points().iter().map(|x| sigma((x - z).norm(), params)).sum()
}

/// Left side of `(sum d_j^2)^2 - 4 m sum d_j^2 + 2 m (m - 1) delta_tilde^2 <= 0`
/// for the points within the cap radius of `z`.
pub fn quadratic_inequality_check(
    near_points: &[DVector<f64>],
    z: &DVector<f64>,
    delta_tilde: f64,
    params: &DensityParams,
) -> Result<f64> {
    let m = near_points.len() as f64;
    let mut sum_sq = 0.0;
    for x in near_points {
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch { left: (z.len(), 1), right: (x.len(), 1) });
        }
        let d = (x - z).norm();
        if d > params.cap_radius * (1.0 + 1e-12) {
            return Err(Error::PreconditionViolation(format!(
                "point at distance {d} lies outside the cap of radius {}",
                params.cap_radius
            )));
        }
        sum_sq += d * d;
    }
    Ok(sum_sq * sum_sq - 4.0 * m * sum_sq + 2.0 * m * (m - 1.0) * delta_tilde * delta_tilde)
}

/// `4 m (1 - a) - a^2 tan^2 beta`, non-negative whenever `a` is the total
/// density at a point covered by `m` caps. This is the quadratic inequality
/// rewritten in terms of `a`; it forces `a <= 1`.
pub fn reduced_inequality_slack(m: usize, total: f64, params: &DensityParams) -> f64 {
    let tan_sq = (params.sin_beta / params.cos_beta).powi(2);
    4.0 * m as f64 * (1.0 - total) - total * total * tan_sq
}

/// Randomized campaign over spherical codes.
#[derive(Clone, Debug, Serialize)]
pub struct DensityCampaign {
    pub codes: usize,
    pub points_per_code: usize,
    pub max_dim: usize,
    pub max_size: usize,
    pub seed: u64,
}

impl Default for DensityCampaign {
    fn default() -> Self {
        Self { codes: 100, points_per_code: 100, max_dim: 20, max_size: 50, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub trials: usize,
    pub max_total_density: f64,
    pub max_quadratic_lhs: f64,
    pub min_reduced_slack: f64,
    pub max_covering_caps: usize,
    pub seed: u64,
}

impl DensityReport {
    pub fn density_ok(&self) -> bool {
        self.max_total_density <= 1.0 + DENSITY_TOL
    }

    pub fn quadratic_ok(&self) -> bool {
        self.max_quadratic_lhs <= DENSITY_TOL && self.min_reduced_slack >= -DENSITY_TOL
    }
}

fn random_unit(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

/// Sample unit vectors and keep those at distance `>= min_dist` from all
/// kept ones.
pub fn rejection_code(
    dim: usize,
    size: usize,
    min_dist: f64,
    max_attempts: usize,
    rng: &mut impl Rng,
) -> Vec<DVector<f64>> {
    let mut points: Vec<DVector<f64>> = Vec::with_capacity(size);
    for _ in 0..max_attempts {
        if points.len() == size {
            break;
        }
        let x = random_unit(dim, rng);
        if points.iter().all(|p| (p - &x).norm() >= min_dist) {
            points.push(x);
        }
    }
    points
}

/// Spreads points on the sphere by gradient steps on a steep inverse-power
/// energy. The result is close to a locally optimal code, where the density
/// inequality is nearly tight.
pub fn repulsion_code(dim: usize, size: usize, steps: usize, rng: &mut impl Rng) -> Vec<DVector<f64>> {
    let mut points: Vec<DVector<f64>> = (0..size).map(|_| random_unit(dim, rng)).collect();
    let power = 12.0;
    for step in 0..steps {
        let lr = 0.05 / (1.0 + step as f64 / 50.0);
        let mut forces = vec![DVector::zeros(dim); size];
        for i in 0..size {
            for j in (i + 1)..size {
                let diff = &points[i] - &points[j];
                let d = diff.norm().max(1e-6);
                let f = diff / d.powf(power + 2.0);
                forces[i] += &f;
                forces[j] -= &f;
            }
        }
        for (p, f) in points.iter_mut().zip(&forces) {
            let radial = p.dot(f);
            let tangent = f - &*p * radial;
            let norm = tangent.norm();
            if norm > 0.0 {
                *p += tangent * (lr / norm.max(1.0));
            }
            p.normalize_mut();
        }
    }
    points
}

/// Largest distance usable for the density parameters on the unit sphere:
/// `sqrt 2` itself gives `beta = pi/2`.
const MAX_UNIT_DELTA: f64 = std::f64::consts::SQRT_2 * (1.0 - 1e-9);

struct CodeOutcome {
    max_total: f64,
    max_lhs: f64,
    min_slack: f64,
    max_caps: usize,
}

fn check_code(index: usize, cfg: &DensityCampaign) -> Result<CodeOutcome> {
    let mut rng = rng::stream(cfg.seed, index as u64);
    let dim = rng.random_range(2..=cfg.max_dim.max(2));
    let size = rng.random_range(2..=cfg.max_size.max(2));
    let points = if index % 4 == 3 {
        repulsion_code(dim, size, 150, &mut rng)
    } else {
        let target = rng.random_range(0.2..MAX_UNIT_DELTA);
        rejection_code(dim, size, target, 20 * size, &mut rng)
    };
    let code = SphericalCode::normalized(points)?;
    let delta_tilde = code.min_distance().min(MAX_UNIT_DELTA);
    let params = DensityParams::for_unit_sphere(delta_tilde)?;

    let mut out = CodeOutcome {
        max_total: 0.0,
        max_lhs: f64::NEG_INFINITY,
        min_slack: f64::INFINITY,
        max_caps: 0,
    };
    for j in 0..cfg.points_per_code {
        let z = match j % 3 {
            // uniform
            0 => random_unit(dim, &mut rng),
            // near a codeword
            1 => {
                let x = &code.points()[rng.random_range(0..code.len())];
                let noise = random_unit(dim, &mut rng) * rng.random_range(0.0..params.cap_radius);
                (x + noise).normalize()
            }
            // inside the lens of two codewords
            _ if code.len() > 1 => {
                let a = rng.random_range(0..code.len());
                let b = (a + 1 + rng.random_range(0..code.len() - 1)) % code.len();
                let t: f64 = rng.random();
                let mid = &code.points()[a] * t + &code.points()[b] * (1.0 - t);
                if mid.norm() < 1e-9 {
                    random_unit(dim, &mut rng)
                } else {
                    mid.normalize()
                }
            }
            _ => random_unit(dim, &mut rng),
        };
        let total = total_density(&code, &z, &params)?;
        let near: Vec<DVector<f64>> =
            code.near(&z, &params).into_iter().map(|(i, _)| code.points()[i].clone()).collect();
        out.max_total = out.max_total.max(total);
        out.max_caps = out.max_caps.max(near.len());
        if !near.is_empty() {
            let lhs = quadratic_inequality_check(&near, &z, delta_tilde, &params)?;
            out.max_lhs = out.max_lhs.max(lhs);
            out.min_slack = out.min_slack.min(reduced_inequality_slack(near.len(), total, &params));
        }
    }
    Ok(out)
}

/// Runs the campaign; codes are processed in parallel, each with its own
/// stream, and the maxima are merged in index order.
pub fn verify_density(cfg: &DensityCampaign) -> Result<DensityReport> {
    let outcomes: Vec<CodeOutcome> =
        (0..cfg.codes).into_par_iter().map(|i| check_code(i, cfg)).collect::<Result<_>>()?;
    let mut report = DensityReport {
        trials: cfg.codes * cfg.points_per_code,
        max_total_density: 0.0,
        max_quadratic_lhs: f64::NEG_INFINITY,
        min_reduced_slack: f64::INFINITY,
        max_covering_caps: 0,
        seed: cfg.seed,
    };
    for o in outcomes {
        report.max_total_density = report.max_total_density.max(o.max_total);
        report.max_quadratic_lhs = report.max_quadratic_lhs.max(o.max_lhs);
        report.min_reduced_slack = report.min_reduced_slack.min(o.min_slack);
        report.max_covering_caps = report.max_covering_caps.max(o.max_caps);
    }
    Ok(report)
}
