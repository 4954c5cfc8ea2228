//! Constructing codes in `G(k, n)` and measuring them against the bounds.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::bounds::{rankin_sq_bound, RatePoint};
use crate::format;
use crate::geometry::{chordal_distance_sq, validate_dims, Subspace};
use crate::rng;
use crate::volume::sample_uniform_subspace;
use crate::{Error, Result};

/// A finite set of planes with a common `(k, n)`.
#[derive(Clone, Debug)]
pub struct Code {
    planes: Vec<Subspace>,
    min_distance_sq: f64,
}

impl Code {
    pub fn new(planes: Vec<Subspace>) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::Domain("a code needs at least one plane".into()))?;
        let (k, n) = (first.k(), first.n());
        if let Some(p) = planes.iter().find(|p| p.k() != k || p.n() != n) {
            return Err(Error::DimensionMismatch { left: (k, n), right: (p.k(), p.n()) });
        }
        let min_distance_sq = min_pairwise_sq(&planes);
        Ok(Self { planes, min_distance_sq })
    }

    pub fn planes(&self) -> &[Subspace] {
        &self.planes
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    pub fn k(&self) -> usize {
        self.planes[0].k()
    }

    pub fn n(&self) -> usize {
        self.planes[0].n()
    }

    /// Minimum pairwise chordal distance, `+inf` for a single plane.
    pub fn min_distance(&self) -> f64 {
        self.min_distance_sq.sqrt()
    }

    pub fn min_distance_sq(&self) -> f64 {
        self.min_distance_sq
    }

    pub fn write_text<W: Write>(&self, out: W) -> std::io::Result<()> {
        format::write_code(out, &self.planes)
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        Self::new(format::read_code(input)?)
    }
}

fn pairs(m: usize) -> impl ParallelIterator<Item = (usize, usize)> {
    (0..m).into_par_iter().flat_map_iter(move |i| ((i + 1)..m).map(move |j| (i, j)))
}

fn min_pairwise_sq(planes: &[Subspace]) -> f64 {
    pairs(planes.len())
        .map(|(i, j)| chordal_distance_sq(&planes[i], &planes[j]).expect("common dimensions"))
        .reduce(|| f64::INFINITY, f64::min)
}

/// `M` independent uniform planes.
pub fn random_code(m: usize, k: usize, n: usize, rng: &mut impl Rng) -> Result<Code> {
    validate_dims(k, n, false)?;
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    let planes = (0..m).map(|_| sample_uniform_subspace(n, k, rng)).collect::<Result<_>>()?;
    Code::new(planes)
}

/// Limits for [`greedy_packing`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GreedyOptions {
    /// Stop after this many rejected candidates in a row.
    pub max_consecutive_rejections: usize,
    /// Stop once the code has this many planes.
    pub max_planes: usize,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self { max_consecutive_rejections: 1000, max_planes: 10_000 }
    }
}

/// Keeps uniform random planes that are at distance `>= delta` from every
/// plane kept so far.
pub fn greedy_packing(
    delta: f64,
    k: usize,
    n: usize,
    opts: GreedyOptions,
    rng: &mut impl Rng,
) -> Result<Code> {
    validate_dims(k, n, false)?;
    if !(delta > 0.0 && delta < (k as f64).sqrt()) {
        return Err(Error::Domain(format!("delta = {delta} outside (0, sqrt {k})")));
    }
    let target = delta * delta;
    let mut planes: Vec<Subspace> = vec![sample_uniform_subspace(n, k, rng)?];
    let mut rejections = 0;
    while rejections < opts.max_consecutive_rejections && planes.len() < opts.max_planes {
        let candidate = sample_uniform_subspace(n, k, rng)?;
        let ok = planes.iter().all(|p| chordal_distance_sq(p, &candidate).expect("same dims") >= target);
        if ok {
            planes.push(candidate);
            rejections = 0;
        } else {
            rejections += 1;
        }
    }
    Code::new(planes)
}

/// Step-size and smoothing schedule of [`optimize_code`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OptimizeOptions {
    pub iterations: usize,
    /// Initial step size; decays geometrically to `step * step_decay`.
    pub step: f64,
    pub step_decay: f64,
    /// Soft-min inverse temperature, annealed geometrically from
    /// `smoothing_start` to `smoothing_end`.
    pub smoothing_start: f64,
    pub smoothing_end: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { iterations: 2000, step: 0.2, step_decay: 0.01, smoothing_start: 5.0, smoothing_end: 5000.0 }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub code: Code,
    /// Best squared minimum distance seen after each iteration.
    pub best_history: Vec<f64>,
    /// Whether the last tenth of the run still improved the best iterate by
    /// less than `1e-12`.
    pub converged: bool,
}

fn geometric(start: f64, end: f64, i: usize, total: usize) -> f64 {
    if total <= 1 {
        return start;
    }
    start * (end / start).powf(i as f64 / (total - 1) as f64)
}

/// Gradient ascent on `-(1/t) ln sum_{i<j} exp(-t d_ij^2)`, a smooth lower
/// approximation of the squared minimum distance. Each generator matrix is
/// re-orthonormalized after its step. The best iterate (by hard minimum) is
/// returned, so the result never has a smaller distance than the input.
pub fn optimize_code(code: &Code, opts: &OptimizeOptions) -> Result<OptimizeOutcome> {
    let m = code.len();
    if m < 2 {
        return Err(Error::Domain("optimization needs at least two planes".into()));
    }
    let mut frames: Vec<DMatrix<f64>> = code.planes().iter().map(|p| p.basis().clone()).collect();
    let mut best = code.clone();
    let mut history = Vec::with_capacity(opts.iterations);

    for it in 0..opts.iterations {
        let t = geometric(opts.smoothing_start, opts.smoothing_end, it, opts.iterations);
        let step = geometric(opts.step, opts.step * opts.step_decay, it, opts.iterations);

        let projections: Vec<DMatrix<f64>> = frames.iter().map(|a| a.transpose() * a).collect();
        let k = frames[0].nrows() as f64;
        let mut dist = vec![vec![0.0; m]; m];
        let mut lowest = f64::INFINITY;
        for i in 0..m {
            for j in (i + 1)..m {
                let overlap = (&frames[i] * frames[j].transpose()).norm_squared();
                dist[i][j] = (k - overlap).max(0.0);
                lowest = lowest.min(dist[i][j]);
            }
        }
        // softmax weights of -t d^2, shifted by the minimum for stability
        let mut weights = vec![vec![0.0; m]; m];
        let mut total = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let w = (-t * (dist[i][j] - lowest)).exp();
                weights[i][j] = w;
                total += w;
            }
        }
        let mut next = Vec::with_capacity(m);
        for i in 0..m {
            let n = frames[i].ncols();
            let mut pull = DMatrix::<f64>::zeros(n, n);
            for j in 0..m {
                if i != j {
                    let w = if i < j { weights[i][j] } else { weights[j][i] } / total;
                    pull += &projections[j] * w;
                }
            }
            // d(d_ij^2)/dA_i = -2 A_i Pi_j
            let grad = &frames[i] * pull * -2.0;
            let moved = &frames[i] + grad * step;
            next.push(match crate::geometry::orthonormalize(moved) {
                Ok(s) => s.into_basis(),
                Err(_) => frames[i].clone(),
            });
        }
        frames = next;

        let candidate = Code::new(frames.iter().cloned().map(Subspace::from_orthonormal).collect())?;
        if candidate.min_distance_sq() > best.min_distance_sq() {
            best = candidate;
        }
        history.push(best.min_distance_sq());
    }

    let converged = match history.len() {
        0 => false,
        len => {
            let tail = (len / 10).max(1);
            history[len - 1] - history[len - tail] < 1e-12
        }
    };
    Ok(OptimizeOutcome { code: best, best_history: history, converged })
}

/// Result of several independent optimizer runs.
#[derive(Clone, Debug)]
pub struct RestartOutcome {
    pub best: OptimizeOutcome,
    pub best_restart: usize,
    /// Final squared minimum distance of each restart, by index.
    pub per_restart: Vec<f64>,
}

/// Runs `restarts` optimizations from random codes, each seeded from
/// `(seed, restart index)`, and keeps the best (lowest index on ties).
pub fn optimize_restarts(
    m: usize,
    k: usize,
    n: usize,
    restarts: usize,
    opts: &OptimizeOptions,
    seed: u64,
) -> Result<RestartOutcome> {
    if restarts == 0 {
        return Err(Error::Domain("need at least one restart".into()));
    }
    let runs: Vec<OptimizeOutcome> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut stream = rng::stream(rng::child_seed(seed, r as u64), 0);
            let start = random_code(m, k, n, &mut stream)?;
            optimize_code(&start, opts)
        })
        .collect::<Result<_>>()?;
    let per_restart: Vec<f64> = runs.iter().map(|o| o.code.min_distance_sq()).collect();
    let mut best_restart = 0;
    for (i, &v) in per_restart.iter().enumerate() {
        if v > per_restart[best_restart] {
            best_restart = i;
        }
    }
    let best = runs.into_iter().nth(best_restart).expect("non-empty");
    Ok(RestartOutcome { best, best_restart, per_restart })
}

fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

/// A code measured against the finite Rankin bound and the asymptotic rate
/// curves.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    #[serde(rename = "M")]
    pub m: usize,
    pub k: usize,
    pub n: usize,
    #[serde(serialize_with = "finite_or_inf")]
    pub min_distance: f64,
    #[serde(serialize_with = "finite_or_inf")]
    pub achieved_delta_sq: f64,
    /// `None` for a single plane.
    pub rankin_sq_bound: Option<f64>,
    /// `rankin_sq_bound - achieved_delta_sq`.
    pub gap: Option<f64>,
    /// `ln(M) / n`.
    pub empirical_rate: f64,
    /// The asymptotic rates at the achieved distance. At finite `n` these
    /// are only a reference point, not bounds on `empirical_rate`.
    pub asymptotic_rates: Option<RatePoint>,
    pub rates_note: &'static str,
}

pub fn bound_report(code: &Code) -> BoundReport {
    let (m, k, n) = (code.len(), code.k(), code.n());
    let achieved = code.min_distance_sq();
    let rankin = if m >= 2 && k < n { rankin_sq_bound(m, k, n).ok() } else { None };
    let delta = code.min_distance();
    let rates = if delta.is_finite() && delta > 0.0 {
        RatePoint::evaluate(delta.min((k as f64).sqrt()), k).ok()
    } else {
        None
    };
    BoundReport {
        m,
        k,
        n,
        min_distance: delta,
        achieved_delta_sq: achieved,
        rankin_sq_bound: rankin,
        gap: rankin.map(|b| b - achieved),
        empirical_rate: (m as f64).ln() / n as f64,
        asymptotic_rates: rates,
        rates_note: "advisory: asymptotic (n -> infinity) rate curves evaluated at the achieved distance",
    }
}

/// Three lines in `R^2` at mutual angles of 60 degrees.
pub fn three_lines() -> Code {
    let planes = (0..3)
        .map(|i| {
            let a = std::f64::consts::PI * i as f64 / 3.0;
            Subspace::new(DMatrix::from_row_slice(1, 2, &[a.cos(), a.sin()])).expect("unit row")
        })
        .collect();
    Code::new(planes).expect("common dimensions")
}

/// The six diagonals of the icosahedron, lines in `R^3`.
pub fn icosahedron_lines() -> Code {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let dirs = [[0.0, 1.0, phi], [0.0, 1.0, -phi], [1.0, phi, 0.0], [1.0, -phi, 0.0], [phi, 0.0, 1.0], [-phi, 0.0, 1.0]];
    let planes = dirs
        .iter()
        .map(|d| Subspace::new(DMatrix::from_row_slice(1, 3, d)).expect("non-zero row"))
        .collect();
    Code::new(planes).expect("common dimensions")
}
