//! Rate bounds for codes in `G(k, n)` as `n -> infinity` with `k` fixed.
//!
//! All rates are in nats per ambient dimension, `(1/n) ln M`, as functions of
//! the chordal distance `delta` in `(0, sqrt k]`:
//!
//! * `R_GV(d) = -k ln(d / sqrt k)`, achievable (lower bound);
//! * `R_H(d)  = -k ln sqrt(1 - sqrt(1 - d^2 / 2k))`, volume upper bound;
//! * `R_LP(d) = k [(1 + s) ln(1 + s) - s ln s]`, `s = (k/2)(sqrt k / d - 1)`;
//! * `R_R(d)  = -k ln sqrt(1 - sqrt(1 - d^2 / k))`, the Rankin-type bound.
//!
//! The finite bound [`rankin_sq_bound`] constrains the squared distance of
//! an `M`-point code.

use std::io::Write;

use serde::Serialize;

use crate::format::fmt_sig;
use crate::{Error, Result};

/// Grid size of the bracketing scan in the crossover solvers.
pub const ROOT_SCAN_POINTS: usize = 512;

/// Absolute bisection tolerance on `delta`.
pub const ROOT_TOL: f64 = 1e-6;

/// Relative rounding slack accepted above `sqrt k` (values are clamped).
pub const DIAMETER_SLACK: f64 = 1e-12;

fn check_delta(delta: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("k must be positive".into()));
    }
    let max = (k as f64).sqrt();
    if !(delta > 0.0 && delta <= max * (1.0 + DIAMETER_SLACK)) {
        return Err(Error::Domain(format!("delta = {delta} outside (0, sqrt {k}]")));
    }
    Ok(delta.min(max))
}

/// Gilbert-Varshamov rate `-k ln(delta / sqrt k)`.
pub fn rate_gv(delta: f64, k: usize) -> Result<f64> {
    let delta = check_delta(delta, k)?;
    let kf = k as f64;
    Ok((-kf * (delta / kf.sqrt()).ln()).max(0.0))
}

/// `-k ln sqrt(1 - sqrt(1 - x))`, with `1 - sqrt(1 - x)` evaluated as
/// `x / (1 + sqrt(1 - x))` to avoid cancellation for small `x`.
fn neg_log_cap(x: f64, k: usize) -> f64 {
    let inner = x / (1.0 + (1.0 - x).max(0.0).sqrt());
    // +0.0 turns -0.0 at the diameter into 0.0
    -(k as f64) * 0.5 * inner.ln() + 0.0
}

/// Hamming (sphere-packing) rate.
pub fn rate_hamming(delta: f64, k: usize) -> Result<f64> {
    let delta = check_delta(delta, k)?;
    Ok(neg_log_cap((delta / (2.0 * k as f64).sqrt()).powi(2), k))
}

/// The auxiliary `s = (k/2)(sqrt k / delta - 1)` of the LP bound.
pub fn lp_parameter(delta: f64, k: usize) -> Result<f64> {
    let delta = check_delta(delta, k)?;
    let kf = k as f64;
    Ok((0.5 * kf * (kf.sqrt() / delta - 1.0)).max(0.0))
}

/// Linear-programming rate, with `s ln s := 0` at `s = 0`.
pub fn rate_lp(delta: f64, k: usize) -> Result<f64> {
    let s = lp_parameter(delta, k)?;
    let s_ln_s = if s == 0.0 { 0.0 } else { s * s.ln() };
    Ok(k as f64 * ((1.0 + s) * s.ln_1p() - s_ln_s))
}

/// Rankin-type rate `-k ln sqrt(1 - sqrt(1 - delta^2 / k))`.
pub fn rate_rankin_new(delta: f64, k: usize) -> Result<f64> {
    let delta = check_delta(delta, k)?;
    Ok(neg_log_cap((delta / (k as f64).sqrt()).powi(2), k))
}

/// Upper bound on the squared minimum distance of an `M`-point code in
/// `G(k, n)`: `(k(n-k)/n) M/(M-1)` up to `M = n(n+1)/2`, then `k(n-k)/n`.
pub fn rankin_sq_bound(m: usize, k: usize, n: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::Domain(format!("M = {m}: need at least two planes")));
    }
    if k == 0 || k >= n {
        return Err(Error::Domain(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let base = (k * (n - k)) as f64 / n as f64;
    if m <= n * (n + 1) / 2 {
        Ok(base * m as f64 / (m - 1) as f64)
    } else {
        Ok(base)
    }
}

/// Scans `ROOT_SCAN_POINTS` interior points of `(0, sqrt k)` for the first
/// sign change of `f`, then bisects. A last point just below `sqrt k` is
/// added, since for large `k` the crossing can sit inside the final grid cell
/// (`k = 10` crosses about 0.0016 below the diameter).
fn crossing(k: usize, what: &'static str, f: impl Fn(f64) -> f64) -> Result<f64> {
    let top = (k as f64).sqrt();
    let step = top / (ROOT_SCAN_POINTS + 1) as f64;
    let mut lo = step;
    let mut f_lo = f(lo);
    for i in 2..=ROOT_SCAN_POINTS + 1 {
        let hi = if i > ROOT_SCAN_POINTS { top * (1.0 - 1e-9) } else { step * i as f64 };
        let f_hi = f(hi);
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_lo.signum() != f_hi.signum() {
            return Ok(bisect(&f, lo, hi, f_lo));
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(Error::NoRoot { k, what })
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let sign_lo = f_lo.signum();
    while hi - lo > ROOT_TOL * 1e-3 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Where the Rankin-type curve meets the LP curve (`k >= 2`). Below this
/// distance `R_R` is the smaller of the two.
pub fn crossover_delta_star(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain("crossover requires k >= 2".into()));
    }
    crossing(k, "R_R = R_LP", |d| rate_rankin_new(d, k).unwrap() - rate_lp(d, k).unwrap())
}

/// Where the LP curve meets the Hamming curve (`k >= 2`).
pub fn crossover_lp_hamming(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain("crossover requires k >= 2".into()));
    }
    crossing(k, "R_LP = R_H", |d| rate_lp(d, k).unwrap() - rate_hamming(d, k).unwrap())
}

/// All four rates at one distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub delta: f64,
    pub k: usize,
    pub r_gv: f64,
    pub r_hamming: f64,
    pub r_lp: f64,
    pub r_rankin: f64,
}

impl RatePoint {
    pub fn evaluate(delta: f64, k: usize) -> Result<Self> {
        Ok(Self {
            delta,
            k,
            r_gv: rate_gv(delta, k)?,
            r_hamming: rate_hamming(delta, k)?,
            r_lp: rate_lp(delta, k)?,
            r_rankin: rate_rankin_new(delta, k)?,
        })
    }
}

pub fn emit_rate_table(k: usize, grid: &[f64]) -> Result<Vec<RatePoint>> {
    grid.iter().map(|&d| RatePoint::evaluate(d, k)).collect()
}

pub const RATE_CSV_HEADER: &str = "delta,r_gv,r_rankin,r_lp,r_hamming";

/// Writes the table as CSV, 12 significant digits, LF endings.
pub fn write_rate_csv<W: Write>(mut out: W, table: &[RatePoint]) -> std::io::Result<()> {
    writeln!(out, "{RATE_CSV_HEADER}")?;
    for p in table {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_sig(p.delta),
            fmt_sig(p.r_gv),
            fmt_sig(p.r_rankin),
            fmt_sig(p.r_lp),
            fmt_sig(p.r_hamming)
        )?;
    }
    Ok(())
}
