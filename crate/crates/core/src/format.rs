//! Text formats: fixed-precision numbers for CSV/JSON reports and the plain
//! matrix format for planes and codes.
//!
//! A plane is written as a line `k n` followed by `k` lines of `n`
//! whitespace-separated decimals (shortest round-trip representation). A
//! code file starts with `M k n` and then holds `M` planes in that format.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::geometry::Subspace;
use crate::{Error, Result};

/// Significant digits used for every floating value in reports.
pub const REPORT_DIGITS: usize = 12;

/// Formats `x` like C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    fmt_sig_digits(x, REPORT_DIGITS)
}

pub fn fmt_sig_digits(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let digits = digits.max(1);
    // Round first so that e.g. 9.9999999999996 picks the right exponent.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Plain-text form of a single plane.
pub fn write_subspace<W: Write>(mut out: W, p: &Subspace) -> std::io::Result<()> {
    writeln!(out, "{} {}", p.k(), p.n())?;
    for row in p.basis().row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Writes `M k n` and then every plane.
pub fn write_code<W: Write>(mut out: W, planes: &[Subspace]) -> std::io::Result<()> {
    let (k, n) = planes.first().map(|p| (p.k(), p.n())).unwrap_or((0, 0));
    writeln!(out, "{} {} {}", planes.len(), k, n)?;
    for p in planes {
        write_subspace(&mut out, p)?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Self { inner: r.lines(), line: 0 }
    }

    /// Next non-blank line, split into fields.
    fn fields(&mut self) -> Result<Vec<String>> {
        loop {
            self.line += 1;
            let text = match self.inner.next() {
                Some(Ok(t)) => t,
                Some(Err(e)) => return Err(self.err(e.to_string())),
                None => return Err(self.err("unexpected end of input".into())),
            };
            let fields: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
            if !fields.is_empty() {
                return Ok(fields);
            }
        }
    }

    fn integers(&mut self, count: usize) -> Result<Vec<usize>> {
        let f = self.fields()?;
        if f.len() != count {
            return Err(self.err(format!("expected {count} integers, found {}", f.len())));
        }
        f.iter()
            .map(|s| s.parse::<usize>().map_err(|e| self.err(format!("{s:?}: {e}"))))
            .collect()
    }

    fn err(&self, msg: String) -> Error {
        Error::Parse { line: self.line, msg }
    }

    fn subspace(&mut self, allow_any_k: bool) -> Result<Subspace> {
        let header = self.integers(2)?;
        let (k, n) = (header[0], header[1]);
        let mut data = Vec::with_capacity(k * n);
        for _ in 0..k {
            let f = self.fields()?;
            if f.len() != n {
                return Err(self.err(format!("expected {n} entries, found {}", f.len())));
            }
            for s in &f {
                data.push(s.parse::<f64>().map_err(|e| self.err(format!("{s:?}: {e}")))?);
            }
        }
        let rows = DMatrix::from_row_slice(k, n, &data);
        if allow_any_k {
            Subspace::new_unrestricted(rows)
        } else {
            Subspace::new(rows)
        }
    }
}

/// Reads one plane. Planes with `k > n/2` are accepted.
pub fn read_subspace<R: BufRead>(input: R) -> Result<Subspace> {
    Lines::new(input).subspace(true)
}

/// Reads a code file. Every plane must match the header's `k` and `n`.
pub fn read_code<R: BufRead>(input: R) -> Result<Vec<Subspace>> {
    let mut lines = Lines::new(input);
    let header = lines.integers(3)?;
    let (m, k, n) = (header[0], header[1], header[2]);
    let mut planes = Vec::with_capacity(m);
    for _ in 0..m {
        let p = lines.subspace(true)?;
        if p.k() != k || p.n() != n {
            return Err(lines.err(format!("plane is {}x{}, header says {k}x{n}", p.k(), p.n())));
        }
        planes.push(p);
    }
    Ok(planes)
}
