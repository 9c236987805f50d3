//! Lattice detection and exact one-dimensional lattice pmfs.

use crate::error::{Error, Result};

/// Largest index a detected lattice may use.
const MAX_INDEX: f64 = 1e7;

/// Values written as `offset + span * index` with non-negative integer indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFit {
    pub offset: f64,
    pub span: f64,
    pub indices: Vec<i64>,
}

/// Finds the maximal span `h` and offset such that every value lies on
/// `offset + h * Z`, using a tolerant Euclid on the pairwise differences.
/// A single support point gets span 1.
pub fn detect_lattice(values: &[f64]) -> Result<LatticeFit> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotLattice);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    if width == 0.0 {
        return Ok(LatticeFit {
            offset: lo,
            span: 1.0,
            indices: vec![0; values.len()],
        });
    }
    let tol = 1e-9 * width.max(lo.abs()).max(1e-300);
    let mut span = 0.0f64;
    for &v in values {
        let d = v - lo;
        if d > tol {
            span = real_gcd(span, d, tol);
        }
    }
    if span <= tol || width / span > MAX_INDEX {
        return Err(Error::NotLattice);
    }
    let mut indices = Vec::with_capacity(values.len());
    for &v in values {
        let k = ((v - lo) / span).round();
        if ((v - lo) - k * span).abs() > 1e-6 * span {
            return Err(Error::NotLattice);
        }
        indices.push(k as i64);
    }
    Ok(LatticeFit {
        offset: lo,
        span,
        indices,
    })
}

fn real_gcd(a: f64, b: f64, tol: f64) -> f64 {
    let (mut a, mut b) = if a >= b { (a, b) } else { (b, a) };
    while b > tol {
        let r = a % b;
        let r = if b - r <= tol { 0.0 } else { r };
        a = b;
        b = r;
    }
    a
}

/// Exact pmf on `offset + span * {0, 1, ..., len-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePmf {
    pub offset: f64,
    pub span: f64,
    pub probs: Vec<f64>,
}

impl LatticePmf {
    pub fn from_atoms(values: &[f64], probs: &[f64]) -> Result<Self> {
        let fit = detect_lattice(values)?;
        let len = fit.indices.iter().copied().max().unwrap_or(0) as usize + 1;
        let mut out = vec![0.0; len];
        for (&k, &p) in fit.indices.iter().zip(probs) {
            out[k as usize] += p;
        }
        Ok(Self {
            offset: fit.offset,
            span: fit.span,
            probs: out,
        })
    }

    pub fn value(&self, k: usize) -> f64 {
        self.offset + self.span * k as f64
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| p * self.value(k))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| p * (self.value(k) - m).powi(2))
            .sum()
    }

    /// Law of the sum of independent copies; spans must agree.
    pub fn convolve(&self, other: &Self) -> Self {
        debug_assert!((self.span - other.span).abs() <= 1e-12 * self.span);
        Self {
            offset: self.offset + other.offset,
            span: self.span,
            probs: convolve_direct(&self.probs, &other.probs),
        }
    }

    /// `n`-fold convolution power by repeated squaring.
    pub fn power(&self, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("convolution power needs n >= 1".into()));
        }
        let cells = (self.probs.len() as u128 - 1) * n as u128 + 1;
        if cells > 1 << 26 {
            return Err(Error::ResourceLimit(format!(
                "convolution power would need {cells} cells"
            )));
        }
        let mut base = self.clone();
        let mut acc: Option<Self> = None;
        let mut k = n;
        loop {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.convolve(&base),
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.convolve(&base);
        }
        Ok(acc.expect("n >= 1"))
    }

    /// Atoms `(value, prob)` in increasing value order, zero-mass points dropped.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| (self.value(k), p))
            .collect()
    }
}

/// Direct linear convolution, skipping zero entries of the shorter input.
pub(crate) fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut out = vec![0.0; long.len() + short.len() - 1];
    for (j, &q) in short.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        for (o, &p) in out[j..j + long.len()].iter_mut().zip(long) {
            *o += p * q;
        }
    }
    out
}
