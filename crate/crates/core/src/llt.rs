//! Exact laws of sums of i.i.d. lattice pairs `Z = (V, W)` and the local
//! and semi-local limit discrepancies against Gaussian kernels.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{normal_density, psi_unchecked, CovarianceMatrix2};
use crate::lattice::detect_lattice;

/// Largest support accepted for a single-step law.
pub const MAX_SUPPORT: usize = 64;
/// Largest number of summands.
pub const MAX_N: u64 = 4096;
/// Largest grid of an exact pmf.
const MAX_CELLS: usize = 1 << 26;
/// Work (cells times support, summed over steps) above which the FFT path
/// is used.
const DIRECT_WORK_LIMIT: f64 = 2e8;
/// Accepted total-mass drift of an FFT result before renormalization.
pub const FFT_ERROR_BUDGET: f64 = 1e-10;

/// Law of one centered lattice pair. Values are
/// `V = v_offset + v_span * a`, `W = w_offset + w_span * b` with
/// `probs[a * nb + b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeJointLaw {
    pub v_offset: f64,
    pub v_span: f64,
    pub w_offset: f64,
    pub w_span: f64,
    pub na: usize,
    pub nb: usize,
    pub probs: Vec<f64>,
    /// Number of atoms with positive mass.
    pub support: usize,
}

impl LatticeJointLaw {
    /// Builds the law from raw `(v, w, prob)` atoms and centers it.
    pub fn from_table(atoms: &[(f64, f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput);
        }
        if atoms.iter().any(|a| !(a.2 >= 0.0)) {
            return invalid("negative probability in joint table");
        }
        let total: f64 = atoms.iter().map(|a| a.2).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("joint table sums to {total}"));
        }
        let vs: Vec<f64> = atoms.iter().map(|a| a.0).collect();
        let ws: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let fv = detect_lattice(&vs)?;
        let fw = detect_lattice(&ws)?;
        let na = *fv.indices.iter().max().expect("non-empty") as usize + 1;
        let nb = *fw.indices.iter().max().expect("non-empty") as usize + 1;
        if na * nb > MAX_CELLS {
            return Err(Error::ResourceLimit("joint table grid too large".into()));
        }
        let mut probs = vec![0.0; na * nb];
        for ((&a, &b), atom) in fv.indices.iter().zip(&fw.indices).zip(atoms) {
            probs[a as usize * nb + b as usize] += atom.2;
        }
        let support = probs.iter().filter(|&&p| p > 0.0).count();
        let mut law = Self {
            v_offset: fv.offset,
            v_span: fv.span,
            w_offset: fw.offset,
            w_span: fw.span,
            na,
            nb,
            probs,
            support,
        };
        let (mv, mw) = law.mean();
        law.v_offset -= mv;
        law.w_offset -= mw;
        Ok(law)
    }

    pub fn v_value(&self, a: usize) -> f64 {
        self.v_offset + self.v_span * a as f64
    }

    pub fn w_value(&self, b: usize) -> f64 {
        self.w_offset + self.w_span * b as f64
    }

    fn atoms(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(move |(i, &p)| (self.v_value(i / self.nb), self.w_value(i % self.nb), p))
    }

    pub fn mean(&self) -> (f64, f64) {
        self.atoms()
            .fold((0.0, 0.0), |(x, y), (v, w, p)| (x + p * v, y + p * w))
    }

    /// Covariance of one step (the law is centered).
    pub fn covariance(&self) -> CovarianceMatrix2 {
        let (mv, mw) = self.mean();
        let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
        for (v, w, p) in self.atoms() {
            s11 += p * (v - mv) * (v - mv);
            s12 += p * (v - mv) * (w - mw);
            s22 += p * (w - mw) * (w - mw);
        }
        CovarianceMatrix2 { s11, s12, s22 }
    }

    /// Characteristic function `E exp(i (s1 V + s2 W))`.
    pub fn charfn(&self, s1: f64, s2: f64) -> Complex64 {
        self.atoms()
            .map(|(v, w, p)| Complex64::from_polar(p, s1 * v + s2 * w))
            .sum()
    }
}

/// Exact pmf of `S_n = Z_1 + ... + Z_n`, indexed like the one-step law.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    pub n: u64,
    pub v_offset: f64,
    pub v_span: f64,
    pub w_offset: f64,
    pub w_span: f64,
    pub na: usize,
    pub nb: usize,
    pub probs: Vec<f64>,
    /// `|1 - total mass|` before any renormalization.
    pub mass_error: f64,
}

impl JointPmf {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.probs[a * self.nb + b]
    }

    pub fn v_value(&self, a: usize) -> f64 {
        self.n as f64 * self.v_offset + self.v_span * a as f64
    }

    pub fn w_value(&self, b: usize) -> f64 {
        self.n as f64 * self.w_offset + self.w_span * b as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Law of the sum of independent copies of `self` and `other`, by direct
    /// convolution.
    pub fn convolve(&self, other: &JointPmf) -> JointPmf {
        let na = self.na + other.na - 1;
        let nb = self.nb + other.nb - 1;
        let mut probs = vec![0.0; na * nb];
        direct_conv2(
            &self.probs,
            self.na,
            self.nb,
            &other.probs,
            other.na,
            other.nb,
            &mut probs,
            nb,
        );
        let mass: f64 = probs.iter().sum();
        JointPmf {
            n: self.n + other.n,
            v_offset: self.v_offset,
            v_span: self.v_span,
            w_offset: self.w_offset,
            w_span: self.w_span,
            na,
            nb,
            probs,
            mass_error: (mass - 1.0).abs(),
        }
    }

    /// Marginal pmf of the second coordinate.
    pub fn w_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nb];
        for a in 0..self.na {
            for (b, o) in out.iter_mut().enumerate() {
                *o += self.get(a, b);
            }
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn direct_conv2(
    x: &[f64],
    xa: usize,
    xb: usize,
    y: &[f64],
    ya: usize,
    yb: usize,
    out: &mut [f64],
    ob: usize,
) {
    for a2 in 0..ya {
        for b2 in 0..yb {
            let q = y[a2 * yb + b2];
            if q == 0.0 {
                continue;
            }
            for a1 in 0..xa {
                let row = &x[a1 * xb..(a1 + 1) * xb];
                let dst = &mut out[(a1 + a2) * ob + b2..(a1 + a2) * ob + b2 + xb];
                for (d, &p) in dst.iter_mut().zip(row) {
                    *d += p * q;
                }
            }
        }
    }
}

/// Exact pmf of `S_n`. Small problems are convolved directly, one summand
/// at a time; large ones raise the discrete Fourier transform of the
/// one-step law to the `n`-th power on a grid that holds the full support.
pub fn convolve_n(law: &LatticeJointLaw, n: u64) -> Result<JointPmf> {
    if n == 0 {
        return invalid("convolve_n needs n >= 1");
    }
    if n > MAX_N {
        return Err(Error::ResourceLimit(format!("n = {n} exceeds {MAX_N}")));
    }
    if law.support > MAX_SUPPORT {
        return Err(Error::ResourceLimit(format!(
            "support {} exceeds {MAX_SUPPORT}",
            law.support
        )));
    }
    let na = (law.na - 1) * n as usize + 1;
    let nb = (law.nb - 1) * n as usize + 1;
    if na.saturating_mul(nb) > MAX_CELLS {
        return Err(Error::ResourceLimit(format!(
            "{na} x {nb} grid exceeds the cell limit"
        )));
    }
    let base = JointPmf {
        n: 1,
        v_offset: law.v_offset,
        v_span: law.v_span,
        w_offset: law.w_offset,
        w_span: law.w_span,
        na: law.na,
        nb: law.nb,
        probs: law.probs.clone(),
        mass_error: (law.probs.iter().sum::<f64>() - 1.0).abs(),
    };
    let work: f64 = (1..=n)
        .map(|k| ((law.na - 1) as f64 * k as f64 + 1.0) * ((law.nb - 1) as f64 * k as f64 + 1.0))
        .sum::<f64>()
        * law.support as f64;
    if work <= DIRECT_WORK_LIMIT {
        return Ok(direct_power(&base, n));
    }
    let fft = fft_power(&base, n, na, nb);
    if fft.mass_error <= FFT_ERROR_BUDGET {
        let mut out = fft;
        let mass = out.total_mass();
        out.probs.iter_mut().for_each(|p| *p /= mass);
        return Ok(out);
    }
    log::warn!(
        "FFT mass drift {:e} above budget, falling back to direct convolution",
        fft.mass_error
    );
    Ok(direct_power(&base, n))
}

fn direct_power(base: &JointPmf, n: u64) -> JointPmf {
    let mut acc = base.clone();
    for _ in 1..n {
        acc = acc.convolve(base);
    }
    acc
}

fn fft_power(base: &JointPmf, n: u64, na: usize, nb: usize) -> JointPmf {
    let mut grid = vec![Complex64::new(0.0, 0.0); na * nb];
    for a in 0..base.na {
        for b in 0..base.nb {
            grid[a * nb + b] = Complex64::new(base.get(a, b), 0.0);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    fft2(&mut planner, &mut grid, na, nb, false);
    for z in grid.iter_mut() {
        *z = z.powu(n as u32);
    }
    fft2(&mut planner, &mut grid, na, nb, true);
    let scale = 1.0 / (na * nb) as f64;
    let mut negative = 0.0;
    let probs: Vec<f64> = grid
        .iter()
        .map(|z| {
            let p = z.re * scale;
            if p < 0.0 {
                negative -= p;
                0.0
            } else {
                p
            }
        })
        .collect();
    let mass: f64 = probs.iter().sum();
    JointPmf {
        n,
        v_offset: base.v_offset,
        v_span: base.v_span,
        w_offset: base.w_offset,
        w_span: base.w_span,
        na,
        nb,
        probs,
        mass_error: (mass - 1.0).abs() + negative,
    }
}

fn fft2(
    planner: &mut FftPlanner<f64>,
    grid: &mut [Complex64],
    rows: usize,
    cols: usize,
    inverse: bool,
) {
    let row_fft = if inverse {
        planner.plan_fft_inverse(cols)
    } else {
        planner.plan_fft_forward(cols)
    };
    for row in grid.chunks_exact_mut(cols) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(rows)
    } else {
        planner.plan_fft_forward(rows)
    };
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = grid[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            grid[r * cols + c] = column[r];
        }
    }
}

/// Weighted local discrepancy of the second coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct LltProfile {
    pub sup: f64,
    pub argmax_y: f64,
    /// `(y_n, (1 + y_n^2) |P(Y_n / sqrt n = y_n) - gaussian mass|)` per lattice row.
    pub profile: Vec<(f64, f64)>,
}

/// Rows beyond the support whose Gaussian mass is still visible.
fn margin_rows(pmf: &JointPmf, s22: f64) -> (Vec<i64>, f64) {
    let sqrt_n = (pmf.n as f64).sqrt();
    let h = pmf.w_span;
    let weighted = |b: i64| {
        let y = (pmf.n as f64 * pmf.w_offset + h * b as f64) / sqrt_n;
        (1.0 + y * y) * h / sqrt_n * normal_density(s22, y)
    };
    let mut rows = Vec::new();
    for dir in [-1i64, 1] {
        let mut b = if dir < 0 { -1 } else { pmf.nb as i64 };
        loop {
            let g = weighted(b);
            let y = (pmf.n as f64 * pmf.w_offset + h * b as f64) / sqrt_n;
            rows.push(b);
            if g < 1e-20 && y * y > s22 {
                break;
            }
            b += dir;
        }
    }
    (rows, sqrt_n)
}

/// `sup_y (1 + y_n^2) |P(Y_n / sqrt n = y_n) - h_W / sqrt(2 pi n s22) e^{-y_n^2 / (2 s22)}|`
/// over all lattice points of `Y_n`.
pub fn weighted_llt_discrepancy(law: &LatticeJointLaw, n: u64) -> Result<LltProfile> {
    let pmf = convolve_n(law, n)?;
    weighted_llt_from_pmf(&pmf, law.covariance().s22)
}

pub fn weighted_llt_from_pmf(pmf: &JointPmf, s22: f64) -> Result<LltProfile> {
    if !(s22 > crate::gaussian::DEGENERACY_TOL) {
        return Err(Error::DegenerateCovariance { det: s22 });
    }
    let marginal = pmf.w_marginal();
    let (extra, sqrt_n) = margin_rows(pmf, s22);
    let h = pmf.w_span;
    let mut profile = Vec::with_capacity(marginal.len() + extra.len());
    let rows = (0..pmf.nb as i64).chain(extra);
    for b in rows {
        let y = (pmf.n as f64 * pmf.w_offset + h * b as f64) / sqrt_n;
        let p = if (0..pmf.nb as i64).contains(&b) {
            marginal[b as usize]
        } else {
            0.0
        };
        let g = h / sqrt_n * normal_density(s22, y);
        profile.push((y, (1.0 + y * y) * (p - g).abs()));
    }
    profile.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (argmax_y, sup) =
        profile.iter().copied().fold(
            (f64::NAN, -1.0),
            |acc, (y, d)| if d > acc.1 { (y, d) } else { acc },
        );
    Ok(LltProfile {
        sup,
        argmax_y,
        profile,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiLocalReport {
    pub n: u64,
    pub sup_weighted_llt: f64,
    pub sup_weighted_semilocal: f64,
    /// Location of the semi-local sup, in units of `X_n / sqrt n`; infinite
    /// when attained in the `x -> +inf` limit.
    #[serde(with = "crate::types::ext_f64")]
    pub argmax_x: f64,
    pub argmax_y: f64,
}

/// `sup_{x, y} (1 + y_n^2) |P(X_n / sqrt n <= x, Y_n / sqrt n = y_n) - h_W / sqrt n psi_Sigma(x, y_n)|`,
/// taken over both one-sided limits at every jump of the exact CDF, the
/// `x -> +inf` limit and the supplied `x_grid`.
pub fn semilocal_discrepancy(
    law: &LatticeJointLaw,
    n: u64,
    x_grid: &[f64],
) -> Result<SemiLocalReport> {
    let sigma = law.covariance();
    sigma.require_positive_definite()?;
    let pmf = convolve_n(law, n)?;
    semilocal_from_pmf(&pmf, &sigma, x_grid)
}

pub fn semilocal_from_pmf(
    pmf: &JointPmf,
    sigma: &CovarianceMatrix2,
    x_grid: &[f64],
) -> Result<SemiLocalReport> {
    sigma.require_positive_definite()?;
    let llt = weighted_llt_from_pmf(pmf, sigma.s22)?;
    let sqrt_n = (pmf.n as f64).sqrt();
    let h = pmf.w_span;
    let xs: Vec<f64> = (0..pmf.na).map(|a| pmf.v_value(a) / sqrt_n).collect();
    let mut best = (-1.0f64, f64::NAN, f64::NAN);
    let mut consider = |d: f64, x: f64, y: f64| {
        if d > best.0 {
            best = (d, x, y);
        }
    };
    let (extra, _) = margin_rows(pmf, sigma.s22);
    for b in (0..pmf.nb as i64).chain(extra) {
        let y = (pmf.n as f64 * pmf.w_offset + h * b as f64) / sqrt_n;
        let weight = 1.0 + y * y;
        let scale = h / sqrt_n;
        let inside = (0..pmf.nb as i64).contains(&b);
        let mut cdf = 0.0;
        for (a, &x) in xs.iter().enumerate() {
            let p = if inside { pmf.get(a, b as usize) } else { 0.0 };
            let g = scale * psi_unchecked(sigma, x, y);
            consider(weight * (cdf - g).abs(), x, y);
            cdf += p;
            consider(weight * (cdf - g).abs(), x, y);
        }
        consider(
            weight * (cdf - scale * normal_density(sigma.s22, y)).abs(),
            f64::INFINITY,
            y,
        );
        for &x in x_grid {
            let k = xs.partition_point(|&v| v <= x);
            let f: f64 = if inside {
                (0..k).map(|a| pmf.get(a, b as usize)).sum()
            } else {
                0.0
            };
            consider(
                weight * (f - scale * psi_unchecked(sigma, x, y)).abs(),
                x,
                y,
            );
        }
    }
    Ok(SemiLocalReport {
        n: pmf.n,
        sup_weighted_llt: llt.sup,
        sup_weighted_semilocal: best.0,
        argmax_x: best.1,
        argmax_y: best.2,
    })
}

/// `(lambda_n(t), lambda_0(t)) = (phi(t / sqrt n)^n, exp(-t' Sigma t / 2))`.
pub fn charfn_eval(law: &LatticeJointLaw, n: u64, t: (f64, f64)) -> (Complex64, Complex64) {
    let sqrt_n = (n as f64).sqrt();
    let phi = law.charfn(t.0 / sqrt_n, t.1 / sqrt_n);
    let lambda_n = pow_u64(phi, n);
    let lambda_0 = Complex64::new((-0.5 * law.covariance().quad_form(t.0, t.1)).exp(), 0.0);
    (lambda_n, lambda_0)
}

fn pow_u64(z: Complex64, n: u64) -> Complex64 {
    let mut base = z;
    let mut acc = Complex64::new(1.0, 0.0);
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

/// Constants of the characteristic-function spot check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpotCheckParams {
    /// Admissible `|t1| <= eps sqrt n`.
    pub eps: f64,
    /// Gaussian weight `e^{c |t|^2}`.
    pub c: f64,
    pub delta: f64,
}

/// Largest `|phi(t / sqrt n)^(n - j) - lambda_0(t)| e^{c |t|^2} n^{delta/2}`
/// over `grid` and `j` in `{0, 1, 2}`.
pub fn prop43a_spotcheck(
    law: &LatticeJointLaw,
    n: u64,
    grid: &[(f64, f64)],
    params: SpotCheckParams,
) -> Result<f64> {
    if n < 3 {
        return invalid("spot check needs n >= 3");
    }
    let sqrt_n = (n as f64).sqrt();
    let t2_max = std::f64::consts::PI * sqrt_n / law.w_span;
    let sigma = law.covariance();
    let mut worst = 0.0f64;
    for &(t1, t2) in grid {
        if t1.abs() > params.eps * sqrt_n || t2.abs() > t2_max {
            return invalid(format!(
                "grid point ({t1}, {t2}) outside the admissible region"
            ));
        }
        let phi = law.charfn(t1 / sqrt_n, t2 / sqrt_n);
        let lambda_0 = (-0.5 * sigma.quad_form(t1, t2)).exp();
        let weight = (params.c * (t1 * t1 + t2 * t2)).exp() * (n as f64).powf(params.delta / 2.0);
        for j in 0..=2 {
            let d = (pow_u64(phi, n - j) - lambda_0).norm();
            worst = worst.max(d * weight);
        }
    }
    Ok(worst)
}
