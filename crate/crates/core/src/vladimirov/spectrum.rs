//! Closed-form spectrum of the generator and a numerical check against it.
//!
//! The constant vector spans the kernel; the wavelets at scale `r` (one per
//! `j in 1..p` and per ball of radius `p^r`) share the eigenvalue
//! `-(p^((1 - r) alpha) - mu)`. The numerical side runs a Householder
//! tridiagonalization followed by Sturm bisection, generic over the scalar
//! type so it can be run in double-double precision where eigenvalues reach
//! `1e12`.

use super::generator::{mu_in, GeneratorMatrix};
use super::VladimirovError;
use crate::padic::IndexLattice;
use crate::scalar::{DoubleDouble, Real};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine<T = f64> {
    pub eigenvalue: T,
    pub multiplicity: usize,
}

pub fn expected_spectrum_in<T: Real>(p: u64, m: u32, alpha: f64) -> Result<Vec<SpectralLine<T>>, VladimirovError> {
    IndexLattice::new(p, m)?;
    let mu = mu_in::<T>(p, alpha)?;
    let mut lines = vec![SpectralLine {
        eigenvalue: T::zero(),
        multiplicity: 1,
    }];
    for k in 0..m {
        // r = -k
        let exponent = (1.0 + k as f64) * alpha;
        let pw = if alpha.fract() == 0.0 {
            T::powu(T::from_f64(p as f64), exponent as u64)
        } else {
            T::powf(T::from_f64(p as f64), T::from_f64(exponent))
        };
        lines.push(SpectralLine {
            eigenvalue: -(pw - mu),
            multiplicity: (p as usize - 1) * (p as usize).pow(k),
        });
    }
    Ok(lines)
}

/// `{0: 1} U {-(p^((1-r) alpha) - mu): (p - 1) p^-r}` for `r = 0, -1, .., 1 - m`.
pub fn expected_spectrum(p: u64, m: u32, alpha: f64) -> Result<Vec<SpectralLine<f64>>, VladimirovError> {
    Ok(expected_spectrum_in::<DoubleDouble>(p, m, alpha)?
        .into_iter()
        .map(|l| SpectralLine {
            eigenvalue: l.eigenvalue.to_f64(),
            multiplicity: l.multiplicity,
        })
        .collect())
}

fn sign<T: Real>(x: T) -> T {
    if x < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}

/// Reduces a symmetric matrix (row-major, `n x n`) to tridiagonal form.
/// Returns the diagonal and the `n - 1` off-diagonal entries.
fn tridiagonalize<T: Real>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut a = a.to_vec();
    let mut diag = vec![T::zero(); n];
    let mut off = vec![T::zero(); n.saturating_sub(1)];
    let mut v = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let mut norm2 = T::zero();
        for i in lo..n {
            norm2 += a[i * n + k] * a[i * n + k];
        }
        diag[k] = a[k * n + k];
        if norm2 == T::zero() {
            off[k] = T::zero();
            continue;
        }
        let norm = norm2.sqrt();
        let head = a[lo * n + k];
        let beta = -sign(head) * norm;
        for i in lo..n {
            v[i] = a[i * n + k];
        }
        v[lo] -= beta;
        let mut vnorm2 = T::zero();
        for &x in &v[lo..n] {
            vnorm2 += x * x;
        }
        let vnorm = vnorm2.sqrt();
        for x in &mut v[lo..n] {
            *x = *x / vnorm;
        }
        // w = A v on the trailing block, then w -= (v.w) v
        for i in lo..n {
            let mut acc = T::zero();
            for j in lo..n {
                acc += a[i * n + j] * v[j];
            }
            w[i] = acc;
        }
        let mut vw = T::zero();
        for i in lo..n {
            vw += v[i] * w[i];
        }
        for i in lo..n {
            w[i] -= vw * v[i];
        }
        let two = T::from_f64(2.0);
        for i in lo..n {
            for j in lo..n {
                a[i * n + j] -= two * (v[i] * w[j] + w[i] * v[j]);
            }
        }
        off[k] = beta;
    }
    if n >= 2 {
        diag[n - 2] = a[(n - 2) * n + n - 2];
        off[n - 2] = a[(n - 1) * n + n - 2];
    }
    if n >= 1 {
        diag[n - 1] = a[(n - 1) * n + n - 1];
    }
    (diag, off)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count<T: Real>(diag: &[T], off2: &[T], x: T, tiny: T) -> usize {
    let mut count = 0;
    let mut q = T::one();
    for i in 0..diag.len() {
        let coupling = if i == 0 { T::zero() } else { off2[i - 1] / q };
        q = diag[i] - x - coupling;
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: &[T], n: usize) -> Vec<T> {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    let (diag, off) = tridiagonalize(a, n);
    let off2: Vec<T> = off.iter().map(|&e| e * e).collect();
    // Gershgorin bounds
    let mut lo = diag[0];
    let mut hi = diag[0];
    for i in 0..n {
        let mut r = T::zero();
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i + 1 < n {
            r += off[i].abs();
        }
        if diag[i] - r < lo {
            lo = diag[i] - r;
        }
        if diag[i] + r > hi {
            hi = diag[i] + r;
        }
    }
    let span = hi - lo + T::one();
    lo -= span * T::from_f64(1e-3);
    hi += span * T::from_f64(1e-3);
    let tiny = span * T::from_f64(1e-300);
    let half = T::from_f64(0.5);
    let resolution = T::epsilon_hint();
    (0..n)
        .map(|k| {
            // smallest x with count(x) > k
            let (mut a, mut b) = (lo, hi);
            for _ in 0..400 {
                let mid = (a + b) * half;
                if !(mid > a && mid < b) || (b - a).to_f64() <= resolution * mid.abs().to_f64().max(1e-180) {
                    break;
                }
                if sturm_count(&diag, &off2, mid, tiny) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            (a + b) * half
        })
        .collect()
}

/// One line of the spectral comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    pub expected: f64,
    pub expected_multiplicity: usize,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub p: u64,
    pub m: u32,
    pub alpha: f64,
    pub symmetric: bool,
    pub max_row_sum: f64,
    pub rows: Vec<SpectrumRow>,
    pub multiplicities_match: bool,
    pub max_abs_error: f64,
}

impl SpectrumReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.symmetric && self.multiplicities_match && self.max_abs_error < tol && self.max_row_sum < 1e-12
    }
}

/// Groups ascending eigenvalues whose relative gap is below `rel_tol`.
fn cluster<T: Real>(values: &[T], rel_tol: f64) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some(group) => {
                let last = *group.last().unwrap();
                let scale = last.abs().to_f64().max(1.0);
                if (v - last).abs().to_f64() <= rel_tol * scale {
                    group.push(v);
                } else {
                    out.push(vec![v]);
                }
            }
            None => out.push(vec![v]),
        }
    }
    out
}

/// Builds the generator in double-double precision, computes its spectrum
/// numerically and compares it with [`expected_spectrum`].
pub fn verify_spectrum(p: u64, m: u32, alpha: f64) -> Result<SpectrumReport, VladimirovError> {
    let gen = GeneratorMatrix::<DoubleDouble>::build(p, m, alpha)?;
    let n = gen.dim();
    let computed = symmetric_eigenvalues(gen.entries(), n);
    let mut expected = expected_spectrum_in::<DoubleDouble>(p, m, alpha)?;
    expected.sort_by(|a, b| a.eigenvalue.partial_cmp(&b.eigenvalue).unwrap());
    let groups = cluster(&computed, 1e-6);
    let multiplicities_match =
        groups.len() == expected.len() && groups.iter().zip(&expected).all(|(g, e)| g.len() == e.multiplicity);
    let mut rows = Vec::new();
    let mut max_abs_error = 0.0f64;
    if multiplicities_match {
        for (g, e) in groups.iter().zip(&expected) {
            let err = g.iter().map(|&v| (v - e.eigenvalue).abs().to_f64()).fold(0.0, f64::max);
            let mean = g.iter().fold(DoubleDouble::from(0.0), |acc, &v| acc + v) / DoubleDouble::from(g.len() as f64);
            max_abs_error = max_abs_error.max(err);
            rows.push(SpectrumRow {
                eigenvalue: mean.to_f64(),
                multiplicity: g.len(),
                expected: e.eigenvalue.to_f64(),
                expected_multiplicity: e.multiplicity,
                abs_error: err,
            });
        }
    } else {
        // report element-wise against the expanded expected multiset
        let flat: Vec<DoubleDouble> = expected
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.eigenvalue, e.multiplicity))
            .collect();
        for (v, e) in computed.iter().zip(&flat) {
            let err = (*v - *e).abs().to_f64();
            max_abs_error = max_abs_error.max(err);
            rows.push(SpectrumRow {
                eigenvalue: v.to_f64(),
                multiplicity: 1,
                expected: e.to_f64(),
                expected_multiplicity: 1,
                abs_error: err,
            });
        }
        max_abs_error = f64::INFINITY;
    }
    Ok(SpectrumReport {
        p,
        m,
        alpha,
        symmetric: gen.is_symmetric(),
        max_row_sum: gen.max_row_sum(),
        rows,
        multiplicities_match,
        max_abs_error,
    })
}

/// Relative residuals `|A psi - lambda psi| / |psi|` for the real and
/// imaginary parts of the Kozyrev vector `(r, j, n)`. A part that vanishes
/// identically reports `None`.
pub fn kozyrev_residuals<T: Real>(
    gen: &GeneratorMatrix<T>,
    r: i32,
    j: usize,
    n: usize,
) -> Result<[Option<f64>; 2], VladimirovError> {
    let lattice = gen.lattice();
    let psi = lattice.kozyrev_vector(r, j, n)?;
    let k = (-r) as u32;
    let spectrum = expected_spectrum_in::<T>(lattice.p(), lattice.depth(), gen.alpha())?;
    let lambda = spectrum[k as usize + 1].eigenvalue;
    let part = |take: fn(&num_complex::Complex64) -> f64| -> Result<Option<f64>, VladimirovError> {
        let v: Vec<T> = psi.iter().map(|c| T::from_f64(take(c))).collect();
        let norm = v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
        if norm.to_f64() < 1e-12 {
            return Ok(None);
        }
        let av = gen.apply_dense(&v)?;
        let res = av
            .iter()
            .zip(&v)
            .fold(T::zero(), |acc, (&a, &x)| {
                let d = a - lambda * x;
                acc + d * d
            })
            .sqrt();
        Ok(Some((res / norm).to_f64()))
    };
    Ok([part(|c| c.re)?, part(|c| c.im)?])
}
