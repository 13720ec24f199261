//! Integer p-adic arithmetic on the truncated tree `G_m = {0, .., p^m - 1}`.
//!
//! An index `i = i_0 + i_1 p + .. + i_{m-1} p^{m-1}` addresses one ball of
//! radius `p^-m`. Two indices share the ball of radius `p^-k` exactly when
//! their first `k` digits agree, which is what gives the lattice its tree
//! structure.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use thiserror::Error;

/// Default bound on the number of compartments `p^m`.
pub const DEFAULT_SIZE_CAP: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PadicError {
    #[error("p = {0} is not a prime")]
    NotPrime(u64),
    #[error("lattice size {p}^{m} exceeds the cap of {cap} compartments")]
    SizeCap { p: u64, m: u32, cap: usize },
    #[error("index {value} is outside the lattice of size {size}")]
    IndexOutOfRange { value: usize, size: usize },
    #[error("ball level {k} is outside 0..={m}")]
    LevelOutOfRange { k: u32, m: u32 },
    #[error("wavelet scale r = {r} is not resolvable at depth m = {m} (need r <= 0 and 1 - r <= m)")]
    UnresolvableScale { r: i32, m: u32 },
    #[error("wavelet parameter {what} = {value} is out of range")]
    WaveletParameter { what: &'static str, value: usize },
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// p-adic order of an integer; `Infinite` is the order of zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(u32),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<u32> {
        match self {
            Valuation::Finite(k) => Some(k),
            Valuation::Infinite => None,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(k) => write!(f, "{k}"),
            Valuation::Infinite => f.write_str("inf"),
        }
    }
}

/// Largest `k` with `p^k | n`.
pub fn valuation(n: i64, p: u64) -> Valuation {
    if n == 0 {
        return Valuation::Infinite;
    }
    let mut n = n.unsigned_abs();
    let mut k = 0;
    while n.is_multiple_of(p) {
        n /= p;
        k += 1;
    }
    Valuation::Finite(k)
}

/// Exact value `p^-exponent` (or zero) of a p-adic absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UltrametricNorm {
    pub p: u64,
    /// `None` encodes the norm of zero.
    pub exponent: Option<u32>,
}

impl UltrametricNorm {
    pub fn is_zero(&self) -> bool {
        self.exponent.is_none()
    }

    /// `(numerator, denominator)`; zero is `(0, 1)`.
    pub fn as_ratio(&self) -> (u64, u64) {
        match self.exponent {
            Some(k) => (1, self.p.pow(k)),
            None => (0, 1),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self.exponent {
            Some(k) => (self.p as f64).powi(-(k as i32)),
            None => 0.0,
        }
    }
}

impl PartialOrd for UltrametricNorm {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        if self.p != other.p {
            return None;
        }
        // larger exponent means smaller norm; zero is the smallest
        let key = |e: Option<u32>| e.map_or(u64::MAX, u64::from);
        Some(key(other.exponent).cmp(&key(self.exponent)))
    }
}

/// The index set `G_m` for a prime `p` and depth `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexLattice {
    p: u64,
    m: u32,
    size: usize,
}

impl IndexLattice {
    pub fn new(p: u64, m: u32) -> Result<Self, PadicError> {
        Self::with_cap(p, m, DEFAULT_SIZE_CAP)
    }

    pub fn with_cap(p: u64, m: u32, cap: usize) -> Result<Self, PadicError> {
        if !is_prime(p) {
            return Err(PadicError::NotPrime(p));
        }
        let size = (p as usize)
            .checked_pow(m)
            .filter(|&s| s <= cap)
            .ok_or(PadicError::SizeCap { p, m, cap })?;
        Ok(Self { p, m, size })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn depth(&self) -> u32 {
        self.m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn index(&self, value: usize) -> Result<BranchIndex, PadicError> {
        if value >= self.size {
            return Err(PadicError::IndexOutOfRange { value, size: self.size });
        }
        Ok(BranchIndex {
            value,
            p: self.p,
            m: self.m,
        })
    }

    pub fn indices(&self) -> impl Iterator<Item = BranchIndex> + '_ {
        (0..self.size).map(move |value| BranchIndex {
            value,
            p: self.p,
            m: self.m,
        })
    }

    /// `p^k` as a usize; callers guarantee `k <= m`.
    pub fn ball_count(&self, k: u32) -> usize {
        (self.p as usize).pow(k)
    }

    /// All members of the ball of radius `p^-k` around `center`.
    pub fn ball_members(&self, center: usize, k: u32) -> Result<Vec<usize>, PadicError> {
        if k > self.m {
            return Err(PadicError::LevelOutOfRange { k, m: self.m });
        }
        if center >= self.size {
            return Err(PadicError::IndexOutOfRange {
                value: center,
                size: self.size,
            });
        }
        let stride = self.ball_count(k);
        Ok((center % stride..self.size).step_by(stride).collect())
    }

    /// Kozyrev wavelet restricted to the level-`m` ball representatives.
    ///
    /// `r <= 0` is the scale, `j in 1..p` the frequency and `n in 0..p^-r`
    /// selects the ball `{x : x = n mod p^-r}` that supports the wavelet.
    /// The `p^{-r/2}` normalization is omitted and the phase is fixed so the
    /// value at `n` is 1; for `p = 2` the entries are exactly `0` or `+-1`.
    pub fn kozyrev_vector(&self, r: i32, j: usize, n: usize) -> Result<Vec<Complex64>, PadicError> {
        if r > 0 || (1 - r) as i64 > self.m as i64 {
            return Err(PadicError::UnresolvableScale { r, m: self.m });
        }
        if j == 0 || j as u64 >= self.p {
            return Err(PadicError::WaveletParameter { what: "j", value: j });
        }
        let k = (-r) as u32;
        let stride = self.ball_count(k);
        if n >= stride {
            return Err(PadicError::WaveletParameter { what: "n", value: n });
        }
        let period = stride * self.p as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); self.size];
        for x in (n..self.size).step_by(stride) {
            // character of j (x - n) / p^{k+1}, which depends on x mod p^{k+1}
            let shifted = (x - n) % period;
            let phase = ((j * shifted) % period) as f64 / period as f64;
            out[x] = if self.p == 2 {
                // keep the p = 2 pattern exactly +-1
                Complex64::new(if phase == 0.0 { 1.0 } else { -1.0 }, 0.0)
            } else {
                Complex64::from_polar(1.0, TAU * phase)
            };
        }
        Ok(out)
    }

    /// Every resolvable `(r, j, n)` triple, coarsest scale first.
    pub fn kozyrev_parameters(&self) -> Vec<(i32, usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.m {
            for j in 1..self.p as usize {
                for n in 0..self.ball_count(k) {
                    out.push((-(k as i32), j, n));
                }
            }
        }
        out
    }
}

/// One element of `G_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BranchIndex {
    value: usize,
    p: u64,
    m: u32,
}

impl BranchIndex {
    pub fn value(&self) -> usize {
        self.value
    }

    /// Base-`p` digits, least significant first, always `m` long.
    pub fn digits(&self) -> Vec<u8> {
        digits_of(self.value, self.p, self.m)
    }

    pub fn from_digits(digits: &[u8], lattice: &IndexLattice) -> Result<Self, PadicError> {
        let value = value_of(digits, lattice.p);
        if digits.len() != lattice.m as usize || digits.iter().any(|&d| d as u64 >= lattice.p) {
            return Err(PadicError::IndexOutOfRange {
                value,
                size: lattice.size,
            });
        }
        lattice.index(value)
    }
}

pub fn digits_of(mut value: usize, p: u64, m: u32) -> Vec<u8> {
    let p = p as usize;
    (0..m)
        .map(|_| {
            let d = value % p;
            value /= p;
            d as u8
        })
        .collect()
}

pub fn value_of(digits: &[u8], p: u64) -> usize {
    digits
        .iter()
        .rev()
        .fold(0usize, |acc, &d| acc * p as usize + d as usize)
}

/// `|i - j|_p`.
pub fn ultrametric_norm(i: usize, j: usize, p: u64) -> UltrametricNorm {
    let diff = i as i64 - j as i64;
    UltrametricNorm {
        p,
        exponent: valuation(diff, p).finite(),
    }
}

/// First digit position where `i` and `j` differ; `m` when they are equal.
pub fn divergence_level(i: usize, j: usize, p: u64, m: u32) -> u32 {
    let p = p as usize;
    let (mut a, mut b) = (i, j);
    for k in 0..m {
        if a % p != b % p {
            return k;
        }
        a /= p;
        b /= p;
    }
    m
}
