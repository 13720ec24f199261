use super::VladimirovError;
use crate::padic::{divergence_level, IndexLattice};
use crate::scalar::{DoubleDouble, Real};

fn check_alpha(alpha: f64) -> Result<(), VladimirovError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(VladimirovError::InvalidAlpha(alpha))
    }
}

fn is_integral(x: f64) -> bool {
    x.fract() == 0.0 && x.abs() < 1e6
}

/// `p^e` for a non-negative exponent, exact when `e` is an integer.
fn pow_p<T: Real>(p: u64, e: f64) -> T {
    if is_integral(e) {
        T::powu(T::from_f64(p as f64), e as u64)
    } else {
        T::powf(T::from_f64(p as f64), T::from_f64(e))
    }
}

/// Normalization `(p^alpha - 1) / (1 - p^(-alpha - 1))`.
pub fn kappa_in<T: Real>(p: u64, alpha: f64) -> Result<T, VladimirovError> {
    check_alpha(alpha)?;
    let pa = pow_p::<T>(p, alpha);
    let pa1 = pow_p::<T>(p, alpha + 1.0);
    // multiply through by p^(alpha+1) to avoid the negative power
    Ok((pa - T::one()) * pa1 / (pa1 - T::one()))
}

pub fn kappa(p: u64, alpha: f64) -> Result<f64, VladimirovError> {
    kappa_in::<DoubleDouble>(p, alpha).map(Real::to_f64)
}

/// Spectral shift `p^alpha (p - 1) / (p^(alpha + 1) - 1)`.
pub fn mu_in<T: Real>(p: u64, alpha: f64) -> Result<T, VladimirovError> {
    check_alpha(alpha)?;
    let pa = pow_p::<T>(p, alpha);
    let pa1 = pow_p::<T>(p, alpha + 1.0);
    Ok(pa * T::from_f64(p as f64 - 1.0) / (pa1 - T::one()))
}

pub fn mu(p: u64, alpha: f64) -> Result<f64, VladimirovError> {
    mu_in::<DoubleDouble>(p, alpha).map(Real::to_f64)
}

/// Off-diagonal weight for each divergence level `k in 0..m`, plus the
/// common diagonal entry. Every row holds `(p - 1) p^(m - k - 1)` entries
/// at level `k`.
pub fn level_weights<T: Real>(lattice: &IndexLattice, alpha: f64) -> Result<(Vec<T>, T), VladimirovError> {
    let p = lattice.p();
    let m = lattice.depth();
    let k0 = kappa_in::<DoubleDouble>(p, alpha)?;
    let scale = k0 / DoubleDouble::powu(DoubleDouble::from(p as f64), m as u64);
    let mut weights = Vec::with_capacity(m as usize);
    let mut total = DoubleDouble::from(0.0);
    for k in 0..m {
        let w = scale * pow_p::<DoubleDouble>(p, k as f64 * (alpha + 1.0));
        let count = (p - 1) as f64 * (p as f64).powi((m - k - 1) as i32);
        weights.push(T::from_dd(w));
        total += T::from_dd(w).to_dd() * count;
    }
    Ok((weights, T::from_dd(-total)))
}

/// Dense generator `A` for `(p, m, alpha)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix<T: Real = f64> {
    lattice: IndexLattice,
    alpha: f64,
    kappa: T,
    mu: T,
    entries: Vec<T>,
}

impl<T: Real> GeneratorMatrix<T> {
    pub fn build(p: u64, m: u32, alpha: f64) -> Result<Self, VladimirovError> {
        let lattice = IndexLattice::new(p, m)?;
        Self::on_lattice(lattice, alpha)
    }

    pub fn on_lattice(lattice: IndexLattice, alpha: f64) -> Result<Self, VladimirovError> {
        let (weights, diag) = level_weights::<T>(&lattice, alpha)?;
        let (p, m, n) = (lattice.p(), lattice.depth(), lattice.size());
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = if i == j {
                    diag
                } else {
                    weights[divergence_level(i, j, p, m) as usize]
                };
            }
        }
        Ok(Self {
            lattice,
            alpha,
            kappa: kappa_in(p, alpha)?,
            mu: mu_in(p, alpha)?,
            entries,
        })
    }

    pub fn lattice(&self) -> &IndexLattice {
        &self.lattice
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn dim(&self) -> usize {
        self.lattice.size()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.dim() + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.dim();
        &self.entries[i * n..(i + 1) * n]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Largest `|sum_j A_ij|`, accumulated in double-double.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.dim())
            .map(|i| {
                let mut acc = DoubleDouble::from(0.0);
                for &a in self.row(i) {
                    acc += a.to_dd();
                }
                acc.to_f64().abs()
            })
            .fold(0.0, f64::max)
    }

    /// Dense matrix-vector product.
    pub fn apply_dense(&self, x: &[T]) -> Result<Vec<T>, VladimirovError> {
        let n = self.dim();
        if x.len() != n {
            return Err(VladimirovError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        Ok((0..n)
            .map(|i| {
                let mut acc = T::zero();
                for (a, xj) in self.row(i).iter().zip(x) {
                    acc += *a * *xj;
                }
                acc
            })
            .collect())
    }
}

pub fn build_generator(p: u64, m: u32, alpha: f64) -> Result<GeneratorMatrix<f64>, VladimirovError> {
    GeneratorMatrix::build(p, m, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kappa_examples() {
        assert_relative_eq!(kappa(2, 2.0).unwrap(), 24.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(kappa(3, 2.0).unwrap(), 108.0 / 13.0, max_relative = 1e-15);
        assert_relative_eq!(kappa(2, 5.0).unwrap(), 1984.0 / 63.0, max_relative = 1e-15);
        assert!(kappa(2, 0.0).is_err());
        assert!(kappa(2, -1.0).is_err());
    }

    #[test]
    fn mu_examples() {
        assert_relative_eq!(mu(2, 2.0).unwrap(), 4.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(mu(2, 5.0).unwrap(), 32.0 / 63.0, max_relative = 1e-15);
        assert_relative_eq!(mu(3, 2.0).unwrap(), 9.0 / 13.0, max_relative = 1e-15);
    }

    #[test]
    fn generator_examples() {
        let a = build_generator(2, 1, 2.0).unwrap();
        let e = 12.0 / 7.0;
        for (got, want) in a.entries().iter().zip([-e, e, e, -e]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        let a0 = build_generator(2, 0, 2.0).unwrap();
        assert_eq!(a0.entries(), &[0.0]);
        let a2 = build_generator(2, 2, 2.0).unwrap();
        assert_relative_eq!(a2.get(0, 2), 48.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(a2.get(0, 1), 6.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(a2.get(0, 0), -60.0 / 7.0, max_relative = 1e-15);
    }

    #[test]
    fn generator_invariants() {
        for (p, m, alpha) in [(2, 4, 2.0), (3, 3, 2.0), (2, 3, 1.5), (5, 2, 0.7)] {
            let a = build_generator(p, m, alpha).unwrap();
            assert!(a.is_symmetric());
            assert!(a.max_row_sum() < 1e-12, "row sum {}", a.max_row_sum());
            let n = a.dim();
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        assert!(a.get(i, j) < 0.0);
                    } else {
                        assert!(a.get(i, j) > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn dense_apply_examples() {
        let a = build_generator(2, 1, 2.0).unwrap();
        let y = a.apply_dense(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(y[0], -12.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(y[1], 12.0 / 7.0, max_relative = 1e-15);
        let y = a.apply_dense(&[1.0, -1.0]).unwrap();
        assert_relative_eq!(y[0], -24.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(y[1], 24.0 / 7.0, max_relative = 1e-15);
        let a3 = build_generator(3, 2, 2.0).unwrap();
        assert!(a3.apply_dense(&[2.5; 9]).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert_eq!(
            a.apply_dense(&[1.0; 3]),
            Err(VladimirovError::DimensionMismatch { expected: 2, got: 3 })
        );
    }

    #[test]
    fn conservation_and_dissipativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (p, m, alpha) in [(2, 5, 2.0), (3, 3, 5.0), (2, 4, 0.5)] {
            let a = build_generator(p, m, alpha).unwrap();
            let n = a.dim();
            for _ in 0..20 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let y = a.apply_dense(&x).unwrap();
                let scale: f64 = y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
                assert!(crate::scalar::accurate_sum(y.iter().copied()).abs() < 1e-12 * scale);
                let quad: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
                assert!(quad <= 1e-12 * scale);
            }
        }
    }
}
