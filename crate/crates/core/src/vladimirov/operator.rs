use super::generator::{level_weights, GeneratorMatrix};
use super::VladimirovError;
use crate::padic::IndexLattice;

/// Above this many compartments `auto` picks the fast path.
pub const FAST_THRESHOLD: usize = 64;

/// Something that can apply the diffusion generator to a vector.
pub trait DiffusionOperator: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// `out = A x`. Both slices must have length [`dim`](Self::dim).
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, VladimirovError> {
        if x.len() != self.dim() {
            return Err(VladimirovError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSpec {
    pub p: u64,
    pub m: u32,
    pub alpha: f64,
}

impl OperatorSpec {
    pub fn lattice(&self) -> Result<IndexLattice, VladimirovError> {
        Ok(IndexLattice::new(self.p, self.m)?)
    }
}

pub struct DenseOperator {
    matrix: GeneratorMatrix<f64>,
}

impl DenseOperator {
    pub fn new(matrix: GeneratorMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &GeneratorMatrix<f64> {
        &self.matrix
    }
}

impl DiffusionOperator for DenseOperator {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.matrix.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Ball-sum evaluation of `A x`.
///
/// With `S_k[b]` the sum of `x` over the ball `b` of radius `p^-k`, the
/// indices at divergence level exactly `k` from `i` contribute
/// `S_k[i mod p^k] - S_{k+1}[i mod p^(k+1)]`, all with the same weight.
#[derive(Debug, Clone)]
pub struct FastOperator {
    p: usize,
    m: u32,
    size: usize,
    weights: Vec<f64>,
    diag: f64,
}

impl FastOperator {
    pub fn new(spec: &OperatorSpec) -> Result<Self, VladimirovError> {
        let lattice = spec.lattice()?;
        let (weights, diag) = level_weights::<f64>(&lattice, spec.alpha)?;
        Ok(Self {
            p: spec.p as usize,
            m: spec.m,
            size: lattice.size(),
            weights,
            diag,
        })
    }
}

impl DiffusionOperator for FastOperator {
    fn name(&self) -> &'static str {
        "fast"
    }

    fn dim(&self) -> usize {
        self.size
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m as usize;
        // sums[k] has p^k entries; sums[m] is x itself
        let mut sums: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut width = 1;
        for _ in 0..m {
            sums.push(vec![0.0; width]);
            width *= self.p;
        }
        sums.push(x.to_vec());
        for k in (0..m).rev() {
            let (lower, upper) = sums.split_at_mut(k + 1);
            let coarse = &mut lower[k];
            let fine = &upper[0];
            let stride = coarse.len();
            for (b, s) in coarse.iter_mut().enumerate() {
                *s = (0..self.p).map(|c| fine[b + c * stride]).sum();
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..m {
                let outer = sums[k][i % sums[k].len()];
                let inner = sums[k + 1][i % sums[k + 1].len()];
                acc += self.weights[k] * (outer - inner);
            }
            *o = acc + self.diag * x[i];
        }
    }
}

/// Fast product `A x` without building the dense matrix.
pub fn apply_fast(p: u64, m: u32, alpha: f64, x: &[f64]) -> Result<Vec<f64>, VladimirovError> {
    FastOperator::new(&OperatorSpec { p, m, alpha })?.apply(x)
}

pub type OperatorFactory = fn(&OperatorSpec) -> Result<Box<dyn DiffusionOperator>, VladimirovError>;

fn make_dense(spec: &OperatorSpec) -> Result<Box<dyn DiffusionOperator>, VladimirovError> {
    let lattice = spec.lattice()?;
    Ok(Box::new(DenseOperator::new(GeneratorMatrix::on_lattice(
        lattice, spec.alpha,
    )?)))
}

fn make_fast(spec: &OperatorSpec) -> Result<Box<dyn DiffusionOperator>, VladimirovError> {
    Ok(Box::new(FastOperator::new(spec)?))
}

fn make_auto(spec: &OperatorSpec) -> Result<Box<dyn DiffusionOperator>, VladimirovError> {
    if spec.lattice()?.size() > FAST_THRESHOLD {
        make_fast(spec)
    } else {
        make_dense(spec)
    }
}

/// Named operator strategies, in registration order.
pub struct OperatorRegistry {
    entries: Vec<(&'static str, OperatorFactory)>,
}

impl Default for OperatorRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register("auto", make_auto);
        reg.register("dense", make_dense);
        reg.register("fast", make_fast);
        reg
    }
}

impl OperatorRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// Registers `factory` under `name`, replacing an existing entry.
    pub fn register(&mut self, name: &'static str, factory: OperatorFactory) {
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = factory,
            None => self.entries.push((name, factory)),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| *n == name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn build(&self, name: &str, spec: &OperatorSpec) -> Result<Box<dyn DiffusionOperator>, VladimirovError> {
        let (_, factory) = self
            .entries
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| VladimirovError::UnknownOperator(name.to_string()))?;
        factory(spec)
    }
}
