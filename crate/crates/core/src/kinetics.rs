//! Dimensionless calcification kinetics.
//!
//! With `z = v - u + beta` the reaction terms are
//!
//! ```text
//! f(u, v) = -u (u - v + sigma - beta)
//! g(u, v) = -eta v z^2
//! h(u, v) = +eta v z^2
//! ```
//!
//! for carbonate `u`, calcium `v` and calcium carbonate `w`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error("{field} must be {requirement}, got {value}")]
    Invalid {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
}

fn require(ok: bool, field: &'static str, requirement: &'static str, value: f64) -> Result<(), KineticsError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(KineticsError::Invalid {
            field,
            requirement,
            value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    /// calcium to carbonate diffusivity ratio
    pub d: f64,
    pub eta: f64,
    /// initial ion imbalance, negative in the physical regime
    pub beta: f64,
    /// initial CO2 level
    pub sigma: f64,
    /// saturation constant used by the saturation index
    pub kappa_sp: f64,
}

impl Default for KineticParams {
    fn default() -> Self {
        Self {
            d: 0.1,
            eta: 1.0,
            beta: -0.2,
            sigma: 1.0,
            kappa_sp: 1.0,
        }
    }
}

impl KineticParams {
    /// Checks the physical-regime invariants. `allow_nonnegative_beta`
    /// lifts only the sign requirement on `beta`.
    pub fn validate(&self, allow_nonnegative_beta: bool) -> Result<(), KineticsError> {
        require(self.d > 0.0, "d", "positive", self.d)?;
        require(self.eta > 0.0, "eta", "positive", self.eta)?;
        require(self.sigma > 0.0, "sigma", "positive", self.sigma)?;
        require(self.kappa_sp > 0.0, "kappa_sp", "positive", self.kappa_sp)?;
        require(allow_nonnegative_beta || self.beta < 0.0, "beta", "negative", self.beta)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// rate constant of the first reaction with water absorbed
    pub k1_prime: f64,
    pub k2: f64,
    pub d1: f64,
    pub d2: f64,
    pub z0: f64,
    pub u0: f64,
    pub v0: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), KineticsError> {
        for (field, value) in [
            ("k1_prime", self.k1_prime),
            ("k2", self.k2),
            ("d1", self.d1),
            ("d2", self.d2),
            ("z0", self.z0),
            ("u0", self.u0),
            ("v0", self.v0),
        ] {
            require(value > 0.0, field, "positive", value)?;
        }
        Ok(())
    }

    /// Initial imbalance `u0 - v0`.
    pub fn imbalance(&self) -> f64 {
        self.u0 - self.v0
    }
}

/// Result of [`nondimensionalize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub params: KineticParams,
    /// physical concentration = dimensionless * concentration_scale
    pub concentration_scale: f64,
    /// physical time = dimensionless * time_scale
    pub time_scale: f64,
}

impl Scaling {
    pub fn to_physical_concentration(&self, x: f64) -> f64 {
        x * self.concentration_scale
    }

    pub fn to_dimensionless_concentration(&self, x: f64) -> f64 {
        x / self.concentration_scale
    }
}

/// Maps physical rates to the four dimensionless groups. `kappa_sp` is
/// carried through unchanged as it has no physical counterpart here.
pub fn nondimensionalize(phys: &PhysicalParams, kappa_sp: f64) -> Result<Scaling, KineticsError> {
    phys.validate()?;
    let ratio = phys.k1_prime / phys.d1;
    let params = KineticParams {
        d: phys.d2 / phys.d1,
        eta: phys.d1 * phys.k2 / (phys.k1_prime * phys.k1_prime),
        beta: phys.imbalance() * ratio,
        sigma: phys.z0 * ratio,
        kappa_sp,
    };
    Ok(Scaling {
        params,
        concentration_scale: phys.d1 / phys.k1_prime,
        time_scale: 1.0 / phys.d1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeciesState {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl SpeciesState {
    pub fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }
}

/// `(f, g, h)` at `(u, v)`; `h = -g` exactly.
pub fn reaction_rates(s: &SpeciesState, kp: &KineticParams) -> (f64, f64, f64) {
    let (u, v) = (s.u, s.v);
    let f = -u * (u - v + kp.sigma - kp.beta);
    let z = v - u + kp.beta;
    let h = kp.eta * v * z * z;
    (f, -h, h)
}

/// Jacobian of `(f, g)` with respect to `(u, v)`.
pub fn jacobian(u: f64, v: f64, kp: &KineticParams) -> [[f64; 2]; 2] {
    let z = v - u + kp.beta;
    let eta = kp.eta;
    [
        [-(u - v + kp.sigma - kp.beta) - u, u],
        [2.0 * eta * v * z, -eta * z * z - 2.0 * eta * v * z],
    ]
}

/// Eigenvalues of a real 2x2 matrix, real parts ascending. Complex pairs
/// are returned as `(re, im)`.
pub fn eigenvalues_2x2(j: [[f64; 2]; 2]) -> [(f64, f64); 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let (a, b) = (tr / 2.0 - s, tr / 2.0 + s);
        [(a, 0.0), (b, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [(tr / 2.0, -s), (tr / 2.0, s)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    AsymptoticallyStable,
    /// One zero eigenvalue; stability follows from a center manifold argument.
    NonHyperbolicStable,
}

impl Stability {
    pub fn label(&self) -> &'static str {
        match self {
            Stability::AsymptoticallyStable => "asymptotically stable",
            Stability::NonHyperbolicStable => "non-hyperbolic (stable)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub u: f64,
    pub v: f64,
    pub eigenvalues: [f64; 2],
    pub stability: Stability,
}

/// The two non-negative equilibria `(0, 0)` and `(0, -beta)` with their
/// closed-form eigenvalues.
pub fn equilibria(kp: &KineticParams) -> Vec<Equilibrium> {
    vec![
        Equilibrium {
            u: 0.0,
            v: 0.0,
            eigenvalues: [-(kp.sigma - kp.beta), -kp.eta * kp.beta * kp.beta],
            stability: Stability::AsymptoticallyStable,
        },
        Equilibrium {
            u: 0.0,
            v: -kp.beta,
            eigenvalues: [-kp.sigma, 0.0],
            stability: Stability::NonHyperbolicStable,
        },
    ]
}

/// `Omega = u v / kappa_sp`.
pub fn saturation_index(u: f64, v: f64, kappa_sp: f64) -> f64 {
    u * v / kappa_sp
}
