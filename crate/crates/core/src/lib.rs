//! p-adic reaction-diffusion model of branching coral growth.
//!
//! Branches are balls of the truncated p-adic tree; carbonate and calcium
//! diffuse between them through the discretized Vladimirov generator while a
//! three-species kinetics precipitates calcium carbonate. A branch splits into
//! `p` daughters when its calcium and carbonate concentrations cross, provided
//! the saturation index is still at least one.

pub mod growth;
pub mod integrator;
pub mod io;
pub mod kinetics;
pub mod padic;
pub mod scalar;
pub mod vladimirov;
