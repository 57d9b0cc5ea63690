//! Numerical laboratory for noncoercive quasilinear elliptic problems
//!
//! The crate models Dirichlet problems `-div A(x, u, ∇u) = Φ` whose vector
//! field carries a singular lower-order coefficient `b ∈ L^{N,∞}`, together
//! with the associated obstacle problem. It provides
//!
//! * Lorentz-space analytics on sampled fields ([`lorentz`]),
//! * structural vector fields and their truncations ([`structural`]),
//! * P1 finite elements on radial and planar meshes ([`mesh`], [`discretization`]),
//! * frozen-coefficient Newton solves, resolvent fixed-point iteration and the
//!   truncation scheme ([`solver`]),
//! * projected solves of the discrete variational inequalities ([`obstacle`]),
//! * executable verification cases with closed-form oracles ([`verification`]).

pub mod config;
pub mod discretization;
pub mod error;
pub mod linalg;
pub mod lorentz;
pub mod mesh;
pub mod obstacle;
pub mod profile;
pub mod quadrature;
pub mod solver;
pub mod structural;
pub mod verification;

pub mod cli;

pub use discretization::{DiscreteFunction, RhsFunctional};
pub use error::{Error, Result};
pub use lorentz::{LorentzIndex, SampledScalarField, SobolevConstant};
pub use mesh::Mesh;
pub use obstacle::Obstacle;
pub use solver::{SolveConfig, SolveReport};
pub use structural::{ModelData, QuasilinearField, StructuralEnvelope};

/// Lebesgue measure of the unit ball of `R^n`.
pub fn unit_ball_measure(n: usize) -> f64 {
    // ω_n = 2π/n · ω_{n-2}
    let (mut w, mut k) = if n % 2 == 0 {
        (1.0, 0usize)
    } else {
        (2.0, 1usize)
    };
    while k < n {
        k += 2;
        w *= 2.0 * std::f64::consts::PI / k as f64;
    }
    w
}

/// Sobolev conjugate `Np/(N-p)`.
pub fn sobolev_exponent(n: usize, p: f64) -> f64 {
    let n = n as f64;
    n * p / (n - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_ball_measures() {
        assert!((unit_ball_measure(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_measure(2) - PI).abs() < 1e-15);
        assert!((unit_ball_measure(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_measure(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn sobolev_conjugate() {
        assert!((sobolev_exponent(3, 2.0) - 6.0).abs() < 1e-15);
        assert!((sobolev_exponent(3, 2.5) - 15.0).abs() < 1e-12);
    }
}
