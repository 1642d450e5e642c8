//! The physical model: two harmonic oscillators coupled by an
//! excitation-conserving (rotating-wave) interaction,
//!
//! ```text
//! H = Ω a†a + ω b†b + i g (a†b − a b†),
//! ```
//!
//! plus the initial states used by the protocol (thermal, coherent, number).
//! Units have ħ = k_B = 1 throughout; Ω is kept free rather than pinned to 1.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation_op, joint_dim_cap, number_op, DensityMatrix, Ket, Operator, TOL_NORMALIZATION,
};

/// Model parameters for the coupled-oscillator system.
///
/// `omega_a` (Ω) and `omega_b` (ω) are the mode frequencies, `g` the coupling,
/// `tau` the interval between measurements, `temperature` the bath temperature
/// of mode b's initial thermal state, and `dim_a`/`dim_b` the Fock-space
/// truncation of each mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub g: f64,
    pub tau: f64,
    pub temperature: f64,
    pub dim_a: usize,
    pub dim_b: usize,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("g", self.g),
            ("tau", self.tau),
            ("temperature", self.temperature),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        if self.dim_a < 2 {
            return Err(Error::InvalidDimension { got: self.dim_a, min: 2 });
        }
        if self.dim_b < 2 {
            return Err(Error::InvalidDimension { got: self.dim_b, min: 2 });
        }
        if self.tau < 0.0 {
            return Err(Error::InvalidParams(format!("tau must be >= 0, got {}", self.tau)));
        }
        if self.temperature < 0.0 {
            return Err(Error::InvalidTemperature(self.temperature));
        }
        Ok(())
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    /// Copy with both truncation dimensions enlarged by `growth`.
    pub fn grown(self, growth: usize) -> Self {
        Self {
            dim_a: self.dim_a + growth,
            dim_b: self.dim_b + growth,
            ..self
        }
    }
}

/// The pure state of mode a that each measurement projects onto.
#[derive(Clone, Debug, PartialEq)]
pub enum ProjectionSpec {
    /// Number state `|n_a⟩`.
    NumberState(usize),
    /// Coherent state `|α⟩`.
    CoherentState(Complex64),
    /// Arbitrary normalized state vector.
    Custom(Ket),
}

impl ProjectionSpec {
    /// Realize the projection state on a `dim_a`-dimensional truncation.
    ///
    /// A `Custom` ket must already be normalized; it is zero-padded when
    /// `dim_a` exceeds its own dimension (used when checking truncation
    /// convergence on enlarged spaces).
    pub fn realize(&self, dim_a: usize) -> Result<Ket> {
        match self {
            Self::NumberState(n) => number_state(*n, dim_a),
            Self::CoherentState(alpha) => coherent_state(*alpha, dim_a),
            Self::Custom(phi) => {
                if !phi.is_normalized() {
                    return Err(Error::InvalidParams(format!(
                        "custom projection state has norm {}",
                        phi.norm()
                    )));
                }
                phi.zero_padded(dim_a)
            }
        }
    }
}

/// Frequency scale `δ = √(g² + (Ω−ω)²/4)` of the coupled dynamics.
///
/// Vanishes only for zero coupling at exact resonance, where the propagator
/// factorization coefficients become 0/0; that case is rejected.
pub fn delta(p: &ModelParams) -> Result<f64> {
    let d = (p.g * p.g + (p.omega_a - p.omega_b).powi(2) / 4.0).sqrt();
    if d == 0.0 {
        return Err(Error::DegenerateDelta);
    }
    Ok(d)
}

/// Joint-space Hamiltonian `Ω a†a + ω b†b + i g (a†b − a b†)` with mode a on
/// the slow index. Hermitian by construction.
pub fn build_hamiltonian(p: &ModelParams) -> Result<Operator> {
    p.validate()?;
    let joint = p.dim_a.checked_mul(p.dim_b).unwrap_or(usize::MAX);
    let cap = joint_dim_cap();
    if joint > cap {
        return Err(Error::DimensionCapExceeded { requested: joint, cap });
    }

    let mut mat = DMatrix::<Complex64>::zeros(joint, joint);
    let idx = |na: usize, nb: usize| na * p.dim_b + nb;
    for na in 0..p.dim_a {
        for nb in 0..p.dim_b {
            mat[(idx(na, nb), idx(na, nb))] =
                Complex64::new(p.omega_a * na as f64 + p.omega_b * nb as f64, 0.0);
        }
    }
    // i g (a†⊗b − a⊗b†): couples |n_a, n_b⟩ ↔ |n_a+1, n_b−1⟩.
    for na in 0..p.dim_a.saturating_sub(1) {
        for nb in 1..p.dim_b {
            let amp = p.g * ((na + 1) as f64).sqrt() * (nb as f64).sqrt();
            mat[(idx(na + 1, nb - 1), idx(na, nb))] = Complex64::new(0.0, amp);
            mat[(idx(na, nb), idx(na + 1, nb - 1))] = Complex64::new(0.0, -amp);
        }
    }
    Operator::new(mat)
}

/// Thermal (Gibbs) state of a mode: populations proportional to
/// `e^{−ω n / T}`, renormalized to unit trace on the truncated space.
/// `temperature = 0` gives the ground state exactly.
pub fn thermal_state(omega: f64, temperature: f64, dim: usize) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension { got: dim, min: 2 });
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidFrequency(omega));
    }
    if temperature < 0.0 || !temperature.is_finite() {
        return Err(Error::InvalidTemperature(temperature));
    }

    let mut pops = DVector::<f64>::zeros(dim);
    if temperature == 0.0 {
        pops[0] = 1.0;
    } else {
        let ratio = (-omega / temperature).exp();
        let mut w = 1.0;
        for n in 0..dim {
            pops[n] = w;
            w *= ratio;
        }
        let z: f64 = pops.sum();
        pops /= z;
    }
    let diag = pops.map(|x| Complex64::new(x, 0.0));
    DensityMatrix::new(Operator::from_diagonal(&diag))
}

/// Coherent state `|α⟩` with amplitudes `e^{−|α|²/2} αⁿ/√(n!)`, renormalized
/// on the truncated space.
///
/// Requires the truncation-adequacy condition `|α|² + 5|α| + 10 ≤ dim`, which
/// keeps the neglected Poisson weight below 1e-10 for |α| ≤ 2.
pub fn coherent_state(alpha: Complex64, dim: usize) -> Result<Ket> {
    if dim < 2 {
        return Err(Error::InvalidDimension { got: dim, min: 2 });
    }
    let a = alpha.norm();
    if a * a + 5.0 * a + 10.0 > dim as f64 {
        return Err(Error::TruncationInadequate { alpha_abs: a, dim });
    }
    let mut amp = DVector::<Complex64>::zeros(dim);
    let mut term = Complex64::new((-a * a / 2.0).exp(), 0.0);
    amp[0] = term;
    for n in 1..dim {
        term *= alpha / Complex64::new((n as f64).sqrt(), 0.0);
        amp[n] = term;
    }
    Ket::new(amp)?.normalized()
}

/// Number state `|n⟩`.
pub fn number_state(n: usize, dim: usize) -> Result<Ket> {
    if dim < 2 {
        return Err(Error::InvalidDimension { got: dim, min: 2 });
    }
    Ket::basis(n, dim)
}

/// Mean occupation `⟨b†b⟩` of a state vector.
pub fn mean_occupation(psi: &Ket) -> Result<f64> {
    let n_op = number_op(psi.dim())?;
    let npsi = n_op.apply(psi)?;
    Ok(psi.inner(&npsi)?.re / psi.amp().norm_squared())
}
