//! The effective one-measurement-step operator `V_φ(τ) = ⟨φ|e^{−iHτ}|φ⟩`
//! acting on mode b, computed two independent ways:
//!
//! * numerically, by hermitian eigendecomposition of the joint Hamiltonian
//!   and contraction of both mode-a indices with the projection state;
//! * analytically, from the normal-ordered factorization of the propagator
//!   `e^{−iHτ} = e^{A a†b} e^{B a†a} e^{C b†b} e^{−A a b†}`, which yields
//!   closed forms for number-state and coherent-state projections.
//!
//! `V` is a compression of a unitary and therefore a contraction: every
//! singular value (and hence every eigenvalue magnitude) is at most 1.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{annihilation_op, creation_op, HermitianEigen, Operator};
use crate::model::{build_hamiltonian, delta, ModelParams, ProjectionSpec};

/// Bracket `cos δτ + i[(Ω−ω)/2δ] sin δτ` below this modulus means the
/// factorization is singular (resonance with δτ = π/2 + kπ).
pub const TOL_FACTORIZATION_BRACKET: f64 = 1e-12;
/// `|1 − e^{−C}|` below this makes the coherent fixed point undefined.
pub const TOL_FIXED_POINT_DENOM: f64 = 1e-10;
/// Slack allowed on the contraction bound of `V` (rounding headroom).
pub const TOL_CONTRACTION_EXCESS: f64 = 1e-9;

/// Coefficients (A, B, C) of the normal-ordered propagator factorization.
///
/// They satisfy `B + C = −i(Ω+ω)τ` and `|e^C| ≤ 1`; `A` is real on
/// resonance. The logarithm uses the principal branch; the bracket stays
/// inside the unit disk and reaches a branch cut only at the singular
/// points that are rejected outright.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbcCoefficients {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

/// How an [`EffectiveOperator`] was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Numeric,
    AnalyticNumber,
    AnalyticCoherent,
}

/// `V_φ(τ)` on mode b's truncated space, together with the parameters and
/// projection that produced it. Construction enforces the contraction bound
/// (2-norm ≤ 1 + [`TOL_CONTRACTION_EXCESS`]).
#[derive(Clone, Debug)]
pub struct EffectiveOperator {
    v: Operator,
    provenance: Provenance,
    params: ModelParams,
    projection: ProjectionSpec,
}

impl EffectiveOperator {
    fn checked(
        v: Operator,
        provenance: Provenance,
        params: ModelParams,
        projection: ProjectionSpec,
    ) -> Result<Self> {
        let norm = v.two_norm();
        if norm > 1.0 + TOL_CONTRACTION_EXCESS {
            return Err(Error::ContractionViolated(norm));
        }
        Ok(Self { v, provenance, params, projection })
    }

    pub fn op(&self) -> &Operator {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn projection(&self) -> &ProjectionSpec {
        &self.projection
    }
}

/// Factorization coefficients at the given parameters:
///
/// ```text
/// A = (g/δ) sin δτ / q,   B = −i(Ω+ω)τ/2 − ln q,   C = −i(Ω+ω)τ/2 + ln q,
/// q = cos δτ + i[(Ω−ω)/2δ] sin δτ.
/// ```
pub fn abc_coefficients(p: &ModelParams) -> Result<AbcCoefficients> {
    p.validate()?;
    let d = delta(p)?;
    let dt = d * p.tau;
    let half_detuning = (p.omega_a - p.omega_b) / (2.0 * d);
    let bracket = Complex64::new(dt.cos(), half_detuning * dt.sin());
    if bracket.norm() < TOL_FACTORIZATION_BRACKET {
        return Err(Error::FactorizationSingular(bracket.norm()));
    }
    let a = Complex64::new((p.g / d) * dt.sin(), 0.0) / bracket;
    let log_bracket = bracket.ln();
    let half_phase = Complex64::new(0.0, -0.5 * (p.omega_a + p.omega_b) * p.tau);
    Ok(AbcCoefficients {
        a,
        b: half_phase - log_bracket,
        c: half_phase + log_bracket,
    })
}

/// `V_φ(τ)` computed without the factorization: diagonalize the joint
/// Hamiltonian (blockwise over its exact invariant sectors), apply the
/// spectral form of `e^{−iHτ}`, and contract both mode-a indices with `|φ⟩`.
pub fn v_numeric(p: &ModelParams, proj: &ProjectionSpec) -> Result<EffectiveOperator> {
    let phi = proj.realize(p.dim_a)?;
    let h = build_hamiltonian(p)?;
    let eig = HermitianEigen::new(&h)?;

    // V[r, c] = Σ_k e^{−iλ_k τ} conj(g_k[r]) g_k[c],
    // g_k[n_b] = ⟨u_k | φ ⊗ n_b⟩; each eigenvector lives on one sector.
    let dim_b = p.dim_b;
    let mut v = DMatrix::<Complex64>::zeros(dim_b, dim_b);
    let mut g = DVector::<Complex64>::zeros(dim_b);
    for block in eig.blocks() {
        for k in 0..block.eigenvalues.len() {
            g.fill(Complex64::new(0.0, 0.0));
            for (local, &joint) in block.indices.iter().enumerate() {
                let na = joint / dim_b;
                let nb = joint % dim_b;
                g[nb] += block.vectors[(local, k)].conj() * phi.amp()[na];
            }
            let phase = Complex64::new(0.0, -block.eigenvalues[k] * p.tau).exp();
            for r in 0..dim_b {
                let w = g[r].conj() * phase;
                if w.re == 0.0 && w.im == 0.0 {
                    continue;
                }
                for c in 0..dim_b {
                    v[(r, c)] += w * g[c];
                }
            }
        }
    }
    EffectiveOperator::checked(Operator::new(v)?, Provenance::Numeric, *p, proj.clone())
}

/// Closed form of `V` for a number-state projection `|n_a⟩`:
///
/// ```text
/// V = Σ_{k=0}^{n_a} n_a!/([(n_a−k)!]² k!) e^{kB} (−A²e^C)^{n_a−k}
///       e^{C b†b} Π_{ℓ=1}^{n_a−k} (b†b + ℓ),
/// ```
///
/// diagonal in the number basis. The factorial-laden coefficients are built
/// by iterating the ratio between consecutive `k` terms, starting from the
/// simple `k = n_a` term, so no factorial is ever evaluated directly.
pub fn v_number_analytic(p: &ModelParams, n_a: usize, dim_b: usize) -> Result<EffectiveOperator> {
    if dim_b < 2 {
        return Err(Error::InvalidDimension { got: dim_b, min: 2 });
    }
    let abc = abc_coefficients(p)?;
    let e_neg_b = (-abc.b).exp();
    let e_c = abc.c.exp();
    let fold = -abc.a * abc.a * e_c;

    let mut diag = DVector::<Complex64>::zeros(dim_b);
    for n in 0..dim_b {
        // k = n_a term: coefficient 1, operator part e^{C n}.
        let mut term = (abc.b * n_a as f64).exp() * (abc.c * n as f64).exp();
        let mut total = term;
        // Downward ratio: T_{k−1}/T_k = k/(n_a−k+1)² · e^{−B} (−A²e^C) (n + n_a − k + 1).
        for k in (1..=n_a).rev() {
            let m = (n_a - k + 1) as f64;
            term *= Complex64::new(k as f64 / (m * m), 0.0)
                * e_neg_b
                * fold
                * Complex64::new(n as f64 + m, 0.0);
            total += term;
        }
        diag[n] = total;
    }
    EffectiveOperator::checked(
        Operator::from_diagonal(&diag),
        Provenance::AnalyticNumber,
        *p,
        ProjectionSpec::NumberState(n_a),
    )
}

/// Closed form of `V` for a coherent-state projection `|α⟩`:
///
/// ```text
/// V = e^{−[1 − e^B − A²/(1−e^{−C})] |α|²} · exp(D),
/// D = C [b† + Aα*/(1−e^{−C})] [b − Aα/(1−e^{−C})],
/// ```
///
/// with `exp(D)` evaluated as a dense matrix exponential (`D` is not normal
/// in general).
pub fn v_coherent_analytic(
    p: &ModelParams,
    alpha: Complex64,
    dim_b: usize,
) -> Result<EffectiveOperator> {
    let abc = abc_coefficients(p)?;
    let denom = Complex64::new(1.0, 0.0) - (-abc.c).exp();
    if denom.norm() < TOL_FIXED_POINT_DENOM {
        return Err(Error::FixedPointSingular(denom.norm()));
    }
    let shift_left = abc.a * alpha.conj() / denom;
    let shift_right = abc.a * alpha / denom;

    let b = annihilation_op(dim_b)?;
    let bd = creation_op(dim_b)?;
    let id = Operator::identity(dim_b);
    let d_op = (&(&bd + &id.scaled(shift_left)) * &(&b - &id.scaled(shift_right))).scaled(abc.c);

    let exponent = Complex64::new(1.0, 0.0) - abc.b.exp() - abc.a * abc.a / denom;
    let prefactor = (-exponent * alpha.norm_sqr()).exp();
    let v = d_op.expm().scaled(prefactor);
    EffectiveOperator::checked(
        v,
        Provenance::AnalyticCoherent,
        *p,
        ProjectionSpec::CoherentState(alpha),
    )
}

/// Fixed point `β = Aα/(1−e^{−C})` of the coherent-projection dynamics: the
/// coherent amplitude mode b is driven toward.
pub fn beta_fixed_point(p: &ModelParams, alpha: Complex64) -> Result<Complex64> {
    let abc = abc_coefficients(p)?;
    let denom = Complex64::new(1.0, 0.0) - (-abc.c).exp();
    if denom.norm() < TOL_FIXED_POINT_DENOM {
        return Err(Error::FixedPointSingular(denom.norm()));
    }
    Ok(abc.a * alpha / denom)
}

/// Truncation-convergence probe: recompute `v_numeric` with both dimensions
/// enlarged by `growth` and return the largest entrywise difference on the
/// common interior block (top-left quarter of the smaller operator).
pub fn verify_truncation(p: &ModelParams, proj: &ProjectionSpec, growth: usize) -> Result<f64> {
    let base = v_numeric(p, proj)?;
    let grown = v_numeric(&p.grown(growth), proj)?;
    Ok(base.op().interior_diff(grown.op(), p.dim_b / 2))
}
