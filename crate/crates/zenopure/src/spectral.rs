//! Biorthogonal eigendecomposition of the non-hermitian step operator.
//!
//! `V` generally has distinct right and left eigenvectors,
//! `V|u_n) = λ_n|u_n)` and `(v_n|V = λ_n(v_n|`, forming a complete
//! biorthonormal pair: `(v_n|u_m) = δ_nm` and `Σ_n |u_n)(v_n| = 1`. Powers of
//! `V` then reduce to powers of the eigenvalues, and for a unique dominant
//! eigenvalue the large-power limit is the rank-1 projector
//! `λ_max^N |u_max)(v_max|` — the mechanism that purifies mode b.
//!
//! Right eigenvectors come from a complex Schur decomposition with
//! back-substitution; left eigenvectors come from inverting the
//! right-eigenvector matrix, which pins `(v_n|u_n) = 1` up to inversion
//! error instead of leaving two independently scaled eigensolves to be
//! matched up.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{Ket, Operator};

/// Default relative tolerance for flagging a degenerate dominant eigenvalue.
pub const DEFAULT_TOL_DEGENERACY: f64 = 1e-6;
/// Right-eigenvector matrices with condition numbers beyond this are
/// reported as numerically defective (completeness fails in floating point).
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e12;
/// Residual bound used by the test suites for biorthonormality,
/// completeness, and reconstruction.
pub const TOL_BIORTHONORMALITY: f64 = 1e-8;

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues with paired right/left eigenvectors, sorted by descending
/// eigenvalue magnitude (ties: descending real part, then imaginary part).
///
/// Right eigenvectors have unit 2-norm with their largest-magnitude
/// component rotated to the positive real axis, making repeated
/// decompositions of the same matrix bit-identical. Left eigenvectors are
/// stored as kets and applied conjugated: `(v_n|x = v_n† x`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<Complex64>,
    right: Vec<Ket>,
    left: Vec<Ket>,
    dim: usize,
    condition: f64,
    tol_deg: f64,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn right(&self) -> &[Ket] {
        &self.right
    }

    pub fn left(&self) -> &[Ket] {
        &self.left
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Condition number of the right-eigenvector matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Degeneracy tolerance the decomposition was created with.
    pub fn tol_deg(&self) -> f64 {
        self.tol_deg
    }

    /// Diagnostics at the stored degeneracy tolerance.
    pub fn diagnostics(&self) -> SpectralDiagnostics {
        dominant(self, self.tol_deg)
    }
}

/// Dominant-eigenvalue summary: `λ_max`, the gap ratio `|λ₂/λ₁|` that sets
/// the purification rate, a degeneracy flag, and the conditioning of the
/// eigenbasis.
#[derive(Clone, Copy, Debug)]
pub struct SpectralDiagnostics {
    pub lambda_max: Complex64,
    pub gap_ratio: f64,
    pub degenerate: bool,
    pub condition_estimate: f64,
}

/// Decompose a dense complex operator into its biorthogonal eigensystem.
///
/// `tol_deg` is recorded on the result as the default degeneracy tolerance
/// for [`SpectralDecomposition::diagnostics`]. Near-defective input (right
/// eigenvector condition number above [`MAX_EIGENVECTOR_CONDITION`]) is an
/// error: the completeness relation has no numerical meaning there.
pub fn decompose(v: &Operator, tol_deg: f64) -> Result<SpectralDecomposition> {
    let dim = v.dim();
    let schur = v
        .mat()
        .clone()
        .try_schur(f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::NearDefective(f64::INFINITY))?;
    let (q, t) = schur.unpack();

    let tnorm = t.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    // Floor for near-singular denominators in the back-substitution;
    // a defective matrix then produces nearly parallel eigenvectors and is
    // caught by the condition check below.
    let smallnum = f64::EPSILON * tnorm.max(f64::MIN_POSITIVE);

    // Right eigenvector of the triangular factor for each diagonal entry,
    // rotated back through Q.
    let mut pairs: Vec<(Complex64, DVector<Complex64>)> = Vec::with_capacity(dim);
    for i in 0..dim {
        let lambda = t[(i, i)];
        let mut y = DVector::<Complex64>::zeros(dim);
        y[i] = Complex64::new(1.0, 0.0);
        for k in (0..i).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in (k + 1)..=i {
                s += t[(k, j)] * y[j];
            }
            let mut den = t[(k, k)] - lambda;
            if den.norm() < smallnum {
                den = Complex64::new(smallnum, 0.0);
            }
            y[k] = -s / den;
        }
        let mut u = &q * y;
        u /= Complex64::new(u.norm(), 0.0);
        // Deterministic phase: largest-magnitude component real positive.
        let mut pivot = 0;
        for j in 1..dim {
            if u[j].norm() > u[pivot].norm() {
                pivot = j;
            }
        }
        let piv = u[pivot];
        u *= piv.conj() / Complex64::new(piv.norm(), 0.0);
        pairs.push((lambda, u));
    }

    pairs.sort_by(|(a, _), (b, _)| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });

    let mut u_mat = DMatrix::<Complex64>::zeros(dim, dim);
    for (k, (_, u)) in pairs.iter().enumerate() {
        u_mat.set_column(k, u);
    }

    let sv = u_mat.clone().singular_values();
    let smax = sv.iter().fold(0.0f64, |acc, &s| acc.max(s));
    let smin = sv.iter().fold(f64::INFINITY, |acc, &s| acc.min(s));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_EIGENVECTOR_CONDITION {
        return Err(Error::NearDefective(condition));
    }
    let u_inv = u_mat
        .clone()
        .try_inverse()
        .ok_or(Error::NearDefective(condition))?;

    let eigenvalues: Vec<Complex64> = pairs.iter().map(|(l, _)| *l).collect();
    let right: Vec<Ket> = pairs
        .into_iter()
        .map(|(_, u)| Ket::new(u).expect("finite eigenvector"))
        .collect();
    // Row n of U⁻¹ is the functional (v_n|; conjugate to store it as a ket.
    let left: Vec<Ket> = (0..dim)
        .map(|n| {
            let amp = DVector::from_fn(dim, |j, _| u_inv[(n, j)].conj());
            Ket::new(amp).expect("finite left eigenvector")
        })
        .collect();

    Ok(SpectralDecomposition { eigenvalues, right, left, dim, condition, tol_deg })
}

/// Extract the dominant-eigenvalue diagnostics from a decomposition.
///
/// Degeneracy (`|λ₁| − |λ₂| < tol_deg·|λ₁|`) is a reported flag, not an
/// error: the protocol still iterates numerically, only the asymptotic
/// prediction refuses.
pub fn dominant(d: &SpectralDecomposition, tol_deg: f64) -> SpectralDiagnostics {
    let lambda_max = d.eigenvalues[0];
    let l1 = lambda_max.norm();
    let (gap_ratio, degenerate) = if d.dim < 2 || l1 == 0.0 {
        (0.0, false)
    } else {
        let l2 = d.eigenvalues[1].norm();
        (l2 / l1, l1 - l2 < tol_deg * l1)
    };
    SpectralDiagnostics {
        lambda_max,
        gap_ratio,
        degenerate,
        condition_estimate: d.condition.max(1.0),
    }
}

/// Spectral power `V^n = Σ_k λ_k^n |u_k)(v_k|` assembled from the
/// decomposition without multiplying matrices together.
pub fn spectral_power(d: &SpectralDecomposition, n: usize) -> Operator {
    let dim = d.dim;
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..dim {
        let scale = pow_complex(d.eigenvalues[k], n);
        if scale.re == 0.0 && scale.im == 0.0 {
            continue;
        }
        let u = d.right[k].amp();
        let v = d.left[k].amp();
        for r in 0..dim {
            let w = scale * u[r];
            for c in 0..dim {
                out[(r, c)] += w * v[c].conj();
            }
        }
    }
    Operator::new(out).expect("finite spectral power")
}

fn pow_complex(z: Complex64, n: usize) -> Complex64 {
    // Exponentiation by squaring; exact for n = 0, 1.
    let mut result = Complex64::new(1.0, 0.0);
    let mut base = z;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result *= base;
        }
        base *= base;
        e >>= 1;
    }
    result
}
