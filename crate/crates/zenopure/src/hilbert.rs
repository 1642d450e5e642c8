//! Truncated-Fock-space primitives: state vectors, dense complex operators,
//! ladder operators, tensor products, and the state metrics used by the
//! measurement protocol (fidelity against a pure target, trace distance).
//!
//! All values are immutable after construction and every operation is a pure
//! function, so everything here is safe to share across threads.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance for hermiticity checks on density matrices and Hamiltonians.
pub const TOL_HERMITICITY: f64 = 1e-10;
/// Tolerance on the norm of a "normalized" state vector.
pub const TOL_NORMALIZATION: f64 = 1e-12;
/// Tolerance on the unit trace of a density matrix.
pub const TOL_TRACE: f64 = 1e-10;
/// Density-matrix eigenvalues may dip this far below zero from rounding.
pub const TOL_EIGENVALUE_FLOOR: f64 = -1e-10;
/// Default safety cap on the joint (tensor-product) dimension.
pub const DEFAULT_JOINT_DIM_CAP: usize = 4096;
/// Environment variable overriding [`DEFAULT_JOINT_DIM_CAP`].
pub const JOINT_DIM_CAP_ENV: &str = "ZENOPURE_DIM_CAP";

/// Current joint-dimension cap: `ZENOPURE_DIM_CAP` if set and parseable,
/// otherwise the default of 4096.
pub fn joint_dim_cap() -> usize {
    std::env::var(JOINT_DIM_CAP_ENV)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_JOINT_DIM_CAP)
}

fn check_finite_vec(v: &DVector<Complex64>) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteEntries)
    }
}

fn check_finite_mat(m: &DMatrix<Complex64>) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteEntries)
    }
}

/// A state vector on a truncated Fock space, stored as its amplitudes in the
/// number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amp: DVector<Complex64>,
}

impl Ket {
    /// Wrap an amplitude vector. Entries must be finite and the dimension
    /// must be at least 1.
    pub fn new(amp: DVector<Complex64>) -> Result<Self> {
        if amp.is_empty() {
            return Err(Error::InvalidDimension { got: 0, min: 1 });
        }
        check_finite_vec(&amp)?;
        Ok(Self { amp })
    }

    pub fn from_slice(amp: &[Complex64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amp))
    }

    /// Unit basis vector `|index⟩` on a `dim`-dimensional space.
    pub fn basis(index: usize, dim: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let mut amp = DVector::zeros(dim);
        amp[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amp })
    }

    pub fn dim(&self) -> usize {
        self.amp.len()
    }

    pub fn amp(&self) -> &DVector<Complex64> {
        &self.amp
    }

    pub fn norm(&self) -> f64 {
        self.amp.norm()
    }

    /// `true` if `Σ|amp_n|² = 1` within [`TOL_NORMALIZATION`].
    pub fn is_normalized(&self) -> bool {
        (self.amp.norm_squared() - 1.0).abs() <= TOL_NORMALIZATION
    }

    /// Rescale to unit norm. A (near-)zero vector is degenerate.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::DegenerateVector);
        }
        Ok(Self { amp: &self.amp / Complex64::new(n, 0.0) })
    }

    /// Inner product `⟨self|other⟩` (left argument conjugated).
    pub fn inner(&self, other: &Ket) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(self.amp.dotc(&other.amp))
    }

    /// Outer product `|self⟩⟨other|`.
    pub fn outer(&self, other: &Ket) -> Operator {
        let dim = self.dim();
        let mat = DMatrix::from_fn(dim, other.dim(), |i, j| self.amp[i] * other.amp[j].conj());
        Operator { mat }
    }

    pub fn scaled(&self, z: Complex64) -> Self {
        Self { amp: &self.amp * z }
    }

    /// Embed into a larger space by appending zero amplitudes.
    pub fn zero_padded(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: dim });
        }
        let mut amp = DVector::zeros(dim);
        amp.rows_mut(0, self.dim()).copy_from(&self.amp);
        Ok(Self { amp })
    }
}

impl fmt::Display for Ket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ket(dim={})", self.dim())
    }
}

/// A dense complex matrix acting on a truncated Fock space (or on the joint
/// space of two such modes).
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: DMatrix<Complex64>,
}

impl Operator {
    /// Wrap a square matrix with finite entries.
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { left: mat.nrows(), right: mat.ncols() });
        }
        if mat.nrows() == 0 {
            return Err(Error::InvalidDimension { got: 0, min: 1 });
        }
        check_finite_mat(&mat)?;
        Ok(Self { mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: DMatrix::zeros(dim, dim) }
    }

    pub fn from_diagonal(diag: &DVector<Complex64>) -> Self {
        Self { mat: DMatrix::from_diagonal(diag) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_mat(self) -> DMatrix<Complex64> {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.adjoint() }
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.diagonal().sum()
    }

    pub fn scaled(&self, z: Complex64) -> Self {
        Self { mat: &self.mat * z }
    }

    /// Apply to a state vector.
    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        if self.dim() != ket.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: ket.dim() });
        }
        Ok(Ket { amp: &self.mat * &ket.amp })
    }

    /// Largest entrywise deviation from the adjoint, `max |M - M†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Symmetrized copy `(M + M†)/2`.
    pub fn hermitized(&self) -> Self {
        Self { mat: (&self.mat + self.mat.adjoint()) * Complex64::new(0.5, 0.0) }
    }

    /// Operator 2-norm (largest singular value).
    pub fn two_norm(&self) -> f64 {
        self.mat
            .clone()
            .singular_values()
            .iter()
            .fold(0.0f64, |acc, &s| acc.max(s))
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn one_norm(&self) -> f64 {
        (0..self.dim())
            .map(|j| self.mat.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0f64, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    /// Largest entrywise |difference| restricted to the top-left
    /// `block × block` corner. Truncation corrupts the highest Fock levels
    /// first, so comparisons between differently truncated operators are
    /// made on this interior block.
    pub fn interior_diff(&self, other: &Operator, block: usize) -> f64 {
        let b = block.min(self.dim()).min(other.dim());
        let mut worst = 0.0f64;
        for i in 0..b {
            for j in 0..b {
                worst = worst.max((self.mat[(i, j)] - other.mat[(i, j)]).norm());
            }
        }
        worst
    }

    /// Matrix exponential by Padé order-13 approximation with scaling and
    /// squaring. Works for any (non-normal) complex matrix.
    pub fn expm(&self) -> Self {
        // Padé-13 numerator/denominator coefficients.
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        const THETA_13: f64 = 5.371920351148152;

        let n = self.dim();
        let norm = self.one_norm();
        let s = if norm > THETA_13 {
            (norm / THETA_13).log2().ceil() as u32
        } else {
            0
        };
        let a = &self.mat * Complex64::new(0.5f64.powi(s as i32), 0.0);

        let a2 = &a * &a;
        let a4 = &a2 * &a2;
        let a6 = &a2 * &a4;
        let id = DMatrix::<Complex64>::identity(n, n);

        let c = |k: usize| Complex64::new(B[k], 0.0);
        let u_inner = &a6 * c(13) + &a4 * c(11) + &a2 * c(9);
        let u = &a * (&a6 * u_inner + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + &id * c(1));
        let v_inner = &a6 * c(12) + &a4 * c(10) + &a2 * c(8);
        let v = &a6 * v_inner + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + &id * c(0);

        let mut r = (&v - &u)
            .lu()
            .solve(&(&v + &u))
            .expect("Pade denominator is nonsingular for scaled input");
        for _ in 0..s {
            r = &r * &r;
        }
        Self { mat: r }
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat + &rhs.mat }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat - &rhs.mat }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat * &rhs.mat }
    }
}

/// Annihilation operator on a `dim`-level truncated Fock space:
/// entry `(n-1, n) = √n` for `n = 1..dim-1`.
pub fn annihilation_op(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension { got: dim, min: 2 });
    }
    let mut mat = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        mat[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Ok(Operator { mat })
}

/// Creation operator, the adjoint of [`annihilation_op`].
pub fn creation_op(dim: usize) -> Result<Operator> {
    Ok(annihilation_op(dim)?.adjoint())
}

/// Number operator `a†a = diag(0, 1, .., dim-1)`.
pub fn number_op(dim: usize) -> Result<Operator> {
    if dim < 2 {
        return Err(Error::InvalidDimension { got: dim, min: 2 });
    }
    let diag = DVector::from_fn(dim, |n, _| Complex64::new(n as f64, 0.0));
    Ok(Operator::from_diagonal(&diag))
}

/// Kronecker product with the first factor on the slow index: joint index
/// `i_x * dim(y) + i_y`. Every module uses this convention.
pub fn tensor_product(x: &Operator, y: &Operator) -> Result<Operator> {
    let joint = x.dim().checked_mul(y.dim()).unwrap_or(usize::MAX);
    let cap = joint_dim_cap();
    if joint > cap {
        return Err(Error::DimensionCapExceeded { requested: joint, cap });
    }
    Ok(Operator { mat: x.mat.kronecker(&y.mat) })
}

/// A hermitian, positive-semidefinite, unit-trace [`Operator`]: the state of
/// one mode. Invariants are enforced at construction (hermitian within
/// [`TOL_HERMITICITY`], eigenvalues above [`TOL_EIGENVALUE_FLOOR`], trace 1
/// within [`TOL_TRACE`]).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        let scale = op.max_abs().max(1.0);
        let defect = op.hermiticity_defect();
        if defect > TOL_HERMITICITY * scale {
            return Err(Error::InvalidDensityMatrix(format!(
                "hermiticity defect {defect:.3e}"
            )));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TOL_TRACE || tr.im.abs() > TOL_TRACE {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let eigs = nalgebra::SymmetricEigen::new(op.hermitized().mat).eigenvalues;
        if let Some(bad) = eigs.iter().find(|&&e| e < TOL_EIGENVALUE_FLOOR) {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {bad:.3e}"
            )));
        }
        Ok(Self { op })
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ`; the input is normalized first.
    pub fn pure(psi: &Ket) -> Result<Self> {
        let n = psi.normalized()?;
        Self::new(n.outer(&n))
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn mat(&self) -> &DMatrix<Complex64> {
        self.op.mat()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Diagonal population `⟨n|ρ|n⟩`.
    pub fn population(&self, n: usize) -> f64 {
        self.op.mat()[(n, n)].re
    }

    /// Eigenvalues sorted descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = nalgebra::SymmetricEigen::new(self.op.hermitized().mat)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(|a, b| b.total_cmp(a));
        e
    }
}

/// Fidelity of a state against a pure target: `(u|ρ|u)/(u|u)`, clamped to
/// [0, 1] against rounding on validated inputs.
pub fn fidelity_pure(rho: &DensityMatrix, u: &Ket) -> Result<f64> {
    if rho.dim() != u.dim() {
        return Err(Error::DimensionMismatch { left: rho.dim(), right: u.dim() });
    }
    let uu = u.amp().norm_squared();
    if uu < 1e-300 {
        return Err(Error::DegenerateVector);
    }
    let num = u.amp().dotc(&(rho.mat() * u.amp())).re;
    Ok((num / uu).clamp(0.0, 1.0))
}

/// Trace distance `½ Σ σ_i(r1 - r2)` (half the sum of singular values of the
/// difference).
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch { left: r1.dim(), right: r2.dim() });
    }
    let diff = r1.mat() - r2.mat();
    Ok(0.5 * diff.singular_values().iter().sum::<f64>())
}

/// Eigendecomposition of a hermitian operator, computed blockwise over the
/// connected components of its off-diagonal sparsity pattern.
///
/// Indices `i ~ j` are connected when `M[i,j] ≠ 0`; blocks are exact
/// invariant subspaces of any hermitian matrix, so diagonalizing each block
/// separately reproduces the full eigendecomposition. For the
/// excitation-conserving oscillator Hamiltonian the blocks are the
/// total-number sectors, which turns the joint-space diagonalization from
/// `O(d⁶)` into `O(d⁴)` at truncation `d` per mode. A dense matrix with no
/// zero structure simply yields a single block.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    dim: usize,
    blocks: Vec<EigenBlock>,
}

/// One invariant block: the joint indices it spans, its eigenvalues, and the
/// eigenvector columns in block-local coordinates.
#[derive(Clone, Debug)]
pub struct EigenBlock {
    pub indices: Vec<usize>,
    pub eigenvalues: DVector<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl HermitianEigen {
    pub fn new(op: &Operator) -> Result<Self> {
        let scale = op.max_abs().max(1.0);
        let defect = op.hermiticity_defect();
        if defect > TOL_HERMITICITY * scale {
            return Err(Error::NotHermitian(defect));
        }
        let dim = op.dim();
        let m = op.mat();

        // Connected components by breadth-first search over exact nonzeros,
        // in ascending order of their smallest index.
        let mut component = vec![usize::MAX; dim];
        let mut blocks_idx: Vec<Vec<usize>> = Vec::new();
        let mut queue = Vec::new();
        for start in 0..dim {
            if component[start] != usize::MAX {
                continue;
            }
            let id = blocks_idx.len();
            let mut members = vec![start];
            component[start] = id;
            queue.clear();
            queue.push(start);
            while let Some(i) = queue.pop() {
                for j in 0..dim {
                    if component[j] == usize::MAX && i != j {
                        let z = m[(i, j)];
                        if z.re != 0.0 || z.im != 0.0 {
                            component[j] = id;
                            members.push(j);
                            queue.push(j);
                        }
                    }
                }
            }
            members.sort_unstable();
            blocks_idx.push(members);
        }

        let blocks = blocks_idx
            .into_iter()
            .map(|indices| {
                let k = indices.len();
                let sub = DMatrix::from_fn(k, k, |r, c| m[(indices[r], indices[c])]);
                // Symmetrize before the solver so rounding in the input
                // cannot leak into the eigenbasis.
                let sym = (&sub + sub.adjoint()) * Complex64::new(0.5, 0.0);
                let eig = nalgebra::SymmetricEigen::new(sym);
                EigenBlock {
                    indices,
                    eigenvalues: eig.eigenvalues,
                    vectors: eig.eigenvectors,
                }
            })
            .collect();

        Ok(Self { dim, blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[EigenBlock] {
        &self.blocks
    }

    /// Dense propagator `e^{-iMt}`.
    pub fn evolve(&self, t: f64) -> Operator {
        let mut out = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for block in &self.blocks {
            let phases = block
                .eigenvalues
                .map(|e| (Complex64::new(0.0, -e * t)).exp());
            let w = &block.vectors
                * DMatrix::from_diagonal(&phases)
                * block.vectors.adjoint();
            for (r, &ir) in block.indices.iter().enumerate() {
                for (c, &ic) in block.indices.iter().enumerate() {
                    out[(ir, ic)] = w[(r, c)];
                }
            }
        }
        Operator { mat: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
        // Random PSD with unit trace: G G† / tr.
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let p = &g * g.adjoint();
        let tr = p.diagonal().sum().re;
        DensityMatrix::new(Operator::new(p / c(tr, 0.0)).unwrap()).unwrap()
    }

    #[test]
    fn annihilation_smallest_sizes() {
        let a2 = annihilation_op(2).unwrap();
        assert_eq!(a2.mat()[(0, 1)], c(1.0, 0.0));
        assert_eq!(a2.mat().iter().filter(|z| z.norm() > 0.0).count(), 1);

        let a3 = annihilation_op(3).unwrap();
        assert_eq!(a3.mat()[(0, 1)], c(1.0, 0.0));
        assert_relative_eq!(a3.mat()[(1, 2)].re, 2.0f64.sqrt(), epsilon = 1e-15);
        assert_eq!(a3.mat().iter().filter(|z| z.norm() > 0.0).count(), 2);

        assert!(matches!(
            annihilation_op(1),
            Err(Error::InvalidDimension { got: 1, min: 2 })
        ));
    }

    #[test]
    fn commutator_dim3_matches_multiply_oracle() {
        // a a† − a† a computed by direct matrix multiplication.
        let a = annihilation_op(3).unwrap();
        let ad = creation_op(3).unwrap();
        let comm = &(&a * &ad) - &(&ad * &a);
        let expected = Operator::from_diagonal(&DVector::from_column_slice(&[
            c(1.0, 0.0),
            c(1.0, 0.0),
            c(-2.0, 0.0),
        ]));
        assert_eq!(comm, expected);
    }

    #[test]
    fn truncated_commutator_exact_for_all_dims() {
        // [a, a†] = I except the last diagonal entry, which is -(dim-1).
        for dim in 2..12 {
            let a = annihilation_op(dim).unwrap();
            let ad = creation_op(dim).unwrap();
            let comm = &(&a * &ad) - &(&ad * &a);
            for i in 0..dim {
                for j in 0..dim {
                    let want = if i == j {
                        if i == dim - 1 {
                            c(-((dim - 1) as f64), 0.0)
                        } else {
                            c(1.0, 0.0)
                        }
                    } else {
                        c(0.0, 0.0)
                    };
                    assert_eq!(comm.mat()[(i, j)], want, "dim={dim} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn tensor_identity_and_index_convention() {
        let i2 = Operator::identity(2);
        let t = tensor_product(&i2, &i2).unwrap();
        assert_eq!(t, Operator::identity(4));

        // diag(0,1) ⊗ I₂ = diag(0,0,1,1): first factor on the slow index.
        let d = Operator::from_diagonal(&DVector::from_column_slice(&[c(0.0, 0.0), c(1.0, 0.0)]));
        let t = tensor_product(&d, &i2).unwrap();
        for (i, want) in [0.0, 0.0, 1.0, 1.0].iter().enumerate() {
            assert_eq!(t.mat()[(i, i)].re, *want);
        }

        // Hand Kronecker expansion: lowering ⊗ lowering has one entry (0,3).
        let a = annihilation_op(2).unwrap();
        let t = tensor_product(&a, &a).unwrap();
        assert_eq!(t.mat()[(0, 3)], c(1.0, 0.0));
        assert_eq!(t.mat().iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn tensor_associative_and_cap() {
        let a = annihilation_op(2).unwrap();
        let b = annihilation_op(3).unwrap();
        let d = annihilation_op(4).unwrap();
        let left = tensor_product(&tensor_product(&a, &b).unwrap(), &d).unwrap();
        let right = tensor_product(&a, &tensor_product(&b, &d).unwrap()).unwrap();
        assert_eq!(left, right);
        assert_eq!(left.dim(), 24);

        let big = Operator::identity(80);
        assert!(matches!(
            tensor_product(&big, &big),
            Err(Error::DimensionCapExceeded { requested: 6400, .. })
        ));
    }

    #[test]
    fn fidelity_self_orthogonal_and_thermal_oracle() {
        let u = Ket::basis(1, 4).unwrap();
        let rho = DensityMatrix::pure(&u).unwrap();
        assert_relative_eq!(fidelity_pure(&rho, &u).unwrap(), 1.0, epsilon = 1e-14);

        let zero = Ket::basis(0, 4).unwrap();
        let rho0 = DensityMatrix::pure(&zero).unwrap();
        assert_eq!(fidelity_pure(&rho0, &u).unwrap(), 0.0);

        // Geometric-series oracle for thermal populations at ω = 1, T = 1:
        // ground population (1 − e⁻¹)/(1 − e⁻³²).
        let dim = 32;
        let r = (-1.0f64).exp();
        let geo: f64 = (0..dim).map(|n| r.powi(n as i32)).sum();
        let expected = 1.0 / geo;
        let rho = crate::model::thermal_state(1.0, 1.0, dim).unwrap();
        let f = fidelity_pure(&rho, &Ket::basis(0, dim).unwrap()).unwrap();
        assert_relative_eq!(f, expected, epsilon = 1e-13);
        assert!((f - (1.0 - r)).abs() < 1e-12);
    }

    #[test]
    fn fidelity_zero_vector_is_degenerate() {
        let rho = DensityMatrix::pure(&Ket::basis(0, 3).unwrap()).unwrap();
        let z = Ket::from_slice(&[c(0.0, 0.0); 3]).unwrap();
        assert!(matches!(fidelity_pure(&rho, &z), Err(Error::DegenerateVector)));
    }

    proptest! {
        #[test]
        fn fidelity_invariant_under_rescaling(re in -3.0f64..3.0, im in -3.0f64..3.0) {
            prop_assume!(re.abs() + im.abs() > 1e-3);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let rho = random_density(&mut rng, 5);
            let u = Ket::from_slice(&[
                c(0.3, 0.1), c(-0.2, 0.5), c(0.0, 0.0), c(0.7, -0.1), c(0.1, 0.1),
            ]).unwrap();
            let f1 = fidelity_pure(&rho, &u).unwrap();
            let f2 = fidelity_pure(&rho, &u.scaled(c(re, im))).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-10);
        }
    }

    #[test]
    fn trace_distance_examples() {
        let p0 = DensityMatrix::pure(&Ket::basis(0, 2).unwrap()).unwrap();
        let p1 = DensityMatrix::pure(&Ket::basis(1, 2).unwrap()).unwrap();
        assert_eq!(trace_distance(&p0, &p0).unwrap(), 0.0);
        assert_relative_eq!(trace_distance(&p0, &p1).unwrap(), 1.0, epsilon = 1e-14);

        // ½(|0⟩⟨0|+|1⟩⟨1|) vs |0⟩⟨0|: difference has eigenvalues ±½,
        // so the distance is ½(½+½) = 0.5 by the 2×2 eigenvalue oracle.
        let mixed = DensityMatrix::new(Operator::from_diagonal(&DVector::from_column_slice(&[
            c(0.5, 0.0),
            c(0.5, 0.0),
        ])))
        .unwrap();
        assert_relative_eq!(trace_distance(&p0, &mixed).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn trace_distance_symmetry_and_triangle_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let r1 = random_density(&mut rng, 4);
            let r2 = random_density(&mut rng, 4);
            let r3 = random_density(&mut rng, 4);
            let d12 = trace_distance(&r1, &r2).unwrap();
            let d21 = trace_distance(&r2, &r1).unwrap();
            let d13 = trace_distance(&r1, &r3).unwrap();
            let d32 = trace_distance(&r3, &r2).unwrap();
            assert!((d12 - d21).abs() < 1e-10);
            assert!(d12 <= d13 + d32 + 1e-10);
        }
    }

    #[test]
    fn density_matrix_rejects_bad_inputs() {
        // Not hermitian.
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(0.5, 0.0)]);
        assert!(DensityMatrix::new(Operator::new(m).unwrap()).is_err());
        // Wrong trace.
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&[c(0.9, 0.0), c(0.9, 0.0)]));
        assert!(DensityMatrix::new(Operator::new(m).unwrap()).is_err());
        // Negative eigenvalue.
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&[c(1.5, 0.0), c(-0.5, 0.0)]));
        assert!(DensityMatrix::new(Operator::new(m).unwrap()).is_err());
    }

    #[test]
    fn expm_matches_diagonal_and_nilpotent_closed_forms() {
        let d = Operator::from_diagonal(&DVector::from_column_slice(&[
            c(0.3, -1.2),
            c(-0.7, 0.4),
            c(0.0, 2.0),
        ]));
        let e = d.expm();
        for i in 0..3 {
            let want = d.mat()[(i, i)].exp();
            assert!((e.mat()[(i, i)] - want).norm() < 1e-14);
        }

        // Nilpotent: exp([[0,a],[0,0]]) = I + A.
        let n = Operator::new(DMatrix::from_row_slice(2, 2, &[
            c(0.0, 0.0), c(2.5, -1.0),
            c(0.0, 0.0), c(0.0, 0.0),
        ])).unwrap();
        let e = n.expm();
        assert!((e.mat()[(0, 1)] - c(2.5, -1.0)).norm() < 1e-14);
        assert!((e.mat()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn expm_agrees_with_hermitian_eigen_route() {
        // Dual route: Padé expm of -iHt against the blocked eigendecomposition.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dim = 9;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..i {
                let z = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
            m[(i, i)] = c(rng.gen::<f64>() - 0.5, 0.0);
        }
        let h = Operator::new(m).unwrap();
        let t = 1.37;
        let via_eigen = HermitianEigen::new(&h).unwrap().evolve(t);
        let via_pade = h.scaled(c(0.0, -t)).expm();
        assert!(via_eigen.interior_diff(&via_pade, dim) < 1e-12);
    }

    #[test]
    fn hermitian_eigen_splits_blocks_and_reconstructs() {
        // Block-diagonal by construction: indices {0,2} coupled, {1} alone.
        let mut m = DMatrix::<Complex64>::zeros(3, 3);
        m[(0, 0)] = c(1.0, 0.0);
        m[(2, 2)] = c(-1.0, 0.0);
        m[(0, 2)] = c(0.0, 0.5);
        m[(2, 0)] = c(0.0, -0.5);
        m[(1, 1)] = c(4.0, 0.0);
        let h = Operator::new(m).unwrap();
        let eig = HermitianEigen::new(&h).unwrap();
        let sizes: Vec<usize> = eig.blocks().iter().map(|b| b.indices.len()).collect();
        assert_eq!(sizes, vec![2, 1]);

        // evolve(0) is the identity.
        let u0 = eig.evolve(0.0);
        assert!(u0.interior_diff(&Operator::identity(3), 3) < 1e-14);

        // evolve(t) is unitary.
        let u = eig.evolve(0.8);
        let prod = &u * &u.adjoint();
        assert!(prod.interior_diff(&Operator::identity(3), 3) < 1e-13);
    }

    #[test]
    fn hermitian_eigen_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            HermitianEigen::new(&Operator::new(m).unwrap()),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn dim_cap_env_override() {
        // Not run in parallel with other cap users: the env var is read per call.
        std::env::set_var(JOINT_DIM_CAP_ENV, "10");
        let a = Operator::identity(4);
        let r = tensor_product(&a, &a);
        std::env::remove_var(JOINT_DIM_CAP_ENV);
        assert!(matches!(r, Err(Error::DimensionCapExceeded { requested: 16, cap: 10 })));
        assert!(tensor_product(&a, &a).is_ok());
    }
}
