//! Dense complex linear algebra on bipartite spaces.
//!
//! Every bipartite operator in this crate uses one factor ordering, IR-major:
//! the row/column index of the basis vector `|i_ir⟩ ⊗ |i_uv⟩` is
//! `i_ir * d_uv + i_uv`. Conversions from other orderings happen at the
//! boundaries (file formats, position-space walk operators).
//!
//! Tolerances follow two tiers: [`EXACT_TOL`] for algebraic identities that
//! only involve products and sums, [`EIGEN_TOL`] for anything routed through
//! an eigen-solver.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Tolerance for identities that are exact up to rounding.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for identities that go through an eigendecomposition.
pub const EIGEN_TOL: f64 = 1e-10;

/// The generator behind every seeded computation: ChaCha with 8 rounds, a
/// counter-based stream cipher. Seeds map to streams via `seed_from_u64`.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
}

/// Largest entrywise modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |A − A†|` entrywise.
pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `max |U†U − 𝟙|` entrywise.
pub fn unitarity_residual(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let prod = m.adjoint() * m;
    max_abs(&(prod - identity(m.nrows())))
}

pub fn ensure_square(m: &ComplexMatrix, what: &str) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn ensure_hermitian(m: &ComplexMatrix, tol: f64) -> Result<()> {
    let scale = max_abs(m).max(1.0);
    let residual = hermiticity_residual(m);
    if residual <= tol * scale {
        Ok(())
    } else {
        Err(Error::NotHermitian { residual })
    }
}

pub fn ensure_unitary(m: &ComplexMatrix, tol: f64) -> Result<()> {
    let residual = unitarity_residual(m);
    if residual <= tol {
        Ok(())
    } else {
        Err(Error::NotUnitary { residual })
    }
}

/// `(A + A†)/2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Tensor product `a ⊗ b`, with `a`'s index as the major one.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// `Tr[A]/d`.
pub fn normalized_trace(m: &ComplexMatrix) -> C64 {
    m.trace() / m.nrows() as f64
}

/// Which tensor factor an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Ir,
    Uv,
}

/// A square operator on `ℋ_IR ⊗ ℋ_UV` stored in IR-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteOperator {
    d_ir: usize,
    d_uv: usize,
    matrix: ComplexMatrix,
}

impl BipartiteOperator {
    pub fn new(d_ir: usize, d_uv: usize, matrix: ComplexMatrix) -> Result<Self> {
        let d = d_ir * d_uv;
        if d_ir == 0 || d_uv == 0 || matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "bipartite operator with d_ir={d_ir}, d_uv={d_uv} needs a {d}x{d} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { d_ir, d_uv, matrix })
    }

    /// `a_ir ⊗ b_uv`.
    pub fn product(a_ir: &ComplexMatrix, b_uv: &ComplexMatrix) -> Result<Self> {
        let d_ir = ensure_square(a_ir, "IR factor")?;
        let d_uv = ensure_square(b_uv, "UV factor")?;
        Self::new(d_ir, d_uv, kron(a_ir, b_uv))
    }

    pub fn identity(d_ir: usize, d_uv: usize) -> Self {
        Self {
            d_ir,
            d_uv,
            matrix: identity(d_ir * d_uv),
        }
    }

    pub fn d_ir(&self) -> usize {
        self.d_ir
    }

    pub fn d_uv(&self) -> usize {
        self.d_uv
    }

    pub fn dim(&self) -> usize {
        self.d_ir * self.d_uv
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn same_split(&self, other: &Self) -> bool {
        self.d_ir == other.d_ir && self.d_uv == other.d_uv
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if !self.same_split(other) {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {}⊗{} with {}⊗{}",
                self.d_ir, self.d_uv, other.d_ir, other.d_uv
            )));
        }
        Ok(Self {
            d_ir: self.d_ir,
            d_uv: self.d_uv,
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn adjoint(&self) -> Self {
        Self {
            d_ir: self.d_ir,
            d_uv: self.d_uv,
            matrix: self.matrix.adjoint(),
        }
    }

    /// `(a_ir ⊗ 𝟙_UV) · self`.
    pub fn left_mul_ir(&self, a_ir: &ComplexMatrix) -> Result<Self> {
        if a_ir.nrows() != self.d_ir || a_ir.ncols() != self.d_ir {
            return Err(Error::DimensionMismatch(format!(
                "IR operator is {}x{}, expected {}x{}",
                a_ir.nrows(),
                a_ir.ncols(),
                self.d_ir,
                self.d_ir
            )));
        }
        let lifted = kron(a_ir, &identity(self.d_uv));
        Ok(Self {
            d_ir: self.d_ir,
            d_uv: self.d_uv,
            matrix: lifted * &self.matrix,
        })
    }
}

/// Partial trace over the named factor of an IR-major operator.
pub fn partial_trace(op: &BipartiteOperator, side: Side) -> ComplexMatrix {
    partial_trace_raw(op.matrix(), op.d_ir(), op.d_uv(), side)
        .expect("BipartiteOperator dimensions are validated on construction")
}

/// Partial trace on a bare matrix with declared factor dimensions.
pub fn partial_trace_raw(
    m: &ComplexMatrix,
    d_ir: usize,
    d_uv: usize,
    side: Side,
) -> Result<ComplexMatrix> {
    let d = d_ir * d_uv;
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "declared {d_ir}x{d_uv} split but matrix is {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(match side {
        Side::Uv => ComplexMatrix::from_fn(d_ir, d_ir, |a, a2| {
            (0..d_uv).map(|b| m[(a * d_uv + b, a2 * d_uv + b)]).sum()
        }),
        Side::Ir => ComplexMatrix::from_fn(d_uv, d_uv, |b, b2| {
            (0..d_ir).map(|a| m[(a * d_uv + b, a * d_uv + b2)]).sum()
        }),
    })
}

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        ensure_square(&matrix, "density matrix")?;
        let residual = hermiticity_residual(&matrix);
        if residual > EXACT_TOL {
            return Err(Error::NotHermitian { residual });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > EXACT_TOL || tr.im.abs() > EXACT_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min_eig = hermitian_eigen(&matrix).0.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {min_eig:.3e} is negative"
            )));
        }
        Ok(Self { matrix })
    }

    /// `|ψ⟩⟨ψ|` for a normalized column vector.
    pub fn pure(psi: &ComplexMatrix) -> Result<Self> {
        if psi.ncols() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "state vector must be a column, got {}x{}",
                psi.nrows(),
                psi.ncols()
            )));
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > EXACT_TOL {
            return Err(Error::InvalidState(format!("state norm is {norm}")));
        }
        Self::new(psi * psi.adjoint())
    }

    /// `|i⟩⟨i|` in the computational basis.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::InvalidArgument(format!("basis index {i} >= dimension {d}")));
        }
        let mut m = ComplexMatrix::zeros(d, d);
        m[(i, i)] = c64(1.0, 0.0);
        Ok(Self { matrix: m })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: identity(d).unscale(d as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `Tr[ρ A]`.
    pub fn expectation(&self, a: &ComplexMatrix) -> C64 {
        (&self.matrix * a).trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.matrix).0.into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Orthogonal Hermitian operator basis with `Tr[B_λ B_λ′] = d δ_λλ′` and
/// `B_0 = 𝟙`.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    d: usize,
    elements: Vec<ComplexMatrix>,
}

impl HermitianBasis {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Coefficients `Tr[A B_λ]/d`.
    pub fn coefficients(&self, a: &ComplexMatrix) -> Vec<C64> {
        self.elements
            .iter()
            .map(|b| (a * b).trace() / self.d as f64)
            .collect()
    }

    pub fn reconstruct(&self, coefficients: &[C64]) -> ComplexMatrix {
        self.elements
            .iter()
            .zip(coefficients)
            .fold(ComplexMatrix::zeros(self.d, self.d), |acc, (b, c)| acc + b * *c)
    }
}

/// Generalized Gell-Mann basis rescaled to `Tr[B_λ B_λ′] = d δ_λλ′`.
///
/// Order: identity, then the symmetric off-diagonal elements, the
/// antisymmetric ones, and the diagonal ones. For `d = 2` this is
/// `{𝟙, σ_x, σ_y, σ_z}`.
pub fn hermitian_basis(d: usize) -> Result<HermitianBasis> {
    if d == 0 {
        return Err(Error::InvalidArgument("basis dimension must be >= 1".into()));
    }
    // Gell-Mann matrices have Tr[λ_a λ_b] = 2δ_ab.
    let scale = (d as f64 / 2.0).sqrt();
    let mut elements = Vec::with_capacity(d * d);
    elements.push(identity(d));
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = ComplexMatrix::zeros(d, d);
            m[(j, k)] = c64(scale, 0.0);
            m[(k, j)] = c64(scale, 0.0);
            elements.push(m);
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = ComplexMatrix::zeros(d, d);
            m[(j, k)] = c64(0.0, -scale);
            m[(k, j)] = c64(0.0, scale);
            elements.push(m);
        }
    }
    for l in 1..d {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt() * scale;
        let mut m = ComplexMatrix::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = c64(norm, 0.0);
        }
        m[(l, l)] = c64(-(l as f64) * norm, 0.0);
        elements.push(m);
    }
    Ok(HermitianBasis { d, elements })
}

/// Eigenvalues and eigenvectors (as columns) of a Hermitian matrix.
///
/// The input is symmetrized first, so callers are responsible for having
/// checked Hermiticity.
pub fn hermitian_eigen(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = hermitian_part(h).symmetric_eigen();
    (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
}

/// `exp(i · scale · h)` for Hermitian `h`, via eigendecomposition.
pub fn exp_i_hermitian(h: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    ensure_square(h, "generator")?;
    ensure_hermitian(h, EIGEN_TOL)?;
    let (values, vectors) = hermitian_eigen(h);
    let phases = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| C64::from_polar(1.0, scale * v)),
    ));
    Ok(&vectors * phases * vectors.adjoint())
}

/// Trace norm `Σ |λ_i|` of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &ComplexMatrix) -> f64 {
    hermitian_eigen(m).0.iter().map(|v| v.abs()).sum()
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between {}- and {}-dimensional states",
            rho.dim(),
            sigma.dim()
        )));
    }
    if rho == sigma {
        return Ok(0.0);
    }
    Ok((0.5 * trace_norm_hermitian(&(rho.matrix() - sigma.matrix()))).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaarKind {
    Unitary,
    PureState,
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(s * re, s * im)
    })
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `R`'s diagonal pushed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let z = gaussian_matrix(d, d, rng);
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { c64(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Haar-distributed pure state as a `d × 1` column.
pub fn haar_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let v = gaussian_matrix(d, 1, rng);
    let n = v.norm();
    v.unscale(n)
}

/// Seeded Haar sample; the same `(kind, d, seed)` always gives the same matrix.
pub fn haar_random(kind: HaarKind, d: usize, seed: u64) -> Result<ComplexMatrix> {
    if d == 0 {
        return Err(Error::InvalidArgument("Haar dimension must be >= 1".into()));
    }
    let mut rng = seeded_rng(seed);
    Ok(match kind {
        HaarKind::Unitary => haar_unitary(d, &mut rng),
        HaarKind::PureState => haar_state(d, &mut rng),
    })
}

/// Random Hermitian matrix from the Gaussian unitary ensemble (unit scale).
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    hermitian_part(&gaussian_matrix(d, d, rng))
}

/// Random full-rank density matrix `G G† / Tr[G G†]`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let g = gaussian_matrix(d, d, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let m = hermitian_part(&m.unscale(tr));
    DensityMatrix::new(m).expect("Wishart matrix is a valid state")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(values: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| c64(v, 0.0)),
        ))
    }

    fn basis_vector(d: usize, i: usize) -> ComplexMatrix {
        let mut v = ComplexMatrix::zeros(d, 1);
        v[(i, 0)] = c64(1.0, 0.0);
        v
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        // (i_ir=0, i_uv=1) is index 1, (1, 1) is index 3.
        let out = kron(&pauli_x(), &identity(2)) * basis_vector(4, 1);
        assert_eq!(out, basis_vector(4, 3));
        assert_eq!(kron(&diag(&[1.0, 2.0]), &diag(&[3.0, 4.0])), diag(&[3.0, 4.0, 6.0, 8.0]));
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = seeded_rng(3);
        let a = gaussian_matrix(3, 3, &mut rng);
        let b = gaussian_matrix(2, 2, &mut rng);
        let op = BipartiteOperator::product(&a, &b).unwrap();
        let expected_ir = &a * b.trace();
        let expected_uv = &b * a.trace();
        assert!(max_abs(&(partial_trace(&op, Side::Uv) - expected_ir)) < EXACT_TOL);
        assert!(max_abs(&(partial_trace(&op, Side::Ir) - expected_uv)) < EXACT_TOL);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut phi = ComplexMatrix::zeros(4, 1);
        phi[(0, 0)] = c64(s, 0.0);
        phi[(3, 0)] = c64(s, 0.0);
        let op = BipartiteOperator::new(2, 2, &phi * phi.adjoint()).unwrap();
        let reduced = partial_trace(&op, Side::Uv);
        assert!(max_abs(&(reduced - identity(2).scale(0.5))) < EXACT_TOL);
    }

    #[test]
    fn partial_trace_matches_double_sum() {
        // Brute-force oracle: explicit tensor-index sums with ⟨a b|M|a' b⟩.
        for seed in 0..10 {
            let mut rng = seeded_rng(seed);
            let m = gaussian_matrix(6, 6, &mut rng);
            let op = BipartiteOperator::new(3, 2, m.clone()).unwrap();
            let reduced = partial_trace(&op, Side::Uv);
            let mut oracle = ComplexMatrix::zeros(3, 3);
            for a in 0..3 {
                for a2 in 0..3 {
                    for b in 0..2 {
                        let bra = kron(&basis_vector(3, a), &basis_vector(2, b));
                        let ket = kron(&basis_vector(3, a2), &basis_vector(2, b));
                        oracle[(a, a2)] += (bra.adjoint() * &m * ket)[(0, 0)];
                    }
                }
            }
            assert!(max_abs(&(&reduced - &oracle)) < EXACT_TOL);
            let full = partial_trace_raw(&reduced, 3, 1, Side::Ir).unwrap()[(0, 0)];
            assert!((full - m.trace()).norm() < EXACT_TOL);
        }
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let m = identity(6);
        assert!(matches!(
            partial_trace_raw(&m, 2, 2, Side::Uv),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(BipartiteOperator::new(2, 2, m).is_err());
    }

    #[test]
    fn hermitian_basis_small_cases() {
        let b1 = hermitian_basis(1).unwrap();
        assert_eq!(b1.len(), 1);
        assert_eq!(b1.elements()[0], identity(1));

        let b2 = hermitian_basis(2).unwrap();
        let expected = [identity(2), pauli_x(), pauli_y(), pauli_z()];
        for (got, want) in b2.elements().iter().zip(expected.iter()) {
            assert!(max_abs(&(got - want)) < EXACT_TOL);
        }
    }

    #[test]
    fn hermitian_basis_gram_matrix() {
        for d in [3usize, 4, 5] {
            let basis = hermitian_basis(d).unwrap();
            assert_eq!(basis.len(), d * d);
            for (i, a) in basis.elements().iter().enumerate() {
                assert!(hermiticity_residual(a) <= EXACT_TOL);
                for (j, b) in basis.elements().iter().enumerate() {
                    let g = (a * b).trace();
                    let want = if i == j { d as f64 } else { 0.0 };
                    assert!((g - c64(want, 0.0)).norm() <= EIGEN_TOL, "d={d} ({i},{j}) -> {g}");
                }
            }
        }
    }

    #[test]
    fn hermitian_basis_reconstructs() {
        let mut rng = seeded_rng(11);
        let basis = hermitian_basis(4).unwrap();
        let a = random_hermitian(4, &mut rng);
        let back = basis.reconstruct(&basis.coefficients(&a));
        assert!(max_abs(&(back - a)) <= EIGEN_TOL);
    }

    #[test]
    fn exp_i_hermitian_examples() {
        let h = pauli_x();
        assert!(max_abs(&(exp_i_hermitian(&h, 0.0).unwrap() - identity(2))) < EXACT_TOL);
        let t = 0.37;
        let got = exp_i_hermitian(&h, t).unwrap();
        let want = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c64(t.cos(), 0.0), c64(0.0, t.sin()), c64(0.0, t.sin()), c64(t.cos(), 0.0)],
        );
        assert!(max_abs(&(got - want)) < EIGEN_TOL);

        let mut rng = seeded_rng(8);
        let h8 = random_hermitian(8, &mut rng);
        assert!(unitarity_residual(&exp_i_hermitian(&h8, 1.3).unwrap()) <= EIGEN_TOL);
    }

    #[test]
    fn exp_i_hermitian_rejects_non_hermitian() {
        let mut m = pauli_x();
        m[(0, 1)] = c64(2.0, 0.0);
        assert!(matches!(exp_i_hermitian(&m, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn trace_distance_examples() {
        let rho = DensityMatrix::basis(2, 0).unwrap();
        let orth = DensityMatrix::basis(2, 1).unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert_eq!(trace_distance(&rho, &rho).unwrap(), 0.0);
        assert_abs_diff_eq!(trace_distance(&rho, &orth).unwrap(), 1.0, epsilon = EIGEN_TOL);
        assert_abs_diff_eq!(trace_distance(&rho, &mixed).unwrap(), 0.5, epsilon = EIGEN_TOL);
        let three = DensityMatrix::maximally_mixed(3);
        assert!(matches!(trace_distance(&rho, &three), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(identity(2)).is_err());
        assert!(DensityMatrix::new(pauli_x().scale(0.5) + identity(2).scale(0.5)).is_ok());
        // Trace one but an eigenvalue of -0.5.
        assert!(DensityMatrix::new(diag(&[1.5, -0.5])).is_err());
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        for d in [1usize, 2, 5, 16] {
            let u = haar_random(HaarKind::Unitary, d, 42).unwrap();
            assert!(unitarity_residual(&u) <= EIGEN_TOL);
            assert_eq!(u, haar_random(HaarKind::Unitary, d, 42).unwrap());
        }
        let psi = haar_random(HaarKind::PureState, 7, 1).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = EXACT_TOL);
        assert_ne!(psi, haar_random(HaarKind::PureState, 7, 2).unwrap());
    }

    #[test]
    fn haar_first_moment() {
        // E⟨ψ|A|ψ⟩ = Tr[A]/d for Haar ψ.
        let d = 4;
        let mut rng = seeded_rng(2024);
        let a = random_hermitian(d, &mut rng);
        let n = 10_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let psi = haar_state(d, &mut rng);
                (psi.adjoint() * &a * &psi)[(0, 0)].re
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let want = a.trace().re / d as f64;
        assert!((mean - want).abs() <= 4.0 * se, "mean {mean} want {want} se {se}");
    }
}
