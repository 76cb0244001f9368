//! Channels obtained by tracing out the UV factor, and their fidelity with
//! unitary IR targets.
//!
//! For `U` on `ℋ_IR ⊗ ℋ_UV` and a fixed UV state `ρ_UV`, the IR channel is
//! `𝒟(ρ_IR) = Tr_UV[U (ρ_IR ⊗ ρ_UV) U†]`. Against a unitary target `U_IR`
//! the channel fidelity collapses to
//!
//! ```text
//! ℱ = Tr[O_UV ρ_UV O_UV†] / d_IR²,   O_UV = Tr_IR[(U_IR† ⊗ 𝟙) U]
//! ```
//!
//! which needs no matrix square root. The Choi-matrix route
//! `⟨⟨U_IR|D|U_IR⟩⟩ / d_IR²` is kept alongside as an independent check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, ensure_square, ensure_unitary, haar_state, identity, kron, max_abs, partial_trace,
    partial_trace_raw, seeded_rng, BipartiteOperator, ComplexMatrix, DensityMatrix, Side,
    EIGEN_TOL, EXACT_TOL,
};

/// Fidelity at or above `1 − UNIT_FIDELITY_TOL` counts as unit fidelity.
pub const UNIT_FIDELITY_TOL: f64 = 1e-9;
/// Tolerance on `(O_UV/d_IR)†(O_UV/d_IR) = 𝟙`.
pub const O_UV_UNITARY_TOL: f64 = 1e-8;

/// Choi matrix `D = Σ_ij 𝒟(|i⟩⟨j|) ⊗ |i⟩⟨j|` (output factor first).
#[derive(Debug, Clone)]
pub struct ChoiOperator {
    pub d_ir: usize,
    pub matrix: ComplexMatrix,
    pub label: String,
}

impl ChoiOperator {
    /// `max |Tr_out D − 𝟙|`.
    pub fn trace_preservation_residual(&self) -> f64 {
        let reduced = partial_trace_raw(&self.matrix, self.d_ir, self.d_ir, Side::Ir)
            .expect("Choi matrix is d_ir² square");
        max_abs(&(reduced - identity(self.d_ir)))
    }

    /// Smallest eigenvalue (PSD check).
    pub fn min_eigenvalue(&self) -> f64 {
        crate::linalg::hermitian_eigen(&self.matrix)
            .0
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// `⟨⟨V|D|V⟩⟩ / d²` with `|V⟩⟩ = Σ_ij V_ij |i⟩|j⟩`.
    pub fn overlap_fidelity(&self, v: &ComplexMatrix) -> Result<f64> {
        let d = self.d_ir;
        if v.nrows() != d || v.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "target is {}x{}, channel acts on dimension {d}",
                v.nrows(),
                v.ncols()
            )));
        }
        let vec_v = ComplexMatrix::from_fn(d * d, 1, |k, _| v[(k / d, k % d)]);
        Ok((vec_v.adjoint() * &self.matrix * &vec_v)[(0, 0)].re / (d * d) as f64)
    }
}

/// Result of a fidelity evaluation against a unitary IR target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    pub d_ir: usize,
    pub d_uv: usize,
    #[serde(rename = "unit_fidelity")]
    pub is_unit_fidelity: bool,
    pub o_uv_unitarity_residual: f64,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub o_uv: ComplexMatrix,
}

fn check_inputs(u: &BipartiteOperator, rho_uv: &DensityMatrix) -> Result<()> {
    ensure_unitary(u.matrix(), EIGEN_TOL)?;
    if rho_uv.dim() != u.d_uv() {
        return Err(Error::DimensionMismatch(format!(
            "UV state has dimension {}, operator has d_uv = {}",
            rho_uv.dim(),
            u.d_uv()
        )));
    }
    Ok(())
}

fn check_target(u: &BipartiteOperator, u_ir: &ComplexMatrix) -> Result<()> {
    let d = ensure_square(u_ir, "IR target")?;
    if d != u.d_ir() {
        return Err(Error::DimensionMismatch(format!(
            "IR target has dimension {d}, operator has d_ir = {}",
            u.d_ir()
        )));
    }
    ensure_unitary(u_ir, EIGEN_TOL)
}

/// `𝒟(X) = Tr_UV[U (X ⊗ ρ_UV) U†]`.
pub fn apply_induced_channel(
    u: &BipartiteOperator,
    rho_uv: &DensityMatrix,
    x: &ComplexMatrix,
) -> ComplexMatrix {
    let joint = u.matrix() * kron(x, rho_uv.matrix()) * u.matrix().adjoint();
    partial_trace_raw(&joint, u.d_ir(), u.d_uv(), Side::Uv).expect("dimensions checked")
}

/// Choi matrix of the channel induced on the IR factor.
pub fn induced_channel_choi(u: &BipartiteOperator, rho_uv: &DensityMatrix) -> Result<ChoiOperator> {
    check_inputs(u, rho_uv)?;
    let d = u.d_ir();
    let mut choi = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let mut eij = ComplexMatrix::zeros(d, d);
            eij[(i, j)] = c64(1.0, 0.0);
            let out = apply_induced_channel(u, rho_uv, &eij);
            for a in 0..d {
                for b in 0..d {
                    choi[(a * d + i, b * d + j)] = out[(a, b)];
                }
            }
        }
    }
    Ok(ChoiOperator {
        d_ir: d,
        matrix: choi,
        label: format!("Tr_UV[U(· ⊗ ρ_UV)U†] on d_ir={d}, d_uv={}", u.d_uv()),
    })
}

/// `O_UV = Tr_IR[(U_IR† ⊗ 𝟙_UV) U]`.
pub fn o_uv(u: &BipartiteOperator, u_ir: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_target(u, u_ir)?;
    let shifted = u.left_mul_ir(&u_ir.adjoint())?;
    Ok(partial_trace(&shifted, Side::Ir))
}

/// `max |(O/d)†(O/d) − 𝟙|`.
pub fn o_uv_unitarity_residual(o: &ComplexMatrix, d_ir: usize) -> f64 {
    let scaled = o.unscale(d_ir as f64);
    max_abs(&(scaled.adjoint() * &scaled - identity(o.nrows())))
}

fn fidelity_from_o_uv(o: &ComplexMatrix, rho_uv: &DensityMatrix, d_ir: usize) -> f64 {
    (o * rho_uv.matrix() * o.adjoint()).trace().re / (d_ir * d_ir) as f64
}

/// Channel fidelity between the induced IR channel and `U_IR(·)U_IR†`.
pub fn channel_fidelity_unitary_target(
    u: &BipartiteOperator,
    rho_uv: &DensityMatrix,
    u_ir: &ComplexMatrix,
) -> Result<FidelityReport> {
    check_inputs(u, rho_uv)?;
    let o = o_uv(u, u_ir)?;
    let fidelity = fidelity_from_o_uv(&o, rho_uv, u.d_ir());
    if !(-EXACT_TOL..=1.0 + EIGEN_TOL).contains(&fidelity) {
        return Err(Error::Invariant(format!("channel fidelity {fidelity} outside [0, 1]")));
    }
    Ok(FidelityReport {
        fidelity,
        d_ir: u.d_ir(),
        d_uv: u.d_uv(),
        is_unit_fidelity: fidelity >= 1.0 - UNIT_FIDELITY_TOL,
        o_uv_unitarity_residual: o_uv_unitarity_residual(&o, u.d_ir()),
        seed: None,
        o_uv: o,
    })
}

/// Fidelity only, skipping the input validation; used in inner loops where
/// the inputs are already known to be well formed.
pub(crate) fn fidelity_unchecked(
    u: &BipartiteOperator,
    rho_uv: &DensityMatrix,
    u_ir: &ComplexMatrix,
) -> f64 {
    let shifted = u.left_mul_ir(&u_ir.adjoint()).expect("dimensions checked by caller");
    let o = partial_trace(&shifted, Side::Ir);
    fidelity_from_o_uv(&o, rho_uv, u.d_ir())
}

/// Monte Carlo check of `d ℱ = (d+1) ∫dψ ⟨ψ|U_IR† 𝒟(ψ) U_IR|ψ⟩ − 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HaarAverageReport {
    pub mc_estimate: f64,
    pub closed_form: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl HaarAverageReport {
    /// `|mc − closed| / std_error`, or 0 when both agree and the error is 0.
    pub fn z_score(&self) -> f64 {
        let diff = (self.mc_estimate - self.closed_form).abs();
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff <= EIGEN_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn haar_average_identity_check(
    u: &BipartiteOperator,
    rho_uv: &DensityMatrix,
    u_ir: &ComplexMatrix,
    n_samples: usize,
    seed: u64,
) -> Result<HaarAverageReport> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!(
            "n_samples must be >= 100, got {n_samples}"
        )));
    }
    let report = channel_fidelity_unitary_target(u, rho_uv, u_ir)?;
    let d = u.d_ir();
    let mut rng = seeded_rng(seed);
    let samples: Vec<f64> = (0..n_samples)
        .map(|_| {
            let psi = haar_state(d, &mut rng);
            let out = apply_induced_channel(u, rho_uv, &(&psi * psi.adjoint()));
            let phi = u_ir * &psi;
            (phi.adjoint() * out * phi)[(0, 0)].re
        })
        .collect();
    let n = n_samples as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let scale = (d + 1) as f64;
    Ok(HaarAverageReport {
        mc_estimate: scale * mean - 1.0,
        closed_form: d as f64 * report.fidelity,
        std_error: scale * (var / n).sqrt(),
        n_samples,
        seed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub fidelity: f64,
    pub unit_fidelity: bool,
    pub o_uv_unitarity_residual: f64,
    pub rho_full_rank: bool,
}

/// Whether unit fidelity forces `O_UV/d_IR` to be unitary.
///
/// With `X = O†O/d²` one has `0 ≤ X ≤ 𝟙` and `Tr[ρ_UV(𝟙 − X)] = 1 − ℱ`, so for
/// a full-rank state `‖𝟙 − X‖ ≤ (1 − ℱ)/λ_min`. A residual above that bound
/// (plus [`O_UV_UNITARY_TOL`]) is reported as an invariant violation.
pub fn factorization_diagnostic(
    u: &BipartiteOperator,
    rho_uv: &DensityMatrix,
    u_ir: &ComplexMatrix,
) -> Result<FactorizationReport> {
    let report = channel_fidelity_unitary_target(u, rho_uv, u_ir)?;
    let lambda_min = rho_uv.min_eigenvalue();
    let rho_full_rank = lambda_min > EIGEN_TOL;
    if rho_full_rank && report.is_unit_fidelity {
        let bound = O_UV_UNITARY_TOL + (1.0 - report.fidelity).max(0.0) / lambda_min;
        if report.o_uv_unitarity_residual > bound {
            return Err(Error::Invariant(format!(
                "unit fidelity with full-rank UV state but O_UV/d_IR is not unitary (residual {:.3e})",
                report.o_uv_unitarity_residual
            )));
        }
    }
    Ok(FactorizationReport {
        fidelity: report.fidelity,
        unit_fidelity: report.is_unit_fidelity,
        o_uv_unitarity_residual: report.o_uv_unitarity_residual,
        rho_full_rank,
    })
}

/// `U⁰ ⊗ |0⟩⟨0| + U¹ ⊗ |1⟩⟨1|` with a qubit UV control.
pub fn controlled_unitary(u0: &ComplexMatrix, u1: &ComplexMatrix) -> Result<BipartiteOperator> {
    let d = ensure_square(u0, "U0")?;
    if u1.nrows() != d || u1.ncols() != d {
        return Err(Error::DimensionMismatch("U0 and U1 must have equal size".into()));
    }
    let mut p0 = ComplexMatrix::zeros(2, 2);
    p0[(0, 0)] = c64(1.0, 0.0);
    let mut p1 = ComplexMatrix::zeros(2, 2);
    p1[(1, 1)] = c64(1.0, 0.0);
    BipartiteOperator::new(d, 2, kron(u0, &p0) + kron(u1, &p1))
}
