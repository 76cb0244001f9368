//! Weak-coupling (mean-field) effective dynamics.
//!
//! For `U(θ) = (V_IR ⊗ V_UV) U_MIX(θ)` with `U_MIX(θ) = 𝟙 + iθH_MIX + O(θ²)`,
//! the IR unitary maximizing channel fidelity to leading order is
//! `U_IR = V_IR exp(iθH_IR)` with the UV-averaged generator
//! `H_IR = Tr_UV[(𝟙_IR ⊗ ρ_UV) H_MIX]`. The residual infidelity is `θ²μ`,
//! where the dissipation error `μ` is computed here three independent ways.
//!
//! Expectation values over the IR factor are always the normalized trace
//! `⟨·⟩_IR = Tr_IR[·]/d_IR`; over the UV factor they are `Tr[ρ_UV ·]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channel::channel_fidelity_unitary_target;
use crate::error::{Error, Result};
use crate::linalg::{
    ensure_hermitian, ensure_square, ensure_unitary, exp_i_hermitian, haar_unitary,
    hermitian_basis, hermitian_part, identity, kron, max_abs, normalized_trace, partial_trace,
    random_hermitian, seeded_rng, BipartiteOperator, ComplexMatrix, DensityMatrix,
    HermitianBasis, Side, C64, EIGEN_TOL,
};

/// Default central-difference step for generator extraction.
pub const DEFAULT_EXTRACTION_STEP: f64 = 1e-3;
/// Tolerance for agreement between the three `μ` routes.
pub const MU_AGREEMENT_TOL: f64 = 1e-9;

pub type MixMap = Arc<dyn Fn(f64) -> Result<BipartiteOperator> + Send + Sync>;

/// `θ ↦ (V_IR ⊗ V_UV) U_MIX(θ)` with `U_MIX(0) = 𝟙`.
#[derive(Clone)]
pub struct WeakCouplingFamily {
    v_ir: ComplexMatrix,
    v_uv: ComplexMatrix,
    u_mix: MixMap,
}

impl fmt::Debug for WeakCouplingFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeakCouplingFamily")
            .field("d_ir", &self.d_ir())
            .field("d_uv", &self.d_uv())
            .finish_non_exhaustive()
    }
}

impl WeakCouplingFamily {
    pub fn new(v_ir: ComplexMatrix, v_uv: ComplexMatrix, u_mix: MixMap) -> Result<Self> {
        let d_ir = ensure_square(&v_ir, "V_IR")?;
        let d_uv = ensure_square(&v_uv, "V_UV")?;
        ensure_unitary(&v_ir, EIGEN_TOL)?;
        ensure_unitary(&v_uv, EIGEN_TOL)?;
        let at_zero = u_mix(0.0)?;
        if at_zero.d_ir() != d_ir || at_zero.d_uv() != d_uv {
            return Err(Error::DimensionMismatch(format!(
                "U_MIX acts on {}⊗{}, V factors on {d_ir}⊗{d_uv}",
                at_zero.d_ir(),
                at_zero.d_uv()
            )));
        }
        let residual = max_abs(&(at_zero.matrix() - identity(d_ir * d_uv)));
        if residual > EIGEN_TOL {
            return Err(Error::InvalidArgument(format!(
                "U_MIX(0) must be the identity (residual {residual:.3e})"
            )));
        }
        Ok(Self { v_ir, v_uv, u_mix })
    }

    /// `U_MIX(θ) = exp(iθH)`.
    pub fn exponential(
        v_ir: ComplexMatrix,
        v_uv: ComplexMatrix,
        h_mix: BipartiteOperator,
    ) -> Result<Self> {
        Self::exponential2(v_ir, v_uv, h_mix.clone(), BipartiteOperator::new(
            h_mix.d_ir(),
            h_mix.d_uv(),
            ComplexMatrix::zeros(h_mix.dim(), h_mix.dim()),
        )?)
    }

    /// `U_MIX(θ) = exp(i(θA + θ²B))`; its generator at `θ = 0` is `A`.
    pub fn exponential2(
        v_ir: ComplexMatrix,
        v_uv: ComplexMatrix,
        first: BipartiteOperator,
        second: BipartiteOperator,
    ) -> Result<Self> {
        ensure_hermitian(first.matrix(), EIGEN_TOL)?;
        ensure_hermitian(second.matrix(), EIGEN_TOL)?;
        if !first.same_split(&second) {
            return Err(Error::DimensionMismatch("generator splits differ".into()));
        }
        let (d_ir, d_uv) = (first.d_ir(), first.d_uv());
        let (a, b) = (first.into_matrix(), second.into_matrix());
        let u_mix: MixMap = Arc::new(move |theta: f64| {
            let g = &a * C64::from(theta) + &b * C64::from(theta * theta);
            BipartiteOperator::new(d_ir, d_uv, exp_i_hermitian(&g, 1.0)?)
        });
        Self::new(v_ir, v_uv, u_mix)
    }

    /// Seeded random family: Haar `V_IR`, `V_UV` and GUE generators at first
    /// and second order.
    pub fn random(d_ir: usize, d_uv: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded_rng(seed);
        let v_ir = haar_unitary(d_ir, &mut rng);
        let v_uv = haar_unitary(d_uv, &mut rng);
        let d = d_ir * d_uv;
        let a = BipartiteOperator::new(d_ir, d_uv, random_hermitian(d, &mut rng))?;
        let b = BipartiteOperator::new(d_ir, d_uv, random_hermitian(d, &mut rng))?;
        Self::exponential2(v_ir, v_uv, a, b)
    }

    pub fn d_ir(&self) -> usize {
        self.v_ir.nrows()
    }

    pub fn d_uv(&self) -> usize {
        self.v_uv.nrows()
    }

    pub fn v_ir(&self) -> &ComplexMatrix {
        &self.v_ir
    }

    pub fn v_uv(&self) -> &ComplexMatrix {
        &self.v_uv
    }

    pub fn u_mix(&self, theta: f64) -> Result<BipartiteOperator> {
        (self.u_mix)(theta)
    }

    /// The full step `(V_IR ⊗ V_UV) U_MIX(θ)`.
    pub fn unitary(&self, theta: f64) -> Result<BipartiteOperator> {
        let mix = self.u_mix(theta)?;
        let v = kron(&self.v_ir, &self.v_uv);
        BipartiteOperator::new(self.d_ir(), self.d_uv(), v * mix.matrix())
    }
}

/// `H_MIX` with an optional decomposition `Σ_λ B_λ ⊗ h_λ` over the
/// normalized Hermitian basis `{B_λ}` of the IR factor.
#[derive(Debug, Clone)]
pub struct MixGenerator {
    h_mix: BipartiteOperator,
    decomposition: Option<Decomposition>,
    extraction_delta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub basis: HermitianBasis,
    /// `h_λ = Tr_IR[(B_λ ⊗ 𝟙_UV) H_MIX] / d_IR`.
    pub h_uv: Vec<ComplexMatrix>,
}

impl MixGenerator {
    pub fn new(h_mix: BipartiteOperator) -> Result<Self> {
        ensure_hermitian(h_mix.matrix(), EIGEN_TOL)?;
        Ok(Self {
            h_mix,
            decomposition: None,
            extraction_delta: None,
        })
    }

    pub fn h_mix(&self) -> &BipartiteOperator {
        &self.h_mix
    }

    pub fn d_ir(&self) -> usize {
        self.h_mix.d_ir()
    }

    pub fn d_uv(&self) -> usize {
        self.h_mix.d_uv()
    }

    pub fn decomposition(&self) -> Option<&Decomposition> {
        self.decomposition.as_ref()
    }

    /// `‖H(step) − H(step/2)‖_max` from extraction, if this generator was
    /// extracted numerically.
    pub fn extraction_delta(&self) -> Option<f64> {
        self.extraction_delta
    }

    /// Attach the basis decomposition (cost `O(d_IR⁴ d_UV²)`).
    pub fn decomposed(mut self) -> Self {
        if self.decomposition.is_none() {
            self.decomposition = Some(decompose(&self.h_mix));
        }
        self
    }

    /// `Σ_λ B_λ ⊗ h_λ`, when decomposed.
    pub fn reconstruct(&self) -> Option<ComplexMatrix> {
        self.decomposition.as_ref().map(|dec| {
            let d = self.h_mix.dim();
            dec.basis
                .elements()
                .iter()
                .zip(&dec.h_uv)
                .fold(ComplexMatrix::zeros(d, d), |acc, (b, h)| acc + kron(b, h))
        })
    }

    /// The same generator shifted by `c 𝟙 ⊗ 𝟙`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        let d = self.h_mix.dim();
        let m = self.h_mix.matrix() + identity(d) * C64::from(c);
        let g = Self::new(BipartiteOperator::new(self.d_ir(), self.d_uv(), m)?)?;
        Ok(if self.decomposition.is_some() { g.decomposed() } else { g })
    }
}

fn decompose(h: &BipartiteOperator) -> Decomposition {
    let (d_ir, d_uv) = (h.d_ir(), h.d_uv());
    let basis = hermitian_basis(d_ir).expect("d_ir >= 1");
    let m = h.matrix();
    // For each UV pair (b, b2), K[a2][a] = H[(a2, b), (a, b2)], so that
    // Tr_IR[(B ⊗ 𝟙) H]_{b b2} = Σ_{a a2} B[a][a2] K[a2][a].
    let blocks: Vec<ComplexMatrix> = (0..d_uv * d_uv)
        .map(|idx| {
            let (b, b2) = (idx / d_uv, idx % d_uv);
            ComplexMatrix::from_fn(d_ir, d_ir, |a2, a| m[(a2 * d_uv + b, a * d_uv + b2)])
        })
        .collect();
    let h_uv = basis
        .elements()
        .iter()
        .map(|bmat| {
            ComplexMatrix::from_fn(d_uv, d_uv, |b, b2| {
                let k = &blocks[b * d_uv + b2];
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..d_ir {
                    for a2 in 0..d_ir {
                        acc += bmat[(a, a2)] * k[(a2, a)];
                    }
                }
                acc / d_ir as f64
            })
        })
        .collect();
    Decomposition { basis, h_uv }
}

fn central_difference(family: &WeakCouplingFamily, step: f64) -> Result<ComplexMatrix> {
    let plus = family.u_mix(step)?;
    let minus = family.u_mix(-step)?;
    for u in [&plus, &minus] {
        ensure_unitary(u.matrix(), EIGEN_TOL)?;
    }
    let diff = plus.matrix() - minus.matrix();
    Ok(diff * C64::new(0.0, -1.0 / (2.0 * step)))
}

/// Numerical `H_MIX = −i dU_MIX/dθ |_{θ=0}`.
///
/// Central differences at `step` and `step/2` are combined by Richardson
/// extrapolation (error `O(step⁴)`); their difference is kept as the
/// self-check value [`MixGenerator::extraction_delta`], which must shrink as
/// `O(step²)`.
pub fn extract_h_mix(family: &WeakCouplingFamily, step: f64) -> Result<MixGenerator> {
    if !(step > 0.0 && step <= 0.1) {
        return Err(Error::InvalidArgument(format!("step must be in (0, 0.1], got {step}")));
    }
    let coarse = central_difference(family, step)?;
    let fine = central_difference(family, step / 2.0)?;
    let delta = max_abs(&(&coarse - &fine));
    let extrapolated = (fine * C64::from(4.0) - coarse) / C64::from(3.0);
    let h = BipartiteOperator::new(family.d_ir(), family.d_uv(), hermitian_part(&extrapolated))?;
    let mut g = MixGenerator::new(h)?;
    g.extraction_delta = Some(delta);
    Ok(g)
}

/// `Tr_UV[(𝟙_IR ⊗ ρ_UV) A]` for an IR-major operator `A`.
pub fn uv_average(a: &BipartiteOperator, rho_uv: &DensityMatrix) -> Result<ComplexMatrix> {
    let (d_ir, d_uv) = (a.d_ir(), a.d_uv());
    if rho_uv.dim() != d_uv {
        return Err(Error::DimensionMismatch(format!(
            "UV state has dimension {}, operator has d_uv = {d_uv}",
            rho_uv.dim()
        )));
    }
    let (m, rho) = (a.matrix(), rho_uv.matrix());
    Ok(ComplexMatrix::from_fn(d_ir, d_ir, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for b in 0..d_uv {
            for b2 in 0..d_uv {
                acc += rho[(b, b2)] * m[(i * d_uv + b2, j * d_uv + b)];
            }
        }
        acc
    }))
}

/// Mean-field generator `H_IR = Tr_UV[(𝟙_IR ⊗ ρ_UV) H_MIX]`.
pub fn mean_field_h_ir(gen: &MixGenerator, rho_uv: &DensityMatrix) -> Result<ComplexMatrix> {
    Ok(hermitian_part(&uv_average(gen.h_mix(), rho_uv)?))
}

/// `V_IR exp(iθ H_IR)` from an already known generator.
pub fn effective_unitary_from_generator(
    v_ir: &ComplexMatrix,
    gen: &MixGenerator,
    rho_uv: &DensityMatrix,
    theta: f64,
) -> Result<ComplexMatrix> {
    let h_ir = mean_field_h_ir(gen, rho_uv)?;
    Ok(v_ir * exp_i_hermitian(&h_ir, theta)?)
}

/// The mean-field effective unitary `V_IR exp(iθ H_IR)` of a family.
pub fn effective_unitary(
    family: &WeakCouplingFamily,
    rho_uv: &DensityMatrix,
    theta: f64,
) -> Result<ComplexMatrix> {
    if theta.abs() > 0.5 {
        return Err(Error::InvalidArgument(format!("|theta| must be <= 0.5, got {theta}")));
    }
    let gen = extract_h_mix(family, DEFAULT_EXTRACTION_STEP)?;
    effective_unitary_from_generator(family.v_ir(), &gen, rho_uv, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuMethod {
    /// Four-term expression in `H_MIX` and its partial traces.
    Direct,
    /// Connected IR correlators times connected UV correlators.
    Correlator,
    /// Sum of UV variances in the normalized basis.
    Variance,
}

/// The four contributions to `μ` in the direct formula
/// `μ = t1 − t2 − t3 + t4`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MuTerms {
    /// `Tr_UV[ρ Tr_IR[H²]/d]`
    pub t1: f64,
    /// `Tr_UV[ρ (Tr_IR[H]/d)²]`
    pub t2: f64,
    /// `Tr_IR[H̄²]/d` with `H̄` the mean-field generator
    pub t3: f64,
    /// `(Tr_IR[H̄]/d)²`
    pub t4: f64,
}

impl MuTerms {
    pub fn mu(&self) -> f64 {
        self.t1 - self.t2 - self.t3 + self.t4
    }
}

pub fn mu_terms(gen: &MixGenerator, rho_uv: &DensityMatrix) -> Result<MuTerms> {
    let h = gen.h_mix();
    let d = gen.d_ir() as f64;
    let rho = rho_uv.matrix();
    let h_sq = BipartiteOperator::new(h.d_ir(), h.d_uv(), h.matrix() * h.matrix())?;
    let tr_ir_sq = partial_trace(&h_sq, Side::Ir) / C64::from(d);
    let tr_ir = partial_trace(h, Side::Ir) / C64::from(d);
    let mean_field = uv_average(h, rho_uv)?;
    let t1 = (rho * tr_ir_sq).trace().re;
    let t2 = (rho * &tr_ir * &tr_ir).trace().re;
    let t3 = normalized_trace(&(&mean_field * &mean_field)).re;
    let t4 = normalized_trace(&mean_field).re.powi(2);
    Ok(MuTerms { t1, t2, t3, t4 })
}

/// `Tr[A B]` without forming the product.
fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Dissipation error `μ(H_MIX)` for the UV state `ρ_UV`.
pub fn mu(gen: &MixGenerator, rho_uv: &DensityMatrix, method: MuMethod) -> Result<f64> {
    if rho_uv.dim() != gen.d_uv() {
        return Err(Error::DimensionMismatch(format!(
            "UV state has dimension {}, generator has d_uv = {}",
            rho_uv.dim(),
            gen.d_uv()
        )));
    }
    let value = match method {
        MuMethod::Direct => mu_terms(gen, rho_uv)?.mu(),
        MuMethod::Correlator => {
            let dec = gen
                .decomposition()
                .ok_or(Error::MissingDecomposition("correlator"))?;
            let rho = rho_uv.matrix();
            let d = gen.d_ir() as f64;
            let basis = dec.basis.elements();
            let ir_mean: Vec<C64> = basis.iter().map(|b| b.trace() / d).collect();
            let uv_mean: Vec<C64> = dec.h_uv.iter().map(|h| (rho * h).trace()).collect();
            let rho_h: Vec<ComplexMatrix> = dec.h_uv.iter().map(|h| rho * h).collect();
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..basis.len() {
                for l2 in 0..basis.len() {
                    let ir_c = trace_of_product(&basis[l], &basis[l2]) / d - ir_mean[l] * ir_mean[l2];
                    if ir_c.norm() == 0.0 {
                        continue;
                    }
                    let uv_c = trace_of_product(&rho_h[l], &dec.h_uv[l2]) - uv_mean[l] * uv_mean[l2];
                    acc += ir_c * uv_c;
                }
            }
            if acc.im.abs() > EIGEN_TOL * acc.norm().max(1.0) {
                return Err(Error::Invariant(format!(
                    "correlator form of mu has imaginary part {:.3e}",
                    acc.im
                )));
            }
            acc.re
        }
        MuMethod::Variance => {
            let dec = gen
                .decomposition()
                .ok_or(Error::MissingDecomposition("variance"))?;
            let rho = rho_uv.matrix();
            dec.h_uv
                .iter()
                .skip(1)
                .map(|h| {
                    let mean = (rho * h).trace().re;
                    (rho * h * h).trace().re - mean * mean
                })
                .sum()
        }
    };
    if value < -EIGEN_TOL {
        return Err(Error::Invariant(format!("mu = {value:.3e} is negative")));
    }
    Ok(value)
}

/// Second-order fidelity `1 − θ²(⟨δ²⟩_IR − ⟨δ⟩_IR² + μ)` for a candidate
/// generator (the mean-field one when `None`).
pub fn predicted_fidelity(
    gen: &MixGenerator,
    rho_uv: &DensityMatrix,
    theta: f64,
    candidate_h_ir: Option<&ComplexMatrix>,
) -> Result<f64> {
    let mean_field = mean_field_h_ir(gen, rho_uv)?;
    let penalty = match candidate_h_ir {
        None => 0.0,
        Some(c) => {
            if c.nrows() != gen.d_ir() || c.ncols() != gen.d_ir() {
                return Err(Error::DimensionMismatch(format!(
                    "candidate is {}x{}, expected d_ir = {}",
                    c.nrows(),
                    c.ncols(),
                    gen.d_ir()
                )));
            }
            ensure_hermitian(c, EIGEN_TOL)?;
            let delta = c - &mean_field;
            let mean = normalized_trace(&delta).re;
            (normalized_trace(&(&delta * &delta)).re - mean * mean).max(0.0)
        }
    };
    let mu = mu(gen, rho_uv, MuMethod::Direct)?.max(0.0);
    Ok((1.0 - theta * theta * (penalty + mu)).min(1.0))
}

/// JSON record of one θ point of a mean-field sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanFieldReport {
    pub theta: f64,
    pub mu_direct: f64,
    pub mu_correlator: Option<f64>,
    pub mu_variance: Option<f64>,
    pub predicted_fidelity: f64,
    pub exact_fidelity: f64,
    pub residual: f64,
}

/// Compare the second-order prediction with the exact fidelity of the
/// mean-field unitary at each θ.
pub fn mean_field_sweep(
    family: &WeakCouplingFamily,
    rho_uv: &DensityMatrix,
    thetas: &[f64],
) -> Result<Vec<MeanFieldReport>> {
    let gen = extract_h_mix(family, DEFAULT_EXTRACTION_STEP)?;
    let gen = if gen.d_ir() <= 8 { gen.decomposed() } else { gen };
    let mu_direct = mu(&gen, rho_uv, MuMethod::Direct)?;
    let mu_correlator = gen
        .decomposition()
        .map(|_| mu(&gen, rho_uv, MuMethod::Correlator))
        .transpose()?;
    let mu_variance = gen
        .decomposition()
        .map(|_| mu(&gen, rho_uv, MuMethod::Variance))
        .transpose()?;
    for other in [mu_correlator, mu_variance].into_iter().flatten() {
        if (other - mu_direct).abs() > MU_AGREEMENT_TOL {
            return Err(Error::Invariant(format!(
                "mu routes disagree: direct {mu_direct} vs {other}"
            )));
        }
    }
    thetas
        .iter()
        .map(|&theta| {
            let u_ir = effective_unitary_from_generator(family.v_ir(), &gen, rho_uv, theta)?;
            let exact = channel_fidelity_unitary_target(&family.unitary(theta)?, rho_uv, &u_ir)?
                .fidelity;
            let predicted = predicted_fidelity(&gen, rho_uv, theta, None)?;
            Ok(MeanFieldReport {
                theta,
                mu_direct,
                mu_correlator,
                mu_variance,
                predicted_fidelity: predicted,
                exact_fidelity: exact,
                residual: (exact - predicted).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, pauli_x, pauli_z, random_density};

    fn plus_state() -> DensityMatrix {
        DensityMatrix::new((identity(2) + pauli_x()).scale(0.5)).unwrap()
    }

    fn gen_of(m: ComplexMatrix, d_ir: usize, d_uv: usize) -> MixGenerator {
        MixGenerator::new(BipartiteOperator::new(d_ir, d_uv, m).unwrap())
            .unwrap()
            .decomposed()
    }

    #[test]
    fn extraction_recovers_known_generator() {
        let mut rng = seeded_rng(1);
        let h = random_hermitian(4, &mut rng);
        let fam = WeakCouplingFamily::exponential(
            identity(2),
            identity(2),
            BipartiteOperator::new(2, 2, h.clone()).unwrap(),
        )
        .unwrap();
        // ‖H‖ ~ 3 here, so the central-difference error is a few × step².
        for step in [1e-2, 1e-3] {
            let g = extract_h_mix(&fam, step).unwrap();
            assert!(max_abs(&(g.h_mix().matrix() - &h)) <= 50.0 * step * step);
            let delta = g.extraction_delta().unwrap();
            assert!(delta <= 50.0 * step * step, "delta {delta} at step {step}");
        }
    }

    #[test]
    fn extraction_of_constant_family_is_zero() {
        let fam = WeakCouplingFamily::new(
            identity(2),
            identity(3),
            Arc::new(|_| Ok(BipartiteOperator::identity(2, 3))),
        )
        .unwrap();
        let g = extract_h_mix(&fam, 0.01).unwrap();
        assert_eq!(max_abs(g.h_mix().matrix()), 0.0);
        assert!(extract_h_mix(&fam, 0.5).is_err());
        assert!(extract_h_mix(&fam, 0.0).is_err());
    }

    #[test]
    fn extraction_rejects_non_unitary_family() {
        let fam = WeakCouplingFamily::new(
            identity(2),
            identity(2),
            Arc::new(|t: f64| {
                BipartiteOperator::new(2, 2, identity(4) * C64::from(1.0 + t))
            }),
        )
        .unwrap();
        assert!(matches!(extract_h_mix(&fam, 0.01), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn family_requires_identity_at_zero() {
        let r = WeakCouplingFamily::new(
            identity(2),
            identity(2),
            Arc::new(|_| BipartiteOperator::new(2, 2, kron(&pauli_x(), &identity(2)))),
        );
        assert!(r.is_err());
    }

    #[test]
    fn mean_field_product_form() {
        let mut rng = seeded_rng(2);
        let a_uv = random_hermitian(2, &mut rng);
        let b_ir = random_hermitian(3, &mut rng);
        let rho = random_density(2, &mut rng);
        let g = MixGenerator::new(BipartiteOperator::product(&b_ir, &a_uv).unwrap()).unwrap();
        let got = mean_field_h_ir(&g, &rho).unwrap();
        let want = &b_ir * rho.expectation(&a_uv);
        assert!(max_abs(&(got - want)) < 1e-12);
    }

    #[test]
    fn mean_field_vanishes_for_traceless_uv_and_mixed_state() {
        let m = kron(&pauli_x(), &pauli_z()) + kron(&pauli_z(), &pauli_x());
        let g = MixGenerator::new(BipartiteOperator::new(2, 2, m).unwrap()).unwrap();
        let h = mean_field_h_ir(&g, &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!(max_abs(&h) < 1e-15);
    }

    #[test]
    fn effective_unitary_examples() {
        let fam = WeakCouplingFamily::random(2, 2, 3).unwrap();
        let rho = plus_state();
        let at_zero = effective_unitary(&fam, &rho, 0.0).unwrap();
        assert!(max_abs(&(at_zero - fam.v_ir())) < 1e-12);
        assert!(effective_unitary(&fam, &rho, 0.6).is_err());

        // No IR-UV coupling: H_MIX = B ⊗ 𝟙_UV.
        let mut rng = seeded_rng(4);
        let b = random_hermitian(2, &mut rng);
        let v_ir = haar_unitary(2, &mut rng);
        let v_uv = haar_unitary(2, &mut rng);
        let fam = WeakCouplingFamily::exponential(
            v_ir.clone(),
            v_uv,
            BipartiteOperator::product(&b, &identity(2)).unwrap(),
        )
        .unwrap();
        let theta = 0.3;
        let u_ir = effective_unitary(&fam, &rho, theta).unwrap();
        let want = &v_ir * exp_i_hermitian(&b, theta).unwrap();
        assert!(max_abs(&(&u_ir - want)) < 1e-9);
        let f = channel_fidelity_unitary_target(&fam.unitary(theta).unwrap(), &rho, &u_ir)
            .unwrap()
            .fidelity;
        assert!((f - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mu_examples() {
        let mut rng = seeded_rng(5);
        let b = random_hermitian(2, &mut rng);
        let rho = random_density(2, &mut rng);
        // No UV operator content: every route gives zero.
        let g = gen_of(kron(&b, &identity(2)), 2, 2);
        for method in [MuMethod::Direct, MuMethod::Correlator, MuMethod::Variance] {
            assert!(mu(&g, &rho, method).unwrap().abs() < 1e-12);
        }
        // σ_x on IR, σ_z on UV (IR-major ordering).
        let g = gen_of(kron(&pauli_x(), &pauli_z()), 2, 2);
        let ground = DensityMatrix::basis(2, 0).unwrap();
        for method in [MuMethod::Direct, MuMethod::Correlator, MuMethod::Variance] {
            assert!(mu(&g, &ground, method).unwrap().abs() < 1e-12);
            assert!((mu(&g, &plus_state(), method).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mu_needs_decomposition_for_basis_routes() {
        let g = MixGenerator::new(BipartiteOperator::identity(2, 2)).unwrap();
        let rho = plus_state();
        assert!(matches!(
            mu(&g, &rho, MuMethod::Correlator),
            Err(Error::MissingDecomposition(_))
        ));
        assert!(matches!(
            mu(&g, &rho, MuMethod::Variance),
            Err(Error::MissingDecomposition(_))
        ));
        assert!(mu(&g, &rho, MuMethod::Direct).is_ok());
    }

    #[test]
    fn decomposition_reconstructs() {
        let mut rng = seeded_rng(6);
        let h = random_hermitian(12, &mut rng);
        let g = gen_of(h.clone(), 3, 4);
        assert!(max_abs(&(g.reconstruct().unwrap() - h)) <= 1e-9);
        let dec = g.decomposition().unwrap();
        assert_eq!(dec.h_uv.len(), 9);
        for huv in &dec.h_uv {
            assert!(crate::linalg::hermiticity_residual(huv) < 1e-12);
        }
    }

    #[test]
    fn predicted_fidelity_examples() {
        let fam = WeakCouplingFamily::random(2, 2, 7).unwrap();
        let gen = extract_h_mix(&fam, DEFAULT_EXTRACTION_STEP).unwrap();
        let mut rng = seeded_rng(8);
        let rho = random_density(2, &mut rng);
        let theta = 0.05;
        let m = mu(&gen, &rho, MuMethod::Direct).unwrap();
        let h_ir = mean_field_h_ir(&gen, &rho).unwrap();
        let base = predicted_fidelity(&gen, &rho, theta, None).unwrap();
        assert!((base - (1.0 - theta * theta * m)).abs() < 1e-15);
        let shifted = &h_ir + identity(2);
        let same = predicted_fidelity(&gen, &rho, theta, Some(&shifted)).unwrap();
        assert!((same - base).abs() < 1e-14);
        let tilted = &h_ir + pauli_x();
        let lower = predicted_fidelity(&gen, &rho, theta, Some(&tilted)).unwrap();
        assert!((lower - (1.0 - theta * theta * (1.0 + m))).abs() < 1e-12);

        let mut bad = identity(2);
        bad[(0, 1)] = c64(1.0, 0.0);
        assert!(predicted_fidelity(&gen, &rho, theta, Some(&bad)).is_err());
    }

    #[test]
    fn sweep_reports_agreeing_mu_routes() {
        let fam = WeakCouplingFamily::random(2, 2, 9).unwrap();
        let rho = plus_state();
        let rows = mean_field_sweep(&fam, &rho, &[0.01, 0.02]).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!((r.mu_correlator.unwrap() - r.mu_direct).abs() < 1e-9);
            assert!(r.exact_fidelity <= 1.0 + 1e-12);
            assert!(r.residual < 1e-4);
        }
    }
}
