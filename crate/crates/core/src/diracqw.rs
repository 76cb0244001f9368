//! The one-dimensional Dirac quantum walk on a ring, coarse-grained by
//! pairing neighbouring sites.
//!
//! Conventions used throughout:
//!
//! * the fine chain has `4L` sites with a two-level coin at each site; `T`
//!   shifts `|x⟩ → |x−1⟩` (mod `4L`) and momentum states are
//!   `|p⟩ = (4L)^{−1/2} Σ_x e^{−ikx}|x⟩` with `k = πp/(2L)`, `p ∈ [−2L, 2L−1]`,
//!   so `T|p⟩ = e^{−ik}|p⟩`;
//! * one step is `U = [[cos θ T†, −i sin θ], [−i sin θ, cos θ T]]` in coin
//!   blocks, which is `[[e^{ik}cos θ, −i sin θ], [−i sin θ, e^{−ik}cos θ]]`
//!   at momentum `p`;
//! * site `x` splits as `x = 2x_IR + x_UV`. The IR factor is the coarse
//!   chain of `2L` sites together with the coin (`d_IR = 4L`, index
//!   `2x_IR + coin`), the UV factor is the bit `x_UV`. Dense operators use
//!   the IR-major index `(2x_IR + coin)·2 + x_UV`;
//! * coarse momenta are `p ∈ [−L, L−1]` with `k = πp/L` on the `2L` coarse
//!   sites, and a fine momentum `p` lands on the coarse momentum
//!   `p mod 2L` (see [`fold_to_coarse`]).

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c64, identity, kron, pauli_x, pauli_y, pauli_z, BipartiteOperator,
    ComplexMatrix, DensityMatrix, C64,
};
use crate::meanfield::{mu, MixGenerator, MuMethod, WeakCouplingFamily};

/// Largest `L` for which dense `(8L)²` position-space operators are built.
pub const MAX_DENSE_HALF_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingWalkConfig {
    theta: f64,
    half_size: usize,
}

impl RingWalkConfig {
    pub fn new(theta: f64, half_size: usize) -> Result<Self> {
        if !(0.0..=PI / 4.0).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in [0, π/4], got {theta}"
            )));
        }
        if half_size < 2 {
            return Err(Error::InvalidArgument(format!("L must be >= 2, got {half_size}")));
        }
        Ok(Self { theta, half_size })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `L`; the fine chain has `4L` sites.
    pub fn half_size(&self) -> usize {
        self.half_size
    }

    pub fn sites(&self) -> usize {
        4 * self.half_size
    }

    pub fn coarse_sites(&self) -> usize {
        2 * self.half_size
    }

    /// `k = πp/(2L)` after checking `p ∈ [−2L, 2L−1]`.
    pub fn fine_momentum(&self, p: i64) -> Result<f64> {
        let l = self.half_size as i64;
        check_range("fine momentum", p, -2 * l, 2 * l - 1)?;
        Ok(PI * p as f64 / (2 * l) as f64)
    }

    /// `k = πp/L` after checking `p ∈ [−L, L−1]`.
    pub fn coarse_momentum(&self, p: i64) -> Result<f64> {
        let l = self.half_size as i64;
        check_range("coarse momentum", p, -l, l - 1)?;
        Ok(PI * p as f64 / l as f64)
    }

    pub fn fine_zone(&self) -> std::ops::RangeInclusive<i64> {
        let l = self.half_size as i64;
        -2 * l..=2 * l - 1
    }

    pub fn coarse_zone(&self) -> std::ops::RangeInclusive<i64> {
        let l = self.half_size as i64;
        -l..=l - 1
    }
}

fn check_range(what: &'static str, value: i64, lo: i64, hi: i64) -> Result<()> {
    if value < lo || value > hi {
        return Err(Error::OutOfRange { what, value, lo, hi });
    }
    Ok(())
}

/// UV state `(𝟙 + r·σ)/2` on the bit `x_UV`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub r_x: f64,
    pub r_y: f64,
    pub r_z: f64,
}

impl BlochVector {
    pub fn new(r_x: f64, r_y: f64, r_z: f64) -> Result<Self> {
        let r = Self { r_x, r_y, r_z };
        if !(r.norm_squared() <= 1.0 + 1e-12) {
            return Err(Error::InvalidState(format!(
                "Bloch vector ({r_x}, {r_y}, {r_z}) has length > 1"
            )));
        }
        Ok(r)
    }

    pub fn zero() -> Self {
        Self { r_x: 0.0, r_y: 0.0, r_z: 0.0 }
    }

    pub fn norm_squared(&self) -> f64 {
        self.r_x * self.r_x + self.r_y * self.r_y + self.r_z * self.r_z
    }

    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        if rho.dim() != 2 {
            return Err(Error::DimensionMismatch("Bloch vectors describe qubits".into()));
        }
        let r_x = rho.expectation(&pauli_x()).re;
        let r_y = rho.expectation(&pauli_y()).re;
        let r_z = rho.expectation(&pauli_z()).re;
        Self::new(r_x, r_y, r_z)
    }

    pub fn density(&self) -> Result<DensityMatrix> {
        let m = (identity(2) + pauli_x() * c64(self.r_x, 0.0) + pauli_y() * c64(self.r_y, 0.0)
            + pauli_z() * c64(self.r_z, 0.0))
            * c64(0.5, 0.0);
        DensityMatrix::new(m)
    }
}

/// A 2×2 operator on the coin at a single momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumBlock {
    pub p: i64,
    pub block: ComplexMatrix,
}

/// `[[e^{ik}cos θ, −i sin θ], [−i sin θ, e^{−ik}cos θ]]`.
pub fn walk_matrix(theta: f64, k: f64) -> ComplexMatrix {
    let (s, c) = theta.sin_cos();
    let e = C64::from_polar(1.0, k);
    ComplexMatrix::from_row_slice(2, 2, &[e * c, c64(0.0, -s), c64(0.0, -s), e.conj() * c])
}

/// Walk step at fine momentum `p`.
pub fn walk_block(cfg: &RingWalkConfig, p: i64) -> Result<MomentumBlock> {
    let k = cfg.fine_momentum(p)?;
    Ok(MomentumBlock {
        p,
        block: walk_matrix(cfg.theta, k),
    })
}

/// `x ↦ (⌊x/2⌋, x mod 2)` on a chain of `sites` sites.
pub fn coarse_grain_index(x: usize, sites: usize) -> Result<(usize, usize)> {
    if x >= sites {
        return Err(Error::OutOfRange {
            what: "site",
            value: x as i64,
            lo: 0,
            hi: sites as i64 - 1,
        });
    }
    Ok((x / 2, x % 2))
}

/// Coarse momentum carried by fine momentum `p`: the coarse chain only
/// resolves `p` modulo `2L`, folded into `[−L, L−1]`.
pub fn fold_to_coarse(p: i64, half_size: usize) -> i64 {
    let l = half_size as i64;
    (p + l).rem_euclid(2 * l) - l
}

/// `γ(k) = r_x(1 + cos k) − r_y sin k`.
pub fn gamma(r: &BlochVector, k: f64) -> f64 {
    r.r_x * (1.0 + k.cos()) - r.r_y * k.sin()
}

/// Coarse momentum `p` of the effective walk `V_IR exp(iθH_IR)`:
/// `[[e^{ik}cos γθ, −i sin γθ], [−i sin γθ, e^{−ik}cos γθ]]`, `γ = γ(k)`.
pub fn effective_walk_block(cfg: &RingWalkConfig, r: &BlochVector, p: i64) -> Result<MomentumBlock> {
    let k = cfg.coarse_momentum(p)?;
    Ok(MomentumBlock {
        p,
        block: walk_matrix(gamma(r, k) * cfg.theta, k),
    })
}

/// Mean-field generator at coarse momentum: `−γ(k)[[0, e^{−ik}], [e^{ik}, 0]]`.
pub fn h_ir_block(r: &BlochVector, k: f64) -> ComplexMatrix {
    let g = gamma(r, k);
    let e = C64::from_polar(1.0, k);
    ComplexMatrix::from_row_slice(2, 2, &[C64::from(0.0), -e.conj() * g, -e * g, C64::from(0.0)])
}

/// Free IR step at coarse momentum: `diag(e^{ik}, e^{−ik})`.
pub fn v_ir_block(k: f64) -> ComplexMatrix {
    let e = C64::from_polar(1.0, k);
    ComplexMatrix::from_row_slice(2, 2, &[e, C64::from(0.0), C64::from(0.0), e.conj()])
}

/// `H_MIX` at fine momentum: `−2cos k [[0, e^{−2ik}], [e^{2ik}, 0]]`.
pub fn h_mix_block(cfg: &RingWalkConfig, p: i64) -> Result<MomentumBlock> {
    let k = cfg.fine_momentum(p)?;
    let e2 = C64::from_polar(1.0, 2.0 * k);
    let a = -2.0 * k.cos();
    Ok(MomentumBlock {
        p,
        block: ComplexMatrix::from_row_slice(
            2,
            2,
            &[C64::from(0.0), e2.conj() * a, e2 * a, C64::from(0.0)],
        ),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dispersion {
    pub k: f64,
    pub omega: f64,
    pub omega_ir: Option<f64>,
}

/// `cos ω = cos k cos θ`, and `cos ω_IR = cos k cos(γ(k)θ)` when `r` is given.
pub fn dispersion(theta: f64, r: Option<&BlochVector>, k: f64) -> Dispersion {
    let omega = (k.cos() * theta.cos()).clamp(-1.0, 1.0).acos();
    let omega_ir = r.map(|r| (k.cos() * (gamma(r, k) * theta).cos()).clamp(-1.0, 1.0).acos());
    Dispersion { k, omega, omega_ir }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MuDiracMethod {
    ClosedForm,
    /// Assemble `μ` from the dense generator on a ring with this `L`.
    Generic(usize),
}

/// Dissipation error of the coarse-grained walk, `½(4 − 3r_x² − r_y²)` in
/// closed form.
pub fn mu_dirac(r: &BlochVector, method: MuDiracMethod) -> Result<f64> {
    match method {
        MuDiracMethod::ClosedForm => Ok(0.5 * (4.0 - 3.0 * r.r_x * r.r_x - r.r_y * r.r_y)),
        MuDiracMethod::Generic(l) => {
            let cfg = RingWalkConfig::new(0.0, l)?;
            let gen = h_mix_dirac(&cfg)?;
            mu(&gen, &r.density()?, MuMethod::Direct)
        }
    }
}

// ---------------------------------------------------------------------------
// Dense position-space operators.

fn ensure_dense(cfg: &RingWalkConfig) -> Result<()> {
    if cfg.half_size > MAX_DENSE_HALF_SIZE {
        return Err(Error::InvalidArgument(format!(
            "dense operators are limited to L <= {MAX_DENSE_HALF_SIZE}, got {}",
            cfg.half_size
        )));
    }
    Ok(())
}

/// `T` on a ring of `n` sites: `T|x⟩ = |x−1⟩`.
pub fn translation(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |row, col| {
        if row == (col + n - 1) % n {
            C64::from(1.0)
        } else {
            C64::from(0.0)
        }
    })
}

/// IR-major index of fine site `x` with coin `c`.
pub fn fine_to_bipartite(x: usize, coin: usize) -> usize {
    ((x / 2) * 2 + coin) * 2 + x % 2
}

/// Reorders a coin-major fine operator (`coin·4L + x`) into the IR-major
/// coarse order.
fn coin_major_to_bipartite(m: &ComplexMatrix, sites: usize) -> ComplexMatrix {
    let n = 2 * sites;
    let perm: Vec<usize> = (0..n).map(|i| fine_to_bipartite(i % sites, i / sites)).collect();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}

/// Reorders a coin-major coarse operator (`coin·2L + x_IR`) into the IR
/// index `2x_IR + coin`.
fn coin_major_to_ir(m: &ComplexMatrix, coarse_sites: usize) -> ComplexMatrix {
    let n = 2 * coarse_sites;
    let perm: Vec<usize> = (0..n).map(|i| (i % coarse_sites) * 2 + i / coarse_sites).collect();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}

fn coin_blocks(b00: &ComplexMatrix, b01: &ComplexMatrix, b10: &ComplexMatrix, b11: &ComplexMatrix) -> ComplexMatrix {
    let n = b00.nrows();
    let mut out = ComplexMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(b00);
    out.view_mut((0, n), (n, n)).copy_from(b01);
    out.view_mut((n, 0), (n, n)).copy_from(b10);
    out.view_mut((n, n), (n, n)).copy_from(b11);
    out
}

/// One walk step `U` as a dense IR-major operator.
pub fn position_walk(cfg: &RingWalkConfig) -> Result<BipartiteOperator> {
    ensure_dense(cfg)?;
    let n = cfg.sites();
    let t = translation(n);
    let (s, c) = cfg.theta.sin_cos();
    let off = identity(n) * c64(0.0, -s);
    let m = coin_blocks(&(t.adjoint() * C64::from(c)), &off, &off, &(&t * C64::from(c)));
    BipartiteOperator::new(2 * cfg.coarse_sites(), 2, coin_major_to_bipartite(&m, n))
}

/// `V_IR = [[T_IR†, 0], [0, T_IR]]` on the coarse chain with coin.
pub fn v_ir(cfg: &RingWalkConfig) -> ComplexMatrix {
    let n = cfg.coarse_sites();
    let t = translation(n);
    let zero = ComplexMatrix::zeros(n, n);
    coin_major_to_ir(&coin_blocks(&t.adjoint(), &zero, &zero, &t), n)
}

/// `U_MIX(θ) = [[A, −iB], [−iB†, A†]]` with `A = cos²θ − sin²θ T²` and
/// `B = sin θ cos θ (T + T†)T²`.
pub fn u_mix_dense(cfg: &RingWalkConfig, theta: f64) -> Result<BipartiteOperator> {
    ensure_dense(cfg)?;
    let n = cfg.sites();
    let t = translation(n);
    let t2 = &t * &t;
    let (s, c) = theta.sin_cos();
    let a = identity(n) * C64::from(c * c) - &t2 * C64::from(s * s);
    let b = (&t + t.adjoint()) * &t2 * C64::from(s * c);
    let minus_i = c64(0.0, -1.0);
    let m = coin_blocks(&a, &(&b * minus_i), &(b.adjoint() * minus_i), &a.adjoint());
    BipartiteOperator::new(2 * cfg.coarse_sites(), 2, coin_major_to_bipartite(&m, n))
}

/// `U² = (V_IR ⊗ 𝟙_UV) U_MIX(θ)` as a weak-coupling family in `θ`.
pub fn u_squared_factorization(cfg: &RingWalkConfig) -> Result<WeakCouplingFamily> {
    ensure_dense(cfg)?;
    let ring = *cfg;
    WeakCouplingFamily::new(
        v_ir(cfg),
        identity(2),
        Arc::new(move |theta| u_mix_dense(&ring, theta)),
    )
}

/// Closed-form `H_MIX = −[[0, (T+T†)T²], [(T+T†)T†², 0]]`.
pub fn h_mix_position(cfg: &RingWalkConfig) -> Result<BipartiteOperator> {
    ensure_dense(cfg)?;
    let n = cfg.sites();
    let t = translation(n);
    let b = (&t + t.adjoint()) * &t * &t * C64::from(-1.0);
    let zero = ComplexMatrix::zeros(n, n);
    let m = coin_blocks(&zero, &b, &b.adjoint(), &zero);
    BipartiteOperator::new(2 * cfg.coarse_sites(), 2, coin_major_to_bipartite(&m, n))
}

/// Generator of the coarse-grained walk as a [`MixGenerator`].
pub fn h_mix_dirac(cfg: &RingWalkConfig) -> Result<MixGenerator> {
    MixGenerator::new(h_mix_position(cfg)?)
}

/// One term `−2cos k · uv ⊗ coin ⊗ |p⟩⟨p|_IR` of the momentum-resolved
/// generator, with `k = πp/(2L)` and `|p⟩_IR` the coarse momentum state of
/// momentum `p`.
#[derive(Debug, Clone)]
pub struct BoxTerm {
    pub p: i64,
    pub weight: f64,
    pub uv: ComplexMatrix,
    pub coin: ComplexMatrix,
}

fn phase_flip(phi: f64) -> ComplexMatrix {
    let e = C64::from_polar(1.0, phi);
    ComplexMatrix::from_row_slice(2, 2, &[C64::from(0.0), e.conj(), e, C64::from(0.0)])
}

/// `H_MIX = Σ_p −2cos k [[0, e^{ik}], [e^{−ik}, 0]]_UV ⊗ [[0, e^{−2ik}], [e^{2ik}, 0]]_coin ⊗ |p⟩⟨p|_IR`
/// with `k = πp/(2L)` and `p` over the coarse zone.
///
/// Fine momenta `p` and `p ± 2L` share the coarse projector; their UV parts
/// `(𝟙 ± flip)/2` combine so only the flip survives, which is why the sum
/// runs over `2L` rather than `4L` momenta.
pub fn box_decomposition(cfg: &RingWalkConfig) -> Vec<BoxTerm> {
    cfg.coarse_zone()
        .map(|p| {
            let k = PI * p as f64 / (2 * cfg.half_size) as f64;
            BoxTerm {
                p,
                weight: -2.0 * k.cos(),
                uv: phase_flip(-k),
                coin: phase_flip(2.0 * k),
            }
        })
        .collect()
}

/// `|p⟩_IR = (2L)^{−1/2} Σ e^{−iπp x/L}|x⟩` on the coarse chain.
pub fn coarse_momentum_state(cfg: &RingWalkConfig, p: i64) -> Result<Vec<C64>> {
    let k = cfg.coarse_momentum(p)?;
    let n = cfg.coarse_sites();
    let norm = (n as f64).sqrt().recip();
    Ok((0..n).map(|x| C64::from_polar(norm, -k * x as f64)).collect())
}

/// Dense IR-major assembly of the box decomposition.
pub fn h_mix_from_box(cfg: &RingWalkConfig) -> Result<BipartiteOperator> {
    ensure_dense(cfg)?;
    let n = cfg.coarse_sites();
    let d_ir = 2 * n;
    let mut out = ComplexMatrix::zeros(2 * d_ir, 2 * d_ir);
    for term in box_decomposition(cfg) {
        let state = coarse_momentum_state(cfg, term.p)?;
        let proj = ComplexMatrix::from_fn(n, n, |x, y| state[x] * state[y].conj());
        // IR index is 2x_IR + coin, so the IR operator is proj ⊗ coin.
        let ir = kron(&proj, &term.coin);
        out += kron(&ir, &term.uv) * C64::from(term.weight);
    }
    BipartiteOperator::new(d_ir, 2, out)
}

/// `⟨p, c|A|p, c'⟩` of an IR operator at coarse momentum `p`.
pub fn project_coarse_block(cfg: &RingWalkConfig, a_ir: &ComplexMatrix, p: i64) -> Result<MomentumBlock> {
    let state = coarse_momentum_state(cfg, p)?;
    let n = cfg.coarse_sites();
    if a_ir.nrows() != 2 * n || a_ir.ncols() != 2 * n {
        return Err(Error::DimensionMismatch(format!(
            "IR operator must be {}×{}",
            2 * n,
            2 * n
        )));
    }
    let block = ComplexMatrix::from_fn(2, 2, |c, c2| {
        let mut acc = C64::from(0.0);
        for x in 0..n {
            for y in 0..n {
                acc += state[x].conj() * a_ir[(2 * x + c, 2 * y + c2)] * state[y];
            }
        }
        acc
    });
    Ok(MomentumBlock { p, block })
}

/// Largest `|⟨x, c|U|y, c'⟩|` over pairs with ring distance `|x − y| > 1`.
pub fn light_cone_violation(cfg: &RingWalkConfig) -> Result<f64> {
    let u = position_walk(cfg)?;
    let n = cfg.sites();
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            let dist = (x + n - y) % n;
            if dist.min(n - dist) <= 1 {
                continue;
            }
            for c in 0..2 {
                for c2 in 0..2 {
                    let v = u.matrix()[(fine_to_bipartite(x, c), fine_to_bipartite(y, c2))];
                    worst = worst.max(v.norm());
                }
            }
        }
    }
    Ok(worst)
}

/// Eigenphases `ω` (with `U v = e^{−iω} v`) of a 2×2 unitary, sorted.
pub fn eigenphases(u: &ComplexMatrix) -> [f64; 2] {
    let tr = u[(0, 0)] + u[(1, 1)];
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let disc = (tr * tr - det * 4.0).sqrt();
    let mut phases = [-((tr + disc) * 0.5).arg(), -((tr - disc) * 0.5).arg()];
    phases.sort_by(f64::total_cmp);
    phases
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, unitarity_residual};
    use crate::meanfield::{extract_h_mix, mean_field_h_ir, DEFAULT_EXTRACTION_STEP};
    use approx::assert_abs_diff_eq;

    fn cfg(theta: f64, l: usize) -> RingWalkConfig {
        RingWalkConfig::new(theta, l).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(RingWalkConfig::new(-0.1, 4).is_err());
        assert!(RingWalkConfig::new(1.0, 4).is_err());
        assert!(RingWalkConfig::new(0.2, 1).is_err());
        assert!(RingWalkConfig::new(PI / 4.0, 2).is_ok());
        let c = cfg(0.1, 3);
        assert!(c.fine_momentum(-6).is_ok() && c.fine_momentum(6).is_err());
        assert!(c.coarse_momentum(-3).is_ok() && c.coarse_momentum(3).is_err());
        assert!(walk_block(&c, 7).is_err());
    }

    #[test]
    fn walk_block_examples() {
        let c0 = cfg(0.0, 4);
        for p in c0.fine_zone() {
            let k = c0.fine_momentum(p).unwrap();
            let b = walk_block(&c0, p).unwrap().block;
            assert_abs_diff_eq!(max_abs(&(b - v_ir_block(k))), 0.0, epsilon = 1e-15);
        }
        let c = cfg(0.3, 4);
        let b = walk_block(&c, 0).unwrap().block;
        let (s, co) = 0.3f64.sin_cos();
        let expect = ComplexMatrix::from_row_slice(2, 2, &[c64(co, 0.0), c64(0.0, -s), c64(0.0, -s), c64(co, 0.0)]);
        assert_abs_diff_eq!(max_abs(&(b - expect)), 0.0, epsilon = 1e-15);
        for theta in [0.05, 0.3, 0.7] {
            let c = cfg(theta, 5);
            for p in c.fine_zone() {
                let k = c.fine_momentum(p).unwrap();
                let b = walk_block(&c, p).unwrap().block;
                assert!(unitarity_residual(&b) < 1e-14);
                let w = (k.cos() * theta.cos()).acos();
                let phases = eigenphases(&b);
                assert_abs_diff_eq!(phases[0], -w, epsilon = 1e-10);
                assert_abs_diff_eq!(phases[1], w, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn coarse_grain_and_fold() {
        assert_eq!(coarse_grain_index(0, 8).unwrap(), (0, 0));
        assert_eq!(coarse_grain_index(5, 8).unwrap(), (2, 1));
        assert!(coarse_grain_index(8, 8).is_err());
        for x in 0..16 {
            let (a, b) = coarse_grain_index(x, 16).unwrap();
            assert_eq!(2 * a + b, x);
        }
        let l = 3;
        assert_eq!(fold_to_coarse(0, l), 0);
        assert_eq!(fold_to_coarse(-3, l), -3);
        assert_eq!(fold_to_coarse(2, l), 2);
        assert_eq!(fold_to_coarse(3, l), -3);
        assert_eq!(fold_to_coarse(5, l), -1);
        assert_eq!(fold_to_coarse(-6, l), 0);
        assert_eq!(fold_to_coarse(-4, l), 2);
        // Every coarse momentum receives exactly two fine momenta, and the
        // fine momentum state restricted to even sites is the coarse one.
        let c = cfg(0.0, l);
        let mut hits = vec![0; 2 * l];
        for p in c.fine_zone() {
            let q = fold_to_coarse(p, l);
            hits[(q + l as i64) as usize] += 1;
            let kf = c.fine_momentum(p).unwrap();
            let kc = c.coarse_momentum(q).unwrap();
            for x_ir in 0..2 * l {
                let fine = C64::from_polar(1.0, -kf * (2 * x_ir) as f64);
                let coarse = C64::from_polar(1.0, -kc * x_ir as f64);
                assert_abs_diff_eq!((fine - coarse).norm(), 0.0, epsilon = 1e-12);
            }
        }
        assert!(hits.iter().all(|&h| h == 2));
    }

    #[test]
    fn position_walk_matches_momentum_blocks() {
        let c = cfg(0.35, 3);
        let u = position_walk(&c).unwrap();
        assert!(unitarity_residual(u.matrix()) < 1e-13);
        let n = c.sites();
        for p in c.fine_zone() {
            let k = c.fine_momentum(p).unwrap();
            let mode: Vec<C64> = (0..n).map(|x| C64::from_polar(1.0 / (n as f64).sqrt(), -k * x as f64)).collect();
            let block = walk_block(&c, p).unwrap().block;
            for c_in in 0..2 {
                let mut psi = nalgebra::DVector::<C64>::zeros(2 * n);
                for x in 0..n {
                    psi[fine_to_bipartite(x, c_in)] = mode[x];
                }
                let out = u.matrix() * &psi;
                for x in 0..n {
                    for c_out in 0..2 {
                        let expect = block[(c_out, c_in)] * mode[x];
                        assert_abs_diff_eq!((out[fine_to_bipartite(x, c_out)] - expect).norm(), 0.0, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn factorization_identity_on_grid() {
        for l in [2, 4, 8] {
            for theta in [0.0, 0.05, 0.1, 0.2, 0.4] {
                let c = cfg(theta, l);
                let u = position_walk(&c).unwrap();
                let u2 = u.matrix() * u.matrix();
                let fam = u_squared_factorization(&c).unwrap();
                let rebuilt = fam.unitary(theta).unwrap();
                assert!(max_abs(&(rebuilt.matrix() - &u2)) <= 1e-10, "L={l} θ={theta}");
                assert!(unitarity_residual(fam.u_mix(theta).unwrap().matrix()) < 1e-12);
            }
        }
        let c = cfg(0.0, 4);
        let fam = u_squared_factorization(&c).unwrap();
        assert_eq!(max_abs(&(fam.u_mix(0.0).unwrap().matrix() - identity(32))), 0.0);
    }

    #[test]
    fn closed_form_generator_matches_extraction_and_box() {
        let c = cfg(0.0, 4);
        let closed = h_mix_position(&c).unwrap();
        assert_eq!(crate::linalg::hermiticity_residual(closed.matrix()), 0.0);
        let fam = u_squared_factorization(&c).unwrap();
        let extracted = extract_h_mix(&fam, DEFAULT_EXTRACTION_STEP).unwrap();
        assert!(max_abs(&(extracted.h_mix().matrix() - closed.matrix())) <= 1e-8);
        let boxed = h_mix_from_box(&c).unwrap();
        assert!(max_abs(&(boxed.matrix() - closed.matrix())) <= 1e-12);
    }

    #[test]
    fn h_mix_block_examples() {
        let c = cfg(0.0, 4);
        // k = π/2 at p = L.
        assert!(max_abs(&h_mix_block(&c, 4).unwrap().block) < 1e-15);
        let b0 = h_mix_block(&c, 0).unwrap().block;
        assert_abs_diff_eq!(max_abs(&(b0 + pauli_x() * c64(2.0, 0.0))), 0.0, epsilon = 1e-15);
        for p in c.fine_zone() {
            let b = h_mix_block(&c, p).unwrap().block;
            assert!(crate::linalg::hermiticity_residual(&b) < 1e-15);
        }
    }

    #[test]
    fn gamma_examples() {
        let x = BlochVector::new(1.0, 0.0, 0.0).unwrap();
        let y = BlochVector::new(0.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(gamma(&x, 0.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gamma(&x, PI), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gamma(&y, PI / 2.0), -1.0, epsilon = 1e-15);
        assert!(BlochVector::new(1.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn effective_walk_examples() {
        let c = cfg(0.2, 4);
        for p in c.coarse_zone() {
            let k = c.coarse_momentum(p).unwrap();
            let b = effective_walk_block(&c, &BlochVector::zero(), p).unwrap().block;
            assert_abs_diff_eq!(max_abs(&(b - v_ir_block(k))), 0.0, epsilon = 1e-15);
        }
        let x = BlochVector::new(1.0, 0.0, 0.0).unwrap();
        let b = effective_walk_block(&c, &x, 0).unwrap().block;
        let (s, co) = 0.4f64.sin_cos();
        let expect = ComplexMatrix::from_row_slice(2, 2, &[c64(co, 0.0), c64(0.0, -s), c64(0.0, -s), c64(co, 0.0)]);
        assert_abs_diff_eq!(max_abs(&(b - expect)), 0.0, epsilon = 1e-14);
        let r = BlochVector::new(0.3, -0.5, 0.2).unwrap();
        for p in c.coarse_zone() {
            let k = c.coarse_momentum(p).unwrap();
            let b = effective_walk_block(&c, &r, p).unwrap().block;
            let w = dispersion(0.2, Some(&r), k).omega_ir.unwrap();
            for phase in eigenphases(&b) {
                assert_abs_diff_eq!(phase.cos(), w.cos(), epsilon = 1e-10);
            }
            // Eq. V exp(iθH) per momentum.
            let prod = v_ir_block(k) * crate::linalg::exp_i_hermitian(&h_ir_block(&r, k), 0.2).unwrap();
            assert!(max_abs(&(prod - b)) <= 1e-12);
        }
    }

    #[test]
    fn mean_field_generator_matches_momentum_kernel() {
        let c = cfg(0.2, 4);
        let gen = h_mix_dirac(&c).unwrap();
        let fam = u_squared_factorization(&c).unwrap();
        for r in [
            BlochVector::new(1.0, 0.0, 0.0).unwrap(),
            BlochVector::new(0.3, -0.5, 0.2).unwrap(),
            BlochVector::new(0.0, 0.6, -0.7).unwrap(),
        ] {
            let rho = r.density().unwrap();
            let h_ir = mean_field_h_ir(&gen, &rho).unwrap();
            let u_ir = crate::meanfield::effective_unitary_from_generator(fam.v_ir(), &gen, &rho, c.theta()).unwrap();
            for p in c.coarse_zone() {
                let k = c.coarse_momentum(p).unwrap();
                let h = project_coarse_block(&c, &h_ir, p).unwrap().block;
                assert!(max_abs(&(h - h_ir_block(&r, k))) <= 1e-12);
                let u = project_coarse_block(&c, &u_ir, p).unwrap().block;
                let expect = effective_walk_block(&c, &r, p).unwrap().block;
                assert!(max_abs(&(u - expect)) <= 1e-10);
            }
        }
    }

    #[test]
    fn dispersion_examples() {
        for k in [-2.0, -0.3, 0.0, 0.4, 1.5, 3.0] {
            assert_abs_diff_eq!(dispersion(0.0, None, k).omega, f64::abs(k), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(dispersion(0.3, None, 0.0).omega, 0.3, epsilon = 1e-12);
        let x = BlochVector::new(1.0, 0.0, 0.0).unwrap();
        let d = dispersion(0.1, Some(&x), 0.1);
        assert!((d.omega.powi(2) - 0.02).abs() <= 1e-3);
        assert!((d.omega_ir.unwrap().powi(2) - (0.01 + 0.04)).abs() <= 1e-3);
        assert!(dispersion(0.1, None, 0.1).omega_ir.is_none());
    }

    #[test]
    fn mu_examples_and_l_independence() {
        let x = BlochVector::new(1.0, 0.0, 0.0).unwrap();
        let y = BlochVector::new(0.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(mu_dirac(&x, MuDiracMethod::ClosedForm).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mu_dirac(&BlochVector::zero(), MuDiracMethod::ClosedForm).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mu_dirac(&y, MuDiracMethod::ClosedForm).unwrap(), 1.5, epsilon = 1e-15);
        for r in [x, y, BlochVector::zero(), BlochVector::new(0.3, -0.4, 0.5).unwrap()] {
            let closed = mu_dirac(&r, MuDiracMethod::ClosedForm).unwrap();
            for l in [2, 3, 5] {
                let generic = mu_dirac(&r, MuDiracMethod::Generic(l)).unwrap();
                assert!((generic - closed).abs() <= 1e-9, "L={l}: {generic} vs {closed}");
            }
        }
        let a = mu_dirac(&BlochVector::new(0.3, 0.2, 0.0).unwrap(), MuDiracMethod::Generic(3)).unwrap();
        let b = mu_dirac(&BlochVector::new(0.3, 0.2, 0.9).unwrap(), MuDiracMethod::Generic(3)).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn strict_light_cone() {
        for theta in [0.0, 0.3, PI / 4.0] {
            assert_eq!(light_cone_violation(&cfg(theta, 3)).unwrap(), 0.0);
        }
    }
}
