//! Direct maximization of channel fidelity over the IR unitary group.
//!
//! This is the brute-force oracle the mean-field rule is checked against.
//! Each iterate `W` is moved along `W exp(i Σ_a c_a B_a)`, with `B_a` the
//! traceless elements of the normalized Hermitian basis (the global phase
//! does not affect fidelity). Gradients come from central finite differences
//! in `c`, steps from a backtracking line search, and every accepted iterate
//! is projected back onto the unitary group by its polar factor.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_fidelity_unitary_target, fidelity_unchecked};
use crate::error::{Error, Result};
use crate::linalg::{
    ensure_square, ensure_unitary, exp_i_hermitian, haar_unitary, hermitian_basis,
    seeded_rng, unitarity_residual, BipartiteOperator, ComplexMatrix, DensityMatrix, C64,
    EIGEN_TOL,
};

/// Largest IR dimension the oracle accepts.
pub const MAX_ORACLE_DIM: usize = 16;
/// Restarts whose best fidelity is within this of the overall best tie.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub initial_step: f64,
    pub grad_tolerance: f64,
    pub seed: u64,
    /// Finite-difference step in the exponential coordinates.
    pub fd_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_iters: 500,
            initial_step: 0.5,
            grad_tolerance: 1e-8,
            seed: 0,
            fd_step: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        if !(self.grad_tolerance > 0.0) {
            return Err(Error::InvalidArgument("grad_tolerance must be > 0".into()));
        }
        if !(self.initial_step > 0.0) || !(self.fd_step > 0.0) {
            return Err(Error::InvalidArgument("step sizes must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptResult {
    #[serde(with = "crate::io::matrix_serde")]
    pub best_unitary: ComplexMatrix,
    pub best_fidelity: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    pub seed: u64,
    /// Best fidelity reached by each restart, in restart order.
    pub restart_fidelities: Vec<f64>,
}

/// Outcome of one ascent run.
#[derive(Debug, Clone)]
pub struct AscentTrace {
    pub unitary: ComplexMatrix,
    pub fidelity: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

/// Nearest unitary (polar factor) of `w`.
fn polar_unitary(w: &ComplexMatrix) -> ComplexMatrix {
    let svd = w.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    u * v_t
}

struct Problem<'a> {
    u: &'a BipartiteOperator,
    rho_uv: &'a DensityMatrix,
    directions: Vec<ComplexMatrix>,
    /// `exp(+i h B_a)` and `exp(−i h B_a)` for the finite-difference step `h`.
    probes: Vec<(ComplexMatrix, ComplexMatrix)>,
}

impl<'a> Problem<'a> {
    fn new(u: &'a BipartiteOperator, rho_uv: &'a DensityMatrix, fd_step: f64) -> Result<Self> {
        let basis = hermitian_basis(u.d_ir())?;
        let directions: Vec<ComplexMatrix> = basis.elements()[1..].to_vec();
        let probes = directions
            .iter()
            .map(|b| Ok((exp_i_hermitian(b, fd_step)?, exp_i_hermitian(b, -fd_step)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            u,
            rho_uv,
            directions,
            probes,
        })
    }

    fn objective(&self, w: &ComplexMatrix) -> f64 {
        fidelity_unchecked(self.u, self.rho_uv, w)
    }

    fn gradient(&self, w: &ComplexMatrix, fd_step: f64) -> Vec<f64> {
        self.probes
            .iter()
            .map(|(plus, minus)| {
                (self.objective(&(w * plus)) - self.objective(&(w * minus))) / (2.0 * fd_step)
            })
            .collect()
    }

    fn generator(&self, coeffs: &[f64]) -> ComplexMatrix {
        let d = self.u.d_ir();
        self.directions
            .iter()
            .zip(coeffs)
            .fold(ComplexMatrix::zeros(d, d), |acc, (b, &c)| acc + b * C64::from(c))
    }

    fn ascend(&self, start: ComplexMatrix, cfg: &OptimizerConfig) -> Result<AscentTrace> {
        let mut w = polar_unitary(&start);
        let mut f = self.objective(&w);
        let mut history = vec![f];
        let mut step = cfg.initial_step;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < cfg.max_iters {
            let g = self.gradient(&w, cfg.fd_step);
            let g_norm_sq: f64 = g.iter().map(|x| x * x).sum();
            if g_norm_sq.sqrt() <= cfg.grad_tolerance {
                converged = true;
                break;
            }
            iterations += 1;
            let direction = self.generator(&g);
            let mut t = step;
            let mut accepted = None;
            while t * g_norm_sq.sqrt() > 1e-15 {
                let candidate = polar_unitary(&(&w * exp_i_hermitian(&direction, t)?));
                let fc = self.objective(&candidate);
                if fc >= f + 1e-4 * t * g_norm_sq {
                    accepted = Some((candidate, fc, t));
                    break;
                }
                t *= 0.5;
            }
            // Armijo alone happily accepts overshooting steps; keep halving
            // while that still improves the objective.
            while let Some((_, best_f, best_t)) = &accepted {
                let half = 0.5 * best_t;
                let candidate = polar_unitary(&(&w * exp_i_hermitian(&direction, half)?));
                let fc = self.objective(&candidate);
                if fc > *best_f {
                    accepted = Some((candidate, fc, half));
                } else {
                    break;
                }
            }
            match accepted {
                Some((candidate, fc, t)) => {
                    w = candidate;
                    f = fc;
                    history.push(f);
                    step = (2.0 * t).min(4.0 * cfg.initial_step);
                }
                // No ascent left above the objective's noise floor.
                None => break,
            }
        }
        Ok(AscentTrace {
            unitary: w,
            fidelity: f,
            iterations,
            converged,
            history,
        })
    }
}

/// A single ascent from `start`; exposed for monotonicity checks.
pub fn ascend_from(
    u: &BipartiteOperator,
    rho_uv: &DensityMatrix,
    start: &ComplexMatrix,
    cfg: &OptimizerConfig,
) -> Result<AscentTrace> {
    cfg.validate()?;
    channel_fidelity_unitary_target(u, rho_uv, start)?;
    Problem::new(u, rho_uv, cfg.fd_step)?.ascend(start.clone(), cfg)
}

/// Best channel fidelity over IR unitaries, by multi-start ascent.
///
/// Restart 0 starts from `warm_start` when given; the others start from
/// Haar-random unitaries drawn from stream `r` of the configured seed.
/// Restarts run on the current rayon pool and are merged by index.
pub fn maximize_fidelity(
    u: &BipartiteOperator,
    rho_uv: &DensityMatrix,
    cfg: &OptimizerConfig,
    warm_start: Option<&ComplexMatrix>,
) -> Result<OptResult> {
    cfg.validate()?;
    if u.d_ir() > MAX_ORACLE_DIM {
        return Err(Error::InvalidArgument(format!(
            "d_ir = {} exceeds the oracle limit {MAX_ORACLE_DIM}",
            u.d_ir()
        )));
    }
    if let Some(w) = warm_start {
        if ensure_square(w, "warm start")? != u.d_ir() {
            return Err(Error::DimensionMismatch("warm start has the wrong dimension".into()));
        }
        ensure_unitary(w, EIGEN_TOL)?;
    }
    // Validates u and rho_uv once for all restarts.
    channel_fidelity_unitary_target(u, rho_uv, &crate::linalg::identity(u.d_ir()))?;
    let problem = Problem::new(u, rho_uv, cfg.fd_step)?;

    let traces: Vec<AscentTrace> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = match (r, warm_start) {
                (0, Some(w)) => w.clone(),
                _ => {
                    let mut rng = seeded_rng(cfg.seed);
                    rng.set_stream(r as u64);
                    // Burn one draw so stream 0 differs from a plain seeded_rng.
                    let _: u64 = rng.random();
                    haar_unitary(u.d_ir(), &mut rng)
                }
            };
            problem.ascend(start, cfg)
        })
        .collect::<Result<_>>()?;

    let best = traces.iter().map(|t| t.fidelity).fold(f64::NEG_INFINITY, f64::max);
    let restart_index = traces
        .iter()
        .position(|t| t.fidelity >= best - TIE_TOL)
        .expect("at least one restart");
    let chosen = &traces[restart_index];
    if chosen.fidelity > 1.0 + 1e-9 {
        return Err(Error::Invariant(format!("optimizer fidelity {} exceeds 1", chosen.fidelity)));
    }
    let residual = unitarity_residual(&chosen.unitary);
    if residual > 1e-9 {
        return Err(Error::Invariant(format!("optimizer output not unitary ({residual:.3e})")));
    }
    Ok(OptResult {
        best_unitary: chosen.unitary.clone(),
        best_fidelity: chosen.fidelity,
        iterations: chosen.iterations,
        converged: chosen.converged,
        restart_index,
        seed: cfg.seed,
        restart_fidelities: traces.iter().map(|t| t.fidelity).collect(),
    })
}

/// `min_φ ‖a − e^{iφ} b‖_F = sqrt(‖a‖² + ‖b‖² − 2|Tr[b†a]|)`.
pub fn phase_align(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "cannot align {:?} with {:?}",
            a.shape(),
            b.shape()
        )));
    }
    ensure_unitary(a, 1e-9)?;
    ensure_unitary(b, 1e-9)?;
    let overlap = (b.adjoint() * a).trace().norm();
    Ok((a.norm_squared() + b.norm_squared() - 2.0 * overlap).max(0.0).sqrt())
}
