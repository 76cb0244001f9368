//! Gaussian wave packets of the Dirac walk and the error of the
//! coarse-grained dynamics over time.
//!
//! A packet is prepared on one band of the fine walk, evolved exactly with
//! double steps `U²`, and reduced to the IR factor. In parallel the reduced
//! initial state is evolved with the effective walk `U_IR`. The trace
//! distance `E_n` between the two IR states after `n` double steps measures
//! how well the effective walk tracks the exact one.
//!
//! Everything runs in momentum space with FFTs between representations, and
//! the reduced states are kept as rank-≤2 factorizations, so one step costs
//! `O(L log L)` regardless of the chain length.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::diracqw::{dispersion, effective_walk_block, walk_matrix, BlochVector, RingWalkConfig};
use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_eigen, ComplexMatrix, DensityMatrix, C64};

/// Minimum number of momentum grid points within `±3σ_k` of the center.
pub const MIN_GRID_POINTS: usize = 8;
/// Above this width the packet's UV part is no longer close to a product.
pub const NARROW_PACKET_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    /// Eigenvalue `e^{−iω}`.
    Plus,
    /// Eigenvalue `e^{+iω}`.
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacketSpec {
    pub sigma_k: f64,
    pub k0: f64,
    pub x0: i64,
    pub band: Band,
}

impl GaussianPacketSpec {
    pub fn validate(&self, cfg: &RingWalkConfig) -> Result<()> {
        if !(self.sigma_k > 0.0) || !self.k0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "packet needs sigma_k > 0 and finite k0, got sigma_k = {}, k0 = {}",
                self.sigma_k, self.k0
            )));
        }
        let spacing = PI / (2 * cfg.half_size()) as f64;
        let points = (6.0 * self.sigma_k / spacing).floor() as usize;
        if points < MIN_GRID_POINTS {
            return Err(Error::InvalidArgument(format!(
                "sigma_k = {} is resolved by only {points} momentum points on a ring with L = {} \
                 (need {MIN_GRID_POINTS})",
                self.sigma_k,
                cfg.half_size()
            )));
        }
        Ok(())
    }

    /// Whether the packet is narrow enough for the UV part to factor out.
    pub fn is_narrow(&self) -> bool {
        self.sigma_k <= NARROW_PACKET_SIGMA
    }
}

#[derive(Debug, Clone)]
pub struct BandEigensystem {
    pub omega: f64,
    pub w_plus: [C64; 2],
    pub w_minus: [C64; 2],
}

/// Normalized eigenvectors of the walk block at momentum `k`:
/// `w_± ∝ (−i sin θ, −i(±sin ω + cos θ sin k))` with eigenvalue `e^{∓iω}`.
pub fn band_eigensystem_at(theta: f64, k: f64) -> BandEigensystem {
    let omega = dispersion(theta, None, k).omega;
    let (s, c) = theta.sin_cos();
    let u = walk_matrix(theta, k);
    let vector = |sign: f64| -> [C64; 2] {
        let lambda = C64::from_polar(1.0, -sign * omega);
        let primary = [c64(0.0, -s), c64(0.0, -(sign * omega.sin() + c * k.sin()))];
        // Second-row form of the same eigenvector, used where the first
        // vanishes (massless walk).
        let alternative = [lambda - u[(1, 1)], u[(1, 0)]];
        let norm = |v: &[C64; 2]| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        let v = if norm(&primary) > 1e-8 {
            primary
        } else if norm(&alternative) > 1e-8 {
            alternative
        } else if sign > 0.0 {
            [C64::from(1.0), C64::from(0.0)]
        } else {
            [C64::from(0.0), C64::from(1.0)]
        };
        let n = norm(&v);
        [v[0] / n, v[1] / n]
    };
    BandEigensystem {
        omega,
        w_plus: vector(1.0),
        w_minus: vector(-1.0),
    }
}

pub fn band_eigensystem(cfg: &RingWalkConfig, p: i64) -> Result<BandEigensystem> {
    Ok(band_eigensystem_at(cfg.theta(), cfg.fine_momentum(p)?))
}

/// Amplitudes `ψ(x, c)` on the fine ring, index `2x + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingState {
    sites: usize,
    amps: Vec<C64>,
}

impl RingState {
    pub fn new(sites: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 2 * sites {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {sites} sites with a coin",
                amps.len()
            )));
        }
        let state = Self { sites, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state norm {norm} is not 1")));
        }
        Ok(state)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, x: usize, coin: usize) -> C64 {
        self.amps[2 * x + coin]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn site_density(&self) -> Vec<f64> {
        self.amps.chunks(2).map(|a| a[0].norm_sqr() + a[1].norm_sqr()).collect()
    }

    /// Mean of `x − reference` with the offset wrapped into `[−N/2, N/2)`.
    pub fn mean_offset(&self, reference: i64) -> f64 {
        let n = self.sites as i64;
        self.site_density()
            .iter()
            .enumerate()
            .map(|(x, w)| w * ((x as i64 - reference + n / 2).rem_euclid(n) - n / 2) as f64)
            .sum()
    }

    pub fn with_global_phase(&self, phi: f64) -> Self {
        let z = C64::from_polar(1.0, phi);
        Self {
            sites: self.sites,
            amps: self.amps.iter().map(|a| a * z).collect(),
        }
    }

    /// Reduced state `Tr_IR |ψ⟩⟨ψ|` of the parity bit as a Bloch vector.
    pub fn uv_bloch_vector(&self) -> Result<BlochVector> {
        let mut rho = ComplexMatrix::zeros(2, 2);
        for x_ir in 0..self.sites / 2 {
            for c in 0..2 {
                for u in 0..2 {
                    for u2 in 0..2 {
                        rho[(u, u2)] += self.amplitude(2 * x_ir + u, c)
                            * self.amplitude(2 * x_ir + u2, c).conj();
                    }
                }
            }
        }
        BlochVector::from_density(&DensityMatrix::new(rho)?)
    }
}

/// FFTs between position and momentum on rings of `n` sites.
///
/// `ψ(x) = n^{−1/2} Σ_p ψ̃(p) e^{−ikx}` (a forward DFT) and its inverse; bin
/// `j` holds momentum `p ≡ j (mod n)`.
#[derive(Clone)]
struct Transform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transform {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn to_position(&self, buf: &mut [C64]) {
        self.forward.process(buf);
        let s = (self.n as f64).sqrt().recip();
        buf.iter_mut().for_each(|z| *z *= s);
    }

    fn to_momentum(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
        let s = (self.n as f64).sqrt().recip();
        buf.iter_mut().for_each(|z| *z *= s);
    }

    /// Applies a transform to each coin component of an interleaved vector.
    fn per_coin(&self, interleaved: &[C64], to_position: bool) -> Vec<C64> {
        let mut out = vec![C64::from(0.0); interleaved.len()];
        for c in 0..2 {
            let mut buf: Vec<C64> = interleaved.iter().skip(c).step_by(2).copied().collect();
            if to_position {
                self.to_position(&mut buf);
            } else {
                self.to_momentum(&mut buf);
            }
            for (j, z) in buf.into_iter().enumerate() {
                out[2 * j + c] = z;
            }
        }
        out
    }
}

/// Momentum in radians of FFT bin `j` on a ring of `n` sites.
fn bin_momentum(j: usize, n: usize) -> f64 {
    let p = if j >= n / 2 { j as i64 - n as i64 } else { j as i64 };
    2.0 * PI * p as f64 / n as f64
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Momentum-space packet `ψ̃(p) w_band(k_p)`, bins as in [`Transform`].
fn packet_momentum(cfg: &RingWalkConfig, spec: &GaussianPacketSpec) -> Vec<C64> {
    let n = cfg.sites();
    let mut amps = vec![C64::from(0.0); 2 * n];
    for j in 0..n {
        let k = bin_momentum(j, n);
        let dk = wrap_angle(k - spec.k0);
        let envelope = C64::from_polar(
            (-dk * dk / (2.0 * spec.sigma_k * spec.sigma_k)).exp(),
            k * spec.x0 as f64,
        );
        let eig = band_eigensystem_at(cfg.theta(), k);
        let w = match spec.band {
            Band::Plus => eig.w_plus,
            Band::Minus => eig.w_minus,
        };
        amps[2 * j] = envelope * w[0];
        amps[2 * j + 1] = envelope * w[1];
    }
    let norm = amps.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    amps
}

/// Gaussian packet on one band, centred at `k0` in momentum and `x0` in
/// position.
pub fn build_packet(cfg: &RingWalkConfig, spec: &GaussianPacketSpec) -> Result<RingState> {
    spec.validate(cfg)?;
    let t = Transform::new(cfg.sites());
    let pos = t.per_coin(&packet_momentum(cfg, spec), true);
    RingState::new(cfg.sites(), pos)
}

/// `U²` at each momentum bin of the fine ring.
fn double_step_blocks(cfg: &RingWalkConfig) -> Vec<ComplexMatrix> {
    let n = cfg.sites();
    (0..n)
        .map(|j| {
            let u = walk_matrix(cfg.theta(), bin_momentum(j, n));
            &u * &u
        })
        .collect()
}

fn apply_blocks(blocks: &[ComplexMatrix], amps: &mut [C64]) {
    for (b, a) in blocks.iter().zip(amps.chunks_mut(2)) {
        let (a0, a1) = (a[0], a[1]);
        a[0] = b[(0, 0)] * a0 + b[(0, 1)] * a1;
        a[1] = b[(1, 0)] * a0 + b[(1, 1)] * a1;
    }
}

fn block_power(b: &ComplexMatrix, mut n: usize) -> ComplexMatrix {
    let mut result = ComplexMatrix::identity(2, 2);
    let mut base = b.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        n >>= 1;
    }
    result
}

/// Exact evolution by `n` double steps `U²`.
pub fn evolve_exact(cfg: &RingWalkConfig, state: &RingState, double_steps: usize) -> Result<RingState> {
    if state.sites != cfg.sites() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} sites, ring has {}",
            state.sites,
            cfg.sites()
        )));
    }
    let t = Transform::new(cfg.sites());
    let mut mom = t.per_coin(&state.amps, false);
    let blocks: Vec<ComplexMatrix> =
        double_step_blocks(cfg).iter().map(|b| block_power(b, double_steps)).collect();
    apply_blocks(&blocks, &mut mom);
    RingState::new(cfg.sites(), t.per_coin(&mom, true))
}

/// `Σ_a w_a |v_a⟩⟨v_a|` with unit vectors `v_a` on the IR space.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankDensity {
    dim: usize,
    factors: Vec<Vec<C64>>,
    weights: Vec<f64>,
}

impl LowRankDensity {
    /// Builds `Σ_a |u_a⟩⟨u_a|` from unnormalized vectors.
    pub fn from_vectors(dim: usize, vectors: Vec<Vec<C64>>) -> Result<Self> {
        if vectors.len() > 4 {
            return Err(Error::InvalidArgument("at most four factors are supported".into()));
        }
        let mut factors = Vec::with_capacity(vectors.len());
        let mut weights = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "factor of length {} in dimension {dim}",
                    v.len()
                )));
            }
            let w: f64 = v.iter().map(C64::norm_sqr).sum();
            let scale = if w > 0.0 { w.sqrt().recip() } else { 0.0 };
            factors.push(v.iter().map(|z| z * scale).collect());
            weights.push(w);
        }
        Ok(Self { dim, factors, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[Vec<C64>] {
        &self.factors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn trace(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for (v, &w) in self.factors.iter().zip(&self.weights) {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    m[(i, j)] += v[i] * v[j].conj() * w;
                }
            }
        }
        m
    }

    /// `½‖ρ − σ‖₁` through the rank-≤(r+s) factorization `ρ − σ = V S V†`:
    /// with `V = QR`, the nonzero spectrum equals that of `R S R†`.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "trace distance between dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        if self == other {
            return Ok(0.0);
        }
        let cols = self.factors.len() + other.factors.len();
        let mut v = ComplexMatrix::zeros(self.dim, cols);
        let mut signs = Vec::with_capacity(cols);
        for (col, (f, &w, sign)) in self
            .factors
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| (f, w, 1.0))
            .chain(other.factors.iter().zip(&other.weights).map(|(f, w)| (f, w, -1.0)))
            .enumerate()
        {
            let s = w.sqrt();
            for i in 0..self.dim {
                v[(i, col)] = f[i] * s;
            }
            signs.push(sign);
        }
        let r = v.qr().r();
        let s = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            cols,
            signs.iter().map(|&x| C64::from(x)),
        ));
        let core = &r * s * r.adjoint();
        let (values, _) = hermitian_eigen(&core);
        Ok((0.5 * values.iter().map(|x| x.abs()).sum::<f64>()).clamp(0.0, 1.0))
    }
}

/// `Tr_UV |ψ⟩⟨ψ|` on the IR space (index `2x_IR + coin`): one factor per
/// parity of the site.
pub fn reduce_to_ir(state: &RingState) -> Result<LowRankDensity> {
    let coarse = state.sites / 2;
    let slices = (0..2)
        .map(|x_uv| {
            (0..2 * coarse)
                .map(|i| state.amplitude(2 * (i / 2) + x_uv, i % 2))
                .collect()
        })
        .collect();
    LowRankDensity::from_vectors(2 * coarse, slices)
}

fn effective_blocks(cfg: &RingWalkConfig, r: &BlochVector) -> Result<Vec<ComplexMatrix>> {
    let n = cfg.coarse_sites();
    (0..n)
        .map(|j| {
            let p = if j >= n / 2 { j as i64 - n as i64 } else { j as i64 };
            Ok(effective_walk_block(cfg, r, p)?.block)
        })
        .collect()
}

/// Evolves every factor by `n` steps of the effective walk.
pub fn evolve_effective(
    cfg: &RingWalkConfig,
    r: &BlochVector,
    rho: &LowRankDensity,
    steps: usize,
) -> Result<LowRankDensity> {
    if rho.dim != 2 * cfg.coarse_sites() {
        return Err(Error::DimensionMismatch(format!(
            "IR state has dimension {}, ring needs {}",
            rho.dim,
            2 * cfg.coarse_sites()
        )));
    }
    let t = Transform::new(cfg.coarse_sites());
    let blocks: Vec<ComplexMatrix> =
        effective_blocks(cfg, r)?.iter().map(|b| block_power(b, steps)).collect();
    let factors = rho
        .factors
        .iter()
        .map(|f| {
            let mut mom = t.per_coin(f, false);
            apply_blocks(&blocks, &mut mom);
            t.per_coin(&mom, true)
        })
        .collect();
    Ok(LowRankDensity {
        dim: rho.dim,
        factors,
        weights: rho.weights.clone(),
    })
}

/// `E_n` for `n = 0..=n_max`: exact double steps against effective steps.
pub fn trace_distance_series(
    cfg: &RingWalkConfig,
    spec: &GaussianPacketSpec,
    r: &BlochVector,
    n_max: usize,
) -> Result<Vec<(usize, f64)>> {
    let packet = build_packet(cfg, spec)?;
    series_from_state(cfg, &packet, r, n_max)
}

/// [`trace_distance_series`] for an arbitrary initial state.
pub fn series_from_state(
    cfg: &RingWalkConfig,
    state: &RingState,
    r: &BlochVector,
    n_max: usize,
) -> Result<Vec<(usize, f64)>> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be >= 1".into()));
    }
    let fine = Transform::new(cfg.sites());
    let coarse = Transform::new(cfg.coarse_sites());
    let exact_blocks = double_step_blocks(cfg);
    let eff_blocks = effective_blocks(cfg, r)?;

    let mut exact_mom = fine.per_coin(&state.amps, false);
    let initial = reduce_to_ir(state)?;
    let mut eff_mom: Vec<Vec<C64>> =
        initial.factors.iter().map(|f| coarse.per_coin(f, false)).collect();

    let mut series = Vec::with_capacity(n_max + 1);
    series.push((0, initial.trace_distance(&initial)?));
    for n in 1..=n_max {
        apply_blocks(&exact_blocks, &mut exact_mom);
        let exact = RingState {
            sites: cfg.sites(),
            amps: fine.per_coin(&exact_mom, true),
        };
        let exact_ir = reduce_to_ir(&exact)?;
        for f in &mut eff_mom {
            apply_blocks(&eff_blocks, f);
        }
        let effective = LowRankDensity {
            dim: initial.dim,
            factors: eff_mom.iter().map(|f| coarse.per_coin(f, true)).collect(),
            weights: initial.weights.clone(),
        };
        series.push((n, exact_ir.trace_distance(&effective)?));
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares over the points with `lo ≤ n ≤ hi`.
pub fn linear_fit(series: &[(usize, f64)], lo: usize, hi: usize) -> Result<LinearFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(n, _)| (lo..=hi).contains(n))
        .map(|&(n, e)| (n as f64, e))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "fit window [{lo}, {hi}] holds {} points, need 3",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept, r2 })
}

/// First `n` of the linear-fit window for a series of length `n_max`.
pub fn fit_window_start(n_max: usize) -> usize {
    20.min(n_max / 2)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Half size: the ring has `4L` sites and the coarse ring `2L`.
    #[serde(rename = "L")]
    pub half_size: usize,
    pub theta: f64,
    pub sigma_k: f64,
    pub k0: f64,
    pub x0: i64,
    pub band: Band,
    pub n_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_z: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    pub out_csv: PathBuf,
    pub out_json: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn ring(&self) -> Result<RingWalkConfig> {
        RingWalkConfig::new(self.theta, self.half_size)
    }

    pub fn packet(&self) -> GaussianPacketSpec {
        GaussianPacketSpec {
            sigma_k: self.sigma_k,
            k0: self.k0,
            x0: self.x0,
            band: self.band,
        }
    }

    /// The Bloch vector given in the config, with missing components zero;
    /// `None` when no component is set.
    pub fn explicit_bloch(&self) -> Result<Option<BlochVector>> {
        if self.r_x.is_none() && self.r_y.is_none() && self.r_z.is_none() {
            return Ok(None);
        }
        BlochVector::new(
            self.r_x.unwrap_or(0.0),
            self.r_y.unwrap_or(0.0),
            self.r_z.unwrap_or(0.0),
        )
        .map(Some)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub params: ExperimentConfig,
    /// Bloch vector used by the effective walk.
    pub bloch: BlochVector,
    pub bloch_from_packet: bool,
    pub narrow_packet: bool,
    pub fit_start: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    #[serde(rename = "max_E")]
    pub max_e: f64,
    pub runtime_ms: u64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub series: Vec<(usize, f64)>,
    pub summary: ExperimentSummary,
}

/// Runs the series without touching the filesystem.
pub fn compute_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let cfg = config.ring()?;
    let spec = config.packet();
    let packet = build_packet(&cfg, &spec)?;
    let (bloch, from_packet) = match config.explicit_bloch()? {
        Some(r) => (r, false),
        None => (packet.uv_bloch_vector()?, true),
    };
    let series = series_from_state(&cfg, &packet, &bloch, config.n_max)?;
    let fit_start = fit_window_start(config.n_max);
    let fit = linear_fit(&series, fit_start, config.n_max)?;
    let max_e = series.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(ExperimentOutput {
        series,
        summary: ExperimentSummary {
            params: config.clone(),
            bloch,
            bloch_from_packet: from_packet,
            narrow_packet: spec.is_narrow(),
            fit_start,
            slope: fit.slope,
            intercept: fit.intercept,
            r2: fit.r2,
            max_e,
            runtime_ms: start.elapsed().as_millis() as u64,
            seed: config.seed,
        },
    })
}

pub fn series_csv(series: &[(usize, f64)]) -> String {
    let mut out = String::from("n,trace_distance\n");
    for (n, e) in series {
        out.push_str(&format!("{n},{e:e}\n"));
    }
    out
}

/// Runs the experiment and writes the CSV series and JSON summary named in
/// the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let output = compute_experiment(config)?;
    fs::write(&config.out_csv, series_csv(&output.series)).map_err(|e| Error::io(&config.out_csv, e))?;
    let json = serde_json::to_string_pretty(&output.summary)
        .map_err(|e| Error::Invariant(format!("summary serialization failed: {e}")))?;
    fs::write(&config.out_json, json + "\n").map_err(|e| Error::io(&config.out_json, e))?;
    Ok(output)
}
