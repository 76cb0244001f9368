//! The acceptance suite: one check per criterion, shared by the
//! `acceptance` test target and the CLI `selftest` command.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::channel::{
    channel_fidelity_unitary_target, controlled_unitary, factorization_diagnostic,
    haar_average_identity_check,
};
use crate::diracqw::{
    box_decomposition, effective_walk_block, eigenphases, gamma, h_ir_block, h_mix_dirac,
    project_coarse_block, u_squared_factorization, v_ir_block, walk_block, BlochVector,
    MuDiracMethod, RingWalkConfig, position_walk, mu_dirac,
};
use crate::error::Result;
use crate::linalg::{
    exp_i_hermitian, haar_unitary, max_abs, random_density, random_hermitian, seeded_rng,
    BipartiteOperator, DensityMatrix, SeededRng, C64,
};
use crate::meanfield::{
    effective_unitary_from_generator, extract_h_mix, mean_field_h_ir, mean_field_sweep, mu,
    mu_terms, MixGenerator, MuMethod, WeakCouplingFamily, DEFAULT_EXTRACTION_STEP,
};
use crate::optimizer::{maximize_fidelity, OptimizerConfig};
use crate::wavepacket::{
    build_packet, evolve_effective, evolve_exact, fit_window_start, linear_fit, reduce_to_ir,
    series_from_state, Band, GaussianPacketSpec,
};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>3} {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

type CheckFn = fn() -> Result<(bool, String)>;

pub struct Check {
    pub id: &'static str,
    pub name: &'static str,
    pub budget: Option<Duration>,
    run: CheckFn,
}

impl Check {
    pub fn run(&self) -> CheckOutcome {
        let start = Instant::now();
        let result = (self.run)();
        let elapsed = start.elapsed();
        let (mut passed, mut detail) = match result {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(budget) = self.budget {
            if elapsed > budget {
                passed = false;
                detail.push_str(&format!("; over the {} s budget", budget.as_secs()));
            }
        }
        CheckOutcome {
            id: self.id,
            name: self.name,
            passed,
            detail,
            elapsed,
            budget: self.budget,
        }
    }
}

const fn check(id: &'static str, name: &'static str, budget_s: Option<u64>, run: CheckFn) -> Check {
    Check {
        id,
        name,
        budget: match budget_s {
            Some(s) => Some(Duration::from_secs(s)),
            None => None,
        },
        run,
    }
}

pub fn all_checks() -> Vec<Check> {
    vec![
        check("1", "dirac mu closed form", Some(10), mu_closed_form),
        check("2", "box analytic sums", None, box_sums),
        check("3", "mean-field optimality", Some(60), mean_field_optimality),
        check("4", "expansion order", None, expansion_order),
        check("5", "mu method agreement", None, mu_agreement),
        check("6", "haar average identity", None, haar_identity),
        check("7", "controlled-unitary diagnostics", None, controlled_unitary_diagnostics),
        check("8", "dirac factorization", None, dirac_factorization),
        check("9", "effective walk consistency", None, effective_walk_consistency),
        check("10", "dispersion relations", None, dispersions),
        check("11a", "wavepacket desk scale", Some(30), wavepacket_desk),
        check("11b", "wavepacket full scale", Some(600), wavepacket_full),
        check("11c", "low-rank trace distance", None, low_rank_trace_distance),
        check("12", "packet UV state", None, packet_uv_state),
    ]
}

pub fn run_all() -> Vec<CheckOutcome> {
    all_checks().iter().map(Check::run).collect()
}

/// Uniform sample from the unit Bloch ball.
fn random_bloch(rng: &mut SeededRng) -> BlochVector {
    loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return BlochVector::new(v[0], v[1], v[2]).expect("inside the ball");
        }
    }
}

fn mu_closed_form() -> Result<(bool, String)> {
    let mut rng = seeded_rng(101);
    let rs: Vec<BlochVector> = (0..20).map(|_| random_bloch(&mut rng)).collect();
    let mut worst: f64 = 0.0;
    for l in [2, 4, 8] {
        let gen = h_mix_dirac(&RingWalkConfig::new(0.0, l)?)?;
        for r in &rs {
            let generic = mu(&gen, &r.density()?, MuMethod::Direct)?;
            let closed = mu_dirac(r, MuDiracMethod::ClosedForm)?;
            worst = worst.max((generic - closed).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max |mu_generic - mu_closed| = {worst:.2e} (tol 1e-9)")))
}

fn box_sums() -> Result<(bool, String)> {
    let mut rng = seeded_rng(102);
    let mut worst_sum: f64 = 0.0;
    let mut worst_terms: f64 = 0.0;
    for l in [2usize, 3, 5, 8, 13] {
        let lf = l as f64;
        let ps = -(l as i64)..(l as i64);
        let cos_sum: f64 = ps.clone().map(|p| (PI * p as f64 / (2.0 * lf)).cos().powi(2)).sum();
        worst_sum = worst_sum.max((2.0 / lf * cos_sum - 2.0).abs());
        let gen = h_mix_dirac(&RingWalkConfig::new(0.0, l)?)?;
        for _ in 0..4 {
            let r = random_bloch(&mut rng);
            let sq: f64 = ps.clone().map(|p| gamma(&r, PI * p as f64 / lf).powi(2)).sum();
            let closed = 0.5 * (3.0 * r.r_x * r.r_x + r.r_y * r.r_y);
            worst_sum = worst_sum.max((sq / (2.0 * lf) - closed).abs());
            // The same sums are the first and third terms of mu for the
            // assembled generator.
            let terms = mu_terms(&gen, &r.density()?)?;
            worst_terms = worst_terms
                .max((terms.t1 - 2.0).abs())
                .max((terms.t3 - closed).abs())
                .max(terms.t2.abs())
                .max(terms.t4.abs());
        }
        if box_decomposition(&RingWalkConfig::new(0.0, l)?).len() != 2 * l {
            return Ok((false, format!("box decomposition at L={l} has the wrong size")));
        }
    }
    Ok((
        worst_sum <= 1e-12 && worst_terms <= 1e-9,
        format!(
            "max sum residual = {worst_sum:.2e} (tol 1e-12), max mu-term residual = {worst_terms:.2e}"
        ),
    ))
}

fn weak_families() -> Result<Vec<(WeakCouplingFamily, DensityMatrix)>> {
    (0..10)
        .map(|i| {
            let fam = WeakCouplingFamily::random(2, 2, 300 + i)?;
            let mut rng = seeded_rng(400 + i);
            Ok((fam, random_density(2, &mut rng)))
        })
        .collect()
}

fn mean_field_optimality() -> Result<(bool, String)> {
    let mut worst = [f64::NEG_INFINITY; 2];
    let tols = [1e-5, 1e-8];
    for (i, (fam, rho)) in weak_families()?.iter().enumerate() {
        let gen = extract_h_mix(fam, DEFAULT_EXTRACTION_STEP)?;
        for (j, theta) in [1e-2, 1e-3].into_iter().enumerate() {
            let mf = effective_unitary_from_generator(fam.v_ir(), &gen, rho, theta)?;
            let u = fam.unitary(theta)?;
            let f_mf = channel_fidelity_unitary_target(&u, rho, &mf)?.fidelity;
            let cfg = OptimizerConfig {
                seed: 500 + i as u64,
                ..OptimizerConfig::default()
            };
            let best = maximize_fidelity(&u, rho, &cfg, Some(&mf))?;
            worst[j] = worst[j].max(best.best_fidelity - f_mf);
        }
    }
    Ok((
        worst[0] <= tols[0] && worst[1] <= tols[1],
        format!(
            "max gap = {:.2e} at theta=1e-2 (tol 1e-5), {:.2e} at theta=1e-3 (tol 1e-8)",
            worst[0], worst[1]
        ),
    ))
}

fn expansion_order() -> Result<(bool, String)> {
    let thetas = [0.04, 0.02, 0.01, 0.005];
    let mut min_slope = f64::INFINITY;
    let mut min_index = 0;
    let mut min_tail_slope = f64::INFINITY;
    for (i, (fam, rho)) in weak_families()?.into_iter().enumerate() {
        let reports = mean_field_sweep(&fam, &rho, &thetas)?;
        let pts: Vec<(f64, f64)> = reports
            .iter()
            .map(|r| {
                let predicted = 1.0 - r.theta * r.theta * r.mu_direct;
                (r.theta.ln(), (r.exact_fidelity - predicted).abs().ln())
            })
            .collect();
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        if slope < min_slope {
            min_slope = slope;
            min_index = i;
        }
        let [.., a, b] = pts[..] else { unreachable!() };
        min_tail_slope = min_tail_slope.min((b.1 - a.1) / (b.0 - a.0));
    }
    Ok((
        min_slope >= 2.7,
        format!(
            "min log-log slope = {min_slope:.3} (family {min_index}; need >= 2.7), \
             min slope over the last halving = {min_tail_slope:.3}"
        ),
    ))
}

fn mu_agreement() -> Result<(bool, String)> {
    let mut rng = seeded_rng(103);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d_ir = rng.random_range(2..=4);
        let d_uv = rng.random_range(2..=4);
        let h = random_hermitian(d_ir * d_uv, &mut rng);
        let gen = MixGenerator::new(BipartiteOperator::new(d_ir, d_uv, h)?)?.decomposed();
        let rho = random_density(d_uv, &mut rng);
        let a = mu(&gen, &rho, MuMethod::Direct)?;
        let b = mu(&gen, &rho, MuMethod::Correlator)?;
        let c = mu(&gen, &rho, MuMethod::Variance)?;
        worst = worst.max((a - b).abs()).max((a - c).abs()).max((b - c).abs());
    }
    Ok((worst <= 1e-9, format!("max pairwise difference = {worst:.2e} (tol 1e-9)")))
}

fn haar_identity() -> Result<(bool, String)> {
    let mut worst_z: f64 = 0.0;
    for i in 0..5u64 {
        let mut rng = seeded_rng(600 + i);
        let (d_ir, d_uv) = (2 + (i as usize % 2), 2);
        let u = BipartiteOperator::new(d_ir, d_uv, haar_unitary(d_ir * d_uv, &mut rng))?;
        let rho = random_density(d_uv, &mut rng);
        let u_ir = haar_unitary(d_ir, &mut rng);
        let report = haar_average_identity_check(&u, &rho, &u_ir, 2000, 700 + i)?;
        worst_z = worst_z.max(report.z_score());
    }
    Ok((worst_z <= 3.0, format!("max |z| = {worst_z:.2} over 5 instances (need <= 3)")))
}

fn controlled_unitary_diagnostics() -> Result<(bool, String)> {
    let mut rng = seeded_rng(104);
    let (u0, u1) = loop {
        let u0 = haar_unitary(2, &mut rng);
        let u1 = haar_unitary(2, &mut rng);
        if (&u0 - &u1).norm() >= 0.5 {
            break (u0, u1);
        }
    };
    let cu = controlled_unitary(&u0, &u1)?;
    let pure = DensityMatrix::basis(2, 0)?;
    let pure_report = factorization_diagnostic(&cu, &pure, &u0)?;
    let mut mixed = crate::linalg::ComplexMatrix::zeros(2, 2);
    mixed[(0, 0)] = C64::from(0.7);
    mixed[(1, 1)] = C64::from(0.3);
    let mixed = DensityMatrix::new(mixed)?;
    let best = maximize_fidelity(&cu, &mixed, &OptimizerConfig::default(), Some(&u0))?;
    let pure_ok = (pure_report.fidelity - 1.0).abs() <= 1e-9;
    let mixed_ok = best.best_fidelity < 1.0 - 1e-3;
    Ok((
        pure_ok && mixed_ok,
        format!(
            "rank-1 F = {:.12}, full-rank best F = {:.6} (need < 0.999), ||U0-U1|| = {:.3}",
            pure_report.fidelity,
            best.best_fidelity,
            (&u0 - &u1).norm()
        ),
    ))
}

fn dirac_factorization() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for l in [2, 4, 8] {
        for theta in [0.0, 0.05, 0.2, 0.4] {
            let cfg = RingWalkConfig::new(theta, l)?;
            let u = position_walk(&cfg)?;
            let u2 = u.matrix() * u.matrix();
            let rebuilt = u_squared_factorization(&cfg)?.unitary(theta)?;
            worst = worst.max(max_abs(&(rebuilt.matrix() - u2)));
        }
    }
    Ok((worst <= 1e-10, format!("max |U^2 - (V_IR x 1) U_MIX| = {worst:.2e} (tol 1e-10)")))
}

fn effective_walk_consistency() -> Result<(bool, String)> {
    let mut rng = seeded_rng(105);
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    // Four (r, θ) draws, each checked at all eight coarse momenta of L = 4
    // using the dense mean-field generator.
    for _ in 0..4 {
        let r = random_bloch(&mut rng);
        let theta = rng.random_range(0.0..PI / 4.0);
        let cfg = RingWalkConfig::new(theta, 4)?;
        let gen = h_mix_dirac(&cfg)?;
        let h_ir = mean_field_h_ir(&gen, &r.density()?)?;
        for p in cfg.coarse_zone() {
            let k = cfg.coarse_momentum(p)?;
            let h = project_coarse_block(&cfg, &h_ir, p)?.block;
            let product = v_ir_block(k) * exp_i_hermitian(&h, theta)?;
            let block = effective_walk_block(&cfg, &r, p)?.block;
            worst = worst
                .max(max_abs(&(product - block)))
                .max(max_abs(&(h - h_ir_block(&r, k))));
            samples += 1;
        }
    }
    Ok((
        worst <= 1e-10,
        format!("max block residual = {worst:.2e} over {samples} samples (tol 1e-10)"),
    ))
}

/// Distance between the eigenvalues of a 2×2 unitary and `e^{±iω}`.
fn phase_residual(u: &crate::linalg::ComplexMatrix, omega: f64) -> f64 {
    eigenphases(u)
        .iter()
        .map(|&phi| {
            let z = C64::from_polar(1.0, phi);
            (z - C64::from_polar(1.0, omega)).norm().min((z - C64::from_polar(1.0, -omega)).norm())
        })
        .fold(0.0, f64::max)
}

fn dispersions() -> Result<(bool, String)> {
    let mut rng = seeded_rng(106);
    let mut worst: f64 = 0.0;
    for theta in [0.0, 0.1, 0.2, 0.5, PI / 4.0] {
        let cfg = RingWalkConfig::new(theta, 16)?;
        for p in cfg.fine_zone() {
            let k = cfg.fine_momentum(p)?;
            let omega = (k.cos() * theta.cos()).acos();
            worst = worst.max(phase_residual(&walk_block(&cfg, p)?.block, omega));
        }
        let r = random_bloch(&mut rng);
        for p in cfg.coarse_zone() {
            let k = cfg.coarse_momentum(p)?;
            let omega_ir = (k.cos() * (gamma(&r, k) * theta).cos()).acos();
            worst = worst.max(phase_residual(&effective_walk_block(&cfg, &r, p)?.block, omega_ir));
        }
    }
    Ok((worst <= 1e-10, format!("max eigenphase residual = {worst:.2e} (tol 1e-10)")))
}

fn reference_packet() -> GaussianPacketSpec {
    GaussianPacketSpec {
        sigma_k: 0.02,
        k0: 0.2,
        x0: -200,
        band: Band::Plus,
    }
}

fn wavepacket_run(half_size: usize, n_max: usize) -> Result<(bool, String)> {
    let cfg = RingWalkConfig::new(0.2, half_size)?;
    let packet = build_packet(&cfg, &reference_packet())?;
    let r = packet.uv_bloch_vector()?;
    let series = series_from_state(&cfg, &packet, &r, n_max)?;
    let fit = linear_fit(&series, fit_window_start(n_max), n_max)?;
    let e0 = series[0].1;
    Ok((
        e0 == 0.0 && fit.slope > 0.0 && fit.r2 >= 0.9,
        format!(
            "2L = {}, E_0 = {e0}, slope = {:.3e}, R^2 = {:.4}, E_{n_max} = {:.4}",
            2 * half_size,
            fit.slope,
            fit.r2,
            series[n_max].1
        ),
    ))
}

fn wavepacket_desk() -> Result<(bool, String)> {
    wavepacket_run(200, 100)
}

fn wavepacket_full() -> Result<(bool, String)> {
    wavepacket_run(1000, 250)
}

fn low_rank_trace_distance() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for l in [8, 16, 32] {
        let cfg = RingWalkConfig::new(0.2, l)?;
        let spec = GaussianPacketSpec {
            sigma_k: 0.3,
            k0: 0.2,
            x0: 0,
            band: Band::Plus,
        };
        let packet = build_packet(&cfg, &spec)?;
        let r = packet.uv_bloch_vector()?;
        let rho = reduce_to_ir(&packet)?;
        for n in [1, 5, 20] {
            let exact = reduce_to_ir(&evolve_exact(&cfg, &packet, n)?)?;
            let eff = evolve_effective(&cfg, &r, &rho, n)?;
            let low = exact.trace_distance(&eff)?;
            let dense = 0.5
                * crate::linalg::trace_norm_hermitian(&(exact.to_dense() - eff.to_dense()));
            worst = worst.max((low - dense).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max |low-rank - dense| = {worst:.2e} (tol 1e-9)")))
}

fn packet_uv_state() -> Result<(bool, String)> {
    let cfg = RingWalkConfig::new(0.2, 200)?;
    let mut worst: f64 = 0.0;
    for k0 in [0.2, -0.4, 0.8] {
        let spec = GaussianPacketSpec { k0, ..reference_packet() };
        let r = build_packet(&cfg, &spec)?.uv_bloch_vector()?;
        // Oracle: density matrix of (|0⟩ + e^{−ik0}|1⟩)/√2.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = [C64::from(s), C64::from_polar(s, -k0)];
        let rho = crate::linalg::ComplexMatrix::from_fn(2, 2, |i, j| phi[i] * phi[j].conj());
        let oracle = BlochVector::from_density(&DensityMatrix::new(rho)?)?;
        let closed = [k0.cos(), -k0.sin(), 0.0];
        let oracle_v = [oracle.r_x, oracle.r_y, oracle.r_z];
        let got = [r.r_x, r.r_y, r.r_z];
        for c in 0..3 {
            if (oracle_v[c] - closed[c]).abs() > 1e-12 {
                return Ok((false, format!("oracle disagrees with closed form at k0 = {k0}")));
            }
            worst = worst.max((got[c] - oracle_v[c]).abs());
        }
    }
    Ok((worst <= 1e-2, format!("max |r - (cos k0, -sin k0, 0)| = {worst:.2e} (tol 1e-2)")))
}
