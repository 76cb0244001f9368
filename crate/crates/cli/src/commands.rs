use std::f64::consts::PI;

use anyhow::{bail, Result};
use serde::Serialize;

use mindiss_core::channel::{channel_fidelity_unitary_target, FidelityReport};
use mindiss_core::checks::run_all;
use mindiss_core::diracqw::{
    dispersion, effective_walk_block, gamma, mu_dirac, BlochVector, MuDiracMethod, RingWalkConfig,
};
use mindiss_core::io::{matrix_serde, read_matrix};
use mindiss_core::linalg::{random_density, seeded_rng};
use mindiss_core::meanfield::{
    effective_unitary_from_generator, extract_h_mix, mean_field_h_ir, mean_field_sweep,
    MeanFieldReport, WeakCouplingFamily, DEFAULT_EXTRACTION_STEP,
};
use mindiss_core::optimizer::{maximize_fidelity, phase_align, OptResult, OptimizerConfig};
use mindiss_core::wavepacket::{run_experiment, ExperimentConfig};
use mindiss_core::{BipartiteOperator, ComplexMatrix, DensityMatrix, Error};

use crate::args::{
    BlochArgs, DispersionArgs, EffectiveWalkArgs, FamilyArgs, FidelityArgs, MeanfieldArgs,
    MuDiracArgs, OptimizeArgs, UvStateArgs, WavepacketArgs,
};
use crate::output::{to_json, Outputs};

/// What a finished command reports back for the manifest.
pub struct Finished {
    pub seed: Option<u64>,
}

fn uv_state(args: &UvStateArgs, d_uv: usize) -> Result<DensityMatrix> {
    let rho = match (&args.rho, args.rho_seed) {
        (Some(path), _) => DensityMatrix::new(read_matrix(path)?)?,
        (None, Some(seed)) => random_density(d_uv, &mut seeded_rng(seed)),
        (None, None) => DensityMatrix::maximally_mixed(d_uv),
    };
    if rho.dim() != d_uv {
        return Err(Error::DimensionMismatch(format!(
            "UV state has dimension {}, expected {d_uv}",
            rho.dim()
        ))
        .into());
    }
    Ok(rho)
}

fn family(args: &FamilyArgs) -> Result<WeakCouplingFamily> {
    if let Some(seed) = args.random_family {
        return Ok(WeakCouplingFamily::random(args.d_ir, args.d_uv, seed)?);
    }
    let (Some(v_ir), Some(v_uv), Some(h_mix)) = (&args.v_ir, &args.v_uv, &args.h_mix) else {
        bail!(Error::InvalidArgument(
            "give either --random-family SEED or all of --v-ir, --v-uv, --h-mix".into()
        ));
    };
    let v_ir = read_matrix(v_ir)?;
    let v_uv = read_matrix(v_uv)?;
    let h = BipartiteOperator::new(v_ir.nrows(), v_uv.nrows(), read_matrix(h_mix)?)?;
    Ok(WeakCouplingFamily::exponential(v_ir, v_uv, h)?)
}

fn bloch(args: &BlochArgs) -> Result<BlochVector> {
    Ok(BlochVector::new(
        args.rx.unwrap_or(0.0),
        args.ry.unwrap_or(0.0),
        args.rz.unwrap_or(0.0),
    )?)
}

fn optional_bloch(args: &BlochArgs) -> Result<Option<BlochVector>> {
    if args.rx.is_none() && args.ry.is_none() && args.rz.is_none() {
        Ok(None)
    } else {
        bloch(args).map(Some)
    }
}

pub fn fidelity(args: &FidelityArgs, out: &mut Outputs) -> Result<Finished> {
    let u = read_matrix(&args.u)?;
    if args.d_ir == 0 || u.nrows() % args.d_ir != 0 {
        bail!(Error::DimensionMismatch(format!(
            "U has dimension {}, not divisible by d_ir = {}",
            u.nrows(),
            args.d_ir
        )));
    }
    let d_uv = u.nrows() / args.d_ir;
    let u = BipartiteOperator::new(args.d_ir, d_uv, u)?;
    let rho = uv_state(&args.uv, d_uv)?;
    let u_ir = read_matrix(&args.u_ir)?;
    let mut report: FidelityReport = channel_fidelity_unitary_target(&u, &rho, &u_ir)?;
    report.seed = args.uv.rho_seed;
    out.emit(args.out.as_deref(), &to_json(&report)?)?;
    if args.out.is_some() {
        println!("fidelity = {:.15}", report.fidelity);
    }
    Ok(Finished {
        seed: args.uv.rho_seed,
    })
}

#[derive(Serialize)]
struct MeanfieldOutput {
    #[serde(with = "matrix_serde")]
    h_ir: ComplexMatrix,
    reports: Vec<MeanFieldReport>,
}

pub fn meanfield(args: &MeanfieldArgs, out: &mut Outputs) -> Result<Finished> {
    let fam = family(&args.family)?;
    let rho = uv_state(&args.uv, fam.d_uv())?;
    let gen = extract_h_mix(&fam, DEFAULT_EXTRACTION_STEP)?;
    let output = MeanfieldOutput {
        h_ir: mean_field_h_ir(&gen, &rho)?,
        reports: mean_field_sweep(&fam, &rho, &args.thetas)?,
    };
    out.emit(args.out.as_deref(), &to_json(&output)?)?;
    if args.out.is_some() {
        for r in &output.reports {
            println!(
                "theta = {:<8} exact = {:.12}  predicted = {:.12}  residual = {:.3e}",
                r.theta, r.exact_fidelity, r.predicted_fidelity, r.residual
            );
        }
    }
    Ok(Finished {
        seed: args.family.random_family.or(args.uv.rho_seed),
    })
}

#[derive(Serialize)]
struct OptimizeOutput {
    theta: f64,
    optimizer: OptResult,
    mean_field_fidelity: f64,
    /// Optimizer fidelity minus mean-field fidelity.
    gap: f64,
    /// `min_φ ‖U_opt − e^{iφ} U_mf‖_F`.
    phase_aligned_distance: f64,
    #[serde(with = "matrix_serde")]
    mean_field_unitary: ComplexMatrix,
}

pub fn optimize(args: &OptimizeArgs, out: &mut Outputs) -> Result<Finished> {
    let fam = family(&args.family)?;
    let rho = uv_state(&args.uv, fam.d_uv())?;
    let gen = extract_h_mix(&fam, DEFAULT_EXTRACTION_STEP)?;
    let mf = effective_unitary_from_generator(fam.v_ir(), &gen, &rho, args.theta)?;
    let u = fam.unitary(args.theta)?;
    let f_mf = channel_fidelity_unitary_target(&u, &rho, &mf)?.fidelity;
    let cfg = OptimizerConfig {
        restarts: args.restarts,
        max_iters: args.iters,
        initial_step: args.step,
        grad_tolerance: args.grad_tol,
        seed: args.seed,
        ..OptimizerConfig::default()
    };
    let warm = (!args.no_warm_start).then_some(&mf);
    let result = maximize_fidelity(&u, &rho, &cfg, warm)?;
    let output = OptimizeOutput {
        theta: args.theta,
        mean_field_fidelity: f_mf,
        gap: result.best_fidelity - f_mf,
        phase_aligned_distance: phase_align(&result.best_unitary, &mf)?,
        mean_field_unitary: mf,
        optimizer: result,
    };
    out.emit(args.out.as_deref(), &to_json(&output)?)?;
    if args.out.is_some() {
        println!(
            "optimizer F = {:.12} (restart {}, converged {}), mean-field F = {:.12}, gap = {:.3e}",
            output.optimizer.best_fidelity,
            output.optimizer.restart_index,
            output.optimizer.converged,
            output.mean_field_fidelity,
            output.gap
        );
    }
    Ok(Finished {
        seed: Some(args.seed),
    })
}

#[derive(Serialize)]
struct MuDiracOutput {
    r_x: f64,
    r_y: f64,
    r_z: f64,
    mu_closed: f64,
    mu_generic: f64,
    #[serde(rename = "L")]
    half_size: usize,
}

pub fn mu_dirac_cmd(args: &MuDiracArgs, out: &mut Outputs) -> Result<Finished> {
    let r = bloch(&args.r)?;
    let output = MuDiracOutput {
        r_x: r.r_x,
        r_y: r.r_y,
        r_z: r.r_z,
        mu_closed: mu_dirac(&r, MuDiracMethod::ClosedForm)?,
        mu_generic: mu_dirac(&r, MuDiracMethod::Generic(args.half_size))?,
        half_size: args.half_size,
    };
    out.emit(args.out.as_deref(), &to_json(&output)?)?;
    if args.out.is_some() {
        println!("mu closed = {}, mu generic (L = {}) = {}", output.mu_closed, args.half_size, output.mu_generic);
    }
    Ok(Finished { seed: None })
}

pub fn dispersion_cmd(args: &DispersionArgs, out: &mut Outputs) -> Result<Finished> {
    if args.samples == 0 {
        bail!(Error::InvalidArgument("--samples must be >= 1".into()));
    }
    if !args.theta.is_finite() {
        bail!(Error::InvalidArgument("--theta must be finite".into()));
    }
    let r = optional_bloch(&args.r)?;
    let mut csv = String::from("k,omega,omega_ir\n");
    for i in 0..args.samples {
        let k = -PI + 2.0 * PI * i as f64 / args.samples as f64;
        let d = dispersion(args.theta, r.as_ref(), k);
        let ir = d.omega_ir.map(|w| w.to_string()).unwrap_or_default();
        csv.push_str(&format!("{k},{},{ir}\n", d.omega));
    }
    out.emit(args.out.as_deref(), &csv)?;
    if args.out.is_some() {
        println!("wrote {} momenta", args.samples);
    }
    Ok(Finished { seed: None })
}

#[derive(Serialize)]
struct EffectiveBlock {
    p: i64,
    k: f64,
    gamma: f64,
    omega_ir: f64,
    #[serde(with = "matrix_serde")]
    block: ComplexMatrix,
}

#[derive(Serialize)]
struct EffectiveWalkOutput {
    theta: f64,
    #[serde(rename = "L")]
    half_size: usize,
    r: BlochVector,
    blocks: Vec<EffectiveBlock>,
}

pub fn effective_walk(args: &EffectiveWalkArgs, out: &mut Outputs) -> Result<Finished> {
    let cfg = RingWalkConfig::new(args.theta, args.half_size)?;
    let r = bloch(&args.r)?;
    let blocks = cfg
        .coarse_zone()
        .map(|p| {
            let k = cfg.coarse_momentum(p)?;
            Ok(EffectiveBlock {
                p,
                k,
                gamma: gamma(&r, k),
                omega_ir: dispersion(args.theta, Some(&r), k).omega_ir.unwrap_or_default(),
                block: effective_walk_block(&cfg, &r, p)?.block,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let output = EffectiveWalkOutput {
        theta: args.theta,
        half_size: args.half_size,
        r,
        blocks,
    };
    out.emit(args.out.as_deref(), &to_json(&output)?)?;
    if args.out.is_some() {
        println!("wrote {} coarse momentum blocks", output.blocks.len());
    }
    Ok(Finished { seed: None })
}

pub fn wavepacket(args: &WavepacketArgs, out: &mut Outputs) -> Result<Finished> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(r) = optional_bloch(&args.r)? {
        config.r_x = Some(r.r_x);
        config.r_y = Some(r.r_y);
        config.r_z = Some(r.r_z);
    }
    if let Some(p) = &args.out_csv {
        config.out_csv = p.clone();
    }
    if let Some(p) = &args.out_json {
        config.out_json = p.clone();
    }
    out.claim(&config.out_csv);
    out.claim(&config.out_json);
    let result = run_experiment(&config)?;
    let s = &result.summary;
    println!(
        "E_n for n = 0..{}: slope = {:.6e}, intercept = {:.6e}, R^2 = {:.6}, max E = {:.6} ({} ms)",
        config.n_max, s.slope, s.intercept, s.r2, s.max_e, s.runtime_ms
    );
    println!(
        "effective walk Bloch vector ({:.6}, {:.6}, {:.6}){}",
        s.bloch.r_x,
        s.bloch.r_y,
        s.bloch.r_z,
        if s.bloch_from_packet { " from the packet" } else { "" }
    );
    Ok(Finished {
        seed: Some(config.seed),
    })
}

pub fn selftest() -> Result<Finished> {
    let outcomes = run_all();
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        bail!(Error::Invariant(format!("{failed} acceptance criteria failed")));
    }
    Ok(Finished { seed: None })
}
