mod args;
mod commands;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use output::{Outputs, RunManifest};

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<mindiss_core::Error>() {
            return if e.is_invariant_violation() { 2 } else { 1 };
        }
    }
    1
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Fidelity(_) => "fidelity",
        Command::Meanfield(_) => "meanfield",
        Command::Optimize(_) => "optimize",
        Command::MuDirac(_) => "mu-dirac",
        Command::Dispersion(_) => "dispersion",
        Command::EffectiveWalk(_) => "effective-walk",
        Command::Wavepacket(_) => "wavepacket",
        Command::Selftest => "selftest",
    }
}

fn params(cmd: &Command) -> serde_json::Value {
    let value = match cmd {
        Command::Fidelity(a) => serde_json::to_value(a),
        Command::Meanfield(a) => serde_json::to_value(a),
        Command::Optimize(a) => serde_json::to_value(a),
        Command::MuDirac(a) => serde_json::to_value(a),
        Command::Dispersion(a) => serde_json::to_value(a),
        Command::EffectiveWalk(a) => serde_json::to_value(a),
        Command::Wavepacket(a) => serde_json::to_value(a),
        Command::Selftest => Ok(serde_json::Value::Null),
    };
    value.unwrap_or(serde_json::Value::Null)
}

fn dispatch(cmd: &Command, out: &mut Outputs) -> Result<commands::Finished> {
    match cmd {
        Command::Fidelity(a) => commands::fidelity(a, out),
        Command::Meanfield(a) => commands::meanfield(a, out),
        Command::Optimize(a) => commands::optimize(a, out),
        Command::MuDirac(a) => commands::mu_dirac_cmd(a, out),
        Command::Dispersion(a) => commands::dispersion_cmd(a, out),
        Command::EffectiveWalk(a) => commands::effective_walk(a, out),
        Command::Wavepacket(a) => commands::wavepacket(a, out),
        Command::Selftest => commands::selftest(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let started = Instant::now();
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be >= 1");
        return ExitCode::from(1);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    let mut out = Outputs::default();
    let result = dispatch(&cli.command, &mut out).and_then(|done| {
        RunManifest::new(
            command_name(&cli.command),
            params(&cli.command),
            done.seed,
            out.paths(),
            started,
            cli.jobs,
        )
        .emit(cli.manifest.as_deref())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            out.remove_all();
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
