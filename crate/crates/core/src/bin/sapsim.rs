use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sap_core::runner::{
    busch_table, decompose, run_dir_name, run_protocol, run_three_mode, sweep_eg, write_busch_csv, RunConfig, RunError,
    Stage,
};
use sap_core::{Execution, SapError};

#[derive(Parser)]
#[command(name = "sapsim", version, about = "Adiabatic passage of an interacting atom pair in a triple well")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; defaults are used for missing fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` in the configuration)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and row-parallel kernels
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one protocol at one E_g
    Run(Common),
    /// Run the protocol over a list of E_g values
    Sweep(Common),
    /// Entropy of the |2 0 0>, |1 0 1> and NOON reference states
    Decompose(Common),
    /// Integrate the three-mode model
    ThreeMode(Common),
    /// Print the g <-> E_g table
    Busch(Common),
}

fn load(c: &Common) -> Result<(RunConfig, Option<PathBuf>), RunError> {
    let mut config = match &c.config {
        Some(p) => RunConfig::load(p).map_err(|source| RunError { stage: Stage::Config, source })?,
        None => RunConfig::default(),
    };
    if c.workers.is_some() {
        config.workers = c.workers;
    }
    if let Some(w) = config.workers {
        if w == 0 {
            return Err(RunError { stage: Stage::Config, source: SapError::InvalidConfig("workers must be at least 1".into()) });
        }
        // sizes the global pool used by the row-parallel kernels; ignore if already set
        #[cfg(feature = "parallel")]
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let out = c.out.clone().or_else(|| config.out_dir.clone());
    Ok((config, out))
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run(c) => {
            let (config, out) = load(&c)?;
            let values = config.run_values();
            if values.len() != 1 {
                return Err(RunError {
                    stage: Stage::Config,
                    source: SapError::InvalidConfig(format!("run takes a single e_g, got {}; use sweep", values.len())),
                });
            }
            let e = values[0];
            let dir = out.map(|d| d.join(run_dir_name(config.protocol, e)));
            let exec = if config.workers == Some(1) { Execution::Sequential } else { Execution::default() };
            let rep = run_protocol(&config, e, exec, dir.as_deref())?;
            let s = &rep.summary;
            println!(
                "{} E_g={} fidelity={:.6} S_initial={:.6} S_final={:.6} S_max={:.6}",
                s.protocol, s.e_g, s.fidelity, s.s_initial, s.s_final, s.s_max
            );
        }
        Command::Sweep(c) => {
            let (config, out) = load(&c)?;
            let rows = sweep_eg(&config, out.as_deref())?;
            println!("e_g,fidelity,s_initial,s_final,s_max,flagged");
            for r in &rows {
                match &r.error {
                    None => println!("{},{:.6},{:.6},{:.6},{:.6},{}", r.e_g, r.fidelity, r.s_initial, r.s_final, r.s_max, r.flagged),
                    Some(e) => println!("{},failed: {e}", r.e_g),
                }
            }
        }
        Command::Decompose(c) => {
            let (config, out) = load(&c)?;
            println!("e_g,s_int,s_dist,s_noon,residual");
            for r in decompose(&config, out.as_deref())? {
                println!("{},{:.6},{:.6},{:.6},{:.2e}", r.e_g, r.s_int, r.s_dist, r.s_noon, r.residual);
            }
        }
        Command::ThreeMode(c) => {
            let (config, out) = load(&c)?;
            let s = run_three_mode(&config, out.as_deref())?;
            println!("p_l={:.6} p_m={:.6} p_r={:.6} max_p_m={:.3e}", s.p_l, s.p_m, s.p_r, s.max_p_m);
        }
        Command::Busch(c) => {
            let (_, out) = load(&c)?;
            let table = busch_table();
            let stdout = std::io::stdout();
            write_busch_csv(stdout.lock(), &table).map_err(|source| RunError { stage: Stage::Output, source })?;
            if let Some(dir) = out {
                let write = || -> Result<(), SapError> {
                    std::fs::create_dir_all(&dir)?;
                    write_busch_csv(std::fs::File::create(dir.join("busch.csv"))?, &table)
                };
                write().map_err(|source| RunError { stage: Stage::Output, source })?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sapsim: {e}");
            ExitCode::from(match e.stage {
                Stage::Config => 2,
                Stage::Preparation => 3,
                Stage::Propagation => 4,
                Stage::Observables => 5,
                Stage::Output => 6,
            })
        }
    }
}
