use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thermovi::config::{load_scenario, ConfigError, Scenario};
use thermovi::driver::{self, DriverError, StabilityOutcome};
use thermovi_core::{Mesh, Scheme};

#[derive(Parser)]
#[command(
    name = "thermovi",
    version,
    about = "Explicit variational integrators for thermo-elastic solids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory for diagnostics and snapshots.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write a VTK snapshot every N steps (0 disables).
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Time integrator.
    #[arg(long, value_parser = ["f10", "f01", "euler-a", "euler-b"])]
    integrator: Option<String>,
}

impl Common {
    fn apply(&self, scenario: &mut Scenario) {
        if let Some(n) = self.snapshot_every {
            scenario.snapshot_every = n;
        }
        if let Some(name) = &self.integrator {
            scenario.scheme = name.parse::<Scheme>().expect("validated by clap");
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, writing diagnostics.csv and optional snapshots.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Refine a harmonic scenario repeatedly and report observed orders.
    Converge {
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        levels: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Probe energy growth at several fractions of the Courant step.
    Stability {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.9, 1.5])]
        factors: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Summarize a mesh file.
    MeshInfo { path: PathBuf },
}

fn scenario(path: &Path, common: &Common) -> Result<Scenario, DriverError> {
    let mut s = load_scenario(path)?;
    common.apply(&mut s);
    Ok(s)
}

fn mesh_info(path: &Path) -> Result<(), DriverError> {
    let text = std::fs::read_to_string(path)?;
    let mesh = Mesh::from_text(&text).map_err(|e| ConfigError {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    println!("dimension       {}", mesh.dim());
    println!("nodes           {}", mesh.n_nodes());
    println!("elements        {}", mesh.n_elements());
    println!("boundary facets {}", mesh.n_facets());
    println!("volume          {:.12e}", mesh.volume());
    println!("min inscribed   {:.12e}", mesh.min_inscribed_diameter());
    for (name, label) in thermovi_core::BoundaryLabels::all().iter_names() {
        let count = (0..mesh.n_facets())
            .filter(|&f| mesh.facet_labels(f).contains(label))
            .count();
        if count > 0 {
            println!("{:<15} {count}", name.to_ascii_lowercase());
        }
    }
    Ok(())
}

fn execute(command: Command) -> Result<(), DriverError> {
    match command {
        Command::Run { config, common } => {
            let sim = scenario(&config, &common)?.build()?;
            let out_dir = common.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            let records = driver::run(&sim, Some(&out_dir))?;
            if let Some(last) = records.last() {
                println!(
                    "t = {} energy = {:.12e} entropy = {:.12e}",
                    last.time, last.energy, last.entropy
                );
            }
            println!("wrote {}", out_dir.join(driver::DIAGNOSTICS_FILE).display());
        }
        Command::Converge {
            config,
            levels,
            common,
        } => {
            let table = driver::convergence_study(&scenario(&config, &common)?, levels)?;
            print!("{table}");
        }
        Command::Stability {
            config,
            factors,
            steps,
            common,
        } => {
            let rows = driver::stability_study(&scenario(&config, &common)?, &factors, steps)?;
            println!("{:>8} {:>12} {:>12}  outcome", "factor", "dt", "max growth");
            for r in rows {
                let outcome = match r.outcome {
                    StabilityOutcome::Bounded => "bounded".to_string(),
                    StabilityOutcome::Growth { step } => {
                        format!("unstable (growth at step {step})")
                    }
                    StabilityOutcome::Failure { step, message } => {
                        format!("unstable (step {step}: {message})")
                    }
                };
                println!(
                    "{:>8} {:>12.6e} {:>12.4e}  {outcome}",
                    r.factor, r.dt, r.max_growth
                );
            }
        }
        Command::MeshInfo { path } => mesh_info(&path)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
