use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use parentham::dynamics::StepRule;
use parentham::experiment::{audit_csv, run_experiment, ExperimentConfig, Model};
use parentham::paths::ScheduleKind;
use parentham::selftest::run_selftest;

#[derive(Parser, Debug)]
#[command(name = "parentham", version, about = "Optimal parent Hamiltonians along state paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rotating spin-1/2 driven over the full Pauli basis
    SingleSpin(RunArgs),
    /// Transverse-field Ising ground states with nearest-neighbour couplings
    Ising(RunArgs),
    /// p-spin ground states with collective interactions
    Pspin(RunArgs),
    /// Interpolation between the p-spin endpoint ground states
    Interpolate(RunArgs),
    /// Counterdiabatic potential against the optimal parent on one path
    CdCompare(CdArgs),
    /// Run the invariant suite
    Selftest,
    /// Check the fidelity bound on emitted CSV files or directories
    Audit {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Single system size (sites L or spins N)
    #[arg(short = 'L', long = "size", conflicts_with = "sizes")]
    size: Option<usize>,
    /// Comma-separated sizes
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Interaction weight of the collective basis
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    weight: Option<u8>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_end: Option<f64>,
    /// linear or smoothstep
    #[arg(long)]
    schedule: Option<ScheduleKind>,
    /// Protocol duration (defaults to |lambda_end - lambda_start|)
    #[arg(long)]
    total_time: Option<f64>,
    /// Grid intervals
    #[arg(long)]
    steps: Option<usize>,
    /// Double the grid until the fidelity curve moves less than this
    #[arg(long)]
    refine_tol: Option<f64>,
    /// Relative eigenvalue cutoff of the covariance solve
    #[arg(long)]
    tol_rel: Option<f64>,
    /// Trapezoid instead of midpoint Hamiltonian per step
    #[arg(long)]
    trapezoid: bool,
    /// Interpolation angle pi*lambda/2 instead of 2*pi*lambda
    #[arg(long)]
    quarter: bool,
    /// Single-spin angular frequency
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    /// p-spin exponent
    #[arg(long)]
    p: Option<u32>,
    /// Also write the Ising analytic oracle file
    #[arg(long)]
    oracle: bool,
    /// Also write a gnuplot script
    #[arg(long)]
    plot_script: bool,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Configuration file (JSON or key = value); flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CdArgs {
    /// Path to drive: ising, pspin or single-spin
    #[arg(long, default_value = "ising")]
    on: Model,
    #[command(flatten)]
    run: RunArgs,
}

impl RunArgs {
    fn into_config(self, model: Model, compare: Option<Model>) -> parentham::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        c.model = model;
        if let Some(m) = compare {
            c.compare = m;
        }
        if let Some(n) = self.size {
            c.sizes = vec![n];
        }
        if let Some(s) = self.sizes {
            c.sizes = s;
        }
        if let Some(w) = self.weight {
            c.weight = w as usize;
        }
        c.lambda_start = self.lambda_start.or(c.lambda_start);
        c.lambda_end = self.lambda_end.or(c.lambda_end);
        if let Some(s) = self.schedule {
            c.schedule = s;
        }
        c.total_time = self.total_time.or(c.total_time);
        c.steps = self.steps.or(c.steps);
        c.refine_tol = self.refine_tol.or(c.refine_tol);
        if let Some(t) = self.tol_rel {
            c.tol_rel = t;
        }
        if self.trapezoid {
            c.rule = StepRule::Trapezoid;
        }
        c.quarter |= self.quarter;
        if let Some(w) = self.omega {
            c.omega = w;
        }
        if let Some(p) = self.p {
            c.p = p;
        }
        c.oracle |= self.oracle;
        c.plot_script |= self.plot_script;
        if let Some(o) = self.out {
            c.output_dir = o;
        }
        Ok(c)
    }
}

fn run(cfg: ExperimentConfig) -> ExitCode {
    match run_experiment(&cfg) {
        Ok(m) => {
            for r in &m.runs {
                println!(
                    "{}: final fidelity {:.12}, total cost {:.6e}, max angle {:.6}, bound {}",
                    r.name,
                    r.final_fidelity,
                    r.total_cost,
                    r.max_angle,
                    if r.bound_holds { "ok" } else { "VIOLATED" }
                );
            }
            for f in &m.files {
                println!("wrote {}", cfg.output_dir.join(&f.name).display());
            }
            println!(
                "wrote {}",
                cfg.output_dir.join(parentham::experiment::MANIFEST_NAME).display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn csv_files(p: &Path) -> std::io::Result<Vec<PathBuf>> {
    if !p.is_dir() {
        return Ok(vec![p.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(p)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".csv") && !name.ends_with("_oracle.csv")
        })
        .collect();
    out.sort();
    Ok(out)
}

fn audit(paths: &[PathBuf]) -> ExitCode {
    let mut failed = false;
    for p in paths {
        let files = match csv_files(p) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::from(1);
            }
        };
        for f in files {
            match audit_csv(&f) {
                Ok(r) if r.ok() => println!("ok    {} ({} rows)", f.display(), r.rows),
                Ok(r) => {
                    failed = true;
                    println!(
                        "FAIL  {} ({} of {} rows violate the bound, worst excess {:e})",
                        f.display(),
                        r.violations.len(),
                        r.rows,
                        r.worst_excess
                    );
                }
                Err(e) => {
                    failed = true;
                    println!("FAIL  {}: {e}", f.display());
                }
            }
        }
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let built = match cli.command {
        Command::SingleSpin(a) => a.into_config(Model::SingleSpin, None),
        Command::Ising(a) => a.into_config(Model::Ising, None),
        Command::Pspin(a) => a.into_config(Model::Pspin, None),
        Command::Interpolate(a) => a.into_config(Model::Interpolate, None),
        Command::CdCompare(a) => a.run.into_config(Model::CdCompare, Some(a.on)),
        Command::Selftest => {
            let checks = run_selftest();
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
        Command::Audit { paths } => return audit(&paths),
    };
    match built.and_then(|cfg| cfg.validate().map(|_| cfg)) {
        Ok(cfg) => run(cfg),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
