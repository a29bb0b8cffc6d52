//! Experiment runner: configuration, per-size pipelines, CSV emission and
//! run manifests.

mod output;

pub use output::{
    audit_bundle, audit_csv, emit_csv, format_f64, gnuplot_script, parse_csv, read_csv, read_table, sha256_file,
    write_csv, write_table, AuditReport, SeriesBundle,
};

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::counterdiabatic::{compare_on_path, AdiabaticModel, IsingAdiabatic, PspinAdiabatic, SingleSpinAdiabatic};
use crate::dynamics::{evolve_optimal, evolve_optimal_refined, uniform_grid, EvolutionResult, EvolveConfig, StepRule};
use crate::error::{Error, Result};
use crate::operators::{
    build_collective_basis, build_nearest_neighbor_basis, build_pauli_basis, Limits, OperatorBasis, Sector,
};
use crate::paths::{
    ising_fidelity_analytic, ising_h_analytic, InterpolationAngle, InterpolationPath, IsingPath, PspinPath, Schedule,
    ScheduleKind, SingleSpinPath, StatePath,
};
use crate::solver::DEFAULT_TOL_REL;

/// Steps per unit of |λ₁ − λ₀| when no step count is given.
pub const STEPS_PER_UNIT_LAMBDA: f64 = 400.0;
const SINGLE_SPIN_STEPS: usize = 1000;
const MAX_DOUBLINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    SingleSpin,
    Ising,
    Pspin,
    Interpolate,
    CdCompare,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::SingleSpin => "single-spin",
            Model::Ising => "ising",
            Model::Pspin => "pspin",
            Model::Interpolate => "interpolate",
            Model::CdCompare => "cd-compare",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
            .map_err(|_| Error::invalid(format!("unknown model '{s}'")))
    }
}

/// Everything that determines a run. Missing fields take model-dependent defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub sizes: Vec<usize>,
    /// Interaction weight of the collective bases (1, 2 or 3).
    pub weight: usize,
    pub lambda_start: Option<f64>,
    pub lambda_end: Option<f64>,
    pub schedule: ScheduleKind,
    /// Duration of the protocol; defaults to |λ₁ − λ₀|.
    pub total_time: Option<f64>,
    /// Grid intervals; defaults to 400·|λ₁ − λ₀| (1000 for the single spin).
    pub steps: Option<usize>,
    /// When set, the grid is doubled until the fidelity curve moves less than this.
    pub refine_tol: Option<f64>,
    pub tol_rel: f64,
    pub rule: StepRule,
    /// Interpolation angle πλ/2 instead of 2πλ.
    pub quarter: bool,
    /// Single-spin angular frequency.
    pub omega: f64,
    /// p-spin exponent.
    pub p: u32,
    /// Model driven by `cd-compare` (ising, pspin or single-spin).
    pub compare: Model,
    /// Also write the Ising analytic oracle columns.
    pub oracle: bool,
    /// Also write a gnuplot script.
    pub plot_script: bool,
    pub output_dir: PathBuf,
    /// Reserved for randomized probes; the pipelines themselves are deterministic.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: Model::Ising,
            sizes: Vec::new(),
            weight: 2,
            lambda_start: None,
            lambda_end: None,
            schedule: ScheduleKind::Linear,
            total_time: None,
            steps: None,
            refine_tol: None,
            tol_rel: DEFAULT_TOL_REL,
            rule: StepRule::Midpoint,
            quarter: false,
            omega: 1.0,
            p: 3,
            compare: Model::Ising,
            oracle: false,
            plot_script: false,
            output_dir: PathBuf::from("runs"),
            seed: 0,
        }
    }
}

/// Parses `key = value` lines (blank lines and `#` comments ignored) into a
/// JSON object. `sizes` is always a list; numbers and booleans are typed.
fn key_value_to_json(text: &str) -> Result<serde_json::Value> {
    let mut map = serde_json::Map::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("line {}: expected key = value, got '{raw}'", n + 1)))?;
        let key = k.trim().replace('-', "_");
        let v = v.trim().trim_matches('"');
        let value = match key.as_str() {
            "sizes" | "size" => serde_json::Value::Array(
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<u64>()
                            .map(serde_json::Value::from)
                            .map_err(|_| Error::invalid(format!("line {}: bad size '{s}'", n + 1)))
                    })
                    .collect::<Result<_>>()?,
            ),
            _ => scalar(v),
        };
        let key = if key == "size" { "sizes".to_string() } else { key };
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::invalid(format!("line {}: duplicate key '{key}'", n + 1)));
        }
    }
    Ok(serde_json::Value::Object(map))
}

fn scalar(v: &str) -> serde_json::Value {
    if let Ok(i) = v.parse::<u64>() {
        return i.into();
    }
    if let Ok(x) = v.parse::<f64>() {
        return x.into();
    }
    match v {
        "true" => true.into(),
        "false" => false.into(),
        _ => serde_json::Value::String(v.to_string()),
    }
}

impl ExperimentConfig {
    /// Reads a JSON document or a flat key=value file.
    pub fn from_text(text: &str) -> Result<Self> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text)?
        } else {
            key_value_to_json(text)?
        };
        Ok(serde_json::from_value(value)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    fn target(&self) -> Model {
        if self.model == Model::CdCompare {
            self.compare
        } else {
            self.model
        }
    }

    /// Sizes with the model default filled in.
    pub fn resolved_sizes(&self) -> Vec<usize> {
        if !self.sizes.is_empty() {
            return self.sizes.clone();
        }
        match self.target() {
            Model::SingleSpin => vec![1],
            Model::Ising => vec![8],
            _ => vec![10],
        }
    }

    pub fn lambda_range(&self) -> (f64, f64) {
        let (a, b) = match self.target() {
            Model::SingleSpin => (0.0, 2.0 * std::f64::consts::PI / self.omega.abs()),
            Model::Ising => (0.0, 3.0),
            _ => (0.0, 1.0),
        };
        (self.lambda_start.unwrap_or(a), self.lambda_end.unwrap_or(b))
    }

    pub fn resolved_total_time(&self) -> f64 {
        let (a, b) = self.lambda_range();
        self.total_time.unwrap_or((b - a).abs())
    }

    pub fn resolved_steps(&self) -> usize {
        let (a, b) = self.lambda_range();
        self.steps.unwrap_or(match self.target() {
            Model::SingleSpin => SINGLE_SPIN_STEPS,
            _ => ((STEPS_PER_UNIT_LAMBDA * (b - a).abs()).ceil() as usize).max(2),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.compare == Model::CdCompare || self.compare == Model::Interpolate {
            return Err(Error::invalid("cd-compare drives ising, pspin or single-spin"));
        }
        if !(self.tol_rel > 0.0 && self.tol_rel < 1.0) {
            return Err(Error::invalid(format!(
                "tol_rel must lie in (0, 1), got {}",
                self.tol_rel
            )));
        }
        if self.resolved_steps() < 2 {
            return Err(Error::invalid("steps must be at least 2"));
        }
        if let Some(t) = self.refine_tol {
            if !(t > 0.0) {
                return Err(Error::invalid("refine_tol must be positive"));
            }
        }
        let (a, b) = self.lambda_range();
        if !(a.is_finite() && b.is_finite()) || a == b {
            return Err(Error::invalid(format!(
                "lambda range [{a}, {b}] is empty or not finite"
            )));
        }
        let tt = self.resolved_total_time();
        if !(tt > 0.0 && tt.is_finite()) {
            return Err(Error::invalid(format!("total_time must be positive, got {tt}")));
        }
        if !(1..=3).contains(&self.weight) {
            return Err(Error::invalid(format!("weight must be 1, 2 or 3, got {}", self.weight)));
        }
        let limits = Limits::default();
        for &n in &self.resolved_sizes() {
            match self.target() {
                Model::SingleSpin => {
                    if n != 1 {
                        return Err(Error::invalid("the single-spin model has size 1"));
                    }
                }
                Model::Ising => {
                    limits.check_full(n)?;
                    if n < 2 || n % 2 != 0 {
                        return Err(Error::invalid(format!("Ising size must be even and >= 2, got {n}")));
                    }
                }
                _ => {
                    limits.check_symmetric(n)?;
                    if n < 2 {
                        return Err(Error::invalid(format!("collective models need N >= 2, got {n}")));
                    }
                }
            }
        }
        if matches!(self.target(), Model::SingleSpin) && !(self.omega.is_finite() && self.omega != 0.0) {
            return Err(Error::invalid("omega must be finite and nonzero"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let (a, b) = self.lambda_range();
        Schedule::new(self.schedule, a, b, self.resolved_total_time())
    }

    pub fn evolve_config(&self) -> EvolveConfig {
        EvolveConfig {
            tol_rel: self.tol_rel,
            rule: self.rule,
            ..EvolveConfig::default()
        }
    }
}

/// Scalars reported for one emitted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub size: usize,
    pub steps: usize,
    pub final_fidelity: f64,
    pub total_cost: f64,
    pub max_angle: f64,
    pub bound_holds: bool,
    /// Samples whose covariance spectrum had an eigenvalue within a factor 10 of the cutoff.
    pub near_cutoff_samples: usize,
    /// Fidelity change of the last grid doubling, when refinement ran.
    pub refinement_change: Option<f64>,
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub runs: Vec<RunSummary>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    /// Recomputes every checksum against the files in `dir`.
    pub fn verify(&self, dir: &Path) -> Result<bool> {
        for f in &self.files {
            if sha256_file(&dir.join(&f.name))? != f.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// One table produced for one size.
#[derive(Debug, Clone)]
enum Table {
    Series(SeriesBundle),
    Raw { header: Vec<String>, rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone)]
struct Emission {
    file: String,
    table: Table,
}

struct SizeOutcome {
    summaries: Vec<RunSummary>,
    emissions: Vec<Emission>,
}

fn summary(name: String, size: usize, r: &EvolutionResult) -> RunSummary {
    let near = r.couplings.near_cutoff.iter().filter(|&&b| b).count();
    if near > 0 {
        log::warn!(
            "{name}: {near} of {} samples have a covariance eigenvalue within a factor 10 of the cutoff",
            r.grid.len()
        );
    }
    RunSummary {
        near_cutoff_samples: near,
        name,
        size,
        steps: r.grid.len().saturating_sub(1),
        final_fidelity: r.final_fidelity(),
        total_cost: r.total_cost(),
        max_angle: r.max_angle(),
        bound_holds: r.bound_holds(),
        refinement_change: None,
        converged: None,
    }
}

fn collective_basis(n: usize, w: usize) -> Result<OperatorBasis> {
    build_collective_basis(n, w, Sector::Symmetric)
}

fn path_and_basis(cfg: &ExperimentConfig, model: Model, n: usize) -> Result<(Box<dyn StatePath>, OperatorBasis)> {
    Ok(match model {
        Model::SingleSpin => (Box::new(SingleSpinPath::new(cfg.omega)?), build_pauli_basis(1, true)?),
        Model::Ising => (Box::new(IsingPath::new(n)?), build_nearest_neighbor_basis(n)?),
        Model::Pspin => (Box::new(PspinPath::new(n, cfg.p)?), collective_basis(n, cfg.weight)?),
        Model::Interpolate => {
            let angle = if cfg.quarter {
                InterpolationAngle::Quarter
            } else {
                InterpolationAngle::FullTurn
            };
            (
                Box::new(InterpolationPath::new(n, angle)?),
                collective_basis(n, cfg.weight)?,
            )
        }
        Model::CdCompare => return Err(Error::invalid("cd-compare is not a state path")),
    })
}

fn stem(cfg: &ExperimentConfig, model: Model, n: usize) -> String {
    match model {
        Model::SingleSpin => "single-spin".into(),
        Model::Ising => format!("ising_L{n}"),
        Model::Pspin => format!("pspin_N{n}_w{}", cfg.weight),
        Model::Interpolate => format!(
            "interpolate_N{n}_w{}{}",
            cfg.weight,
            if cfg.quarter { "_quarter" } else { "" }
        ),
        Model::CdCompare => "cd".into(),
    }
}

fn run_size(cfg: &ExperimentConfig, n: usize) -> Result<SizeOutcome> {
    let schedule = cfg.schedule()?;
    let grid = uniform_grid(schedule.total_time, cfg.resolved_steps())?;
    let ecfg = cfg.evolve_config();
    if cfg.model == Model::CdCompare {
        return run_cd_compare(cfg, n, &schedule, &grid, &ecfg);
    }
    let (path, basis) = path_and_basis(cfg, cfg.model, n)?;
    let name = stem(cfg, cfg.model, n);
    let (result, refinement) = match cfg.refine_tol {
        Some(tol) => {
            let r = evolve_optimal_refined(path.as_ref(), &schedule, &basis, &grid, &ecfg, tol, MAX_DOUBLINGS)?;
            if !r.converged {
                log::warn!(
                    "{name}: refinement stopped at {} steps with change {:e}",
                    r.steps,
                    r.change
                );
            }
            (r.result, Some((r.change, r.converged)))
        }
        None => (evolve_optimal(path.as_ref(), &schedule, &basis, &grid, &ecfg)?, None),
    };
    let mut s = summary(name.clone(), n, &result);
    if let Some((change, converged)) = refinement {
        s.refinement_change = Some(change);
        s.converged = Some(converged);
    }
    let mut emissions = vec![Emission {
        file: format!("{name}.csv"),
        table: Table::Series(SeriesBundle::from_evolution(&result)),
    }];
    if cfg.oracle && cfg.model == Model::Ising {
        emissions.push(ising_oracle(n, &result, &name)?);
    }
    Ok(SizeOutcome {
        summaries: vec![s],
        emissions,
    })
}

/// Closed-form coupling and mode-product fidelity next to the numeric run.
fn ising_oracle(l: usize, r: &EvolutionResult, name: &str) -> Result<Emission> {
    let label = "X0Y1";
    let idx = r
        .couplings
        .labels
        .iter()
        .position(|x| x == label)
        .ok_or_else(|| Error::invalid("Ising basis lacks the X0Y1 coupling"))?;
    let h: Vec<f64> = r.couplings.values.iter().map(|v| v[idx]).collect();
    let fid = ising_fidelity_analytic(l, &r.grid, &r.lambda, &h)?;
    let header = ["t", "lambda", "dlambda", "h_analytic", "fidelity_analytic"]
        .map(String::from)
        .to_vec();
    let rows = (0..r.grid.len())
        .map(|i| {
            vec![
                r.grid[i],
                r.lambda[i],
                r.dlambda[i],
                ising_h_analytic(l, r.lambda[i], r.dlambda[i]),
                fid[i],
            ]
        })
        .collect();
    Ok(Emission {
        file: format!("{name}_oracle.csv"),
        table: Table::Raw { header, rows },
    })
}

fn run_cd_compare(
    cfg: &ExperimentConfig,
    n: usize,
    schedule: &Schedule,
    grid: &[f64],
    ecfg: &EvolveConfig,
) -> Result<SizeOutcome> {
    let target = cfg.compare;
    let (path, basis) = path_and_basis(cfg, target, n)?;
    let model: Box<dyn AdiabaticModel> = match target {
        Model::SingleSpin => Box::new(SingleSpinAdiabatic::new(cfg.omega)?),
        Model::Ising => Box::new(IsingAdiabatic::new(n)?),
        Model::Pspin => Box::new(PspinAdiabatic::new(n, cfg.p)?),
        _ => return Err(Error::invalid("cd-compare drives ising, pspin or single-spin")),
    };
    let c = compare_on_path(path.as_ref(), model.as_ref(), schedule, &basis, grid, ecfg)?;
    if !c.dominance_holds() {
        log::warn!("per-step dominance of the optimal parent failed; check the solver tolerance");
    }
    let base = format!("cd_{}", stem(cfg, target, n));
    let mut summaries = Vec::new();
    let mut emissions = Vec::new();
    for (tag, r) in [("optimal", &c.optimal), ("cd", &c.cd)] {
        let name = format!("{base}_{tag}");
        summaries.push(summary(name.clone(), n, r));
        emissions.push(Emission {
            file: format!("{name}.csv"),
            table: Table::Series(SeriesBundle::from_evolution(r)),
        });
    }
    Ok(SizeOutcome { summaries, emissions })
}

fn write_emission(dir: &Path, e: &Emission) -> Result<PathBuf> {
    let path = dir.join(&e.file);
    match &e.table {
        Table::Series(b) => emit_csv(b, &path)?,
        Table::Raw { header, rows } => {
            write_table(BufWriter::new(fs::File::create(&path)?), header, rows.iter().cloned())?
        }
    }
    Ok(path)
}

/// Runs every size, writes the data files and `manifest.json` into the
/// output directory and returns the manifest. On failure, files written by
/// this call are removed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let started = Instant::now();
    let started_unix_seconds = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let sizes = cfg.resolved_sizes();

    let outcomes: Vec<Result<SizeOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sizes.iter().map(|&n| scope.spawn(move || run_size(cfg, n))).collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Numerical("worker thread panicked".into())))
            })
            .collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let dir = &cfg.output_dir;
    let created_dir = !dir.exists();
    fs::create_dir_all(dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = emit_all(cfg, &outcomes, &mut written).and_then(|(runs, files)| {
        let manifest = RunManifest {
            config: cfg.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_seconds,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            runs,
            files,
        };
        let path = dir.join(MANIFEST_NAME);
        written.push(path.clone());
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(manifest)
    });
    if result.is_err() {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        if created_dir {
            let _ = fs::remove_dir(dir);
        }
    }
    result
}

fn emit_all(
    cfg: &ExperimentConfig,
    outcomes: &[SizeOutcome],
    written: &mut Vec<PathBuf>,
) -> Result<(Vec<RunSummary>, Vec<FileEntry>)> {
    let dir = &cfg.output_dir;
    let mut runs = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut seen = BTreeMap::new();
    for o in outcomes {
        runs.extend(o.summaries.iter().cloned());
        for e in &o.emissions {
            if seen.insert(e.file.clone(), ()).is_some() {
                return Err(Error::invalid(format!("duplicate output file '{}'", e.file)));
            }
            written.push(dir.join(&e.file));
            write_emission(dir, e)?;
            names.push(e.file.clone());
        }
    }
    if cfg.plot_script {
        let series: Vec<String> = names.iter().filter(|n| !n.ends_with("_oracle.csv")).cloned().collect();
        let file = "plot.gp".to_string();
        written.push(dir.join(&file));
        fs::write(dir.join(&file), gnuplot_script(&series))?;
        names.push(file);
    }
    let files = names
        .into_iter()
        .map(|name| {
            let p = dir.join(&name);
            Ok(FileEntry {
                bytes: fs::metadata(&p)?.len(),
                sha256: sha256_file(&p)?,
                name,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((runs, files))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_and_json_agree() {
        let kv = "model = pspin\nsizes = 10, 20\nweight = 3\ntol_rel = 1e-9 # tighter\nquarter = true\n";
        let js = r#"{"model": "pspin", "sizes": [10, 20], "weight": 3, "tol_rel": 1e-9, "quarter": true}"#;
        let a = ExperimentConfig::from_text(kv).unwrap();
        let b = ExperimentConfig::from_text(js).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sizes, vec![10, 20]);
        assert_eq!(a.weight, 3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_text("colour = blue").is_err());
        assert!(ExperimentConfig::from_text("steps").is_err());
    }

    #[test]
    fn defaults_follow_the_model() {
        let c = ExperimentConfig::default();
        assert_eq!(c.lambda_range(), (0.0, 3.0));
        assert_eq!(c.resolved_steps(), 1200);
        assert_eq!(c.resolved_sizes(), vec![8]);
        let s = ExperimentConfig {
            model: Model::SingleSpin,
            ..Default::default()
        };
        assert_eq!(s.resolved_steps(), 1000);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn caps_are_enforced() {
        let c = ExperimentConfig {
            sizes: vec![14],
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::ResourceLimit { .. })));
        let c = ExperimentConfig {
            steps: Some(1),
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
