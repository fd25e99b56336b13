//! Command-line front end: configuration ingestion, noise-sample ingestion,
//! benchmark presets, certificate/report emission, and the sample-complexity
//! curve.
//!
//! Subcommands: `synth` (config-driven synthesis), `benchmark` (built-in
//! presets), `samplecurve` (β vs N CSV), `simulate` (Monte Carlo soundness
//! check of an existing certificate). Exit codes: 0 success, 1 config error,
//! 2 infeasible LP, 3 verification/consistency failure, 4 solver failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::{
    fingerprint, verify_certificate, Certificate, CertificateDocument, VerificationReport,
};
use crate::lp::LpStatus;
use crate::polytope::{AffineMap, Polyhedron, DEFAULT_TOL};
use crate::scenario::{decision_count, sample_curve, ScenarioParams};
use crate::sim::{simulate, GaussianSpec, NoiseDataset, NoiseSource, SimSummary, StartStrategy};
use crate::synth::{build_lbp, solve_lbp, BuildOptions, LbpCounts, SynthError};
use crate::system::{build_partition, BarrierPartition, PwaSystem, UnsafeDescription};

/// Decouples the simulator's RNG stream from the noise-dataset stream that
/// shares the same user-facing seed.
const SIM_SEED_SALT: u64 = 0x5349_4d55_4c41_5445;

/// Errors carrying the documented exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, arguments, or input files (exit 1).
    #[error("config error: {0}")]
    Config(String),
    /// The scenario LP is infeasible (exit 2).
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Independent verification or a consistency check failed (exit 3).
    #[error("verification failure: {0}")]
    Verification(String),
    /// The LP solver failed numerically or the audit rejected its answer
    /// (exit 4).
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    /// The process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

fn classify_synth_error(e: SynthError) -> CliError {
    match e {
        SynthError::Solver { status: LpStatus::Infeasible, detail } => {
            CliError::Infeasible(detail)
        }
        SynthError::Solver { status, detail } => {
            CliError::Solver(format!("{status:?}: {detail}"))
        }
        SynthError::Audit { .. } => CliError::Solver(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Configuration file format
// ---------------------------------------------------------------------------

/// A polyhedron `Hx ≤ h` in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyConfig {
    /// Constraint matrix rows.
    #[serde(rename = "H")]
    pub h_mat: Vec<Vec<f64>>,
    /// Right-hand side.
    #[serde(rename = "h")]
    pub h_vec: Vec<f64>,
}

impl PolyConfig {
    fn to_polyhedron(&self) -> Result<Polyhedron, CliError> {
        Polyhedron::new(self.h_mat.clone(), self.h_vec.clone())
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

/// An affine map `x ↦ Ax + b` in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// Square matrix A.
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    /// Offset b.
    pub b: Vec<f64>,
}

/// The piece-wise affine system in a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Dynamics regions (one polyhedron per affine map).
    pub regions: Vec<PolyConfig>,
    /// Affine maps, aligned with `regions`.
    pub dynamics: Vec<MapConfig>,
    /// Initial set X0.
    pub initial: PolyConfig,
    /// Safe set Xs.
    pub safe: PolyConfig,
    /// Unsafe pieces (finite union of polyhedra).
    #[serde(rename = "unsafe")]
    pub unsafe_pieces: Vec<PolyConfig>,
}

/// Scenario block: exactly one of the pairs {eps, beta_target}, {eps, N},
/// {N, beta_target} — or `eps` alone when the noise source is a sample file
/// (N is then the file's line count).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Violation level ε.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Confidence-complement target; the resolved β is ≤ this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_target: Option<f64>,
    /// Explicit sample count.
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<u64>,
}

/// Noise source: exactly one of `file` (CSV of samples) or `sigma`
/// (zero-mean Gaussian generator, one standard deviation per axis).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// CSV sample file: one sample per line, comma-separated decimal
    /// fields, optional lines starting with `#`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Per-axis standard deviations for the Gaussian generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
}

/// Numerical tolerances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// LP solver tolerance.
    pub solver: f64,
    /// Verification violation tolerance.
    pub verify: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig { solver: 1e-8, verify: 1e-6 }
    }
}

/// Build flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlagConfig {
    /// Constrain each unsafe-classified piece everywhere instead of only on
    /// its overlap with the unsafe set (the stricter encoding).
    pub paper_literal_unsafe: bool,
    /// Emit supermartingale blocks even for provably empty preimage sets.
    pub prune: bool,
}

impl Default for FlagConfig {
    fn default() -> Self {
        FlagConfig { paper_literal_unsafe: false, prune: true }
    }
}

/// A full run configuration, parsed from TOML or JSON by file extension.
/// Note that JSON cannot express infinite grid breakpoints; use TOML
/// (`inf` / `-inf`) for unbounded cells.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// RNG seed for sample generation (and, salted, simulation).
    #[serde(default)]
    pub seed: u64,
    /// Time horizon T ≥ 1.
    pub horizon: u32,
    /// Barrier upper bound M ≥ 1.
    #[serde(rename = "M", default = "default_m")]
    pub m_bound: f64,
    /// The dynamics, sets, and unsafe pieces.
    pub system: SystemConfig,
    /// Barrier partition grid: per-axis breakpoint lists (±inf ends allowed).
    pub grid: Vec<Vec<f64>>,
    /// Scenario block.
    pub scenario: ScenarioConfig,
    /// Noise source.
    pub noise: NoiseConfig,
    /// Tolerances (optional).
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    /// Flags (optional).
    #[serde(default)]
    pub flags: FlagConfig,
}

fn default_m() -> f64 {
    1.0
}

impl RunConfig {
    /// Loads a config from a `.toml` or `.json` file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        match ext {
            "toml" => toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
            "json" => serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
            other => Err(CliError::Config(format!(
                "unsupported config extension '{other}' for {} (use .toml or .json)",
                path.display()
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Noise-sample CSV ingestion
// ---------------------------------------------------------------------------

/// Parses a noise CSV: one sample per line, comma-separated decimal fields,
/// lines starting with `#` ignored, samples kept in file order.
pub fn parse_noise_csv(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let row: Result<Vec<f64>, CliError> = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    CliError::Config(format!(
                        "{} sample {}: bad field '{field}'",
                        path.display(),
                        idx + 1
                    ))
                })
            })
            .collect();
        samples.push(row?);
    }
    if samples.is_empty() {
        return Err(CliError::Config(format!("{} contains no samples", path.display())));
    }
    Ok(samples)
}

// ---------------------------------------------------------------------------
// Resolution: config + overrides → a runnable problem instance
// ---------------------------------------------------------------------------

/// Command-line overrides applied on top of a config or preset.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Replace the noise source with this sample file.
    pub samples: Option<PathBuf>,
    /// Replace the seed.
    pub seed: Option<u64>,
    /// Replacement scenario ε.
    pub eps: Option<f64>,
    /// Replacement scenario β target.
    pub beta_target: Option<f64>,
    /// Replacement scenario N.
    pub n_samples: Option<u64>,
    /// Force the stricter unsafe encoding.
    pub paper_literal_unsafe: bool,
    /// Disable pruning of empty supermartingale blocks.
    pub no_prune: bool,
}

impl Overrides {
    fn scenario_overridden(&self) -> bool {
        self.eps.is_some() || self.beta_target.is_some() || self.n_samples.is_some()
    }
}

/// Everything needed to build, solve, verify, and report one synthesis run.
pub struct ResolvedRun {
    /// The system.
    pub sys: PwaSystem,
    /// The unsafe-set description.
    pub unsafe_desc: UnsafeDescription,
    /// The barrier partition.
    pub bp: BarrierPartition,
    /// The noise dataset (exactly N samples).
    pub data: NoiseDataset,
    /// Resolved scenario parameters.
    pub params: ScenarioParams,
    /// Build options.
    pub opts: BuildOptions,
    /// Tolerances.
    pub tolerances: ToleranceConfig,
    /// The seed the run resolved to.
    pub seed: u64,
    /// Gaussian sigmas when the noise source is a generator.
    pub sigma: Option<Vec<f64>>,
    /// Pool samples when the noise source is a file.
    pub pool: Option<Vec<Vec<f64>>>,
    /// Provenance notes to surface in output.
    pub notes: Vec<String>,
}

impl ResolvedRun {
    /// The noise source for Monte Carlo simulation: the Gaussian generator,
    /// or draws with replacement from the sample file.
    pub fn noise_source(&self) -> Result<NoiseSource, CliError> {
        if let Some(sigma) = &self.sigma {
            let spec =
                GaussianSpec::new(sigma.clone()).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(NoiseSource::Gaussian(spec))
        } else if let Some(pool) = &self.pool {
            Ok(NoiseSource::Pool(pool.clone()))
        } else {
            Err(CliError::Config("no noise source resolved".into()))
        }
    }
}

/// The partition: a grid spec, or explicit pieces with parent indices.
pub enum PartitionKind {
    /// Per-axis breakpoints handed to the grid builder.
    Grid(Vec<Vec<f64>>),
    /// Explicit pieces and their dynamics-region parents.
    Explicit(Vec<Polyhedron>, Vec<usize>),
}

fn resolve_scenario(
    block: &ScenarioConfig,
    d: u64,
    m_bound: f64,
    file_count: Option<u64>,
) -> Result<ScenarioParams, CliError> {
    let to_cli = |e: crate::scenario::ScenarioError| CliError::Config(e.to_string());
    match (block.eps, block.beta_target, block.n_samples) {
        (Some(_), Some(_), Some(_)) => Err(CliError::Config(
            "scenario block is over-constrained: eps, beta_target, and N are all set; \
             keep exactly one of the pairs {eps, beta_target}, {eps, N}, {N, beta_target}"
                .into(),
        )),
        (Some(eps), Some(beta), None) => {
            ScenarioParams::from_eps_beta(eps, beta, d, m_bound, None).map_err(to_cli)
        }
        (Some(eps), None, Some(n)) => {
            ScenarioParams::from_eps_n(eps, n, d, m_bound, None).map_err(to_cli)
        }
        (None, Some(beta), Some(n)) => {
            ScenarioParams::from_n_beta(n, beta, d, m_bound, None).map_err(to_cli)
        }
        (Some(eps), None, None) => match file_count {
            Some(n) => ScenarioParams::from_eps_n(eps, n, d, m_bound, None).map_err(to_cli),
            None => Err(CliError::Config(
                "scenario block sets only eps; N defaults to the sample-file line count, \
                 so either use a noise file or add beta_target or N"
                    .into(),
            )),
        },
        (eps, beta, n) => Err(CliError::Config(format!(
            "scenario block must set exactly one of the pairs {{eps, beta_target}}, \
             {{eps, N}}, {{N, beta_target}} (got eps: {}, beta_target: {}, N: {})",
            eps.map_or("unset".into(), |v| v.to_string()),
            beta.map_or("unset".into(), |v| v.to_string()),
            n.map_or("unset".into(), |v| v.to_string()),
        ))),
    }
}

/// Assembles a runnable instance from parts shared by configs and presets.
#[allow(clippy::too_many_arguments)]
fn resolve_parts(
    regions: Vec<Polyhedron>,
    dynamics: Vec<AffineMap>,
    initial: Polyhedron,
    safe: Polyhedron,
    unsafe_pieces: Vec<Polyhedron>,
    partition: PartitionKind,
    horizon: u32,
    m_bound: f64,
    scenario: &ScenarioConfig,
    noise: &NoiseConfig,
    tolerances: ToleranceConfig,
    flags: &FlagConfig,
    seed: u64,
    overrides: &Overrides,
    mut notes: Vec<String>,
) -> Result<ResolvedRun, CliError> {
    let seed = overrides.seed.unwrap_or(seed);
    let sys = PwaSystem::new(regions, dynamics, initial, safe, horizon)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let unsafe_desc = UnsafeDescription::new(unsafe_pieces, sys.safe_set())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let bp = match partition {
        PartitionKind::Grid(grid) => build_partition(&sys, &unsafe_desc, &grid)
            .map_err(|e| CliError::Config(e.to_string()))?,
        PartitionKind::Explicit(pieces, parents) => {
            BarrierPartition::from_pieces(pieces, parents, &sys, &unsafe_desc)
                .map_err(|e| CliError::Config(e.to_string()))?
        }
    };
    let n = sys.dim();
    let d = decision_count(bp.len(), n);

    // Noise source, after the --samples override.
    let mut noise = noise.clone();
    if let Some(path) = &overrides.samples {
        noise = NoiseConfig { file: Some(path.clone()), sigma: None };
    }
    let (file_samples, sigma) = match (&noise.file, &noise.sigma) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "noise block sets both file and sigma; keep exactly one".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "noise block must set either file (sample CSV) or sigma (generator)".into(),
            ))
        }
        (Some(path), None) => {
            let samples = parse_noise_csv(path)?;
            if samples.iter().any(|s| s.len() != n) {
                return Err(CliError::Config(format!(
                    "noise file {} has samples of dimension {} but the system has n = {n}",
                    path.display(),
                    samples[0].len()
                )));
            }
            (Some(samples), None)
        }
        (None, Some(sigma)) => {
            if sigma.len() != n {
                return Err(CliError::Config(format!(
                    "noise sigma has {} entries but the system has n = {n}",
                    sigma.len()
                )));
            }
            (None, Some(sigma.clone()))
        }
    };

    // Scenario block, after CLI overrides. Any scenario flag replaces the
    // whole block, so the result is always a well-formed variant.
    let block = if overrides.scenario_overridden() {
        ScenarioConfig {
            eps: overrides.eps,
            beta_target: overrides.beta_target,
            n_samples: overrides.n_samples,
        }
    } else {
        scenario.clone()
    };
    let file_count = file_samples.as_ref().map(|s| s.len() as u64);
    let params = resolve_scenario(&block, d, m_bound, file_count)?;

    // The dataset: exactly N samples, from the file prefix or the generator.
    let n_samples = params.n_samples as usize;
    let data = match &file_samples {
        Some(samples) => {
            if samples.len() < n_samples {
                return Err(CliError::Config(format!(
                    "scenario needs N = {n_samples} samples but the file provides {}",
                    samples.len()
                )));
            }
            if samples.len() > n_samples {
                notes.push(format!(
                    "note: using the first {n_samples} of {} file samples",
                    samples.len()
                ));
            }
            NoiseDataset::from_samples(samples[..n_samples].to_vec())
                .map_err(|e| CliError::Config(e.to_string()))?
        }
        None => {
            let spec = GaussianSpec::new(sigma.clone().expect("generator sigma present"))
                .map_err(|e| CliError::Config(e.to_string()))?;
            NoiseDataset::gaussian(&spec, n_samples, seed)
                .map_err(|e| CliError::Config(e.to_string()))?
        }
    };

    let opts = BuildOptions {
        prune: flags.prune && !overrides.no_prune,
        paper_literal_unsafe: flags.paper_literal_unsafe || overrides.paper_literal_unsafe,
        ..BuildOptions::default()
    };
    Ok(ResolvedRun {
        sys,
        unsafe_desc,
        bp,
        data,
        params,
        opts,
        tolerances,
        seed,
        sigma,
        pool: file_samples,
        notes,
    })
}

/// Resolves a config file plus overrides into a runnable instance.
pub fn resolve_config(config: &RunConfig, overrides: &Overrides) -> Result<ResolvedRun, CliError> {
    let regions: Vec<Polyhedron> =
        config.system.regions.iter().map(|p| p.to_polyhedron()).collect::<Result<_, _>>()?;
    let dynamics: Vec<AffineMap> = config
        .system
        .dynamics
        .iter()
        .map(|m| AffineMap::new(m.a.clone(), m.b.clone()).map_err(|e| CliError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    let initial = config.system.initial.to_polyhedron()?;
    let safe = config.system.safe.to_polyhedron()?;
    let unsafe_pieces: Vec<Polyhedron> =
        config.system.unsafe_pieces.iter().map(|p| p.to_polyhedron()).collect::<Result<_, _>>()?;
    resolve_parts(
        regions,
        dynamics,
        initial,
        safe,
        unsafe_pieces,
        PartitionKind::Grid(config.grid.clone()),
        config.horizon,
        config.m_bound,
        &config.scenario,
        &config.noise,
        config.tolerances.clone(),
        &config.flags,
        config.seed,
        overrides,
        Vec::new(),
    )
}

// ---------------------------------------------------------------------------
// Benchmark presets
// ---------------------------------------------------------------------------

fn interval(lo: f64, hi: f64) -> Result<Polyhedron, CliError> {
    Polyhedron::interval(lo, hi).map_err(|e| CliError::Config(e.to_string()))
}

fn box2(lo: [f64; 2], hi: [f64; 2]) -> Result<Polyhedron, CliError> {
    Polyhedron::box_nd(&lo, &hi).map_err(|e| CliError::Config(e.to_string()))
}

struct Preset {
    regions: Vec<Polyhedron>,
    dynamics: Vec<AffineMap>,
    initial: Polyhedron,
    safe: Polyhedron,
    unsafe_pieces: Vec<Polyhedron>,
    partition: PartitionKind,
    horizon: u32,
    m_bound: f64,
    sigma: Vec<f64>,
    scenario: ScenarioConfig,
    notes: Vec<String>,
}

/// 1D random walk `x(k+1) = x(k) + η(k)` on [−3.5, 3.5]: seven unit pieces,
/// X0 = [−0.5, 0.5], Xs = [−2.5, 2.5], unsafe beyond ±2.5.
fn preset_martingale() -> Result<Preset, CliError> {
    let map = AffineMap::new(vec![vec![1.0]], vec![0.0])
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Preset {
        regions: vec![interval(-3.5, 3.5)?],
        dynamics: vec![map],
        initial: interval(-0.5, 0.5)?,
        safe: interval(-2.5, 2.5)?,
        unsafe_pieces: vec![interval(-3.5, -2.5)?, interval(2.5, 3.5)?],
        partition: PartitionKind::Grid(vec![vec![
            -3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5,
        ]]),
        horizon: 10,
        m_bound: 1.0,
        sigma: vec![0.01],
        scenario: ScenarioConfig {
            eps: Some(0.02),
            beta_target: Some(1e-9),
            n_samples: None,
        },
        notes: vec![
            "note: noise sigma = 0.01 is an implementer-chosen default; at sigma = 0.1 \
             the sampled one-step jumps are too large for any nontrivial certificate \
             at this piece count (see README)"
                .into(),
        ],
    })
}

/// 2D longitudinal drone model (position, velocity): `p' = p + v`,
/// `v' = 0.9·v`, safe while |v| ≤ 10. 33 pieces: 3 position slabs × 11
/// velocity cells.
fn preset_drone() -> Result<Preset, CliError> {
    // Full plane as the single dynamics region (vacuous constraint row).
    let plane = Polyhedron::new(vec![vec![0.0, 0.0]], vec![1.0])
        .map_err(|e| CliError::Config(e.to_string()))?;
    let map = AffineMap::new(vec![vec![1.0, 1.0], vec![0.0, 0.9]], vec![0.0, 0.0])
        .map_err(|e| CliError::Config(e.to_string()))?;
    let safe = Polyhedron::new(vec![vec![0.0, 1.0], vec![0.0, -1.0]], vec![10.0, 10.0])
        .map_err(|e| CliError::Config(e.to_string()))?;
    let upper = Polyhedron::new(vec![vec![0.0, -1.0]], vec![-10.0])
        .map_err(|e| CliError::Config(e.to_string()))?;
    let lower = Polyhedron::new(vec![vec![0.0, 1.0]], vec![-10.0])
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut v_breaks = vec![f64::NEG_INFINITY];
    for k in 0..=9 {
        v_breaks.push(-10.0 + 20.0 * k as f64 / 9.0);
    }
    v_breaks.push(f64::INFINITY);
    Ok(Preset {
        regions: vec![plane],
        dynamics: vec![map],
        initial: box2([-5.0, -1.0], [5.0, 1.0])?,
        safe,
        unsafe_pieces: vec![upper, lower],
        partition: PartitionKind::Grid(vec![
            vec![f64::NEG_INFINITY, -40.0, 40.0, f64::INFINITY],
            v_breaks,
        ]),
        horizon: 10,
        m_bound: 1.0,
        sigma: vec![0.05, 0.05],
        scenario: ScenarioConfig {
            eps: Some(0.05),
            beta_target: None,
            n_samples: Some(150),
        },
        notes: vec![
            "note: drone (A, b) matrices are implementer-supplied (unit-mass double \
             integrator with velocity damping 0.9); sigma = (0.05, 0.05)"
                .into(),
            "note: at N = 150 the resolved beta is ~1 (no distributional confidence); \
             raise N and eps via overrides for confident runs (see README)"
                .into(),
        ],
    })
}

const THIRD: f64 = 1.0 / 3.0;

fn vehicle_rows(seven: bool) -> Vec<f64> {
    if seven {
        vec![-3.0, -2.0, -1.0, -THIRD, THIRD, 1.0, 2.0, 3.0]
    } else {
        vec![-3.0, -2.0, -1.0, -THIRD, 1.0, 2.0, 3.0]
    }
}

fn vehicle_cols(count: usize) -> Vec<f64> {
    match count {
        3 => vec![0.0, 80.0, 120.0, 200.0],
        6 => vec![0.0, 20.0, 40.0, 80.0, 120.0, 160.0, 200.0],
        _ => {
            let mut cols: Vec<f64> = (0..=17).map(|k| 10.0 * k as f64).collect();
            cols.push(200.0);
            cols
        }
    }
}

/// The 46-piece vehicle partition: the 42-cell grid with the four central
/// lateral cells of the ramp column [80, 120] split at x₁ = 100.
fn vehicle_pieces_46() -> Result<(Vec<Polyhedron>, Vec<usize>), CliError> {
    let cols = vehicle_cols(6);
    let rows = vehicle_rows(true);
    let mut pieces = Vec::new();
    let mut parents = Vec::new();
    let parent_of = |lo: f64, hi: f64| {
        if hi <= 80.0 {
            0
        } else if lo >= 120.0 {
            2
        } else {
            1
        }
    };
    for c in cols.windows(2) {
        for r in rows.windows(2) {
            let ramp_center = c[0] == 80.0 && r[0] >= -1.0 && r[1] <= 2.0;
            if ramp_center {
                pieces.push(box2([80.0, r[0]], [100.0, r[1]])?);
                parents.push(1);
                pieces.push(box2([100.0, r[0]], [120.0, r[1]])?);
                parents.push(1);
            } else {
                pieces.push(box2([c[0], r[0]], [c[1], r[1]])?);
                parents.push(parent_of(c[0], c[1]));
            }
        }
    }
    Ok((pieces, parents))
}

/// 2D vehicle on-ramp model: `x₁' = x₁ + 13.89` (constant speed),
/// `x₂' = 0.95·x₂ (+ 0.0313 drag on the ramp 80 ≤ x₁ ≤ 120)`; the road is
/// |x₂| ≤ 2 over the longitudinal domain [0, 200]. Piece counts 18, 42, 46,
/// or 126 form a refinement chain, so the certified bound is non-decreasing
/// in the piece count on a shared sample set.
fn preset_vehicle(pieces: usize) -> Result<Preset, CliError> {
    let a = vec![vec![1.0, 0.0], vec![0.0, 0.95]];
    let err = |e: crate::polytope::PolytopeError| CliError::Config(e.to_string());
    let plain = AffineMap::new(a.clone(), vec![13.89, 0.0]).map_err(err)?;
    let ramp = AffineMap::new(a, vec![13.89, 0.0313]).map_err(err)?;
    let partition = match pieces {
        18 => PartitionKind::Grid(vec![vehicle_cols(3), vehicle_rows(false)]),
        42 => PartitionKind::Grid(vec![vehicle_cols(6), vehicle_rows(true)]),
        126 => PartitionKind::Grid(vec![vehicle_cols(18), vehicle_rows(true)]),
        46 => {
            let (pieces, parents) = vehicle_pieces_46()?;
            PartitionKind::Explicit(pieces, parents)
        }
        other => {
            return Err(CliError::Config(format!(
                "vehicle preset supports --pieces 18, 42, 46, or 126 (got {other})"
            )))
        }
    };
    Ok(Preset {
        regions: vec![
            box2([0.0, -3.0], [80.0, 3.0])?,
            box2([80.0, -3.0], [120.0, 3.0])?,
            box2([120.0, -3.0], [200.0, 3.0])?,
        ],
        dynamics: vec![plain.clone(), ramp, plain],
        initial: box2([0.0, -0.25], [10.0, 0.25])?,
        safe: box2([0.0, -2.0], [200.0, 2.0])?,
        unsafe_pieces: vec![box2([0.0, 2.0], [200.0, 3.0])?, box2([0.0, -3.0], [200.0, -2.0])?],
        partition,
        horizon: 10,
        m_bound: 1.0,
        sigma: vec![0.1, 0.05],
        scenario: ScenarioConfig { eps: Some(0.005), beta_target: None, n_samples: Some(40) },
        notes: vec![
            "note: road |x2| <= 2, longitudinal domain [0, 200], drag 0.0313 on the \
             ramp, and sigma = (0.1, 0.01) are implementer-chosen; the resolved beta \
             is ~1 at these sample counts (the bound trend, not the confidence, is \
             the point of this benchmark)"
                .into(),
        ],
    })
}

/// Resolves a named preset plus overrides into a runnable instance.
pub fn resolve_preset(
    name: &str,
    pieces: Option<usize>,
    overrides: &Overrides,
) -> Result<ResolvedRun, CliError> {
    let preset = match name {
        "martingale" => {
            if pieces.is_some() {
                return Err(CliError::Config(
                    "--pieces is only supported for the vehicle benchmark".into(),
                ));
            }
            preset_martingale()?
        }
        "drone" => {
            if pieces.is_some() {
                return Err(CliError::Config(
                    "--pieces is only supported for the vehicle benchmark".into(),
                ));
            }
            preset_drone()?
        }
        "vehicle" => preset_vehicle(pieces.unwrap_or(46))?,
        other => {
            return Err(CliError::Config(format!(
                "unknown benchmark '{other}' (available: martingale, drone, vehicle)"
            )))
        }
    };
    let noise = NoiseConfig { file: None, sigma: Some(preset.sigma.clone()) };
    resolve_parts(
        preset.regions,
        preset.dynamics,
        preset.initial,
        preset.safe,
        preset.unsafe_pieces,
        preset.partition,
        preset.horizon,
        preset.m_bound,
        &preset.scenario,
        &noise,
        ToleranceConfig::default(),
        &FlagConfig::default(),
        0,
        overrides,
        preset.notes,
    )
}

// ---------------------------------------------------------------------------
// Synthesis pipeline shared by `synth` and `benchmark`
// ---------------------------------------------------------------------------

/// Everything a completed synthesis run produced.
pub struct SynthOutcome {
    /// The certificate (valid only when `verification.passed`).
    pub cert: Certificate,
    /// The serializable document.
    pub doc: CertificateDocument,
    /// The independent verification report.
    pub report: VerificationReport,
    /// LP size counters.
    pub counts: LbpCounts,
    /// Objective γ + cT.
    pub objective: f64,
    /// Seconds building the LP.
    pub build_seconds: f64,
    /// Seconds in the solver.
    pub solve_seconds: f64,
    /// Seconds verifying.
    pub verify_seconds: f64,
    /// End-to-end seconds.
    pub wall_seconds: f64,
}

/// Resolved-parameter line every run prints.
fn print_resolved(params: &ScenarioParams) {
    println!(
        "resolved: N={} eps={} beta={:.6e} delta={:.6e} M={} d={}",
        params.n_samples, params.eps, params.beta, params.delta, params.m_bound, params.d
    );
}

/// Builds, solves, and verifies one resolved run.
pub fn execute_synth(run: &ResolvedRun, dump_lp: Option<&Path>) -> Result<SynthOutcome, CliError> {
    let wall = Instant::now();
    let problem = build_lbp(&run.sys, &run.bp, &run.unsafe_desc, &run.data, &run.params, &run.opts)
        .map_err(classify_synth_error)?;
    if let Some(path) = dump_lp {
        let mut file = fs::File::create(path)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?;
        problem
            .model()
            .write_lp(&mut file)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        println!("lp dump: {}", path.display());
    }
    let result = solve_lbp(&problem, run.tolerances.solver).map_err(classify_synth_error)?;
    let fp = fingerprint(&run.sys, &run.bp, &run.unsafe_desc, &run.data);
    let cert = Certificate::new(&result, &run.params, run.sys.horizon(), fp)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let verify_start = Instant::now();
    let report = verify_certificate(
        &cert,
        &run.sys,
        &run.bp,
        &run.unsafe_desc,
        &run.data,
        run.tolerances.verify,
    )
    .map_err(|e| CliError::Verification(e.to_string()))?;
    let verify_seconds = verify_start.elapsed().as_secs_f64();
    let doc = CertificateDocument::new(&cert, &run.bp, result.objective, run.seed)
        .map_err(|e| CliError::Solver(e.to_string()))?;
    Ok(SynthOutcome {
        cert,
        doc,
        report,
        counts: problem.counts().clone(),
        objective: result.objective,
        build_seconds: problem.build_seconds(),
        solve_seconds: result.solve_seconds,
        verify_seconds,
        wall_seconds: wall.elapsed().as_secs_f64(),
    })
}

/// Resolved-tuple block of the build report.
#[derive(Serialize)]
struct ResolvedBlock {
    #[serde(rename = "N")]
    n_samples: u64,
    eps: f64,
    beta: f64,
    delta: f64,
    #[serde(rename = "M")]
    m_bound: f64,
    d: u64,
}

/// Timing block of the build report.
#[derive(Serialize)]
struct ReportTimings {
    build_seconds: f64,
    solve_seconds: f64,
    verify_seconds: f64,
    wall_seconds: f64,
}

/// The build report written next to each certificate: resolved parameters,
/// LP counters, wall-clock timings, and the verification breakdown.
#[derive(Serialize)]
struct BuildReport<'a> {
    resolved: ResolvedBlock,
    counts: &'a LbpCounts,
    gamma: f64,
    c: f64,
    objective: f64,
    safety_lower_bound: f64,
    timings: ReportTimings,
    verification: &'a VerificationReport,
    notes: &'a [String],
}

fn report_path(cert_path: &Path) -> PathBuf {
    let stem = cert_path.file_stem().and_then(|s| s.to_str()).unwrap_or("certificate");
    cert_path.with_file_name(format!("{stem}.report.json"))
}

fn write_outputs(
    run: &ResolvedRun,
    outcome: &SynthOutcome,
    out: &Path,
) -> Result<(), CliError> {
    let json = outcome.doc.to_json().map_err(|e| CliError::Solver(e.to_string()))?;
    fs::write(out, json)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", out.display())))?;
    println!("certificate: {}", out.display());
    let report = BuildReport {
        resolved: ResolvedBlock {
            n_samples: run.params.n_samples,
            eps: run.params.eps,
            beta: run.params.beta,
            delta: run.params.delta,
            m_bound: run.params.m_bound,
            d: run.params.d,
        },
        counts: &outcome.counts,
        gamma: outcome.cert.gamma,
        c: outcome.cert.c,
        objective: outcome.objective,
        safety_lower_bound: outcome.cert.safety_lower_bound,
        timings: ReportTimings {
            build_seconds: outcome.build_seconds,
            solve_seconds: outcome.solve_seconds,
            verify_seconds: outcome.verify_seconds,
            wall_seconds: outcome.wall_seconds,
        },
        verification: &outcome.report,
        notes: &run.notes,
    };
    let path = report_path(out);
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Solver(format!("cannot serialize build report: {e}")))?;
    text.push('\n');
    fs::write(&path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    println!("report: {}", path.display());
    Ok(())
}

fn print_outcome(run: &ResolvedRun, outcome: &SynthOutcome) {
    for note in &run.notes {
        println!("{note}");
    }
    print_resolved(&run.params);
    println!(
        "lp: vars={} rows={} pairs_nonempty={} pairs_pruned={} build_s={:.2}",
        outcome.counts.num_vars,
        outcome.counts.num_rows,
        outcome.counts.martingale_pairs_nonempty,
        outcome.counts.martingale_pairs_pruned,
        outcome.build_seconds
    );
    println!(
        "result: gamma={:.6} c={:.6} objective={:.6} safety_lower_bound={:.6} solve_s={:.2}",
        outcome.cert.gamma,
        outcome.cert.c,
        outcome.objective,
        outcome.cert.safety_lower_bound,
        outcome.solve_seconds
    );
    println!(
        "verification: passed={} max_violation={:.3e} verify_s={:.2}",
        outcome.report.passed, outcome.report.max_violation, outcome.verify_seconds
    );
    if outcome.report.passed && outcome.cert.safety_lower_bound == 0.0 {
        println!(
            "warning: certificate is trivial (safety_lower_bound = 0; objective = {:.4} >= 1)",
            outcome.objective
        );
    }
}

fn verification_failure(outcome: &SynthOutcome) -> CliError {
    CliError::Verification(format!(
        "max violation {:.3e} at {} exceeds tolerance {:.1e}; certificate withheld",
        outcome.report.max_violation,
        outcome.report.worst_case.as_deref().unwrap_or("unknown"),
        outcome.report.tolerance
    ))
}

// ---------------------------------------------------------------------------
// Command definitions
// ---------------------------------------------------------------------------

/// Scenario-based synthesis of piece-wise affine stochastic barrier
/// certificates for discrete-time stochastic systems.
#[derive(Parser, Debug)]
#[command(name = "pwa-barrier", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Synthesize a certificate from a config file.
    Synth(SynthArgs),
    /// Run a built-in benchmark preset and print a summary row.
    Benchmark(BenchArgs),
    /// Emit the sample-complexity curve (beta vs N) as CSV.
    Samplecurve(CurveArgs),
    /// Monte Carlo soundness check of an existing certificate.
    Simulate(SimArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonSynthArgs {
    /// Noise sample CSV overriding the config's noise source.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Certificate output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario violation level override (replaces the whole scenario block
    /// together with --beta/--n-samples).
    #[arg(long)]
    eps: Option<f64>,
    /// Scenario confidence-complement target override.
    #[arg(long)]
    beta: Option<f64>,
    /// Scenario sample-count override.
    #[arg(long = "n-samples")]
    n_samples: Option<u64>,
    /// Constrain each unsafe-classified piece everywhere instead of only on
    /// its unsafe overlap (the stricter encoding).
    #[arg(long = "paper-literal-unsafe")]
    paper_literal_unsafe: bool,
    /// Emit supermartingale blocks even for provably empty preimage sets.
    #[arg(long = "no-prune")]
    no_prune: bool,
    /// Write the LP in text format to this path before solving.
    #[arg(long = "dump-lp")]
    dump_lp: Option<PathBuf>,
}

impl CommonSynthArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            samples: self.samples.clone(),
            seed: self.seed,
            eps: self.eps,
            beta_target: self.beta,
            n_samples: self.n_samples,
            paper_literal_unsafe: self.paper_literal_unsafe,
            no_prune: self.no_prune,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Run configuration (.toml or .json).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonSynthArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Benchmark name: martingale, drone, or vehicle.
    name: String,
    /// Vehicle partition size: 18, 42, 46, or 126.
    #[arg(long)]
    pieces: Option<usize>,
    /// Repetitions with fresh sample draws (reports mean/stddev).
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[command(flatten)]
    common: CommonSynthArgs,
}

#[derive(Args, Debug)]
struct CurveArgs {
    /// Violation level ε.
    #[arg(long)]
    eps: f64,
    /// Decision-variable count d.
    #[arg(long)]
    d: u64,
    /// Comma-separated β values, e.g. "1e-3,1e-6,1e-9".
    #[arg(long)]
    betas: String,
    /// Display constant K of the reference curve N_saa = ceil(K/β).
    #[arg(long = "saa-k", default_value_t = 1.0)]
    saa_k: f64,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Run configuration the certificate was synthesized from.
    #[arg(long)]
    config: PathBuf,
    /// Certificate JSON to check.
    #[arg(long)]
    cert: PathBuf,
    /// Total Monte Carlo trials.
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    /// Per-axis start-grid counts over X0, e.g. "7" or "5,5" (default 5 per
    /// axis).
    #[arg(long)]
    grid: Option<String>,
    /// RNG seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON summary output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Subcommand drivers
// ---------------------------------------------------------------------------

fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let config = RunConfig::load(&args.config)?;
    let run = resolve_config(&config, &args.common.overrides())?;
    let outcome = execute_synth(&run, args.common.dump_lp.as_deref())?;
    print_outcome(&run, &outcome);
    if !outcome.report.passed {
        return Err(verification_failure(&outcome));
    }
    let out = args.common.out.clone().unwrap_or_else(|| PathBuf::from("certificate.json"));
    write_outputs(&run, &outcome, &out)
}

fn mean_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn cmd_benchmark(args: &BenchArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Config("--trials must be ≥ 1".into()));
    }
    let base = args.common.overrides();
    if args.trials > 1 && base.samples.is_some() {
        return Err(CliError::Config(
            "--trials > 1 needs fresh sample draws, which a fixed --samples file cannot \
             provide"
                .into(),
        ));
    }
    let mut zetas = Vec::with_capacity(args.trials);
    let mut walls = Vec::with_capacity(args.trials);
    for trial in 0..args.trials {
        let mut overrides = base.clone();
        let base_seed = base.seed.unwrap_or(0);
        overrides.seed = Some(base_seed.wrapping_add(trial as u64));
        let run = resolve_preset(&args.name, args.pieces, &overrides)?;
        let outcome = execute_synth(&run, args.common.dump_lp.as_deref())?;
        if trial == 0 {
            print_outcome(&run, &outcome);
        }
        if !outcome.report.passed {
            return Err(verification_failure(&outcome));
        }
        println!(
            "row: benchmark={} l_bar={} beta={:.3e} zeta={:.4} wall_s={:.2}",
            args.name,
            run.bp.len(),
            run.params.beta,
            outcome.cert.safety_lower_bound,
            outcome.wall_seconds
        );
        zetas.push(outcome.cert.safety_lower_bound);
        walls.push(outcome.wall_seconds);
        if trial == 0 {
            if let Some(out) = &args.common.out {
                write_outputs(&run, &outcome, out)?;
            }
        }
    }
    if args.trials > 1 {
        let (zm, zs) = mean_stddev(&zetas);
        let (wm, ws) = mean_stddev(&walls);
        println!(
            "trials: k={} zeta_mean={:.4} zeta_stddev={:.4} wall_mean_s={:.2} wall_stddev_s={:.2}",
            args.trials, zm, zs, wm, ws
        );
    }
    Ok(())
}

fn cmd_samplecurve(args: &CurveArgs) -> Result<(), CliError> {
    let betas: Result<Vec<f64>, CliError> = args
        .betas
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad beta value '{}'", tok.trim())))
        })
        .collect();
    let betas = betas?;
    let rows = sample_curve(args.eps, args.d, &betas, args.saa_k)
        .map_err(|e| CliError::Config(e.to_string()))?;
    println!("samplecurve: eps={} d={} saa_k={}", args.eps, args.d, args.saa_k);
    let mut csv = String::from("beta,N_scenario,N_saa_reference\n");
    for row in &rows {
        csv.push_str(&format!("{:e},{},{}\n", row.beta, row.n_scenario, row.n_saa_reference));
    }
    match &args.out {
        Some(path) => {
            fs::write(path, csv)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            println!("curve: {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

/// JSON summary written by `simulate`.
#[derive(Serialize)]
struct SimulateSummary<'a> {
    resolved: ResolvedBlock,
    summary: &'a SimSummary,
    mean_safety: f64,
    bound: SimulateBound,
    soundness: SoundnessBlock,
}

#[derive(Serialize)]
struct SimulateBound {
    gamma: f64,
    c: f64,
    objective: f64,
    safety_lower_bound: f64,
}

#[derive(Serialize)]
struct SoundnessBlock {
    empirical_unsafe_worst_start: f64,
    certified_unsafe_bound: f64,
    statistical_margin: f64,
    passed: bool,
}

fn parse_grid_counts(text: &str, n: usize) -> Result<Vec<usize>, CliError> {
    let counts: Result<Vec<usize>, CliError> = text
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("bad grid count '{}'", tok.trim())))
        })
        .collect();
    let counts = counts?;
    if counts.len() != n {
        return Err(CliError::Config(format!(
            "--grid has {} entries but the system has n = {n} axes",
            counts.len()
        )));
    }
    if counts.contains(&0) {
        return Err(CliError::Config("--grid counts must be ≥ 1".into()));
    }
    Ok(counts)
}

fn cmd_simulate(args: &SimArgs) -> Result<(), CliError> {
    let config = RunConfig::load(&args.config)?;
    let overrides = Overrides { seed: args.seed, ..Overrides::default() };
    let run = resolve_config(&config, &overrides)?;
    let text = fs::read_to_string(&args.cert)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.cert.display())))?;
    let doc = CertificateDocument::from_json(&text)
        .map_err(|e| CliError::Verification(format!("{}: {e}", args.cert.display())))?;
    let cert = doc
        .to_certificate()
        .map_err(|e| CliError::Verification(format!("{}: {e}", args.cert.display())))?;

    // The certificate must be bound to exactly these inputs.
    let fp = fingerprint(&run.sys, &run.bp, &run.unsafe_desc, &run.data);
    if fp != cert.fingerprint {
        return Err(CliError::Verification(format!(
            "certificate fingerprint {} does not match the config's inputs ({fp})",
            cert.fingerprint
        )));
    }
    let p = &run.params;
    let q = &cert.params;
    if p.n_samples != q.n_samples
        || (p.eps - q.eps).abs() > 1e-12
        || (p.delta - q.delta).abs() > 1e-12
        || (p.m_bound - q.m_bound).abs() > 1e-12
        || p.d != q.d
    {
        return Err(CliError::Verification(
            "certificate scenario parameters do not match the config's resolved parameters"
                .into(),
        ));
    }

    print_resolved(&cert.params);
    let n = run.sys.dim();
    let counts = match &args.grid {
        Some(text) => parse_grid_counts(text, n)?,
        None => vec![5; n],
    };
    let noise = run.noise_source()?;
    let batch = simulate(
        &run.sys,
        &run.unsafe_desc,
        &noise,
        &StartStrategy::Grid(counts),
        args.trials,
        run.sys.horizon(),
        run.seed ^ SIM_SEED_SALT,
        DEFAULT_TOL,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let summary = SimSummary::from_batch(&batch);

    let objective = cert.gamma + cert.c * cert.horizon as f64;
    let p_hat = 1.0 - batch.min_start_safety();
    let margin = 3.0 * (p_hat * (1.0 - p_hat) / args.trials as f64).sqrt();
    let allowed = objective + margin;
    let passed = p_hat <= allowed + 1e-15;
    println!(
        "soundness: passed={passed} empirical_unsafe={p_hat:.6} certified_bound={objective:.6} \
         margin={margin:.6}"
    );
    let out = SimulateSummary {
        resolved: ResolvedBlock {
            n_samples: q.n_samples,
            eps: q.eps,
            beta: q.beta,
            delta: q.delta,
            m_bound: q.m_bound,
            d: q.d,
        },
        summary: &summary,
        mean_safety: batch.mean_safety(),
        bound: SimulateBound {
            gamma: cert.gamma,
            c: cert.c,
            objective,
            safety_lower_bound: cert.safety_lower_bound,
        },
        soundness: SoundnessBlock {
            empirical_unsafe_worst_start: p_hat,
            certified_unsafe_bound: objective,
            statistical_margin: margin,
            passed,
        },
    };
    let mut text = serde_json::to_string_pretty(&out)
        .map_err(|e| CliError::Solver(format!("cannot serialize summary: {e}")))?;
    text.push('\n');
    match &args.out {
        Some(path) => {
            fs::write(path, text)
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            println!("summary: {}", path.display());
        }
        None => print!("{text}"),
    }
    if !passed {
        return Err(CliError::Verification(format!(
            "empirical unsafe fraction {p_hat:.6} exceeds the certified bound {objective:.6} \
             plus margin {margin:.6}"
        )));
    }
    Ok(())
}

/// Parses argv and runs the selected command, returning the process exit
/// code.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version print and exit successfully; real argument
            // errors are config errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Cmd::Synth(args) => cmd_synth(args),
        Cmd::Benchmark(args) => cmd_benchmark(args),
        Cmd::Samplecurve(args) => cmd_samplecurve(args),
        Cmd::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point for the binary.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}
