//! Monte Carlo trajectory simulation for empirical estimation of the
//! finite-horizon safety probability, used to sanity-check certificates.
//!
//! A trajectory starting at `x(0)` is *safe* over horizon `T` iff
//! `x(k) ∈ Xs` for every `k ∈ {0..T}`; otherwise its outcome records the
//! first exit time. [`simulate`] rolls out batches of trajectories with
//! per-trial counter-based RNG streams (derived from `(seed, trial index)`
//! by a splitmix64 mix), so results are bit-reproducible and independent of
//! how trials are partitioned across worker threads. [`empirical_safety`]
//! reports the safe fraction with an exact 95% Clopper–Pearson interval.

use crate::polytope::PolytopeError;
use crate::scenario::binomial_tail;
use crate::system::{PwaSystem, UnsafeDescription};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from simulation.
#[derive(Debug, Error)]
pub enum SimError {
    /// Underlying polyhedral computation failed.
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    /// Structurally invalid input.
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    /// Domain coverage violated: a reached state lies in no dynamics region
    /// and in no unsafe piece.
    #[error("trial {trial}, step {step}: state {state:?} lies in no dynamics region and no unsafe piece (domain coverage violated)")]
    NoCoverage { trial: usize, step: u32, state: Vec<f64> },
}

/// Zero-mean Gaussian noise with diagonal covariance (one σ per axis).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GaussianSpec {
    /// Per-axis standard deviations (all ≥ 0, finite).
    pub sigmas: Vec<f64>,
}

impl GaussianSpec {
    /// Validates the standard deviations and builds the generator.
    pub fn new(sigmas: Vec<f64>) -> Result<Self, SimError> {
        if sigmas.is_empty() || sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(SimError::Invalid("sigmas must be finite and ≥ 0".into()));
        }
        Ok(Self { sigmas })
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        for (o, &s) in out.iter_mut().zip(&self.sigmas) {
            *o = if s > 0.0 {
                // σ > 0 was validated finite; Normal::new cannot fail here.
                Normal::new(0.0, s).unwrap().sample(rng)
            } else {
                0.0
            };
        }
    }
}

/// Where simulation noise comes from: a Gaussian generator or a finite
/// sample pool drawn from with replacement.
#[derive(Debug, Clone)]
pub enum NoiseSource {
    /// Independent zero-mean Gaussian draws each step.
    Gaussian(GaussianSpec),
    /// Uniform draws (with replacement) from a fixed pool of samples.
    Pool(Vec<Vec<f64>>),
}

impl NoiseSource {
    fn dim(&self) -> Result<usize, SimError> {
        match self {
            NoiseSource::Gaussian(g) => Ok(g.sigmas.len()),
            NoiseSource::Pool(samples) => {
                let n = samples.first().map(|s| s.len()).ok_or_else(|| {
                    SimError::Invalid("noise pool must be nonempty".into())
                })?;
                if samples.iter().any(|s| s.len() != n) {
                    return Err(SimError::Invalid("noise pool samples have mixed dimensions".into()));
                }
                Ok(n)
            }
        }
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            NoiseSource::Gaussian(g) => g.sample_into(rng, out),
            NoiseSource::Pool(samples) => {
                let idx = rng.random_range(0..samples.len());
                out.copy_from_slice(&samples[idx]);
            }
        }
    }
}

/// A dataset of i.i.d. noise samples, the input to scenario synthesis.
#[derive(Debug, Clone)]
pub struct NoiseDataset {
    samples: Vec<Vec<f64>>,
    n: usize,
}

impl NoiseDataset {
    /// Wraps explicit samples, validating consistent finite coordinates.
    pub fn from_samples(samples: Vec<Vec<f64>>) -> Result<Self, SimError> {
        let n = samples.first().map(|s| s.len()).ok_or_else(|| {
            SimError::Invalid("noise dataset must contain at least one sample".into())
        })?;
        if n == 0 {
            return Err(SimError::Invalid("noise samples must have dimension ≥ 1".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.len() != n {
                return Err(SimError::Invalid(format!(
                    "noise sample {i} has dimension {} ≠ {n}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(SimError::Invalid(format!("noise sample {i} has a non-finite entry")));
            }
        }
        Ok(Self { samples, n })
    }

    /// Generates `count` Gaussian samples sequentially from one seeded
    /// stream (stable across platforms and thread counts).
    pub fn gaussian(spec: &GaussianSpec, count: usize, seed: u64) -> Result<Self, SimError> {
        if count == 0 {
            return Err(SimError::Invalid("need at least one noise sample".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = spec.sigmas.len();
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            let mut s = vec![0.0; n];
            spec.sample_into(&mut rng, &mut s);
            samples.push(s);
        }
        Ok(Self { samples, n })
    }

    /// Number of samples N.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the dataset is empty (never, for a validated dataset).
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample dimension n.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// The samples, in ingestion order.
    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Keeps only the first `count` samples.
    pub fn truncate(&mut self, count: usize) -> Result<(), SimError> {
        if count == 0 || count > self.samples.len() {
            return Err(SimError::Invalid(format!(
                "cannot truncate {} samples to {count}",
                self.samples.len()
            )));
        }
        self.samples.truncate(count);
        Ok(())
    }

    /// Reuses the dataset as a simulation noise pool.
    pub fn as_noise_source(&self) -> NoiseSource {
        NoiseSource::Pool(self.samples.clone())
    }
}

/// How trial start states are chosen.
#[derive(Debug, Clone)]
pub enum StartStrategy {
    /// Each trial draws its own start uniformly from X0 (rejection sampling
    /// inside the bounding box).
    UniformInX0,
    /// Trials cycle round-robin through this explicit list.
    Fixed(Vec<Vec<f64>>),
    /// Trials cycle round-robin through a mesh over the bounding box of X0
    /// (per-axis point counts, endpoints included), filtered to X0 members.
    Grid(Vec<usize>),
}

/// Results of a batch of simulated trajectories.
///
/// Outcome invariant: a trial is unsafe iff some `x(k) ∉ Xs` for
/// `k ∈ {0..T}`; `first_exit` is the smallest such `k`.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    n: usize,
    t: u32,
    /// Distinct start states, flattened (`starts_flat[s*n..(s+1)*n]`).
    starts_flat: Vec<f64>,
    /// Start index of each trial.
    start_of_trial: Vec<u32>,
    /// Noise draws per trial, flattened step-major (`T·n` per trial; steps
    /// after an early exit stay zero).
    noise_flat: Vec<f64>,
    /// Per-trial first exit time; `None` means safe through the horizon.
    first_exit: Vec<Option<u32>>,
}

impl TrajectoryBatch {
    /// Number of trials.
    pub fn trials(&self) -> usize {
        self.first_exit.len()
    }

    /// The horizon the batch was simulated over.
    pub fn horizon(&self) -> u32 {
        self.t
    }

    /// Number of distinct start states.
    pub fn num_starts(&self) -> usize {
        self.starts_flat.len() / self.n
    }

    /// The `s`-th distinct start state.
    pub fn start(&self, s: usize) -> &[f64] {
        &self.starts_flat[s * self.n..(s + 1) * self.n]
    }

    /// Start index used by trial `i`.
    pub fn start_of_trial(&self, i: usize) -> usize {
        self.start_of_trial[i] as usize
    }

    /// The noise draw of trial `i` at step `k` (zero past an early exit).
    pub fn noise(&self, i: usize, k: u32) -> &[f64] {
        let base = i * self.t as usize * self.n + k as usize * self.n;
        &self.noise_flat[base..base + self.n]
    }

    /// First exit time of trial `i` (`None` = safe).
    pub fn first_exit(&self, i: usize) -> Option<u32> {
        self.first_exit[i]
    }

    /// True when trial `i` stayed in Xs through the horizon.
    pub fn is_safe(&self, i: usize) -> bool {
        self.first_exit[i].is_none()
    }

    /// Number of safe trials.
    pub fn safe_count(&self) -> usize {
        self.first_exit.iter().filter(|e| e.is_none()).count()
    }

    /// Overall safe fraction (uniform average across all trials).
    pub fn mean_safety(&self) -> f64 {
        self.safe_count() as f64 / self.trials() as f64
    }

    /// Per-start `(trials, safe)` counts, indexed by start.
    pub fn per_start_counts(&self) -> Vec<(u64, u64)> {
        let mut counts = vec![(0u64, 0u64); self.num_starts()];
        for (i, exit) in self.first_exit.iter().enumerate() {
            let s = self.start_of_trial[i] as usize;
            counts[s].0 += 1;
            if exit.is_none() {
                counts[s].1 += 1;
            }
        }
        counts
    }

    /// The smallest per-start safe fraction — the quantity a certificate
    /// bounds from below, since it holds for every start in X0.
    pub fn min_start_safety(&self) -> f64 {
        self.per_start_counts()
            .iter()
            .filter(|(t, _)| *t > 0)
            .map(|(t, s)| *s as f64 / *t as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// Replays trial `i` from its recorded start and noise, returning the
    /// visited states `x(0..=k_end)` (ends early at the first exit).
    pub fn replay(&self, sys: &PwaSystem, i: usize, tol: f64) -> Vec<Vec<f64>> {
        let mut x = self.start(self.start_of_trial(i)).to_vec();
        let mut states = vec![x.clone()];
        for k in 0..self.t {
            if !sys.safe_set().contains_point(&x, tol) {
                break;
            }
            let Some(r) = sys.region_of(&x, tol) else { break };
            let mut next = sys.dynamics()[r].apply(&x);
            for (v, w) in next.iter_mut().zip(self.noise(i, k)) {
                *v += w;
            }
            x = next;
            states.push(x.clone());
        }
        states
    }
}

/// Summary statistics of a batch (JSON-serializable).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSummary {
    /// Number of trials simulated.
    pub trials: usize,
    /// Horizon T.
    pub horizon: u32,
    /// Number of trials that stayed in Xs through the horizon.
    pub safe: usize,
    /// Safe fraction.
    pub estimate: f64,
    /// 95% Clopper–Pearson lower bound on the safety probability.
    pub ci_low: f64,
    /// 95% Clopper–Pearson upper bound.
    pub ci_high: f64,
    /// Number of distinct start states.
    pub starts: usize,
    /// Smallest per-start safe fraction.
    pub min_start_safety: f64,
}

impl SimSummary {
    /// Summarizes a batch.
    pub fn from_batch(batch: &TrajectoryBatch) -> Self {
        let (estimate, (ci_low, ci_high)) = empirical_safety(batch);
        Self {
            trials: batch.trials(),
            horizon: batch.horizon(),
            safe: batch.safe_count(),
            estimate,
            ci_low,
            ci_high,
            starts: batch.num_starts(),
            min_start_safety: batch.min_start_safety(),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(trial)))
}

/// Simulates `trials` trajectories over horizon `t`.
///
/// Each step locates the dynamics region of the current state (membership
/// within `tol`, ties to the lowest index), applies its affine map, and adds
/// one noise draw. A trial stops at the first `x(k) ∉ Xs`. Reaching a state
/// covered by neither a dynamics region nor an unsafe piece is a hard error.
/// Each trial uses its own RNG stream derived from `(seed, trial)`, so the
/// result is bit-reproducible and independent of thread count.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    sys: &PwaSystem,
    unsafe_desc: &UnsafeDescription,
    noise: &NoiseSource,
    starts: &StartStrategy,
    trials: usize,
    t: u32,
    seed: u64,
    tol: f64,
) -> Result<TrajectoryBatch, SimError> {
    if trials == 0 {
        return Err(SimError::Invalid("trials must be ≥ 1".into()));
    }
    if t == 0 {
        return Err(SimError::Invalid("horizon must be ≥ 1".into()));
    }
    let n = sys.dim();
    if noise.dim()? != n {
        return Err(SimError::Invalid("noise dimension does not match the system".into()));
    }

    // Resolve starts. Fixed/Grid share a precomputed list; UniformInX0 draws
    // per trial from its own stream.
    let fixed_starts: Option<Vec<Vec<f64>>> = match starts {
        StartStrategy::UniformInX0 => None,
        StartStrategy::Fixed(list) => {
            if list.is_empty() || list.iter().any(|s| s.len() != n) {
                return Err(SimError::Invalid("fixed start list must be nonempty with matching dimension".into()));
            }
            Some(list.clone())
        }
        StartStrategy::Grid(counts) => Some(grid_starts(sys, counts, tol)?),
    };
    let x0_box = match starts {
        StartStrategy::UniformInX0 => {
            let bb = sys
                .initial_set()
                .bounding_box()?
                .ok_or_else(|| SimError::Invalid("X0 is empty".into()))?;
            if bb.0.iter().chain(bb.1.iter()).any(|v| !v.is_finite()) {
                return Err(SimError::Invalid("uniform starts need a bounded X0".into()));
            }
            Some(bb)
        }
        _ => None,
    };

    // Per trial: (start, final state, first unsafe step if any).
    type TrialRecord = (Vec<f64>, Vec<f64>, Option<u32>);
    let per_trial: Vec<Result<TrialRecord, SimError>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            let start: Vec<f64> = if let Some(list) = &fixed_starts {
                list[trial % list.len()].clone()
            } else {
                let (lo, hi) = x0_box.as_ref().unwrap();
                sample_in_x0(sys, lo, hi, &mut rng, trial)?
            };
            let mut noise_buf = vec![0.0; t as usize * n];
            let mut x = start.clone();
            let mut exit = None;
            for k in 0..t {
                if !sys.safe_set().contains_point(&x, tol) {
                    exit = Some(k);
                    break;
                }
                let Some(r) = sys.region_of(&x, tol) else {
                    if unsafe_desc.contains_point(&x, tol) {
                        // Zero-measure boundary case: the state sits on the
                        // Xs/Xu boundary inside an unsafe piece. Covered, so
                        // not an error; the trajectory counts as exited.
                        exit = Some(k);
                        break;
                    }
                    return Err(SimError::NoCoverage { trial, step: k, state: x });
                };
                let mut next = sys.dynamics()[r].apply(&x);
                let draw = &mut noise_buf[k as usize * n..(k + 1) as usize * n];
                noise.sample_into(&mut rng, draw);
                for (v, w) in next.iter_mut().zip(draw.iter()) {
                    *v += *w;
                }
                x = next;
            }
            if exit.is_none() && !sys.safe_set().contains_point(&x, tol) {
                exit = Some(t);
            }
            if exit == Some(t) && sys.region_of(&x, tol).is_none() && !unsafe_desc.contains_point(&x, tol)
            {
                return Err(SimError::NoCoverage { trial, step: t, state: x });
            }
            Ok((start, noise_buf, exit))
        })
        .collect();

    // Deduplicate starts in first-seen order (fixed/grid strategies reuse
    // their list; uniform starts are all distinct).
    let mut starts_flat = Vec::new();
    let mut start_of_trial = Vec::with_capacity(trials);
    let mut noise_flat = Vec::with_capacity(trials * t as usize * n);
    let mut first_exit = Vec::with_capacity(trials);
    if let Some(list) = &fixed_starts {
        for s in list {
            starts_flat.extend_from_slice(s);
        }
        for (trial, r) in per_trial.into_iter().enumerate() {
            let (_, nf, exit) = r?;
            start_of_trial.push((trial % list.len()) as u32);
            noise_flat.extend_from_slice(&nf);
            first_exit.push(exit);
        }
    } else {
        for r in per_trial {
            let (s, nf, exit) = r?;
            start_of_trial.push((starts_flat.len() / n) as u32);
            starts_flat.extend_from_slice(&s);
            noise_flat.extend_from_slice(&nf);
            first_exit.push(exit);
        }
    }
    Ok(TrajectoryBatch { n, t, starts_flat, start_of_trial, noise_flat, first_exit })
}

fn sample_in_x0(
    sys: &PwaSystem,
    lo: &[f64],
    hi: &[f64],
    rng: &mut ChaCha8Rng,
    trial: usize,
) -> Result<Vec<f64>, SimError> {
    for _ in 0..10_000 {
        let x: Vec<f64> = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| a + rng.random::<f64>() * (b - a))
            .collect();
        if sys.initial_set().contains_point(&x, 0.0) {
            return Ok(x);
        }
    }
    Err(SimError::Invalid(format!(
        "trial {trial}: rejection sampling found no point of X0 in 10000 draws"
    )))
}

fn grid_starts(sys: &PwaSystem, counts: &[usize], tol: f64) -> Result<Vec<Vec<f64>>, SimError> {
    let n = sys.dim();
    if counts.len() != n || counts.contains(&0) {
        return Err(SimError::Invalid("grid start counts must give ≥ 1 point per axis".into()));
    }
    let (lo, hi) = sys
        .initial_set()
        .bounding_box()?
        .ok_or_else(|| SimError::Invalid("X0 is empty".into()))?;
    if lo.iter().chain(hi.iter()).any(|v| !v.is_finite()) {
        return Err(SimError::Invalid("grid starts need a bounded X0".into()));
    }
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let c = counts[k];
            if c == 1 {
                vec![0.5 * (lo[k] + hi[k])]
            } else {
                (0..c).map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / (c - 1) as f64).collect()
            }
        })
        .collect();
    let total: usize = counts.iter().product();
    let mut out = Vec::new();
    for flat in 0..total {
        let mut rest = flat;
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            x[k] = axes[k][rest % counts[k]];
            rest /= counts[k];
        }
        if sys.initial_set().contains_point(&x, tol) {
            out.push(x);
        }
    }
    if out.is_empty() {
        return Err(SimError::Invalid("no grid point lies in X0".into()));
    }
    Ok(out)
}

/// Safe fraction of a batch with its exact 95% Clopper–Pearson interval.
pub fn empirical_safety(batch: &TrajectoryBatch) -> (f64, (f64, f64)) {
    let n = batch.trials() as u64;
    let x = batch.safe_count() as u64;
    (x as f64 / n as f64, clopper_pearson(x, n, 0.05))
}

/// Exact two-sided Clopper–Pearson interval for `x` successes in `n` trials
/// at confidence `1 − alpha`, computed by bisection on the binomial tail.
///
/// The lower bound solves `P[X ≥ x | p] = alpha/2` (0 when `x = 0`); the
/// upper bound solves `P[X ≤ x | p] = alpha/2` (1 when `x = n`).
pub fn clopper_pearson(x: u64, n: u64, alpha: f64) -> (f64, f64) {
    assert!(n >= 1 && x <= n, "need 0 ≤ x ≤ n, n ≥ 1");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
    let half = alpha / 2.0;
    // binomial_tail(n, p, d) = P[X ≤ d − 1 | p], decreasing in p.
    let lower = if x == 0 {
        0.0
    } else {
        bisect_tail(n, x, 1.0 - half)
    };
    let upper = if x == n {
        1.0
    } else {
        bisect_tail(n, x + 1, half)
    };
    (lower, upper)
}

/// Solves `binomial_tail(n, p, d) = target` for p by bisection (the tail is
/// continuous and decreasing in p, from 1 at p = 0 to 0 at p = 1).
fn bisect_tail(n: u64, d: u64, target: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if binomial_tail(n, mid, d) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{AffineMap, Polyhedron};
    use approx::assert_abs_diff_eq;

    fn shift_system(shift: f64) -> (PwaSystem, UnsafeDescription) {
        let sys = PwaSystem::new(
            vec![Polyhedron::interval(-3.5, 3.5).unwrap()],
            vec![AffineMap::new(vec![vec![1.0]], vec![shift]).unwrap()],
            Polyhedron::interval(-0.5, 0.5).unwrap(),
            Polyhedron::interval(-2.5, 2.5).unwrap(),
            10,
        )
        .unwrap();
        let unsafe_desc = UnsafeDescription::new(
            vec![
                Polyhedron::interval(-3.5, -2.5).unwrap(),
                Polyhedron::interval(2.5, 3.5).unwrap(),
            ],
            sys.safe_set(),
        )
        .unwrap();
        (sys, unsafe_desc)
    }

    fn zero_noise() -> NoiseSource {
        NoiseSource::Gaussian(GaussianSpec::new(vec![0.0]).unwrap())
    }

    #[test]
    fn identity_zero_noise_is_always_safe() {
        let (sys, ud) = shift_system(0.0);
        let batch = simulate(
            &sys,
            &ud,
            &zero_noise(),
            &StartStrategy::Fixed(vec![vec![0.25]]),
            100,
            10,
            7,
            1e-9,
        )
        .unwrap();
        assert_eq!(batch.safe_count(), 100);
        let (est, (lo, hi)) = empirical_safety(&batch);
        assert_eq!(est, 1.0);
        assert_abs_diff_eq!(lo, 0.025f64.powf(0.01), epsilon = 1e-9);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn drift_exits_at_step_three() {
        // x ↦ x + 1 from x0 = 0: x(3) = 3 ∉ [−2.5, 2.5].
        let (sys, ud) = shift_system(1.0);
        let batch = simulate(
            &sys,
            &ud,
            &zero_noise(),
            &StartStrategy::Fixed(vec![vec![0.0]]),
            5,
            10,
            7,
            1e-9,
        )
        .unwrap();
        assert_eq!(batch.safe_count(), 0);
        for i in 0..5 {
            assert_eq!(batch.first_exit(i), Some(3));
        }
        let (est, _) = empirical_safety(&batch);
        assert_eq!(est, 0.0);
    }

    #[test]
    fn replay_reconstructs_the_drift_trajectory() {
        let (sys, ud) = shift_system(1.0);
        let batch = simulate(
            &sys,
            &ud,
            &zero_noise(),
            &StartStrategy::Fixed(vec![vec![0.0]]),
            1,
            10,
            7,
            1e-9,
        )
        .unwrap();
        let states = batch.replay(&sys, 0, 1e-9);
        assert_eq!(states, vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
    }

    #[test]
    fn same_seed_is_bit_reproducible() {
        let (sys, ud) = shift_system(0.0);
        let noise = NoiseSource::Gaussian(GaussianSpec::new(vec![0.3]).unwrap());
        let run = || {
            simulate(&sys, &ud, &noise, &StartStrategy::UniformInX0, 500, 10, 42, 1e-9).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.noise_flat, b.noise_flat);
        assert_eq!(a.starts_flat, b.starts_flat);
        assert_eq!(a.first_exit, b.first_exit);
    }

    #[test]
    fn uncovered_state_is_a_hard_error() {
        // Region covers only [0, 1] but Xs reaches to 2: starting at 1.5 the
        // state is safe yet in no region and no unsafe piece.
        let sys = PwaSystem::new(
            vec![Polyhedron::interval(0.0, 1.0).unwrap()],
            vec![AffineMap::identity(1)],
            Polyhedron::interval(0.2, 0.4).unwrap(),
            Polyhedron::interval(0.0, 2.0).unwrap(),
            10,
        )
        .unwrap();
        let ud = UnsafeDescription::new(
            vec![Polyhedron::interval(2.0, 3.0).unwrap()],
            sys.safe_set(),
        )
        .unwrap();
        let err = simulate(
            &sys,
            &ud,
            &zero_noise(),
            &StartStrategy::Fixed(vec![vec![1.5]]),
            1,
            10,
            7,
            1e-9,
        );
        assert!(matches!(err, Err(SimError::NoCoverage { trial: 0, step: 0, .. })));
    }

    #[test]
    fn grid_starts_mesh_the_initial_box() {
        let (sys, ud) = shift_system(0.0);
        let batch = simulate(
            &sys,
            &ud,
            &zero_noise(),
            &StartStrategy::Grid(vec![5]),
            10,
            10,
            7,
            1e-9,
        )
        .unwrap();
        assert_eq!(batch.num_starts(), 5);
        assert_eq!(batch.start(0), &[-0.5]);
        assert_eq!(batch.start(4), &[0.5]);
        let counts = batch.per_start_counts();
        assert!(counts.iter().all(|&(t, s)| t == 2 && s == 2));
        assert_eq!(batch.min_start_safety(), 1.0);
    }

    #[test]
    fn min_start_safety_separates_good_and_bad_starts() {
        // Drift +1: starts at 0.0 exit at step 3; a start at −2.4 exits at
        // step 5 — both unsafe. Mix with... use shift 0 and one start
        // outside Xs: exits at step 0.
        let (sys, ud) = shift_system(0.0);
        let batch = simulate(
            &sys,
            &ud,
            &zero_noise(),
            // Second start sits outside X0 on purpose; the simulator takes
            // fixed starts as given.
            &StartStrategy::Fixed(vec![vec![0.0], vec![2.6]]),
            10,
            10,
            7,
            1e-9,
        )
        .unwrap();
        assert_eq!(batch.min_start_safety(), 0.0);
        assert_abs_diff_eq!(batch.mean_safety(), 0.5, epsilon = 1e-12);
        for i in 0..10 {
            if batch.start_of_trial(i) == 1 {
                assert_eq!(batch.first_exit(i), Some(0));
            }
        }
    }

    #[test]
    fn pool_noise_draws_from_the_samples() {
        let (sys, ud) = shift_system(0.0);
        let noise = NoiseSource::Pool(vec![vec![0.5]]);
        let batch = simulate(
            &sys,
            &ud,
            &noise,
            &StartStrategy::Fixed(vec![vec![0.0]]),
            1,
            10,
            7,
            1e-9,
        )
        .unwrap();
        // x(k) = 0.5k: exits when x > 2.5, first at x(6) = 3.0.
        assert_eq!(batch.first_exit(0), Some(6));
    }

    #[test]
    fn clopper_pearson_matches_tabled_values() {
        let (lo, hi) = clopper_pearson(100, 100, 0.05);
        assert_abs_diff_eq!(lo, 0.9637833, epsilon = 1e-4);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(50, 100, 0.05);
        assert_abs_diff_eq!(lo, 0.3983, epsilon = 2e-3);
        assert_abs_diff_eq!(hi, 0.6017, epsilon = 2e-3);
        let (lo, hi) = clopper_pearson(0, 100, 0.05);
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 1.0 - 0.025f64.powf(0.01), epsilon = 1e-4);
    }

    #[test]
    fn gaussian_dataset_is_deterministic_and_sized() {
        let spec = GaussianSpec::new(vec![0.1, 0.2]).unwrap();
        let a = NoiseDataset::gaussian(&spec, 50, 9).unwrap();
        let b = NoiseDataset::gaussian(&spec, 50, 9).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_eq!(a.len(), 50);
        assert_eq!(a.dim(), 2);
        // Axis 1 has double the σ of axis 0 on average (weak sanity check).
        let m0: f64 = a.samples().iter().map(|s| s[0].abs()).sum::<f64>() / 50.0;
        assert!(m0 < 0.3);
        let mut c = a.clone();
        c.truncate(10).unwrap();
        assert_eq!(c.len(), 10);
        assert_eq!(c.samples()[..], a.samples()[..10]);
    }

    #[test]
    fn x0_membership_filters_grid_points() {
        // X0 a triangle inside [0,1]²: x + y ≤ 1. 3×3 mesh of the bounding
        // box keeps only the 6 points with x + y ≤ 1.
        let sys = PwaSystem::new(
            vec![Polyhedron::box_nd(&[-5.0, -5.0], &[5.0, 5.0]).unwrap()],
            vec![AffineMap::identity(2)],
            Polyhedron::new(
                vec![
                    vec![1.0, 0.0],
                    vec![-1.0, 0.0],
                    vec![0.0, 1.0],
                    vec![0.0, -1.0],
                    vec![1.0, 1.0],
                ],
                vec![1.0, 0.0, 1.0, 0.0, 1.0],
            )
            .unwrap(),
            Polyhedron::box_nd(&[-4.0, -4.0], &[4.0, 4.0]).unwrap(),
            10,
        )
        .unwrap();
        let ud = UnsafeDescription::new(
            vec![Polyhedron::box_nd(&[4.0, 4.0], &[5.0, 5.0]).unwrap()],
            sys.safe_set(),
        )
        .unwrap();
        let batch = simulate(
            &sys,
            &ud,
            &NoiseSource::Gaussian(GaussianSpec::new(vec![0.0, 0.0]).unwrap()),
            &StartStrategy::Grid(vec![3, 3]),
            6,
            10,
            7,
            1e-9,
        )
        .unwrap();
        assert_eq!(batch.num_starts(), 6);
    }
}
