//! Safety certificates and their independent verification.
//!
//! A [`Certificate`] packages the synthesized barrier parameters with the
//! scenario parameters and the finite-horizon probabilistic bound
//! `ζ ≥ max(0, 1 − (γ + cT))`, tied to the exact inputs through a SHA-256
//! [`fingerprint`]. [`verify_certificate`] re-checks every constraint family
//! with fresh maximization problems — none of the synthesis LP's dual
//! machinery is reused — and reports the worst violation per family.
//! [`CertificateDocument`] is the serialized JSON form; two runs on the same
//! inputs produce byte-identical documents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::polytope::{dot, Polyhedron, PolytopeError, SupOutcome, DEFAULT_TOL};
use crate::scenario::{binomial_tail, tightening_margin, ScenarioError, ScenarioParams};
use crate::sim::NoiseDataset;
use crate::synth::{canonical_rep, canonical_rep_of, BarrierTheta, DualRep, SynthesisResult};
use crate::system::{positive_overlap, BarrierPartition, PwaSystem, SystemError, UnsafeDescription};

/// Errors from certificate construction, validation, or verification.
#[derive(Debug, Error)]
pub enum CertError {
    /// Underlying polytope computation failed.
    #[error("polytope error: {0}")]
    Polytope(#[from] PolytopeError),
    /// Underlying system computation failed.
    #[error("system error: {0}")]
    System(#[from] SystemError),
    /// Underlying scenario computation failed.
    #[error("scenario error: {0}")]
    Scenario(#[from] ScenarioError),
    /// The certificate is internally inconsistent or malformed.
    #[error("invalid certificate: {0}")]
    Invalid(String),
    /// The certificate's fingerprint does not match the supplied inputs.
    #[error("fingerprint mismatch: certificate has {expected}, inputs hash to {actual}")]
    Fingerprint {
        /// Fingerprint recorded in the certificate.
        expected: String,
        /// Fingerprint of the inputs handed to the verifier.
        actual: String,
    },
    /// JSON (de)serialization failed.
    #[error("serialization error: {0}")]
    Serde(String),
}

/// The certified lower bound on the probability of staying inside the safe
/// set for `horizon` steps when starting in the initial set:
/// `max(0, 1 − (γ + c·T))`.
pub fn safety_bound(gamma: f64, c: f64, horizon: u32) -> f64 {
    (1.0 - (gamma + c * horizon as f64)).max(0.0)
}

/// Evaluates the piece-wise affine barrier at `x`: the maximum of
/// `u_iᵀx + v_i` over the pieces whose closure contains `x`, and `0` when
/// `x` lies in no piece. On shared faces all incident pieces compete, so the
/// value is well defined everywhere. The result is nonnegative everywhere up
/// to the verification tolerance whenever the non-negativity family passes.
pub fn eval_barrier(theta: &BarrierTheta, bp: &BarrierPartition, x: &[f64]) -> f64 {
    let containing = bp.pieces_containing(x, DEFAULT_TOL);
    if containing.is_empty() {
        return 0.0;
    }
    containing
        .iter()
        .map(|&i| theta.piece_value(i, x))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A synthesized safety certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Barrier parameters: one affine piece per partition piece.
    pub theta: BarrierTheta,
    /// Initial-set level `γ`.
    pub gamma: f64,
    /// Supermartingale slack `c`.
    pub c: f64,
    /// Time horizon `T`.
    pub horizon: u32,
    /// Scenario parameters the barrier was synthesized under.
    pub params: ScenarioParams,
    /// The certified bound `max(0, 1 − (γ + cT))`, holding with confidence
    /// `1 − β`.
    pub safety_lower_bound: f64,
    /// SHA-256 hash binding the certificate to the exact synthesis inputs.
    pub fingerprint: String,
}

impl Certificate {
    /// Assembles a certificate from a solved synthesis result. The safety
    /// bound is computed here; `fingerprint` must come from [`fingerprint`]
    /// on the same inputs the LP was built from.
    pub fn new(
        result: &SynthesisResult,
        params: &ScenarioParams,
        horizon: u32,
        fingerprint: String,
    ) -> Result<Self, CertError> {
        let cert = Certificate {
            theta: result.theta.clone(),
            gamma: result.gamma,
            c: result.c,
            horizon,
            params: params.clone(),
            safety_lower_bound: safety_bound(result.gamma, result.c, horizon),
            fingerprint,
        };
        cert.validate()?;
        Ok(cert)
    }

    /// Checks internal consistency: the stored bound equals
    /// `max(0, 1 − (γ + cT))` and the stored `β` equals
    /// `binomial_tail(N, ε, d)`, both to 1e-12; `γ ∈ [0, M]`, `c ≥ 0`, and
    /// `δ` is at least the tightening margin `εM/(1−ε)`.
    pub fn validate(&self) -> Result<(), CertError> {
        if self.theta.u.len() != self.theta.v.len() {
            return Err(CertError::Invalid(format!(
                "theta has {} slope rows but {} intercepts",
                self.theta.u.len(),
                self.theta.v.len()
            )));
        }
        let bound = safety_bound(self.gamma, self.c, self.horizon);
        if (bound - self.safety_lower_bound).abs() > 1e-12 {
            return Err(CertError::Invalid(format!(
                "stored safety bound {} but γ + cT implies {bound}",
                self.safety_lower_bound
            )));
        }
        let beta = binomial_tail(self.params.n_samples, self.params.eps, self.params.d);
        if (beta - self.params.beta).abs() > 1e-12 {
            return Err(CertError::Invalid(format!(
                "stored beta {} but (N, eps, d) imply {beta}",
                self.params.beta
            )));
        }
        let range_tol = 1e-9;
        if self.gamma < -range_tol || self.gamma > self.params.m_bound + range_tol {
            return Err(CertError::Invalid(format!(
                "gamma = {} outside [0, M = {}]",
                self.gamma, self.params.m_bound
            )));
        }
        if self.c < -range_tol {
            return Err(CertError::Invalid(format!("c = {} is negative", self.c)));
        }
        let margin = tightening_margin(self.params.eps, self.params.m_bound)?;
        if self.params.delta < margin - 1e-12 {
            return Err(CertError::Invalid(format!(
                "delta = {} below the tightening margin {margin}",
                self.params.delta
            )));
        }
        Ok(())
    }
}

/// Hashing helper: every number enters the stream as fixed-width
/// little-endian bytes (`f64::to_bits` for floats), with `u64` length
/// delimiters ahead of each variable-length section, so distinct inputs
/// cannot collide by concatenation.
struct FingerprintHasher {
    hasher: Sha256,
}

impl FingerprintHasher {
    fn new() -> Self {
        FingerprintHasher { hasher: Sha256::new() }
    }

    fn push_u64(&mut self, v: u64) {
        self.hasher.update(v.to_le_bytes());
    }

    fn push_f64(&mut self, v: f64) {
        self.hasher.update(v.to_bits().to_le_bytes());
    }

    fn push_slice(&mut self, v: &[f64]) {
        self.push_u64(v.len() as u64);
        for &x in v {
            self.push_f64(x);
        }
    }

    fn push_poly(&mut self, p: &Polyhedron) {
        self.push_u64(p.num_rows() as u64);
        self.push_u64(p.dim() as u64);
        for (row, &h) in p.h_mat().iter().zip(p.h_vec()) {
            for &a in row {
                self.push_f64(a);
            }
            self.push_f64(h);
        }
    }

    fn finish(self) -> String {
        let digest = self.hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// SHA-256 fingerprint of the exact synthesis inputs: partition pieces and
/// parents, region and dynamics matrices, initial/safe/unsafe sets, the
/// horizon, and every noise sample. Two runs with identical inputs produce
/// identical fingerprints; any perturbation of a number changes the hash.
pub fn fingerprint(
    sys: &PwaSystem,
    bp: &BarrierPartition,
    unsafe_desc: &UnsafeDescription,
    data: &NoiseDataset,
) -> String {
    let mut h = FingerprintHasher::new();
    h.push_u64(bp.len() as u64);
    for piece in bp.pieces() {
        h.push_poly(piece);
    }
    h.push_u64(bp.parent().len() as u64);
    for &r in bp.parent() {
        h.push_u64(r as u64);
    }
    h.push_u64(sys.regions().len() as u64);
    for region in sys.regions() {
        h.push_poly(region);
    }
    h.push_u64(sys.dynamics().len() as u64);
    for map in sys.dynamics() {
        h.push_u64(map.dim() as u64);
        for row in map.a() {
            for &a in row {
                h.push_f64(a);
            }
        }
        for &b in map.b() {
            h.push_f64(b);
        }
    }
    h.push_poly(sys.initial_set());
    h.push_poly(sys.safe_set());
    h.push_u64(unsafe_desc.pieces().len() as u64);
    for piece in unsafe_desc.pieces() {
        h.push_poly(piece);
    }
    h.push_u64(sys.horizon() as u64);
    h.push_u64(data.len() as u64);
    for sample in data.samples() {
        h.push_slice(sample);
    }
    h.finish()
}

/// Worst violation found in one constraint family.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    /// Family name: `non_negativity`, `upper_bound`, `initial`, `unsafe`,
    /// or `martingale`.
    pub family: String,
    /// Subproblems actually maximized (empty sets are skipped).
    pub subproblems: usize,
    /// Subproblems skipped because the feasible set is empty.
    pub skipped_empty: usize,
    /// Largest violation over the family (`None` when nothing was checked).
    /// Positive means the constraint fails by that amount; infinite
    /// violations (an unbounded supremum) serialize as JSON `null`.
    pub worst_violation: Option<f64>,
    /// Human-readable identifier of the worst subproblem.
    pub worst_case: Option<String>,
}

/// Outcome of an independent certificate verification.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// True when every family's worst violation is at most `tolerance`.
    pub passed: bool,
    /// Violation tolerance the verdict used.
    pub tolerance: f64,
    /// Largest violation over all families.
    pub max_violation: f64,
    /// Identifier of the overall worst subproblem.
    pub worst_case: Option<String>,
    /// Per-family breakdown, in a fixed order.
    pub families: Vec<FamilyReport>,
}

/// Supremum of `objᵀx` over a canonicalized representation. Pure-interval
/// representations (every row a unit axis bound) are solved in closed form;
/// anything with a general row falls back to a fresh LP, whose infeasible
/// outcome doubles as an exact emptiness verdict.
fn sup_over_rep(rep: &DualRep, obj: &[f64]) -> Result<SupOutcome, CertError> {
    if rep.empty {
        return Ok(SupOutcome::Empty);
    }
    let n = obj.len();
    let pure_axis = rep
        .rows
        .iter()
        .all(|row| row.iter().filter(|&&a| a != 0.0).count() == 1 && row.iter().all(|&a| a == 0.0 || a.abs() == 1.0));
    if pure_axis {
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        for (row, &h) in rep.rows.iter().zip(&rep.rhs) {
            let k = row.iter().position(|&a| a != 0.0).expect("nonzero row");
            if row[k] > 0.0 {
                hi[k] = hi[k].min(h);
            } else {
                lo[k] = lo[k].max(-h);
            }
        }
        let mut total = 0.0;
        for k in 0..n {
            if obj[k] > 0.0 {
                if !hi[k].is_finite() {
                    return Ok(SupOutcome::Unbounded);
                }
                total += obj[k] * hi[k];
            } else if obj[k] < 0.0 {
                if !lo[k].is_finite() {
                    return Ok(SupOutcome::Unbounded);
                }
                total += obj[k] * lo[k];
            }
        }
        return Ok(SupOutcome::Finite(total));
    }
    let p = Polyhedron::new(rep.rows.clone(), rep.rhs.clone())?;
    Ok(p.maximize(obj)?)
}

/// Accumulates one family's worst case with deterministic tie-breaking
/// (strictly larger violations replace, so the first worst in enumeration
/// order wins).
struct FamilyAccumulator {
    family: &'static str,
    subproblems: usize,
    skipped_empty: usize,
    worst: Option<(f64, String)>,
}

impl FamilyAccumulator {
    fn new(family: &'static str) -> Self {
        FamilyAccumulator { family, subproblems: 0, skipped_empty: 0, worst: None }
    }

    fn record(&mut self, violation: f64, label: impl FnOnce() -> String) {
        self.subproblems += 1;
        let replace = match &self.worst {
            None => true,
            Some((current, _)) => violation > *current,
        };
        if replace {
            self.worst = Some((violation, label()));
        }
    }

    fn skip(&mut self) {
        self.skipped_empty += 1;
    }

    fn finish(self) -> FamilyReport {
        let (worst_violation, worst_case) = match self.worst {
            Some((v, label)) => (Some(v), Some(label)),
            None => (None, None),
        };
        FamilyReport {
            family: self.family.to_string(),
            subproblems: self.subproblems,
            skipped_empty: self.skipped_empty,
            worst_violation,
            worst_case,
        }
    }
}

/// Violation of `sup objᵀx + constant ≤ 0` over a set; `None` when the set
/// is empty (nothing to check).
fn violation_of(
    rep: &DualRep,
    obj: &[f64],
    constant: f64,
) -> Result<Option<f64>, CertError> {
    match sup_over_rep(rep, obj)? {
        SupOutcome::Empty => Ok(None),
        SupOutcome::Unbounded => Ok(Some(f64::INFINITY)),
        SupOutcome::Finite(s) => Ok(Some(s + constant)),
    }
}

/// Independently re-checks every constraint family of a certificate with
/// fresh maximization problems over the original (non-dualized) sets:
///
/// 1. `B_i ≥ 0` on each piece;
/// 2. `B_i ≤ M` on each piece;
/// 3. `B_i ≤ γ` on piece ∩ initial set, for initial pieces;
/// 4. `B_i ≥ 1` on piece ∩ unsafe piece, for each positively overlapping
///    unsafe piece (certificates synthesized under the stricter
///    all-of-the-piece semantics satisfy this a fortiori);
/// 5. `B_j(A_r x + b_r + η_ω) ≤ B_i(x) + c − δ` on every nonempty
///    `Q_ij(ω)`, for safe pieces `i`, all targets `j`, all samples `ω`.
///
/// The certificate's fingerprint must match the supplied inputs, and its
/// internal consistency is re-validated. The report passes when every
/// family's worst violation is at most `tol`.
pub fn verify_certificate(
    cert: &Certificate,
    sys: &PwaSystem,
    bp: &BarrierPartition,
    unsafe_desc: &UnsafeDescription,
    data: &NoiseDataset,
    tol: f64,
) -> Result<VerificationReport, CertError> {
    cert.validate()?;
    let actual = fingerprint(sys, bp, unsafe_desc, data);
    if actual != cert.fingerprint {
        return Err(CertError::Fingerprint { expected: cert.fingerprint.clone(), actual });
    }
    let l_bar = bp.len();
    if cert.theta.len() != l_bar {
        return Err(CertError::Invalid(format!(
            "certificate has {} barrier pieces but the partition has {l_bar}",
            cert.theta.len()
        )));
    }
    let n = sys.dim();
    if cert.theta.u.iter().any(|u| u.len() != n) {
        return Err(CertError::Invalid(format!("barrier slopes are not {n}-dimensional")));
    }
    if cert.horizon != sys.horizon() {
        return Err(CertError::Invalid(format!(
            "certificate horizon {} but system horizon {}",
            cert.horizon,
            sys.horizon()
        )));
    }
    if cert.params.n_samples as usize != data.len() {
        return Err(CertError::Invalid(format!(
            "certificate declares N = {} but the dataset has {} samples",
            cert.params.n_samples,
            data.len()
        )));
    }

    let theta = &cert.theta;
    let piece_reps: Vec<DualRep> = bp.pieces().iter().map(canonical_rep_of).collect();
    let neg_u: Vec<Vec<f64>> =
        theta.u.iter().map(|u| u.iter().map(|&a| -a).collect()).collect();

    // Families 1 and 2 over the full pieces.
    let mut nonneg = FamilyAccumulator::new("non_negativity");
    let mut upper = FamilyAccumulator::new("upper_bound");
    for i in 0..l_bar {
        match violation_of(&piece_reps[i], &neg_u[i], -theta.v[i])? {
            Some(v) => nonneg.record(v, || format!("piece {i}")),
            None => nonneg.skip(),
        }
        match violation_of(&piece_reps[i], &theta.u[i], theta.v[i] - cert.params.m_bound)? {
            Some(v) => upper.record(v, || format!("piece {i}")),
            None => upper.skip(),
        }
    }

    // Family 3 over piece ∩ X0.
    let mut init = FamilyAccumulator::new("initial");
    for &i in bp.index_initial() {
        let set = bp.pieces()[i].intersect(sys.initial_set())?;
        let rep = canonical_rep_of(&set);
        match violation_of(&rep, &theta.u[i], theta.v[i] - cert.gamma)? {
            Some(v) => init.record(v, || format!("piece {i}")),
            None => init.skip(),
        }
    }

    // Family 4 over piece ∩ unsafe piece.
    let mut unsafe_fam = FamilyAccumulator::new("unsafe");
    for &i in bp.index_unsafe() {
        for (u_idx, upiece) in unsafe_desc.pieces().iter().enumerate() {
            if !positive_overlap(&bp.pieces()[i], upiece)? {
                continue;
            }
            let set = bp.pieces()[i].intersect(upiece)?;
            let rep = canonical_rep_of(&set);
            match violation_of(&rep, &neg_u[i], 1.0 - theta.v[i])? {
                Some(v) => unsafe_fam.record(v, || format!("piece {i}, unsafe piece {u_idx}")),
                None => unsafe_fam.skip(),
            }
        }
    }

    // Family 5 over the preimage sets Q_ij(ω), mirroring the synthesis
    // enumeration: for a fixed (i, j) the rows are constant and only the
    // right-hand side varies with the sample.
    let i_s: Vec<usize> = bp.index_safe().to_vec();
    let sources: Vec<DualRep> = i_s
        .iter()
        .map(|&i| -> Result<DualRep, CertError> {
            Ok(canonical_rep_of(&bp.pieces()[i].intersect(sys.safe_set())?))
        })
        .collect::<Result<_, _>>()?;
    let samples = data.samples();
    let tasks: Vec<(usize, usize)> = i_s
        .iter()
        .enumerate()
        .flat_map(|(pos, _)| (0..l_bar).map(move |j| (pos, j)))
        .collect();
    type TaskOutcome = (usize, usize, Option<(f64, usize)>);
    let task_results: Vec<Result<TaskOutcome, CertError>> = tasks
        .par_iter()
        .map(|&(pos, j)| {
            let i = i_s[pos];
            let r = bp.parent()[i];
            let a_mat = sys.dynamics()[r].a();
            let b_dyn = sys.dynamics()[r].b();
            let src = &sources[pos];
            if src.empty {
                return Ok((0, samples.len(), None));
            }
            let tgt = &piece_reps[j];
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(src.rows.len() + tgt.rows.len());
            rows.extend(src.rows.iter().cloned());
            let mut base_rhs: Vec<f64> = src.rhs.clone();
            let mut eta_coef: Vec<Vec<f64>> = vec![vec![0.0; n]; src.rows.len()];
            for (trow, &th) in tgt.rows.iter().zip(&tgt.rhs) {
                let mapped: Vec<f64> =
                    (0..n).map(|k| (0..n).map(|t| trow[t] * a_mat[t][k]).sum()).collect();
                rows.push(mapped);
                base_rhs.push(th - dot(trow, b_dyn));
                eta_coef.push(trow.iter().map(|&v| -v).collect());
            }
            // Objective (A_rᵀ u_j − u_i)ᵀ x; the sample enters the constant.
            let obj: Vec<f64> = (0..n)
                .map(|k| {
                    (0..n).map(|t| a_mat[t][k] * theta.u[j][t]).sum::<f64>() - theta.u[i][k]
                })
                .collect();
            let mut checked = 0usize;
            let mut skipped = 0usize;
            let mut worst: Option<(f64, usize)> = None;
            for (omega, eta) in samples.iter().enumerate() {
                let rhs: Vec<f64> = base_rhs
                    .iter()
                    .zip(&eta_coef)
                    .map(|(&b, coef)| b + dot(coef, eta))
                    .collect();
                let rep = canonical_rep(&rows, &rhs, n);
                let shifted: Vec<f64> =
                    (0..n).map(|t| b_dyn[t] + eta[t]).collect();
                let constant = dot(&theta.u[j], &shifted) + theta.v[j] - theta.v[i]
                    + cert.params.delta
                    - cert.c;
                match violation_of(&rep, &obj, constant)? {
                    None => skipped += 1,
                    Some(v) => {
                        checked += 1;
                        let replace = match &worst {
                            None => true,
                            Some((current, _)) => v > *current,
                        };
                        if replace {
                            worst = Some((v, omega));
                        }
                    }
                }
            }
            Ok((checked, skipped, worst))
        })
        .collect();
    let mut martingale = FamilyAccumulator::new("martingale");
    for (task_idx, result) in task_results.into_iter().enumerate() {
        let (checked, skipped, worst) = result?;
        let (pos, j) = tasks[task_idx];
        let i = i_s[pos];
        // Fold the per-task worst into the family accumulator while keeping
        // the subproblem counts exact.
        martingale.subproblems += checked;
        martingale.skipped_empty += skipped;
        if let Some((v, omega)) = worst {
            let replace = match &martingale.worst {
                None => true,
                Some((current, _)) => v > *current,
            };
            if replace {
                martingale.worst = Some((v, format!("i = {i}, j = {j}, omega = {omega}")));
            }
        }
    }

    let families =
        vec![nonneg.finish(), upper.finish(), init.finish(), unsafe_fam.finish(), martingale.finish()];
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_case = None;
    for fam in &families {
        if let Some(v) = fam.worst_violation {
            if v > max_violation {
                max_violation = v;
                worst_case =
                    fam.worst_case.as_ref().map(|label| format!("{}: {label}", fam.family));
            }
        }
    }
    if !max_violation.is_finite() && worst_case.is_none() {
        max_violation = 0.0;
    }
    let passed = max_violation <= tol;
    Ok(VerificationReport { passed, tolerance: tol, max_violation, worst_case, families })
}

/// Result of the randomized inner-approximation check.
#[derive(Debug, Clone, Serialize)]
pub struct InnerApproxReport {
    /// Cases generated.
    pub cases: usize,
    /// Cases where the premise `P{g + δ ≤ h} ≥ 1 − ε` actually held.
    pub premise_held: usize,
    /// Premise-holding cases where `E[g] ≤ h` failed — always 0 when the
    /// tightening margin is sound.
    pub counterexamples: usize,
    /// Largest `E[g] − h` over premise-holding cases (≤ 0 when sound).
    pub worst_margin: f64,
}

/// Randomized check of the chance-constraint inner approximation: for a
/// distribution with finite support on `[0, M]` and `δ ≥ εM/(1−ε)`, whenever
/// `P{g + δ ≤ h} ≥ 1 − ε` holds for some level `h ≥ 0`, the expectation
/// satisfies `E[g] ≤ h`. Each case draws a random support, weights, `M`,
/// `ε`, and a level `h` placed near the `(1−ε)`-quantile of `g + δ` so the
/// premise frequently holds with no slack to spare; cases whose premise
/// fails are generated deliberately and skipped.
pub fn inner_approx_oracle(num_cases: usize, seed: u64) -> InnerApproxReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut premise_held = 0usize;
    let mut counterexamples = 0usize;
    let mut worst_margin = f64::NEG_INFINITY;
    for case in 0..num_cases {
        let k = rng.random_range(2..=6usize);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0f64)).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let m_bound = rng.random_range(1.0..2.0f64);
        let eps = if case % 10 == 0 { 0.0 } else { rng.random_range(0.001..0.45f64) };
        // ε = 0 means no violation mass is allowed, so no margin is needed.
        let delta = if eps == 0.0 {
            0.0
        } else {
            tightening_margin(eps, m_bound).expect("valid margin inputs by construction")
        };
        let support: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..m_bound)).collect();
        // Candidate level: exact (1−ε)-quantile of g + δ, the tightest h
        // that can satisfy the premise; sometimes lifted clear of it,
        // sometimes undercut so the premise fails.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| support[a].total_cmp(&support[b]));
        let mut mass = 0.0;
        let mut quantile = support[order[k - 1]] + delta;
        for &idx in &order {
            mass += weights[idx];
            if mass >= 1.0 - eps - 1e-12 {
                quantile = support[idx] + delta;
                break;
            }
        }
        let style = rng.random_range(0..3u32);
        let h = match style {
            0 => quantile,
            1 => quantile + rng.random_range(0.0..0.3f64),
            _ => (quantile - rng.random_range(0.001..0.1f64)).max(0.0),
        };
        let premise_mass: f64 = (0..k)
            .filter(|&i| support[i] + delta <= h + 1e-15)
            .map(|i| weights[i])
            .sum();
        if premise_mass < 1.0 - eps - 1e-12 {
            continue;
        }
        premise_held += 1;
        let expectation: f64 = (0..k).map(|i| weights[i] * support[i]).sum();
        let margin = expectation - h;
        if margin > worst_margin {
            worst_margin = margin;
        }
        if margin > 1e-12 * h.abs().max(1.0) {
            counterexamples += 1;
        }
    }
    if !worst_margin.is_finite() {
        worst_margin = 0.0;
    }
    InnerApproxReport { cases: num_cases, premise_held, counterexamples, worst_margin }
}

/// Run metadata in a serialized certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocMeta {
    /// Version of the tool that produced the certificate.
    pub tool_version: String,
    /// SHA-256 fingerprint of the synthesis inputs.
    pub fingerprint: String,
    /// RNG seed the run resolved to.
    pub seed: u64,
}

/// Scenario block of a serialized certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocScenario {
    /// Number of noise samples.
    #[serde(rename = "N")]
    pub n_samples: u64,
    /// Violation level ε.
    pub eps: f64,
    /// Confidence complement β.
    pub beta: f64,
    /// Tightening margin δ.
    pub delta: f64,
    /// Barrier upper bound M.
    #[serde(rename = "M")]
    pub m_bound: f64,
    /// Decision-variable count d.
    pub d: u64,
}

/// One barrier piece in a serialized certificate: the polyhedron `Hx ≤ h`,
/// the affine parameters, and the parent region index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocPiece {
    /// Constraint matrix rows.
    #[serde(rename = "H")]
    pub h_mat: Vec<Vec<f64>>,
    /// Right-hand side.
    #[serde(rename = "h")]
    pub h_vec: Vec<f64>,
    /// Slope `u_i`.
    pub u: Vec<f64>,
    /// Intercept `v_i`.
    pub v: f64,
    /// Index of the dynamics region containing the piece.
    pub parent: usize,
}

/// Barrier block of a serialized certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocBarrier {
    /// All pieces with their affine parameters.
    pub pieces: Vec<DocPiece>,
    /// Initial-set level γ.
    pub gamma: f64,
    /// Supermartingale slack c.
    pub c: f64,
    /// Time horizon.
    #[serde(rename = "T")]
    pub horizon: u32,
}

/// Wall-clock timings. Never written into certificates (so same-input runs
/// stay byte-identical); the build report carries the measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTimings {
    /// Seconds spent building the LP.
    pub build_seconds: f64,
    /// Seconds spent in the solver.
    pub solve_seconds: f64,
}

/// Result block of a serialized certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocResult {
    /// The certified probability lower bound.
    pub safety_lower_bound: f64,
    /// LP objective γ + cT.
    pub objective: f64,
    /// Always `null` in certificates; see [`DocTimings`].
    pub timings: Option<DocTimings>,
}

/// The serialized certificate: what the command "synth" writes and the
/// commands "simulate"/"verify" read back. Serialization is deterministic —
/// fixed field order, no timestamps — so identical runs produce identical
/// bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateDocument {
    /// Tool version, fingerprint, seed.
    pub meta: DocMeta,
    /// Scenario parameters.
    pub scenario: DocScenario,
    /// Barrier pieces and parameters.
    pub barrier: DocBarrier,
    /// Bound and objective.
    pub result: DocResult,
}

impl CertificateDocument {
    /// Assembles the document for a certificate over a partition.
    pub fn new(
        cert: &Certificate,
        bp: &BarrierPartition,
        objective: f64,
        seed: u64,
    ) -> Result<Self, CertError> {
        if cert.theta.len() != bp.len() {
            return Err(CertError::Invalid(format!(
                "certificate has {} pieces but the partition has {}",
                cert.theta.len(),
                bp.len()
            )));
        }
        let pieces = bp
            .pieces()
            .iter()
            .enumerate()
            .map(|(i, piece)| DocPiece {
                h_mat: piece.h_mat().to_vec(),
                h_vec: piece.h_vec().to_vec(),
                u: cert.theta.u[i].clone(),
                v: cert.theta.v[i],
                parent: bp.parent()[i],
            })
            .collect();
        Ok(CertificateDocument {
            meta: DocMeta {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                fingerprint: cert.fingerprint.clone(),
                seed,
            },
            scenario: DocScenario {
                n_samples: cert.params.n_samples,
                eps: cert.params.eps,
                beta: cert.params.beta,
                delta: cert.params.delta,
                m_bound: cert.params.m_bound,
                d: cert.params.d,
            },
            barrier: DocBarrier {
                pieces,
                gamma: cert.gamma,
                c: cert.c,
                horizon: cert.horizon,
            },
            result: DocResult {
                safety_lower_bound: cert.safety_lower_bound,
                objective,
                timings: None,
            },
        })
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String, CertError> {
        let mut s =
            serde_json::to_string_pretty(self).map_err(|e| CertError::Serde(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Parses a document from JSON.
    pub fn from_json(s: &str) -> Result<Self, CertError> {
        serde_json::from_str(s).map_err(|e| CertError::Serde(e.to_string()))
    }

    /// Rebuilds the in-memory certificate (validating consistency).
    pub fn to_certificate(&self) -> Result<Certificate, CertError> {
        let theta = BarrierTheta {
            u: self.barrier.pieces.iter().map(|p| p.u.clone()).collect(),
            v: self.barrier.pieces.iter().map(|p| p.v).collect(),
        };
        let cert = Certificate {
            theta,
            gamma: self.barrier.gamma,
            c: self.barrier.c,
            horizon: self.barrier.horizon,
            params: ScenarioParams {
                n_samples: self.scenario.n_samples,
                eps: self.scenario.eps,
                d: self.scenario.d,
                beta: self.scenario.beta,
                m_bound: self.scenario.m_bound,
                delta: self.scenario.delta,
            },
            safety_lower_bound: self.result.safety_lower_bound,
            fingerprint: self.meta.fingerprint.clone(),
        };
        cert.validate()?;
        Ok(cert)
    }

    /// The piece polyhedra stored in the document.
    pub fn piece_polyhedra(&self) -> Result<Vec<Polyhedron>, CertError> {
        self.barrier
            .pieces
            .iter()
            .map(|p| Ok(Polyhedron::new(p.h_mat.clone(), p.h_vec.clone())?))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::AffineMap;
    use crate::scenario::decision_count;
    use crate::synth::{build_lbp, solve_lbp, BuildOptions};
    use approx::assert_relative_eq;

    fn interval(lo: f64, hi: f64) -> Polyhedron {
        Polyhedron::interval(lo, hi).unwrap()
    }

    /// 1D world on [−3.5, 3.5]: two pieces meeting at 0, identity dynamics.
    /// Unsafe beyond ±2.5, safe inside, initial [−0.4, 0.4].
    fn absolute_value_world() -> (PwaSystem, UnsafeDescription, BarrierPartition) {
        let sys = PwaSystem::new(
            vec![interval(-3.5, 3.5)],
            vec![AffineMap::identity(1)],
            interval(-0.4, 0.4),
            interval(-2.5, 2.5),
            10,
        )
        .unwrap();
        let unsafe_desc = UnsafeDescription::new(
            vec![interval(-3.5, -2.5), interval(2.5, 3.5)],
            sys.safe_set(),
        )
        .unwrap();
        let bp = BarrierPartition::from_pieces(
            vec![interval(-3.5, 0.0), interval(0.0, 3.5)],
            vec![0, 0],
            &sys,
            &unsafe_desc,
        )
        .unwrap();
        (sys, unsafe_desc, bp)
    }

    fn absolute_value_params(n_samples: u64, d: u64) -> ScenarioParams {
        let eps = 0.1;
        let m_bound = 2.0;
        let delta = tightening_margin(eps, m_bound).unwrap();
        ScenarioParams {
            n_samples,
            eps,
            d,
            beta: binomial_tail(n_samples, eps, d),
            m_bound,
            delta,
        }
    }

    fn absolute_value_certificate() -> (PwaSystem, UnsafeDescription, BarrierPartition, NoiseDataset, Certificate)
    {
        let (sys, unsafe_desc, bp) = absolute_value_world();
        let data = NoiseDataset::from_samples(vec![vec![0.0]]).unwrap();
        let params = absolute_value_params(1, decision_count(2, 1));
        let delta = params.delta;
        let theta =
            BarrierTheta { u: vec![vec![-0.5], vec![0.5]], v: vec![0.0, 0.0] };
        let fp = fingerprint(&sys, &bp, &unsafe_desc, &data);
        let cert = Certificate {
            theta,
            gamma: 0.2,
            c: delta,
            horizon: sys.horizon(),
            params,
            safety_lower_bound: safety_bound(0.2, delta, sys.horizon()),
            fingerprint: fp,
        };
        (sys, unsafe_desc, bp, data, cert)
    }

    #[test]
    fn safety_bound_examples() {
        assert_relative_eq!(safety_bound(0.1, 0.02, 10), 0.7, max_relative = 1e-12);
        assert_eq!(safety_bound(0.0, 0.0, 5), 1.0);
        assert_eq!(safety_bound(0.9, 0.05, 10), 0.0);
        assert_eq!(safety_bound(1.5, 0.0, 1), 0.0);
    }

    #[test]
    fn eval_barrier_piece_max_and_outside_zero() {
        let (_sys, _unsafe_desc, bp) = absolute_value_world();
        let theta = BarrierTheta { u: vec![vec![-0.5], vec![0.5]], v: vec![0.0, 0.0] };
        // Interior of the right piece.
        assert_relative_eq!(eval_barrier(&theta, &bp, &[1.0]), 0.5);
        // Shared face: both pieces contain 0; both evaluate to 0.
        assert_relative_eq!(eval_barrier(&theta, &bp, &[0.0]), 0.0);
        // Outside every piece.
        assert_eq!(eval_barrier(&theta, &bp, &[4.0]), 0.0);
        // A mismatched pair of intercepts makes the face value the max.
        let skew = BarrierTheta { u: vec![vec![-0.5], vec![0.5]], v: vec![0.1, 0.0] };
        assert_relative_eq!(eval_barrier(&skew, &bp, &[0.0]), 0.1);
    }

    #[test]
    fn fingerprint_is_deterministic_and_sensitive() {
        let (sys, unsafe_desc, bp) = absolute_value_world();
        let data = NoiseDataset::from_samples(vec![vec![0.25], vec![-0.5]]).unwrap();
        let a = fingerprint(&sys, &bp, &unsafe_desc, &data);
        let b = fingerprint(&sys, &bp, &unsafe_desc, &data);
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert!(a.chars().all(|ch| ch.is_ascii_hexdigit()));
        // One sample perturbed by 1 ulp-scale amount changes the hash.
        let data2 = NoiseDataset::from_samples(vec![vec![0.25 + 1e-12], vec![-0.5]]).unwrap();
        assert_ne!(a, fingerprint(&sys, &bp, &unsafe_desc, &data2));
        // A different horizon changes the hash.
        let sys2 = PwaSystem::new(
            sys.regions().to_vec(),
            sys.dynamics().to_vec(),
            sys.initial_set().clone(),
            sys.safe_set().clone(),
            11,
        )
        .unwrap();
        assert_ne!(a, fingerprint(&sys2, &bp, &unsafe_desc, &data));
    }

    #[test]
    fn certificate_validation_catches_inconsistencies() {
        let (_sys, _unsafe_desc, _bp, _data, cert) = absolute_value_certificate();
        cert.validate().unwrap();
        let mut bad_bound = cert.clone();
        bad_bound.safety_lower_bound += 1e-6;
        assert!(matches!(bad_bound.validate(), Err(CertError::Invalid(_))));
        let mut bad_beta = cert.clone();
        bad_beta.params.beta *= 1.5;
        assert!(matches!(bad_beta.validate(), Err(CertError::Invalid(_))));
        let mut bad_delta = cert.clone();
        bad_delta.params.delta = 0.0;
        assert!(matches!(bad_delta.validate(), Err(CertError::Invalid(_))));
        let mut bad_gamma = cert;
        bad_gamma.gamma = -0.5;
        bad_gamma.safety_lower_bound =
            safety_bound(bad_gamma.gamma, bad_gamma.c, bad_gamma.horizon);
        assert!(matches!(bad_gamma.validate(), Err(CertError::Invalid(_))));
    }

    /// Hand-computed family maxima for the |x|/2 barrier with γ = 0.2,
    /// M = 2, identity dynamics, and the single sample η = 0:
    /// non-negativity and initial are tight (0); the unsafe margin is
    /// 1 − B(±2.5) = −0.25; the upper margin is B(±3.5) − 2 = −0.25; the
    /// martingale rows reach δ − c = 0.
    #[test]
    fn verify_hand_built_barrier_exact_worsts() {
        let (sys, unsafe_desc, bp, data, cert) = absolute_value_certificate();
        let report =
            verify_certificate(&cert, &sys, &bp, &unsafe_desc, &data, 1e-9).unwrap();
        assert!(report.passed, "report: {report:?}");
        let by_name = |name: &str| {
            report
                .families
                .iter()
                .find(|f| f.family == name)
                .unwrap_or_else(|| panic!("missing family {name}"))
        };
        assert_relative_eq!(
            by_name("non_negativity").worst_violation.unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            by_name("initial").worst_violation.unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            by_name("unsafe").worst_violation.unwrap(),
            -0.25,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            by_name("upper_bound").worst_violation.unwrap(),
            -0.25,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            by_name("martingale").worst_violation.unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_eq!(by_name("non_negativity").subproblems, 2);
        assert_eq!(by_name("initial").subproblems, 2);
        assert_eq!(by_name("unsafe").subproblems, 2);
        // Q_ij(0): within-piece sets are the pieces ∩ Xs; the cross pairs
        // meet only at the shared face {0}, which is nonempty.
        assert_eq!(by_name("martingale").subproblems, 4);
    }

    #[test]
    fn verify_detects_perturbations() {
        let (sys, unsafe_desc, bp, data, cert) = absolute_value_certificate();
        // γ pulled below the attained initial maximum 0.2 ⇒ initial family
        // violation of exactly the gap.
        let mut bad = cert.clone();
        bad.gamma = 0.15;
        bad.safety_lower_bound = safety_bound(bad.gamma, bad.c, bad.horizon);
        let report = verify_certificate(&bad, &sys, &bp, &unsafe_desc, &data, 1e-9).unwrap();
        assert!(!report.passed);
        assert_relative_eq!(report.max_violation, 0.05, epsilon = 1e-12);
        assert!(report.worst_case.as_deref().unwrap().starts_with("initial"));
        // c pulled below δ ⇒ martingale violation of the gap.
        let mut bad_c = cert.clone();
        bad_c.c = cert.c - 0.1;
        bad_c.safety_lower_bound = safety_bound(bad_c.gamma, bad_c.c, bad_c.horizon);
        let report =
            verify_certificate(&bad_c, &sys, &bp, &unsafe_desc, &data, 1e-9).unwrap();
        assert!(!report.passed);
        assert_relative_eq!(report.max_violation, 0.1, epsilon = 1e-12);
        assert!(report.worst_case.as_deref().unwrap().starts_with("martingale"));
    }

    #[test]
    fn verify_rejects_fingerprint_mismatch() {
        let (sys, unsafe_desc, bp, data, mut cert) = absolute_value_certificate();
        cert.fingerprint = "0".repeat(64);
        let err = verify_certificate(&cert, &sys, &bp, &unsafe_desc, &data, 1e-6).unwrap_err();
        assert!(matches!(err, CertError::Fingerprint { .. }));
    }

    #[test]
    fn verify_rejects_wrong_piece_count() {
        let (sys, unsafe_desc, bp, data, mut cert) = absolute_value_certificate();
        cert.theta.u.push(vec![0.0]);
        cert.theta.v.push(0.0);
        let err = verify_certificate(&cert, &sys, &bp, &unsafe_desc, &data, 1e-6).unwrap_err();
        assert!(matches!(err, CertError::Invalid(_)));
    }

    /// End-to-end: a certificate produced by the solver passes independent
    /// verification at 1e-6, and lowering c by 0.1 yields a positive
    /// martingale violation near 0.1.
    #[test]
    fn solver_certificate_passes_verification() {
        let (sys, unsafe_desc, bp) = absolute_value_world();
        let data = NoiseDataset::from_samples(vec![
            vec![0.05],
            vec![-0.04],
            vec![0.01],
            vec![-0.02],
            vec![0.03],
        ])
        .unwrap();
        let params = absolute_value_params(5, decision_count(2, 1));
        let problem =
            build_lbp(&sys, &bp, &unsafe_desc, &data, &params, &BuildOptions::default())
                .unwrap();
        let result = solve_lbp(&problem, 1e-8).unwrap();
        let fp = fingerprint(&sys, &bp, &unsafe_desc, &data);
        let cert = Certificate::new(&result, &params, sys.horizon(), fp).unwrap();
        let report =
            verify_certificate(&cert, &sys, &bp, &unsafe_desc, &data, 1e-6).unwrap();
        assert!(report.passed, "report: {report:?}");

        let mut perturbed = cert.clone();
        perturbed.c = (cert.c - 0.1).max(0.0);
        perturbed.safety_lower_bound =
            safety_bound(perturbed.gamma, perturbed.c, perturbed.horizon);
        let report =
            verify_certificate(&perturbed, &sys, &bp, &unsafe_desc, &data, 1e-6).unwrap();
        assert!(!report.passed);
        let mart = report.families.iter().find(|f| f.family == "martingale").unwrap();
        assert!(mart.worst_violation.unwrap() > 0.05, "report: {report:?}");
    }

    #[test]
    fn inner_approx_oracle_finds_no_counterexamples() {
        let report = inner_approx_oracle(500, 42);
        assert_eq!(report.cases, 500);
        assert!(report.premise_held > 150, "held: {}", report.premise_held);
        assert_eq!(report.counterexamples, 0);
        assert!(report.worst_margin <= 1e-12, "worst: {}", report.worst_margin);
    }

    /// Two-point boundary case, checked by hand: weights (0.8, 0.2),
    /// support (0.25, 1), M = 1, ε = 0.2, δ = εM/(1−ε) = 0.25, h = 0.5.
    /// The premise holds with mass exactly 1 − ε and E[g] = 0.4 ≤ 0.5.
    #[test]
    fn inner_approx_two_point_boundary_case() {
        let eps = 0.2;
        let m_bound = 1.0;
        let delta = tightening_margin(eps, m_bound).unwrap();
        assert_relative_eq!(delta, 0.25, max_relative = 1e-15);
        let weights = [0.8, 0.2];
        let support = [0.25, 1.0];
        let h = 0.5;
        let premise_mass: f64 = (0..2)
            .filter(|&i| support[i] + delta <= h + 1e-15)
            .map(|i| weights[i])
            .sum();
        assert!(premise_mass >= 1.0 - eps - 1e-12);
        let expectation: f64 = (0..2).map(|i| weights[i] * support[i]).sum();
        assert_relative_eq!(expectation, 0.4, max_relative = 1e-15);
        assert!(expectation <= h);
    }

    #[test]
    fn document_roundtrip_and_determinism() {
        let (_sys, _unsafe_desc, bp, _data, cert) = absolute_value_certificate();
        let objective = cert.gamma + cert.c * cert.horizon as f64;
        let doc = CertificateDocument::new(&cert, &bp, objective, 7).unwrap();
        let json1 = doc.to_json().unwrap();
        let json2 = CertificateDocument::new(&cert, &bp, objective, 7)
            .unwrap()
            .to_json()
            .unwrap();
        assert_eq!(json1, json2);
        assert!(json1.ends_with('\n'));
        let parsed = CertificateDocument::from_json(&json1).unwrap();
        assert_eq!(parsed, doc);
        let recovered = parsed.to_certificate().unwrap();
        assert_eq!(recovered, cert);
        assert!(json1.contains("\"timings\": null"));
        assert!(json1.contains("\"N\": 1"));
        assert!(json1.contains("\"M\": 2.0"));
        assert!(json1.contains("\"T\": 10"));
        let polys = parsed.piece_polyhedra().unwrap();
        assert_eq!(polys.len(), 2);
        assert!(polys[0].contains_point(&[-1.0], 1e-9));
    }

    #[test]
    fn document_rejects_corrupted_scenario_block() {
        let (_sys, _unsafe_desc, bp, _data, cert) = absolute_value_certificate();
        let objective = cert.gamma + cert.c * cert.horizon as f64;
        let doc = CertificateDocument::new(&cert, &bp, objective, 7).unwrap();
        let mut corrupt = doc.clone();
        corrupt.scenario.beta = 0.123;
        assert!(matches!(corrupt.to_certificate(), Err(CertError::Invalid(_))));
    }
}
