//! Construction and solution of the scenario barrier LP.
//!
//! The synthesized barrier is piece-wise affine over a partition
//! `R̄_1..R̄_ℓ̄`: `B(x) = max_i { u_iᵀx + v_i : x ∈ R̄_i }` (and 0 where no
//! piece applies). Each robust constraint "affine(z) holds for all x in a
//! polyhedron P" is turned into finitely many linear rows by LP duality:
//! `sup_{x∈P} a(z)ᵀx ≤ b(z)` holds iff some `λ ≥ 0` satisfies `hᵀλ ≤ b(z)`
//! and `Hᵀλ = a(z)`, where `Hx ≤ h` is any representation of P. The five
//! constraint families are: `B_i ≥ 0` and `B_i ≤ M` on each piece, `B_i ≤ γ`
//! on pieces meeting X0, `B_i ≥ 1` on pieces meeting Xu, and one tightened
//! supermartingale row per noise sample and piece pair over the preimage
//! sets `Q_ij(ω)`. The objective is `min γ + cT`.

use crate::lp::{LpError, LpModel, LpStatus, Relation, RowId, VarId};
use crate::polytope::{dot, Polyhedron, PolytopeError, DEFAULT_TOL};
use crate::scenario::{decision_count, tightening_margin, ScenarioError, ScenarioParams};
use crate::sim::NoiseDataset;
use crate::system::{positive_overlap, BarrierPartition, PwaSystem, SystemError, UnsafeDescription};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::Instant;
use thiserror::Error;

/// Errors from LP construction and solving.
#[derive(Debug, Error)]
pub enum SynthError {
    /// Underlying polyhedral computation failed.
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    /// System/partition-level failure.
    #[error(transparent)]
    System(#[from] SystemError),
    /// Model assembly failed.
    #[error("LP model error: {0}")]
    Lp(#[from] LpError),
    /// Scenario parameter computation failed.
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    /// The checked dualization was handed an empty set.
    #[error("dualize_robust requires a nonempty set: {0}")]
    EmptySet(String),
    /// Structurally invalid input.
    #[error("invalid synthesis input: {0}")]
    Invalid(String),
    /// The solver did not return an optimum.
    #[error("LP solve ended with status {status:?}: {detail}")]
    Solver { status: LpStatus, detail: String },
    /// The independent feasibility audit of the returned solution failed.
    #[error("solution audit failed: violation {max_violation:.3e} on {worst}")]
    Audit { max_violation: f64, worst: String },
}

/// The barrier parameters: one affine piece `u_iᵀx + v_i` per partition
/// piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierTheta {
    /// Per-piece slopes `u_i ∈ ℝⁿ`.
    pub u: Vec<Vec<f64>>,
    /// Per-piece intercepts `v_i`.
    pub v: Vec<f64>,
}

impl BarrierTheta {
    /// Number of pieces ℓ̄.
    pub fn len(&self) -> usize {
        self.v.len()
    }

    /// True when there are no pieces.
    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Value of the `i`-th affine piece at `x` (regardless of membership).
    pub fn piece_value(&self, i: usize, x: &[f64]) -> f64 {
        dot(&self.u[i], x) + self.v[i]
    }
}

/// Origin of a dualized constraint block, for provenance reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowOrigin {
    /// `B_i ≥ 0` on piece `i`.
    NonNeg(usize),
    /// `B_i ≤ M` on piece `i`.
    UpperM(usize),
    /// `B_i ≤ γ` on piece `i ∩ X0`.
    Init(usize),
    /// `B_i ≥ 1` on piece `piece` intersected with unsafe piece
    /// `unsafe_piece` (`None` in paper-literal mode: over all of the piece).
    Unsafe {
        /// Barrier piece index.
        piece: usize,
        /// Unsafe piece index, if restricted to one.
        unsafe_piece: Option<usize>,
    },
    /// Tightened supermartingale row for source piece `i`, successor piece
    /// `j`, noise sample `omega`.
    Martingale {
        /// Source piece (in the safe index set).
        i: usize,
        /// Successor piece.
        j: usize,
        /// Noise sample index.
        omega: usize,
    },
}

impl fmt::Display for RowOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowOrigin::NonNeg(i) => write!(f, "nonneg(i={i})"),
            RowOrigin::UpperM(i) => write!(f, "upper(i={i})"),
            RowOrigin::Init(i) => write!(f, "init(i={i})"),
            RowOrigin::Unsafe { piece, unsafe_piece: Some(u) } => {
                write!(f, "unsafe(i={piece}, piece={u})")
            }
            RowOrigin::Unsafe { piece, unsafe_piece: None } => write!(f, "unsafe(i={piece})"),
            RowOrigin::Martingale { i, j, omega } => {
                write!(f, "martingale(i={i}, j={j}, omega={omega})")
            }
        }
    }
}

/// Handle to the rows and dual variables added by one dualized constraint.
#[derive(Debug, Clone)]
pub struct DualHandle {
    /// The fresh dual multipliers λ ≥ 0 (one per row of the representation).
    pub lambda: Vec<VarId>,
    /// The inequality `hᵀλ ≤ b(z)`.
    pub inequality: RowId,
    /// The equalities `Hᵀλ = a(z)`, one per state coordinate.
    pub equalities: Vec<RowId>,
}

/// An affine expression in decision variables: `Σ coeff·var + constant`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    /// Variable terms.
    pub terms: Vec<(VarId, f64)>,
    /// Constant offset.
    pub constant: f64,
}

impl LinExpr {
    /// A bare constant.
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    /// A single scaled variable.
    pub fn scaled(var: VarId, coeff: f64) -> Self {
        Self { terms: vec![(var, coeff)], constant: 0.0 }
    }

    /// Adds a term in place.
    pub fn push(&mut self, var: VarId, coeff: f64) -> &mut Self {
        self.terms.push((var, coeff));
        self
    }
}

/// Switches affecting LP construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Skip supermartingale blocks whose preimage set is provably empty
    /// (on by default). With pruning off the blocks are still emitted, with
    /// the empty set in a canonical representation whose dual rows are
    /// vacuous, so the optimum is unchanged.
    pub prune: bool,
    /// Impose `B_i ≥ 1` over all of piece `i` instead of over the
    /// intersection with the unsafe pieces.
    pub paper_literal_unsafe: bool,
    /// Use all of piece `i` as the supermartingale source set instead of
    /// its intersection with Xs.
    pub paper_literal_martingale: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { prune: true, paper_literal_unsafe: false, paper_literal_martingale: false }
    }
}

/// Size and pruning statistics of a built LP.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LbpCounts {
    /// Number of barrier pieces ℓ̄.
    pub num_pieces: usize,
    /// State dimension n.
    pub state_dim: usize,
    /// |I_0|: pieces meeting the initial set.
    pub num_initial: usize,
    /// |I_u|: pieces meeting the unsafe set.
    pub num_unsafe: usize,
    /// |I_s|: pieces meeting the safe set.
    pub num_safe: usize,
    /// Number of noise samples N.
    pub n_samples: usize,
    /// All (i, j, ω) supermartingale combinations: N·|I_s|·ℓ̄.
    pub martingale_pairs_total: usize,
    /// Combinations skipped because the preimage is provably empty.
    pub martingale_pairs_pruned: usize,
    /// Provably empty combinations still emitted (pruning disabled).
    pub martingale_pairs_empty_emitted: usize,
    /// Combinations emitted with a nonempty preimage.
    pub martingale_pairs_nonempty: usize,
    /// Decision variables in the LP (incl. duals).
    pub num_vars: usize,
    /// Constraint rows in the LP.
    pub num_rows: usize,
}

/// The assembled LP together with provenance and bookkeeping.
pub struct LbpProblem {
    model: LpModel,
    gamma: VarId,
    c_var: VarId,
    u_vars: Vec<Vec<VarId>>,
    v_vars: Vec<VarId>,
    provenance: Vec<(RowOrigin, DualHandle)>,
    counts: LbpCounts,
    params: ScenarioParams,
    horizon: u32,
    build_seconds: f64,
}

impl LbpProblem {
    /// The underlying LP model (e.g. for a text-format dump).
    pub fn model(&self) -> &LpModel {
        &self.model
    }

    /// Size and pruning statistics.
    pub fn counts(&self) -> &LbpCounts {
        &self.counts
    }

    /// The scenario parameters the LP was built with.
    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    /// The horizon T in the objective `γ + cT`.
    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Wall-clock seconds spent building the model.
    pub fn build_seconds(&self) -> f64 {
        self.build_seconds
    }

    /// Constraint blocks with their origins, in insertion order.
    pub fn provenance(&self) -> &[(RowOrigin, DualHandle)] {
        &self.provenance
    }

    /// The origin of an LP row, if it belongs to a dualized block.
    pub fn origin_of_row(&self, row: usize) -> Option<RowOrigin> {
        for (origin, handle) in &self.provenance {
            if handle.inequality.index() == row
                || handle.equalities.iter().any(|r| r.index() == row)
            {
                return Some(*origin);
            }
        }
        None
    }

    fn family_summary(&self) -> String {
        let mut nonneg = 0usize;
        let mut upper = 0usize;
        let mut init = 0usize;
        let mut uns = 0usize;
        let mut mart = 0usize;
        for (origin, _) in &self.provenance {
            match origin {
                RowOrigin::NonNeg(_) => nonneg += 1,
                RowOrigin::UpperM(_) => upper += 1,
                RowOrigin::Init(_) => init += 1,
                RowOrigin::Unsafe { .. } => uns += 1,
                RowOrigin::Martingale { .. } => mart += 1,
            }
        }
        format!(
            "blocks: nonneg={nonneg}, upper={upper}, init={init}, unsafe={uns}, martingale={mart}; \
             vars={}, rows={}",
            self.counts.num_vars, self.counts.num_rows
        )
    }
}

/// Result of solving the LP.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    /// Optimal initial-set level γ ∈ [0, M].
    pub gamma: f64,
    /// Optimal supermartingale slack c ≥ 0.
    pub c: f64,
    /// The barrier parameters.
    pub theta: BarrierTheta,
    /// Objective value γ + cT.
    pub objective: f64,
    /// Wall-clock seconds spent in the solver.
    pub solve_seconds: f64,
    /// Worst constraint violation found by the independent audit.
    pub audit_max_violation: f64,
}

/// Decision-variable count of the unpruned LP when every dualized set has
/// exactly `m` rows:
/// `2 + (n+1)ℓ̄ + m(2ℓ̄ + |I_0| + |I_u| + N·|I_s|·ℓ̄)`.
pub fn expected_variable_count(
    n: usize,
    num_pieces: usize,
    m: usize,
    num_initial: usize,
    num_unsafe: usize,
    num_safe: usize,
    n_samples: usize,
) -> usize {
    2 + (n + 1) * num_pieces
        + m * (2 * num_pieces + num_initial + num_unsafe + n_samples * num_safe * num_pieces)
}

/// Adds the dual encoding of `sup_{x∈P} a(z)ᵀx ≤ b(z)` to `model`: fresh
/// multipliers `λ ≥ 0` with `hᵀλ ≤ b(z)` and `Hᵀλ = a(z)`.
///
/// `a` has one affine expression per state coordinate. P must be nonempty —
/// for an empty P the rows can over-constrain `z`, so the caller prunes
/// empties; passing one is an error.
pub fn dualize_robust(
    model: &mut LpModel,
    a: &[LinExpr],
    b: &LinExpr,
    p: &Polyhedron,
) -> Result<DualHandle, SynthError> {
    if a.len() != p.dim() {
        return Err(SynthError::Invalid(format!(
            "a(z) has {} coordinates but the set has dimension {}",
            a.len(),
            p.dim()
        )));
    }
    if p.is_empty(DEFAULT_TOL)? {
        return Err(SynthError::EmptySet(format!(
            "{} rows in dimension {}",
            p.num_rows(),
            p.dim()
        )));
    }
    Ok(dualize_with_rep(model, a, b, p.h_mat(), p.h_vec())?)
}

/// Unchecked dualization against an explicit representation (the caller
/// vouches for the representation's suitability — in particular, empty sets
/// must use a representation with vacuous dual rows).
fn dualize_with_rep(
    model: &mut LpModel,
    a: &[LinExpr],
    b: &LinExpr,
    h_mat: &[Vec<f64>],
    h_vec: &[f64],
) -> Result<DualHandle, LpError> {
    let n = a.len();
    let lambda: Vec<VarId> =
        (0..h_vec.len()).map(|_| model.add_var(0.0, f64::INFINITY)).collect();
    // hᵀλ − b_terms ≤ b_constant
    let mut terms: Vec<(VarId, f64)> =
        lambda.iter().zip(h_vec).map(|(&l, &h)| (l, h)).collect();
    for &(v, coeff) in &b.terms {
        terms.push((v, -coeff));
    }
    let inequality = model.add_constraint(terms, Relation::Le, b.constant)?;
    // Per coordinate k: Σ_r H[r][k] λ_r − a_k_terms = a_k_constant
    let mut equalities = Vec::with_capacity(n);
    for (k, a_k) in a.iter().enumerate().take(n) {
        let mut terms: Vec<(VarId, f64)> = lambda
            .iter()
            .zip(h_mat)
            .filter(|(_, row)| row[k] != 0.0)
            .map(|(&l, row)| (l, row[k]))
            .collect();
        for &(v, coeff) in &a_k.terms {
            terms.push((v, -coeff));
        }
        equalities.push(model.add_constraint(terms, Relation::Eq, a_k.constant)?);
    }
    Ok(DualHandle { lambda, inequality, equalities })
}

/// A representation chosen for dualization, plus its emptiness verdict.
#[derive(Debug, Clone)]
pub(crate) struct DualRep {
    pub(crate) rows: Vec<Vec<f64>>,
    pub(crate) rhs: Vec<f64>,
    pub(crate) empty: bool,
}

/// The canonical empty box: `x_k ≤ −1` and `x_k ≥ 1` per axis. Its dual
/// rows are vacuous for every z — the row cone spans ℝⁿ and the all-ones
/// multiplier certifies infeasibility (`Hᵀ1 = 0`, `hᵀ1 = −2n < 0`), so any
/// right-hand side can be pushed arbitrarily low.
pub(crate) fn empty_box_rep(n: usize) -> DualRep {
    let mut rows = Vec::with_capacity(2 * n);
    let mut rhs = Vec::with_capacity(2 * n);
    for k in 0..n {
        let mut up = vec![0.0; n];
        up[k] = 1.0;
        rows.push(up);
        rhs.push(-1.0);
        let mut down = vec![0.0; n];
        down[k] = -1.0;
        rows.push(down);
        rhs.push(-1.0);
    }
    DualRep { rows, rhs, empty: true }
}

/// Canonicalizes a representation for dualization: axis-aligned rows are
/// merged into the tightest per-axis interval bounds (unit coefficients),
/// vacuous zero rows are dropped, and general rows are kept verbatim after
/// an interval-propagation emptiness test. The represented set is unchanged.
///
/// A set proven empty is returned as the canonical empty box. Propagation
/// is exact for axis-aligned sets and for rows coupling at most two
/// variables through otherwise-independent intervals (which covers every
/// built-in benchmark); a rare undetected empty set is emitted as ordinary
/// rows, which can only tighten the LP below the true optimum, never relax
/// a certificate.
pub(crate) fn canonical_rep(h_mat: &[Vec<f64>], h_vec: &[f64], n: usize) -> DualRep {
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    let mut general: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, &h) in h_mat.iter().zip(h_vec) {
        let nz: Vec<usize> = (0..n).filter(|&k| row[k] != 0.0).collect();
        match nz.as_slice() {
            [] => {
                if h < -DEFAULT_TOL {
                    return empty_box_rep(n);
                }
            }
            [k] => {
                let coeff = row[*k];
                if coeff > 0.0 {
                    hi[*k] = hi[*k].min(h / coeff);
                } else {
                    lo[*k] = lo[*k].max(h / coeff);
                }
            }
            _ => general.push((row.clone(), h)),
        }
    }
    let crossed = |lo: &[f64], hi: &[f64]| (0..n).any(|k| lo[k] - hi[k] > 2.0 * DEFAULT_TOL);
    if crossed(&lo, &hi) {
        return empty_box_rep(n);
    }
    // Interval constraint propagation over the general rows: sound emptiness
    // detection plus tightening of the implied axis bounds.
    for _sweep in 0..3 {
        for (row, h) in &general {
            // Greatest lower bound of rowᵀx over the current box.
            let term_min = |k: usize| {
                let a = row[k];
                if a > 0.0 {
                    a * lo[k]
                } else if a < 0.0 {
                    a * hi[k]
                } else {
                    0.0
                }
            };
            let mins: Vec<f64> = (0..n).map(term_min).collect();
            let total: f64 = mins.iter().sum();
            if total.is_finite() && total > h + 2.0 * DEFAULT_TOL {
                return empty_box_rep(n);
            }
            for k in 0..n {
                let a = row[k];
                if a == 0.0 {
                    continue;
                }
                let rest: f64 = mins
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| *t != k)
                    .map(|(_, m)| m)
                    .sum();
                if !rest.is_finite() {
                    continue;
                }
                let bound = (h - rest) / a;
                if a > 0.0 {
                    hi[k] = hi[k].min(bound);
                } else {
                    lo[k] = lo[k].max(bound);
                }
            }
        }
        if crossed(&lo, &hi) {
            return empty_box_rep(n);
        }
    }
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for k in 0..n {
        if hi[k].is_finite() {
            let mut row = vec![0.0; n];
            row[k] = 1.0;
            rows.push(row);
            rhs.push(hi[k]);
        }
        if lo[k].is_finite() {
            let mut row = vec![0.0; n];
            row[k] = -1.0;
            rows.push(row);
            rhs.push(-lo[k]);
        }
    }
    for (row, h) in general {
        rows.push(row);
        rhs.push(h);
    }
    DualRep { rows, rhs, empty: false }
}

pub(crate) fn canonical_rep_of(p: &Polyhedron) -> DualRep {
    canonical_rep(p.h_mat(), p.h_vec(), p.dim())
}

/// Builds the scenario barrier LP.
///
/// Preconditions checked: the dataset matches the system dimension and the
/// declared sample count, `params.d` equals the decision count
/// `ℓ̄(n+1) + 2`, and `params.delta` is at least the tightening margin
/// `εM/(1−ε)`. Constraint blocks are added in the deterministic order
/// (family, i, j, sample); the preimage computations are parallelized and
/// merged back in that order.
pub fn build_lbp(
    sys: &PwaSystem,
    bp: &BarrierPartition,
    unsafe_desc: &UnsafeDescription,
    data: &NoiseDataset,
    params: &ScenarioParams,
    opts: &BuildOptions,
) -> Result<LbpProblem, SynthError> {
    let t0 = Instant::now();
    let n = sys.dim();
    let l_bar = bp.len();
    if data.dim() != n {
        return Err(SynthError::Invalid(format!(
            "noise dimension {} does not match the state dimension {n}",
            data.dim()
        )));
    }
    if data.len() as u64 != params.n_samples {
        return Err(SynthError::Invalid(format!(
            "scenario parameters declare N = {} but the dataset has {} samples",
            params.n_samples,
            data.len()
        )));
    }
    let d = decision_count(l_bar, n);
    if params.d != d {
        return Err(SynthError::Invalid(format!(
            "scenario parameters declare d = {} but the partition needs d = {d}",
            params.d
        )));
    }
    let margin = tightening_margin(params.eps, params.m_bound)?;
    if params.delta < margin - 1e-12 {
        return Err(SynthError::Invalid(format!(
            "delta = {} is below the tightening margin {margin}",
            params.delta
        )));
    }

    let mut model = LpModel::new();
    let gamma = model.add_var(0.0, params.m_bound);
    let c_var = model.add_var(0.0, f64::INFINITY);
    let mut u_vars = Vec::with_capacity(l_bar);
    let mut v_vars = Vec::with_capacity(l_bar);
    for _ in 0..l_bar {
        u_vars.push(
            (0..n)
                .map(|_| model.add_var(f64::NEG_INFINITY, f64::INFINITY))
                .collect::<Vec<_>>(),
        );
        v_vars.push(model.add_var(f64::NEG_INFINITY, f64::INFINITY));
    }
    model.set_cost(gamma, 1.0);
    model.set_cost(c_var, sys.horizon() as f64);

    let mut provenance: Vec<(RowOrigin, DualHandle)> = Vec::new();

    let piece_reps: Vec<DualRep> = bp.pieces().iter().map(canonical_rep_of).collect();
    for (i, rep) in piece_reps.iter().enumerate() {
        if rep.empty {
            return Err(SynthError::Invalid(format!("partition piece {i} is empty")));
        }
    }

    // Family 1: B_i ≥ 0 on R̄_i  ⟺  sup (−u_i)ᵀx ≤ v_i.
    for i in 0..l_bar {
        let a: Vec<LinExpr> = (0..n).map(|k| LinExpr::scaled(u_vars[i][k], -1.0)).collect();
        let b = LinExpr::scaled(v_vars[i], 1.0);
        let handle = dualize_with_rep(&mut model, &a, &b, &piece_reps[i].rows, &piece_reps[i].rhs)?;
        provenance.push((RowOrigin::NonNeg(i), handle));
    }
    // Family 2: B_i ≤ M on R̄_i  ⟺  sup u_iᵀx ≤ M − v_i.
    for i in 0..l_bar {
        let a: Vec<LinExpr> = (0..n).map(|k| LinExpr::scaled(u_vars[i][k], 1.0)).collect();
        let mut b = LinExpr::constant(params.m_bound);
        b.push(v_vars[i], -1.0);
        let handle = dualize_with_rep(&mut model, &a, &b, &piece_reps[i].rows, &piece_reps[i].rhs)?;
        provenance.push((RowOrigin::UpperM(i), handle));
    }
    // Family 3: B_i ≤ γ on R̄_i ∩ X0  ⟺  sup u_iᵀx ≤ γ − v_i.
    for &i in bp.index_initial() {
        let set = bp.pieces()[i].intersect(sys.initial_set())?;
        let rep = canonical_rep_of(&set);
        if rep.empty {
            return Err(SynthError::Invalid(format!(
                "piece {i} is classified initial but its X0 intersection is empty"
            )));
        }
        let a: Vec<LinExpr> = (0..n).map(|k| LinExpr::scaled(u_vars[i][k], 1.0)).collect();
        let mut b = LinExpr::scaled(gamma, 1.0);
        b.push(v_vars[i], -1.0);
        let handle = dualize_with_rep(&mut model, &a, &b, &rep.rows, &rep.rhs)?;
        provenance.push((RowOrigin::Init(i), handle));
    }
    // Family 4: B_i ≥ 1 on R̄_i ∩ Xu (or all of R̄_i in paper-literal mode)
    // ⟺ sup (−u_i)ᵀx ≤ v_i − 1.
    for &i in bp.index_unsafe() {
        let a: Vec<LinExpr> = (0..n).map(|k| LinExpr::scaled(u_vars[i][k], -1.0)).collect();
        let mut b = LinExpr::constant(-1.0);
        b.push(v_vars[i], 1.0);
        if opts.paper_literal_unsafe {
            let rep = &piece_reps[i];
            let handle = dualize_with_rep(&mut model, &a, &b, &rep.rows, &rep.rhs)?;
            provenance.push((RowOrigin::Unsafe { piece: i, unsafe_piece: None }, handle));
        } else {
            for (u_idx, upiece) in unsafe_desc.pieces().iter().enumerate() {
                if !positive_overlap(&bp.pieces()[i], upiece)? {
                    continue;
                }
                let set = bp.pieces()[i].intersect(upiece)?;
                let rep = canonical_rep_of(&set);
                if rep.empty {
                    return Err(SynthError::Invalid(format!(
                        "piece {i} overlaps unsafe piece {u_idx} but their intersection is empty"
                    )));
                }
                let handle = dualize_with_rep(&mut model, &a, &b, &rep.rows, &rep.rhs)?;
                provenance
                    .push((RowOrigin::Unsafe { piece: i, unsafe_piece: Some(u_idx) }, handle));
            }
        }
    }

    // Family 5: supermartingale rows. For x ∈ Q_ij(ω) — x in the source set
    // of piece i with successor f_{r(i)}(x) + η(ω) in piece j — require
    // B_j(successor) ≤ B_i(x) + c − δ, i.e.
    //   sup (A_rᵀu_j − u_i)ᵀx ≤ v_i − v_j − u_jᵀ(b_r + η) + c − δ.
    let i_s: Vec<usize> = bp.index_safe().to_vec();
    let sources: Vec<DualRep> = i_s
        .iter()
        .map(|&i| -> Result<DualRep, SynthError> {
            let rep = if opts.paper_literal_martingale {
                piece_reps[i].clone()
            } else {
                canonical_rep_of(&bp.pieces()[i].intersect(sys.safe_set())?)
            };
            if rep.empty {
                return Err(SynthError::Invalid(format!(
                    "piece {i} is classified safe but its source set is empty"
                )));
            }
            Ok(rep)
        })
        .collect::<Result<_, _>>()?;

    let samples = data.samples();
    let tasks: Vec<(usize, usize)> = i_s
        .iter()
        .enumerate()
        .flat_map(|(pos, _)| (0..l_bar).map(move |j| (pos, j)))
        .collect();
    // For a fixed (i, j) the preimage rows are constant; only the
    // right-hand side depends on the sample: the target rows H_t pick up
    // −H_t(b_r + η). Compute all per-sample representations in parallel,
    // then merge in (i, j, ω) order.
    let pair_reps: Vec<Vec<DualRep>> = tasks
        .par_iter()
        .map(|&(pos, j)| {
            let i = i_s[pos];
            let r = bp.parent()[i];
            let a_mat = sys.dynamics()[r].a();
            let b_dyn = sys.dynamics()[r].b();
            let src = &sources[pos];
            let tgt = &piece_reps[j];
            let mut rows: Vec<Vec<f64>> =
                Vec::with_capacity(src.rows.len() + tgt.rows.len());
            rows.extend(src.rows.iter().cloned());
            let mut base_rhs: Vec<f64> = src.rhs.clone();
            // Target row t becomes (H_t A) x ≤ h_t − H_t b_r − H_t η.
            let mut eta_coef: Vec<Vec<f64>> = vec![vec![0.0; n]; src.rows.len()];
            for (trow, &th) in tgt.rows.iter().zip(&tgt.rhs) {
                let mapped: Vec<f64> = (0..n)
                    .map(|k| (0..n).map(|t| trow[t] * a_mat[t][k]).sum())
                    .collect();
                rows.push(mapped);
                base_rhs.push(th - dot(trow, b_dyn));
                eta_coef.push(trow.iter().map(|&v| -v).collect());
            }
            samples
                .iter()
                .map(|eta| {
                    let rhs: Vec<f64> = base_rhs
                        .iter()
                        .zip(&eta_coef)
                        .map(|(&b, coef)| b + dot(coef, eta))
                        .collect();
                    canonical_rep(&rows, &rhs, n)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let total_pairs = tasks.len() * samples.len();
    let mut pruned = 0usize;
    let mut empty_emitted = 0usize;
    let mut nonempty = 0usize;
    let delta = params.delta;
    for (task_idx, &(pos, j)) in tasks.iter().enumerate() {
        let i = i_s[pos];
        let r = bp.parent()[i];
        let a_mat = sys.dynamics()[r].a();
        let b_dyn = sys.dynamics()[r].b();
        for (omega, eta) in samples.iter().enumerate() {
            let rep = &pair_reps[task_idx][omega];
            if rep.empty {
                if opts.prune {
                    pruned += 1;
                    continue;
                }
                empty_emitted += 1;
            } else {
                nonempty += 1;
            }
            let a: Vec<LinExpr> = (0..n)
                .map(|k| {
                    let mut e = LinExpr::scaled(u_vars[i][k], -1.0);
                    for t in 0..n {
                        if a_mat[t][k] != 0.0 {
                            e.push(u_vars[j][t], a_mat[t][k]);
                        }
                    }
                    e
                })
                .collect();
            let mut b = LinExpr::constant(-delta);
            b.push(v_vars[i], 1.0);
            b.push(v_vars[j], -1.0);
            b.push(c_var, 1.0);
            for t in 0..n {
                let shift = b_dyn[t] + eta[t];
                if shift != 0.0 {
                    b.push(u_vars[j][t], -shift);
                }
            }
            let handle = dualize_with_rep(&mut model, &a, &b, &rep.rows, &rep.rhs)?;
            provenance.push((RowOrigin::Martingale { i, j, omega }, handle));
        }
    }

    let counts = LbpCounts {
        num_pieces: l_bar,
        state_dim: n,
        num_initial: bp.index_initial().len(),
        num_unsafe: bp.index_unsafe().len(),
        num_safe: i_s.len(),
        n_samples: samples.len(),
        martingale_pairs_total: total_pairs,
        martingale_pairs_pruned: pruned,
        martingale_pairs_empty_emitted: empty_emitted,
        martingale_pairs_nonempty: nonempty,
        num_vars: model.num_vars(),
        num_rows: model.num_rows(),
    };
    Ok(LbpProblem {
        model,
        gamma,
        c_var,
        u_vars,
        v_vars,
        provenance,
        counts,
        params: params.clone(),
        horizon: sys.horizon(),
        build_seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Solves the LP and extracts `(γ, c, θ)`.
///
/// On an optimum the solution is audited independently against every row at
/// tolerance `10·tol` (audit failure is an error, not a warning); γ is
/// clamped into `[0, M]` and c into `[0, ∞)` to absorb solver-tolerance
/// noise. Non-optimal statuses are returned with a per-family block summary
/// to aid diagnosis.
pub fn solve_lbp(problem: &LbpProblem, tol: f64) -> Result<SynthesisResult, SynthError> {
    let t0 = Instant::now();
    let sol = problem.model.solve(tol);
    let solve_seconds = t0.elapsed().as_secs_f64();
    if sol.status != LpStatus::Optimal {
        return Err(SynthError::Solver {
            status: sol.status,
            detail: problem.family_summary(),
        });
    }
    let values = sol.values.expect("optimal solutions carry values");
    let audit = problem.model.audit(&values, 10.0 * tol);
    if !audit.passed {
        let worst = audit
            .worst_row
            .and_then(|r| problem.origin_of_row(r).map(|o| o.to_string()))
            .unwrap_or_else(|| "variable bounds".into());
        return Err(SynthError::Audit { max_violation: audit.max_violation, worst });
    }
    let gamma = values[problem.gamma.index()].clamp(0.0, problem.params.m_bound);
    let c = values[problem.c_var.index()].max(0.0);
    let theta = BarrierTheta {
        u: problem
            .u_vars
            .iter()
            .map(|row| row.iter().map(|v| values[v.index()]).collect())
            .collect(),
        v: problem.v_vars.iter().map(|v| values[v.index()]).collect(),
    };
    Ok(SynthesisResult {
        gamma,
        c,
        theta,
        objective: gamma + c * problem.horizon() as f64,
        solve_seconds,
        audit_max_violation: audit.max_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::DEFAULT_SOLVER_TOL;
    use crate::polytope::AffineMap;
    use crate::scenario::ScenarioParams;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dual_of_lower_bound_on_interval() {
        // u·x + v ≥ 0 on [−1, 1] with u pinned to 1: feasible iff v ≥ 1.
        let mut model = LpModel::new();
        let u = model.add_var(1.0, 1.0);
        let v = model.add_var(f64::NEG_INFINITY, f64::INFINITY);
        model.set_cost(v, 1.0);
        let p = Polyhedron::interval(-1.0, 1.0).unwrap();
        let a = vec![LinExpr::scaled(u, -1.0)];
        let b = LinExpr::scaled(v, 1.0);
        dualize_robust(&mut model, &a, &b, &p).unwrap();
        let sol = model.solve(DEFAULT_SOLVER_TOL);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.values.unwrap()[v.index()], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn dual_with_zero_slope_needs_only_nonnegative_intercept() {
        let mut model = LpModel::new();
        let u = model.add_var(0.0, 0.0);
        let v = model.add_var(f64::NEG_INFINITY, f64::INFINITY);
        model.set_cost(v, 1.0);
        let p = Polyhedron::interval(-1.0, 1.0).unwrap();
        let a = vec![LinExpr::scaled(u, -1.0)];
        let b = LinExpr::scaled(v, 1.0);
        let handle = dualize_robust(&mut model, &a, &b, &p).unwrap();
        let sol = model.solve(DEFAULT_SOLVER_TOL);
        assert_eq!(sol.status, LpStatus::Optimal);
        let values = sol.values.unwrap();
        assert_abs_diff_eq!(values[v.index()], 0.0, epsilon = 1e-7);
        // λ = 0 is an optimal witness.
        for l in &handle.lambda {
            assert_abs_diff_eq!(values[l.index()], 0.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn dual_of_upper_bound_on_unit_interval() {
        // u·x ≤ M − v on [0, 1] with u = 1, v = 0: feasible iff M ≥ 1.
        let mut model = LpModel::new();
        let u = model.add_var(1.0, 1.0);
        let big_m = model.add_var(0.0, f64::INFINITY);
        model.set_cost(big_m, 1.0);
        let p = Polyhedron::interval(0.0, 1.0).unwrap();
        let a = vec![LinExpr::scaled(u, 1.0)];
        let b = LinExpr::scaled(big_m, 1.0);
        dualize_robust(&mut model, &a, &b, &p).unwrap();
        let sol = model.solve(DEFAULT_SOLVER_TOL);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_abs_diff_eq!(sol.values.unwrap()[big_m.index()], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn dualizing_an_empty_set_is_rejected() {
        let mut model = LpModel::new();
        let v = model.add_var(0.0, 1.0);
        let p = Polyhedron::interval(1.0, -1.0).unwrap();
        let err = dualize_robust(&mut model, &[LinExpr::constant(0.0)], &LinExpr::scaled(v, 1.0), &p);
        assert!(matches!(err, Err(SynthError::EmptySet(_))));
    }

    #[test]
    fn canonical_rep_merges_axis_rows() {
        // x ≤ 3, x ≤ 2, x ≥ 0, x ≥ −1 → [0, 2], two unit rows.
        let rep = canonical_rep(
            &[vec![1.0], vec![1.0], vec![-1.0], vec![-1.0]],
            &[3.0, 2.0, 0.0, 1.0],
            1,
        );
        assert!(!rep.empty);
        assert_eq!(rep.rows, vec![vec![1.0], vec![-1.0]]);
        assert_eq!(rep.rhs, vec![2.0, 0.0]);
    }

    #[test]
    fn canonical_rep_detects_axis_emptiness() {
        let rep = canonical_rep(&[vec![1.0], vec![-1.0]], &[-1.0, -1.0], 1);
        assert!(rep.empty);
        assert_eq!(rep.rows.len(), 2);
        // Zero row with negative rhs is empty too.
        let rep = canonical_rep(&[vec![0.0, 0.0]], &[-0.5], 2);
        assert!(rep.empty);
        assert_eq!(rep.rows.len(), 4);
        // Zero row with nonnegative rhs is dropped.
        let rep = canonical_rep(&[vec![0.0], vec![1.0]], &[0.0, 2.0], 1);
        assert!(!rep.empty);
        assert_eq!(rep.rows, vec![vec![1.0]]);
    }

    #[test]
    fn canonical_rep_propagates_coupled_rows() {
        // p ∈ [0, 1], v ∈ [0, 1], p + v ≤ −0.5: empty, provable only by
        // propagating the coupled row.
        let rep = canonical_rep(
            &[
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
                vec![1.0, 1.0],
            ],
            &[1.0, 0.0, 1.0, 0.0, -0.5],
            2,
        );
        assert!(rep.empty);
        // p ∈ [0, 1], v ∈ [0, 1], p + v ≥ 1.5 (satisfiable): not empty, and
        // the coupled row propagates p ≥ 0.5, v ≥ 0.5.
        let rep = canonical_rep(
            &[
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
                vec![-1.0, -1.0],
            ],
            &[1.0, 0.0, 1.0, 0.0, -1.5],
            2,
        );
        assert!(!rep.empty);
        let lo_p = rep
            .rows
            .iter()
            .zip(&rep.rhs)
            .find(|(r, _)| r[0] == -1.0 && r[1] == 0.0)
            .map(|(_, &h)| -h)
            .unwrap();
        assert_abs_diff_eq!(lo_p, 0.5, epsilon = 1e-12);
    }

    /// The worked example: n = 1, ℓ̄ = 3, m = 2, |I_0| = 1, |I_u| = 2,
    /// |I_s| = 1, N = 5, no pruning → 56 decision variables.
    fn counting_setup() -> (PwaSystem, BarrierPartition, UnsafeDescription) {
        let sys = PwaSystem::new(
            vec![Polyhedron::interval(-2.5, 2.5).unwrap()],
            vec![AffineMap::identity(1)],
            Polyhedron::interval(-0.2, 0.2).unwrap(),
            Polyhedron::interval(-0.4, 0.4).unwrap(),
            10,
        )
        .unwrap();
        let unsafe_desc = UnsafeDescription::new(
            vec![
                Polyhedron::interval(-2.0, -1.0).unwrap(),
                Polyhedron::interval(1.0, 2.0).unwrap(),
            ],
            sys.safe_set(),
        )
        .unwrap();
        let bp = crate::system::build_partition(
            &sys,
            &unsafe_desc,
            &[vec![-2.5, -0.5, 0.5, 2.5]],
        )
        .unwrap();
        assert_eq!(bp.index_safe(), &[1]);
        assert_eq!(bp.index_initial(), &[1]);
        assert_eq!(bp.index_unsafe(), &[0, 2]);
        (sys, bp, unsafe_desc)
    }

    fn counting_params(n_samples: u64) -> ScenarioParams {
        ScenarioParams::from_eps_n(0.1, n_samples, decision_count(3, 1), 1.0, None).unwrap()
    }

    #[test]
    fn variable_count_matches_the_formula_without_pruning() {
        let (sys, bp, ud) = counting_setup();
        let data = NoiseDataset::from_samples(vec![
            vec![0.0],
            vec![0.05],
            vec![-0.05],
            vec![0.1],
            vec![-0.1],
        ])
        .unwrap();
        let opts = BuildOptions { prune: false, ..BuildOptions::default() };
        let problem = build_lbp(&sys, &bp, &ud, &data, &counting_params(5), &opts).unwrap();
        assert_eq!(problem.model().num_vars(), 56);
        assert_eq!(expected_variable_count(1, 3, 2, 1, 2, 1, 5), 56);
        // 3 + 3 + 1 + 2 + 15 blocks, each 1 inequality + n = 1 equality.
        assert_eq!(problem.model().num_rows(), 48);
        assert_eq!(problem.provenance().len(), 24);
        assert_eq!(problem.counts().martingale_pairs_total, 15);
        assert_eq!(
            problem.counts().martingale_pairs_nonempty
                + problem.counts().martingale_pairs_empty_emitted,
            15
        );
    }

    #[test]
    fn pruning_changes_neither_status_nor_objective() {
        let (sys, bp, ud) = counting_setup();
        let data = NoiseDataset::from_samples(vec![
            vec![0.0],
            vec![0.05],
            vec![-0.05],
            vec![0.1],
            vec![-0.1],
        ])
        .unwrap();
        let params = counting_params(5);
        let on = build_lbp(&sys, &bp, &ud, &data, &params, &BuildOptions::default()).unwrap();
        let off = build_lbp(
            &sys,
            &bp,
            &ud,
            &data,
            &params,
            &BuildOptions { prune: false, ..BuildOptions::default() },
        )
        .unwrap();
        assert!(on.counts().martingale_pairs_pruned > 0);
        assert!(on.model().num_vars() < off.model().num_vars());
        let sol_on = solve_lbp(&on, DEFAULT_SOLVER_TOL).unwrap();
        let sol_off = solve_lbp(&off, DEFAULT_SOLVER_TOL).unwrap();
        assert_abs_diff_eq!(sol_on.objective, sol_off.objective, epsilon = 1e-9);
    }

    #[test]
    fn more_samples_never_improve_the_objective() {
        let (sys, bp, ud) = counting_setup();
        let small = NoiseDataset::from_samples(vec![vec![0.0], vec![0.05], vec![-0.05]]).unwrap();
        let big = NoiseDataset::from_samples(vec![
            vec![0.0],
            vec![0.05],
            vec![-0.05],
            vec![0.15],
            vec![-0.15],
        ])
        .unwrap();
        let p_small = build_lbp(
            &sys,
            &bp,
            &ud,
            &small,
            &counting_params(3),
            &BuildOptions::default(),
        )
        .unwrap();
        let p_big =
            build_lbp(&sys, &bp, &ud, &big, &counting_params(5), &BuildOptions::default()).unwrap();
        let obj_small = solve_lbp(&p_small, DEFAULT_SOLVER_TOL).unwrap().objective;
        let obj_big = solve_lbp(&p_big, DEFAULT_SOLVER_TOL).unwrap().objective;
        assert!(obj_big >= obj_small - 1e-9, "{obj_big} < {obj_small}");
    }

    #[test]
    fn zero_noise_build_solves_and_audits() {
        let (sys, bp, ud) = counting_setup();
        let data = NoiseDataset::from_samples(vec![vec![0.0], vec![0.0], vec![0.0]]).unwrap();
        let problem =
            build_lbp(&sys, &bp, &ud, &data, &counting_params(3), &BuildOptions::default())
                .unwrap();
        let result = solve_lbp(&problem, DEFAULT_SOLVER_TOL).unwrap();
        assert!(result.objective >= 0.0);
        assert!(result.audit_max_violation <= 1e-6);
        assert_abs_diff_eq!(
            result.objective,
            result.gamma + result.c * 10.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn degenerate_safe_only_system_gets_gamma_zero_and_c_delta() {
        // One piece, initial and safe, no unsafe piece overlaps: B ≡ 0 is
        // optimal, forcing γ* = 0 and c* = δ.
        let sys = PwaSystem::new(
            vec![Polyhedron::interval(-1.0, 1.0).unwrap()],
            vec![AffineMap::new(vec![vec![0.5]], vec![0.0]).unwrap()],
            Polyhedron::interval(-0.5, 0.5).unwrap(),
            Polyhedron::interval(-1.0, 1.0).unwrap(),
            2,
        )
        .unwrap();
        let ud = UnsafeDescription::new(
            vec![Polyhedron::interval(2.0, 3.0).unwrap()],
            sys.safe_set(),
        )
        .unwrap();
        let bp = crate::system::build_partition(&sys, &ud, &[vec![-1.0, 1.0]]).unwrap();
        assert!(bp.index_unsafe().is_empty());
        let data = NoiseDataset::from_samples(vec![vec![0.02], vec![-0.01]]).unwrap();
        let params = ScenarioParams::from_eps_n(0.1, 2, decision_count(1, 1), 1.0, None).unwrap();
        let problem = build_lbp(&sys, &bp, &ud, &data, &params, &BuildOptions::default()).unwrap();
        let result = solve_lbp(&problem, DEFAULT_SOLVER_TOL).unwrap();
        let delta = params.delta;
        assert_abs_diff_eq!(result.gamma, 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(result.c, delta, epsilon = 1e-7);
        assert!(result.objective < 1.0);
    }

    #[test]
    fn parameter_mismatches_are_rejected() {
        let (sys, bp, ud) = counting_setup();
        let data = NoiseDataset::from_samples(vec![vec![0.0]]).unwrap();
        // Declared N = 3 but one sample.
        let err = build_lbp(&sys, &bp, &ud, &data, &counting_params(3), &BuildOptions::default());
        assert!(matches!(err, Err(SynthError::Invalid(_))));
        // Wrong d.
        let bad_d = ScenarioParams::from_eps_n(0.1, 1, 99, 1.0, None).unwrap();
        let err = build_lbp(&sys, &bp, &ud, &data, &bad_d, &BuildOptions::default());
        assert!(matches!(err, Err(SynthError::Invalid(_))));
    }

    #[test]
    fn origins_render_readably() {
        assert_eq!(RowOrigin::NonNeg(3).to_string(), "nonneg(i=3)");
        assert_eq!(
            RowOrigin::Martingale { i: 2, j: 5, omega: 17 }.to_string(),
            "martingale(i=2, j=5, omega=17)"
        );
        assert_eq!(
            RowOrigin::Unsafe { piece: 1, unsafe_piece: Some(0) }.to_string(),
            "unsafe(i=1, piece=0)"
        );
    }
}
