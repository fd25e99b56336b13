//! The PWA stochastic system model, the barrier partition with its
//! refinement map, and the index-set classification.
//!
//! A [`PwaSystem`] is the discrete-time dynamics `x⁺ = A_r x + b_r + η`,
//! where `r` is the index of the polyhedral dynamics region containing `x`
//! and `η` is additive noise, together with the initial set `X0 ⊆ Xs`, the
//! safe set `Xs`, and the horizon `T`. A [`BarrierPartition`] refines the
//! dynamics regions into the pieces `R̄_1..R̄_ℓ̄` that carry one affine
//! barrier piece each; [`classify_indices`] computes which pieces meet the
//! safe, unsafe, and initial sets.

use crate::polytope::{AffineMap, Polyhedron, PolytopeError, SupOutcome, DEFAULT_TOL};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Shrink margin used to decide *positive-measure* overlap.
///
/// Index-set membership and grid/region alignment ignore overlaps of zero
/// measure (shared facets): a set counts as overlapping only if it remains
/// nonempty after every right-hand side is tightened by this margin.
pub const OVERLAP_MARGIN: f64 = 1e-7;

/// Errors from system construction and partitioning.
#[derive(Debug, Error)]
pub enum SystemError {
    /// Underlying polyhedral computation failed.
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    /// Structurally invalid model data.
    #[error("invalid system: {0}")]
    Invalid(String),
    /// A grid cell could not be aligned with the dynamics regions.
    #[error("grid cell {0} is contained in no dynamics region (domain not covered)")]
    CellNotCovered(String),
    /// A piece escapes the region that was computed as its parent.
    #[error("piece {0} is not contained in dynamics region {1}")]
    PieceEscapesRegion(String, usize),
    /// The refinement map must be surjective: every region owns ≥ 1 piece.
    #[error("dynamics region {0} contains no barrier piece (refinement map not surjective)")]
    RegionWithoutPiece(usize),
    /// Two dynamics regions share interior points.
    #[error("dynamics regions {0} and {1} overlap with positive measure")]
    RegionsOverlap(usize, usize),
}

/// Discrete-time PWA stochastic system `x⁺ = A_r x + b_r + η`.
#[derive(Debug, Clone)]
pub struct PwaSystem {
    regions: Vec<Polyhedron>,
    dynamics: Vec<AffineMap>,
    n: usize,
    initial_set: Polyhedron,
    safe_set: Polyhedron,
    horizon: u32,
}

impl PwaSystem {
    /// Builds and validates a system.
    ///
    /// Checks: matching lengths and dimensions, `T ≥ 1`, `X0 ⊆ Xs`
    /// (containment LPs), and pairwise disjointness of region interiors
    /// (probabilistic: interior points of each region, found by LP and
    /// jittered deterministically, must violate at least one half-space of
    /// every other region).
    pub fn new(
        regions: Vec<Polyhedron>,
        dynamics: Vec<AffineMap>,
        initial_set: Polyhedron,
        safe_set: Polyhedron,
        horizon: u32,
    ) -> Result<Self, SystemError> {
        if regions.is_empty() || regions.len() != dynamics.len() {
            return Err(SystemError::Invalid(format!(
                "need equally many regions and dynamics (≥ 1), got {} and {}",
                regions.len(),
                dynamics.len()
            )));
        }
        if horizon == 0 {
            return Err(SystemError::Invalid("horizon T must be ≥ 1".into()));
        }
        let n = regions[0].dim();
        for (i, r) in regions.iter().enumerate() {
            if r.dim() != n {
                return Err(SystemError::Invalid(format!("region {i} has dimension {} ≠ {n}", r.dim())));
            }
        }
        for (i, f) in dynamics.iter().enumerate() {
            if f.dim() != n {
                return Err(SystemError::Invalid(format!("dynamics {i} has dimension {} ≠ {n}", f.dim())));
            }
        }
        if initial_set.dim() != n || safe_set.dim() != n {
            return Err(SystemError::Invalid("X0 and Xs must match the state dimension".into()));
        }
        if !safe_set.contains(&initial_set, DEFAULT_TOL)? {
            return Err(SystemError::Invalid("X0 must be contained in Xs".into()));
        }
        // Pairwise interior disjointness, probabilistically: sample interior
        // points of each region and require each to violate at least one
        // half-space of every other region.
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        for i in 0..regions.len() {
            let Some((center, depth)) = interior_point(&regions[i])? else {
                return Err(SystemError::Invalid(format!("region {i} has empty interior")));
            };
            let mut probes = vec![center.clone()];
            for _ in 0..8 {
                let jitter: Vec<f64> = center
                    .iter()
                    .map(|&c| c + (rng.random::<f64>() - 0.5) * depth)
                    .collect();
                if regions[i].contains_point(&jitter, 0.0) {
                    probes.push(jitter);
                }
            }
            for (j, other) in regions.iter().enumerate() {
                if j == i {
                    continue;
                }
                for p in &probes {
                    if other.contains_point(p, 0.0) {
                        return Err(SystemError::RegionsOverlap(i.min(j), i.max(j)));
                    }
                }
            }
        }
        Ok(Self { regions, dynamics, n, initial_set, safe_set, horizon })
    }

    /// State dimension n.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// The dynamics regions `Q_1..Q_ℓ`.
    pub fn regions(&self) -> &[Polyhedron] {
        &self.regions
    }

    /// The per-region affine maps.
    pub fn dynamics(&self) -> &[AffineMap] {
        &self.dynamics
    }

    /// The initial set X0.
    pub fn initial_set(&self) -> &Polyhedron {
        &self.initial_set
    }

    /// The safe set Xs.
    pub fn safe_set(&self) -> &Polyhedron {
        &self.safe_set
    }

    /// The horizon T (steps).
    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Index of the dynamics region containing `x` (membership within
    /// `tol`); ties on shared facets resolve to the lowest region index.
    pub fn region_of(&self, x: &[f64], tol: f64) -> Option<usize> {
        self.regions.iter().position(|r| r.contains_point(x, tol))
    }

    /// Applies the full PWA map (without noise) to a state inside some
    /// region.
    pub fn step(&self, x: &[f64], tol: f64) -> Option<Vec<f64>> {
        self.region_of(x, tol).map(|r| self.dynamics[r].apply(x))
    }
}

/// Explicit representation of the unsafe set `Xu = X \ Xs` as a finite union
/// of polyhedra (complements of polyhedra are not polyhedra, but the LP
/// constraints need half-space representations of `R̄_i ∩ Xu`).
#[derive(Debug, Clone)]
pub struct UnsafeDescription {
    pieces: Vec<Polyhedron>,
}

impl UnsafeDescription {
    /// Builds the description, checking that every unsafe piece has at most
    /// zero-measure overlap with the safe set.
    pub fn new(pieces: Vec<Polyhedron>, safe_set: &Polyhedron) -> Result<Self, SystemError> {
        if pieces.is_empty() {
            return Err(SystemError::Invalid("the unsafe set needs at least one piece".into()));
        }
        for (k, p) in pieces.iter().enumerate() {
            if p.dim() != safe_set.dim() {
                return Err(SystemError::Invalid(format!(
                    "unsafe piece {k} has dimension {} ≠ {}",
                    p.dim(),
                    safe_set.dim()
                )));
            }
            if positive_overlap(p, safe_set)? {
                return Err(SystemError::Invalid(format!(
                    "unsafe piece {k} overlaps the interior of the safe set"
                )));
            }
        }
        Ok(Self { pieces })
    }

    /// The unsafe pieces.
    pub fn pieces(&self) -> &[Polyhedron] {
        &self.pieces
    }

    /// True when `x` lies in some unsafe piece (within `tol`).
    pub fn contains_point(&self, x: &[f64], tol: f64) -> bool {
        self.pieces.iter().any(|p| p.contains_point(x, tol))
    }
}

/// A polyhedral partition of the modeled domain into barrier pieces, with
/// the refinement map into the dynamics regions and the index sets.
#[derive(Debug, Clone)]
pub struct BarrierPartition {
    pieces: Vec<Polyhedron>,
    parent: Vec<usize>,
    index_safe: Vec<usize>,
    index_unsafe: Vec<usize>,
    index_initial: Vec<usize>,
}

impl BarrierPartition {
    /// Assembles a partition from explicit pieces and parent indices,
    /// enforcing every invariant: `ℓ̄ ≥ ℓ`, surjective refinement map,
    /// `R̄_i ⊆ Q_{r(i)}` (containment LPs), and index sets computed by
    /// [`classify_indices`].
    pub fn from_pieces(
        pieces: Vec<Polyhedron>,
        parent: Vec<usize>,
        sys: &PwaSystem,
        unsafe_desc: &UnsafeDescription,
    ) -> Result<Self, SystemError> {
        if pieces.len() != parent.len() {
            return Err(SystemError::Invalid("pieces and parent lists must have equal length".into()));
        }
        if pieces.len() < sys.regions().len() {
            return Err(SystemError::Invalid(format!(
                "need at least ℓ = {} pieces, got {}",
                sys.regions().len(),
                pieces.len()
            )));
        }
        let mut seen = vec![false; sys.regions().len()];
        for (i, (piece, &r)) in pieces.iter().zip(&parent).enumerate() {
            if piece.dim() != sys.dim() {
                return Err(SystemError::Invalid(format!("piece {i} has wrong dimension")));
            }
            let Some(region) = sys.regions().get(r) else {
                return Err(SystemError::Invalid(format!("piece {i} refers to unknown region {r}")));
            };
            if !region.contains(piece, DEFAULT_TOL)? {
                return Err(SystemError::PieceEscapesRegion(describe(piece, i), r));
            }
            seen[r] = true;
        }
        if let Some(r) = seen.iter().position(|s| !s) {
            return Err(SystemError::RegionWithoutPiece(r));
        }
        let (index_safe, index_unsafe, index_initial) = classify_indices(&pieces, sys, unsafe_desc)?;
        Ok(Self { pieces, parent, index_safe, index_unsafe, index_initial })
    }

    /// The barrier pieces `R̄_1..R̄_ℓ̄`.
    pub fn pieces(&self) -> &[Polyhedron] {
        &self.pieces
    }

    /// Number of pieces ℓ̄.
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    /// True when there are no pieces (never, for a validated partition).
    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// The refinement map `r`: piece index → dynamics region index.
    pub fn parent(&self) -> &[usize] {
        &self.parent
    }

    /// Indices of pieces with positive-measure overlap with Xs.
    pub fn index_safe(&self) -> &[usize] {
        &self.index_safe
    }

    /// Indices of pieces with positive-measure overlap with Xu.
    pub fn index_unsafe(&self) -> &[usize] {
        &self.index_unsafe
    }

    /// Indices of pieces with positive-measure overlap with X0.
    pub fn index_initial(&self) -> &[usize] {
        &self.index_initial
    }

    /// Indices (ascending) of the pieces containing `x` within `tol`.
    pub fn pieces_containing(&self, x: &[f64], tol: f64) -> Vec<usize> {
        self.pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.contains_point(x, tol))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Builds a barrier partition from per-axis breakpoint lists.
///
/// Each axis gets the cells between consecutive breakpoints; the first/last
/// breakpoint may be infinite to create unbounded end cells. Cells are
/// enumerated in row-major order (axis 0 slowest). A cell overlapping the
/// interior of exactly one dynamics region becomes one piece (after a
/// containment check); a cell straddling several regions is split along the
/// region facets automatically, with a warning, into one piece per region.
/// A cell touching no region interior — or escaping its only region — is a
/// hard error: the grid must stay inside the modeled domain.
pub fn build_partition(
    sys: &PwaSystem,
    unsafe_desc: &UnsafeDescription,
    grid_spec: &[Vec<f64>],
) -> Result<BarrierPartition, SystemError> {
    let n = sys.dim();
    if grid_spec.len() != n {
        return Err(SystemError::Invalid(format!(
            "grid spec has {} axes but the system has {n}",
            grid_spec.len()
        )));
    }
    for (k, breaks) in grid_spec.iter().enumerate() {
        if breaks.len() < 2 {
            return Err(SystemError::Invalid(format!("axis {k} needs at least 2 breakpoints")));
        }
        if breaks.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1]) {
            return Err(SystemError::Invalid(format!(
                "axis {k} breakpoints must be strictly increasing"
            )));
        }
        if breaks[1..breaks.len() - 1].iter().any(|v| !v.is_finite()) {
            return Err(SystemError::Invalid(format!(
                "axis {k}: only the first/last breakpoint may be infinite"
            )));
        }
    }
    let cells_per_axis: Vec<usize> = grid_spec.iter().map(|b| b.len() - 1).collect();
    let total: usize = cells_per_axis.iter().product();
    let mut pieces = Vec::new();
    let mut parent = Vec::new();
    for flat in 0..total {
        // Decode row-major multi-index (axis 0 slowest).
        let mut rest = flat;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for k in (0..n).rev() {
            let idx = rest % cells_per_axis[k];
            rest /= cells_per_axis[k];
            lo[k] = grid_spec[k][idx];
            hi[k] = grid_spec[k][idx + 1];
        }
        let cell = cell_polyhedron(&lo, &hi)?;
        let mut overlapping = Vec::new();
        for (j, region) in sys.regions().iter().enumerate() {
            if positive_overlap(&cell, region)? {
                overlapping.push(j);
            }
        }
        match overlapping.as_slice() {
            [] => return Err(SystemError::CellNotCovered(cell_desc(&lo, &hi))),
            [j] => {
                if !sys.regions()[*j].contains(&cell, DEFAULT_TOL)? {
                    return Err(SystemError::PieceEscapesRegion(cell_desc(&lo, &hi), *j));
                }
                pieces.push(cell);
                parent.push(*j);
            }
            several => {
                log::warn!(
                    "grid cell {} straddles dynamics regions {:?}; splitting it along the region facets",
                    cell_desc(&lo, &hi),
                    several
                );
                for &j in several {
                    pieces.push(cell.intersect(&sys.regions()[j])?);
                    parent.push(j);
                }
            }
        }
    }
    BarrierPartition::from_pieces(pieces, parent, sys, unsafe_desc)
}

/// Piece index sets `(I_s, I_u, I_0)`.
pub type IndexSets = (Vec<usize>, Vec<usize>, Vec<usize>);

/// Computes the index sets `(I_s, I_u, I_0)`: a piece belongs to a set iff
/// its intersection with Xs / Xu / X0 has positive measure.
///
/// Overlap is decided by tightening every inequality by [`OVERLAP_MARGIN`]
/// and testing emptiness, which excludes zero-measure facet contact — the
/// barrier is evaluated as a max over pieces, so every boundary point stays
/// covered by a piece that overlaps the relevant set with positive measure.
/// A piece may appear in several sets.
pub fn classify_indices(
    pieces: &[Polyhedron],
    sys: &PwaSystem,
    unsafe_desc: &UnsafeDescription,
) -> Result<IndexSets, SystemError> {
    let mut index_safe = Vec::new();
    let mut index_unsafe = Vec::new();
    let mut index_initial = Vec::new();
    for (i, piece) in pieces.iter().enumerate() {
        if positive_overlap(piece, sys.safe_set())? {
            index_safe.push(i);
        }
        for u in unsafe_desc.pieces() {
            if positive_overlap(piece, u)? {
                index_unsafe.push(i);
                break;
            }
        }
        if positive_overlap(piece, sys.initial_set())? {
            index_initial.push(i);
        }
    }
    Ok((index_safe, index_unsafe, index_initial))
}

/// True when `p ∩ q` keeps positive measure: nonempty after tightening every
/// row by [`OVERLAP_MARGIN`].
pub fn positive_overlap(p: &Polyhedron, q: &Polyhedron) -> Result<bool, SystemError> {
    let cap = p.intersect(q)?;
    Ok(!shrink(&cap, OVERLAP_MARGIN)?.is_empty(DEFAULT_TOL)?)
}

/// Tightens every inequality of `p` by `margin` (subtracts it from each
/// right-hand side).
pub fn shrink(p: &Polyhedron, margin: f64) -> Result<Polyhedron, SystemError> {
    let h_vec = p.h_vec().iter().map(|&h| h - margin).collect();
    Ok(Polyhedron::new(p.h_mat().to_vec(), h_vec)?)
}

/// Box cell with possibly-infinite sides: rows only for the finite bounds.
fn cell_polyhedron(lo: &[f64], hi: &[f64]) -> Result<Polyhedron, SystemError> {
    let n = lo.len();
    let mut h_mat = Vec::new();
    let mut h_vec = Vec::new();
    for k in 0..n {
        if hi[k].is_finite() {
            let mut row = vec![0.0; n];
            row[k] = 1.0;
            h_mat.push(row);
            h_vec.push(hi[k]);
        }
        if lo[k].is_finite() {
            let mut row = vec![0.0; n];
            row[k] = -1.0;
            h_mat.push(row);
            h_vec.push(-lo[k]);
        }
    }
    if h_mat.is_empty() {
        // A single all-space cell: keep a vacuous row so the H-form is valid.
        h_mat.push(vec![0.0; n]);
        h_vec.push(0.0);
    }
    Ok(Polyhedron::new(h_mat, h_vec)?)
}

fn cell_desc(lo: &[f64], hi: &[f64]) -> String {
    let parts: Vec<String> = lo.iter().zip(hi).map(|(a, b)| format!("[{a}, {b}]")).collect();
    parts.join(" × ")
}

fn describe(p: &Polyhedron, idx: usize) -> String {
    format!("#{idx} ({} rows, n = {})", p.num_rows(), p.dim())
}

/// A deep interior point of `p` and its depth, found by maximizing the slack
/// common to all rows (scaled by row norms, capped at 1). `None` when the
/// interior is empty at LP tolerance.
fn interior_point(p: &Polyhedron) -> Result<Option<(Vec<f64>, f64)>, SystemError> {
    use crate::lp::{LpModel, LpStatus, Relation};
    let n = p.dim();
    let mut model = LpModel::new();
    let xs: Vec<_> = (0..n).map(|_| model.add_var(f64::NEG_INFINITY, f64::INFINITY)).collect();
    let t = model.add_var(0.0, 1.0);
    model.set_cost(t, -1.0); // maximize t
    for (row, &b) in p.h_mat().iter().zip(p.h_vec()) {
        let norm = row.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            if b < 0.0 {
                return Ok(None);
            }
            continue;
        }
        let mut coeffs: Vec<_> = xs
            .iter()
            .zip(row)
            .filter(|(_, &c)| c != 0.0)
            .map(|(&v, &c)| (v, c))
            .collect();
        coeffs.push((t, norm));
        model
            .add_constraint(coeffs, Relation::Le, b)
            .map_err(|e| SystemError::Invalid(e.to_string()))?;
    }
    let sol = model.solve(crate::lp::DEFAULT_SOLVER_TOL);
    match sol.status {
        LpStatus::Optimal => {
            let values = sol.values.unwrap();
            let depth = values[t.index()];
            if depth <= DEFAULT_TOL {
                return Ok(None);
            }
            Ok(Some((values[..n].to_vec(), depth)))
        }
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => {
            // t is capped at 1, so this cannot happen; treat defensively.
            Err(SystemError::Invalid("interior-point LP unbounded".into()))
        }
        LpStatus::NumericalFailure => {
            Err(SystemError::Polytope(PolytopeError::Solver("interior-point LP failed".into())))
        }
    }
}

/// Checks that the sup of every linear function over `p` is finite in the
/// directions of the rows of `q` — helper for tests; re-exported for oracle
/// use.
pub fn sup_is_finite(p: &Polyhedron, direction: &[f64]) -> Result<bool, SystemError> {
    Ok(matches!(p.maximize(direction)?, SupOutcome::Finite(_)))
}
