//! Half-space polyhedral algebra.
//!
//! A [`Polyhedron`] is the solution set of finitely many linear inequalities
//! `H x ≤ h` (an H-representation). Polyhedra here may be unbounded or empty;
//! rows are kept exactly as given — no normalization and no redundancy
//! removal. The module provides the operations the synthesis pipeline needs:
//! intersections, affine preimages, solver-certified emptiness, containment,
//! and (for low-dimensional test oracles) vertex enumeration.

use crate::lp::{LpModel, LpStatus, Relation};
use thiserror::Error;

/// Default tolerance for emptiness / containment decisions.
///
/// Matches the feasibility tolerances of double-precision LP solvers.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Axis-aligned corner pair `(lower, upper)` describing a box.
pub type Corners = (Vec<f64>, Vec<f64>);

/// Errors from polyhedral operations.
#[derive(Debug, Error)]
pub enum PolytopeError {
    /// Dimension mismatch between operands.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Structurally invalid data (empty system, ragged rows, non-finite entries).
    #[error("invalid polyhedron data: {0}")]
    InvalidData(String),
    /// The LP backend failed; emptiness/containment cannot be certified.
    #[error("solver failure during polyhedral query: {0}")]
    Solver(String),
    /// Vertex enumeration requires a bounded input.
    #[error("vertex enumeration requires a bounded polyhedron: {0}")]
    Unbounded(String),
    /// Vertex enumeration is an oracle for n ≤ 3 only.
    #[error("vertex enumeration supports n ≤ 3, got n = {0}")]
    DimensionTooLarge(usize),
}

/// A convex polyhedron `{x ∈ ℝⁿ : H x ≤ h}` in half-space representation.
///
/// Invariants enforced at construction: `H` has `m ≥ 1` rows of equal length
/// `n ≥ 1`, `h` has `m` entries, and all entries are finite. The set may be
/// unbounded or empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    h_mat: Vec<Vec<f64>>,
    h_vec: Vec<f64>,
    n: usize,
}

impl Polyhedron {
    /// Builds a polyhedron from rows `H` and right-hand sides `h`.
    pub fn new(h_mat: Vec<Vec<f64>>, h_vec: Vec<f64>) -> Result<Self, PolytopeError> {
        if h_mat.is_empty() {
            return Err(PolytopeError::InvalidData("H must have at least one row".into()));
        }
        if h_mat.len() != h_vec.len() {
            return Err(PolytopeError::InvalidData(format!(
                "H has {} rows but h has {} entries",
                h_mat.len(),
                h_vec.len()
            )));
        }
        let n = h_mat[0].len();
        if n == 0 {
            return Err(PolytopeError::InvalidData("state dimension must be ≥ 1".into()));
        }
        for (i, row) in h_mat.iter().enumerate() {
            if row.len() != n {
                return Err(PolytopeError::InvalidData(format!(
                    "row {i} has length {} but row 0 has length {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(PolytopeError::InvalidData(format!("row {i} has a non-finite entry")));
            }
        }
        if h_vec.iter().any(|v| !v.is_finite()) {
            return Err(PolytopeError::InvalidData("h has a non-finite entry".into()));
        }
        Ok(Self { h_mat, h_vec, n })
    }

    /// The 1-D interval `[lo, hi]` as `{x : x ≤ hi, −x ≤ −lo}`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self, PolytopeError> {
        Self::box_nd(&[lo], &[hi])
    }

    /// The axis-aligned box `∏ₖ [lo[k], hi[k]]`.
    ///
    /// Rows are emitted in the deterministic order: for each axis `k`, the
    /// upper bound `eₖᵀx ≤ hi[k]` then the lower bound `−eₖᵀx ≤ −lo[k]`.
    /// `lo[k] > hi[k]` is allowed and yields an empty set.
    pub fn box_nd(lo: &[f64], hi: &[f64]) -> Result<Self, PolytopeError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(PolytopeError::InvalidData(
                "box bounds must be nonempty and of equal length".into(),
            ));
        }
        let n = lo.len();
        let mut h_mat = Vec::with_capacity(2 * n);
        let mut h_vec = Vec::with_capacity(2 * n);
        for k in 0..n {
            let mut up = vec![0.0; n];
            up[k] = 1.0;
            h_mat.push(up);
            h_vec.push(hi[k]);
            let mut down = vec![0.0; n];
            down[k] = -1.0;
            h_mat.push(down);
            h_vec.push(-lo[k]);
        }
        Self::new(h_mat, h_vec)
    }

    /// A single half-space slab on one axis: `sign·x[axis] ≤ bound`
    /// (`sign = ±1`), embedded in dimension `n`.
    pub fn axis_halfspace(n: usize, axis: usize, sign: f64, bound: f64) -> Result<Self, PolytopeError> {
        if axis >= n {
            return Err(PolytopeError::InvalidData(format!("axis {axis} out of range for n = {n}")));
        }
        let mut row = vec![0.0; n];
        row[axis] = sign;
        Self::new(vec![row], vec![bound])
    }

    /// State dimension `n`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of rows `m`.
    pub fn num_rows(&self) -> usize {
        self.h_mat.len()
    }

    /// The coefficient matrix `H` (rows).
    pub fn h_mat(&self) -> &[Vec<f64>] {
        &self.h_mat
    }

    /// The right-hand side vector `h`.
    pub fn h_vec(&self) -> &[f64] {
        &self.h_vec
    }

    /// Point membership: `H x ≤ h + tol` component-wise.
    pub fn contains_point(&self, x: &[f64], tol: f64) -> bool {
        debug_assert_eq!(x.len(), self.n);
        self.h_mat
            .iter()
            .zip(&self.h_vec)
            .all(|(row, &b)| dot(row, x) <= b + tol)
    }

    /// Stacks the rows of both systems: `{x : H_P x ≤ h_P, H_R x ≤ h_R}`.
    ///
    /// No redundancy removal is performed; equality holds as sets.
    pub fn intersect(&self, other: &Polyhedron) -> Result<Polyhedron, PolytopeError> {
        if self.n != other.n {
            return Err(PolytopeError::DimensionMismatch(format!(
                "intersect: n = {} vs n = {}",
                self.n, other.n
            )));
        }
        let mut h_mat = self.h_mat.clone();
        h_mat.extend(other.h_mat.iter().cloned());
        let mut h_vec = self.h_vec.clone();
        h_vec.extend_from_slice(&other.h_vec);
        Polyhedron::new(h_mat, h_vec)
    }

    /// Decides emptiness by solving the LP `minimize 0 s.t. H x ≤ h + tol·1`.
    ///
    /// Returns `true` iff that LP is infeasible, as certified by the solver's
    /// status. A sound interval prefilter (contradictory axis-aligned rows)
    /// may shortcut the `true` answer; it can never flip a result the LP
    /// would give. Solver failures are reported as errors, never as
    /// emptiness.
    pub fn is_empty(&self, tol: f64) -> Result<bool, PolytopeError> {
        let scan = self.axis_scan();
        if scan.zero_row_infeasible_below(-tol) {
            // A row 0ᵀx ≤ h with h < −tol is contradictory even after relaxation.
            return Ok(true);
        }
        for k in 0..self.n {
            // Relaxed rows give xₖ ≤ hi + tol and xₖ ≥ lo − tol.
            if scan.lo[k] - tol > scan.hi[k] + tol {
                return Ok(true);
            }
        }
        let mut model = LpModel::new();
        let xs: Vec<_> = (0..self.n)
            .map(|_| model.add_var(f64::NEG_INFINITY, f64::INFINITY))
            .collect();
        for (row, &b) in self.h_mat.iter().zip(&self.h_vec) {
            let coeffs: Vec<_> = xs
                .iter()
                .zip(row)
                .filter(|(_, &c)| c != 0.0)
                .map(|(&v, &c)| (v, c))
                .collect();
            model
                .add_constraint(coeffs, Relation::Le, b + tol)
                .map_err(|e| PolytopeError::Solver(e.to_string()))?;
        }
        let sol = model.solve(crate::lp::DEFAULT_SOLVER_TOL);
        match sol.status {
            LpStatus::Optimal | LpStatus::Unbounded => Ok(false),
            LpStatus::Infeasible => Ok(true),
            LpStatus::NumericalFailure => Err(PolytopeError::Solver(
                "numerical failure in emptiness LP".into(),
            )),
        }
    }

    /// Decides `R ⊆ self` up to `tol`: for every row `(a, β)` of `self`,
    /// checks `max{aᵀx : x ∈ R} ≤ β + tol` by one LP.
    ///
    /// An empty `R` is contained in everything. If some sup is unbounded
    /// above, the answer is `false` (with a debug diagnostic naming the row).
    pub fn contains(&self, r: &Polyhedron, tol: f64) -> Result<bool, PolytopeError> {
        if self.n != r.n {
            return Err(PolytopeError::DimensionMismatch(format!(
                "contains: n = {} vs n = {}",
                self.n, r.n
            )));
        }
        for (idx, (row, &b)) in self.h_mat.iter().zip(&self.h_vec).enumerate() {
            match r.maximize(row)? {
                SupOutcome::Empty => return Ok(true),
                SupOutcome::Unbounded => {
                    log::debug!(
                        "contains: sup of row {idx} over candidate subset is unbounded; not contained"
                    );
                    return Ok(false);
                }
                SupOutcome::Finite(sup) => {
                    if sup > b + tol {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Maximizes the linear objective `aᵀx` over the polyhedron.
    pub fn maximize(&self, a: &[f64]) -> Result<SupOutcome, PolytopeError> {
        if a.len() != self.n {
            return Err(PolytopeError::DimensionMismatch(format!(
                "objective length {} vs n = {}",
                a.len(),
                self.n
            )));
        }
        let mut model = LpModel::new();
        let xs: Vec<_> = (0..self.n)
            .map(|_| model.add_var(f64::NEG_INFINITY, f64::INFINITY))
            .collect();
        for (row, &b) in self.h_mat.iter().zip(&self.h_vec) {
            let coeffs: Vec<_> = xs
                .iter()
                .zip(row)
                .filter(|(_, &c)| c != 0.0)
                .map(|(&v, &c)| (v, c))
                .collect();
            model
                .add_constraint(coeffs, Relation::Le, b)
                .map_err(|e| PolytopeError::Solver(e.to_string()))?;
        }
        // Maximize aᵀx = −minimize (−a)ᵀx.
        for (&v, &c) in xs.iter().zip(a) {
            if c != 0.0 {
                model.set_cost(v, -c);
            }
        }
        let sol = model.solve(crate::lp::DEFAULT_SOLVER_TOL);
        match sol.status {
            LpStatus::Optimal => {
                let obj = sol
                    .objective
                    .ok_or_else(|| PolytopeError::Solver("missing objective".into()))?;
                Ok(SupOutcome::Finite(-obj))
            }
            LpStatus::Infeasible => Ok(SupOutcome::Empty),
            LpStatus::Unbounded => Ok(SupOutcome::Unbounded),
            LpStatus::NumericalFailure => {
                Err(PolytopeError::Solver("numerical failure in sup LP".into()))
            }
        }
    }

    /// Per-axis bounds `[lo[k], hi[k]]` of the polyhedron computed by 2n LPs.
    ///
    /// Returns `Ok(None)` when the set is empty and an [`PolytopeError::Unbounded`]
    /// error when any direction is unbounded.
    pub fn bounding_box(&self) -> Result<Option<Corners>, PolytopeError> {
        let mut lo = vec![0.0; self.n];
        let mut hi = vec![0.0; self.n];
        for k in 0..self.n {
            let mut dir = vec![0.0; self.n];
            dir[k] = 1.0;
            match self.maximize(&dir)? {
                SupOutcome::Empty => return Ok(None),
                SupOutcome::Unbounded => {
                    return Err(PolytopeError::Unbounded(format!("axis {k} unbounded above")))
                }
                SupOutcome::Finite(v) => hi[k] = v,
            }
            dir[k] = -1.0;
            match self.maximize(&dir)? {
                SupOutcome::Empty => return Ok(None),
                SupOutcome::Unbounded => {
                    return Err(PolytopeError::Unbounded(format!("axis {k} unbounded below")))
                }
                SupOutcome::Finite(v) => lo[k] = -v,
            }
        }
        Ok(Some((lo, hi)))
    }

    /// Enumerates the vertices of a bounded polyhedron with `n ≤ 3`.
    ///
    /// Each vertex is the intersection of `n` active rows that satisfies all
    /// other rows; results are deduplicated within 1e-9. Intended as a test
    /// oracle, not a production path.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>, PolytopeError> {
        if self.n > 3 {
            return Err(PolytopeError::DimensionTooLarge(self.n));
        }
        if self.bounding_box()?.is_none() {
            return Ok(Vec::new());
        }
        let m = self.h_mat.len();
        let n = self.n;
        let feas_tol = 1e-8;
        let dedup_tol = 1e-9;
        let mut verts: Vec<Vec<f64>> = Vec::new();
        let mut combo = (0..n).collect::<Vec<_>>();
        loop {
            // Solve the n×n system of the active rows.
            let a = nalgebra::DMatrix::from_fn(n, n, |r, c| self.h_mat[combo[r]][c]);
            let b = nalgebra::DVector::from_fn(n, |r, _| self.h_vec[combo[r]]);
            if let Some(x) = a.clone().lu().solve(&b) {
                // Guard against near-singular systems that LU "solves" badly.
                let residual = (&a * &x - &b).amax();
                if residual <= 1e-7 {
                    let xs: Vec<f64> = x.iter().copied().collect();
                    if self.contains_point(&xs, feas_tol)
                        && !verts
                            .iter()
                            .any(|v| v.iter().zip(&xs).all(|(a, b)| (a - b).abs() <= dedup_tol))
                    {
                        verts.push(xs);
                    }
                }
            }
            // Next lexicographic combination of n rows out of m.
            let mut i = n;
            loop {
                if i == 0 {
                    return Ok(verts);
                }
                i -= 1;
                if combo[i] != i + m - n {
                    combo[i] += 1;
                    for j in i + 1..n {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// Scans axis-aligned rows into per-axis interval bounds.
    pub(crate) fn axis_scan(&self) -> AxisScan {
        let n = self.n;
        let mut scan = AxisScan {
            lo: vec![f64::NEG_INFINITY; n],
            hi: vec![f64::INFINITY; n],
            all_axis_aligned: true,
            min_zero_row_rhs: f64::INFINITY,
        };
        for (row, &b) in self.h_mat.iter().zip(&self.h_vec) {
            let mut nz = None;
            let mut count = 0;
            for (k, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    count += 1;
                    nz = Some((k, c));
                }
            }
            match (count, nz) {
                (0, _) => {
                    // 0ᵀx ≤ b: vacuous if b ≥ 0, contradictory if b < 0.
                    scan.min_zero_row_rhs = scan.min_zero_row_rhs.min(b);
                }
                (1, Some((k, c))) => {
                    if c > 0.0 {
                        scan.hi[k] = scan.hi[k].min(b / c);
                    } else {
                        scan.lo[k] = scan.lo[k].max(b / c);
                    }
                }
                _ => scan.all_axis_aligned = false,
            }
        }
        scan
    }
}

/// Result of maximizing a linear objective over a polyhedron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupOutcome {
    /// The feasible set is empty (sup over ∅ is −∞).
    Empty,
    /// The objective is unbounded above on the feasible set.
    Unbounded,
    /// Finite supremum, attained by the solver.
    Finite(f64),
}

/// Interval summary of the axis-aligned rows of a polyhedron.
pub(crate) struct AxisScan {
    /// Greatest lower bound per axis implied by axis-aligned rows.
    pub lo: Vec<f64>,
    /// Least upper bound per axis implied by axis-aligned rows.
    pub hi: Vec<f64>,
    /// True when every row constrains exactly one coordinate (or none).
    pub all_axis_aligned: bool,
    /// Minimum right-hand side among all-zero rows (∞ when none exist).
    pub min_zero_row_rhs: f64,
}

impl AxisScan {
    /// True when some all-zero row has rhs below `threshold` (contradiction).
    pub fn zero_row_infeasible_below(&self, threshold: f64) -> bool {
        self.min_zero_row_rhs < threshold
    }
}

/// An affine map `x ↦ A x + b` with square `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl AffineMap {
    /// Builds the map, validating that `A` is n×n and `b` has length n.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, PolytopeError> {
        let n = b.len();
        if n == 0 {
            return Err(PolytopeError::InvalidData("affine map dimension must be ≥ 1".into()));
        }
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(PolytopeError::InvalidData(format!(
                "A must be {n}×{n} to match b"
            )));
        }
        let finite = a.iter().flatten().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite());
        if !finite {
            return Err(PolytopeError::InvalidData("affine map has a non-finite entry".into()));
        }
        Ok(Self { a, b })
    }

    /// The identity map in dimension n.
    pub fn identity(n: usize) -> Self {
        let a = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { a, b: vec![0.0; n] }
    }

    /// The matrix `A` (rows).
    pub fn a(&self) -> &[Vec<f64>] {
        &self.a
    }

    /// The offset `b`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Dimension n.
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Evaluates `A x + b`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, &off)| dot(row, x) + off)
            .collect()
    }
}

/// The preimage `{x ∈ source : A x + b + shift ∈ target}` as the stacked
/// system `[H_src; H_tgt·A] x ≤ [h_src; h_tgt − H_tgt(b + shift)]`.
///
/// `shift` is one noise realization added after the affine map.
pub fn preimage(
    source: &Polyhedron,
    f: &AffineMap,
    shift: &[f64],
    target: &Polyhedron,
) -> Result<Polyhedron, PolytopeError> {
    let n = source.dim();
    if f.dim() != n || target.dim() != n || shift.len() != n {
        return Err(PolytopeError::DimensionMismatch(format!(
            "preimage: source n = {n}, map n = {}, shift n = {}, target n = {}",
            f.dim(),
            shift.len(),
            target.dim()
        )));
    }
    let mut h_mat = source.h_mat().to_vec();
    let mut h_vec = source.h_vec().to_vec();
    let offset: Vec<f64> = f.b().iter().zip(shift).map(|(&b, &s)| b + s).collect();
    for (row, &rhs) in target.h_mat().iter().zip(target.h_vec()) {
        // Row aᵀ(Ax + b + shift) ≤ rhs becomes (aᵀA) x ≤ rhs − aᵀ(b + shift).
        let mapped: Vec<f64> = (0..n)
            .map(|k| row.iter().zip(f.a()).map(|(&c, arow)| c * arow[k]).sum())
            .collect();
        h_mat.push(mapped);
        h_vec.push(rhs - dot(row, &offset));
    }
    Polyhedron::new(h_mat, h_vec)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = DEFAULT_TOL;

    fn unit_square() -> Polyhedron {
        Polyhedron::box_nd(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn interval_intersection_equals_overlap() {
        let a = Polyhedron::interval(0.0, 1.0).unwrap();
        let b = Polyhedron::interval(0.5, 2.0).unwrap();
        let cap = a.intersect(&b).unwrap();
        assert_eq!(cap.num_rows(), 4);
        // Equal as a set to [0.5, 1]: mutual containment with the box form.
        let expected = Polyhedron::interval(0.5, 1.0).unwrap();
        assert!(cap.contains(&expected, TOL).unwrap());
        assert!(expected.contains(&cap, TOL).unwrap());
    }

    #[test]
    fn intersection_is_idempotent_as_sets() {
        let p = unit_square();
        let pp = p.intersect(&p).unwrap();
        assert!(p.contains(&pp, TOL).unwrap());
        assert!(pp.contains(&p, TOL).unwrap());
    }

    #[test]
    fn disjoint_intersection_is_empty() {
        let p = unit_square();
        let half = Polyhedron::axis_halfspace(2, 0, -1.0, -2.0).unwrap(); // x₁ ≥ 2
        let cap = p.intersect(&half).unwrap();
        assert!(cap.is_empty(TOL).unwrap());
    }

    #[test]
    fn intersect_rejects_dimension_mismatch() {
        let p = unit_square();
        let q = Polyhedron::interval(0.0, 1.0).unwrap();
        assert!(matches!(p.intersect(&q), Err(PolytopeError::DimensionMismatch(_))));
    }

    #[test]
    fn preimage_identity_is_identity() {
        let sq = unit_square();
        let q = preimage(&sq, &AffineMap::identity(2), &[0.0, 0.0], &sq).unwrap();
        assert!(q.contains(&sq, TOL).unwrap());
        assert!(sq.contains(&q, TOL).unwrap());
    }

    #[test]
    fn preimage_with_large_shift_is_empty() {
        let unit = Polyhedron::interval(0.0, 1.0).unwrap();
        let q = preimage(&unit, &AffineMap::identity(1), &[2.0], &unit).unwrap();
        assert!(q.is_empty(TOL).unwrap());
    }

    #[test]
    fn preimage_of_scaling_matches_hand_solution() {
        // {x ∈ [0,2] : 2x − 1 ∈ [0,1]} = [0.5, 1]
        let source = Polyhedron::interval(0.0, 2.0).unwrap();
        let target = Polyhedron::interval(0.0, 1.0).unwrap();
        let f = AffineMap::new(vec![vec![2.0]], vec![0.0]).unwrap();
        let q = preimage(&source, &f, &[-1.0], &target).unwrap();
        let expected = Polyhedron::interval(0.5, 1.0).unwrap();
        assert!(q.contains(&expected, TOL).unwrap());
        assert!(expected.contains(&q, TOL).unwrap());
    }

    #[test]
    fn emptiness_of_contradictory_interval() {
        let p = Polyhedron::new(vec![vec![1.0], vec![-1.0]], vec![1.0, -2.0]).unwrap(); // x ≤ 1, x ≥ 2
        assert!(p.is_empty(TOL).unwrap());
    }

    #[test]
    fn nonempty_interval_is_not_empty() {
        let p = Polyhedron::new(vec![vec![1.0], vec![-1.0]], vec![1.0, 0.0]).unwrap(); // 0 ≤ x ≤ 1
        assert!(!p.is_empty(TOL).unwrap());
    }

    #[test]
    fn degenerate_single_point_is_nonempty() {
        let p = Polyhedron::box_nd(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(!p.is_empty(TOL).unwrap());
    }

    #[test]
    fn non_axis_aligned_emptiness_uses_the_lp() {
        // x₁ + x₂ ≤ −1 intersected with the unit square is empty but has no
        // contradictory axis-aligned pair.
        let p = unit_square()
            .intersect(&Polyhedron::new(vec![vec![1.0, 1.0]], vec![-1.0]).unwrap())
            .unwrap();
        assert!(p.is_empty(TOL).unwrap());
    }

    #[test]
    fn containment_of_intervals() {
        let p = Polyhedron::interval(0.0, 2.0).unwrap();
        let r = Polyhedron::interval(0.0, 1.0).unwrap();
        assert!(p.contains(&r, TOL).unwrap());
        assert!(!r.contains(&p, TOL).unwrap());
    }

    #[test]
    fn containment_of_triangle_in_square() {
        let square = unit_square();
        let triangle = Polyhedron::new(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
            vec![0.0, 0.0, 1.0],
        )
        .unwrap();
        assert!(square.contains(&triangle, TOL).unwrap());
        assert!(!triangle.contains(&square, TOL).unwrap());
    }

    #[test]
    fn empty_sets_are_contained_in_everything() {
        let p = Polyhedron::interval(0.0, 1.0).unwrap();
        let empty = Polyhedron::interval(2.0, 1.0).unwrap();
        assert!(p.contains(&empty, TOL).unwrap());
    }

    #[test]
    fn containment_fails_on_unbounded_candidate() {
        let p = Polyhedron::interval(0.0, 1.0).unwrap();
        let ray = Polyhedron::new(vec![vec![-1.0]], vec![0.0]).unwrap(); // x ≥ 0
        assert!(!p.contains(&ray, TOL).unwrap());
    }

    #[test]
    fn vertices_of_unit_square() {
        let mut got = unit_square().vertices().unwrap();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            got,
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]
        );
    }

    #[test]
    fn vertices_of_interval() {
        let mut got = Polyhedron::interval(0.0, 1.0).unwrap().vertices().unwrap();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, vec![vec![0.0], vec![1.0]]);
    }

    #[test]
    fn vertices_of_standard_triangle() {
        let triangle = Polyhedron::new(
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
            vec![0.0, 0.0, 1.0],
        )
        .unwrap();
        let mut got = triangle.vertices().unwrap();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn vertices_reject_unbounded_input() {
        let ray = Polyhedron::new(vec![vec![-1.0]], vec![0.0]).unwrap();
        assert!(matches!(ray.vertices(), Err(PolytopeError::Unbounded(_))));
    }

    #[test]
    fn vertices_reject_high_dimension() {
        let p = Polyhedron::box_nd(&[0.0; 4], &[1.0; 4]).unwrap();
        assert!(matches!(p.vertices(), Err(PolytopeError::DimensionTooLarge(4))));
    }

    #[test]
    fn vertices_of_empty_set_is_empty_list() {
        let p = Polyhedron::interval(2.0, 1.0).unwrap();
        assert!(p.vertices().unwrap().is_empty());
    }
}
