//! Minimal deterministic interface to the bundled HiGHS linear-programming
//! solver.
//!
//! The rest of the crate never talks to the solver directly: it builds an
//! [`LpModel`] (variables with bounds, sparse `≤`/`=` rows in insertion
//! order, a minimization objective), calls [`LpModel::solve`], and gets an
//! [`LpSolution`] whose status is one of four faithful outcomes. Solves are
//! single-threaded so identical models produce identical solutions; an
//! independent [`LpModel::audit`] pass re-checks any claimed solution against
//! the stored rows, and [`LpModel::write_lp`] exports the model in the
//! standard LP text format for external cross-checking.

use std::fmt::Write as _;

use thiserror::Error;

/// Default solver feasibility tolerance.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-8;

/// Errors raised while building a model.
#[derive(Debug, Error)]
pub enum LpError {
    /// A constraint referenced a variable id that was never declared.
    #[error("constraint references undeclared variable id {0}")]
    UnknownVariable(usize),
    /// A non-finite coefficient or right-hand side was supplied.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Identifier of a model variable (column).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    /// The column index of this variable.
    pub fn index(self) -> usize {
        self.0
    }
}

/// Identifier of a model constraint (row).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowId(pub(crate) usize);

impl RowId {
    /// The row index of this constraint.
    pub fn index(self) -> usize {
        self.0
    }
}

/// Constraint relation: `≤` or `=`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// Left-hand side at most the right-hand side.
    Le,
    /// Left-hand side equal to the right-hand side.
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

/// Solve status. `Optimal` is the only status that carries values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    /// An optimal solution was found.
    Optimal,
    /// The constraints are infeasible (certified by the solver).
    Infeasible,
    /// The objective is unbounded on the feasible set.
    Unbounded,
    /// The solver could not certify any of the above.
    NumericalFailure,
}

/// Solution of an [`LpModel`]: values are present iff the status is
/// [`LpStatus::Optimal`].
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Faithful solver outcome.
    pub status: LpStatus,
    /// Primal values by variable index (present iff `status == Optimal`).
    pub values: Option<Vec<f64>>,
    /// Objective value `cᵀx` (present iff `status == Optimal`).
    pub objective: Option<f64>,
}

impl LpSolution {
    fn failure(status: LpStatus) -> Self {
        Self { status, values: None, objective: None }
    }
}

/// Report of an independent feasibility audit of a candidate solution.
#[derive(Debug, Clone)]
pub struct AuditReport {
    /// Largest violation over all rows and variable bounds (0 when clean).
    pub max_violation: f64,
    /// Row index attaining the maximum, if a row is the worst offender.
    pub worst_row: Option<usize>,
    /// True iff `max_violation ≤` the tolerance handed to `audit`.
    pub passed: bool,
}

/// A linear program: variables with bounds, sparse rows, minimize `cᵀx`.
///
/// Rows are stored and passed to the solver in insertion order, which makes
/// solves reproducible for identical build sequences.
#[derive(Debug, Clone, Default)]
pub struct LpModel {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rows: Vec<Row>,
}

impl LpModel {
    /// Creates an empty model.
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with bounds `[lower, upper]` and zero cost.
    ///
    /// Infinite bounds are allowed. Panics if `lower > upper` or a bound is
    /// NaN — that is a programming error, not a data condition.
    pub fn add_var(&mut self, lower: f64, upper: f64) -> VarId {
        assert!(!lower.is_nan() && !upper.is_nan(), "variable bounds must not be NaN");
        assert!(lower <= upper, "variable bounds must satisfy lower ≤ upper");
        let id = self.lower.len();
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.push(0.0);
        VarId(id)
    }

    /// Sets the objective coefficient of `var` (minimization).
    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        assert!(cost.is_finite(), "objective coefficients must be finite");
        self.cost[var.0] = cost;
    }

    /// Adds the constraint `Σ coeffs·x  relation  rhs`.
    ///
    /// Duplicate variable entries are merged and zero coefficients dropped,
    /// so callers may pass coefficient lists assembled from several sources.
    pub fn add_constraint(
        &mut self,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<RowId, LpError> {
        if !rhs.is_finite() {
            return Err(LpError::NonFinite("right-hand side"));
        }
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (var, c) in coeffs {
            if var.0 >= self.lower.len() {
                return Err(LpError::UnknownVariable(var.0));
            }
            if !c.is_finite() {
                return Err(LpError::NonFinite("constraint coefficient"));
            }
            if c == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(idx, _)| *idx == var.0) {
                Some((_, acc)) => *acc += c,
                None => merged.push((var.0, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        let id = self.rows.len();
        self.rows.push(Row { coeffs: merged, relation, rhs });
        Ok(RowId(id))
    }

    /// Number of variables (columns).
    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    /// Number of constraints (rows).
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Solves the model with the given feasibility tolerance.
    ///
    /// The solve runs on a single thread with a fresh solver instance, so
    /// repeating it on the same model reproduces the same outcome. All
    /// backend failure modes are mapped to [`LpStatus::NumericalFailure`];
    /// this method never panics on solver trouble.
    pub fn solve(&self, tol: f64) -> LpSolution {
        let outcome = self.solve_once(tol, true);
        match outcome.status {
            // The backend can return an ambiguous infeasible-or-unbounded
            // verdict out of presolve; disambiguate with a feasibility probe.
            LpStatus::NumericalFailure if outcome.ambiguous => {
                let mut probe = self.clone();
                for c in &mut probe.cost {
                    *c = 0.0;
                }
                let feas = probe.solve_once(tol, false);
                match feas.status {
                    LpStatus::Optimal => LpSolution::failure(LpStatus::Unbounded),
                    LpStatus::Infeasible => LpSolution::failure(LpStatus::Infeasible),
                    _ => LpSolution::failure(LpStatus::NumericalFailure),
                }
            }
            _ => LpSolution { status: outcome.status, values: outcome.values, objective: outcome.objective },
        }
    }

    fn solve_once(&self, tol: f64, presolve: bool) -> SolveOutcome {
        use highs::{HighsModelStatus, RowProblem, Sense};

        let mut pb = RowProblem::default();
        let cols: Vec<highs::Col> = (0..self.num_vars())
            .map(|i| pb.add_column(self.cost[i], self.lower[i]..=self.upper[i]))
            .collect();
        let mut buf: Vec<(highs::Col, f64)> = Vec::new();
        for row in &self.rows {
            buf.clear();
            buf.extend(row.coeffs.iter().map(|&(idx, c)| (cols[idx], c)));
            match row.relation {
                Relation::Le => pb.add_row(..=row.rhs, buf.as_slice()),
                Relation::Eq => pb.add_row(row.rhs..=row.rhs, buf.as_slice()),
            };
        }
        let mut model = pb.optimise(Sense::Minimise);
        model.set_option("output_flag", false);
        model.set_option("threads", 1);
        model.set_option("parallel", "off");
        model.set_option("primal_feasibility_tolerance", tol);
        model.set_option("dual_feasibility_tolerance", tol);
        if !presolve {
            model.set_option("presolve", "off");
        }
        let solved = model.solve();
        match solved.status() {
            HighsModelStatus::Optimal => {
                let values = solved.get_solution().columns().to_vec();
                let objective: f64 =
                    values.iter().zip(&self.cost).map(|(x, c)| x * c).sum();
                SolveOutcome {
                    status: LpStatus::Optimal,
                    values: Some(values),
                    objective: Some(objective),
                    ambiguous: false,
                }
            }
            HighsModelStatus::Infeasible => SolveOutcome::plain(LpStatus::Infeasible),
            HighsModelStatus::Unbounded => SolveOutcome::plain(LpStatus::Unbounded),
            HighsModelStatus::UnboundedOrInfeasible => SolveOutcome {
                status: LpStatus::NumericalFailure,
                values: None,
                objective: None,
                ambiguous: true,
            },
            _ => SolveOutcome::plain(LpStatus::NumericalFailure),
        }
    }

    /// Independently re-checks `values` against every row and variable bound.
    ///
    /// Returns the worst violation found; `passed` is true when it is within
    /// `tol`. This pass never consults the solver.
    pub fn audit(&self, values: &[f64], tol: f64) -> AuditReport {
        let mut max_violation: f64 = 0.0;
        let mut worst_row = None;
        for (i, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            let x = values[i];
            let v = (lo - x).max(x - hi).max(0.0);
            if v > max_violation {
                max_violation = v;
                worst_row = None;
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            let lhs: f64 = row.coeffs.iter().map(|&(idx, c)| c * values[idx]).sum();
            let v = match row.relation {
                Relation::Le => (lhs - row.rhs).max(0.0),
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            if v > max_violation {
                max_violation = v;
                worst_row = Some(r);
            }
        }
        AuditReport { max_violation, worst_row, passed: max_violation <= tol }
    }

    /// Writes the model in the standard LP text interchange format.
    pub fn write_lp(&self, w: &mut dyn std::io::Write) -> std::io::Result<()> {
        let mut out = String::new();
        out.push_str("Minimize\n obj:");
        let mut wrote_term = false;
        for (i, &c) in self.cost.iter().enumerate() {
            if c != 0.0 {
                push_term(&mut out, c, i, wrote_term);
                wrote_term = true;
            }
        }
        if !wrote_term {
            out.push_str(" 0 x0");
        }
        out.push_str("\nSubject To\n");
        for (r, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " c{r}:");
            let mut first = true;
            for &(idx, c) in &row.coeffs {
                push_term(&mut out, c, idx, !first);
                first = false;
            }
            if first {
                out.push_str(" 0 x0");
            }
            let op = match row.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", fmt_f64(row.rhs));
        }
        out.push_str("Bounds\n");
        for i in 0..self.num_vars() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            match (lo.is_finite(), hi.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " x{i} free");
                }
                (true, false) => {
                    let _ = writeln!(out, " x{i} >= {}", fmt_f64(lo));
                }
                (false, true) => {
                    let _ = writeln!(out, " -infinity <= x{i} <= {}", fmt_f64(hi));
                }
                (true, true) => {
                    let _ = writeln!(out, " {} <= x{i} <= {}", fmt_f64(lo), fmt_f64(hi));
                }
            }
        }
        out.push_str("End\n");
        w.write_all(out.as_bytes())
    }
}

struct SolveOutcome {
    status: LpStatus,
    values: Option<Vec<f64>>,
    objective: Option<f64>,
    ambiguous: bool,
}

impl SolveOutcome {
    fn plain(status: LpStatus) -> Self {
        Self { status, values: None, objective: None, ambiguous: false }
    }
}

fn push_term(out: &mut String, c: f64, var: usize, with_sign: bool) {
    if with_sign {
        if c < 0.0 {
            let _ = write!(out, " - {} x{var}", fmt_f64(-c));
        } else {
            let _ = write!(out, " + {} x{var}", fmt_f64(c));
        }
    } else {
        let _ = write!(out, " {} x{var}", fmt_f64(c));
    }
}

fn fmt_f64(v: f64) -> String {
    // Shortest round-trip representation; LP format accepts exponents.
    format!("{v:?}")
}
