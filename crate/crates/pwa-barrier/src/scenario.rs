//! Scenario-approach statistics.
//!
//! The synthesis LP enforces the sampled constraints for `N` i.i.d. noise
//! draws. The probability that the resulting optimum violates the true
//! chance constraint with level more than `ε` is at most the exact binomial
//! tail
//!
//! ```text
//! β = Σ_{i=0}^{d−1} C(N, i) εⁱ (1 − ε)^{N−i}
//! ```
//!
//! where `d` is the number of decision variables of the underlying convex
//! program (here `d = ℓ̄(n+1) + 2`: the barrier coefficients plus `γ` and
//! `c`; dual variables never count). This module computes that tail in
//! log-space, inverts it in either direction (required sample count for a
//! target confidence, or achievable violation level for a given sample
//! count), and provides the constraint-tightening margin `δ ≥ εM/(1−ε)`
//! that makes sampled feasibility imply expectation feasibility.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from scenario-statistics computations.
#[derive(Debug, Error)]
pub enum ScenarioError {
    /// An argument was outside its documented domain.
    #[error("invalid scenario input: {0}")]
    InvalidInput(String),
    /// The required sample count would exceed the 10⁹ guard.
    #[error("required sample count exceeds 1e9 ({0})")]
    Overflow(String),
    /// No violation level in (0, 1) meets the confidence target.
    #[error("no admissible violation level: {0}")]
    Infeasible(String),
}

/// Resolved scenario parameters bound to a barrier family.
///
/// Invariants (enforced by the constructors): `beta` equals
/// `binomial_tail(n_samples, eps, d)`; `delta ≥ eps·m_bound/(1−eps) − 1e-12`;
/// `m_bound ≥ 1`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioParams {
    /// Number of noise samples `N`.
    pub n_samples: u64,
    /// Violation level `ε ∈ (0, 1)`.
    pub eps: f64,
    /// Decision-variable count `d = ℓ̄(n+1) + 2`.
    pub d: u64,
    /// Confidence complement `β = binomial_tail(N, ε, d)`.
    pub beta: f64,
    /// Barrier upper bound `M ≥ 1`.
    pub m_bound: f64,
    /// Constraint-tightening margin `δ ≥ εM/(1−ε)`.
    pub delta: f64,
}

impl ScenarioParams {
    /// Resolves from a violation level and a confidence target: picks the
    /// smallest admissible `N` and reports the (smaller) achieved `β`.
    pub fn from_eps_beta(
        eps: f64,
        beta_target: f64,
        d: u64,
        m_bound: f64,
        delta_override: Option<f64>,
    ) -> Result<Self, ScenarioError> {
        let n = required_samples(eps, d, beta_target)?;
        Self::from_eps_n(eps, n, d, m_bound, delta_override)
    }

    /// Resolves from an explicit sample count and violation level; `β` is
    /// whatever the binomial tail gives (possibly near 1 for small `N`).
    pub fn from_eps_n(
        eps: f64,
        n_samples: u64,
        d: u64,
        m_bound: f64,
        delta_override: Option<f64>,
    ) -> Result<Self, ScenarioError> {
        if eps.is_nan() || eps <= 0.0 || eps >= 1.0 {
            return Err(ScenarioError::InvalidInput(format!("eps must lie in (0,1), got {eps}")));
        }
        if n_samples == 0 {
            return Err(ScenarioError::InvalidInput("N must be ≥ 1".into()));
        }
        if d == 0 {
            return Err(ScenarioError::InvalidInput("d must be ≥ 1".into()));
        }
        if m_bound.is_nan() || m_bound < 1.0 {
            return Err(ScenarioError::InvalidInput(format!("M must be ≥ 1, got {m_bound}")));
        }
        let minimal = tightening_margin(eps, m_bound)?;
        let delta = match delta_override {
            None => minimal,
            Some(delta) => {
                if delta < minimal - 1e-12 {
                    return Err(ScenarioError::InvalidInput(format!(
                        "delta = {delta} is below the minimal admissible margin {minimal}"
                    )));
                }
                delta
            }
        };
        let beta = binomial_tail(n_samples, eps, d);
        Ok(Self { n_samples, eps, d, beta, m_bound, delta })
    }

    /// Resolves from a sample count and a confidence target: picks the
    /// smallest violation level `ε` whose tail meets the target.
    pub fn from_n_beta(
        n_samples: u64,
        beta_target: f64,
        d: u64,
        m_bound: f64,
        delta_override: Option<f64>,
    ) -> Result<Self, ScenarioError> {
        let eps = max_violation_level(n_samples, d, beta_target)?;
        Self::from_eps_n(eps, n_samples, d, m_bound, delta_override)
    }
}

/// Decision-variable count of the barrier program: `d = ℓ̄(n+1) + 2`.
///
/// Counts the per-piece slopes and intercepts plus `γ` and `c`; dual
/// variables introduced later by the LP reformulation never count.
pub fn decision_count(num_pieces: usize, n_dim: usize) -> u64 {
    (num_pieces as u64) * (n_dim as u64 + 1) + 2
}

/// The binomial CDF `F(d−1; N, ε) = Σ_{i=0}^{d−1} C(N,i) εⁱ(1−ε)^{N−i}`,
/// computed in log-space (log-gamma) and saturated to `[0, 1]`.
///
/// Exactly 1 when `d − 1 ≥ N`.
pub fn binomial_tail(n: u64, eps: f64, d: u64) -> f64 {
    assert!(n >= 1 && d >= 1, "binomial_tail requires N ≥ 1 and d ≥ 1");
    let eps = eps.clamp(0.0, 1.0);
    if d > n {
        return 1.0;
    }
    if eps == 0.0 {
        return 1.0; // the i = 0 term alone is (1−0)^N = 1
    }
    if eps == 1.0 {
        return 0.0; // every term i ≤ d−1 < N carries a factor 0^{N−i}
    }
    let ln_eps = eps.ln();
    let ln_1m = (-eps).ln_1p();
    let mut sum = 0.0f64;
    for i in 0..d {
        let ln_term = ln_choose(n, i) + (i as f64) * ln_eps + ((n - i) as f64) * ln_1m;
        sum += ln_term.exp();
    }
    sum.clamp(0.0, 1.0)
}

/// `ln C(n, k)`, exact for small `n` and via log-gamma otherwise.
fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if n <= 50 {
        // Multiplicative recurrence stays exact in f64 for n ≤ 50
        // (all intermediates below 2⁵³).
        let k = k.min(n - k);
        let mut c = 1.0f64;
        for j in 0..k {
            c = c * ((n - j) as f64) / ((j + 1) as f64);
        }
        c.ln()
    } else {
        use statrs::function::gamma::ln_gamma;
        ln_gamma((n + 1) as f64) - ln_gamma((k + 1) as f64) - ln_gamma((n - k + 1) as f64)
    }
}

/// Smallest `N` with `binomial_tail(N, ε, d) ≤ β`, by exponential-then-binary
/// search. Errors if `N` would exceed 10⁹.
pub fn required_samples(eps: f64, d: u64, beta_target: f64) -> Result<u64, ScenarioError> {
    if eps.is_nan() || eps <= 0.0 || eps >= 1.0 {
        return Err(ScenarioError::InvalidInput(format!("eps must lie in (0,1), got {eps}")));
    }
    if beta_target.is_nan() || beta_target <= 0.0 || beta_target >= 1.0 {
        return Err(ScenarioError::InvalidInput(format!(
            "beta_target must lie in (0,1), got {beta_target}"
        )));
    }
    if d == 0 {
        return Err(ScenarioError::InvalidInput("d must be ≥ 1".into()));
    }
    const GUARD: u64 = 1_000_000_000;
    // Exponential phase: find hi with tail(hi) ≤ β; tail(lo) > β throughout
    // (lo = 0 stands for the vacuous "no samples" case with tail 1).
    let mut lo = 0u64;
    let mut hi = d.max(1);
    while binomial_tail(hi, eps, d) > beta_target {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi > GUARD {
            return Err(ScenarioError::Overflow(format!(
                "eps = {eps}, d = {d}, beta = {beta_target}"
            )));
        }
    }
    // Binary phase on (lo, hi].
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if binomial_tail(mid, eps, d) <= beta_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Monotonicity of the tail in N is assumed; assert it at the boundary.
    debug_assert!(binomial_tail(hi, eps, d) <= beta_target);
    debug_assert!(hi == 1 || binomial_tail(hi - 1, eps, d) > beta_target);
    Ok(hi)
}

/// Smallest violation level `ε` with `binomial_tail(N, ε, d) ≤ β`, found by
/// bisection to 1e-10.
///
/// The tail is decreasing in `ε`, so every `ε` above the returned value is
/// also admissible: this is the tightest level certifiable from `N` samples
/// at confidence `1 − β`. Errors when no `ε < 1` works (in particular
/// whenever `d − 1 ≥ N`, where the tail is identically 1).
pub fn max_violation_level(n: u64, d: u64, beta_target: f64) -> Result<f64, ScenarioError> {
    if n == 0 || d == 0 {
        return Err(ScenarioError::InvalidInput("N and d must be ≥ 1".into()));
    }
    if beta_target.is_nan() || beta_target <= 0.0 || beta_target >= 1.0 {
        return Err(ScenarioError::InvalidInput(format!(
            "beta_target must lie in (0,1), got {beta_target}"
        )));
    }
    if d > n {
        return Err(ScenarioError::Infeasible(format!(
            "tail is identically 1 for d − 1 = {} ≥ N = {n}",
            d - 1
        )));
    }
    let top = 1.0 - 1e-9;
    if binomial_tail(n, top, d) > beta_target {
        return Err(ScenarioError::Infeasible(format!(
            "even eps → 1 leaves the tail above beta = {beta_target} for N = {n}, d = {d}"
        )));
    }
    let mut lo = 0.0f64; // tail(0) = 1 > β
    let mut hi = top; // tail(hi) ≤ β
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if binomial_tail(n, mid, d) <= beta_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The minimal admissible tightening margin `δ = εM/(1−ε)`.
pub fn tightening_margin(eps: f64, m_bound: f64) -> Result<f64, ScenarioError> {
    if eps.is_nan() || eps <= 0.0 || eps >= 1.0 {
        return Err(ScenarioError::InvalidInput(format!("eps must lie in (0,1), got {eps}")));
    }
    if m_bound.is_nan() || m_bound < 1.0 {
        return Err(ScenarioError::InvalidInput(format!("M must be ≥ 1, got {m_bound}")));
    }
    Ok(eps * m_bound / (1.0 - eps))
}

/// One row of the sample-complexity curve (see the CLI's `samplecurve`).
#[derive(Debug, Clone, Serialize)]
pub struct SampleCurveRow {
    /// Confidence complement β.
    pub beta: f64,
    /// Scenario-approach sample count for (ε, d, β).
    pub n_scenario: u64,
    /// Reference count `ceil(K/β)` showing the 1/β scaling of
    /// concentration-inequality (SAA-style) bounds.
    pub n_saa_reference: u64,
}

/// Computes the (β, N) curve for a fixed violation level and dimension.
///
/// `saa_constant` is the display constant `K` of the reference curve
/// `N_saa = ceil(K/β)`; the scenario curve grows only logarithmically in
/// `1/β`.
pub fn sample_curve(
    eps: f64,
    d: u64,
    betas: &[f64],
    saa_constant: f64,
) -> Result<Vec<SampleCurveRow>, ScenarioError> {
    if saa_constant.is_nan() || saa_constant <= 0.0 {
        return Err(ScenarioError::InvalidInput(format!(
            "SAA reference constant must be positive, got {saa_constant}"
        )));
    }
    betas
        .iter()
        .map(|&beta| {
            let n_scenario = required_samples(eps, d, beta)?;
            let n_saa_reference = (saa_constant / beta).ceil() as u64;
            Ok(SampleCurveRow { beta, n_scenario, n_saa_reference })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_is_one_when_d_covers_all_outcomes() {
        assert_eq!(binomial_tail(5, 0.3, 6), 1.0);
    }

    #[test]
    fn tail_with_d_one_is_a_pure_power() {
        let got = binomial_tail(10, 0.1, 1);
        assert!((got - 0.34867844).abs() < 1e-8, "got {got}");
        assert!((got - 0.9f64.powi(10)).abs() < 1e-15);
    }

    #[test]
    fn tail_matches_independent_three_term_sum() {
        // Σ_{i=0}^{2} C(20,i) 0.25^i 0.75^(20−i), evaluated independently.
        let expected = 0.75f64.powi(20)
            + 20.0 * 0.25 * 0.75f64.powi(19)
            + 190.0 * 0.25f64.powi(2) * 0.75f64.powi(18);
        let got = binomial_tail(20, 0.25, 3);
        assert!((got - expected).abs() <= 1e-14, "got {got}, expected {expected}");
        assert!((got - 0.09126).abs() < 5e-6);
    }

    #[test]
    fn tail_saturates_at_extreme_eps() {
        assert_eq!(binomial_tail(10, 0.0, 3), 1.0);
        assert_eq!(binomial_tail(10, 1.0, 3), 0.0);
    }

    #[test]
    fn required_samples_symmetric_point() {
        assert_eq!(required_samples(0.5, 1, 0.5).unwrap(), 1);
    }

    #[test]
    fn required_samples_matches_closed_form_for_d_one() {
        // smallest N with 0.9^N ≤ 1e-9 is ceil(ln 1e-9 / ln 0.9) = 197
        assert_eq!(required_samples(0.1, 1, 1e-9).unwrap(), 197);
    }

    #[test]
    fn sample_counts_scale_logarithmically_in_confidence() {
        let strict = required_samples(0.05, 23, 1e-9).unwrap();
        let loose = required_samples(0.05, 23, 1e-3).unwrap();
        let ratio = strict as f64 / loose as f64;
        assert!(ratio <= 3.5, "N(1e-9)/N(1e-3) = {ratio}");
    }

    #[test]
    fn required_samples_guards_against_overflow() {
        assert!(matches!(
            required_samples(1e-9, 1, 0.5),
            Err(ScenarioError::Overflow(_))
        ));
    }

    #[test]
    fn violation_level_inverts_required_samples() {
        let eps = max_violation_level(197, 1, 1e-9).unwrap();
        // Exact boundary: (1−ε)^197 = 1e-9 ⇒ ε = 1 − (1e-9)^(1/197) ≈ 0.09985.
        let exact = 1.0 - 1e-9f64.powf(1.0 / 197.0);
        assert!((eps - exact).abs() < 1e-6, "got {eps}, exact {exact}");
        // Bisection boundary: the returned level is admissible, slightly
        // smaller levels are not.
        assert!(binomial_tail(197, eps, 1) <= 1e-9);
        assert!(binomial_tail(197, eps * 0.99, 1) > 1e-9);
    }

    #[test]
    fn violation_level_infeasible_when_tail_is_one() {
        assert!(matches!(
            max_violation_level(10, 20, 0.5),
            Err(ScenarioError::Infeasible(_))
        ));
    }

    #[test]
    fn tightening_margin_examples() {
        assert!((tightening_margin(0.5, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((tightening_margin(0.01, 1.0).unwrap() - 0.01 / 0.99).abs() < 1e-15);
        assert!(tightening_margin(1e-9, 1.0).unwrap() < 1e-8); // → 0 as eps → 0⁺
        assert!(tightening_margin(1.0, 1.0).is_err());
    }

    #[test]
    fn params_from_eps_beta_pick_minimal_n() {
        let p = ScenarioParams::from_eps_beta(0.1, 1e-9, 1, 1.0, None).unwrap();
        assert_eq!(p.n_samples, 197);
        assert!(p.beta <= 1e-9);
        assert!((p.delta - 0.1 / 0.9).abs() < 1e-12);
    }

    #[test]
    fn params_reject_insufficient_delta_override() {
        let err = ScenarioParams::from_eps_n(0.1, 100, 4, 1.0, Some(0.05));
        assert!(err.is_err());
        let ok = ScenarioParams::from_eps_n(0.1, 100, 4, 1.0, Some(0.2)).unwrap();
        assert!((ok.delta - 0.2).abs() < 1e-15);
    }

    #[test]
    fn params_from_n_beta_resolve_the_level() {
        let p = ScenarioParams::from_n_beta(197, 1e-9, 1, 1.0, None).unwrap();
        assert!(binomial_tail(197, p.eps, 1) <= 1e-9);
        assert!(p.beta <= 1e-9);
    }

    #[test]
    fn decision_count_formula() {
        assert_eq!(decision_count(7, 1), 16);
        assert_eq!(decision_count(126, 2), 380);
        assert_eq!(decision_count(33, 2), 101);
    }

    #[test]
    fn sample_curve_has_log_vs_linear_scaling() {
        let betas = [1e-3, 1e-9];
        let rows = sample_curve(0.1, 1, &betas, 1.0).unwrap();
        assert_eq!(rows[1].n_scenario, 197);
        let saa_ratio = rows[1].n_saa_reference as f64 / rows[0].n_saa_reference as f64;
        assert!((saa_ratio - 1e6).abs() < 1.0);
        let scen_ratio = rows[1].n_scenario as f64 / rows[0].n_scenario as f64;
        assert!(scen_ratio <= 3.5);
    }
}
