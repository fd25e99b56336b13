//! Scenario-based synthesis of piece-wise affine (PWA) stochastic barrier
//! certificates for discrete-time stochastic systems with PWA dynamics.
//!
//! Given a PWA system `x⁺ = A_r x + b_r + η` (region-indexed affine maps plus
//! additive noise), a partition of the safe set into polyhedral pieces, and a
//! finite batch of i.i.d. noise samples, this crate builds one linear program
//! whose solution is a PWA barrier function `B(x) = max_i (u_iᵀx + v_i)` and a
//! pair `(γ, c)` certifying the finite-horizon safety bound
//!
//! ```text
//! P( x_k ∈ X_s for all k ≤ T | x_0 ∈ X_0 ) ≥ 1 − (γ + c·T)
//! ```
//!
//! with confidence `1 − β` against the sampled noise, where `β` is an exact
//! binomial tail controlled by the scenario approach.
//!
//! # Modules
//!
//! - [`polytope`] — convex polyhedra in H-representation and affine-map
//!   algebra (intersection, preimage, emptiness, containment, vertices).
//! - [`system`] — PWA dynamics, safe-set partitions, piece classification.
//! - [`scenario`] — sample-complexity bounds: exact binomial tails, required
//!   sample counts, admissible violation levels, LP tightening margins.
//! - [`lp`] — a thin deterministic interface to the bundled HiGHS solver,
//!   with solution auditing and LP-file export.
//! - [`synth`] — robust-constraint dualization and the scenario LP itself:
//!   build, solve, prune, and verify synthesized barriers.
//! - [`certificate`] — serializable safety certificates, the probabilistic
//!   bound, and certificate verification against the generating data.
//! - [`sim`] — noise generation and Monte Carlo validation of certified
//!   bounds on the closed-loop system.
//! - [`cli`] — configuration files, benchmark presets, and the runners
//!   behind the `pwa-barrier` binary.

pub mod certificate;
pub mod cli;
pub mod lp;
pub mod polytope;
pub mod scenario;
pub mod sim;
pub mod synth;
pub mod system;
