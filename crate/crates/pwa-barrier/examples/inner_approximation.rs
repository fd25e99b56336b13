//! Why the tightening margin makes sampled constraints imply expectation
//! bounds.
//!
//! The scenario LP enforces, per noise sample, the tightened one-step
//! condition `B(next state) + δ ≤ B(x) + c`. The scenario guarantee then
//! says: with confidence 1 − β, at most an ε-fraction of noise outcomes
//! violate the tightened condition. For a barrier bounded in [0, M], choosing
//!
//! ```text
//! δ ≥ ε·M / (1 − ε)
//! ```
//!
//! converts that chance constraint into the expectation bound
//! `E[B(next)] ≤ B(x) + c`: the well-behaved (1−ε) mass sits below the
//! level minus δ, and the violating ε mass can contribute at most εM, which
//! the margin absorbs. This example checks the implication on randomized
//! discrete distributions, including levels placed exactly at the quantile
//! where there is no slack to spare.
//!
//! Run with `cargo run --example inner_approximation`.

use pwa_barrier::certificate::inner_approx_oracle;
use pwa_barrier::scenario::tightening_margin;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A hand-computable two-point case first: g takes value 0.25 with
    // probability 0.8 and value 1.0 with probability 0.2, M = 1, ε = 0.2,
    // so δ = 0.2/0.8 = 0.25.
    let eps = 0.2;
    let m = 1.0;
    let delta = tightening_margin(eps, m)?;
    println!("two-point case: delta = {delta}");
    let (lo, hi) = (0.25, 1.0);
    let (p_lo, p_hi) = (0.8, 0.2);
    let h = lo + delta; // P{g + δ ≤ h} = P{g = lo} = 0.8 = 1 − ε exactly
    let expectation = p_lo * lo + p_hi * hi;
    println!(
        "P{{g + δ ≤ {h}}} = {p_lo} ≥ {}; E[g] = {expectation} ≤ h = {h}",
        1.0 - eps
    );
    assert!(expectation <= h + 1e-12);

    // The margin cannot be dispensed with. Put the well-behaved mass at 0
    // instead and use a margin below εM: the premise holds at h = δ′, yet
    // the stray ε mass at M alone already pushes the expectation above h.
    let small = 0.15; // < εM = 0.2
    let h_small = small; // good mass at g = 0 ⇒ P{g + δ′ ≤ h} = 0.8 = 1 − ε
    let e_small = p_lo * 0.0 + p_hi * m;
    println!(
        "with margin {small} < εM: premise holds at h = {h_small}, but E[g] = \
         {e_small} > {h_small}"
    );
    assert!(e_small > h_small);

    // Now hammer it: hundreds of randomized distributions (random support,
    // weights, M, ε), with the level h placed at or just above the exact
    // (1−ε)-quantile of g + δ. Premise-holding cases must never violate the
    // expectation bound.
    let report = inner_approx_oracle(500, 42);
    println!(
        "\nrandomized check: {} cases, premise held in {}, counterexamples: {}, \
         worst E[g] − h = {:.3e}",
        report.cases, report.premise_held, report.counterexamples, report.worst_margin
    );
    assert_eq!(report.counterexamples, 0);
    assert!(report.worst_margin <= 1e-12);
    println!("the inner approximation held on every premise-satisfying case");
    Ok(())
}
