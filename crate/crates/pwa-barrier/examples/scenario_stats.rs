//! Sample-complexity arithmetic of the scenario approach.
//!
//! The confidence of a scenario LP with `d` decision variables, `N` samples,
//! and violation level `ε` is `1 − β` where `β` is an exact binomial tail.
//! This example shows the three resolution modes (pick any two of ε, β, N),
//! the logarithmic growth of N in 1/β, and the constraint-tightening margin
//! δ that converts the sampled constraints into an expectation bound.
//!
//! Run with `cargo run --example scenario_stats`.

use pwa_barrier::scenario::{
    binomial_tail, decision_count, max_violation_level, required_samples, sample_curve,
    tightening_margin, ScenarioParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A 7-piece barrier in one dimension has d = 7·(1+1) + 2 = 16 decision
    // variables (γ, c, and a slope/intercept pair per piece).
    let d = decision_count(7, 1);
    println!("decision variables for 7 pieces in 1D: d = {d}");

    // Mode 1: choose ε and a confidence target; the smallest adequate N is
    // found by search on the monotone tail.
    let p = ScenarioParams::from_eps_beta(0.05, 1e-9, d, 1.0, None)?;
    println!(
        "eps = {} and beta_target = 1e-9 resolve to N = {}, actual beta = {:.3e}",
        p.eps, p.n_samples, p.beta
    );
    assert!(p.beta <= 1e-9);
    assert!(binomial_tail(p.n_samples - 1, p.eps, d) > 1e-9, "N is minimal");

    // Mode 2: a fixed sample budget with a chosen ε — β is whatever it is.
    let p2 = ScenarioParams::from_eps_n(0.05, 500, d, 1.0, None)?;
    println!("eps = 0.05 with N = 500 gives beta = {:.3e}", p2.beta);

    // Mode 3: a fixed budget and a confidence target — the largest feasible
    // violation level is found by bisection.
    let eps = max_violation_level(2000, d, 1e-6)?;
    let p3 = ScenarioParams::from_n_beta(2000, 1e-6, d, 1.0, None)?;
    println!("N = 2000 at beta_target = 1e-6 admits eps = {:.4} (resolved {:.4})", eps, p3.eps);

    // N grows like ln(1/β): nine extra orders of confidence cost well under
    // 4x the data. Methods whose N scales like 1/β would need a billion
    // times more.
    println!("\n    beta     N(scenario)   N(1/beta reference)");
    for row in sample_curve(0.05, d, &[1e-3, 1e-6, 1e-9, 1e-12], 1.0)? {
        println!(
            "  {:>7.0e}   {:>10}   {:>18}",
            row.beta, row.n_scenario, row.n_saa_reference
        );
    }
    let n3 = required_samples(0.05, d, 1e-3)?;
    let n9 = required_samples(0.05, d, 1e-9)?;
    println!("N(1e-9)/N(1e-3) = {:.2}", n9 as f64 / n3 as f64);

    // The margin δ = εM/(1−ε) tightens every sampled constraint so that an
    // ε-fraction of violated noise outcomes cannot push the expectation of a
    // [0, M]-bounded function above its certified level.
    for (eps, m) in [(0.05, 1.0), (0.05, 2.0), (0.2, 1.0)] {
        println!("delta(eps = {eps}, M = {m}) = {:.6}", tightening_margin(eps, m)?);
    }
    Ok(())
}
