//! End-to-end synthesis on a 1D random walk.
//!
//! The system is `x(k+1) = x(k) + η(k)` on [−3.5, 3.5]: pure noise
//! accumulation with no drift. Starting near the origin, the walk must stay
//! inside |x| ≤ 2.5 for T = 10 steps. The pipeline:
//!
//! 1. describe the dynamics, the initial/safe/unsafe sets, and a partition,
//! 2. draw i.i.d. noise samples and resolve the scenario parameters,
//! 3. build and solve the scenario LP,
//! 4. verify the certificate independently and read off the safety bound.
//!
//! Run with `cargo run --example synthesize_martingale`.

use pwa_barrier::certificate::{eval_barrier, fingerprint, verify_certificate, Certificate};
use pwa_barrier::polytope::{AffineMap, Polyhedron};
use pwa_barrier::scenario::{decision_count, ScenarioParams};
use pwa_barrier::sim::{GaussianSpec, NoiseDataset};
use pwa_barrier::synth::{build_lbp, solve_lbp, BuildOptions};
use pwa_barrier::system::{build_partition, PwaSystem, UnsafeDescription};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // 1. The system: one region, identity dynamics, additive noise.
    let sys = PwaSystem::new(
        vec![Polyhedron::interval(-3.5, 3.5)?],
        vec![AffineMap::identity(1)],
        Polyhedron::interval(-0.5, 0.5)?, // X0
        Polyhedron::interval(-2.5, 2.5)?, // Xs
        10,                               // T
    )?;
    let unsafe_desc = UnsafeDescription::new(
        vec![Polyhedron::interval(-3.5, -2.5)?, Polyhedron::interval(2.5, 3.5)?],
        sys.safe_set(),
    )?;
    // Seven unit-width pieces across the domain.
    let bp = build_partition(
        &sys,
        &unsafe_desc,
        &[vec![-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5]],
    )?;
    println!("partition: {} pieces, d = {}", bp.len(), decision_count(bp.len(), sys.dim()));

    // 2. Noise samples and scenario parameters. ε = 0.02 with a 1e-9
    // confidence target — the aviation-grade gold standard — costs only a
    // few thousand samples because N grows logarithmically in 1/β.
    let params =
        ScenarioParams::from_eps_beta(0.02, 1e-9, decision_count(bp.len(), sys.dim()), 1.0, None)?;
    println!(
        "scenario: N = {}, beta = {:.3e}, delta = {:.4}",
        params.n_samples, params.beta, params.delta
    );
    let spec = GaussianSpec::new(vec![0.01])?;
    let data = NoiseDataset::gaussian(&spec, params.n_samples as usize, 7)?;

    // 3. One LP: piece-wise affine barrier coefficients plus (γ, c),
    // robust constraints dualized, one supermartingale block per sample.
    let problem = build_lbp(&sys, &bp, &unsafe_desc, &data, &params, &BuildOptions::default())?;
    let counts = problem.counts();
    println!(
        "lp: {} vars, {} rows ({} of {} one-step blocks provably empty and pruned)",
        counts.num_vars,
        counts.num_rows,
        counts.martingale_pairs_pruned,
        counts.martingale_pairs_total
    );
    let result = solve_lbp(&problem, 1e-8)?;
    println!(
        "optimum: gamma = {:.6}, c = {:.6}, objective = {:.6}",
        result.gamma, result.c, result.objective
    );

    // 4. Certificate + independent verification (fresh support LPs per
    // constraint family — nothing is reused from the build).
    let fp = fingerprint(&sys, &bp, &unsafe_desc, &data);
    let cert = Certificate::new(&result, &params, sys.horizon(), fp)?;
    let report = verify_certificate(&cert, &sys, &bp, &unsafe_desc, &data, 1e-6)?;
    assert!(report.passed, "verification failed: {report:?}");
    println!("verification: passed, max violation {:.2e}", report.max_violation);
    println!(
        "safety: P(stay in |x| ≤ 2.5 for 10 steps from X0) ≥ {:.4} with confidence ≥ {:.9}",
        cert.safety_lower_bound,
        1.0 - cert.params.beta
    );

    // The barrier itself is a max of affine pieces — small near the start
    // set, at least 1 on the unsafe strips.
    println!("\n  x      B(x)");
    for i in 0..=14 {
        let x = -3.5 + 0.5 * i as f64;
        println!("{x:>5.1}   {:.4}", eval_barrier(&cert.theta, &bp, &[x]));
    }
    Ok(())
}
