//! Monte Carlo cross-check of a synthesized certificate.
//!
//! A certificate asserts `P(unsafe within T) ≤ γ + cT` from every start in
//! X0 — with confidence 1 − β over the data draw. Here the noise generator
//! is known, so the claim can be attacked directly: simulate many
//! trajectories from a grid of starts across X0 and compare the worst
//! empirical unsafe fraction against the certified level plus a three-sigma
//! statistical margin.
//!
//! Run with `cargo run --example simulate_and_check`.

use pwa_barrier::certificate::{fingerprint, verify_certificate, Certificate};
use pwa_barrier::polytope::{AffineMap, Polyhedron, DEFAULT_TOL};
use pwa_barrier::scenario::{decision_count, ScenarioParams};
use pwa_barrier::sim::{simulate, GaussianSpec, NoiseDataset, NoiseSource, StartStrategy};
use pwa_barrier::synth::{build_lbp, solve_lbp, BuildOptions};
use pwa_barrier::system::{build_partition, PwaSystem, UnsafeDescription};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The 1D random-walk setup (see `synthesize_martingale` for a walk
    // through these pieces).
    let sys = PwaSystem::new(
        vec![Polyhedron::interval(-3.5, 3.5)?],
        vec![AffineMap::identity(1)],
        Polyhedron::interval(-0.5, 0.5)?,
        Polyhedron::interval(-2.5, 2.5)?,
        10,
    )?;
    let unsafe_desc = UnsafeDescription::new(
        vec![Polyhedron::interval(-3.5, -2.5)?, Polyhedron::interval(2.5, 3.5)?],
        sys.safe_set(),
    )?;
    let bp = build_partition(
        &sys,
        &unsafe_desc,
        &[vec![-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5]],
    )?;
    let params =
        ScenarioParams::from_eps_beta(0.02, 1e-9, decision_count(bp.len(), sys.dim()), 1.0, None)?;
    let spec = GaussianSpec::new(vec![0.01])?;
    let data = NoiseDataset::gaussian(&spec, params.n_samples as usize, 11)?;

    let problem = build_lbp(&sys, &bp, &unsafe_desc, &data, &params, &BuildOptions::default())?;
    let result = solve_lbp(&problem, 1e-8)?;
    let cert = Certificate::new(
        &result,
        &params,
        sys.horizon(),
        fingerprint(&sys, &bp, &unsafe_desc, &data),
    )?;
    let report = verify_certificate(&cert, &sys, &bp, &unsafe_desc, &data, 1e-6)?;
    assert!(report.passed);
    let certified_unsafe = cert.gamma + cert.c * cert.horizon as f64;
    println!(
        "certificate: gamma = {:.5}, c = {:.5} → P(unsafe) ≤ {:.4} from any x0 ∈ X0",
        cert.gamma, cert.c, certified_unsafe
    );

    // Attack it: 100k trajectories spread over an 11-point grid across X0,
    // noise drawn fresh from the true generator. The certificate must hold
    // from *every* start, so judge it by the worst start, not the average.
    let trials = 100_000;
    let batch = simulate(
        &sys,
        &unsafe_desc,
        &NoiseSource::Gaussian(spec),
        &StartStrategy::Grid(vec![11]),
        trials,
        sys.horizon(),
        1234,
        DEFAULT_TOL,
    )?;
    println!("\nstart      unsafe fraction");
    for (s, (safe, total)) in batch.per_start_counts().iter().enumerate() {
        println!(
            "{:>6.2}     {:.5}",
            batch.start(s)[0],
            1.0 - *safe as f64 / *total as f64
        );
    }
    let worst = 1.0 - batch.min_start_safety();
    // Three-sigma allowance for Monte Carlo error at this trial count.
    let margin = 3.0 * (worst * (1.0 - worst) / trials as f64).sqrt();
    println!(
        "\nworst start: empirical unsafe = {worst:.5}, certified ≤ {certified_unsafe:.5} \
         (+ {margin:.5} stat margin)"
    );
    assert!(
        worst <= certified_unsafe + margin,
        "simulation contradicts the certificate"
    );
    println!("empirical behaviour is consistent with the certified bound");
    Ok(())
}
