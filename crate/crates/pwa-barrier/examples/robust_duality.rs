//! Robust constraints by strong LP duality.
//!
//! A robust constraint `aᵀx ≤ b for all x in P = {x : Hx ≤ h}` looks
//! semi-infinite — one inequality per point of P. Strong duality turns it
//! into finitely many linear conditions on a new variable λ:
//!
//! ```text
//! sup { aᵀx : Hx ≤ h } ≤ b   ⟺   ∃ λ ≥ 0 :  Hᵀλ = a,  hᵀλ ≤ b
//! ```
//!
//! whenever P is nonempty. This example verifies the equivalence numerically
//! on a concrete polytope: the minimal hᵀλ over the dual-feasible set equals
//! the primal supremum, and any feasible λ certifies the bound.
//!
//! Run with `cargo run --example robust_duality`.

use pwa_barrier::lp::{LpModel, LpStatus, Relation};
use pwa_barrier::polytope::{Polyhedron, SupOutcome};

/// Minimizes hᵀλ subject to λ ≥ 0, Hᵀλ = a — the dual of sup aᵀx over P.
fn dual_bound(p: &Polyhedron, a: &[f64]) -> Option<(f64, Vec<f64>)> {
    let mut model = LpModel::new();
    let lambdas: Vec<_> = (0..p.num_rows()).map(|_| model.add_var(0.0, f64::INFINITY)).collect();
    for (lam, &hi) in lambdas.iter().zip(p.h_vec()) {
        model.set_cost(*lam, hi);
    }
    // One equality per coordinate: the rows of H, weighted by λ, must
    // reproduce the objective direction a.
    for k in 0..p.dim() {
        let coeffs: Vec<_> = lambdas
            .iter()
            .zip(p.h_mat())
            .map(|(lam, row)| (*lam, row[k]))
            .collect();
        model.add_constraint(coeffs, Relation::Eq, a[k]).unwrap();
    }
    let sol = model.solve(1e-9);
    if sol.status != LpStatus::Optimal {
        return None;
    }
    let values = sol.values.unwrap();
    Some((sol.objective.unwrap(), values))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A pentagon-ish polytope in the plane.
    let p = Polyhedron::new(
        vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
            vec![1.0, 1.0],
        ],
        vec![2.0, 2.0, 1.0, 1.0, 2.5],
    )?;

    for a in [[1.0, 1.0], [1.0, -0.5], [-2.0, 0.25], [0.0, 1.0]] {
        let primal = match p.maximize(&a)? {
            SupOutcome::Finite(v) => v,
            other => panic!("expected a finite supremum, got {other:?}"),
        };
        let (dual, lambda) = dual_bound(&p, &a).expect("dual must be solvable");
        println!(
            "a = ({:+.2}, {:+.2})   sup aᵀx = {primal:+.6}   min hᵀλ = {dual:+.6}   gap = {:.1e}",
            a[0],
            a[1],
            (primal - dual).abs()
        );
        assert!((primal - dual).abs() < 1e-7, "strong duality should be exact");

        // Any dual-feasible λ is a certificate: hᵀλ bounds aᵀx for every
        // x ∈ P. Spot-check on the polytope's vertices.
        let bound: f64 = lambda.iter().zip(p.h_vec()).map(|(l, h)| l * h).sum();
        for v in p.vertices()? {
            let val: f64 = v.iter().zip(&a).map(|(x, c)| x * c).sum();
            assert!(val <= bound + 1e-7, "certificate violated at vertex {v:?}");
        }
    }
    println!("strong duality held on every tested direction, certificates check out");

    // The equivalence is direction-agnostic: it holds for any finite list of
    // half-spaces describing P, including redundant ones, which is what lets
    // the synthesizer dualize machine-generated representations wholesale.
    let redundant = p.intersect(&Polyhedron::box_nd(&[-9.0, -9.0], &[9.0, 9.0])?)?;
    let a = [1.0, 1.0];
    let primal = match redundant.maximize(&a)? {
        SupOutcome::Finite(v) => v,
        other => panic!("unexpected {other:?}"),
    };
    let (dual, _) = dual_bound(&redundant, &a).unwrap();
    println!("with redundant rows: sup = {primal:+.6}, dual = {dual:+.6}");
    assert!((primal - dual).abs() < 1e-7);
    Ok(())
}
