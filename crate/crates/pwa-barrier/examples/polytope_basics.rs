//! Polyhedra in H-representation: construction, set algebra, and the
//! preimage operation that underpins the one-step analysis.
//!
//! Run with `cargo run --example polytope_basics`.

use pwa_barrier::polytope::{preimage, AffineMap, Polyhedron, SupOutcome, DEFAULT_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A polyhedron is the set {x : Hx ≤ h}. Boxes and intervals have
    // shorthands; any finite list of half-spaces works.
    let square = Polyhedron::box_nd(&[-1.0, -1.0], &[1.0, 1.0])?;
    let halfplane = Polyhedron::new(vec![vec![1.0, 1.0]], vec![1.0])?; // x + y ≤ 1
    println!("square: {} rows in R^{}", square.num_rows(), square.dim());

    // Intersection just stacks rows; emptiness is decided exactly by LP.
    let corner = square.intersect(&halfplane)?;
    println!("square ∩ {{x+y ≤ 1}} empty? {}", corner.is_empty(DEFAULT_TOL)?);
    let far = Polyhedron::box_nd(&[5.0, 5.0], &[6.0, 6.0])?;
    println!("square ∩ far box empty? {}", square.intersect(&far)?.is_empty(DEFAULT_TOL)?);

    // Containment (P ⊆ Q) is one support LP per row of Q.
    let half_square = Polyhedron::box_nd(&[-0.5, -0.5], &[0.5, 0.5])?;
    println!("half square ⊆ square? {}", square.contains(&half_square, DEFAULT_TOL)?);
    println!("square ⊆ half square? {}", half_square.contains(&square, DEFAULT_TOL)?);

    // Support function: sup of a linear objective over the set. The outcome
    // distinguishes empty and unbounded sets from a finite optimum.
    match corner.maximize(&[1.0, 1.0])? {
        SupOutcome::Finite(v) => println!("sup x+y over the corner set = {v}"),
        other => println!("unexpected outcome: {other:?}"),
    }
    let strip = Polyhedron::new(vec![vec![0.0, 1.0], vec![0.0, -1.0]], vec![1.0, 1.0])?;
    println!("sup x over the strip |y| ≤ 1: {:?}", strip.maximize(&[1.0, 0.0])?);

    // Vertex enumeration for small, bounded sets (a test oracle, but public).
    let mut verts = corner.vertices()?;
    verts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("corner-set vertices: {verts:?}");

    // The preimage of a target set under one affine step x ↦ Ax + b + η:
    // {x ∈ source : Ax + b + η ∈ target}. This is the set of states that a
    // given noise realization η sends into the target — the basic object of
    // the sampled one-step analysis.
    let f = AffineMap::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]], vec![0.25, 0.0])?;
    let target = Polyhedron::box_nd(&[0.0, -0.25], &[0.5, 0.25])?;
    let eta = vec![0.05, -0.02];
    let pre = preimage(&square, &f, &eta, &target)?;
    println!(
        "preimage of the target under x ↦ 0.5x + (0.25, 0) + η: {} rows, empty? {}",
        pre.num_rows(),
        pre.is_empty(DEFAULT_TOL)?
    );
    // Check one point the hard way: x maps into the target iff it is in the
    // preimage.
    let x = vec![-0.3, 0.1];
    let mut image = f.apply(&x);
    for (y, e) in image.iter_mut().zip(&eta) {
        *y += e;
    }
    println!(
        "x = {x:?}: image in target = {}, x in preimage = {}",
        target.contains_point(&image, DEFAULT_TOL),
        pre.contains_point(&x, DEFAULT_TOL)
    );
    Ok(())
}
