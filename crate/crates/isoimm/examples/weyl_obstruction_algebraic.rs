//! Pointwise Weyl obstruction: a curvature tensor of the form
//! R = Pi ^ Pi solves the Gauss equation exactly, but perturbing it with a
//! Weyl-type tensor makes ln(R) pick up a nonzero Weyl part, and no second
//! fundamental form exists. Everything here is algebra at a single point.

use isoimm::obstruction::{recover_pi_at, Tolerances};
use isoimm::operator::{pi_wedge_pi, random_weyl_tensor};
use nalgebra::DMatrix;

fn main() {
    let n = 4;
    let g = DMatrix::identity(n, n);
    let pi = DMatrix::from_row_slice(
        n,
        n,
        &[
            1.3, 0.2, 0.0, 0.1, //
            0.2, 1.0, 0.1, 0.0, //
            0.0, 0.1, 1.7, 0.0, //
            0.1, 0.0, 0.0, 0.8,
        ],
    );
    let clean = pi_wedge_pi(&pi);
    let w = random_weyl_tensor(n, 7);

    let tol = Tolerances::default();
    for eps in [0.0, 1e-4, 1e-2, 0.1] {
        let r: Vec<f64> = clean.iter().zip(&w).map(|(c, wv)| c + eps * wv).collect();
        match recover_pi_at(&r, &g, &tol) {
            Ok(rec) => {
                let err = (&rec.pi - &pi).norm();
                println!(
                    "eps = {eps:7.0e}   weyl* = {:9.3e}   |Pi_rec - Pi| = {err:9.3e}",
                    rec.weyl_rel
                );
            }
            Err(e) => println!("eps = {eps:7.0e}   {e}"),
        }
    }
    println!("(weyl* above the {:.0e} tolerance rules out any solution)", tol.weyl);
}
