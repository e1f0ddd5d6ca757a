//! Discrete fundamental forms against analytic surfaces under refinement.

mod common;

use common::{
    cylinder, exact_forms, form_errors, sphere, Surface, DDG_PITCHES, SURFACE_RADIUS as R,
};
use nalgebra::{Matrix2, Vector2};

fn assert_refines(name: &str, s: Surface, side: f64) {
    let errs: Vec<(f64, f64)> = DDG_PITCHES
        .iter()
        .map(|&h| form_errors(s, side, h))
        .collect();
    for (w, hs) in errs.windows(2).zip(DDG_PITCHES.windows(2)) {
        let ((a1, a2), (b1, b2)) = (w[0], w[1]);
        // the first form is exact on a cylinder up to roundoff
        assert!(
            b1 < a1 || b1 < 1e-12,
            "{name} I: h={} {a1:e} -> h={} {b1:e}",
            hs[0],
            hs[1]
        );
        assert!(
            b2 < a2,
            "{name} II: h={} {a2:e} -> h={} {b2:e}",
            hs[0],
            hs[1]
        );
    }
    let (last1, last2) = errs[errs.len() - 1];
    assert!(
        last1 < 1e-2 && last2 < 1e-2,
        "{name} final errors {last1:e} {last2:e}"
    );
}

#[test]
fn cylinder_forms_converge() {
    assert_refines("cylinder", cylinder, 16.0);
}

#[test]
fn sphere_forms_converge() {
    assert_refines("sphere", sphere, 8.0);
}

#[test]
fn cylinder_curvature_sign_and_magnitude() {
    let (first, second) = exact_forms(cylinder, Vector2::new(0.3, 0.0));
    // nested central differences leave ~1e-6 of noise in II
    assert!((first - Matrix2::identity()).norm() < 1e-8);
    // normal turns toward the axis: ∂_u n · ∂_u X = −1/R
    assert!((second[(0, 0)] + 1.0 / R).abs() < 1e-5);
    assert!(second[(1, 1)].abs() < 1e-5);
}
