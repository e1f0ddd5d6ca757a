//! Bilayer material model.
//!
//! Two bonded layers with Lamé constant `mu`, thickness `t` and an in-plane
//! linear strain tensor produce, per face, a target first form `A`, a target
//! second form `B` and the two energy weights. Layer 1 in [`target_forms`]
//! is the layer on the −n side of the mid-surface; [`BilayerSpec`] wires the
//! bottom layer into that slot so a layer that shrinks more pulls the
//! bilayer toward itself.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strain calibration intercept (dimensionless), bottom layer at 300 mm/min.
pub const SPEED_INTERCEPT: f64 = 3.593e-2;
/// Strain calibration slope (min/mm).
pub const SPEED_SLOPE: f64 = 1.013e-4;
/// Bottom-layer printing speed the calibration was measured at (mm/min).
pub const BOTTOM_SPEED: f64 = 300.0;
/// Granularity of the printer speed settings used with the calibration (mm/min).
pub const SPEED_STEP: f64 = 50.0;

/// Mechanical properties of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub mu: f64,
    /// mm
    pub thickness: f64,
}

impl Layer {
    pub fn new(mu: f64, thickness: f64) -> Result<Self> {
        let layer = Self { mu, thickness };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "thickness must be positive, got {}",
                self.thickness
            )));
        }
        Ok(())
    }
}

impl Default for Layer {
    fn default() -> Self {
        Self {
            mu: 1.0,
            thickness: 0.5,
        }
    }
}

/// A layer together with its per-face strain field.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub layer: Layer,
    pub strain: Vec<Matrix2<f64>>,
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        self.layer.validate()?;
        for (f, e) in self.strain.iter().enumerate() {
            if (e[(0, 1)] - e[(1, 0)]).abs() > 1e-12 * (1.0 + e.norm()) {
                return Err(Error::InvalidConfig(format!(
                    "strain on face {f} is not symmetric"
                )));
            }
        }
        Ok(())
    }
}

/// Uniaxial strain `eps · d dᵀ` along a unit direction.
pub fn uniaxial(eps: f64, direction: Vector2<f64>) -> Matrix2<f64> {
    direction * direction.transpose() * eps
}

/// Per-face energy targets in the parametric frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetForms {
    pub a: Matrix2<f64>,
    pub b: Matrix2<f64>,
    pub w_first: f64,
    pub w_second: f64,
}

/// Targets carried into the diagonal `(k, l)` frame of one face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTargets {
    pub a_bar: Matrix2<f64>,
    pub b_bar: Matrix2<f64>,
}

/// Stretching weight `(μ₁t₁ + μ₂t₂)/4`.
pub fn first_weight(l1: &Layer, l2: &Layer) -> f64 {
    (l1.mu * l1.thickness + l2.mu * l2.thickness) / 4.0
}

fn bending_stiffness(l1: &Layer, l2: &Layer) -> f64 {
    let (t1, t2) = (l1.thickness, l2.thickness);
    l1.mu * t1 * (3.0 * t2 * t2 + t1 * t1) + l2.mu * t2 * (3.0 * t1 * t1 + t2 * t2)
}

/// Bending weight `[μ₁t₁(3t₂² + t₁²) + μ₂t₂(3t₁² + t₂²)]/12`.
pub fn second_weight(l1: &Layer, l2: &Layer) -> f64 {
    bending_stiffness(l1, l2) / 12.0
}

/// Finite-strain targets for one face; `eps1` belongs to `l1`, `eps2` to `l2`.
pub fn face_target_forms(
    l1: &Layer,
    eps1: &Matrix2<f64>,
    l2: &Layer,
    eps2: &Matrix2<f64>,
) -> TargetForms {
    let id = Matrix2::identity();
    let (m1, m2) = (l1.mu * l1.thickness, l2.mu * l2.thickness);
    let g1 = (id + eps1) * (id + eps1);
    let g2 = (id + eps2) * (id + eps2);
    let a = (g1 * m1 + g2 * m2) / (m1 + m2);
    // μ ε² + 2 μ ε
    let drive = |layer: &Layer, e: &Matrix2<f64>| (e * e + e * 2.0) * layer.mu;
    let b = (drive(l2, eps2) - drive(l1, eps1)) * (3.0 * l1.thickness * l2.thickness)
        / bending_stiffness(l1, l2);
    TargetForms {
        a,
        b,
        w_first: first_weight(l1, l2),
        w_second: second_weight(l1, l2),
    }
}

/// Finite-strain targets for every face.
pub fn target_forms(layer1: &LayerSpec, layer2: &LayerSpec) -> Result<Vec<TargetForms>> {
    layer1.validate()?;
    layer2.validate()?;
    if layer1.strain.len() != layer2.strain.len() {
        return Err(Error::InvalidConfig(format!(
            "layer strain fields differ in length: {} vs {}",
            layer1.strain.len(),
            layer2.strain.len()
        )));
    }
    Ok(layer1
        .strain
        .iter()
        .zip(&layer2.strain)
        .map(|(e1, e2)| face_target_forms(&layer1.layer, e1, &layer2.layer, e2))
        .collect())
}

/// Two layers, named by side: `top` sits on the +z side of an initially flat
/// counterclockwise mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BilayerSpec {
    pub top: LayerSpec,
    pub bottom: LayerSpec,
}

impl BilayerSpec {
    pub fn targets(&self) -> Result<Vec<TargetForms>> {
        target_forms(&self.bottom, &self.top)
    }
}

/// Small-strain pure-bending targets: `A = I`, `B = 3Δε/(2t) · d dᵀ`,
/// `w_first = μt/4`, `w_second = μt³/4`.
///
/// `delta_eps` is the top-layer strain minus the bottom-layer strain.
pub fn pure_bending_targets(
    delta_eps: f64,
    thickness: f64,
    mu: f64,
    direction: Vector2<f64>,
) -> Result<TargetForms> {
    if !(thickness > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "thickness must be positive, got {thickness}"
        )));
    }
    let kappa = 3.0 * delta_eps / (2.0 * thickness);
    Ok(TargetForms {
        a: Matrix2::identity(),
        b: uniaxial(kappa, direction),
        w_first: mu * thickness / 4.0,
        w_second: mu * thickness.powi(3) / 4.0,
    })
}

/// Small-strain bending radius `2t/(3Δε)`.
pub fn timoshenko_radius(delta_eps: f64, thickness: f64) -> f64 {
    2.0 * thickness / (3.0 * delta_eps.abs())
}

/// Strain-difference magnitude produced by a top-layer printing speed (mm/min)
/// with the bottom layer at [`BOTTOM_SPEED`].
pub fn strain_from_speed(v_top: f64) -> Result<f64> {
    if !(v_top > 0.0) {
        return Err(Error::NegativeSpeed(v_top));
    }
    Ok((SPEED_INTERCEPT - SPEED_SLOPE * v_top).abs())
}

/// Top-layer speed at which the top layer shrinks `delta_eps` more than the
/// bottom one.
pub fn speed_for_strain(delta_eps: f64) -> f64 {
    (delta_eps.abs() + SPEED_INTERCEPT) / SPEED_SLOPE
}

/// [`speed_for_strain`] rounded to the nearest printer setting.
pub fn nominal_speed_for_strain(delta_eps: f64) -> f64 {
    (speed_for_strain(delta_eps) / SPEED_STEP).round() * SPEED_STEP
}

/// Carries `A` and `B` into a face's `(k, l)` frame: `Jᵀ A J`, `Jᵀ B J`.
pub fn face_targets(a: &Matrix2<f64>, b: &Matrix2<f64>, j: &Matrix2<f64>) -> FrameTargets {
    FrameTargets {
        a_bar: j.transpose() * a * j,
        b_bar: j.transpose() * b * j,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(layer: Layer, eps: Matrix2<f64>) -> LayerSpec {
        LayerSpec {
            layer,
            strain: vec![eps],
        }
    }

    #[test]
    fn zero_strain_identity() {
        let l = Layer::new(2.0, 0.5).unwrap();
        let tf = face_target_forms(&l, &Matrix2::zeros(), &l, &Matrix2::zeros());
        assert_relative_eq!(tf.a, Matrix2::identity(), epsilon = 1e-15);
        assert_eq!(tf.b, Matrix2::zeros());
        // t = 1, mu = 2
        assert_relative_eq!(tf.w_first, 2.0 * 1.0 / 4.0);
        assert_relative_eq!(tf.w_second, 2.0 * 1.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn small_strain_limit_of_bending_target() {
        // B_finite - 3Δε/(2t) ddᵀ shrinks quadratically
        let l = Layer::new(1.0, 0.5).unwrap();
        let d = Vector2::new(0.6, 0.8);
        let mut errs = Vec::new();
        for de in [1e-2, 1e-3, 1e-4] {
            let tf = face_target_forms(&l, &uniaxial(0.0, d), &l, &uniaxial(de, d));
            let lin = uniaxial(3.0 * de / 2.0, d);
            errs.push((tf.b - lin).norm());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 100.0).abs() < 1.0, "ratio {ratio}");
        }
        // relative to Δε itself the error drops 10x per decade
        let rel: Vec<f64> = errs
            .iter()
            .zip([1e-2, 1e-3, 1e-4])
            .map(|(e, d)| e / d)
            .collect();
        assert!((rel[0] / rel[1] - 10.0).abs() < 0.1);
    }

    #[test]
    fn swapping_layers_negates_b() {
        let l = Layer::new(1.0, 0.5).unwrap();
        let d = Vector2::x();
        let (e1, e2) = (uniaxial(0.2, d), uniaxial(0.3, d));
        let a = face_target_forms(&l, &e1, &l, &e2);
        let b = face_target_forms(&l, &e2, &l, &e1);
        assert_relative_eq!(a.a, b.a, epsilon = 1e-15);
        assert_relative_eq!(a.b, -b.b, epsilon = 1e-15);
    }

    #[test]
    fn table3_column_targets() {
        // equal layers t = 0.5, strains 0 / 0.1 along x
        let l = Layer::new(1.0, 0.5).unwrap();
        let bl = BilayerSpec {
            top: spec(l, uniaxial(0.0, Vector2::x())),
            bottom: spec(l, uniaxial(0.1, Vector2::x())),
        };
        let tf = bl.targets().unwrap()[0];
        // A11 = (1 + 1.21)/2, B11 = 3 t1 t2 (0 - 0.21) / 1
        assert_relative_eq!(tf.a[(0, 0)], 1.105, epsilon = 1e-14);
        assert_relative_eq!(tf.a[(1, 1)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(tf.b[(0, 0)], -0.1575, epsilon = 1e-14);
    }

    #[test]
    fn pure_bending_values() {
        let tf = pure_bending_targets(0.01, 1.0, 1.0, Vector2::x()).unwrap();
        assert_relative_eq!(tf.b, Matrix2::new(0.015, 0.0, 0.0, 0.0), epsilon = 1e-15);
        assert_eq!(tf.a, Matrix2::identity());
        assert_relative_eq!(tf.w_first, 0.25);
        assert_relative_eq!(tf.w_second, 0.25);
        assert_relative_eq!(timoshenko_radius(0.01, 1.0), 66.666_666_666, epsilon = 1e-6);

        let tf = pure_bending_targets(0.05, 1.0, 1.0, Vector2::x()).unwrap();
        assert_relative_eq!(tf.b[(0, 0)], 0.075, epsilon = 1e-15);
        assert!((timoshenko_radius(0.05, 1.0) - 13.33).abs() < 0.01);

        let tf = pure_bending_targets(0.0, 1.0, 1.0, Vector2::x()).unwrap();
        assert_eq!(tf.b, Matrix2::zeros());
        assert!(pure_bending_targets(0.01, 0.0, 1.0, Vector2::x()).is_err());
    }

    #[test]
    fn print_speed_calibration() {
        assert!((strain_from_speed(950.0).unwrap() - 0.0603).abs() < 1e-4);
        assert!((strain_from_speed(650.0).unwrap() - 0.0299).abs() < 1e-4);
        assert!((strain_from_speed(1550.0).unwrap() - 0.1211).abs() < 1e-4);
        assert!(matches!(
            strain_from_speed(0.0),
            Err(Error::NegativeSpeed(_))
        ));
        assert!(matches!(
            strain_from_speed(-5.0),
            Err(Error::NegativeSpeed(_))
        ));
        for de in [0.03, 0.06, 0.09, 0.12] {
            assert_relative_eq!(
                strain_from_speed(speed_for_strain(de)).unwrap(),
                de,
                epsilon = 1e-12
            );
        }
        assert!((speed_for_strain(0.12) - 1550.0).abs() < 15.0);
        for (de, v) in [(0.03, 650.0), (0.06, 950.0), (0.09, 1250.0), (0.12, 1550.0)] {
            assert_eq!(nominal_speed_for_strain(de), v);
        }
    }

    #[test]
    fn frame_targets() {
        let rot = Matrix2::new(0.6, -0.8, 0.8, 0.6);
        let ft = face_targets(&Matrix2::identity(), &Matrix2::zeros(), &rot);
        assert_relative_eq!(ft.a_bar, Matrix2::identity(), epsilon = 1e-15);
        let b = Matrix2::new(0.3, 0.0, 0.0, 0.0);
        let ft = face_targets(&Matrix2::identity(), &b, &(Matrix2::identity() * 2.0));
        assert_relative_eq!(ft.b_bar, Matrix2::new(1.2, 0.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn frame_targets_match_explicit_sums() {
        let a = Matrix2::new(1.3, 0.2, 0.2, 0.7);
        let j = Matrix2::new(0.9, -0.4, 0.3, 1.1);
        let ft = face_targets(&a, &a, &j);
        for r in 0..2 {
            for c in 0..2 {
                let mut acc = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        acc += j[(p, r)] * a[(p, q)] * j[(q, c)];
                    }
                }
                assert!((ft.a_bar[(r, c)] - acc).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn invalid_layers() {
        assert!(Layer::new(0.0, 1.0).is_err());
        assert!(Layer::new(1.0, -1.0).is_err());
        let asym = LayerSpec {
            layer: Layer::default(),
            strain: vec![Matrix2::new(0.0, 0.1, 0.0, 0.0)],
        };
        assert!(asym.validate().is_err());
    }
}
