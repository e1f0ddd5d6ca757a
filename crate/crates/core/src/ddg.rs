//! Checkerboard discrete fundamental forms.
//!
//! Every quad is treated as the image of a reference unit square whose
//! corners, in the diagonal `(k, l)` frame, are
//! `c1 = (0, 0)`, `c2 = (√2/2, −√2/2)`, `c3 = (√2, 0)`, `c4 = (√2/2, √2/2)`.
//! Derivatives at the square's center `M = (√2/2, 0)` are central differences
//! along the diagonals, so the forms in the `(k, l)` frame only need the four
//! corner positions (and normals). A projective map from the square onto the
//! rest quad supplies the Jacobian that converts them to the parametric
//! `(u, v)` frame.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::{Matrix2, SMatrix, SVector, Vector2, Vector3};

use crate::error::{Error, Result};

/// Reference square corners in `(k, l)` coordinates.
pub const UNIT_SQUARE: [[f64; 2]; 4] = [
    [0.0, 0.0],
    [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
    [SQRT_2, 0.0],
    [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
];

/// Square center `M` in `(k, l)` coordinates.
pub const CENTER: [f64; 2] = [FRAC_1_SQRT_2, 0.0];

/// Smallest |det J| accepted when changing frames.
pub const JACOBIAN_TOL: f64 = 1e-12;

/// Homogeneous map `(k, l) -> (u, v)`:
///
/// ```text
/// u = (a k + b l + c) / (g k + h l + 1)
/// v = (d k + e l + f) / (g k + h l + 1)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectiveMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

impl ProjectiveMap {
    pub const IDENTITY: Self = Self {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        e: 1.0,
        f: 0.0,
        g: 0.0,
        h: 0.0,
    };

    pub fn coefficients(&self) -> [f64; 8] {
        [
            self.a, self.b, self.c, self.d, self.e, self.f, self.g, self.h,
        ]
    }

    fn denominator(&self, k: f64, l: f64) -> f64 {
        self.g * k + self.h * l + 1.0
    }

    pub fn apply(&self, k: f64, l: f64) -> Vector2<f64> {
        let w = self.denominator(k, l);
        Vector2::new(
            (self.a * k + self.b * l + self.c) / w,
            (self.d * k + self.e * l + self.f) / w,
        )
    }

    /// Closed-form `∂(u, v)/∂(k, l)` at an arbitrary point.
    pub fn jacobian(&self, k: f64, l: f64) -> Matrix2<f64> {
        let Self {
            a,
            b,
            c,
            d,
            e,
            f,
            g,
            h,
        } = *self;
        let w2 = self.denominator(k, l).powi(2);
        Matrix2::new(
            ((a * h - g * b) * l + a - g * c) / w2,
            ((g * b - a * h) * k + b - h * c) / w2,
            ((d * h - g * e) * l + d - g * f) / w2,
            ((e * g - d * h) * k + e - h * f) / w2,
        )
    }
}

/// Solves for the projective map sending the reference square corners onto
/// `p[0..4]`.
pub fn fit_unit_square_map(p: &[Vector2<f64>; 4]) -> Result<ProjectiveMap> {
    let mut m = SMatrix::<f64, 8, 8>::zeros();
    let mut rhs = SVector::<f64, 8>::zeros();
    for (i, (c, q)) in UNIT_SQUARE.iter().zip(p.iter()).enumerate() {
        let (k, l) = (c[0], c[1]);
        let r = 2 * i;
        // a k + b l + c - g k u - h l u = u
        m[(r, 0)] = k;
        m[(r, 1)] = l;
        m[(r, 2)] = 1.0;
        m[(r, 6)] = -k * q.x;
        m[(r, 7)] = -l * q.x;
        rhs[r] = q.x;
        // d k + e l + f - g k v - h l v = v
        m[(r + 1, 3)] = k;
        m[(r + 1, 4)] = l;
        m[(r + 1, 5)] = 1.0;
        m[(r + 1, 6)] = -k * q.y;
        m[(r + 1, 7)] = -l * q.y;
        rhs[r + 1] = q.y;
    }
    let lu = m.full_piv_lu();
    let u = lu.u();
    let pivots: Vec<f64> = (0..8).map(|i| u[(i, i)].abs()).collect();
    let max = pivots.iter().cloned().fold(0.0, f64::max);
    let min = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 || min <= 1e-12 * max {
        return Err(Error::SingularSystem);
    }
    let x = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    let map = ProjectiveMap {
        a: x[0],
        b: x[1],
        c: x[2],
        d: x[3],
        e: x[4],
        f: x[5],
        g: x[6],
        h: x[7],
    };
    if map.denominator(CENTER[0], CENTER[1]).abs() <= JACOBIAN_TOL {
        return Err(Error::SingularSystem);
    }
    Ok(map)
}

/// Jacobian of the map at the square center.
pub fn jacobian_at_center(map: &ProjectiveMap) -> Matrix2<f64> {
    map.jacobian(CENTER[0], CENTER[1])
}

/// Diagonal tangents `d_k = (v3 − v1)/√2`, `d_l = (v4 − v2)/√2`.
pub fn diagonal_tangents(v: &[Vector3<f64>; 4]) -> (Vector3<f64>, Vector3<f64>) {
    ((v[2] - v[0]) * FRAC_1_SQRT_2, (v[3] - v[1]) * FRAC_1_SQRT_2)
}

/// First fundamental form in the `(k, l)` frame.
pub fn first_form_kl(v: &[Vector3<f64>; 4]) -> Matrix2<f64> {
    let (dk, dl) = diagonal_tangents(v);
    let off = dk.dot(&dl);
    Matrix2::new(dk.dot(&dk), off, off, dl.dot(&dl))
}

/// Second fundamental form in the `(k, l)` frame, `dn · dφ` with all four
/// entries kept (not symmetrized).
pub fn second_form_kl(v: &[Vector3<f64>; 4], n: &[Vector3<f64>; 4]) -> Matrix2<f64> {
    let (dk, dl) = diagonal_tangents(v);
    let (ek, el) = diagonal_tangents(n);
    Matrix2::new(ek.dot(&dk), ek.dot(&dl), el.dot(&dk), el.dot(&dl))
}

/// `(J⁻¹)ᵀ · M · J⁻¹`.
fn to_uv(m: &Matrix2<f64>, j: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let det = j.determinant();
    if det.abs() <= JACOBIAN_TOL {
        return Err(Error::SingularJacobian { det });
    }
    let inv = j.try_inverse().ok_or(Error::SingularJacobian { det })?;
    Ok(inv.transpose() * m * inv)
}

pub fn first_form_uv(i_kl: &Matrix2<f64>, j: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    to_uv(i_kl, j)
}

pub fn second_form_uv(ii_kl: &Matrix2<f64>, j: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    to_uv(ii_kl, j)
}

/// All per-face quantities of the discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceForms {
    pub jacobian: Matrix2<f64>,
    pub first_kl: Matrix2<f64>,
    pub first_uv: Matrix2<f64>,
    pub second_kl: Matrix2<f64>,
    pub second_uv: Matrix2<f64>,
}

impl FaceForms {
    pub fn compute(
        rest: &[Vector2<f64>; 4],
        current: &[Vector3<f64>; 4],
        normals: &[Vector3<f64>; 4],
    ) -> Result<Self> {
        let jacobian = jacobian_at_center(&fit_unit_square_map(rest)?);
        Self::with_jacobian(jacobian, current, normals)
    }

    pub fn with_jacobian(
        jacobian: Matrix2<f64>,
        current: &[Vector3<f64>; 4],
        normals: &[Vector3<f64>; 4],
    ) -> Result<Self> {
        let first_kl = first_form_kl(current);
        let second_kl = second_form_kl(current, normals);
        Ok(Self {
            jacobian,
            first_kl,
            first_uv: first_form_uv(&first_kl, &jacobian)?,
            second_kl,
            second_uv: second_form_uv(&second_kl, &jacobian)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn corners() -> [Vector2<f64>; 4] {
        UNIT_SQUARE.map(|c| Vector2::new(c[0], c[1]))
    }

    #[test]
    fn identity_map() {
        let map = fit_unit_square_map(&corners()).unwrap();
        let expected = ProjectiveMap::IDENTITY.coefficients();
        for (a, b) in map.coefficients().iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-14, "{map:?}");
        }
        assert_relative_eq!(
            jacobian_at_center(&map),
            Matrix2::identity(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn scaled_map() {
        let p = corners().map(|c| c * 2.0);
        let map = fit_unit_square_map(&p).unwrap();
        let expected = [2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0];
        for (a, b) in map.coefficients().iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_relative_eq!(
            jacobian_at_center(&map),
            Matrix2::identity() * 2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn projective_fit_reproduces_corners() {
        let p = [
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(1.2, 1.1),
            Vector2::new(-0.1, 0.9),
        ];
        let map = fit_unit_square_map(&p).unwrap();
        assert!(map.g.abs() + map.h.abs() > 1e-3, "genuinely projective");
        for (c, q) in UNIT_SQUARE.iter().zip(p.iter()) {
            let r = map.apply(c[0], c[1]);
            assert!((r - q).norm() <= 1e-10 * q.norm().max(1.0));
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let p = [
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(1.2, 1.1),
            Vector2::new(-0.1, 0.9),
        ];
        let map = fit_unit_square_map(&p).unwrap();
        let j = jacobian_at_center(&map);
        let s = 1e-6;
        let (k, l) = (CENTER[0], CENTER[1]);
        let dk = (map.apply(k + s, l) - map.apply(k - s, l)) / (2.0 * s);
        let dl = (map.apply(k, l + s) - map.apply(k, l - s)) / (2.0 * s);
        let fd = Matrix2::from_columns(&[dk, dl]);
        assert!((j - fd).norm() <= 1e-6 * j.norm());
    }

    #[test]
    fn collinear_quad_is_singular() {
        let p = [
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(2.0, 0.0),
            Vector2::new(3.0, 0.0),
        ];
        assert!(matches!(
            fit_unit_square_map(&p),
            Err(Error::SingularSystem)
        ));
    }

    #[test]
    fn unit_square_forms() {
        let v = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        assert_relative_eq!(first_form_kl(&v), Matrix2::identity(), epsilon = 1e-15);
        assert_eq!(
            first_form_kl(&[Vector3::new(1.0, 2.0, 3.0); 4]),
            Matrix2::zeros()
        );
        let n = [Vector3::z(); 4];
        assert_eq!(second_form_kl(&v, &n), Matrix2::zeros());

        // rest == current: J is a rotation so I_uv is the identity
        let rest = v.map(|p| p.xy());
        let forms = FaceForms::compute(&rest, &v, &n).unwrap();
        assert_relative_eq!(forms.first_uv, Matrix2::identity(), epsilon = 1e-14);
        let jtj = forms.jacobian.transpose() * forms.jacobian;
        assert_relative_eq!(jtj, Matrix2::identity(), epsilon = 1e-14);
    }

    #[test]
    fn congruence_scaling() {
        let i_uv = first_form_uv(&Matrix2::identity(), &(Matrix2::identity() * 2.0)).unwrap();
        assert_relative_eq!(i_uv, Matrix2::identity() / 4.0, epsilon = 1e-15);
        assert!(matches!(
            second_form_uv(&Matrix2::identity(), &Matrix2::new(1.0, 2.0, 2.0, 4.0)),
            Err(Error::SingularJacobian { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn congruence_matches_direct_arithmetic(
                s in proptest::array::uniform3(-3.0f64..3.0),
                j in proptest::array::uniform4(-3.0f64..3.0),
            ) {
                let m = Matrix2::new(s[0], s[1], s[1], s[2]);
                let jm = Matrix2::new(j[0], j[1], j[2], j[3]);
                let det = j[0] * j[3] - j[1] * j[2];
                prop_assume!(det.abs() > 1e-2);
                // explicit adjugate inverse, entry-wise products
                let inv = [[j[3] / det, -j[1] / det], [-j[2] / det, j[0] / det]];
                let mm = [[s[0], s[1]], [s[1], s[2]]];
                let out = first_form_uv(&m, &jm).unwrap();
                for r in 0..2 {
                    for c in 0..2 {
                        let mut acc = 0.0;
                        for p in 0..2 {
                            for q in 0..2 {
                                acc += inv[p][r] * mm[p][q] * inv[q][c];
                            }
                        }
                        prop_assert!((out[(r, c)] - acc).abs() < 1e-9 * (1.0 + acc.abs()));
                    }
                }
            }
        }
    }
}
