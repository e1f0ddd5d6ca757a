//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use morphsim::ddg::FaceForms;
use morphsim::designs::{rect_design, Design, FaceStrain, Model};
use morphsim::energy::{flatten, BilayerEnergy, RegularizerWeights};
use morphsim::quadmesh::QuadMesh;
use morphsim::solver::LeastSquaresProblem;
use nalgebra::{DVector, Matrix2, Rotation3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SURFACE_RADIUS: f64 = 10.0;
pub const DDG_PITCHES: [f64; 4] = [2.0, 1.0, 0.5, 0.25];

pub type Surface = fn(Vector2<f64>) -> Vector3<f64>;

/// Arc-length parametrized cylinder around an axis parallel to y at height R.
pub fn cylinder(p: Vector2<f64>) -> Vector3<f64> {
    let a = p.x / SURFACE_RADIUS;
    Vector3::new(
        SURFACE_RADIUS * a.sin(),
        p.y,
        SURFACE_RADIUS * (1.0 - a.cos()),
    )
}

/// Lower cap of the sphere centered at (0, 0, R) as a graph over the plane.
pub fn sphere(p: Vector2<f64>) -> Vector3<f64> {
    let r = SURFACE_RADIUS;
    Vector3::new(p.x, p.y, r - (r * r - p.norm_squared()).sqrt())
}

fn tangents(s: Surface, p: Vector2<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let h = 1e-5;
    let du = (s(p + Vector2::new(h, 0.0)) - s(p - Vector2::new(h, 0.0))) / (2.0 * h);
    let dv = (s(p + Vector2::new(0.0, h)) - s(p - Vector2::new(0.0, h))) / (2.0 * h);
    (du, dv)
}

fn unit_normal(s: Surface, p: Vector2<f64>) -> Vector3<f64> {
    let (xu, xv) = tangents(s, p);
    xu.cross(&xv).normalize()
}

/// Exact `I = dXᵀdX` and `II_ij = ∂_i n · ∂_j X` by central differences of the
/// closed-form parametrization (about 1e-6 of noise in II).
pub fn exact_forms(s: Surface, p: Vector2<f64>) -> (Matrix2<f64>, Matrix2<f64>) {
    let (xu, xv) = tangents(s, p);
    let h = 1e-5;
    let nu = (unit_normal(s, p + Vector2::new(h, 0.0)) - unit_normal(s, p - Vector2::new(h, 0.0)))
        / (2.0 * h);
    let nv = (unit_normal(s, p + Vector2::new(0.0, h)) - unit_normal(s, p - Vector2::new(0.0, h)))
        / (2.0 * h);
    let first = Matrix2::new(xu.dot(&xu), xu.dot(&xv), xv.dot(&xu), xv.dot(&xv));
    let second = Matrix2::new(nu.dot(&xu), nu.dot(&xv), nv.dot(&xu), nv.dot(&xv));
    (first, second)
}

/// Max Frobenius error of the discrete I and II over faces centered in the
/// fixed window `|c|∞ ≤ side/4` of a `side`-wide patch centered at the origin.
pub fn form_errors(s: Surface, side: f64, pitch: f64) -> (f64, f64) {
    let origin = Vector2::repeat(-side / 2.0);
    let window = side / 4.0;
    let n = (side / pitch).round() as usize;
    let flat = QuadMesh::grid(n, n, pitch).unwrap();
    let vertices = flat
        .rest_positions()
        .iter()
        .map(|p| s(p + origin))
        .collect();
    let mesh = flat.with_vertices(vertices).unwrap();
    let normals = mesh.vertex_normals().unwrap();
    let boundary = mesh.boundary_vertices();
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for (f, face) in mesh.faces().iter().enumerate() {
        let rest = mesh.rest_face_positions(f);
        let center = rest.iter().sum::<Vector2<f64>>() / 4.0 + origin;
        if face.iter().any(|&v| boundary[v]) || center.amax() > window {
            continue;
        }
        let forms =
            FaceForms::compute(&rest, &mesh.face_positions(f), &face.map(|v| normals[v])).unwrap();
        let (first, second) = exact_forms(s, center);
        e1 = e1.max((forms.first_uv - first).norm());
        e2 = e2.max((forms.second_uv - second).norm());
    }
    (e1, e2)
}

/// 4×4-face grid with jittered rest positions, random per-face strain pairs
/// and directions, and a random non-flat current configuration.
pub fn random_problem(seed: u64) -> (BilayerEnergy, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut design = random_design(&mut rng, 4, 4);
    let rest: Vec<Vector2<f64>> = design
        .mesh
        .rest_positions()
        .iter()
        .map(|p| p + Vector2::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15)))
        .collect();
    design.mesh = QuadMesh::from_rest(rest, design.mesh.faces().to_vec()).unwrap();
    let energy = design.energy(RegularizerWeights::default()).unwrap();
    let k = rng.random_range(-0.2..0.2);
    let x: Vec<Vector3<f64>> = design
        .mesh
        .rest_positions()
        .iter()
        .map(|p| {
            Vector3::new(p.x, p.y, 0.5 * k * p.x * p.x)
                + Vector3::new(
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.3..0.3),
                )
        })
        .collect();
    (energy, flatten(&x))
}

pub fn random_design(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> Design {
    let model = if rng.random_bool(0.5) {
        Model::FiniteStrain
    } else {
        Model::PureBending
    };
    let mut design =
        rect_design(nx as f64, ny as f64, 1.0, 1.0, 0.05, Vector2::x(), model).unwrap();
    for s in &mut design.strain {
        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let top = rng.random_range(-0.2..0.2);
        let bottom = if model == Model::PureBending {
            0.0
        } else {
            rng.random_range(-0.2..0.2)
        };
        *s = FaceStrain::new(Vector2::new(a.cos(), a.sin()), top, bottom);
    }
    design
}

/// Max entry difference between the analytic Jacobian and central
/// differences with step `h`, relative to the largest Jacobian entry.
pub fn jacobian_rel_error(problem: &impl LeastSquaresProblem, x: &DVector<f64>, h: f64) -> f64 {
    let (_, jac) = problem.residuals_and_jacobian(x).unwrap();
    let dense = {
        let mut d = nalgebra::DMatrix::zeros(jac.nrows(), jac.ncols());
        for (i, j, v) in jac.triplet_iter() {
            d[(i, j)] += *v;
        }
        d
    };
    let mut worst = 0.0f64;
    for c in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[c] += h;
        xm[c] -= h;
        let col = (problem.residuals(&xp).unwrap() - problem.residuals(&xm).unwrap()) / (2.0 * h);
        worst = worst.max((col - dense.column(c)).amax());
    }
    worst / dense.amax()
}

/// Random proper rotation and translation applied to flattened positions.
pub fn rigid_motion(x: &DVector<f64>, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let rot = Rotation3::from_scaled_axis(axis.normalize() * rng.random_range(0.1..3.0));
    let t = Vector3::new(
        rng.random_range(-20.0..20.0),
        rng.random_range(-20.0..20.0),
        rng.random_range(-20.0..20.0),
    );
    let mut out = x.clone();
    for i in 0..x.len() / 3 {
        let p = Vector3::new(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
        let q = rot * p + t;
        out.fixed_rows_mut::<3>(3 * i).copy_from(&q);
    }
    out
}
