//! Post-processing: rigid alignment, bend-radius and helix fits, and the
//! verification batches for the bending tables.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, SymmetricEigen, Vector2, Vector3};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::{rect_design, Design, Model};
use crate::error::{Error, Result};
use crate::material::timoshenko_radius;
use crate::quadmesh::QuadMesh;
use crate::simulate::simulate;
use crate::solver::{lm_minimize, LeastSquaresProblem, SolverConfig, SolverReport};

/// Least-squares rigid transform `x ↦ R x + t` taking `points` onto `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Kabsch rotation and translation minimizing `Σ‖R pᵢ + t − qᵢ‖²`.
pub fn rigid_transform(points: &[Vector3<f64>], target: &[Vector3<f64>]) -> Result<RigidTransform> {
    if points.len() != target.len() || points.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "rigid alignment needs equal non-empty point sets, got {} and {}",
            points.len(),
            target.len()
        )));
    }
    let (cp, cq) = (centroid(points), centroid(target));
    let mut h = Matrix3::zeros();
    for (p, q) in points.iter().zip(target) {
        h += (p - cp) * (q - cq).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let rotation = Rotation3::from_matrix_unchecked(r);
    Ok(RigidTransform {
        rotation,
        translation: cq - rotation * cp,
    })
}

/// Deformed positions moved rigidly onto the flat rest embedding.
pub fn rigid_align(deformed: &[Vector3<f64>], rest: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>> {
    let t = rigid_transform(deformed, rest)?;
    Ok(deformed.iter().map(|p| t.apply(p)).collect())
}

/// Mesh with its current positions aligned to its own rest embedding.
pub fn align_mesh(mesh: &QuadMesh) -> Result<QuadMesh> {
    mesh.with_vertices(rigid_align(mesh.vertices(), &mesh.rest_embedding())?)
}

/// Vertex indices of the mid-line running along `direction` in the rest
/// plane: one chain for an odd number of rows, two (to be averaged) for an
/// even number.
pub fn mid_line_chains(mesh: &QuadMesh, direction: Vector2<f64>) -> Result<Vec<Vec<usize>>> {
    let n = direction.norm();
    if !(n > 0.0) {
        return Err(Error::FitFailure("bend direction must be non-zero".into()));
    }
    let d = direction / n;
    let perp = Vector2::new(-d.y, d.x);
    let tol = 1e-6 * mesh.mean_rest_edge_length();
    let mut keyed: Vec<(f64, f64, usize)> = mesh
        .rest_positions()
        .iter()
        .enumerate()
        .map(|(i, p)| (p.dot(&perp), p.dot(&d), i))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut rows: Vec<Vec<(f64, usize)>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (w, s, i) in keyed {
        if w - last > tol {
            rows.push(Vec::new());
        }
        last = w;
        rows.last_mut().expect("row pushed").push((s, i));
    }
    let picks = if rows.len() % 2 == 1 {
        vec![rows.len() / 2]
    } else {
        vec![rows.len() / 2 - 1, rows.len() / 2]
    };
    let chains: Vec<Vec<usize>> = picks
        .into_iter()
        .map(|r| rows[r].iter().map(|&(_, i)| i).collect())
        .collect();
    if chains.iter().any(|c| c.len() < 3) || chains.iter().any(|c| c.len() != chains[0].len()) {
        return Err(Error::FitFailure(
            "mid-line rows are too short or have different lengths".into(),
        ));
    }
    Ok(chains)
}

/// Current positions along the mid-line, averaging two central rows when
/// the row count is even.
pub fn mid_line(mesh: &QuadMesh, direction: Vector2<f64>) -> Result<Vec<Vector3<f64>>> {
    let chains = mid_line_chains(mesh, direction)?;
    let v = mesh.vertices();
    Ok((0..chains[0].len())
        .map(|k| chains.iter().map(|c| v[c[k]]).sum::<Vector3<f64>>() / chains.len() as f64)
        .collect())
}

/// Circle through 3D points: center, plane normal, radius and RMS distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFit {
    pub center: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub radius: f64,
    pub rms: f64,
}

/// Principal axes of a point cloud, eigenvalues descending.
fn principal_axes(points: &[Vector3<f64>]) -> (Vector3<f64>, [f64; 3], [Vector3<f64>; 3]) {
    let c = centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        cov += (p - c) * (p - c).transpose();
    }
    let eig = SymmetricEigen::new(cov / points.len() as f64);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.map(|k| eig.eigenvalues[k].max(0.0));
    let vecs = order.map(|k| eig.eigenvectors.column(k).into_owned());
    (c, vals, vecs)
}

/// Relative out-of-line spread below which a chain counts as straight.
const COLLINEAR_TOL: f64 = 1e-7;

/// Algebraic circle fit `x² + y² + Dx + Ey + F = 0` refined by geometric
/// Gauss–Newton on `‖p − c‖ − r`.
pub fn fit_circle_2d(points: &[Vector2<f64>]) -> Result<(Vector2<f64>, f64, f64)> {
    if points.len() < 3 {
        return Err(Error::FitFailure(
            "circle fit needs at least 3 points".into(),
        ));
    }
    let m = points.len();
    let mut a = DMatrix::zeros(m, 3);
    let mut b = DVector::zeros(m);
    for (i, p) in points.iter().enumerate() {
        a[(i, 0)] = p.x;
        a[(i, 1)] = p.y;
        a[(i, 2)] = 1.0;
        b[i] = -(p.x * p.x + p.y * p.y);
    }
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::FitFailure(e.to_string()))?;
    let mut c = Vector2::new(-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = c.norm_squared() - sol[2];
    if !(r2 > 0.0 && r2.is_finite()) {
        return Err(Error::FitFailure(
            "algebraic circle fit is degenerate".into(),
        ));
    }
    let mut r = r2.sqrt();
    for _ in 0..20 {
        let mut jtj = nalgebra::Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for p in points {
            let d = p - c;
            let dist = d.norm();
            if dist == 0.0 {
                return Err(Error::FitFailure("point at circle center".into()));
            }
            let row = Vector3::new(-d.x / dist, -d.y / dist, -1.0);
            jtj += row * row.transpose();
            jtr += row * (dist - r);
        }
        let Some(step) = jtj.lu().solve(&(-jtr)) else {
            break;
        };
        c += Vector2::new(step.x, step.y);
        r += step.z;
        if step.norm() <= 1e-15 * r.max(1.0) {
            break;
        }
    }
    let rms = (points
        .iter()
        .map(|p| ((p - c).norm() - r).powi(2))
        .sum::<f64>()
        / m as f64)
        .sqrt();
    Ok((c, r, rms))
}

/// Best-fit circle through 3D points in their principal plane; `None` when
/// the points are collinear.
pub fn fit_circle_3d(points: &[Vector3<f64>]) -> Result<Option<CircleFit>> {
    if points.len() < 3 {
        return Err(Error::FitFailure(
            "circle fit needs at least 3 points".into(),
        ));
    }
    let (c0, vals, axes) = principal_axes(points);
    if vals[0] == 0.0 || (vals[1] / vals[0]).sqrt() < COLLINEAR_TOL {
        return Ok(None);
    }
    let (e1, e2) = (axes[0], axes[1]);
    let planar: Vec<Vector2<f64>> = points
        .iter()
        .map(|p| Vector2::new((p - c0).dot(&e1), (p - c0).dot(&e2)))
        .collect();
    let (c, r, rms2d) = fit_circle_2d(&planar)?;
    let center = c0 + e1 * c.x + e2 * c.y;
    let normal = e1.cross(&e2);
    let off_plane: f64 = points
        .iter()
        .map(|p| (p - c0).dot(&normal).powi(2))
        .sum::<f64>()
        / points.len() as f64;
    Ok(Some(CircleFit {
        center,
        normal,
        radius: r,
        rms: (rms2d * rms2d + off_plane).sqrt(),
    }))
}

/// Side of the mesh the bend center lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BendOrientation {
    /// Center of curvature on the +z (top layer) side; the top is concave.
    TopConcave,
    /// Center of curvature on the −z (bottom layer) side.
    BottomConcave,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendReport {
    pub radius: f64,
    pub rms: f64,
    /// True when the mid-line is straight and `radius` is infinite.
    pub collinear: bool,
    pub orientation: BendOrientation,
    pub theoretical_radius: Option<f64>,
    pub rel_dev: Option<f64>,
}

impl BendReport {
    /// Adds the small-strain radius `2t/(3Δε)` and the relative deviation.
    pub fn with_theory(mut self, delta_eps: f64, thickness: f64) -> Self {
        let theory = timoshenko_radius(delta_eps, thickness);
        self.theoretical_radius = Some(theory);
        self.rel_dev = Some((self.radius - theory).abs() / theory);
        self
    }
}

/// Area-weighted mean face normal.
fn mean_normal(mesh: &QuadMesh) -> Vector3<f64> {
    let n: Vector3<f64> = (0..mesh.num_faces())
        .map(|f| crate::quadmesh::diagonal_cross(&mesh.face_positions(f)))
        .sum();
    n.try_normalize(0.0).unwrap_or_else(Vector3::z)
}

/// Circle fit of the mid-line along `direction`.
pub fn fit_bend_radius(mesh: &QuadMesh, direction: Vector2<f64>) -> Result<BendReport> {
    let chain = mid_line(mesh, direction)?;
    let Some(fit) = fit_circle_3d(&chain)? else {
        return Ok(BendReport {
            radius: f64::INFINITY,
            rms: 0.0,
            collinear: true,
            orientation: BendOrientation::Flat,
            theoretical_radius: None,
            rel_dev: None,
        });
    };
    let side = (fit.center - centroid(mesh.vertices())).dot(&mean_normal(mesh));
    Ok(BendReport {
        radius: fit.radius,
        rms: fit.rms,
        collinear: false,
        orientation: if side > 0.0 {
            BendOrientation::TopConcave
        } else {
            BendOrientation::BottomConcave
        },
        theoretical_radius: None,
        rel_dev: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelixFit {
    pub radius: f64,
    /// Axial advance per turn, non-negative.
    pub pitch: f64,
    /// +1 right-handed, −1 left-handed.
    pub handedness: i8,
    pub axis: [f64; 3],
    pub rms: f64,
}

/// Perpendicular unit vectors spanning the plane orthogonal to `a`.
fn plane_basis(a: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let reference = if a.x.abs() <= a.y.abs() && a.x.abs() <= a.z.abs() {
        Vector3::x()
    } else if a.y.abs() <= a.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = (reference - a * reference.dot(a)).normalize();
    (e1, a.cross(&e1))
}

fn unwrap(angles: &mut [f64]) {
    for k in 1..angles.len() {
        let jump = angles[k] - angles[k - 1];
        angles[k] -= (jump / (2.0 * PI)).round() * 2.0 * PI;
    }
}

/// Residuals of a circular helix; parameters are an axis tilt `(α, β)` in the
/// basis orthogonal to `a0`, the axis point, the radius, and the axial
/// advance per radian.
struct HelixProblem<'a> {
    points: &'a [Vector3<f64>],
    a0: Vector3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
}

impl HelixProblem<'_> {
    fn axis(&self, x: &DVector<f64>) -> Vector3<f64> {
        (self.a0 + self.u * x[0] + self.v * x[1]).normalize()
    }

    fn angles(&self, axis: &Vector3<f64>, c: &Vector3<f64>) -> Vec<f64> {
        let (e1, e2) = plane_basis(axis);
        let mut phi: Vec<f64> = self
            .points
            .iter()
            .map(|p| {
                let d = p - c;
                d.dot(&e2).atan2(d.dot(&e1))
            })
            .collect();
        unwrap(&mut phi);
        phi
    }
}

impl LeastSquaresProblem for HelixProblem<'_> {
    fn num_params(&self) -> usize {
        7
    }

    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let a = self.axis(x);
        let c = Vector3::new(x[2], x[3], x[4]);
        let (r, k) = (x[5], x[6]);
        let phi = self.angles(&a, &c);
        let mut out = DVector::zeros(2 * self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            let d = p - c;
            let z = d.dot(&a);
            out[2 * i] = (d - a * z).norm() - r;
            out[2 * i + 1] = z - k * phi[i];
        }
        Ok(out)
    }

    fn residuals_and_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, CsrMatrix<f64>)> {
        let f = self.residuals(x)?;
        let h = 1e-7;
        let mut coo = CooMatrix::new(f.len(), 7);
        for j in 0..7 {
            let step = h * x[j].abs().max(1.0);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += step;
            xm[j] -= step;
            let col = (self.residuals(&xp)? - self.residuals(&xm)?) / (2.0 * step);
            for (i, v) in col.iter().enumerate() {
                coo.push(i, j, *v);
            }
        }
        Ok((f, CsrMatrix::from(&coo)))
    }
}

/// Least-squares circular helix through an ordered point chain.
pub fn fit_helix(points: &[Vector3<f64>]) -> Result<HelixFit> {
    if points.len() < 5 {
        return Err(Error::FitFailure(
            "helix fit needs at least 5 points".into(),
        ));
    }
    // second differences point at the axis, so the axis is their least
    // populated direction
    let mut m = Matrix3::zeros();
    for w in points.windows(3) {
        let d = w[0] - w[1] * 2.0 + w[2];
        m += d * d.transpose();
    }
    let eig = SymmetricEigen::new(m);
    let sorted = {
        let mut o = [0, 1, 2];
        o.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        o
    };
    if eig.eigenvalues[sorted[2]] <= 0.0
        || eig.eigenvalues[sorted[1]] < 1e-14 * eig.eigenvalues[sorted[2]]
    {
        return Err(Error::FitFailure("chain is straight; no helix axis".into()));
    }
    let a0: Vector3<f64> = eig.eigenvectors.column(sorted[0]).into_owned();
    let (u, v) = plane_basis(&a0);

    let c0 = centroid(points);
    let planar: Vec<Vector2<f64>> = points
        .iter()
        .map(|p| Vector2::new((p - c0).dot(&u), (p - c0).dot(&v)))
        .collect();
    let (cc, r0, _) = fit_circle_2d(&planar)?;
    let center = c0 + u * cc.x + v * cc.y;
    let problem = HelixProblem { points, a0, u, v };
    let phi = problem.angles(&a0, &center);
    let z: Vec<f64> = points.iter().map(|p| (p - center).dot(&a0)).collect();
    // z ≈ z0 + k φ
    let n = phi.len() as f64;
    let (mp, mz) = (phi.iter().sum::<f64>() / n, z.iter().sum::<f64>() / n);
    let sxx: f64 = phi.iter().map(|p| (p - mp).powi(2)).sum();
    let sxy: f64 = phi.iter().zip(&z).map(|(p, z)| (p - mp) * (z - mz)).sum();
    let k0 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let z0 = mz - k0 * mp;
    let start = center + a0 * z0;
    let x0 = DVector::from_vec(vec![0.0, 0.0, start.x, start.y, start.z, r0, k0]);
    let cfg = SolverConfig {
        eps1: 1e-12,
        eps2: 1e-14,
        k_max: 200,
        ..SolverConfig::default()
    };
    let (x, _) = lm_minimize(&problem, x0, &cfg)?;
    let residual = problem.residuals(&x)?;
    let axis = problem.axis(&x);
    let k = x[6];
    Ok(HelixFit {
        radius: x[5].abs(),
        pitch: (2.0 * PI * k).abs(),
        handedness: if k < 0.0 { -1 } else { 1 },
        axis: [axis.x, axis.y, axis.z],
        rms: (residual.norm_squared() / points.len() as f64).sqrt(),
    })
}

/// Helix through the mid-line running along `direction`.
pub fn helix_metrics(mesh: &QuadMesh, direction: Vector2<f64>) -> Result<HelixFit> {
    fit_helix(&mid_line(mesh, direction)?)
}

/// Which bending table to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Table {
    /// Pure bending at 1 mm pitch.
    One,
    /// Pure bending at 2, 1 and 0.5 mm pitch.
    Two,
    /// Finite-strain layer pairs with a 0.1 difference.
    Three,
}

impl Table {
    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Table::One),
            2 => Some(Table::Two),
            3 => Some(Table::Three),
            _ => None,
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Table::One => 1,
            Table::Two => 2,
            Table::Three => 3,
        }
    }
}

pub const STRIP_LENGTH: f64 = 50.0;
pub const STRIP_WIDTH: f64 = 10.0;
pub const STRIP_THICKNESS: f64 = 1.0;
pub const PURE_BENDING_STRAINS: [f64; 5] = [0.01, 0.02, 0.03, 0.04, 0.05];
pub const TABLE1_RADII: [f64; 5] = [66.67, 33.33, 22.22, 16.67, 13.33];
/// Rows for 2, 1 and 0.5 mm elements.
pub const TABLE2_RADII: [[f64; 5]; 3] = [
    [66.67, 33.34, 22.24, 16.68, 13.35],
    [66.67, 33.33, 22.22, 16.67, 13.33],
    [66.67, 33.33, 22.22, 16.67, 13.33],
];
pub const TABLE2_PITCHES: [f64; 3] = [2.0, 1.0, 0.5];
/// `(top, bottom)` layer strains.
pub const TABLE3_STRAINS: [(f64, f64); 6] = [
    (0.2, 0.3),
    (0.1, 0.2),
    (0.0, 0.1),
    (-0.1, 0.0),
    (-0.2, -0.1),
    (-0.3, -0.2),
];
pub const TABLE3_RADII: [f64; 6] = [6.96, 6.79, 6.70, 6.70, 6.90, 7.53];

/// One row of a verification batch.
#[derive(Debug, Clone)]
pub struct VerifyCase {
    pub case: String,
    pub param: String,
    pub reference: f64,
    pub theory: f64,
    pub design: Design,
}

/// Strip for a bending table; `eps` is `(top, bottom)`.
pub fn strip_case(pitch: f64, eps: (f64, f64), model: Model) -> Result<Design> {
    let mut d = rect_design(
        STRIP_LENGTH,
        STRIP_WIDTH,
        STRIP_THICKNESS,
        pitch,
        0.0,
        Vector2::x(),
        model,
    )?;
    for s in &mut d.strain {
        s.eps_top = eps.0;
        s.eps_bottom = eps.1;
    }
    Ok(d)
}

pub fn table_cases(table: Table) -> Result<Vec<VerifyCase>> {
    let pure = |pitch: f64, de: f64, reference: f64, case: String| -> Result<VerifyCase> {
        Ok(VerifyCase {
            param: format!("delta_eps={de}"),
            case,
            reference,
            theory: timoshenko_radius(de, STRIP_THICKNESS),
            design: strip_case(pitch, (-de, 0.0), Model::PureBending)?,
        })
    };
    match table {
        Table::One => PURE_BENDING_STRAINS
            .iter()
            .zip(TABLE1_RADII)
            .map(|(&de, reference)| pure(1.0, de, reference, "table1_pitch1".into()))
            .collect(),
        Table::Two => TABLE2_PITCHES
            .iter()
            .zip(TABLE2_RADII)
            .flat_map(|(&pitch, row)| {
                PURE_BENDING_STRAINS
                    .iter()
                    .zip(row)
                    .map(move |(&de, reference)| (pitch, de, reference))
            })
            .map(|(pitch, de, reference)| {
                pure(pitch, de, reference, format!("table2_pitch{pitch}"))
            })
            .collect(),
        Table::Three => TABLE3_STRAINS
            .iter()
            .zip(TABLE3_RADII)
            .map(|(&(top, bottom), reference)| {
                Ok(VerifyCase {
                    case: "table3_finite".into(),
                    param: format!("{top}/{bottom}"),
                    reference,
                    theory: timoshenko_radius(top - bottom, STRIP_THICKNESS),
                    design: strip_case(1.0, (top, bottom), Model::FiniteStrain)?,
                })
            })
            .collect(),
    }
}

/// Outcome of one verification row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyRow {
    pub case: String,
    pub param: String,
    pub reference_mm: f64,
    pub theory_mm: f64,
    pub simulated_mm: Option<f64>,
    /// Relative deviation from the reference value.
    pub rel_dev: Option<f64>,
    pub iters: Option<usize>,
    pub seconds: Option<f64>,
    pub fit_rms_mm: Option<f64>,
    pub orientation: Option<BendOrientation>,
    pub report: Option<SolverReport>,
    pub error: Option<String>,
}

/// Runs every case; solver failures are recorded per row. Rows are run in
/// parallel and returned in case order.
pub fn verify_cases(cases: &[VerifyCase], config: &SolverConfig) -> Vec<VerifyRow> {
    cases
        .par_iter()
        .map(|c| {
            let started = std::time::Instant::now();
            let outcome = simulate(&c.design, config)
                .and_then(|sim| Ok((fit_bend_radius(&sim.mesh, Vector2::x())?, sim)));
            let seconds = started.elapsed().as_secs_f64();
            match outcome {
                Ok((fit, sim)) => VerifyRow {
                    case: c.case.clone(),
                    param: c.param.clone(),
                    reference_mm: c.reference,
                    theory_mm: c.theory,
                    simulated_mm: Some(fit.radius),
                    rel_dev: Some((fit.radius - c.reference).abs() / c.reference),
                    iters: Some(sim.report.iterations),
                    seconds: Some(seconds),
                    fit_rms_mm: Some(fit.rms),
                    orientation: Some(fit.orientation),
                    report: Some(sim.report),
                    error: None,
                },
                Err(e) => VerifyRow {
                    case: c.case.clone(),
                    param: c.param.clone(),
                    reference_mm: c.reference,
                    theory_mm: c.theory,
                    simulated_mm: None,
                    rel_dev: None,
                    iters: None,
                    seconds: Some(seconds),
                    fit_rms_mm: None,
                    orientation: None,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn verify_tables(table: Table, config: &SolverConfig) -> Result<Vec<VerifyRow>> {
    Ok(verify_cases(&table_cases(table)?, config))
}

pub const CSV_HEADER: &str = "case,param,reference_mm,simulated_mm,rel_dev,iters,seconds";

pub fn rows_to_csv(rows: &[VerifyRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.case,
            r.param,
            r.reference_mm,
            opt(r.simulated_mm),
            opt(r.rel_dev),
            r.iters.map(|i| i.to_string()).unwrap_or_default(),
            opt(r.seconds),
        );
    }
    out
}

/// Acceptance verdict for a table: offending row descriptions, empty when
/// everything is within tolerance.
pub fn table_offenders(table: Table, rows: &[VerifyRow]) -> Vec<String> {
    let mut bad = Vec::new();
    for r in rows {
        let Some(sim) = r.simulated_mm else {
            bad.push(format!(
                "{} {}: {}",
                r.case,
                r.param,
                r.error.as_deref().unwrap_or("no result")
            ));
            continue;
        };
        let theory_dev = (sim - r.theory_mm).abs() / r.theory_mm;
        let ok = match table {
            Table::One => theory_dev <= 0.01,
            Table::Two => {
                theory_dev
                    <= if r.case.ends_with("pitch2") {
                        0.002
                    } else {
                        0.01
                    }
            }
            Table::Three => r.rel_dev.is_some_and(|d| d <= 0.05) && sim >= r.theory_mm,
        };
        if !ok {
            bad.push(format!(
                "{} {}: simulated {sim:.4} mm, reference {:.2} mm, theory {:.2} mm",
                r.case, r.param, r.reference_mm, r.theory_mm
            ));
        }
    }
    if table == Table::Two {
        bad.extend(refinement_violations(rows));
    }
    bad
}

/// Strains whose theory error grows under refinement.
pub fn refinement_violations(rows: &[VerifyRow]) -> Vec<String> {
    let mut bad = Vec::new();
    for &de in &PURE_BENDING_STRAINS {
        let param = format!("delta_eps={de}");
        let errs: Vec<Option<f64>> = TABLE2_PITCHES
            .iter()
            .map(|p| {
                rows.iter()
                    .find(|r| r.case == format!("table2_pitch{p}") && r.param == param)
                    .and_then(|r| r.simulated_mm.map(|s| (s - r.theory_mm).abs()))
            })
            .collect();
        if let [Some(e2), Some(e1), Some(e05)] = errs[..] {
            if !(e05 <= e1 && e1 <= e2) {
                bad.push(format!(
                    "{param}: |fit - theory| not monotone under refinement ({e2:.3e}, {e1:.3e}, {e05:.3e})"
                ));
            }
        }
    }
    bad
}
