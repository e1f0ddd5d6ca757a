//! Residual system of the discrete bilayer energy.
//!
//! Each face contributes ten residuals, stored face-major in this order:
//!
//! | row | term                                     | weight       |
//! |-----|------------------------------------------|--------------|
//! | 0   | `D1·D1/2 − Ā11`                          | `w_first`    |
//! | 1   | `√2 (D1·D2/2 − Ā12)`                     | `w_first`    |
//! | 2   | `D2·D2/2 − Ā22`                          | `w_first`    |
//! | 3   | `E1·D1/2 − B̄11`                          | `w_second`   |
//! | 4   | `E1·D2/2 − B̄12`                          | `w_second`   |
//! | 5   | `E2·D1/2 − B̄21`                          | `w_second`   |
//! | 6   | `E2·D2/2 − B̄22`                          | `w_second`   |
//! | 7   | `D1 · ((v2 − v1) × (v4 − v1))`           | `w_coplanar` |
//! | 8   | `Σθ − 2π`                                | `w_convex`   |
//! | 9   | `‖v3+v1−v2−v4‖² − ‖rest defect‖²`        | `w_similar`  |
//!
//! with `D1 = v3 − v1`, `D2 = v4 − v2`, `E1 = n3 − n1`, `E2 = n4 − n2`.
//! Every row is pre-multiplied by the square root of its weight, so the
//! total energy is exactly `‖r‖²`.
//!
//! Vertex normals are functions of the positions (normalized sums of
//! diagonal-cross face normals), so the Jacobian of a face block reaches
//! every vertex of every face touching one of its corners.

use std::collections::BTreeSet;
use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DVector, Matrix3, Vector2, Vector3};
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddg::{fit_unit_square_map, jacobian_at_center};
use crate::error::{Error, Result};
use crate::material::{face_targets, FrameTargets, TargetForms};
use crate::quadmesh::{self, QuadMesh, DEGENERACY_TOL};
use crate::solver::LeastSquaresProblem;

pub const RESIDUALS_PER_FACE: usize = 10;
const EDGE_TOL: f64 = 1e-12;

/// Regularizer weights; all 1 by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerWeights {
    pub coplanar: f64,
    pub convex: f64,
    pub similar: f64,
}

impl Default for RegularizerWeights {
    fn default() -> Self {
        Self {
            coplanar: 1.0,
            convex: 1.0,
            similar: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWeights {
    pub first: f64,
    pub second: f64,
    pub coplanar: f64,
    pub convex: f64,
    pub similar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum JacobianMode {
    #[default]
    Analytic,
    /// Forward differences with the given step (mm).
    ForwardDifference(f64),
}

/// Unweighted data residuals of one face.
pub fn data_residuals(v: &[Vector3<f64>; 4], n: &[Vector3<f64>; 4], t: &FrameTargets) -> [f64; 7] {
    let d1 = v[2] - v[0];
    let d2 = v[3] - v[1];
    let e1 = n[2] - n[0];
    let e2 = n[3] - n[1];
    [
        d1.dot(&d1) / 2.0 - t.a_bar[(0, 0)],
        SQRT_2 * (d1.dot(&d2) / 2.0 - t.a_bar[(0, 1)]),
        d2.dot(&d2) / 2.0 - t.a_bar[(1, 1)],
        e1.dot(&d1) / 2.0 - t.b_bar[(0, 0)],
        e1.dot(&d2) / 2.0 - t.b_bar[(0, 1)],
        e2.dot(&d1) / 2.0 - t.b_bar[(1, 0)],
        e2.dot(&d2) / 2.0 - t.b_bar[(1, 1)],
    ]
}

/// Squared norm of the parallelogram defect `v3 + v1 − v2 − v4`.
pub fn parallelogram_defect_sq(v: &[Vector3<f64>; 4]) -> f64 {
    (v[2] + v[0] - v[1] - v[3]).norm_squared()
}

/// Unsigned interior angle at each corner.
pub fn interior_angles(v: &[Vector3<f64>; 4]) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (j, slot) in out.iter_mut().enumerate() {
        let u = v[(j + 3) % 4] - v[j];
        let w = v[(j + 1) % 4] - v[j];
        let (nu, nw) = (u.norm(), w.norm());
        if nu < EDGE_TOL || nw < EDGE_TOL {
            return Err(Error::DegenerateAngle { face: 0, corner: j });
        }
        *slot = (u.dot(&w) / (nu * nw)).clamp(-1.0, 1.0).acos();
    }
    Ok(out)
}

/// Unweighted coplanarity, convexity and similarity residuals of one face.
pub fn regularizer_residuals(v: &[Vector3<f64>; 4], rest: &[Vector3<f64>; 4]) -> Result<[f64; 3]> {
    regularizers_with_rest_defect(v, parallelogram_defect_sq(rest))
}

fn regularizers_with_rest_defect(v: &[Vector3<f64>; 4], rest_defect_sq: f64) -> Result<[f64; 3]> {
    let d1 = v[2] - v[0];
    let coplanar = d1.dot(&(v[1] - v[0]).cross(&(v[3] - v[0])));
    let convex = interior_angles(v)?.iter().sum::<f64>() - 2.0 * PI;
    let similar = parallelogram_defect_sq(v) - rest_defect_sq;
    Ok([coplanar, convex, similar])
}

/// Stacked residuals and sparse Jacobian at one configuration.
#[derive(Debug, Clone)]
pub struct ResidualSystem {
    pub residuals: DVector<f64>,
    pub jacobian: CsrMatrix<f64>,
    pub weights: EnergyWeights,
}

impl ResidualSystem {
    /// `E_final = ‖r‖²`.
    pub fn energy(&self) -> f64 {
        self.residuals.norm_squared()
    }
}

/// The discrete bilayer energy over a fixed mesh topology.
#[derive(Debug, Clone)]
pub struct BilayerEnergy {
    faces: Vec<[usize; 4]>,
    vertex_faces: Vec<Vec<usize>>,
    num_vertices: usize,
    targets: Vec<FrameTargets>,
    sqrt_first: Vec<f64>,
    sqrt_second: Vec<f64>,
    regularizers: RegularizerWeights,
    rest_defect_sq: Vec<f64>,
    stencils: Vec<Vec<usize>>,
    mode: JacobianMode,
}

struct FaceGeometry {
    normal: Vector3<f64>,
    /// ∂N/∂v_k for the face's own corners.
    d_normal: [Matrix3<f64>; 4],
}

struct VertexGeometry {
    normal: Vector3<f64>,
    /// (I − n nᵀ)/|Σ N|
    projector: Matrix3<f64>,
}

impl BilayerEnergy {
    /// Maps every face's `(A, B)` into its `(k, l)` frame using the
    /// unit-square map of the rest quad.
    pub fn new(
        mesh: &QuadMesh,
        targets: &[TargetForms],
        regularizers: RegularizerWeights,
    ) -> Result<Self> {
        if targets.len() != mesh.num_faces() {
            return Err(Error::InvalidConfig(format!(
                "{} targets for {} faces",
                targets.len(),
                mesh.num_faces()
            )));
        }
        let frames = (0..mesh.num_faces())
            .map(|f| {
                let j = jacobian_at_center(&fit_unit_square_map(&mesh.rest_face_positions(f))?);
                Ok(face_targets(&targets[f].a, &targets[f].b, &j))
            })
            .collect::<Result<Vec<_>>>()?;
        let weights: Vec<(f64, f64)> = targets.iter().map(|t| (t.w_first, t.w_second)).collect();
        Self::from_frame_targets(mesh, frames, &weights, regularizers)
    }

    /// Uses already transformed targets and per-face `(w_first, w_second)`.
    pub fn from_frame_targets(
        mesh: &QuadMesh,
        targets: Vec<FrameTargets>,
        weights: &[(f64, f64)],
        regularizers: RegularizerWeights,
    ) -> Result<Self> {
        if targets.len() != mesh.num_faces() || weights.len() != mesh.num_faces() {
            return Err(Error::InvalidConfig(
                "target count does not match face count".into(),
            ));
        }
        if weights.iter().any(|&(a, b)| a < 0.0 || b < 0.0)
            || [
                regularizers.coplanar,
                regularizers.convex,
                regularizers.similar,
            ]
            .iter()
            .any(|&w| w < 0.0)
        {
            return Err(Error::InvalidConfig(
                "energy weights must be non-negative".into(),
            ));
        }
        let rest = mesh.rest_embedding();
        let rest_defect_sq = mesh
            .faces()
            .iter()
            .map(|f| parallelogram_defect_sq(&quadmesh::gather(&rest, f)))
            .collect();
        let stencils = mesh
            .faces()
            .iter()
            .map(|face| {
                let mut s = BTreeSet::new();
                for &v in face {
                    for &g in &mesh.vertex_faces()[v] {
                        s.extend(mesh.faces()[g]);
                    }
                }
                s.into_iter().collect()
            })
            .collect();
        Ok(Self {
            faces: mesh.faces().to_vec(),
            vertex_faces: mesh.vertex_faces().to_vec(),
            num_vertices: mesh.num_vertices(),
            targets,
            sqrt_first: weights.iter().map(|w| w.0.sqrt()).collect(),
            sqrt_second: weights.iter().map(|w| w.1.sqrt()).collect(),
            regularizers,
            rest_defect_sq,
            stencils,
            mode: JacobianMode::Analytic,
        })
    }

    pub fn with_jacobian_mode(mut self, mode: JacobianMode) -> Self {
        self.mode = mode;
        self
    }

    /// Multiplies every weight by `factor`.
    pub fn scale_weights(&mut self, factor: f64) {
        let s = factor.sqrt();
        self.sqrt_first.iter_mut().for_each(|w| *w *= s);
        self.sqrt_second.iter_mut().for_each(|w| *w *= s);
        self.regularizers.coplanar *= factor;
        self.regularizers.convex *= factor;
        self.regularizers.similar *= factor;
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn frame_targets(&self) -> &[FrameTargets] {
        &self.targets
    }

    /// Weights of face 0 (uniform layers give uniform weights).
    pub fn weights(&self) -> EnergyWeights {
        let (first, second) = match (self.sqrt_first.first(), self.sqrt_second.first()) {
            (Some(a), Some(b)) => (a * a, b * b),
            _ => (0.0, 0.0),
        };
        EnergyWeights {
            first,
            second,
            coplanar: self.regularizers.coplanar,
            convex: self.regularizers.convex,
            similar: self.regularizers.similar,
        }
    }

    /// Vertices each face block depends on, ascending.
    pub fn stencil(&self, face: usize) -> &[usize] {
        &self.stencils[face]
    }

    fn vertex_normals(&self, positions: &[Vector3<f64>]) -> Result<Vec<Vector3<f64>>> {
        let fns = quadmesh::face_normals(positions, &self.faces)?;
        quadmesh::mwe_from_adjacency(&self.vertex_faces, &fns)
    }

    fn weighted_face(
        &self,
        f: usize,
        v: &[Vector3<f64>; 4],
        n: &[Vector3<f64>; 4],
    ) -> Result<[f64; RESIDUALS_PER_FACE]> {
        let data = data_residuals(v, n, &self.targets[f]);
        let reg =
            regularizers_with_rest_defect(v, self.rest_defect_sq[f]).map_err(|e| match e {
                Error::DegenerateAngle { corner, .. } => Error::DegenerateAngle { face: f, corner },
                other => other,
            })?;
        let (sf, ss) = (self.sqrt_first[f], self.sqrt_second[f]);
        let r = &self.regularizers;
        Ok([
            sf * data[0],
            sf * data[1],
            sf * data[2],
            ss * data[3],
            ss * data[4],
            ss * data[5],
            ss * data[6],
            r.coplanar.sqrt() * reg[0],
            r.convex.sqrt() * reg[1],
            r.similar.sqrt() * reg[2],
        ])
    }

    /// Weighted residual vector at the given positions.
    pub fn residuals_at(&self, positions: &[Vector3<f64>]) -> Result<DVector<f64>> {
        self.check_len(positions)?;
        let normals = self.vertex_normals(positions)?;
        let blocks: Vec<[f64; RESIDUALS_PER_FACE]> = (0..self.faces.len())
            .into_par_iter()
            .map(|f| {
                let face = &self.faces[f];
                self.weighted_face(
                    f,
                    &quadmesh::gather(positions, face),
                    &quadmesh::gather(&normals, face),
                )
            })
            .collect::<Result<_>>()?;
        let r = DVector::from_iterator(
            blocks.len() * RESIDUALS_PER_FACE,
            blocks.into_iter().flatten(),
        );
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteResidual);
        }
        Ok(r)
    }

    /// `E_final = ‖r‖²` at the given positions.
    pub fn energy_at(&self, positions: &[Vector3<f64>]) -> Result<f64> {
        Ok(self.residuals_at(positions)?.norm_squared())
    }

    /// Residuals plus Jacobian (analytic or forward differences, per mode).
    pub fn assemble(&self, positions: &[Vector3<f64>]) -> Result<ResidualSystem> {
        self.check_len(positions)?;
        let residuals = self.residuals_at(positions)?;
        let blocks: Vec<Vec<f64>> = match self.mode {
            JacobianMode::Analytic => self.analytic_blocks(positions)?,
            JacobianMode::ForwardDifference(step) => self.fd_blocks(positions, &residuals, step)?,
        };
        let jacobian = self.to_csr(blocks)?;
        Ok(ResidualSystem {
            residuals,
            jacobian,
            weights: self.weights(),
        })
    }

    fn check_len(&self, positions: &[Vector3<f64>]) -> Result<()> {
        if positions.len() != self.num_vertices {
            return Err(Error::InvalidConfig(format!(
                "expected {} positions, got {}",
                self.num_vertices,
                positions.len()
            )));
        }
        Ok(())
    }

    /// Row-major 10 × 3|stencil| block per face into CSR.
    fn to_csr(&self, blocks: Vec<Vec<f64>>) -> Result<CsrMatrix<f64>> {
        let nrows = self.faces.len() * RESIDUALS_PER_FACE;
        let mut offsets = Vec::with_capacity(nrows + 1);
        let nnz: usize = blocks.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        offsets.push(0);
        for (f, block) in blocks.into_iter().enumerate() {
            let width = 3 * self.stencils[f].len();
            for row in 0..RESIDUALS_PER_FACE {
                for &v in &self.stencils[f] {
                    cols.extend([3 * v, 3 * v + 1, 3 * v + 2]);
                }
                vals.extend_from_slice(&block[row * width..(row + 1) * width]);
                offsets.push(cols.len());
            }
        }
        CsrMatrix::try_from_csr_data(nrows, 3 * self.num_vertices, offsets, cols, vals)
            .map_err(|e| Error::InvalidConfig(format!("jacobian assembly: {e}")))
    }

    fn analytic_blocks(&self, positions: &[Vector3<f64>]) -> Result<Vec<Vec<f64>>> {
        let faces: Vec<FaceGeometry> = self
            .faces
            .par_iter()
            .enumerate()
            .map(|(fi, f)| face_geometry(fi, &quadmesh::gather(positions, f)))
            .collect::<Result<_>>()?;
        let verts: Vec<VertexGeometry> = self
            .vertex_faces
            .iter()
            .enumerate()
            .map(|(vi, inc)| {
                let sum: Vector3<f64> = inc.iter().map(|&g| faces[g].normal).sum();
                let norm = sum.norm();
                if norm <= DEGENERACY_TOL {
                    return Err(Error::DegenerateNormal { vertex: vi, norm });
                }
                let n = sum / norm;
                Ok(VertexGeometry {
                    normal: n,
                    projector: (Matrix3::identity() - n * n.transpose()) / norm,
                })
            })
            .collect::<Result<_>>()?;

        (0..self.faces.len())
            .into_par_iter()
            .map(|f| self.analytic_face_block(f, positions, &faces, &verts))
            .collect()
    }

    fn analytic_face_block(
        &self,
        f: usize,
        positions: &[Vector3<f64>],
        faces: &[FaceGeometry],
        verts: &[VertexGeometry],
    ) -> Result<Vec<f64>> {
        let face = &self.faces[f];
        let stencil = &self.stencils[f];
        let ns = stencil.len();
        let local = |v: usize| stencil.binary_search(&v).expect("vertex in stencil");
        let v = quadmesh::gather(positions, face);
        let n = [
            verts[face[0]].normal,
            verts[face[1]].normal,
            verts[face[2]].normal,
            verts[face[3]].normal,
        ];

        // dn[a][s] = ∂n_{face[a]} / ∂v_{stencil[s]}
        let mut dn = vec![[Matrix3::<f64>::zeros(); 4]; ns];
        for (a, &vi) in face.iter().enumerate() {
            for &g in &self.vertex_faces[vi] {
                for (k, &vk) in self.faces[g].iter().enumerate() {
                    dn[local(vk)][a] += verts[vi].projector * faces[g].d_normal[k];
                }
            }
        }

        let corner = [
            local(face[0]),
            local(face[1]),
            local(face[2]),
            local(face[3]),
        ];
        let width = 3 * ns;
        let mut block = vec![0.0; RESIDUALS_PER_FACE * width];
        let mut add = |row: usize, s: usize, g: Vector3<f64>| {
            let base = row * width + 3 * s;
            block[base] += g.x;
            block[base + 1] += g.y;
            block[base + 2] += g.z;
        };

        let d1 = v[2] - v[0];
        let d2 = v[3] - v[1];
        let e1 = n[2] - n[0];
        let e2 = n[3] - n[1];
        let (sf, ss) = (self.sqrt_first[f], self.sqrt_second[f]);
        let h = SQRT_2 / 2.0;

        // first form
        add(0, corner[2], d1 * sf);
        add(0, corner[0], -d1 * sf);
        add(1, corner[2], d2 * (h * sf));
        add(1, corner[0], -d2 * (h * sf));
        add(1, corner[3], d1 * (h * sf));
        add(1, corner[1], -d1 * (h * sf));
        add(2, corner[3], d2 * sf);
        add(2, corner[1], -d2 * sf);

        // second form: normal chain rule over the whole stencil
        for (s, dns) in dn.iter().enumerate() {
            let de1 = dns[2] - dns[0];
            let de2 = dns[3] - dns[1];
            add(3, s, de1.tr_mul(&d1) * (0.5 * ss));
            add(4, s, de1.tr_mul(&d2) * (0.5 * ss));
            add(5, s, de2.tr_mul(&d1) * (0.5 * ss));
            add(6, s, de2.tr_mul(&d2) * (0.5 * ss));
        }
        add(3, corner[2], e1 * (0.5 * ss));
        add(3, corner[0], -e1 * (0.5 * ss));
        add(4, corner[3], e1 * (0.5 * ss));
        add(4, corner[1], -e1 * (0.5 * ss));
        add(5, corner[2], e2 * (0.5 * ss));
        add(5, corner[0], -e2 * (0.5 * ss));
        add(6, corner[3], e2 * (0.5 * ss));
        add(6, corner[1], -e2 * (0.5 * ss));

        // coplanarity: triple product D1 · (a × b)
        let wc = self.regularizers.coplanar.sqrt();
        let a = v[1] - v[0];
        let b = v[3] - v[0];
        let axb = a.cross(&b);
        let bxd = b.cross(&d1);
        let dxa = d1.cross(&a);
        add(7, corner[2], axb * wc);
        add(7, corner[1], bxd * wc);
        add(7, corner[3], dxa * wc);
        add(7, corner[0], -(axb + bxd + dxa) * wc);

        // convexity: Σ θ_j
        let wv = self.regularizers.convex.sqrt();
        for j in 0..4 {
            let (prev, next) = ((j + 3) % 4, (j + 1) % 4);
            let u = v[prev] - v[j];
            let w = v[next] - v[j];
            let (nu, nw) = (u.norm(), w.norm());
            if nu < EDGE_TOL || nw < EDGE_TOL {
                return Err(Error::DegenerateAngle { face: f, corner: j });
            }
            let (uh, wh) = (u / nu, w / nw);
            let cos = uh.dot(&wh).clamp(-1.0, 1.0);
            let sin = (1.0 - cos * cos).sqrt();
            if sin < 1e-12 {
                // straight or folded corner: the angle is not differentiable
                continue;
            }
            let gu = -(wh - uh * cos) / (nu * sin);
            let gw = -(uh - wh * cos) / (nw * sin);
            add(8, corner[prev], gu * wv);
            add(8, corner[next], gw * wv);
            add(8, corner[j], -(gu + gw) * wv);
        }

        // similarity
        let wsim = self.regularizers.similar.sqrt();
        let q = (v[2] + v[0] - v[1] - v[3]) * (2.0 * wsim);
        add(9, corner[0], q);
        add(9, corner[2], q);
        add(9, corner[1], -q);
        add(9, corner[3], -q);

        Ok(block)
    }

    /// Residuals of one face recomputed from scratch, with one vertex moved.
    fn local_face_residuals(
        &self,
        f: usize,
        positions: &[Vector3<f64>],
        moved: (usize, Vector3<f64>),
    ) -> Result<[f64; RESIDUALS_PER_FACE]> {
        let pos = |i: usize| if i == moved.0 { moved.1 } else { positions[i] };
        let face = &self.faces[f];
        let v = face.map(pos);
        let mut n = [Vector3::zeros(); 4];
        for (a, &vi) in face.iter().enumerate() {
            let mut sum = Vector3::zeros();
            for &g in &self.vertex_faces[vi] {
                let fg = self.faces[g].map(pos);
                sum += quadmesh::face_normal(&fg).map_err(|e| match e {
                    Error::DegenerateFace { norm, .. } => Error::DegenerateFace { face: g, norm },
                    other => other,
                })?;
            }
            let norm = sum.norm();
            if norm <= DEGENERACY_TOL {
                return Err(Error::DegenerateNormal { vertex: vi, norm });
            }
            n[a] = sum / norm;
        }
        self.weighted_face(f, &v, &n)
    }

    fn fd_blocks(
        &self,
        positions: &[Vector3<f64>],
        residuals: &DVector<f64>,
        step: f64,
    ) -> Result<Vec<Vec<f64>>> {
        if !(step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "finite-difference step {step}"
            )));
        }
        (0..self.faces.len())
            .into_par_iter()
            .map(|f| {
                let stencil = &self.stencils[f];
                let width = 3 * stencil.len();
                let base =
                    &residuals.as_slice()[f * RESIDUALS_PER_FACE..(f + 1) * RESIDUALS_PER_FACE];
                let mut block = vec![0.0; RESIDUALS_PER_FACE * width];
                for (s, &vi) in stencil.iter().enumerate() {
                    for c in 0..3 {
                        let mut p = positions[vi];
                        p[c] += step;
                        let r = self.local_face_residuals(f, positions, (vi, p))?;
                        for row in 0..RESIDUALS_PER_FACE {
                            block[row * width + 3 * s + c] = (r[row] - base[row]) / step;
                        }
                    }
                }
                Ok(block)
            })
            .collect()
    }
}

fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    a.cross_matrix()
}

fn face_geometry(face: usize, p: &[Vector3<f64>; 4]) -> Result<FaceGeometry> {
    let d1 = p[2] - p[0];
    let d2 = p[3] - p[1];
    let c = d1.cross(&d2);
    let norm = c.norm();
    if norm <= DEGENERACY_TOL {
        return Err(Error::DegenerateFace { face, norm });
    }
    let nrm = c / norm;
    let proj = (Matrix3::identity() - nrm * nrm.transpose()) / norm;
    let s1 = skew(&d1);
    let s2 = skew(&d2);
    Ok(FaceGeometry {
        normal: nrm,
        d_normal: [proj * s2, -(proj * s1), -(proj * s2), proj * s1],
    })
}

/// Flattens positions into `[x0, y0, z0, x1, ...]`.
pub fn flatten(positions: &[Vector3<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        positions.len() * 3,
        positions.iter().flat_map(|p| [p.x, p.y, p.z]),
    )
}

pub fn unflatten(x: &DVector<f64>) -> Vec<Vector3<f64>> {
    x.as_slice()
        .chunks_exact(3)
        .map(|c| Vector3::new(c[0], c[1], c[2]))
        .collect()
}

impl LeastSquaresProblem for BilayerEnergy {
    fn num_params(&self) -> usize {
        3 * self.num_vertices
    }

    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.residuals_at(&unflatten(x))
    }

    fn residuals_and_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, CsrMatrix<f64>)> {
        let sys = self.assemble(&unflatten(x))?;
        Ok((sys.residuals, sys.jacobian))
    }
}

/// Rest quad as 3D points at z = 0.
pub fn lift(rest: &[Vector2<f64>; 4]) -> [Vector3<f64>; 4] {
    rest.map(|p| Vector3::new(p.x, p.y, 0.0))
}
