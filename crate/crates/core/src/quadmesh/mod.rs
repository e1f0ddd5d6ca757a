//! Unstructured quadrilateral meshes.
//!
//! A [`QuadMesh`] carries two embeddings of the same connectivity: the flat
//! parametric rest positions (mm) that define the undeformed bilayer, and the
//! current 3D positions that the solver moves. Face vertices are stored in
//! winding order `v1..v4`; the diagonals `(v1, v3)` and `(v2, v4)` drive every
//! discrete operator downstream.

mod obj;

use std::collections::HashMap;

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

pub use obj::{load_obj, rest_sidecar_path, save_obj};

/// Cross-product norm (mm²) below which a quad is considered degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// One unit vector per face.
pub type FaceNormalField = Vec<Vector3<f64>>;
/// One unit vector per vertex.
pub type VertexNormalField = Vec<Vector3<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadMesh {
    vertices: Vec<Vector3<f64>>,
    rest_positions: Vec<Vector2<f64>>,
    faces: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
    vertex_faces: Vec<Vec<usize>>,
}

impl QuadMesh {
    /// Builds a mesh and checks every structural invariant.
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        rest_positions: Vec<Vector2<f64>>,
        faces: Vec<[usize; 4]>,
    ) -> Result<Self> {
        if vertices.len() != rest_positions.len() {
            return Err(Error::InvalidMesh(format!(
                "{} current vertices but {} rest positions",
                vertices.len(),
                rest_positions.len()
            )));
        }
        let n = vertices.len();
        let mut vertex_faces = vec![Vec::new(); n];
        // directed edge -> owning face
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (fi, face) in faces.iter().enumerate() {
            for (k, &v) in face.iter().enumerate() {
                if v >= n {
                    return Err(Error::InvalidMesh(format!(
                        "face {fi} references vertex {v} but mesh has {n} vertices"
                    )));
                }
                if face[..k].contains(&v) {
                    return Err(Error::InvalidMesh(format!("face {fi} repeats vertex {v}")));
                }
            }
            for k in 0..4 {
                let e = (face[k], face[(k + 1) % 4]);
                if let Some(other) = directed.insert(e, fi) {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) traversed in the same direction by faces {other} and {fi}; \
                         winding is inconsistent or the mesh is non-manifold",
                        e.0, e.1
                    )));
                }
            }
            for &v in face {
                vertex_faces[v].push(fi);
            }
        }
        let mut edges: Vec<[usize; 2]> = directed
            .keys()
            .filter(|&&(a, b)| a < b || !directed.contains_key(&(b, a)))
            .map(|&(a, b)| [a.min(b), a.max(b)])
            .collect();
        edges.sort_unstable();
        edges.dedup();

        Ok(Self {
            vertices,
            rest_positions,
            faces,
            edges,
            vertex_faces,
        })
    }

    /// Mesh whose current embedding is the rest mesh placed at z = 0.
    pub fn from_rest(rest_positions: Vec<Vector2<f64>>, faces: Vec<[usize; 4]>) -> Result<Self> {
        let vertices = rest_positions
            .iter()
            .map(|p| Vector3::new(p.x, p.y, 0.0))
            .collect();
        Self::new(vertices, rest_positions, faces)
    }

    /// Structured `nx` × `ny` cell grid with lower-left corner at the origin,
    /// faces wound counterclockwise seen from +z.
    ///
    /// Vertices are numbered with the shorter side running fastest, which
    /// keeps the bandwidth of the normal equations small.
    pub fn grid(nx: usize, ny: usize, pitch: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || pitch <= 0.0 {
            return Err(Error::BadGeometry(format!(
                "grid needs positive cell counts and pitch, got {nx}x{ny} at {pitch}"
            )));
        }
        let x_fast = nx <= ny;
        let index = |i: usize, j: usize| {
            if x_fast {
                j * (nx + 1) + i
            } else {
                i * (ny + 1) + j
            }
        };
        let mut rest = vec![Vector2::zeros(); (nx + 1) * (ny + 1)];
        for j in 0..=ny {
            for i in 0..=nx {
                rest[index(i, j)] = Vector2::new(i as f64 * pitch, j as f64 * pitch);
            }
        }
        let mut faces = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                faces.push([
                    index(i, j),
                    index(i + 1, j),
                    index(i + 1, j + 1),
                    index(i, j + 1),
                ]);
            }
        }
        Self::from_rest(rest, faces)
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn rest_positions(&self) -> &[Vector2<f64>] {
        &self.rest_positions
    }

    pub fn faces(&self) -> &[[usize; 4]] {
        &self.faces
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn vertex_faces(&self) -> &[Vec<usize>] {
        &self.vertex_faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Rest positions lifted to z = 0.
    pub fn rest_embedding(&self) -> Vec<Vector3<f64>> {
        self.rest_positions
            .iter()
            .map(|p| Vector3::new(p.x, p.y, 0.0))
            .collect()
    }

    /// Replaces the current embedding; connectivity and rest positions stay.
    pub fn set_vertices(&mut self, vertices: Vec<Vector3<f64>>) -> Result<()> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        self.vertices = vertices;
        Ok(())
    }

    /// Copy of this mesh with a different current embedding.
    pub fn with_vertices(&self, vertices: Vec<Vector3<f64>>) -> Result<Self> {
        let mut out = self.clone();
        out.set_vertices(vertices)?;
        Ok(out)
    }

    pub fn face_positions(&self, face: usize) -> [Vector3<f64>; 4] {
        gather(&self.vertices, &self.faces[face])
    }

    pub fn rest_face_positions(&self, face: usize) -> [Vector2<f64>; 4] {
        let f = &self.faces[face];
        [
            self.rest_positions[f[0]],
            self.rest_positions[f[1]],
            self.rest_positions[f[2]],
            self.rest_positions[f[3]],
        ]
    }

    /// Mean rest edge length, used as the element pitch for unstructured meshes.
    pub fn mean_rest_edge_length(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .edges
            .iter()
            .map(|&[a, b]| (self.rest_positions[a] - self.rest_positions[b]).norm())
            .sum();
        total / self.edges.len() as f64
    }

    /// Vertices lying on exactly one face-edge (open boundary).
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut count: HashMap<[usize; 2], usize> = HashMap::new();
        for f in &self.faces {
            for k in 0..4 {
                let (a, b) = (f[k], f[(k + 1) % 4]);
                *count.entry([a.min(b), a.max(b)]).or_default() += 1;
            }
        }
        let mut out = vec![false; self.vertices.len()];
        for (e, c) in count {
            if c == 1 {
                out[e[0]] = true;
                out[e[1]] = true;
            }
        }
        out
    }

    /// Face normals of the current embedding.
    pub fn face_normals(&self) -> Result<FaceNormalField> {
        face_normals(&self.vertices, &self.faces)
    }

    /// MWE vertex normals of the current embedding.
    pub fn vertex_normals(&self) -> Result<VertexNormalField> {
        let face_normals = self.face_normals()?;
        vertex_normals_mwe(self, &face_normals)
    }
}

pub(crate) fn gather(positions: &[Vector3<f64>], face: &[usize; 4]) -> [Vector3<f64>; 4] {
    [
        positions[face[0]],
        positions[face[1]],
        positions[face[2]],
        positions[face[3]],
    ]
}

/// Unnormalized face normal `(v3 - v1) × (v4 - v2)`.
pub fn diagonal_cross(p: &[Vector3<f64>; 4]) -> Vector3<f64> {
    (p[2] - p[0]).cross(&(p[3] - p[1]))
}

/// Unit normal of a quad from the cross product of its diagonals.
pub fn face_normal(p: &[Vector3<f64>; 4]) -> Result<Vector3<f64>> {
    let c = diagonal_cross(p);
    let norm = c.norm();
    if norm <= DEGENERACY_TOL {
        return Err(Error::DegenerateFace { face: 0, norm });
    }
    Ok(c / norm)
}

pub(crate) fn face_normals(
    positions: &[Vector3<f64>],
    faces: &[[usize; 4]],
) -> Result<FaceNormalField> {
    faces
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            face_normal(&gather(positions, f)).map_err(|e| match e {
                Error::DegenerateFace { norm, .. } => Error::DegenerateFace { face: fi, norm },
                other => other,
            })
        })
        .collect()
}

/// Vertex normals as the normalized sum of incident face normals.
pub fn vertex_normals_mwe(
    mesh: &QuadMesh,
    face_normals: &[Vector3<f64>],
) -> Result<VertexNormalField> {
    mwe_from_adjacency(mesh.vertex_faces(), face_normals)
}

pub(crate) fn mwe_from_adjacency(
    vertex_faces: &[Vec<usize>],
    face_normals: &[Vector3<f64>],
) -> Result<VertexNormalField> {
    vertex_faces
        .iter()
        .enumerate()
        .map(|(vi, incident)| {
            let sum: Vector3<f64> = incident.iter().map(|&f| face_normals[f]).sum();
            let norm = sum.norm();
            if norm <= DEGENERACY_TOL {
                Err(Error::DegenerateNormal { vertex: vi, norm })
            } else {
                Ok(sum / norm)
            }
        })
        .collect()
}

/// Edge midpoints of every face in winding order (the inscribed Varignon
/// parallelograms of the checkerboard pattern).
pub fn checkerboard_midpoints(mesh: &QuadMesh) -> Vec<[Vector3<f64>; 4]> {
    (0..mesh.num_faces())
        .map(|f| {
            let p = mesh.face_positions(f);
            [
                (p[0] + p[1]) * 0.5,
                (p[1] + p[2]) * 0.5,
                (p[2] + p[3]) * 0.5,
                (p[3] + p[0]) * 0.5,
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square() -> [Vector3<f64>; 4] {
        [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ]
    }

    #[test]
    fn face_normal_of_unit_square() {
        let n = face_normal(&unit_square()).unwrap();
        assert_relative_eq!(n, Vector3::z(), epsilon = 1e-15);
        let mut rev = unit_square();
        rev.reverse();
        assert_relative_eq!(face_normal(&rev).unwrap(), -Vector3::z(), epsilon = 1e-15);
    }

    #[test]
    fn face_normal_non_planar() {
        let p = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.2),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, -0.2),
        ];
        // (1,1,0) x (-1,1,-0.4) = (-0.4, 0.4, 2)
        let expected = Vector3::new(-0.4, 0.4, 2.0).normalize();
        assert_relative_eq!(face_normal(&p).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_face_rejected() {
        let p = [Vector3::zeros(); 4];
        assert!(matches!(face_normal(&p), Err(Error::DegenerateFace { .. })));
    }

    #[test]
    fn grid_counts() {
        let m = QuadMesh::grid(50, 10, 1.0).unwrap();
        assert_eq!(m.num_vertices(), 561);
        assert_eq!(m.num_faces(), 500);
        // 51*10 + 11*50 edges
        assert_eq!(m.edges().len(), 51 * 10 + 11 * 50);
        for n in m.face_normals().unwrap() {
            assert_relative_eq!(n, Vector3::z(), epsilon = 1e-15);
        }
    }

    #[test]
    fn vertex_faces_inverts_faces() {
        let m = QuadMesh::grid(3, 4, 0.5).unwrap();
        for (v, incident) in m.vertex_faces().iter().enumerate() {
            for &f in incident {
                assert!(m.faces()[f].contains(&v));
            }
        }
        let total: usize = m.vertex_faces().iter().map(Vec::len).sum();
        assert_eq!(total, 4 * m.num_faces());
    }

    #[test]
    fn rejects_bad_faces() {
        let rest = vec![Vector2::zeros(); 4];
        assert!(QuadMesh::from_rest(rest.clone(), vec![[0, 1, 2, 2]]).is_err());
        assert!(QuadMesh::from_rest(rest.clone(), vec![[0, 1, 2, 7]]).is_err());
        let v = vec![Vector3::zeros(); 3];
        assert!(QuadMesh::new(v, rest, vec![]).is_err());
    }

    #[test]
    fn rejects_inconsistent_winding() {
        let rest = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(1.0, 1.0),
            Vector2::new(0.0, 1.0),
            Vector2::new(2.0, 0.0),
            Vector2::new(2.0, 1.0),
        ];
        // second face shares edge 1->2 in the same direction
        let err = QuadMesh::from_rest(rest, vec![[0, 1, 2, 3], [1, 2, 5, 4]]);
        assert!(err.is_err());
    }

    #[test]
    fn flat_grid_vertex_normals_are_up() {
        let m = QuadMesh::grid(4, 3, 1.0).unwrap();
        for n in m.vertex_normals().unwrap() {
            assert_relative_eq!(n, Vector3::z(), epsilon = 1e-15);
        }
    }

    #[test]
    fn symmetric_tent_vertex_normal() {
        // 2x2 grid with the center vertex lifted: four faces tilt symmetrically
        let mut m = QuadMesh::grid(2, 2, 1.0).unwrap();
        let mut v = m.vertices().to_vec();
        let center = m
            .rest_positions()
            .iter()
            .position(|p| (p - Vector2::new(1.0, 1.0)).norm() < 1e-12)
            .unwrap();
        v[center].z = 0.3;
        m.set_vertices(v).unwrap();
        let normals = m.vertex_normals().unwrap();
        assert_relative_eq!(normals[center], Vector3::z(), epsilon = 1e-14);
    }

    #[test]
    fn opposing_faces_give_degenerate_normal() {
        let n = vec![Vector3::z(), -Vector3::z()];
        let adj = vec![vec![0, 1]];
        assert!(matches!(
            mwe_from_adjacency(&adj, &n),
            Err(Error::DegenerateNormal { vertex: 0, .. })
        ));
    }

    #[test]
    fn unit_square_midpoints() {
        let m = QuadMesh::grid(1, 1, 1.0).unwrap();
        let mids = checkerboard_midpoints(&m)[0];
        let expected = [
            Vector3::new(0.5, 0.0, 0.0),
            Vector3::new(1.0, 0.5, 0.0),
            Vector3::new(0.5, 1.0, 0.0),
            Vector3::new(0.0, 0.5, 0.0),
        ];
        for (a, b) in mids.iter().zip(expected.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn quad() -> impl Strategy<Value = [Vector3<f64>; 4]> {
            proptest::array::uniform4(proptest::array::uniform3(-5.0f64..5.0))
                .prop_map(|a| a.map(|c| Vector3::new(c[0], c[1], c[2])))
        }

        proptest! {
            #[test]
            fn varignon_parallelogram(p in quad()) {
                let m = [
                    (p[0] + p[1]) * 0.5,
                    (p[1] + p[2]) * 0.5,
                    (p[2] + p[3]) * 0.5,
                    (p[3] + p[0]) * 0.5,
                ];
                prop_assert!((m[0] - m[1] + m[2] - m[3]).norm() < 1e-12);
            }

            #[test]
            fn face_normal_cyclic_invariance(p in quad()) {
                prop_assume!(diagonal_cross(&p).norm() > 1e-6);
                let q = [p[1], p[2], p[3], p[0]];
                let a = face_normal(&p).unwrap();
                let b = face_normal(&q).unwrap();
                prop_assert!((a - b).norm() < 1e-12);
            }

            #[test]
            fn shared_normal_propagates(nx in 1usize..5, ny in 1usize..5, ax in -1.0f64..1.0, ay in -1.0f64..1.0) {
                let m = QuadMesh::grid(nx, ny, 1.0).unwrap();
                let n = Vector3::new(ax, ay, 1.0).normalize();
                let fns = vec![n; m.num_faces()];
                for vn in vertex_normals_mwe(&m, &fns).unwrap() {
                    prop_assert!((vn - n).norm() < 1e-12);
                }
            }
        }
    }
}
