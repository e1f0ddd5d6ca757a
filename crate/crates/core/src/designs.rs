//! Design generators: rest mesh, per-face strain field and layer materials.
//!
//! Strains follow the printing convention: the top layer is printed faster
//! and shrinks by `delta_eps` relative to the bottom layer, so designs store
//! `eps_top = -delta_eps`, `eps_bottom = 0`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{Rotation2, Vector2};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::energy::{BilayerEnergy, RegularizerWeights};
use crate::error::{Error, Result};
use crate::material::{
    nominal_speed_for_strain, pure_bending_targets, target_forms, uniaxial, Layer, LayerSpec,
    TargetForms,
};
use crate::quadmesh::QuadMesh;
use crate::solver::SolverConfig;

pub const SCHEMA_VERSION: u32 = 1;
const UNIT_TOL: f64 = 1e-9;

/// Which target forms a design feeds to the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `A = I`, `B = 3Δε/(2t) d dᵀ`.
    PureBending,
    /// Finite-strain mixture of both layers' metrics.
    #[default]
    FiniteStrain,
}

/// Strain programmed into one face: a unit direction in rest coordinates and
/// the uniaxial strain of each layer along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceStrain {
    pub direction: Vector2<f64>,
    pub eps_top: f64,
    pub eps_bottom: f64,
}

impl FaceStrain {
    pub fn new(direction: Vector2<f64>, eps_top: f64, eps_bottom: f64) -> Self {
        Self {
            direction,
            eps_top,
            eps_bottom,
        }
    }

    /// Printing convention: top shrinks `delta_eps` more than the bottom.
    pub fn shrinking_top(direction: Vector2<f64>, delta_eps: f64) -> Self {
        Self::new(direction, -delta_eps, 0.0)
    }

    pub fn delta(&self) -> f64 {
        self.eps_top - self.eps_bottom
    }
}

/// Optional solver settings stored with a design.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturb_amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SolverOverrides {
    pub fn apply(&self, base: &SolverConfig) -> SolverConfig {
        SolverConfig {
            tau: self.tau.unwrap_or(base.tau),
            eps1: self.eps1.unwrap_or(base.eps1),
            eps2: self.eps2.unwrap_or(base.eps2),
            k_max: self.k_max.unwrap_or(base.k_max),
            perturb_amplitude: self.perturb_amplitude.or(base.perturb_amplitude),
            seed: self.seed.unwrap_or(base.seed),
        }
    }

    /// Fills unset fields from `other`.
    pub fn or(self, other: SolverOverrides) -> SolverOverrides {
        SolverOverrides {
            tau: self.tau.or(other.tau),
            eps1: self.eps1.or(other.eps1),
            eps2: self.eps2.or(other.eps2),
            k_max: self.k_max.or(other.k_max),
            perturb_amplitude: self.perturb_amplitude.or(other.perturb_amplitude),
            seed: self.seed.or(other.seed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Design {
    pub name: String,
    pub model: Model,
    pub mesh: QuadMesh,
    pub top: Layer,
    pub bottom: Layer,
    pub strain: Vec<FaceStrain>,
    pub pitch: f64,
    pub solver: SolverOverrides,
    pub meta: Value,
}

impl Design {
    pub fn thickness(&self) -> f64 {
        self.top.thickness + self.bottom.thickness
    }

    pub fn validate(&self) -> Result<()> {
        self.top.validate()?;
        self.bottom.validate()?;
        if self.strain.len() != self.mesh.num_faces() {
            return Err(Error::Schema(format!(
                "{} strain entries for {} faces",
                self.strain.len(),
                self.mesh.num_faces()
            )));
        }
        for (f, s) in self.strain.iter().enumerate() {
            if (s.direction.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::Schema(format!(
                    "face {f}: strain direction is not unit length"
                )));
            }
            if !(s.eps_top.is_finite() && s.eps_bottom.is_finite()) {
                return Err(Error::Schema(format!("face {f}: non-finite strain")));
            }
        }
        if self.model == Model::PureBending && self.top != self.bottom {
            return Err(Error::Schema(
                "pure-bending model needs identical top and bottom layers".into(),
            ));
        }
        if !(self.pitch > 0.0) {
            return Err(Error::Schema(format!(
                "pitch must be positive, got {}",
                self.pitch
            )));
        }
        Ok(())
    }

    /// Per-face `(A, B, w_first, w_second)` in rest coordinates.
    pub fn targets(&self) -> Result<Vec<TargetForms>> {
        match self.model {
            Model::PureBending => self
                .strain
                .iter()
                .map(|s| {
                    pure_bending_targets(s.delta(), self.thickness(), self.top.mu, s.direction)
                })
                .collect(),
            Model::FiniteStrain => {
                let layer = |layer: Layer, pick: fn(&FaceStrain) -> f64| LayerSpec {
                    layer,
                    strain: self
                        .strain
                        .iter()
                        .map(|s| uniaxial(pick(s), s.direction))
                        .collect(),
                };
                // the bottom layer plays the role of layer 1
                target_forms(
                    &layer(self.bottom, |s| s.eps_bottom),
                    &layer(self.top, |s| s.eps_top),
                )
            }
        }
    }

    pub fn energy(&self, regularizers: RegularizerWeights) -> Result<BilayerEnergy> {
        BilayerEnergy::new(&self.mesh, &self.targets()?, regularizers)
    }

    pub fn solver_config(&self, base: &SolverConfig) -> SolverConfig {
        self.solver.apply(base)
    }

    /// Same design with the rest mesh and strain directions rotated by
    /// `angle` radians about `center`.
    pub fn rotated(&self, angle: f64, center: Vector2<f64>) -> Result<Self> {
        let rot = Rotation2::new(angle);
        let rest = self
            .mesh
            .rest_positions()
            .iter()
            .map(|p| center + rot * (p - center))
            .collect();
        let mut out = self.clone();
        out.mesh = QuadMesh::from_rest(rest, self.mesh.faces().to_vec())?;
        for s in &mut out.strain {
            s.direction = rot * s.direction;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let file = DesignFile {
            schema: SCHEMA_VERSION,
            name: self.name.clone(),
            model: self.model,
            geometry: Geometry {
                pitch: self.pitch,
                rest: self
                    .mesh
                    .rest_positions()
                    .iter()
                    .map(|p| [p.x, p.y])
                    .collect(),
                faces: self.mesh.faces().to_vec(),
            },
            layers: Layers {
                top: self.top,
                bottom: self.bottom,
            },
            strain: self
                .strain
                .iter()
                .map(|s| [s.direction.x, s.direction.y, s.eps_top, s.eps_bottom])
                .collect(),
            solver: self.solver,
            meta: self.meta.clone(),
        };
        serde_json::to_value(file).expect("design serializes")
    }

    pub fn from_json(value: Value) -> Result<Self> {
        let file: DesignFile =
            serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        if file.schema != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                file.schema
            )));
        }
        let mesh = QuadMesh::from_rest(
            file.geometry
                .rest
                .iter()
                .map(|&[u, v]| Vector2::new(u, v))
                .collect(),
            file.geometry.faces,
        )?;
        let design = Design {
            name: file.name,
            model: file.model,
            mesh,
            top: file.layers.top,
            bottom: file.layers.bottom,
            strain: file
                .strain
                .iter()
                .map(|&[dx, dy, t, b]| FaceStrain::new(Vector2::new(dx, dy), t, b))
                .collect(),
            pitch: file.geometry.pitch,
            solver: file.solver,
            meta: file.meta,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self.to_json())?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[derive(Serialize, Deserialize)]
struct Geometry {
    pitch: f64,
    rest: Vec<[f64; 2]>,
    faces: Vec<[usize; 4]>,
}

#[derive(Serialize, Deserialize)]
struct Layers {
    top: Layer,
    bottom: Layer,
}

#[derive(Serialize, Deserialize)]
struct DesignFile {
    schema: u32,
    name: String,
    #[serde(default)]
    model: Model,
    geometry: Geometry,
    layers: Layers,
    strain: Vec<[f64; 4]>,
    #[serde(default)]
    solver: SolverOverrides,
    #[serde(default)]
    meta: Value,
}

fn cells(extent: f64, pitch: f64) -> Result<usize> {
    if !(pitch > 0.0 && extent > 0.0) {
        return Err(Error::BadPitch { pitch, extent });
    }
    let n = (extent / pitch).round();
    if n < 1.0 || (n * pitch - extent).abs() > 1e-9 * extent.max(1.0) {
        return Err(Error::BadPitch { pitch, extent });
    }
    Ok(n as usize)
}

fn symmetric_layers(thickness: f64) -> Result<(Layer, Layer)> {
    let layer = Layer::new(1.0, thickness / 2.0)?;
    Ok((layer, layer))
}

fn unit(direction: Vector2<f64>) -> Result<Vector2<f64>> {
    let n = direction.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::BadGeometry(
            "strain direction must be non-zero".into(),
        ));
    }
    Ok(direction / n)
}

/// `length × width` strip on a structured grid with a uniform strain
/// difference along `direction`.
pub fn rect_design(
    length: f64,
    width: f64,
    thickness: f64,
    pitch: f64,
    delta_eps: f64,
    direction: Vector2<f64>,
    model: Model,
) -> Result<Design> {
    let (nx, ny) = (cells(length, pitch)?, cells(width, pitch)?);
    let mesh = QuadMesh::grid(nx, ny, pitch)?;
    let (top, bottom) = symmetric_layers(thickness)?;
    let d = unit(direction)?;
    let design = Design {
        name: "rect".into(),
        model,
        strain: vec![FaceStrain::shrinking_top(d, delta_eps); mesh.num_faces()],
        mesh,
        top,
        bottom,
        pitch,
        solver: SolverOverrides::default(),
        meta: json!({
            "generator": "rect",
            "parameters": {
                "length": length, "width": width, "thickness": thickness,
                "pitch": pitch, "delta_eps": delta_eps, "direction": [d.x, d.y],
            },
        }),
    };
    design.validate()?;
    Ok(design)
}

/// Petal a face belongs to, as the unit direction from the plate center
/// toward it; faces on a diagonal are split in a pinwheel pattern so the
/// layout keeps its 90° symmetry.
fn petal_axis(c: Vector2<f64>) -> Vector2<f64> {
    let (ax, ay) = (c.x.abs(), c.y.abs());
    let tol = 1e-9 * (ax + ay).max(1.0);
    let along_x = if (ax - ay).abs() <= tol {
        c.x * c.y > 0.0
    } else {
        ax > ay
    };
    if along_x {
        Vector2::new(c.x.signum(), 0.0)
    } else {
        Vector2::new(0.0, c.y.signum())
    }
}

/// Square plate with a strain-free square center and four petals whose
/// strain points toward the center.
pub fn flower_design(
    total_side: f64,
    center_side: f64,
    thickness: f64,
    pitch: f64,
    delta_eps: f64,
) -> Result<Design> {
    if !(center_side > 0.0 && center_side < total_side) {
        return Err(Error::BadGeometry(format!(
            "center side {center_side} must lie in (0, {total_side})"
        )));
    }
    let n = cells(total_side, pitch)?;
    let nc = cells(center_side, pitch)?;
    if (n - nc) % 2 != 0 {
        return Err(Error::BadGeometry(
            "center square must sit on grid lines symmetric about the plate center".into(),
        ));
    }
    let mesh = QuadMesh::grid(n, n, pitch)?;
    let mid = Vector2::new(total_side / 2.0, total_side / 2.0);
    let half = center_side / 2.0;
    let strain = (0..mesh.num_faces())
        .map(|f| {
            let q = mesh.rest_face_positions(f);
            let c = (q[0] + q[1] + q[2] + q[3]) / 4.0 - mid;
            if c.x.abs() < half && c.y.abs() < half {
                FaceStrain::new(Vector2::x(), 0.0, 0.0)
            } else {
                // toward the center
                FaceStrain::shrinking_top(-petal_axis(c), delta_eps)
            }
        })
        .collect();
    let (top, bottom) = symmetric_layers(thickness)?;
    let design = Design {
        name: "flower".into(),
        model: Model::FiniteStrain,
        mesh,
        top,
        bottom,
        strain,
        pitch,
        solver: SolverOverrides::default(),
        meta: json!({
            "generator": "flower",
            "parameters": {
                "total_side": total_side, "center_side": center_side,
                "thickness": thickness, "pitch": pitch, "delta_eps": delta_eps,
            },
            "top_speed_mm_min": nominal_speed_for_strain(delta_eps),
        }),
    };
    design.validate()?;
    Ok(design)
}

/// Strip with uniform strain direction `(cos γ, sin γ)` relative to its long
/// axis; `gamma` in radians.
pub fn grass_design(
    length: f64,
    width: f64,
    thickness: f64,
    pitch: f64,
    gamma: f64,
    delta_eps: f64,
) -> Result<Design> {
    if !(0.0..=PI / 2.0 + 1e-12).contains(&gamma) {
        return Err(Error::BadGeometry(format!(
            "printing angle must lie in [0, 90] degrees, got {}",
            gamma.to_degrees()
        )));
    }
    let mut design = rect_design(
        length,
        width,
        thickness,
        pitch,
        delta_eps,
        Vector2::new(gamma.cos(), gamma.sin()),
        Model::FiniteStrain,
    )?;
    design.name = "grass".into();
    design.meta = json!({
        "generator": "grass",
        "parameters": {
            "length": length, "width": width, "thickness": thickness,
            "pitch": pitch, "gamma_deg": gamma.to_degrees(), "delta_eps": delta_eps,
        },
        "top_speed_mm_min": nominal_speed_for_strain(delta_eps),
    });
    Ok(design)
}

/// Unit convention for the spiral parameter in the radius term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpiralUnits {
    #[default]
    Degrees,
    Radians,
}

impl SpiralUnits {
    fn radius_scale(self) -> f64 {
        match self {
            SpiralUnits::Degrees => 180.0 / PI,
            SpiralUnits::Radians => 1.0,
        }
    }
}

/// `(α + βθ)(cos θ, sin θ)` with `θ` given in degrees and used in degrees in
/// the radius term.
pub fn archimedes_point(alpha: f64, beta: f64, theta_deg: f64) -> Vector2<f64> {
    archimedes_point_with(alpha, beta, theta_deg.to_radians(), SpiralUnits::Degrees)
}

/// Spiral point for `theta` in radians, with the radius term evaluated in
/// `units`.
pub fn archimedes_point_with(
    alpha: f64,
    beta: f64,
    theta: f64,
    units: SpiralUnits,
) -> Vector2<f64> {
    let r = alpha + beta * units.radius_scale() * theta;
    Vector2::new(r * theta.cos(), r * theta.sin())
}

/// Unit tangent `d/dθ` of the spiral through `(alpha, theta)`.
pub fn archimedes_tangent(alpha: f64, beta: f64, theta: f64, units: SpiralUnits) -> Vector2<f64> {
    let dr = beta * units.radius_scale();
    let r = alpha + dr * theta;
    let t = Vector2::new(
        dr * theta.cos() - r * theta.sin(),
        dr * theta.sin() + r * theta.cos(),
    );
    t / t.norm()
}

/// Band between the spirals `α_in` and `α_out`, meshed as a structured grid
/// in `(θ, α)`; each face's strain follows the local spiral tangent.
#[allow(clippy::too_many_arguments)]
pub fn seashell_design(
    alpha_in: f64,
    alpha_out: f64,
    beta: f64,
    theta_max_deg: f64,
    thickness: f64,
    pitch: f64,
    delta_eps: f64,
    units: SpiralUnits,
) -> Result<Design> {
    if !(alpha_in > 0.0 && alpha_out > alpha_in) {
        return Err(Error::BadGeometry(format!(
            "need 0 < alpha_in < alpha_out, got {alpha_in}, {alpha_out}"
        )));
    }
    if !(theta_max_deg > 0.0 && theta_max_deg <= 360.0) {
        return Err(Error::BadGeometry(format!(
            "theta_max must lie in (0, 360] degrees, got {theta_max_deg}"
        )));
    }
    if !(pitch > 0.0 && beta >= 0.0) {
        return Err(Error::BadGeometry(
            "pitch must be positive and beta non-negative".into(),
        ));
    }
    let theta_max = theta_max_deg.to_radians();
    let radius = |a: f64, th: f64| a + beta * units.radius_scale() * th;
    let na = ((alpha_out - alpha_in) / pitch).round().max(1.0) as usize;
    let mid_arc = radius(0.5 * (alpha_in + alpha_out), 0.5 * theta_max) * theta_max;
    let nt = (mid_arc / pitch).round().max(1.0) as usize;
    let alpha_at = |j: usize| alpha_in + (alpha_out - alpha_in) * j as f64 / na as f64;
    let theta_at = |i: usize| theta_max * i as f64 / nt as f64;
    let index = |i: usize, j: usize| i * (na + 1) + j;

    let mut rest = Vec::with_capacity((nt + 1) * (na + 1));
    for i in 0..=nt {
        for j in 0..=na {
            rest.push(archimedes_point_with(alpha_at(j), beta, theta_at(i), units));
        }
    }
    let mut faces = Vec::with_capacity(nt * na);
    let mut strain = Vec::with_capacity(nt * na);
    for i in 0..nt {
        for j in 0..na {
            // radial outward then forward in θ keeps counterclockwise winding
            faces.push([
                index(i, j),
                index(i + 1, j),
                index(i + 1, j + 1),
                index(i, j + 1),
            ]);
            let (th, a) = (
                0.5 * (theta_at(i) + theta_at(i + 1)),
                0.5 * (alpha_at(j) + alpha_at(j + 1)),
            );
            strain.push(FaceStrain::shrinking_top(
                archimedes_tangent(a, beta, th, units),
                delta_eps,
            ));
        }
    }
    // orient counterclockwise
    let signed = |q: &[usize; 4]| {
        let p: Vec<_> = q.iter().map(|&k| rest[k]).collect();
        (0..4).map(|k| p[k].perp(&p[(k + 1) % 4])).sum::<f64>()
    };
    if signed(&faces[0]) < 0.0 {
        for f in &mut faces {
            f.reverse();
        }
    }
    let mesh = QuadMesh::from_rest(rest, faces)?;
    let (top, bottom) = symmetric_layers(thickness)?;
    let design = Design {
        name: "seashell".into(),
        model: Model::FiniteStrain,
        mesh,
        top,
        bottom,
        strain,
        pitch,
        solver: SolverOverrides::default(),
        meta: json!({
            "generator": "seashell",
            "parameters": {
                "alpha_in": alpha_in, "alpha_out": alpha_out, "beta": beta,
                "theta_max_deg": theta_max_deg, "thickness": thickness,
                "pitch": pitch, "delta_eps": delta_eps,
                "spiral_units": units,
            },
            "top_speed_mm_min": nominal_speed_for_strain(delta_eps),
        }),
    };
    design.validate()?;
    Ok(design)
}
