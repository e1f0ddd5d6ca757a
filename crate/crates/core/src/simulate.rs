//! Design to equilibrium: initialize, minimize, align.

use nalgebra::DVector;

use crate::analysis::rigid_align;
use crate::designs::Design;
use crate::energy::{unflatten, BilayerEnergy, RegularizerWeights};
use crate::error::Result;
use crate::quadmesh::QuadMesh;
use crate::solver::{initialize, lm_minimize, SolverConfig, SolverReport};

#[derive(Debug, Clone)]
pub struct Simulation {
    /// Converged mesh, rigidly aligned to the flat rest embedding.
    pub mesh: QuadMesh,
    pub report: SolverReport,
    pub config: SolverConfig,
}

/// Runs the solver on `design`; design-level solver overrides take
/// precedence over `base`.
pub fn simulate(design: &Design, base: &SolverConfig) -> Result<Simulation> {
    let config = design.solver_config(base);
    let energy = design.energy(RegularizerWeights::default())?;
    let x0 = initialize(&design.mesh, &config);
    run(&design.mesh, &energy, x0, config)
}

/// Minimizes `energy` from `x0` and aligns the result.
pub fn run(
    mesh: &QuadMesh,
    energy: &BilayerEnergy,
    x0: DVector<f64>,
    config: SolverConfig,
) -> Result<Simulation> {
    let (x, report) = lm_minimize(energy, x0, &config)?;
    let aligned = rigid_align(&unflatten(&x), &mesh.rest_embedding())?;
    Ok(Simulation {
        mesh: mesh.with_vertices(aligned)?,
        report,
        config,
    })
}
