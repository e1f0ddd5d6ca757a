//! Levenberg–Marquardt minimization of sparse nonlinear least squares.

pub mod linear;

use std::time::Instant;

use nalgebra::DVector;
use nalgebra_sparse::CsrMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadmesh::QuadMesh;

pub use linear::{solve_damped_normal_equations, DampedNormalSolver, NormalEquations};

/// Damping increases tried when the damped system cannot be factored.
pub const MAX_SOLVE_RETRIES: usize = 10;

/// Relative perturbation amplitude used when none is configured.
pub const DEFAULT_PERTURB_FRACTION: f64 = 1e-4;

/// A residual vector `f(x)` with a sparse Jacobian.
pub trait LeastSquaresProblem {
    fn num_params(&self) -> usize;
    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn residuals_and_jacobian(&self, x: &DVector<f64>) -> Result<(DVector<f64>, CsrMatrix<f64>)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tau: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub k_max: usize,
    /// Out-of-plane perturbation in mm; `None` means 1e-4 times the mean
    /// rest edge length.
    pub perturb_amplitude: Option<f64>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: 1e-3,
            eps1: 1e-8,
            eps2: 1e-8,
            k_max: 1000,
            perturb_amplitude: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be at least 1".into()));
        }
        if let Some(a) = self.perturb_amplitude {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "perturb_amplitude must be non-negative, got {a}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    Step,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub grad_inf_norm: f64,
    /// `‖f‖²` at the start and after every accepted step.
    pub energy_history: Vec<f64>,
    pub termination: Termination,
    pub final_damping: f64,
    pub wall_time_s: f64,
    pub seed: u64,
}

impl SolverReport {
    pub fn initial_energy(&self) -> f64 {
        self.energy_history[0]
    }

    pub fn final_energy(&self) -> f64 {
        *self
            .energy_history
            .last()
            .expect("history has the initial energy")
    }
}

fn max_diagonal(a: &CsrMatrix<f64>) -> f64 {
    a.diagonal_as_csr()
        .values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

fn check_finite(f: &DVector<f64>) -> Result<()> {
    if f.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteResidual)
    }
}

/// Minimizes `½‖f(x)‖²` from `x0`.
///
/// Trial points where the residual cannot be evaluated (degenerate geometry,
/// non-finite values) count as rejected steps.
pub fn lm_minimize<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x0: DVector<f64>,
    config: &SolverConfig,
) -> Result<(DVector<f64>, SolverReport)> {
    config.validate()?;
    if x0.len() != problem.num_params() {
        return Err(Error::InvalidConfig(format!(
            "x0 has {} entries, problem has {} parameters",
            x0.len(),
            problem.num_params()
        )));
    }
    let start = Instant::now();
    let mut x = x0;
    let (mut f, mut j) = problem.residuals_and_jacobian(&x)?;
    check_finite(&f)?;
    let mut normal = NormalEquations::new(&j)?;
    let (mut a, mut g) = normal.assemble(&j, &f);
    let mut big_f = 0.5 * f.norm_squared();
    let mut history = vec![2.0 * big_f];
    let mut linear = DampedNormalSolver::new(&a)?;

    let mut nu = 2.0;
    let mut mu = config.tau * max_diagonal(&a);
    if mu <= 0.0 {
        mu = config.tau;
    }
    let mut k = 0;
    let mut accepted = 0;
    let mut rejected = 0;
    let mut termination = if g.amax() <= config.eps1 {
        Some(Termination::Gradient)
    } else {
        None
    };

    while termination.is_none() && k < config.k_max {
        k += 1;
        let mut attempts = 0;
        let h = loop {
            match linear.solve(&a, mu, &g) {
                Ok(h) => break h,
                Err(Error::FactorizationFailure(_)) if attempts < MAX_SOLVE_RETRIES => {
                    attempts += 1;
                    mu *= nu;
                    nu *= 2.0;
                }
                Err(Error::FactorizationFailure(_)) => {
                    return Err(Error::LinearSolveFailure { attempts });
                }
                Err(e) => return Err(e),
            }
        };

        if h.norm() <= config.eps2 * (x.norm() + config.eps2) {
            termination = Some(Termination::Step);
            break;
        }

        let x_new = &x + &h;
        let trial = problem
            .residuals(&x_new)
            .ok()
            .filter(|r| r.iter().all(|v| v.is_finite()));
        let rho = match &trial {
            Some(f_new) => {
                let predicted = 0.5 * h.dot(&(&h * mu - &g));
                (big_f - 0.5 * f_new.norm_squared()) / predicted
            }
            None => f64::NEG_INFINITY,
        };

        if rho > 0.0 {
            let (f_new, j_new) = problem.residuals_and_jacobian(&x_new)?;
            check_finite(&f_new)?;
            x = x_new;
            f = f_new;
            j = j_new;
            if !normal.matches(&j) {
                normal = NormalEquations::new(&j)?;
            }
            (a, g) = normal.assemble(&j, &f);
            if !linear.matches(&a) {
                linear = DampedNormalSolver::new(&a)?;
            }
            big_f = 0.5 * f.norm_squared();
            history.push(2.0 * big_f);
            accepted += 1;
            if g.amax() <= config.eps1 {
                termination = Some(Termination::Gradient);
            }
            mu *= f64::max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
        } else {
            rejected += 1;
            mu *= nu;
            nu *= 2.0;
        }
    }

    let report = SolverReport {
        iterations: k,
        accepted_steps: accepted,
        rejected_steps: rejected,
        grad_inf_norm: g.amax(),
        energy_history: history,
        termination: termination.unwrap_or(Termination::MaxIters),
        final_damping: mu,
        wall_time_s: start.elapsed().as_secs_f64(),
        seed: config.seed,
    };
    Ok((x, report))
}

/// Flat rest configuration at `z = 0` plus a seeded out-of-plane
/// perturbation, flattened as `[x0, y0, z0, x1, ...]`.
pub fn initialize(mesh: &QuadMesh, config: &SolverConfig) -> DVector<f64> {
    let amplitude = config
        .perturb_amplitude
        .unwrap_or_else(|| DEFAULT_PERTURB_FRACTION * mesh.mean_rest_edge_length());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = DVector::zeros(3 * mesh.num_vertices());
    for (i, p) in mesh.rest_positions().iter().enumerate() {
        x[3 * i] = p.x;
        x[3 * i + 1] = p.y;
        if amplitude > 0.0 {
            x[3 * i + 2] = rng.random_range(-amplitude..=amplitude);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra_sparse::CooMatrix;

    struct Linear;

    impl LeastSquaresProblem for Linear {
        fn num_params(&self) -> usize {
            1
        }
        fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::from_element(1, x[0] - 3.0))
        }
        fn residuals_and_jacobian(
            &self,
            x: &DVector<f64>,
        ) -> Result<(DVector<f64>, CsrMatrix<f64>)> {
            Ok((self.residuals(x)?, CsrMatrix::identity(1)))
        }
    }

    struct Valley;

    impl LeastSquaresProblem for Valley {
        fn num_params(&self) -> usize {
            2
        }
        fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![
                10.0 * (x[1] - x[0] * x[0]),
                1.0 - x[0],
            ]))
        }
        fn residuals_and_jacobian(
            &self,
            x: &DVector<f64>,
        ) -> Result<(DVector<f64>, CsrMatrix<f64>)> {
            let mut coo = CooMatrix::new(2, 2);
            coo.push(0, 0, -20.0 * x[0]);
            coo.push(0, 1, 10.0);
            coo.push(1, 0, -1.0);
            Ok((self.residuals(x)?, CsrMatrix::from(&coo)))
        }
    }

    #[test]
    fn linear_residual_converges_quickly() {
        let (x, rep) = lm_minimize(
            &Linear,
            DVector::from_element(1, 0.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((x[0] - 3.0).abs() < 1e-8);
        assert!(rep.iterations <= 3, "{} iterations", rep.iterations);
    }

    #[test]
    fn curved_valley_reaches_minimum() {
        let x0 = DVector::from_vec(vec![-1.2, 1.0]);
        let (x, rep) = lm_minimize(&Valley, x0, &SolverConfig::default()).unwrap();
        assert!(
            (x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6,
            "{x}"
        );
        assert!(Valley.residuals(&x).unwrap().norm() < 1e-6);
        assert!(rep.energy_history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn already_converged_takes_no_steps() {
        let (_, rep) = lm_minimize(
            &Linear,
            DVector::from_element(1, 3.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.termination, Termination::Gradient);
    }

    #[test]
    fn iteration_cap_respected() {
        let cfg = SolverConfig {
            k_max: 2,
            ..SolverConfig::default()
        };
        let (_, rep) = lm_minimize(&Valley, DVector::from_vec(vec![-1.2, 1.0]), &cfg).unwrap();
        assert_eq!(rep.iterations, 2);
        assert_eq!(rep.termination, Termination::MaxIters);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SolverConfig {
            eps1: 0.0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            lm_minimize(&Linear, DVector::zeros(1), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn initialize_perturbation() {
        let mesh = QuadMesh::grid(4, 3, 1.0).unwrap();
        let flat = initialize(
            &mesh,
            &SolverConfig {
                perturb_amplitude: Some(0.0),
                ..Default::default()
            },
        );
        for (i, p) in mesh.rest_positions().iter().enumerate() {
            assert_eq!(
                [flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]],
                [p.x, p.y, 0.0]
            );
        }
        let cfg = SolverConfig {
            perturb_amplitude: Some(0.01),
            seed: 5,
            ..Default::default()
        };
        assert_eq!(initialize(&mesh, &cfg), initialize(&mesh, &cfg));
        let other = initialize(&mesh, &SolverConfig { seed: 6, ..cfg });
        let a = initialize(&mesh, &cfg);
        let mut differs = false;
        for i in 0..mesh.num_vertices() {
            assert_eq!(a[3 * i], other[3 * i]);
            assert_eq!(a[3 * i + 1], other[3 * i + 1]);
            assert!(a[3 * i + 2].abs() <= 0.01 && other[3 * i + 2].abs() <= 0.01);
            differs |= a[3 * i + 2] != other[3 * i + 2];
        }
        assert!(differs);
    }
}
