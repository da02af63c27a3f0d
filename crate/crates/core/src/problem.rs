//! The finite-element damage problem as an [`IncrementalProblem`].

use crate::assembly::{Discretization, LoadCase};
use crate::driver::{IncrementalProblem, ZStep};
use crate::error::Result;
use crate::mesh::Mesh;
use crate::model::{LoadMode, LoadProgram, MaterialModel, SchemeParams};
use crate::solvers::{AlState, USolver, ZProblem, ZSolveReport, ZSolver};

/// Default number of Gauss points per direction, exact for all element
/// integrals on parallelograms.
pub const DEFAULT_QUADRATURE: usize = 2;

pub struct FemProblem {
    disc: Discretization,
    model: MaterialModel,
    load: LoadCase,
    params: SchemeParams,
    usolver: USolver,
    zsolver: ZSolver,
    last_report: Option<ZSolveReport>,
}

impl FemProblem {
    pub fn new(mesh: Mesh, model: MaterialModel, program: LoadProgram, params: SchemeParams) -> Result<Self> {
        Self::with_quadrature(mesh, model, program, params, DEFAULT_QUADRATURE)
    }

    pub fn with_quadrature(
        mesh: Mesh,
        model: MaterialModel,
        program: LoadProgram,
        params: SchemeParams,
        order: usize,
    ) -> Result<Self> {
        model.validate()?;
        params.validate()?;
        let disc = Discretization::new(mesh, order)?;
        let load = LoadCase::new(&disc, program)?;
        let usolver = USolver::new(&disc, &load)?;
        let zsolver = ZSolver::new(&disc)?;
        Ok(Self {
            disc,
            model,
            load,
            params,
            usolver,
            zsolver,
            last_report: None,
        })
    }

    pub fn disc(&self) -> &Discretization {
        &self.disc
    }

    pub fn model(&self) -> &MaterialModel {
        &self.model
    }

    pub fn load(&self) -> &LoadCase {
        &self.load
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    /// Full report of the most recent damage solve.
    pub fn last_report(&self) -> Option<&ZSolveReport> {
        self.last_report.as_ref()
    }

    /// Closed-form dual distance from the nodal density of `D_z E`.
    pub fn dual_distance_of(&self, u: &[f64], z: &[f64]) -> Result<f64> {
        let (_, d) = self.disc.grad_z(u, z, &self.model)?;
        Ok(crate::diagnostics::dual_distance_from_density(
            &d,
            self.disc.weights(),
            self.model.kappa_r_effective(),
            self.params.norm,
        ))
    }

    /// Solves the damage step and returns the full solver report.
    pub fn solve_z_report(
        &self,
        u: &[f64],
        z_prev: &[f64],
        z_init: &[f64],
        rho: f64,
        warm: Option<AlState>,
    ) -> Result<ZSolveReport> {
        let quad = self.disc.z_quadratic(u, &self.model)?;
        let prob = ZProblem {
            quad: &quad,
            kappa_r: self.model.kappa_r_effective(),
            z_prev,
            z_init,
            rho,
        };
        self.zsolver.solve(&self.disc, &prob, &self.params, warm)
    }
}

impl IncrementalProblem for FemProblem {
    fn num_z(&self) -> usize {
        self.disc.num_nodes()
    }

    fn t_final(&self) -> f64 {
        self.load.program.t_final
    }

    fn solve_u(&mut self, t: f64, z: &[f64]) -> Result<Vec<f64>> {
        self.usolver.solve(&self.disc, t, z, &self.model, &self.load)
    }

    fn solve_z(
        &mut self,
        _t: f64,
        u: &[f64],
        z_prev: &[f64],
        z_init: &[f64],
        rho: f64,
        warm: Option<AlState>,
    ) -> Result<ZStep> {
        let rep = self.solve_z_report(u, z_prev, z_init, rho, warm)?;
        let step = ZStep {
            z: rep.z.clone(),
            mu: rep.mu,
            xi_norm_dual: rep.xi_norm_dual,
            stationarity: rep.stationarity_residual,
            constraint_active: rep.constraint_active,
            al_iters: rep.al_iters,
            newton_iters: rep.newton_iters,
            al_state: Some(rep.al_state.clone()),
        };
        self.last_report = Some(rep);
        Ok(step)
    }

    fn energy(&self, t: f64, u: &[f64], z: &[f64]) -> Result<f64> {
        self.disc.total_energy(t, u, z, &self.model, &self.load)
    }

    fn dissipation(&self, dz: &[f64]) -> f64 {
        let k = self.model.kappa_r_effective();
        k * dz.iter().zip(self.disc.weights()).map(|(v, w)| w * v.abs()).sum::<f64>()
    }

    fn norm_v(&self, dz: &[f64]) -> f64 {
        self.disc.norm_v(dz, self.params.norm)
    }

    fn dual_distance(&self, _t: f64, u: &[f64], z: &[f64]) -> Result<f64> {
        self.dual_distance_of(u, z)
    }

    fn reaction(&self, _t: f64, u: &[f64], z: &[f64]) -> Result<Option<f64>> {
        match self.load.program.mode {
            LoadMode::DirichletRamp => Ok(Some(self.disc.reaction_force(u, z, &self.model, &self.load)?)),
            LoadMode::TractionRamp => Ok(None),
        }
    }

    fn load_power(&self, _t: f64, u: &[f64]) -> Option<f64> {
        match self.load.program.mode {
            LoadMode::TractionRamp => {
                let rate = self.load.external_force_rate();
                Some(-rate.iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
            }
            LoadMode::DirichletRamp => None,
        }
    }

    fn prescribed_displacement(&self, t: f64) -> Option<f64> {
        match self.load.program.mode {
            LoadMode::DirichletRamp => Some(self.load.program.ubar(t)),
            LoadMode::TractionRamp => None,
        }
    }

    fn u_scale(&self, u: &[f64]) -> f64 {
        let m = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        m.max(1e-12 * self.load.program.amplitude.abs()).max(1e-300)
    }

    fn tol_am(&self) -> f64 {
        self.params.tol_am
    }

    fn max_am_iters(&self) -> usize {
        self.params.max_am_iters
    }
}

/// Residual of the momentum balance on free dofs, as a max-norm.
pub fn momentum_residual(p: &FemProblem, t: f64, u: &[f64], z: &[f64]) -> Result<f64> {
    let g = p.disc.grad_u(t, u, z, &p.model, &p.load)?;
    Ok(p.load.free_dofs().iter().fold(0.0f64, |m, &d| m.max(g[d].abs())))
}
