//! Scalar toy system with energy `½(z²+η) a u² − ℓ(t) u + ½ κ_E z²` and
//! dissipation `κ_R |v|` on `v ≤ 0`, plus a brute-force oracle.

use crate::driver::{run, IncrementalProblem, RunOptions, SnapshotPolicy, Trace, ZStep};
use crate::error::{Error, Result};
use crate::solvers::AlState;

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroDimModel {
    pub a: f64,
    pub eta: f64,
    pub kappa_e: f64,
    pub kappa_r: f64,
    /// Load ramp `ℓ(t) = ell_rate · t`.
    pub ell_rate: f64,
    pub t_final: f64,
    pub tol_am: f64,
    pub max_am_iters: usize,
}

impl Default for ZeroDimModel {
    /// Parameters for which damage starts near `t ≈ 0.714` and then jumps.
    fn default() -> Self {
        Self {
            a: 1.0,
            eta: 1e-2,
            kappa_e: 0.5,
            kappa_r: 1.0,
            ell_rate: 1.0,
            t_final: 1.0,
            tol_am: 1e-12,
            max_am_iters: 10_000,
        }
    }
}

impl ZeroDimModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.eta > 0.0) {
            return Err(Error::Config("zero-dimensional model needs a > 0 and eta > 0".into()));
        }
        if !(self.kappa_e >= 0.0 && self.kappa_r >= 0.0 && self.t_final > 0.0) {
            return Err(Error::Config("kappa_E, kappa_R must be non-negative and T positive".into()));
        }
        Ok(())
    }

    pub fn ell(&self, t: f64) -> f64 {
        self.ell_rate * t
    }

    pub fn energy(&self, t: f64, u: f64, z: f64) -> f64 {
        0.5 * (z * z + self.eta) * self.a * u * u - self.ell(t) * u + 0.5 * self.kappa_e * z * z
    }

    pub fn dissipation(&self, dz: f64) -> f64 {
        if dz > 0.0 {
            f64::INFINITY
        } else {
            self.kappa_r * dz.abs()
        }
    }

    pub fn solve_u(&self, t: f64, z: f64) -> f64 {
        self.ell(t) / ((z * z + self.eta) * self.a)
    }

    /// `∂_z E`.
    pub fn dz_energy(&self, u: f64, z: f64) -> f64 {
        (self.a * u * u + self.kappa_e) * z
    }
}

/// Exhaustive minimization of `E(t, u, ·) + R(· − z_prev)` on the grid
/// `z_prev, z_prev − h, …` down to `max(0, z_prev − ρ)` (endpoint included).
pub fn brute_force_z_step(t: f64, u: f64, z_prev: f64, rho: f64, model: &ZeroDimModel, grid_step: f64) -> f64 {
    let lo = (z_prev - rho).max(0.0).min(z_prev);
    let n = ((z_prev - lo) / grid_step).floor() as usize;
    let f = |z: f64| model.energy(t, u, z) + model.dissipation(z - z_prev);
    let mut best = (f(z_prev), z_prev);
    for i in 1..=n + 1 {
        let z = if i == n + 1 { lo } else { z_prev - i as f64 * grid_step };
        let v = f(z);
        if v < best.0 {
            best = (v, z);
        }
    }
    best.1
}

/// Outcome of one scalar damage step with its multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarZStep {
    pub z: f64,
    /// Multiplier of `z ≤ z_prev`.
    pub lambda: f64,
    /// Multiplier of `|z − z_prev| ≤ ρ`.
    pub mu: f64,
    pub iterations: usize,
}

/// Projected Newton on the convex quadratic `J(z) = ½(a u² + κ_E) z² −
/// κ_R z` over `[z_prev − ρ, z_prev]`.
pub fn solve_z_scalar(u: f64, z_prev: f64, z_init: f64, rho: f64, model: &ZeroDimModel) -> ScalarZStep {
    let curv = model.a * u * u + model.kappa_e;
    let lo = z_prev - rho;
    let grad = |z: f64| curv * z - model.kappa_r;
    let mut z = z_init.clamp(lo, z_prev);
    let mut iterations = 0;
    for _ in 0..50 {
        iterations += 1;
        let next = if curv > 0.0 {
            (z - grad(z) / curv).clamp(lo, z_prev)
        } else if grad(z) < 0.0 {
            z_prev
        } else {
            lo
        };
        let done = (next - z).abs() <= 1e-15 * (1.0 + z.abs());
        z = next;
        if done {
            break;
        }
    }
    let g = grad(z);
    let lambda = if z >= z_prev { (-g).max(0.0) } else { 0.0 };
    let mu = if rho.is_finite() && z <= lo { g.max(0.0) } else { 0.0 };
    ScalarZStep { z, lambda, mu, iterations }
}

/// The toy system as an incremental problem (one displacement and one
/// damage unknown).
#[derive(Debug, Clone)]
pub struct ZeroDimProblem {
    pub model: ZeroDimModel,
}

impl IncrementalProblem for ZeroDimProblem {
    fn num_z(&self) -> usize {
        1
    }

    fn t_final(&self) -> f64 {
        self.model.t_final
    }

    fn solve_u(&mut self, t: f64, z: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![self.model.solve_u(t, z[0])])
    }

    fn solve_z(
        &mut self,
        _t: f64,
        u: &[f64],
        z_prev: &[f64],
        z_init: &[f64],
        rho: f64,
        _warm: Option<AlState>,
    ) -> Result<ZStep> {
        let s = solve_z_scalar(u[0], z_prev[0], z_init[0], rho, &self.model);
        let g = self.model.dz_energy(u[0], s.z) - self.model.kappa_r;
        let stationarity = (g + s.lambda - s.mu).abs();
        Ok(ZStep {
            z: vec![s.z],
            mu: s.mu,
            xi_norm_dual: s.mu,
            stationarity,
            constraint_active: rho.is_finite() && (z_prev[0] - s.z) >= rho * (1.0 - 1e-12),
            al_iters: 1,
            newton_iters: s.iterations,
            al_state: None,
        })
    }

    fn energy(&self, t: f64, u: &[f64], z: &[f64]) -> Result<f64> {
        Ok(self.model.energy(t, u[0], z[0]))
    }

    fn dissipation(&self, dz: &[f64]) -> f64 {
        self.model.kappa_r * dz[0].abs()
    }

    fn norm_v(&self, dz: &[f64]) -> f64 {
        dz[0].abs()
    }

    fn dual_distance(&self, _t: f64, u: &[f64], z: &[f64]) -> Result<f64> {
        Ok((self.model.dz_energy(u[0], z[0]) - self.model.kappa_r).max(0.0))
    }

    fn reaction(&self, _t: f64, _u: &[f64], _z: &[f64]) -> Result<Option<f64>> {
        Ok(None)
    }

    fn load_power(&self, _t: f64, u: &[f64]) -> Option<f64> {
        Some(-self.model.ell_rate * u[0])
    }

    fn prescribed_displacement(&self, _t: f64) -> Option<f64> {
        None
    }

    fn tol_am(&self) -> f64 {
        self.model.tol_am
    }

    fn max_am_iters(&self) -> usize {
        self.model.max_am_iters
    }
}

/// Full adaptive run of the toy system, storing every iterate.
pub fn run_zero_dim(model: &ZeroDimModel, rho: f64) -> Result<Trace> {
    model.validate()?;
    let mut p = ZeroDimProblem { model: model.clone() };
    let opts = RunOptions {
        snapshots: SnapshotPolicy::All,
        ..RunOptions::default()
    };
    run(&mut p, &[1.0], rho, &opts)
}
