//! Outer loop: alternate minimization at each step and the adaptive time
//! update driven by the size of the damage increment.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::solvers::AlState;

/// Result of one damage solve as seen by the driver.
#[derive(Debug, Clone)]
pub struct ZStep {
    pub z: Vec<f64>,
    pub mu: f64,
    pub xi_norm_dual: f64,
    pub stationarity: f64,
    pub constraint_active: bool,
    pub al_iters: usize,
    pub newton_iters: usize,
    pub al_state: Option<AlState>,
}

/// A separately convex incremental problem in `(u, z)` driven by time.
pub trait IncrementalProblem {
    fn num_z(&self) -> usize;
    fn t_final(&self) -> f64;
    /// Minimizer in `u` for fixed `z`.
    fn solve_u(&mut self, t: f64, z: &[f64]) -> Result<Vec<f64>>;
    /// Minimizer of energy plus dissipation in `z` over
    /// `{z ≤ z_prev, ‖z − z_prev‖_V ≤ rho}`, started from `z_init`.
    fn solve_z(
        &mut self,
        t: f64,
        u: &[f64],
        z_prev: &[f64],
        z_init: &[f64],
        rho: f64,
        warm: Option<AlState>,
    ) -> Result<ZStep>;
    fn energy(&self, t: f64, u: &[f64], z: &[f64]) -> Result<f64>;
    /// Dissipation of a feasible increment.
    fn dissipation(&self, dz: &[f64]) -> f64;
    fn norm_v(&self, dz: &[f64]) -> f64;
    /// Distance of `−D_z E` to the subdifferential of the dissipation at 0.
    fn dual_distance(&self, t: f64, u: &[f64], z: &[f64]) -> Result<f64>;
    /// Reaction force where the displacement is prescribed.
    fn reaction(&self, t: f64, u: &[f64], z: &[f64]) -> Result<Option<f64>>;
    /// `∂_t E(t, u, z)` when the load enters the energy.
    fn load_power(&self, t: f64, u: &[f64]) -> Option<f64>;
    /// Prescribed boundary displacement when the load is a displacement.
    fn prescribed_displacement(&self, t: f64) -> Option<f64>;
    fn u_scale(&self, u: &[f64]) -> f64 {
        u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12)
    }
    fn tol_am(&self) -> f64;
    fn max_am_iters(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub t: f64,
    pub dt: f64,
    pub dz_norm_v: f64,
    pub am_iters: usize,
    pub am_converged: bool,
    pub energy: f64,
    pub r_inc: f64,
    pub reaction: Option<f64>,
    pub dual_distance: f64,
    pub xi_norm: f64,
    pub ball_active: bool,
    pub stationarity: f64,
    pub al_iters: usize,
    pub newton_iters: usize,
    /// `∂_t E` at the step's iterate (load in the energy only).
    pub load_power: Option<f64>,
    /// Prescribed displacement at `t` (displacement loading only).
    pub ubar: Option<f64>,
    /// `E + R` after every half step of the alternate minimization.
    pub am_sequence: Vec<f64>,
    /// Damage updates rejected because they did not lower `E + R`.
    pub rejected_z_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rho: f64,
    pub t_final: f64,
    pub records: Vec<StepRecord>,
    /// Initial damage `z_{-1} = z_0`.
    pub z_initial: Vec<f64>,
    /// First displacement iterate of step 0, standing in for `u_{-1}`.
    pub u_initial: Vec<f64>,
    /// `E(t_0, u_initial, z_initial)`.
    pub initial_energy: f64,
    pub initial_load_power: Option<f64>,
    pub initial_reaction: Option<f64>,
    pub snapshots: BTreeMap<usize, Snapshot>,
}

impl Trace {
    /// Index of the last step, `N(ρ)`.
    pub fn num_steps(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// Damage field of step `k`, with `k = -1` the initial field.
    pub fn z_at(&self, k: isize) -> Option<&[f64]> {
        if k < 0 {
            Some(&self.z_initial)
        } else {
            self.snapshots.get(&(k as usize)).map(|s| s.z.as_slice())
        }
    }

    pub fn u_at(&self, k: isize) -> Option<&[f64]> {
        if k < 0 {
            Some(&self.u_initial)
        } else {
            self.snapshots.get(&(k as usize)).map(|s| s.u.as_slice())
        }
    }
}

/// Which fields to keep in the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SnapshotPolicy {
    None,
    All,
    /// Every `every`-th step, onsets of zero time increments and the last step.
    Stride { every: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub snapshots: SnapshotPolicy,
    pub max_steps: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            snapshots: SnapshotPolicy::Stride { every: 10 },
            max_steps: 1_000_000,
        }
    }
}

/// Outcome of the alternate minimization at one time.
#[derive(Debug, Clone)]
pub struct AmResult {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub last: ZStep,
    pub sequence: Vec<f64>,
    pub rejected: usize,
    pub first_u: Vec<f64>,
}

/// Alternate minimization at time `t` with reference field `z_ref`
/// (`z_{k-1}`), starting from `z_ref` and the displacement `u_start`.
pub fn am_loop<P: IncrementalProblem>(p: &mut P, t: f64, z_ref: &[f64], u_start: Option<&[f64]>, rho: f64) -> Result<AmResult> {
    let tol = p.tol_am();
    let max_iters = p.max_am_iters();
    let mut z = z_ref.to_vec();
    let mut u_prev: Option<Vec<f64>> = u_start.map(|u| u.to_vec());
    let mut warm: Option<AlState> = None;
    let mut sequence = Vec::new();
    let mut rejected = 0;
    let mut first_u = None;
    let mut last = None;
    let mut converged = false;
    let mut iters = 0;
    let mut u = Vec::new();
    while iters < max_iters {
        iters += 1;
        u = p.solve_u(t, &z)?;
        if first_u.is_none() {
            first_u = Some(u.clone());
        }
        let dz_old: Vec<f64> = z.iter().zip(z_ref).map(|(a, b)| a - b).collect();
        let half = p.energy(t, &u, &z)? + p.dissipation(&dz_old);
        sequence.push(half);
        let step = p.solve_z(t, &u, z_ref, &z, rho, warm.take())?;
        let dz_new: Vec<f64> = step.z.iter().zip(z_ref).map(|(a, b)| a - b).collect();
        let full = p.energy(t, &u, &step.z)? + p.dissipation(&dz_new);
        let z_change;
        let noise = 64.0 * f64::EPSILON * half.abs().max(full.abs()).max(1.0);
        if full <= half + noise {
            z_change = step.z.iter().zip(&z).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            z = step.z.clone();
            sequence.push(full);
        } else {
            // the solver made things worse beyond round-off: keep the old iterate
            rejected += 1;
            z_change = 0.0;
            sequence.push(half);
        }
        warm = step.al_state.clone();
        last = Some(step);
        let du = match &u_prev {
            Some(up) => {
                let scale = p.u_scale(&u);
                u.iter().zip(up).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
            }
            None => f64::INFINITY,
        };
        u_prev = Some(u.clone());
        if du <= tol && z_change <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("alternate minimization at t = {t} stopped after {iters} iterations without convergence");
    }
    Ok(AmResult {
        u,
        z,
        iters,
        converged,
        last: last.expect("at least one iteration"),
        sequence,
        rejected,
        first_u: first_u.expect("at least one iteration"),
    })
}

/// `min(t + ρ − ‖Δz‖_V, T)`, with `‖Δz‖_V` clamped to `ρ` against round-off.
pub fn time_update(t: f64, dz_norm_v: f64, rho: f64, t_final: f64) -> Result<f64> {
    if dz_norm_v > rho * (1.0 + 1e-6) {
        return Err(Error::Consistency(format!(
            "damage increment {dz_norm_v:e} exceeds the ball radius {rho:e}"
        )));
    }
    Ok((t + (rho - dz_norm_v.min(rho))).min(t_final))
}

/// Observer called after every completed step.
pub type StepObserver<'a> = dyn FnMut(&StepRecord, &[f64], &[f64]) -> Result<()> + 'a;

enum Schedule<'a> {
    Adaptive,
    Grid(&'a [f64]),
}

/// Adaptive scheme: arc-length ball of radius `rho` and the time update
/// `t_{k+1} = min(t_k + ρ − ‖z_k − z_{k−1}‖_V, T)`.
pub fn run<P: IncrementalProblem>(p: &mut P, z0: &[f64], rho: f64, opts: &RunOptions) -> Result<Trace> {
    run_observed(p, z0, rho, opts, &mut |_, _, _| Ok(()))
}

pub fn run_observed<P: IncrementalProblem>(
    p: &mut P,
    z0: &[f64],
    rho: f64,
    opts: &RunOptions,
    observer: &mut StepObserver<'_>,
) -> Result<Trace> {
    if !(rho > 0.0) {
        return Err(Error::Config(format!("rho must be positive, got {rho}")));
    }
    drive(p, z0, rho, Schedule::Adaptive, opts, observer)
}

/// Alternate minimization on the uniform grid `t_k = kT/n_steps` without
/// the ball constraint.
pub fn run_pure_am<P: IncrementalProblem>(p: &mut P, z0: &[f64], n_steps: usize, opts: &RunOptions) -> Result<Trace> {
    let grid = uniform_grid(p.t_final(), n_steps)?;
    drive(p, z0, f64::INFINITY, Schedule::Grid(&grid), opts, &mut |_, _, _| Ok(()))
}

/// Ball-constrained alternate minimization on a prescribed time grid
/// (`times[0] = 0`, last entry `T`).
pub fn run_on_grid<P: IncrementalProblem>(p: &mut P, z0: &[f64], rho: f64, times: &[f64], opts: &RunOptions) -> Result<Trace> {
    if times.first() != Some(&0.0) || times.last() != Some(&p.t_final()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("time grid must increase from 0 to T".into()));
    }
    drive(p, z0, rho, Schedule::Grid(times), opts, &mut |_, _, _| Ok(()))
}

pub fn uniform_grid(t_final: f64, n_steps: usize) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(Error::Config("need at least one step".into()));
    }
    Ok((0..=n_steps)
        .map(|k| if k == n_steps { t_final } else { t_final * k as f64 / n_steps as f64 })
        .collect())
}

fn drive<P: IncrementalProblem>(
    p: &mut P,
    z0: &[f64],
    rho: f64,
    schedule: Schedule<'_>,
    opts: &RunOptions,
    observer: &mut StepObserver<'_>,
) -> Result<Trace> {
    if z0.len() != p.num_z() {
        return Err(Error::Dimension {
            what: "initial damage",
            got: z0.len(),
            expected: p.num_z(),
        });
    }
    if z0.iter().any(|&z| !(-1e-12..=1.0 + 1e-12).contains(&z)) {
        return Err(Error::Config("initial damage must lie in [0, 1]".into()));
    }
    let t_final = p.t_final();
    let mut trace = Trace {
        rho,
        t_final,
        records: Vec::new(),
        z_initial: z0.to_vec(),
        u_initial: Vec::new(),
        initial_energy: f64::NAN,
        initial_load_power: None,
        initial_reaction: None,
        snapshots: BTreeMap::new(),
    };
    let mut z_prev = z0.to_vec();
    let mut u_prev: Option<Vec<f64>> = None;
    let mut t = 0.0;
    let mut dt = 0.0;
    let mut k = 0usize;
    let mut prev_dt = f64::NAN;
    loop {
        if k > opts.max_steps {
            return Err(Error::Consistency(format!("no termination within {} steps", opts.max_steps)));
        }
        let am = am_loop(p, t, &z_prev, u_prev.as_deref(), rho)?;
        if k == 0 {
            trace.u_initial = am.first_u.clone();
            trace.initial_energy = p.energy(t, &am.first_u, z0)?;
            trace.initial_load_power = p.load_power(t, &am.first_u);
            trace.initial_reaction = p.reaction(t, &am.first_u, z0)?;
        }
        let dz: Vec<f64> = am.z.iter().zip(&z_prev).map(|(a, b)| a - b).collect();
        let dz_norm = p.norm_v(&dz);
        let rec = StepRecord {
            k,
            t,
            dt,
            dz_norm_v: dz_norm,
            am_iters: am.iters,
            am_converged: am.converged,
            energy: p.energy(t, &am.u, &am.z)?,
            r_inc: p.dissipation(&dz),
            reaction: p.reaction(t, &am.u, &am.z)?,
            dual_distance: p.dual_distance(t, &am.u, &am.z)?,
            xi_norm: am.last.xi_norm_dual,
            ball_active: am.last.constraint_active,
            stationarity: am.last.stationarity,
            al_iters: am.last.al_iters,
            newton_iters: am.last.newton_iters,
            load_power: p.load_power(t, &am.u),
            ubar: p.prescribed_displacement(t),
            am_sequence: am.sequence,
            rejected_z_steps: am.rejected,
        };
        let done = t >= t_final;
        let keep = match &opts.snapshots {
            SnapshotPolicy::None => false,
            SnapshotPolicy::All => true,
            SnapshotPolicy::Stride { every } => {
                let onset = dt <= 0.0 && k > 0 && !(prev_dt <= 0.0);
                done || onset || (*every > 0 && k % every == 0)
            }
        };
        observer(&rec, &am.u, &am.z)?;
        if keep {
            trace.snapshots.insert(
                k,
                Snapshot {
                    u: am.u.clone(),
                    z: am.z.clone(),
                },
            );
        }
        trace.records.push(rec);
        if done {
            break;
        }
        // dt is the increment the scheme chose, not a difference of rounded times
        let (t_next, dt_next) = match &schedule {
            Schedule::Adaptive => {
                let t_next = time_update(t, dz_norm, rho, t_final)?;
                let inc = if t_next < t_final { rho - dz_norm.min(rho) } else { t_final - t };
                (t_next, inc)
            }
            Schedule::Grid(times) => (times[k + 1], times[k + 1] - times[k]),
        };
        t = t_next;
        prev_dt = dt;
        dt = dt_next;
        z_prev = am.z;
        u_prev = Some(am.u);
        k += 1;
    }
    Ok(trace)
}
