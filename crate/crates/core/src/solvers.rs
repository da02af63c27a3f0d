//! The two inner minimizations: the linear displacement solve and the
//! damage solve under irreversibility and the arc-length ball.

use std::sync::Arc;

use crate::assembly::{lumped_dual_norm, Discretization, LoadCase, ZQuadratic};
use crate::error::{Error, Result};
use crate::model::{MaterialModel, SchemeParams, VNorm};
use crate::sparse::{CholeskySolver, SparseOperator, SparsityPattern};

/// Displacement solver with the Dirichlet reduction and the symbolic
/// factorization prepared once.
pub struct USolver {
    pattern: Arc<SparsityPattern>,
    gather: Vec<(usize, usize)>,
    chol: CholeskySolver,
}

impl USolver {
    pub fn new(disc: &Discretization, load: &LoadCase) -> Result<Self> {
        let (pattern, gather) = disc.u_pattern().restrict(load.free_dofs());
        let pattern = Arc::new(pattern);
        let chol = CholeskySolver::new(Arc::clone(&pattern))?;
        Ok(Self { pattern, gather, chol })
    }

    /// Minimizer of the energy in `u` for fixed `z` at time `t`.
    pub fn solve(&self, disc: &Discretization, t: f64, z: &[f64], model: &MaterialModel, load: &LoadCase) -> Result<Vec<f64>> {
        let k = disc.assemble_k(z, model)?;
        let mut u = vec![0.0; disc.num_dofs()];
        load.apply_dirichlet(t, &mut u);
        let ku = k.matvec(&u);
        let f = load.external_force(t);
        let mut rhs: Vec<f64> = load.free_dofs().iter().map(|&d| f[d] - ku[d]).collect();
        let kff = k.gather(&self.pattern, &self.gather);
        let fac = self.chol.factor(&kff).map_err(|e| match e {
            Error::Singular(m) => Error::Singular(format!("{m}; check that the boundary sets remove rigid motions")),
            other => other,
        })?;
        fac.solve_in_place(&mut rhs);
        for (&d, v) in load.free_dofs().iter().zip(rhs) {
            u[d] = v;
        }
        Ok(u)
    }
}

/// Multipliers and penalties of the augmented Lagrangian, carried between
/// calls with the same reference field.
#[derive(Debug, Clone, PartialEq)]
pub struct AlState {
    /// Nodal multipliers of `z ≤ z_prev`.
    pub lambda: Vec<f64>,
    /// Multiplier of the ball constraint.
    pub mu: f64,
    /// Box penalty per unit nodal weight.
    pub beta_box: f64,
    pub beta_ball: f64,
    last_box_violation: f64,
    last_ball_violation: f64,
}

impl AlState {
    pub fn new(n: usize, beta_box: f64, beta_ball: f64) -> Self {
        Self {
            lambda: vec![0.0; n],
            mu: 0.0,
            beta_box,
            beta_ball,
            last_box_violation: f64::INFINITY,
            last_ball_violation: f64::INFINITY,
        }
    }
}

const BETA_LIMIT: f64 = 1e30;

/// First-order multiplier update followed by the penalty rule: a penalty
/// grows by `beta_growth` when its constraint violation did not shrink by a
/// factor of four since the previous update.
///
/// `dz = z − z_prev`, `ball_gap = ‖dz‖_V − ρ` (NaN without a ball).
/// Violations below `tol` never grow the penalty.
pub fn al_penalty_update(
    state: &mut AlState,
    dz: &[f64],
    weights: &[f64],
    ball_gap: f64,
    beta_growth: f64,
    tol: f64,
) -> Result<()> {
    for ((l, &d), &w) in state.lambda.iter_mut().zip(dz).zip(weights) {
        *l = (*l + state.beta_box * w * d).max(0.0);
    }
    if ball_gap.is_finite() {
        state.mu = (state.mu + state.beta_ball * ball_gap).max(0.0);
    }
    let box_violation = dz.iter().fold(0.0f64, |m, &d| m.max(d));
    let ball_violation = ball_gap.max(0.0);
    if box_violation > tol && box_violation > 0.25 * state.last_box_violation {
        state.beta_box *= beta_growth;
    }
    if ball_violation > tol && ball_violation > 0.25 * state.last_ball_violation {
        state.beta_ball *= beta_growth;
    }
    state.last_box_violation = box_violation;
    state.last_ball_violation = ball_violation;
    if state.beta_box > BETA_LIMIT || state.beta_ball > BETA_LIMIT {
        return Err(Error::SolverFailure {
            reason: "penalty parameter overflow".into(),
            iterations: 0,
            violation: box_violation.max(ball_violation),
            stationarity: f64::NAN,
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ZSolveReport {
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: f64,
    /// `‖ξ‖_{V*}` of the ball multiplier functional `ξ = −μ D‖·‖_V`.
    pub xi_norm_dual: f64,
    pub norm_dz: f64,
    pub constraint_active: bool,
    /// Dual norm of the KKT residual.
    pub stationarity_residual: f64,
    pub al_iters: usize,
    pub newton_iters: usize,
    /// Nodes that had to be clamped at zero from below.
    pub clamped_below: usize,
    /// Multipliers and penalties for warm-starting the next call.
    pub al_state: AlState,
}

/// Value, gradient and second-order data of `‖d‖_V`.
struct BallTerm {
    norm: f64,
    grad: Vec<f64>,
    /// Diagonal part of the Hessian (`L^α` only).
    diag: Vec<f64>,
    /// Coefficient `c` in `Hess = D + c q qᵀ` (`L^α`) or `G/N + c q qᵀ` (`H¹`).
    rank_one: f64,
}

const EPS_REG: f64 = 1e-30;

fn ball_term(disc: &Discretization, d: &[f64], norm: VNorm) -> BallTerm {
    let w = disc.weights();
    match norm {
        VNorm::Lalpha(alpha) => {
            let p: f64 = d.iter().zip(w).map(|(d, w)| w * d.abs().powf(alpha)).sum::<f64>() + EPS_REG;
            let n = p.powf(1.0 / alpha);
            let scale = p.powf((1.0 - alpha) / alpha);
            let grad = d
                .iter()
                .zip(w)
                .map(|(&d, w)| scale * w * d.abs().powf(alpha - 2.0) * d)
                .collect();
            let diag = d
                .iter()
                .zip(w)
                .map(|(&d, w)| (alpha - 1.0) * scale * w * d.abs().powf(alpha - 2.0))
                .collect();
            BallTerm {
                norm: n,
                grad,
                diag,
                rank_one: -(alpha - 1.0) / n,
            }
        }
        VNorm::H1 => {
            let mut gd = disc.mass().matvec(d);
            for (a, b) in gd.iter_mut().zip(disc.laplacian().matvec(d)) {
                *a += b;
            }
            let n = (gd.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() + EPS_REG).sqrt();
            let grad = gd.iter().map(|v| v / n).collect();
            BallTerm {
                norm: n,
                grad,
                diag: Vec::new(),
                rank_one: -1.0 / n,
            }
        }
    }
}

/// Damage solver: augmented Lagrangian for `z ≤ z_prev` and
/// `‖z − z_prev‖_V ≤ ρ`, with a semismooth Newton method on the
/// augmented Lagrangian and Armijo backtracking.
pub struct ZSolver {
    chol: CholeskySolver,
    h1_metric: SparseOperator,
}

/// Inputs of one damage solve apart from the discretization.
pub struct ZProblem<'a> {
    pub quad: &'a ZQuadratic,
    pub kappa_r: f64,
    pub z_prev: &'a [f64],
    /// Starting iterate; must satisfy `z_init ≤ z_prev`.
    pub z_init: &'a [f64],
    /// Ball radius; `f64::INFINITY` drops the ball constraint.
    pub rho: f64,
}

impl ZSolver {
    pub fn new(disc: &Discretization) -> Result<Self> {
        let chol = CholeskySolver::new(Arc::clone(disc.z_pattern()))?;
        let mut h1_metric = disc.mass().clone();
        h1_metric.axpy(1.0, disc.laplacian());
        Ok(Self { chol, h1_metric })
    }

    /// Initial penalties: ten times the largest curvature per unit weight,
    /// scaled for the ball so that both penalties act on comparable energy
    /// scales.
    pub fn initial_state(&self, disc: &Discretization, quad: &ZQuadratic, params: &SchemeParams) -> AlState {
        let w = disc.weights();
        let s = quad
            .a
            .diagonal()
            .iter()
            .zip(w)
            .fold(0.0f64, |m, (a, w)| m.max(a / w));
        let beta = params.beta0.unwrap_or(10.0 * s);
        let ball = match params.norm {
            VNorm::Lalpha(alpha) => beta * disc.area().powf(1.0 - 2.0 / alpha),
            VNorm::H1 => beta,
        };
        AlState::new(disc.num_nodes(), beta, ball)
    }

    pub fn solve(
        &self,
        disc: &Discretization,
        prob: &ZProblem<'_>,
        params: &SchemeParams,
        warm: Option<AlState>,
    ) -> Result<ZSolveReport> {
        let n = disc.num_nodes();
        let w = disc.weights();
        let zp = prob.z_prev;
        let use_ball = prob.rho.is_finite();
        // warm starts reuse the multipliers only; penalties restart small
        let mut st = self.initial_state(disc, prob.quad, params);
        if let Some(s) = warm.filter(|s| s.lambda.len() == n) {
            st.lambda = s.lambda;
            st.mu = s.mu;
        }
        if !use_ball {
            st.mu = 0.0;
        }
        // linear term including the dissipation −κ_R Σ w (z − z_prev)
        let b_eff: Vec<f64> = prob.quad.b.iter().zip(w).map(|(b, w)| b + prob.kappa_r * w).collect();
        let mut z = prob.z_init.to_vec();
        let tol_inner = 0.1 * params.tol_newton;
        let mut newton_total = 0;
        let mut al_iters = 0;
        let mut converged = false;
        let mut last_stat = f64::INFINITY;
        let mut last_viol = f64::INFINITY;

        while al_iters < params.max_al_iters {
            al_iters += 1;
            let (iters, stat) = self.inner_newton(disc, prob, &b_eff, &st, params, tol_inner, &mut z)?;
            newton_total += iters;
            let d: Vec<f64> = z.iter().zip(zp).map(|(z, p)| z - p).collect();
            let nrm = if use_ball { ball_term(disc, &d, params.norm).norm } else { 0.0 };
            let gap = if use_ball { nrm - prob.rho } else { f64::NEG_INFINITY };
            al_penalty_update(
                &mut st,
                &d,
                w,
                if use_ball { gap } else { f64::NAN },
                params.beta_growth,
                params.tol_constraint,
            )?;
            let box_viol = d.iter().fold(0.0f64, |m, &v| m.max(v));
            let ball_viol = if use_ball { gap.max(0.0) / prob.rho } else { 0.0 };
            let compl_box = d
                .iter()
                .zip(&st.lambda)
                .zip(w)
                .fold(0.0f64, |m, ((&d, l), w)| m.max(l / w * (-d).max(0.0)));
            let compl_ball = if use_ball { st.mu * (-gap).max(0.0) } else { 0.0 };
            last_stat = stat;
            last_viol = box_viol.max(ball_viol);
            if stat <= params.tol_newton
                && last_viol <= params.tol_constraint
                && compl_box.max(compl_ball) <= params.tol_constraint
            {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::SolverFailure {
                reason: "augmented Lagrangian did not converge".into(),
                iterations: al_iters,
                violation: last_viol,
                stationarity: last_stat,
            });
        }

        // exact feasibility: snap the box, then pull back into the ball
        let mut clamped_below = 0;
        for i in 0..n {
            if z[i] > zp[i] || (st.lambda[i] > 0.0 && z[i] > zp[i] - params.tol_constraint) {
                z[i] = zp[i];
            }
            if z[i] < -params.tol_constraint {
                clamped_below += 1;
                z[i] = 0.0;
            }
        }
        if clamped_below > 0 {
            log::warn!("damage solve: clamped {clamped_below} nodes at zero");
        }
        let mut d: Vec<f64> = z.iter().zip(zp).map(|(z, p)| z - p).collect();
        let mut norm_dz = disc.norm_v(&d, params.norm);
        // a positive ball multiplier means the ball is active: put the
        // iterate on the sphere instead of leaving it a tolerance inside
        let on_sphere = st.mu > 0.0 && norm_dz >= prob.rho * (1.0 - 1e-6);
        if use_ball && norm_dz > 0.0 && (norm_dz > prob.rho || on_sphere) {
            let s = prob.rho / norm_dz;
            for i in 0..n {
                z[i] = (zp[i] + s * d[i]).max(zp[i].min(0.0));
                d[i] = z[i] - zp[i];
            }
            norm_dz = disc.norm_v(&d, params.norm);
        }

        let mut r = prob.quad.a.matvec(&z);
        for i in 0..n {
            r[i] += st.lambda[i] - b_eff[i];
        }
        if use_ball && st.mu > 0.0 {
            let bt = ball_term(disc, &d, params.norm);
            for i in 0..n {
                r[i] += st.mu * bt.grad[i];
            }
        }
        let stationarity = lumped_dual_norm(&r, w, params.norm);
        let active = use_ball && norm_dz >= prob.rho * (1.0 - params.tol_constraint);
        Ok(ZSolveReport {
            lambda: st.lambda.clone(),
            mu: st.mu,
            xi_norm_dual: st.mu,
            norm_dz,
            constraint_active: active,
            stationarity_residual: stationarity,
            al_iters,
            newton_iters: newton_total,
            clamped_below,
            al_state: st,
            z,
        })
    }

    /// Semismooth Newton on the augmented Lagrangian for fixed multipliers.
    /// Returns the iteration count and the final dual-norm residual.
    #[allow(clippy::too_many_arguments)]
    fn inner_newton(
        &self,
        disc: &Discretization,
        prob: &ZProblem<'_>,
        b_eff: &[f64],
        st: &AlState,
        params: &SchemeParams,
        tol: f64,
        z: &mut [f64],
    ) -> Result<(usize, f64)> {
        let n = z.len();
        let w = disc.weights();
        let zp = prob.z_prev;
        let use_ball = prob.rho.is_finite();
        let a = &prob.quad.a;

        let eval = |z: &[f64]| -> (f64, Vec<f64>, Vec<bool>, Option<(BallTerm, f64)>) {
            let az = a.matvec(z);
            let mut val = 0.0;
            let mut grad = vec![0.0; n];
            let mut active = vec![false; n];
            for i in 0..n {
                val += 0.5 * z[i] * az[i] - b_eff[i] * z[i];
                grad[i] = az[i] - b_eff[i];
                let bw = st.beta_box * w[i];
                let tb = st.lambda[i] + bw * (z[i] - zp[i]);
                if tb > 0.0 {
                    active[i] = true;
                    grad[i] += tb;
                    val += (tb * tb - st.lambda[i] * st.lambda[i]) / (2.0 * bw);
                } else {
                    val -= st.lambda[i] * st.lambda[i] / (2.0 * bw);
                }
            }
            let ball = if use_ball {
                let d: Vec<f64> = z.iter().zip(zp).map(|(z, p)| z - p).collect();
                let bt = ball_term(disc, &d, params.norm);
                let m = (st.mu + st.beta_ball * (bt.norm - prob.rho)).max(0.0);
                val += (m * m - st.mu * st.mu) / (2.0 * st.beta_ball);
                if m > 0.0 {
                    for i in 0..n {
                        grad[i] += m * bt.grad[i];
                    }
                }
                Some((bt, m))
            } else {
                None
            };
            (val, grad, active, ball)
        };

        let mut iters = 0;
        let (mut val, mut grad, mut active, mut ball) = eval(z);
        let mut res = lumped_dual_norm(&grad, w, params.norm);
        while res > tol && iters < 200 {
            iters += 1;
            let mut s = a.clone();
            let mut diag: Vec<f64> = (0..n)
                .map(|i| if active[i] { st.beta_box * w[i] } else { 0.0 })
                .collect();
            let mut rank_one: Option<(&[f64], f64)> = None;
            if let Some((bt, m)) = &ball {
                if *m > 0.0 {
                    match params.norm {
                        VNorm::Lalpha(_) => {
                            for i in 0..n {
                                diag[i] += m * bt.diag[i];
                            }
                        }
                        VNorm::H1 => s.axpy(m / bt.norm, &self.h1_metric),
                    }
                    rank_one = Some((&bt.grad, st.beta_ball + m * bt.rank_one));
                }
            }
            s.add_diagonal(&diag);
            let fac = self.chol.factor(&s)?;
            let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
            fac.solve_in_place(&mut dir);
            if let Some((q, gamma)) = rank_one {
                if gamma != 0.0 {
                    let x2 = fac.solve(q);
                    let qx1: f64 = q.iter().zip(&dir).map(|(a, b)| a * b).sum();
                    let qx2: f64 = q.iter().zip(&x2).map(|(a, b)| a * b).sum();
                    let c = gamma * qx1 / (1.0 + gamma * qx2);
                    for i in 0..n {
                        dir[i] -= c * x2[i];
                    }
                }
            }
            let mut slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            if !(slope < 0.0) {
                // fall back to a scaled gradient step
                for i in 0..n {
                    dir[i] = -grad[i] / (s.get(i, i));
                }
                slope = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            }
            let mut step = 1.0;
            let mut trial = vec![0.0; n];
            let accepted = loop {
                for i in 0..n {
                    trial[i] = z[i] + step * dir[i];
                }
                let (tv, tg, ta, tb) = eval(&trial);
                let tres = lumped_dual_norm(&tg, w, params.norm);
                // by convexity φ(s) ≤ φ(0) + s φ'(s), so a small enough slope
                // certifies sufficient decrease where values drown in round-off
                let tslope: f64 = tg.iter().zip(&dir).map(|(g, d)| g * d).sum();
                if tv <= val + 1e-4 * step * slope || tslope <= 1e-4 * slope || (step == 1.0 && tres < 0.5 * res) {
                    break Some((tv, tg, ta, tb, tres));
                }
                step *= 0.5;
                if step < 1e-12 {
                    break None;
                }
            };
            match accepted {
                Some((tv, tg, ta, tb, tres)) => {
                    z.copy_from_slice(&trial);
                    val = tv;
                    grad = tg;
                    active = ta;
                    ball = tb;
                    res = tres;
                }
                None => break,
            }
        }
        Ok((iters, res))
    }
}
