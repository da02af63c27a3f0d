//! Runtime certificates for a computed trace: dual distance, complementarity,
//! the discrete energy-dissipation balance, piecewise interpolants in
//! arc-length time, and structural invariants.

use crate::assembly::lumped_dual_norm;
use crate::driver::{StepRecord, Trace};
use crate::error::{Error, Result};
use crate::model::VNorm;

/// `‖(d − κ_R)₊‖` in the dual of the lumped V-norm, where `d` is the nodal
/// density of `D_z E`. The positive part is the pointwise distance of `−d`
/// to `{σ ≥ −κ_R}`. For `H¹` this is the `L²` surrogate.
pub fn dual_distance_from_density(d: &[f64], w: &[f64], kappa_r: f64, norm: VNorm) -> f64 {
    let r: Vec<f64> = d.iter().zip(w).map(|(d, w)| w * (d - kappa_r).max(0.0)).collect();
    lumped_dual_norm(&r, w, norm)
}

/// Dual distance together with whether the value is exact for the norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualDistance {
    pub value: f64,
    pub surrogate: bool,
}

pub fn dual_distance(d: &[f64], w: &[f64], kappa_r: f64, norm: VNorm) -> DualDistance {
    DualDistance {
        value: dual_distance_from_density(d, w, kappa_r, norm),
        surrogate: matches!(norm, VNorm::H1),
    }
}

/// A step at which time advanced although the previous iterate was not
/// locally stable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplementarityViolation {
    pub k: usize,
    pub dt: f64,
    pub previous_distance: f64,
}

/// Flags every step `k ≥ 1` with `dt_k > dt_tol` whose predecessor has a
/// dual distance above `10 · tol_newton`.
pub fn complementarity_check(records: &[StepRecord], tol_newton: f64, dt_tol: f64) -> Vec<ComplementarityViolation> {
    records
        .windows(2)
        .filter(|w| w[1].dt > dt_tol && w[0].dual_distance > 10.0 * tol_newton)
        .map(|w| ComplementarityViolation {
            k: w[1].k,
            dt: w[1].dt,
            previous_distance: w[0].dual_distance,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceRow {
    pub k: usize,
    pub de: f64,
    pub r_inc: f64,
    /// `‖z_k − z_{k−1}‖_V · dist_k`.
    pub visc: f64,
    /// Energy supplied by the load over the step.
    pub work: f64,
    /// `de + r_inc + visc − work`.
    pub residual: f64,
    pub cum_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub rows: Vec<BalanceRow>,
    /// `false` for the displacement-loaded variant, whose work term is the
    /// trapezoidal reaction-force work rather than `∫ ∂_t E`.
    pub exact: bool,
}

impl BalanceReport {
    pub fn cumulative_residual(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_residual)
    }

    pub fn total_abs_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.residual.abs()).sum()
    }
}

/// Step-by-step ledger of the discrete energy-dissipation balance. The
/// work over `[t_{k−1}, t_k]` uses the trapezoidal rule on the affine
/// interpolants: `½(∂_tE_{k−1} + ∂_tE_k) dt_k` when the load enters the
/// energy, `½(F_{k−1} + F_k)(ū_k − ū_{k−1})` under prescribed displacement.
/// Step 0 starts from `E(t_0, u_initial, z_initial)`.
pub fn energy_balance(trace: &Trace) -> Result<BalanceReport> {
    let first = trace.records.first().ok_or_else(|| Error::Consistency("empty trace".into()))?;
    let exact = first.load_power.is_some();
    if !exact && first.reaction.is_none() {
        return Err(Error::UnsupportedMode("trace has neither load power nor reaction".into()));
    }
    let mut rows = Vec::with_capacity(trace.records.len());
    let mut e_prev = trace.initial_energy;
    let mut p_prev = trace.initial_load_power;
    let mut f_prev = trace.initial_reaction;
    let mut ubar_prev = first.ubar;
    let mut cum = 0.0;
    for r in &trace.records {
        let work = if exact {
            let a = p_prev.unwrap_or(0.0);
            let b = r.load_power.unwrap_or(0.0);
            0.5 * (a + b) * r.dt
        } else {
            let (fa, fb) = (f_prev.unwrap_or(0.0), r.reaction.unwrap_or(0.0));
            let du = r.ubar.unwrap_or(0.0) - ubar_prev.unwrap_or(0.0);
            0.5 * (fa + fb) * du
        };
        let de = r.energy - e_prev;
        let visc = r.dz_norm_v * r.dual_distance;
        let residual = de + r.r_inc + visc - work;
        cum += residual;
        rows.push(BalanceRow {
            k: r.k,
            de,
            r_inc: r.r_inc,
            visc,
            work,
            residual,
            cum_residual: cum,
        });
        e_prev = r.energy;
        p_prev = r.load_power;
        f_prev = r.reaction;
        ubar_prev = r.ubar;
    }
    Ok(BalanceReport { rows, exact })
}

/// Largest `|(dt_{k+1} + ‖z_k − z_{k−1}‖_V)/ρ − 1|` over the steps whose
/// successor was not clipped at the final time, and the largest excess
/// above 1 for the clipped last step.
pub fn normalization_error(trace: &Trace) -> (f64, f64) {
    let r = &trace.records;
    let mut interior = 0.0f64;
    let mut last = 0.0f64;
    for k in 0..r.len().saturating_sub(1) {
        let v = (r[k + 1].dt + r[k].dz_norm_v) / trace.rho;
        if k + 2 == r.len() {
            last = last.max(v - 1.0);
        } else {
            interior = interior.max((v - 1.0).abs());
        }
    }
    (interior, last)
}

/// Largest relative increase of `E + R` along the alternate minimization
/// of one step.
pub fn am_monotonicity_violation(rec: &StepRecord) -> f64 {
    let seq = &rec.am_sequence;
    let scale = seq.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    seq.windows(2).fold(0.0f64, |m, w| m.max((w[1] - w[0]) / scale))
}

/// Bounds for [`check_invariants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantTolerances {
    pub z_bound: f64,
    pub irreversibility: f64,
    pub ball: f64,
}

impl Default for InvariantTolerances {
    fn default() -> Self {
        Self {
            z_bound: 1e-8,
            irreversibility: 1e-8,
            ball: 1e-6,
        }
    }
}

/// Structural invariants of a trace. Field checks use the stored
/// snapshots; consecutive pairs need consecutive snapshots.
pub fn check_invariants(trace: &Trace, tol: &InvariantTolerances) -> Vec<String> {
    let mut out = Vec::new();
    let rho = trace.rho;
    let mut t_prev = 0.0;
    for r in &trace.records {
        if rho.is_finite() {
            if r.dz_norm_v > rho * (1.0 + tol.ball) {
                out.push(format!("step {}: increment {} exceeds rho {}", r.k, r.dz_norm_v, rho));
            }
            if r.dt < 0.0 || r.dt > rho * (1.0 + 1e-12) {
                out.push(format!("step {}: dt {} outside [0, rho]", r.k, r.dt));
            }
        } else if r.dt < 0.0 {
            out.push(format!("step {}: negative dt {}", r.k, r.dt));
        }
        if r.t < t_prev {
            out.push(format!("step {}: time decreased", r.k));
        }
        t_prev = r.t;
    }
    match trace.records.last() {
        Some(r) if r.t == trace.t_final => {}
        Some(r) => out.push(format!("final time {} differs from T = {}", r.t, trace.t_final)),
        None => out.push("empty trace".into()),
    }
    for (&k, snap) in &trace.snapshots {
        if let Some(&z) = snap.z.iter().find(|&&z| z < -tol.z_bound || z > 1.0 + tol.z_bound) {
            out.push(format!("step {k}: damage value {z} outside [0, 1]"));
        }
        if let Some(prev) = trace.z_at(k as isize - 1) {
            if let Some((a, b)) = snap.z.iter().zip(prev).find(|(a, b)| **a > **b + tol.irreversibility) {
                out.push(format!("step {k}: damage healed from {b} to {a}"));
            }
        }
    }
    out
}

/// Evaluations of the interpolants at one arc-length time `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolantSample {
    pub s: f64,
    pub t_hat: f64,
    pub t_under: f64,
    pub t_over: f64,
    pub z_hat: Option<Vec<f64>>,
    pub u_hat: Option<Vec<f64>>,
    pub z_under: Option<Vec<f64>>,
    pub z_over: Option<Vec<f64>>,
}

/// Interpolants on the arc-length grid `s_k = kρ`, `k = −1 … N`, with
/// `t_{−1} = t_0`, `z_{−1} = z_0` and `u_{−1} = u_{0,1}`.
pub struct InterpolantView<'a> {
    trace: &'a Trace,
}

impl<'a> InterpolantView<'a> {
    pub fn new(trace: &'a Trace) -> Result<Self> {
        if !trace.rho.is_finite() {
            return Err(Error::Interpolant("arc-length interpolants need a finite rho".into()));
        }
        if trace.records.is_empty() {
            return Err(Error::Interpolant("empty trace".into()));
        }
        Ok(Self { trace })
    }

    /// `S_ρ = N(ρ) ρ`.
    pub fn s_end(&self) -> f64 {
        self.trace.num_steps() as f64 * self.trace.rho
    }

    fn t_of(&self, k: isize) -> f64 {
        self.trace.records[k.max(0) as usize].t
    }

    /// Bracketing index `k` with `s ∈ (s_{k−1}, s_k]` (or `k = −1` at the
    /// left end) and the affine weight of `s_k`.
    fn locate(&self, s: f64) -> Result<(isize, f64)> {
        let rho = self.trace.rho;
        let s_end = self.s_end();
        if !(s >= -rho * (1.0 + 1e-12) && s <= s_end * (1.0 + 1e-12) + 1e-300) {
            return Err(Error::Interpolant(format!("s = {s} outside [{}, {s_end}]", -rho)));
        }
        let mut x = s / rho;
        // grid points given as k·ρ land within a few ulp of an integer
        if (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0) {
            x = x.round();
        }
        let mut k = x.ceil() as isize;
        k = k.clamp(-1, self.trace.num_steps() as isize);
        if k == -1 {
            return Ok((-1, 1.0));
        }
        let theta = (x - (k - 1) as f64).clamp(0.0, 1.0);
        Ok((k, theta))
    }

    pub fn t_hat(&self, s: f64) -> Result<f64> {
        let (k, th) = self.locate(s)?;
        if k == -1 {
            return Ok(self.t_of(-1));
        }
        Ok(self.t_of(k - 1) + th * (self.t_of(k) - self.t_of(k - 1)))
    }

    pub fn sample(&self, s: f64, with_fields: bool) -> Result<InterpolantSample> {
        let (k, th) = self.locate(s)?;
        let (km1, k) = if k == -1 { (-1, -1) } else { (k - 1, k) };
        let t_hat = self.t_of(km1) + th * (self.t_of(k) - self.t_of(km1));
        let on_grid = th == 1.0 || k == -1;
        let t_over = self.t_of(k);
        let t_under = if on_grid { self.t_of(k) } else { self.t_of(km1) };
        let mut out = InterpolantSample {
            s,
            t_hat,
            t_under,
            t_over,
            z_hat: None,
            u_hat: None,
            z_under: None,
            z_over: None,
        };
        if with_fields {
            let missing = |j: isize| Error::Interpolant(format!("no snapshot stored for step {j}"));
            let za = self.trace.z_at(km1).ok_or_else(|| missing(km1))?;
            let zb = self.trace.z_at(k).ok_or_else(|| missing(k))?;
            let ua = self.trace.u_at(km1).ok_or_else(|| missing(km1))?;
            let ub = self.trace.u_at(k).ok_or_else(|| missing(k))?;
            let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
                if on_grid {
                    return b.to_vec();
                }
                a.iter().zip(b).map(|(a, b)| a + th * (b - a)).collect()
            };
            out.z_hat = Some(mix(za, zb));
            out.u_hat = Some(mix(ua, ub));
            out.z_over = Some(zb.to_vec());
            out.z_under = Some(if on_grid { zb.to_vec() } else { za.to_vec() });
        }
        Ok(out)
    }

    /// Derivative of `t̂` on the open interval containing `s`.
    pub fn t_hat_slope(&self, s: f64) -> Result<f64> {
        let (k, _) = self.locate(s)?;
        if k <= 0 {
            return Ok(0.0);
        }
        Ok((self.t_of(k) - self.t_of(k - 1)) / self.trace.rho)
    }

    /// `‖ẑ'‖_V` on the open interval containing `s`, from the records.
    pub fn z_hat_speed(&self, s: f64) -> Result<f64> {
        let (k, _) = self.locate(s)?;
        if k < 0 {
            return Ok(0.0);
        }
        Ok(self.trace.records[k as usize].dz_norm_v / self.trace.rho)
    }
}

/// Ratio of cumulative absolute residuals for `ρ` and `ρ/2`.
pub fn remainder_ratio(coarse: &BalanceReport, fine: &BalanceReport) -> f64 {
    coarse.cumulative_residual().abs() / fine.cumulative_residual().abs()
}

/// `−⟨ξ + D_zE, v⟩ − R(v)` for a direction `v ≤ 0`; non-positive when the
/// lower-bound certificate holds.
pub fn dissipation_certificate_gap(xi: &[f64], dze: &[f64], v: &[f64], w: &[f64], kappa_r: f64) -> f64 {
    let pairing: f64 = xi.iter().zip(dze).zip(v).map(|((x, g), v)| (x + g) * v).sum();
    let r: f64 = kappa_r * v.iter().zip(w).map(|(v, w)| w * v.abs()).sum::<f64>();
    -pairing - r
}
