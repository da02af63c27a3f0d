//! Material data, energy presets, the loading program and scheme parameters.

use crate::error::{Error, Result};

/// Which stored-energy functional is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `κ_E/2 ‖z‖²_{H¹} + ½∫(z²+η)Cε:ε` with dissipation `κ_R∫|v|`.
    Analysis,
    /// Ambrosio–Tortorelli: `½∫(z²+η)Cε:ε + g_c∫(1−z)²/(4θ) + θ|∇z|²`,
    /// no rate-independent dissipation beyond irreversibility.
    At,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    pub young_e: f64,
    pub poisson_nu: f64,
    pub eta: f64,
    pub g_c: f64,
    pub theta: f64,
    pub kappa_e: f64,
    pub kappa_r: f64,
    pub preset: Preset,
}

impl MaterialModel {
    pub fn at(young_e: f64, poisson_nu: f64, g_c: f64, theta: f64, eta: f64) -> Result<Self> {
        let m = Self {
            young_e,
            poisson_nu,
            eta,
            g_c,
            theta,
            kappa_e: 1.0,
            kappa_r: 0.0,
            preset: Preset::At,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn analysis(young_e: f64, poisson_nu: f64, kappa_e: f64, kappa_r: f64, eta: f64) -> Result<Self> {
        let m = Self {
            young_e,
            poisson_nu,
            eta,
            g_c: 1.0,
            theta: 1.0,
            kappa_e,
            kappa_r,
            preset: Preset::Analysis,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        voigt_elasticity(self.young_e, self.poisson_nu)?;
        let positive = [
            ("eta", self.eta),
            ("g_c", self.g_c),
            ("theta", self.theta),
            ("kappa_E", self.kappa_e),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.kappa_r >= 0.0 && self.kappa_r.is_finite()) {
            return Err(Error::Config(format!("kappa_R must be non-negative, got {}", self.kappa_r)));
        }
        Ok(())
    }

    /// Plane-strain Voigt elasticity matrix.
    pub fn elasticity(&self) -> [[f64; 3]; 3] {
        voigt_elasticity(self.young_e, self.poisson_nu).expect("validated material")
    }

    /// Dissipation constant actually in effect (zero for the AT preset).
    pub fn kappa_r_effective(&self) -> f64 {
        match self.preset {
            Preset::At => 0.0,
            Preset::Analysis => self.kappa_r,
        }
    }
}

/// Plane-strain Hooke law in Voigt form `(ε_xx, ε_yy, γ_xy)`.
pub fn voigt_elasticity(young_e: f64, poisson_nu: f64) -> Result<[[f64; 3]; 3]> {
    if !(poisson_nu > -1.0 && poisson_nu < 0.5) {
        return Err(Error::Incompressible(poisson_nu));
    }
    if !(young_e > 0.0 && young_e.is_finite()) {
        return Err(Error::Config(format!("young_E must be positive, got {young_e}")));
    }
    let lambda = young_e * poisson_nu / ((1.0 + poisson_nu) * (1.0 - 2.0 * poisson_nu));
    let mu = young_e / (2.0 * (1.0 + poisson_nu));
    Ok([
        [lambda + 2.0 * mu, lambda, 0.0],
        [lambda, lambda + 2.0 * mu, 0.0],
        [0.0, 0.0, mu],
    ])
}

/// Coercivity constant `γ` with `(Cξ):ξ ≥ γ|ξ|²`: smallest eigenvalue of
/// the Voigt matrix after rescaling the shear row and column by √2.
pub fn coercivity_constant(c: &[[f64; 3]; 3]) -> f64 {
    let s = [1.0, 1.0, std::f64::consts::SQRT_2];
    let mut a = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = s[i] * c[i][j] * s[j];
        }
    }
    symmetric_eigenvalues_3(a).into_iter().fold(f64::INFINITY, f64::min)
}

/// Cyclic Jacobi iteration for a symmetric 3×3 matrix.
fn symmetric_eigenvalues_3(mut a: [[f64; 3]; 3]) -> [f64; 3] {
    for _ in 0..50 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 * (a[0][0].powi(2) + a[1][1].powi(2) + a[2][2].powi(2)) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    [a[0][0], a[1][1], a[2][2]]
}

pub fn degradation(z: f64, eta: f64) -> f64 {
    z * z + eta
}

/// Fracture (or regularisation) energy density at one point.
pub fn fracture_density(z: f64, grad_z: [f64; 2], model: &MaterialModel) -> f64 {
    let g2 = grad_z[0] * grad_z[0] + grad_z[1] * grad_z[1];
    local_fracture_density(z, model) + gradient_coefficient(model) * g2
}

/// Gradient-free part of [`fracture_density`].
pub fn local_fracture_density(z: f64, model: &MaterialModel) -> f64 {
    match model.preset {
        Preset::At => model.g_c * (1.0 - z).powi(2) / (4.0 * model.theta),
        Preset::Analysis => 0.5 * model.kappa_e * z * z,
    }
}

/// Coefficient `c` of the gradient part `c |∇z|²` of [`fracture_density`].
pub fn gradient_coefficient(model: &MaterialModel) -> f64 {
    match model.preset {
        Preset::At => model.g_c * model.theta,
        Preset::Analysis => 0.5 * model.kappa_e,
    }
}

/// Value of the dissipation potential on a nodal increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dissipation {
    Finite(f64),
    /// The increment heals damage somewhere (`dz > tol`).
    Infeasible,
}

impl Dissipation {
    pub fn value(self) -> Option<f64> {
        match self {
            Dissipation::Finite(v) => Some(v),
            Dissipation::Infeasible => None,
        }
    }
}

pub fn dissipation_r(dz: &[f64], model: &MaterialModel, weights: &[f64], tol: f64) -> Dissipation {
    if dz.iter().any(|&v| v > tol) {
        return Dissipation::Infeasible;
    }
    let k = model.kappa_r_effective();
    Dissipation::Finite(k * dz.iter().zip(weights).map(|(v, w)| w * v.abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// Prescribed displacement `ū(t) = amplitude · t / T` on the loaded nodes.
    DirichletRamp,
    /// Uniform boundary traction `amplitude · t / T` (N/mm) on the loaded edge.
    TractionRamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProgram {
    pub mode: LoadMode,
    pub amplitude: f64,
    pub t_final: f64,
    pub direction: [f64; 2],
}

impl LoadProgram {
    pub fn new(mode: LoadMode, amplitude: f64, t_final: f64, direction: [f64; 2]) -> Result<Self> {
        let p = Self {
            mode,
            amplitude,
            t_final,
            direction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("final time must be positive, got {}", self.t_final)));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::Config("load amplitude must be finite".into()));
        }
        self.component()?;
        Ok(())
    }

    /// Index of the loaded displacement component. Only axis-aligned unit
    /// directions are supported.
    pub fn component(&self) -> Result<usize> {
        match self.direction {
            [x, y] if (x.abs() - 1.0).abs() < 1e-12 && y == 0.0 => Ok(0),
            [x, y] if (y.abs() - 1.0).abs() < 1e-12 && x == 0.0 => Ok(1),
            d => Err(Error::Config(format!("load direction {d:?} must be an axis unit vector"))),
        }
    }

    /// Signed unit along the loaded component.
    pub fn sign(&self) -> f64 {
        let c = self.component().expect("validated load");
        self.direction[c].signum()
    }

    pub fn ramp(&self, t: f64) -> f64 {
        t / self.t_final
    }

    /// Prescribed displacement magnitude along `direction` at time `t`.
    pub fn ubar(&self, t: f64) -> f64 {
        self.amplitude * self.ramp(t)
    }

    /// Traction magnitude at time `t`.
    pub fn traction(&self, t: f64) -> f64 {
        self.amplitude * self.ramp(t)
    }

    pub fn rate(&self) -> f64 {
        self.amplitude / self.t_final
    }
}

/// Norm measuring damage increments in the arc-length constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VNorm {
    Lalpha(f64),
    H1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    pub rho: f64,
    pub norm: VNorm,
    pub tol_am: f64,
    pub tol_newton: f64,
    pub tol_constraint: f64,
    pub max_am_iters: usize,
    pub max_al_iters: usize,
    /// Initial AL penalty; `None` selects ten times the objective scale.
    pub beta0: Option<f64>,
    pub beta_growth: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            rho: 0.01,
            norm: VNorm::Lalpha(4.0),
            tol_am: 1e-6,
            tol_newton: 1e-8,
            tol_constraint: 1e-8,
            max_am_iters: 500,
            max_al_iters: 50,
            beta0: None,
            beta_growth: 10.0,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if let VNorm::Lalpha(a) = self.norm {
            if !(a >= 2.0 && a.is_finite()) {
                return Err(Error::Config(format!("alpha must be at least 2, got {a}")));
            }
        }
        for (name, v) in [
            ("tol_am", self.tol_am),
            ("tol_newton", self.tol_newton),
            ("tol_constraint", self.tol_constraint),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_am_iters == 0 || self.max_al_iters == 0 {
            return Err(Error::Config("iteration caps must be positive".into()));
        }
        if let Some(b) = self.beta0 {
            if !(b > 0.0) {
                return Err(Error::Config(format!("beta0 must be positive, got {b}")));
            }
        }
        if !(self.beta_growth > 1.0) {
            return Err(Error::Config(format!("beta_growth must exceed 1, got {}", self.beta_growth)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hooke_decoupled_for_zero_poisson() {
        let c = voigt_elasticity(1.0, 0.0).unwrap();
        assert_eq!(c, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]]);
        assert!((coercivity_constant(&c) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hooke_matches_lame_constants() {
        let c = voigt_elasticity(100.0, 0.3).unwrap();
        let lambda = 100.0 * 0.3 / (1.3 * 0.4);
        let mu = 100.0 / 2.6;
        assert!((c[0][0] - (lambda + 2.0 * mu)).abs() < 1e-12);
        assert!((c[0][1] - lambda).abs() < 1e-12);
        assert!((c[2][2] - mu).abs() < 1e-12);
        // eigenvalues of the rescaled matrix are 2λ+2μ, 2μ, 2μ
        assert!((coercivity_constant(&c) - 2.0 * mu).abs() < 1e-10);
    }

    #[test]
    fn lshape_material_is_coercive() {
        let c = voigt_elasticity(25840.0, 0.18).unwrap();
        assert!(coercivity_constant(&c) > 0.0);
        assert!(matches!(voigt_elasticity(1.0, 0.5), Err(Error::Incompressible(_))));
    }

    #[test]
    fn degradation_values() {
        assert_eq!(degradation(0.0, 1e-4), 1e-4);
        assert!((degradation(1.0, 1e-4) - 1.0001).abs() < 1e-15);
        assert!((degradation(0.5, 0.01) - 0.26).abs() < 1e-15);
    }

    #[test]
    fn fracture_density_values() {
        let at = MaterialModel::at(100.0, 0.3, 1.0, 0.025, 1e-4).unwrap();
        assert_eq!(fracture_density(1.0, [0.0, 0.0], &at), 0.0);
        assert!((fracture_density(0.0, [0.0, 0.0], &at) - 10.0).abs() < 1e-12);
        let an = MaterialModel::analysis(1.0, 0.0, 2.0, 1.0, 1e-4).unwrap();
        assert!((fracture_density(1.0, [0.0, 0.0], &an) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dissipation_values() {
        let an = MaterialModel::analysis(1.0, 0.0, 1.0, 1.0, 1e-4).unwrap();
        let w = [0.25; 4];
        assert_eq!(dissipation_r(&[0.0; 4], &an, &w, 1e-8), Dissipation::Finite(0.0));
        let v = dissipation_r(&[-0.1; 4], &an, &w, 1e-8).value().unwrap();
        assert!((v - 0.1).abs() < 1e-15);
        assert_eq!(dissipation_r(&[0.0, 0.1, 0.0, 0.0], &an, &w, 1e-8), Dissipation::Infeasible);
        let at = MaterialModel::at(1.0, 0.0, 1.0, 1.0, 1e-4).unwrap();
        assert_eq!(dissipation_r(&[-0.1; 4], &at, &w, 1e-8), Dissipation::Finite(0.0));
    }

    #[test]
    fn load_direction_must_be_axis_aligned() {
        assert!(LoadProgram::new(LoadMode::DirichletRamp, 0.3, 1.0, [1.0, 0.0]).is_ok());
        assert!(LoadProgram::new(LoadMode::DirichletRamp, 0.3, 1.0, [0.6, 0.8]).is_err());
        assert!(LoadProgram::new(LoadMode::DirichletRamp, 0.3, 0.0, [1.0, 0.0]).is_err());
    }
}
