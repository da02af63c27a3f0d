//! Q1 evaluation and assembly: energies, gradients, stiffness, z-Hessian,
//! field norms and reaction forces.
//!
//! The degradation is interpolated nodally, `Σ_a N_a z_a² + η`, and the
//! gradient-free part of the fracture energy uses the lumped weights. Both
//! keep the z-Hessian a diagonal plus the scalar Laplacian, so that the
//! bound `z ≥ 0` is not violated by positive off-diagonal mass entries.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::mesh::{norm_quadrature_weights, Mesh};
use crate::model::{gradient_coefficient, local_fracture_density, LoadMode, LoadProgram, MaterialModel, Preset, VNorm};
use crate::quadrature::{gauss_legendre, q1_derivatives, q1_shape};
use crate::sparse::{SparseOperator, SparsityPattern};

/// Shape data at one quadrature point of one element.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub n: [f64; 4],
    /// Physical gradients `[dN/dx, dN/dy]`.
    pub dn: [[f64; 2]; 4],
    /// Quadrature weight times Jacobian determinant.
    pub wdet: f64,
}

/// Precomputed element data, sparsity patterns and constant operators.
pub struct Discretization {
    mesh: Mesh,
    order: usize,
    nq: usize,
    qp: Vec<QuadPoint>,
    weights: Vec<f64>,
    u_pattern: Arc<SparsityPattern>,
    z_pattern: Arc<SparsityPattern>,
    u_pos: Vec<[usize; 64]>,
    z_pos: Vec<[usize; 16]>,
    mass: SparseOperator,
    laplacian: SparseOperator,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("nodes", &self.mesh.num_nodes())
            .field("elements", &self.mesh.num_elements())
            .field("order", &self.order)
            .finish()
    }
}

/// Voigt strain `(ε_xx, ε_yy, γ_xy)` of the element displacement `ue`.
fn strain(q: &QuadPoint, ue: &[f64; 8]) -> [f64; 3] {
    let mut e = [0.0; 3];
    for a in 0..4 {
        let [dx, dy] = q.dn[a];
        e[0] += dx * ue[2 * a];
        e[1] += dy * ue[2 * a + 1];
        e[2] += dy * ue[2 * a] + dx * ue[2 * a + 1];
    }
    e
}

fn c_times(c: &[[f64; 3]; 3], e: &[f64; 3]) -> [f64; 3] {
    let mut s = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i] += c[i][j] * e[j];
        }
    }
    s
}

/// Elastic density `½ (Cε):ε`.
fn psi(c: &[[f64; 3]; 3], e: &[f64; 3]) -> f64 {
    let s = c_times(c, e);
    0.5 * (s[0] * e[0] + s[1] * e[1] + s[2] * e[2])
}

impl Discretization {
    /// `order` is the number of Gauss points per direction (2, 3 or 4).
    pub fn new(mesh: Mesh, order: usize) -> Result<Self> {
        if !(2..=4).contains(&order) {
            return Err(Error::Config(format!("quadrature order {order} not in 2..=4")));
        }
        let (gp, gw) = gauss_legendre(order);
        let nq = order * order;
        let mut qp = Vec::with_capacity(mesh.num_elements() * nq);
        for e in 0..mesh.num_elements() {
            let xe = mesh.element_coords(e);
            for (i, &eta) in gp.iter().enumerate() {
                for (j, &xi) in gp.iter().enumerate() {
                    let dref = q1_derivatives(xi, eta);
                    let mut jac = [[0.0; 2]; 2];
                    for a in 0..4 {
                        for r in 0..2 {
                            jac[r][0] += xe[a][r] * dref[a][0];
                            jac[r][1] += xe[a][r] * dref[a][1];
                        }
                    }
                    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                    let mut dn = [[0.0; 2]; 4];
                    for a in 0..4 {
                        dn[a][0] = (jac[1][1] * dref[a][0] - jac[1][0] * dref[a][1]) / det;
                        dn[a][1] = (-jac[0][1] * dref[a][0] + jac[0][0] * dref[a][1]) / det;
                    }
                    qp.push(QuadPoint {
                        n: q1_shape(xi, eta),
                        dn,
                        wdet: gw[i] * gw[j] * det,
                    });
                }
            }
        }

        let n = mesh.num_nodes();
        let z_blocks: Vec<[usize; 4]> = mesh.elements().to_vec();
        let u_blocks: Vec<[usize; 8]> = z_blocks
            .iter()
            .map(|c| {
                let mut d = [0; 8];
                for a in 0..4 {
                    d[2 * a] = 2 * c[a];
                    d[2 * a + 1] = 2 * c[a] + 1;
                }
                d
            })
            .collect();
        let z_pattern = Arc::new(SparsityPattern::from_blocks(n, z_blocks.iter().map(|b| &b[..])));
        let u_pattern = Arc::new(SparsityPattern::from_blocks(2 * n, u_blocks.iter().map(|b| &b[..])));
        let z_pos = z_blocks
            .iter()
            .map(|b| {
                let mut p = [0; 16];
                for a in 0..4 {
                    for c in 0..4 {
                        p[4 * a + c] = z_pattern.position(b[a], b[c]).expect("element block in pattern");
                    }
                }
                p
            })
            .collect();
        let u_pos = u_blocks
            .iter()
            .map(|b| {
                let mut p = [0; 64];
                for a in 0..8 {
                    for c in 0..8 {
                        p[8 * a + c] = u_pattern.position(b[a], b[c]).expect("element block in pattern");
                    }
                }
                p
            })
            .collect();
        let weights = norm_quadrature_weights(&mesh);
        let mut disc = Self {
            mass: SparseOperator::zeros(Arc::clone(&z_pattern)),
            laplacian: SparseOperator::zeros(Arc::clone(&z_pattern)),
            mesh,
            order,
            nq,
            qp,
            weights,
            u_pattern,
            z_pattern,
            u_pos,
            z_pos,
        };
        disc.mass = disc.assemble_scalar(|_, _| (1.0, 0.0));
        disc.laplacian = disc.assemble_scalar(|_, _| (0.0, 1.0));
        Ok(disc)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.mesh.num_nodes()
    }

    /// Lumped nodal weights `∫ N_i`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn u_pattern(&self) -> &Arc<SparsityPattern> {
        &self.u_pattern
    }

    pub fn z_pattern(&self) -> &Arc<SparsityPattern> {
        &self.z_pattern
    }

    /// Consistent mass matrix.
    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    /// Stiffness matrix of the scalar Laplacian.
    pub fn laplacian(&self) -> &SparseOperator {
        &self.laplacian
    }

    pub fn quad_points(&self, e: usize) -> &[QuadPoint] {
        &self.qp[e * self.nq..(e + 1) * self.nq]
    }

    fn element_u(&self, e: usize, u: &[f64]) -> [f64; 8] {
        let c = self.mesh.elements()[e];
        let mut ue = [0.0; 8];
        for a in 0..4 {
            ue[2 * a] = u[2 * c[a]];
            ue[2 * a + 1] = u[2 * c[a] + 1];
        }
        ue
    }

    fn element_z(&self, e: usize, z: &[f64]) -> [f64; 4] {
        let c = self.mesh.elements()[e];
        [z[c[0]], z[c[1]], z[c[2]], z[c[3]]]
    }

    /// Nodally interpolated degradation `Σ_a N_a z_a² + η`.
    fn degradation_at(q: &QuadPoint, ze: &[f64; 4], eta: f64) -> f64 {
        (0..4).map(|a| q.n[a] * ze[a] * ze[a]).sum::<f64>() + eta
    }

    /// `m_i = ∫ ψ N_i` for the quadrature-point densities `dens`.
    fn nodal_elastic_moments(&self, dens: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.num_nodes()];
        for e in 0..self.mesh.num_elements() {
            let conn = self.mesh.elements()[e];
            for (k, q) in self.quad_points(e).iter().enumerate() {
                let d = dens[e * self.nq + k] * q.wdet;
                for a in 0..4 {
                    m[conn[a]] += d * q.n[a];
                }
            }
        }
        m
    }

    /// Assembles `∫ m N_i N_j + l ∇N_i·∇N_j` with coefficients `(m, l)`
    /// given per (element, quadrature point).
    fn assemble_scalar(&self, coef: impl Fn(usize, usize) -> (f64, f64)) -> SparseOperator {
        let mut op = SparseOperator::zeros(Arc::clone(&self.z_pattern));
        let vals = op.values_mut();
        for e in 0..self.mesh.num_elements() {
            let pos = &self.z_pos[e];
            for (k, q) in self.quad_points(e).iter().enumerate() {
                let (m, l) = coef(e, k);
                for a in 0..4 {
                    for b in 0..4 {
                        let v = m * q.n[a] * q.n[b] + l * (q.dn[a][0] * q.dn[b][0] + q.dn[a][1] * q.dn[b][1]);
                        vals[pos[4 * a + b]] += v * q.wdet;
                    }
                }
            }
        }
        op
    }

    fn check_u(&self, u: &[f64]) -> Result<()> {
        check_len("displacement", u.len(), self.num_dofs())
    }

    fn check_z(&self, z: &[f64]) -> Result<()> {
        check_len("damage", z.len(), self.num_nodes())
    }

    /// Elastic density `½(Cε):ε` at every quadrature point.
    pub fn elastic_densities(&self, u: &[f64], model: &MaterialModel) -> Result<Vec<f64>> {
        self.check_u(u)?;
        let c = model.elasticity();
        let mut out = Vec::with_capacity(self.qp.len());
        for e in 0..self.mesh.num_elements() {
            let ue = self.element_u(e, u);
            for q in self.quad_points(e) {
                out.push(psi(&c, &strain(q, &ue)));
            }
        }
        Ok(out)
    }

    /// `½∫(z²+η)(Cε):ε` with nodally interpolated `z²`.
    pub fn elastic_energy(&self, u: &[f64], z: &[f64], model: &MaterialModel) -> Result<f64> {
        self.check_z(z)?;
        let dens = self.elastic_densities(u, model)?;
        let mut sum = 0.0;
        for e in 0..self.mesh.num_elements() {
            let ze = self.element_z(e, z);
            for (k, q) in self.quad_points(e).iter().enumerate() {
                sum += Self::degradation_at(q, &ze, model.eta) * dens[e * self.nq + k] * q.wdet;
            }
        }
        Ok(sum)
    }

    /// Fracture (AT) or regularisation (analysis) part of the energy.
    pub fn fracture_energy(&self, z: &[f64], model: &MaterialModel) -> Result<f64> {
        self.check_z(z)?;
        let local: f64 = z.iter().zip(&self.weights).map(|(&z, w)| w * local_fracture_density(z, model)).sum();
        let grad = gradient_coefficient(model) * self.laplacian.quad_form(z);
        Ok(local + grad)
    }

    /// Stored energy minus the work of the external load at time `t`.
    pub fn total_energy(&self, t: f64, u: &[f64], z: &[f64], model: &MaterialModel, load: &LoadCase) -> Result<f64> {
        let ext = load.external_force(t);
        let work: f64 = ext.iter().zip(u).map(|(f, u)| f * u).sum();
        Ok(self.elastic_energy(u, z, model)? + self.fracture_energy(z, model)? - work)
    }

    /// `D_u E = K(z) u − ℓ(t)` on all dofs.
    pub fn grad_u(&self, t: f64, u: &[f64], z: &[f64], model: &MaterialModel, load: &LoadCase) -> Result<Vec<f64>> {
        self.check_u(u)?;
        self.check_z(z)?;
        let c = model.elasticity();
        let mut g = load.external_force(t);
        for v in &mut g {
            *v = -*v;
        }
        for e in 0..self.mesh.num_elements() {
            let ue = self.element_u(e, u);
            let ze = self.element_z(e, z);
            let conn = self.mesh.elements()[e];
            for q in self.quad_points(e) {
                let s = c_times(&c, &strain(q, &ue));
                let f = Self::degradation_at(q, &ze, model.eta) * q.wdet;
                for a in 0..4 {
                    let [dx, dy] = q.dn[a];
                    g[2 * conn[a]] += f * (dx * s[0] + dy * s[2]);
                    g[2 * conn[a] + 1] += f * (dy * s[1] + dx * s[2]);
                }
            }
        }
        Ok(g)
    }

    /// `D_z E` as an assembled vector `g` and its nodal density `d = g / w`.
    pub fn grad_z(&self, u: &[f64], z: &[f64], model: &MaterialModel) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_z(z)?;
        let moments = self.nodal_elastic_moments(&self.elastic_densities(u, model)?);
        let mut g = self.laplacian.matvec(z);
        let c2 = 2.0 * gradient_coefficient(model);
        for i in 0..g.len() {
            let local = match model.preset {
                Preset::At => -model.g_c * (1.0 - z[i]) / (2.0 * model.theta),
                Preset::Analysis => model.kappa_e * z[i],
            };
            g[i] = c2 * g[i] + self.weights[i] * local + 2.0 * z[i] * moments[i];
        }
        let d = g.iter().zip(&self.weights).map(|(g, w)| g / w).collect();
        Ok((g, d))
    }

    /// Stiffness `K(z)` with coefficient `(z²+η)` on all dofs.
    pub fn assemble_k(&self, z: &[f64], model: &MaterialModel) -> Result<SparseOperator> {
        self.check_z(z)?;
        let c = model.elasticity();
        let mut op = SparseOperator::zeros(Arc::clone(&self.u_pattern));
        let vals = op.values_mut();
        for e in 0..self.mesh.num_elements() {
            let ze = self.element_z(e, z);
            let pos = &self.u_pos[e];
            for q in self.quad_points(e) {
                let f = Self::degradation_at(q, &ze, model.eta) * q.wdet;
                // CB for each node: 3×2 blocks
                let mut cb = [[[0.0; 2]; 3]; 4];
                for a in 0..4 {
                    let [dx, dy] = q.dn[a];
                    let bx = [dx, 0.0, dy];
                    let by = [0.0, dy, dx];
                    for i in 0..3 {
                        cb[a][i][0] = c[i][0] * bx[0] + c[i][1] * bx[1] + c[i][2] * bx[2];
                        cb[a][i][1] = c[i][0] * by[0] + c[i][1] * by[1] + c[i][2] * by[2];
                    }
                }
                for a in 0..4 {
                    let [dx, dy] = q.dn[a];
                    let bt = [[dx, 0.0, dy], [0.0, dy, dx]];
                    for b in 0..4 {
                        for i in 0..2 {
                            for j in 0..2 {
                                let v = bt[i][0] * cb[b][0][j] + bt[i][1] * cb[b][1][j] + bt[i][2] * cb[b][2][j];
                                vals[pos[8 * (2 * a + i) + 2 * b + j]] += f * v;
                            }
                        }
                    }
                }
            }
        }
        Ok(op)
    }

    /// The z-part of the energy for fixed `u` as an exact quadratic
    /// `½ zᵀ A z − bᵀ z + c`.
    pub fn z_quadratic(&self, u: &[f64], model: &MaterialModel) -> Result<ZQuadratic> {
        let dens = self.elastic_densities(u, model)?;
        let moments = self.nodal_elastic_moments(&dens);
        let mut constant: f64 = self.qp.iter().zip(&dens).map(|(q, d)| model.eta * d * q.wdet).sum();
        let mut a = self.laplacian.clone();
        a.scale(2.0 * gradient_coefficient(model));
        let local_curv = match model.preset {
            Preset::At => model.g_c / (2.0 * model.theta),
            Preset::Analysis => model.kappa_e,
        };
        let diag: Vec<f64> = moments.iter().zip(&self.weights).map(|(m, w)| 2.0 * m + local_curv * w).collect();
        a.add_diagonal(&diag);
        let b = match model.preset {
            Preset::At => {
                constant += model.g_c / (4.0 * model.theta) * self.area();
                self.weights.iter().map(|w| local_curv * w).collect()
            }
            Preset::Analysis => vec![0.0; self.num_nodes()],
        };
        Ok(ZQuadratic { a, b, constant })
    }

    /// `‖dz‖_V` with lumped nodal quadrature for `L^α` and the consistent
    /// `M + K_lap` form for `H¹`.
    pub fn norm_v(&self, dz: &[f64], norm: VNorm) -> f64 {
        match norm {
            VNorm::Lalpha(alpha) => lumped_lalpha(dz, &self.weights, alpha),
            VNorm::H1 => (self.mass.quad_form(dz) + self.laplacian.quad_form(dz)).max(0.0).sqrt(),
        }
    }

    /// `‖dz_h‖_{L^α}` of the bilinear interpolant by Gauss quadrature with
    /// `order` points per direction.
    pub fn lalpha_norm_gauss(&self, dz: &[f64], alpha: f64, order: usize) -> Result<f64> {
        self.check_z(dz)?;
        if !(alpha >= 1.0) {
            return Err(Error::Config(format!("alpha {alpha} below 1")));
        }
        let (gp, gw) = gauss_legendre(order);
        let mut sum = 0.0;
        for e in 0..self.mesh.num_elements() {
            let xe = self.mesh.element_coords(e);
            let ze = self.element_z(e, dz);
            for (i, &eta) in gp.iter().enumerate() {
                for (j, &xi) in gp.iter().enumerate() {
                    let n = q1_shape(xi, eta);
                    let d = q1_derivatives(xi, eta);
                    let mut jac = [[0.0; 2]; 2];
                    for a in 0..4 {
                        for r in 0..2 {
                            jac[r][0] += xe[a][r] * d[a][0];
                            jac[r][1] += xe[a][r] * d[a][1];
                        }
                    }
                    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                    let v: f64 = (0..4).map(|a| n[a] * ze[a]).sum();
                    sum += gw[i] * gw[j] * det * v.abs().powf(alpha);
                }
            }
        }
        Ok(sum.powf(1.0 / alpha))
    }

    /// Reaction force along the load direction summed over the "loaded"
    /// nodes. Only defined under prescribed displacement.
    pub fn reaction_force(&self, u: &[f64], z: &[f64], model: &MaterialModel, load: &LoadCase) -> Result<f64> {
        if load.program.mode != LoadMode::DirichletRamp {
            return Err(Error::UnsupportedMode("reaction force needs prescribed displacement".into()));
        }
        let r = self.grad_u(0.0, u, z, model, load)?;
        Ok(load.sign() * load.loaded_dofs.iter().map(|&d| r[d]).sum::<f64>())
    }

    /// Reaction along the load direction summed over the "clamped" nodes.
    pub fn clamped_reaction(&self, t: f64, u: &[f64], z: &[f64], model: &MaterialModel, load: &LoadCase) -> Result<f64> {
        let r = self.grad_u(t, u, z, model, load)?;
        Ok(load.sign() * load.clamped_dofs.iter().map(|&d| r[d]).sum::<f64>())
    }
}

/// `(Σ w_i |v_i|^α)^{1/α}`.
pub fn lumped_lalpha(v: &[f64], w: &[f64], alpha: f64) -> f64 {
    let s: f64 = v.iter().zip(w).map(|(v, w)| w * v.abs().powf(alpha)).sum();
    s.powf(1.0 / alpha)
}

/// Dual norm of a nodal functional `r` under the lumped V-norm: the
/// `L^{α'}` norm of the density `r / w` for `L^α`, and the `L²` norm of the
/// density for `H¹` (a surrogate; the exact `H¹` dual norm is not lumped).
pub fn lumped_dual_norm(r: &[f64], w: &[f64], norm: VNorm) -> f64 {
    match norm {
        VNorm::Lalpha(alpha) => {
            let conj = alpha / (alpha - 1.0);
            let s: f64 = r.iter().zip(w).map(|(r, w)| w * (r / w).abs().powf(conj)).sum();
            s.powf(1.0 / conj)
        }
        VNorm::H1 => r.iter().zip(w).map(|(r, w)| r * r / w).sum::<f64>().sqrt(),
    }
}

/// Exact quadratic form of the z-energy for frozen displacement.
#[derive(Debug, Clone)]
pub struct ZQuadratic {
    pub a: SparseOperator,
    pub b: Vec<f64>,
    pub constant: f64,
}

impl ZQuadratic {
    pub fn value(&self, z: &[f64]) -> f64 {
        let az = self.a.matvec(z);
        let mut v = self.constant;
        for i in 0..z.len() {
            v += 0.5 * z[i] * az[i] - self.b[i] * z[i];
        }
        v
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = self.a.matvec(z);
        for (g, b) in g.iter_mut().zip(&self.b) {
            *g -= b;
        }
        g
    }
}

/// Boundary conditions and external load assembled for one mesh.
#[derive(Debug, Clone)]
pub struct LoadCase {
    pub program: LoadProgram,
    fixed: Vec<usize>,
    fixed_ramped: Vec<bool>,
    free: Vec<usize>,
    loaded_dofs: Vec<usize>,
    clamped_dofs: Vec<usize>,
    f_ref: Vec<f64>,
}

impl LoadCase {
    /// Clamps both components on "clamped"; on "loaded" either prescribes
    /// the component along the load direction (displacement ramp) or
    /// applies a uniform traction on the loaded boundary edges.
    pub fn new(disc: &Discretization, program: LoadProgram) -> Result<Self> {
        program.validate()?;
        let mesh = disc.mesh();
        let comp = program.component()?;
        let clamped = mesh.boundary_set("clamped");
        let loaded = mesh.boundary_set("loaded");
        if clamped.is_empty() || loaded.is_empty() {
            return Err(Error::Config("mesh needs non-empty \"clamped\" and \"loaded\" sets".into()));
        }
        let ndof = disc.num_dofs();
        let mut kind = vec![0u8; ndof];
        for &n in clamped {
            kind[2 * n] = 1;
            kind[2 * n + 1] = 1;
        }
        let loaded_dofs: Vec<usize> = loaded.iter().map(|&n| 2 * n + comp).collect();
        let clamped_dofs: Vec<usize> = clamped.iter().map(|&n| 2 * n + comp).collect();
        let mut f_ref = vec![0.0; ndof];
        match program.mode {
            LoadMode::DirichletRamp => {
                for &d in &loaded_dofs {
                    if kind[d] == 1 {
                        return Err(Error::Config(format!("dof {d} is both clamped and loaded")));
                    }
                    kind[d] = 2;
                }
            }
            LoadMode::TractionRamp => {
                let is_loaded: Vec<bool> = {
                    let mut v = vec![false; mesh.num_nodes()];
                    for &n in loaded {
                        v[n] = true;
                    }
                    v
                };
                let mut count: HashMap<(usize, usize), usize> = HashMap::new();
                for c in mesh.elements() {
                    for a in 0..4 {
                        let (p, q) = (c[a], c[(a + 1) % 4]);
                        *count.entry((p.min(q), p.max(q))).or_default() += 1;
                    }
                }
                let mut edges: Vec<_> = count
                    .into_iter()
                    .filter(|&((p, q), k)| k == 1 && is_loaded[p] && is_loaded[q])
                    .map(|(e, _)| e)
                    .collect();
                edges.sort_unstable();
                if edges.is_empty() {
                    return Err(Error::Config("loaded set contains no boundary edge for a traction".into()));
                }
                let s = program.sign();
                for (p, q) in edges {
                    let (a, b) = (mesh.nodes()[p], mesh.nodes()[q]);
                    let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                    f_ref[2 * p + comp] += 0.5 * len * s;
                    f_ref[2 * q + comp] += 0.5 * len * s;
                }
            }
        }
        let fixed: Vec<usize> = (0..ndof).filter(|&d| kind[d] != 0).collect();
        let fixed_ramped = fixed.iter().map(|&d| kind[d] == 2).collect();
        let free = (0..ndof).filter(|&d| kind[d] == 0).collect();
        Ok(Self {
            program,
            fixed,
            fixed_ramped,
            free,
            loaded_dofs,
            clamped_dofs,
            f_ref,
        })
    }

    pub fn sign(&self) -> f64 {
        self.program.sign()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed
    }

    pub fn loaded_dofs(&self) -> &[usize] {
        &self.loaded_dofs
    }

    /// Writes the Dirichlet values at time `t` into `u`.
    pub fn apply_dirichlet(&self, t: f64, u: &mut [f64]) {
        let v = self.sign() * self.program.ubar(t);
        for (&d, &ramped) in self.fixed.iter().zip(&self.fixed_ramped) {
            u[d] = if ramped { v } else { 0.0 };
        }
    }

    /// Nodal external force `ℓ(t)` (zero under prescribed displacement).
    pub fn external_force(&self, t: f64) -> Vec<f64> {
        let s = match self.program.mode {
            LoadMode::TractionRamp => self.program.traction(t),
            LoadMode::DirichletRamp => 0.0,
        };
        self.f_ref.iter().map(|f| s * f).collect()
    }

    /// Time derivative `ℓ̇` of the external force.
    pub fn external_force_rate(&self) -> Vec<f64> {
        let s = match self.program.mode {
            LoadMode::TractionRamp => self.program.rate(),
            LoadMode::DirichletRamp => 0.0,
        };
        self.f_ref.iter().map(|f| s * f).collect()
    }
}
