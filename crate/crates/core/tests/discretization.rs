mod common;

use std::collections::BTreeMap;

use bvdamage::assembly::{Discretization, LoadCase};
use bvdamage::diagnostics::energy_balance;
use bvdamage::mesh::{rectangle, Mesh};
use bvdamage::model::{LoadMode, LoadProgram, MaterialModel, VNorm};
use bvdamage::problem::FemProblem;
use common::{rng, run_fem, traction_square};
use rand::Rng;

/// Sheared and squashed `nx × ny` grid: every cell is the same
/// parallelogram.
fn skewed(nx: usize, ny: usize) -> Mesh {
    let base = rectangle(1.0, 1.0, nx, ny).unwrap();
    let nodes: Vec<[f64; 2]> = base.nodes().iter().map(|p| [p[0] + 0.3 * p[1], 0.8 * p[1]]).collect();
    Mesh::new(nodes, base.elements().to_vec(), BTreeMap::new(), Vec::new()).unwrap()
}

const G4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Dense reference: 4×4 Gauss on every element, shape functions and
/// Hooke law written out from scratch.
fn dense_energy(mesh: &Mesh, u: &[f64], z: &[f64], m: &MaterialModel) -> (f64, f64) {
    let (e, nu) = (m.young_e, m.poisson_nu);
    let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let r = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    let mut w = vec![0.0; mesh.num_nodes()];
    let mut elastic = 0.0;
    let mut grad = 0.0;
    for (el, conn) in mesh.elements().iter().enumerate() {
        let x = mesh.element_coords(el);
        for &(xi, wx) in &G4 {
            for &(et, wy) in &G4 {
                let mut n = [0.0; 4];
                let mut dr = [[0.0; 2]; 4];
                for a in 0..4 {
                    n[a] = 0.25 * (1.0 + r[a][0] * xi) * (1.0 + r[a][1] * et);
                    dr[a] = [0.25 * r[a][0] * (1.0 + r[a][1] * et), 0.25 * r[a][1] * (1.0 + r[a][0] * xi)];
                }
                let mut j = [[0.0; 2]; 2];
                for a in 0..4 {
                    for p in 0..2 {
                        for q in 0..2 {
                            j[p][q] += x[a][p] * dr[a][q];
                        }
                    }
                }
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
                let dx: Vec<[f64; 2]> = dr
                    .iter()
                    .map(|d| [d[0] * inv[0][0] + d[1] * inv[1][0], d[0] * inv[0][1] + d[1] * inv[1][1]])
                    .collect();
                let (mut exx, mut eyy, mut gxy, mut zx, mut zy, mut g) = (0.0, 0.0, 0.0, 0.0, 0.0, m.eta);
                for a in 0..4 {
                    let (ux, uy) = (u[2 * conn[a]], u[2 * conn[a] + 1]);
                    exx += dx[a][0] * ux;
                    eyy += dx[a][1] * uy;
                    gxy += dx[a][1] * ux + dx[a][0] * uy;
                    zx += dx[a][0] * z[conn[a]];
                    zy += dx[a][1] * z[conn[a]];
                    g += n[a] * z[conn[a]] * z[conn[a]];
                }
                let dens = 0.5 * (lam * (exx + eyy).powi(2) + 2.0 * mu * (exx * exx + eyy * eyy) + mu * gxy * gxy);
                let wd = wx * wy * det;
                elastic += g * dens * wd;
                grad += (zx * zx + zy * zy) * wd;
                for a in 0..4 {
                    w[conn[a]] += n[a] * wd;
                }
            }
        }
    }
    let local: f64 = z
        .iter()
        .zip(&w)
        .map(|(&z, w)| w * m.g_c * (1.0 - z).powi(2) / (4.0 * m.theta))
        .sum();
    (elastic, local + m.g_c * m.theta * grad)
}

fn random_state(n_nodes: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let u = (0..2 * n_nodes).map(|_| r.gen_range(-0.1..0.1)).collect();
    let z = (0..n_nodes).map(|_| r.gen_range(0.0..1.0)).collect();
    (u, z)
}

#[test]
fn energy_matches_dense_high_order_reference() {
    let mesh = skewed(4, 3);
    let m = MaterialModel::at(100.0, 0.3, 1.0, 0.1, 1e-4).unwrap();
    let d = Discretization::new(mesh.clone(), 2).unwrap();
    for seed in 0..5 {
        let (u, z) = random_state(mesh.num_nodes(), seed);
        let (el, fr) = dense_energy(&mesh, &u, &z, &m);
        let el_h = d.elastic_energy(&u, &z, &m).unwrap();
        let fr_h = d.fracture_energy(&z, &m).unwrap();
        assert!((el - el_h).abs() <= 1e-10 * el.abs(), "elastic {el} vs {el_h}");
        assert!((fr - fr_h).abs() <= 1e-10 * fr.abs(), "fracture {fr} vs {fr_h}");
    }
}

#[test]
fn two_and_three_point_rules_agree_on_parallelograms() {
    let mesh = skewed(5, 4);
    let m = MaterialModel::at(25840.0, 0.18, 6.5e-4, 10.0, 1e-4).unwrap();
    let d2 = Discretization::new(mesh.clone(), 2).unwrap();
    let d3 = Discretization::new(mesh.clone(), 3).unwrap();
    let (u, z) = random_state(mesh.num_nodes(), 11);
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
    let e2 = d2.elastic_energy(&u, &z, &m).unwrap() + d2.fracture_energy(&z, &m).unwrap();
    let e3 = d3.elastic_energy(&u, &z, &m).unwrap() + d3.fracture_energy(&z, &m).unwrap();
    assert!(rel(e2, e3) < 1e-9);
    let (g2, _) = d2.grad_z(&u, &z, &m).unwrap();
    let (g3, _) = d3.grad_z(&u, &z, &m).unwrap();
    let scale = g3.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for (a, b) in g2.iter().zip(&g3) {
        assert!((a - b).abs() < 1e-9 * scale);
    }
}

#[test]
fn uniform_strain_gives_exact_reaction() {
    // u_x = ε x, u_y = 0: balanced in the interior, with edge resultant
    // (1+η)(λ+2μ) ε · height on the right
    let mut mesh = rectangle(2.0, 1.0, 4, 3).unwrap();
    let left = mesh.boundary_set("left").to_vec();
    let right = mesh.boundary_set("right").to_vec();
    mesh.set_boundary_set("clamped", left.clone());
    mesh.set_boundary_set("loaded", right.clone());
    let m = MaterialModel::at(100.0, 0.3, 1.0, 0.1, 1e-4).unwrap();
    let d = Discretization::new(mesh.clone(), 2).unwrap();
    let load = LoadCase::new(&d, LoadProgram::new(LoadMode::TractionRamp, 1.0, 1.0, [1.0, 0.0]).unwrap()).unwrap();
    let eps = 0.01;
    let u: Vec<f64> = mesh.nodes().iter().flat_map(|p| [eps * p[0], 0.0]).collect();
    let z = vec![1.0; mesh.num_nodes()];
    let r = d.grad_u(0.0, &u, &z, &m, &load).unwrap();
    let nu = 0.3;
    let c11 = 100.0 * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let expected = (1.0 + 1e-4) * c11 * eps * 1.0;
    let on_right: f64 = right.iter().map(|&n| r[2 * n]).sum();
    let on_left: f64 = left.iter().map(|&n| r[2 * n]).sum();
    assert!((on_right - expected).abs() < 1e-12 * expected);
    assert!((on_left + expected).abs() < 1e-12 * expected);
    let boundary: Vec<usize> = mesh.select_nodes(|p| p[0] < 1e-9 || p[0] > 2.0 - 1e-9 || p[1] < 1e-9 || p[1] > 1.0 - 1e-9);
    for i in 0..mesh.num_nodes() {
        if !boundary.contains(&i) {
            assert!(r[2 * i].abs() < 1e-12 && r[2 * i + 1].abs() < 1e-12);
        }
    }
}

#[test]
fn lumped_weights_are_consistent_mass_row_sums() {
    let d = Discretization::new(skewed(3, 5), 2).unwrap();
    let dense = d.mass().to_dense();
    for (row, w) in dense.iter().zip(d.weights()) {
        let s: f64 = row.iter().sum();
        assert!((s - w).abs() < 1e-14);
    }
    let total: f64 = d.weights().iter().sum();
    assert!((total - 0.8).abs() < 1e-14 && (d.area() - 0.8).abs() < 1e-14);
}

#[test]
fn gauss_norm_of_linear_field_is_exact_and_differs_from_lumped() {
    let d = Discretization::new(rectangle(1.0, 1.0, 6, 6).unwrap(), 2).unwrap();
    let v: Vec<f64> = d.mesh().nodes().iter().map(|p| p[0]).collect();
    // ∫_0^1 x² dx = 1/3 on the unit square
    let gauss = d.lalpha_norm_gauss(&v, 2.0, 3).unwrap();
    assert!((gauss - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
    let lumped = d.norm_v(&v, VNorm::Lalpha(2.0));
    assert!(lumped > gauss && lumped - gauss < 0.05);
}

#[test]
fn undamaged_traction_run_balances_to_round_off() {
    let base = traction_square(4, 0.05, VNorm::Lalpha(4.0));
    let mut low = base.load().program.clone();
    low.amplitude = 0.1;
    let mut p = FemProblem::new(base.disc().mesh().clone(), base.model().clone(), low, base.params().clone()).unwrap();
    let tr = run_fem(&mut p);
    assert!(tr.records.iter().all(|r| r.dz_norm_v == 0.0));
    let bal = energy_balance(&tr).unwrap();
    assert!(bal.exact);
    let scale = tr.records.iter().fold(0.0f64, |s, r| s.max(r.energy.abs()));
    for row in &bal.rows {
        assert!(row.residual.abs() < 1e-12 * scale, "step {} residual {}", row.k, row.residual);
    }
    // time steps are all ρ when nothing moves
    assert_eq!(tr.num_steps(), 20);
}
