#![allow(dead_code)]

use bvdamage::driver::{run, RunOptions, SnapshotPolicy, Trace};
use bvdamage::mesh::{build_ct_mesh, build_lshape_mesh, rectangle, CtMeshSpec, LShapeMeshSpec, Mesh};
use bvdamage::model::{LoadMode, LoadProgram, MaterialModel, SchemeParams, VNorm};
use bvdamage::problem::FemProblem;
use bvdamage::zerodim::{run_zero_dim, ZeroDimModel};

/// Unit square with `n × n` cells, clamped on the left and loaded on the
/// right.
pub fn square(n: usize) -> Mesh {
    let mut mesh = rectangle(1.0, 1.0, n, n).unwrap();
    let left = mesh.boundary_set("left").to_vec();
    let right = mesh.boundary_set("right").to_vec();
    mesh.set_boundary_set("clamped", left);
    mesh.set_boundary_set("loaded", right);
    mesh
}

/// The scalar toy lifted to a plate: analysis energy, traction ramp.
pub fn traction_square(n: usize, rho: f64, norm: VNorm) -> FemProblem {
    let model = MaterialModel::analysis(1.0, 0.3, 0.5, 1.0, 1e-2).unwrap();
    let program = LoadProgram::new(LoadMode::TractionRamp, 1.0, 1.0, [1.0, 0.0]).unwrap();
    let params = SchemeParams {
        rho,
        norm,
        ..SchemeParams::default()
    };
    FemProblem::new(square(n), model, program, params).unwrap()
}

/// Phase-field plate pulled by a displacement ramp.
pub fn at_square(n: usize, rho: f64, norm: VNorm) -> FemProblem {
    let model = MaterialModel::at(100.0, 0.3, 1.0, 0.1, 1e-4).unwrap();
    let program = LoadProgram::new(LoadMode::DirichletRamp, 0.1, 1.0, [1.0, 0.0]).unwrap();
    let params = SchemeParams {
        rho,
        norm,
        ..SchemeParams::default()
    };
    FemProblem::new(square(n), model, program, params).unwrap()
}

pub fn coarse_ct(rho: f64) -> FemProblem {
    let mesh = build_ct_mesh(&CtMeshSpec::unit(0.125, 0.0625)).unwrap();
    let model = MaterialModel::at(100.0, 0.3, 1.0, 0.1, 1e-4).unwrap();
    let program = LoadProgram::new(LoadMode::DirichletRamp, 0.3, 1.0, [0.0, 1.0]).unwrap();
    let params = SchemeParams {
        rho,
        ..SchemeParams::default()
    };
    FemProblem::new(mesh, model, program, params).unwrap()
}

pub fn coarse_lshape(rho: f64) -> FemProblem {
    let mesh = build_lshape_mesh(&LShapeMeshSpec::new(250.0, 125.0, 62.5)).unwrap();
    let model = MaterialModel::at(25840.0, 0.18, 6.5e-4, 10.0, 1e-4).unwrap();
    let program = LoadProgram::new(LoadMode::DirichletRamp, 0.3, 1.0, [0.0, 1.0]).unwrap();
    let params = SchemeParams {
        rho,
        ..SchemeParams::default()
    };
    FemProblem::new(mesh, model, program, params).unwrap()
}

pub fn all_snapshots() -> RunOptions {
    RunOptions {
        snapshots: SnapshotPolicy::All,
        ..RunOptions::default()
    }
}

pub fn run_fem(p: &mut FemProblem) -> Trace {
    let z0 = vec![1.0; p.disc().num_nodes()];
    let rho = p.params().rho;
    run(p, &z0, rho, &all_snapshots()).unwrap()
}

/// Every trace the structural checks run on, with its Newton tolerance.
pub fn test_traces() -> Vec<(String, Trace, f64)> {
    let mut out = Vec::new();
    let m = ZeroDimModel::default();
    for rho in [0.1, 0.02, 0.002] {
        out.push((format!("0D rho={rho}"), run_zero_dim(&m, rho).unwrap(), 1e-8));
    }
    let fem: Vec<(&str, FemProblem)> = vec![
        ("traction 8x8 L4", traction_square(8, 0.02, VNorm::Lalpha(4.0))),
        ("traction 8x8 H1", traction_square(8, 0.02, VNorm::H1)),
        ("AT 8x8 L2", at_square(8, 0.05, VNorm::Lalpha(2.0))),
        ("AT 8x8 L8", at_square(8, 0.05, VNorm::Lalpha(8.0))),
        ("CT coarse", coarse_ct(0.05)),
        ("L-shape coarse", coarse_lshape(0.05)),
    ];
    for (name, mut p) in fem {
        let tol = p.params().tol_newton;
        out.push((name.to_string(), run_fem(&mut p), tol));
    }
    out
}

/// Deterministic pseudo-random stream for test data.
pub fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
