//! Runs one resolved configuration and writes its artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bvdamage::diagnostics::energy_balance;
use bvdamage::driver::{run_observed, RunOptions, SnapshotPolicy, StepRecord, Trace};
use bvdamage::mesh::{build_ct_mesh, build_lshape_mesh, notch_initial_damage, rectangle, Mesh, NotchKind};
use bvdamage::problem::FemProblem;
use bvdamage::vtk::{write_vtk, PointData};
use bvdamage::zerodim::{brute_force_z_step, ZeroDimProblem};

use crate::config::{Experiment, RunConfig};

pub const TRACE_HEADER: [&str; 10] = [
    "k",
    "t",
    "dt",
    "dz_norm_V",
    "am_iters",
    "energy",
    "R_inc",
    "reaction",
    "dual_distance",
    "ball_active",
];

pub const BALANCE_HEADER: [&str; 7] = ["k", "dE", "R_inc", "visc", "work", "residual", "cum_residual"];

/// Grid spacing of the brute-force check of zerodim runs.
pub const ORACLE_GRID: f64 = 1e-4;

/// Summary of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub directory: PathBuf,
    pub steps: usize,
    pub zero_increment_steps: usize,
    pub max_reaction: Option<f64>,
    pub final_reaction: Option<f64>,
    pub cumulative_residual: f64,
    /// Largest deviation from the brute-force oracle (zerodim only).
    pub oracle_deviation: Option<f64>,
}

fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

pub fn trace_row(r: &StepRecord) -> [String; 10] {
    [
        r.k.to_string(),
        fmt_f(r.t),
        fmt_f(r.dt),
        fmt_f(r.dz_norm_v),
        r.am_iters.to_string(),
        fmt_f(r.energy),
        fmt_f(r.r_inc),
        r.reaction.map(fmt_f).unwrap_or_default(),
        fmt_f(r.dual_distance),
        u8::from(r.ball_active).to_string(),
    ]
}

/// Builds the mesh of a finite-element experiment together with the
/// initial damage field.
pub fn build_mesh(cfg: &RunConfig) -> Result<(Mesh, Vec<f64>)> {
    let mesh = match cfg.experiment {
        Experiment::Ct => {
            let spec = cfg.ct_spec()?;
            let mesh = build_ct_mesh(&spec)?;
            let z0 = match spec.notch {
                NotchKind::InitialDamage => notch_initial_damage(&mesh, &spec),
                _ => vec![1.0; mesh.num_nodes()],
            };
            return Ok((mesh, z0));
        }
        Experiment::Lshape => build_lshape_mesh(&cfg.lshape_spec()?)?,
        Experiment::Custom => {
            let m = &cfg.mesh;
            let mut mesh = rectangle(m.width.unwrap_or(1.0), m.height.unwrap_or(1.0), m.nx.unwrap_or(8), m.ny.unwrap_or(8))?;
            let left = mesh.boundary_set("left").to_vec();
            let right = mesh.boundary_set("right").to_vec();
            mesh.set_boundary_set("clamped", left);
            mesh.set_boundary_set("loaded", right);
            mesh
        }
        Experiment::Zerodim => anyhow::bail!("the zerodim experiment has no mesh"),
    };
    let z0 = vec![1.0; mesh.num_nodes()];
    Ok((mesh, z0))
}

struct Sinks {
    trace: csv::Writer<File>,
    fields: Option<csv::Writer<File>>,
    dir: PathBuf,
    mesh: Option<Mesh>,
    stride: usize,
    vtk: bool,
}

impl Sinks {
    fn open(dir: &Path, cfg: &RunConfig, mesh: Option<Mesh>) -> Result<Self> {
        let mut trace = csv::Writer::from_path(dir.join("trace.csv"))?;
        trace.write_record(TRACE_HEADER)?;
        trace.flush()?;
        let fields = if cfg.experiment == Experiment::Zerodim {
            let mut w = csv::Writer::from_path(dir.join("fields.csv"))?;
            w.write_record(["k", "t", "u", "z"])?;
            Some(w)
        } else {
            None
        };
        Ok(Self {
            trace,
            fields,
            dir: dir.to_path_buf(),
            mesh,
            stride: cfg.output.snapshot_stride.unwrap_or(10),
            vtk: cfg.output.vtk.unwrap_or(true),
        })
    }

    fn step(&mut self, r: &StepRecord, u: &[f64], z: &[f64], last: bool) -> Result<()> {
        self.trace.write_record(trace_row(r))?;
        self.trace.flush()?;
        if let Some(w) = &mut self.fields {
            w.write_record([r.k.to_string(), fmt_f(r.t), fmt_f(u[0]), fmt_f(z[0])])?;
            w.flush()?;
        }
        let due = last || (self.stride > 0 && r.k % self.stride == 0);
        if let (true, true, Some(mesh)) = (self.vtk, due, &self.mesh) {
            write_snapshot(&self.dir, mesh, r, u, z)?;
        }
        Ok(())
    }
}

pub fn snapshot_name(k: usize) -> String {
    format!("fields_{k:06}.vtk")
}

fn write_snapshot(dir: &Path, mesh: &Mesh, r: &StepRecord, u: &[f64], z: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(dir.join(snapshot_name(r.k)))?);
    let title = format!("bvdamage step {} t {:e}", r.k, r.t);
    write_vtk(&mut out, mesh, &title, &[PointData::Scalar("z", z), PointData::Vector2("u", u)])?;
    out.flush()?;
    Ok(())
}

fn write_balance(dir: &Path, trace: &Trace) -> Result<f64> {
    let bal = energy_balance(trace)?;
    let mut w = csv::Writer::from_path(dir.join("balance.csv"))?;
    w.write_record(BALANCE_HEADER)?;
    for r in &bal.rows {
        w.write_record([
            r.k.to_string(),
            fmt_f(r.de),
            fmt_f(r.r_inc),
            fmt_f(r.visc),
            fmt_f(r.work),
            fmt_f(r.residual),
            fmt_f(r.cum_residual),
        ])?;
    }
    w.flush()?;
    Ok(bal.cumulative_residual())
}

/// Writes the resolved configuration plus build information.
pub fn write_manifest(dir: &Path, cfg: &RunConfig, mesh: Option<&Mesh>, threads: usize) -> Result<()> {
    let mut m = cfg.clone();
    m.build.version = Some(env!("CARGO_PKG_VERSION").to_string());
    m.build.threads = Some(threads);
    m.build.nodes = mesh.map(Mesh::num_nodes);
    m.build.elements = mesh.map(Mesh::num_elements);
    fs::write(dir.join("manifest.toml"), toml::to_string(&m)?)?;
    Ok(())
}

/// Largest distance between the stored damage values and the brute-force
/// minimizer of each step.
pub fn zerodim_oracle_deviation(cfg: &RunConfig, rho: f64, steps: &[(f64, f64, f64)]) -> Result<f64> {
    let model = cfg.zero_dim_model()?;
    let mut z_prev = 1.0;
    let mut worst = 0.0f64;
    for &(t, u, z) in steps {
        let o = brute_force_z_step(t, u, z_prev, rho, &model, ORACLE_GRID);
        worst = worst.max((o - z).abs());
        z_prev = z;
    }
    Ok(worst)
}

/// Runs a resolved configuration. Artifacts written before a failure are
/// kept.
pub fn execute(cfg: &RunConfig, threads: usize) -> Result<RunSummary> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let rho = cfg.scheme.rho.context("unresolved configuration")?;
    let opts = RunOptions {
        snapshots: SnapshotPolicy::None,
        max_steps: cfg.scheme.max_steps.unwrap_or(1_000_000),
    };
    let trace = match cfg.experiment {
        Experiment::Zerodim => {
            write_manifest(&dir, cfg, None, threads)?;
            let model = cfg.zero_dim_model()?;
            let mut sinks = Sinks::open(&dir, cfg, None)?;
            let mut p = ZeroDimProblem { model: model.clone() };
            let t_final = model.t_final;
            run_observed(&mut p, &[1.0], rho, &opts, &mut |r, u, z| {
                sinks.step(r, u, z, r.t >= t_final).map_err(to_core)
            })?
        }
        _ => {
            let (mesh, z0) = build_mesh(cfg)?;
            write_manifest(&dir, cfg, Some(&mesh), threads)?;
            log::info!("{}: {} nodes, {} elements", cfg.experiment.name(), mesh.num_nodes(), mesh.num_elements());
            let mut p = FemProblem::with_quadrature(
                mesh.clone(),
                cfg.material_model()?,
                cfg.load_program()?,
                cfg.scheme_params()?,
                cfg.mesh.quadrature.unwrap_or(2),
            )?;
            let t_final = cfg.load.t_final.context("unresolved configuration")?;
            let mut sinks = Sinks::open(&dir, cfg, Some(mesh.clone()))?;
            run_observed(&mut p, &z0, rho, &opts, &mut |r, u, z| {
                log::debug!("step {} t {:e} dt {:e} |dz| {:e}", r.k, r.t, r.dt, r.dz_norm_v);
                sinks.step(r, u, z, r.t >= t_final).map_err(to_core)
            })?
        }
    };
    let cumulative_residual = write_balance(&dir, &trace)?;
    let oracle_deviation = if cfg.experiment == Experiment::Zerodim {
        let steps = read_fields(&dir.join("fields.csv"))?;
        Some(zerodim_oracle_deviation(cfg, rho, &steps)?)
    } else {
        None
    };
    let reactions: Vec<f64> = trace.records.iter().filter_map(|r| r.reaction).collect();
    Ok(RunSummary {
        directory: dir,
        steps: trace.num_steps(),
        zero_increment_steps: trace.records.iter().skip(1).filter(|r| r.dt <= 1e-8).count(),
        max_reaction: reactions.iter().copied().reduce(f64::max),
        final_reaction: reactions.last().copied(),
        cumulative_residual,
        oracle_deviation,
    })
}

fn to_core(e: anyhow::Error) -> bvdamage::Error {
    match e.downcast::<std::io::Error>() {
        Ok(io) => bvdamage::Error::Io(io),
        Err(e) => bvdamage::Error::Io(std::io::Error::other(e.to_string())),
    }
}

/// `(t, u, z)` per step from a zerodim `fields.csv`.
pub fn read_fields(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| -> Result<f64> { Ok(row.get(i).context("short row")?.parse()?) };
        out.push((f(1)?, f(2)?, f(3)?));
    }
    Ok(out)
}
