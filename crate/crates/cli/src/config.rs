//! Run configuration: TOML input, per-experiment defaults, validation.
//!
//! A resolved configuration has every field that affects the result filled
//! in. It is written back as the run manifest, which is itself a valid
//! configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bvdamage::mesh::{CtLoading, CtMeshSpec, LShapeMeshSpec, NotchKind};
use bvdamage::model::{LoadMode, LoadProgram, MaterialModel, SchemeParams, VNorm};
use bvdamage::zerodim::ZeroDimModel;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Ct,
    Lshape,
    Zerodim,
    Custom,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Ct => "ct",
            Experiment::Lshape => "lshape",
            Experiment::Zerodim => "zerodim",
            Experiment::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyPreset {
    At,
    Analysis,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub preset: Option<EnergyPreset>,
    pub young_e: Option<f64>,
    pub poisson_nu: Option<f64>,
    pub eta: Option<f64>,
    pub g_c: Option<f64>,
    pub theta: Option<f64>,
    pub kappa_e: Option<f64>,
    pub kappa_r: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub rho: Option<f64>,
    /// Exponent of the `L^α` norm; ignored when `h1 = true`.
    pub alpha: Option<f64>,
    pub h1: Option<bool>,
    pub tol_am: Option<f64>,
    pub tol_newton: Option<f64>,
    pub tol_constraint: Option<f64>,
    pub max_am_iters: Option<usize>,
    pub max_al_iters: Option<usize>,
    pub beta0: Option<f64>,
    pub beta_growth: Option<f64>,
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadKind {
    Displacement,
    Traction,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSection {
    pub mode: Option<LoadKind>,
    pub amplitude: Option<f64>,
    pub t_final: Option<f64>,
    /// One of "x", "y", "-x", "-y".
    pub direction: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NotchChoice {
    Slit,
    Damage,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadingChoice {
    Opening,
    Stretch,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub coarse_h: Option<f64>,
    pub fine_h: Option<f64>,
    pub notch: Option<NotchChoice>,
    pub notch_tip: Option<f64>,
    pub loading: Option<LoadingChoice>,
    pub leg_len: Option<f64>,
    pub width: Option<f64>,
    pub height: Option<f64>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    /// Gauss points per direction.
    pub quadrature: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroDimSection {
    pub a: Option<f64>,
    pub eta: Option<f64>,
    pub kappa_e: Option<f64>,
    pub kappa_r: Option<f64>,
    pub ell_rate: Option<f64>,
    pub t_final: Option<f64>,
    pub tol_am: Option<f64>,
    pub max_am_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
    /// Write a VTK snapshot every this many steps (0: final step only).
    pub snapshot_stride: Option<usize>,
    pub vtk: Option<bool>,
}

/// Informational block written into manifests; ignored on input.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildSection {
    pub version: Option<String>,
    pub threads: Option<usize>,
    pub nodes: Option<usize>,
    pub elements: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub material: MaterialSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub scheme: SchemeSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub load: LoadSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub mesh: MeshSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub zerodim: ZeroDimSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "is_default")]
    pub build: BuildSection,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Parses a configuration text. Syntax errors carry line and column.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(cfg)
}

/// Reads, parses and resolves a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let cfg = parse_config(&text).with_context(|| format!("invalid configuration {}", path.display()))?;
    cfg.resolve().with_context(|| format!("invalid configuration {}", path.display()))
}

fn fill<T: Copy>(slot: &mut Option<T>, default: T) -> T {
    *slot.get_or_insert(default)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{name} must be positive and finite, got {v}");
    }
    Ok(())
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: None,
            material: MaterialSection::default(),
            scheme: SchemeSection::default(),
            load: LoadSection::default(),
            mesh: MeshSection::default(),
            zerodim: ZeroDimSection::default(),
            output: OutputSection::default(),
            build: BuildSection::default(),
        }
    }

    /// Fills every unset field from the experiment defaults and validates
    /// the result.
    pub fn resolve(mut self) -> Result<Self> {
        self.build = BuildSection::default();
        self.seed.get_or_insert(0);
        match self.experiment {
            Experiment::Zerodim => self.resolve_zerodim()?,
            _ => self.resolve_fem()?,
        }
        let out = &mut self.output;
        if out.directory.is_none() {
            out.directory = Some(PathBuf::from(format!("bvdamage-out/{}", self.experiment.name())));
        }
        fill(&mut out.snapshot_stride, 10);
        fill(&mut out.vtk, self.experiment != Experiment::Zerodim);
        Ok(self)
    }

    fn resolve_zerodim(&mut self) -> Result<()> {
        let d = ZeroDimModel::default();
        let z = &mut self.zerodim;
        fill(&mut z.a, d.a);
        fill(&mut z.eta, d.eta);
        fill(&mut z.kappa_e, d.kappa_e);
        fill(&mut z.kappa_r, d.kappa_r);
        fill(&mut z.ell_rate, d.ell_rate);
        fill(&mut z.t_final, d.t_final);
        fill(&mut z.tol_am, d.tol_am);
        fill(&mut z.max_am_iters, d.max_am_iters);
        let rho = fill(&mut self.scheme.rho, 0.02);
        positive("scheme.rho", rho)?;
        fill(&mut self.scheme.max_steps, 1_000_000);
        if self.material != MaterialSection::default() || self.mesh != MeshSection::default() || self.load != LoadSection::default() {
            bail!("the zerodim experiment takes its parameters from [zerodim]; [material], [mesh] and [load] must be empty");
        }
        self.zero_dim_model()?.validate().map_err(|e| anyhow::anyhow!("zerodim: {e}"))?;
        Ok(())
    }

    fn resolve_fem(&mut self) -> Result<()> {
        let ex = self.experiment;
        let m = &mut self.material;
        let (preset, e, nu, g_c, theta) = match ex {
            Experiment::Lshape => (EnergyPreset::At, 25840.0, 0.18, 6.5e-4, 10.0),
            _ => (EnergyPreset::At, 100.0, 0.3, 1.0, 0.025),
        };
        fill(&mut m.preset, preset);
        fill(&mut m.young_e, e);
        fill(&mut m.poisson_nu, nu);
        fill(&mut m.eta, 1e-4);
        fill(&mut m.g_c, g_c);
        fill(&mut m.theta, theta);
        fill(&mut m.kappa_e, 1.0);
        fill(&mut m.kappa_r, if m.preset == Some(EnergyPreset::Analysis) { 1.0 } else { 0.0 });

        let sd = SchemeParams::default();
        let s = &mut self.scheme;
        let rho = fill(
            &mut s.rho,
            match ex {
                Experiment::Ct => 0.005,
                Experiment::Lshape => 0.08658,
                _ => 0.01,
            },
        );
        fill(&mut s.alpha, 4.0);
        fill(&mut s.h1, false);
        fill(&mut s.tol_am, sd.tol_am);
        fill(&mut s.tol_newton, sd.tol_newton);
        fill(&mut s.tol_constraint, sd.tol_constraint);
        fill(&mut s.max_am_iters, sd.max_am_iters);
        fill(&mut s.max_al_iters, sd.max_al_iters);
        fill(&mut s.beta_growth, sd.beta_growth);
        fill(&mut s.max_steps, 1_000_000);

        let mesh = &mut self.mesh;
        match ex {
            Experiment::Ct => {
                fill(&mut mesh.coarse_h, 0.05);
                fill(&mut mesh.fine_h, 0.0125);
                fill(&mut mesh.notch, NotchChoice::Slit);
                fill(&mut mesh.notch_tip, 0.5);
                fill(&mut mesh.loading, LoadingChoice::Opening);
            }
            Experiment::Lshape => {
                fill(&mut mesh.leg_len, 250.0);
                fill(&mut mesh.coarse_h, 25.0);
                fill(&mut mesh.fine_h, 5.0);
            }
            Experiment::Custom => {
                fill(&mut mesh.width, 1.0);
                fill(&mut mesh.height, 1.0);
                fill(&mut mesh.nx, 8);
                fill(&mut mesh.ny, 8);
            }
            Experiment::Zerodim => unreachable!(),
        }
        fill(&mut mesh.quadrature, 2);

        let l = &mut self.load;
        fill(
            &mut l.mode,
            match ex {
                Experiment::Custom if self.material.preset == Some(EnergyPreset::Analysis) => LoadKind::Traction,
                _ => LoadKind::Displacement,
            },
        );
        fill(&mut l.amplitude, if ex == Experiment::Custom { 0.1 } else { 0.3 });
        fill(
            &mut l.t_final,
            match ex {
                Experiment::Ct => 100.0 * rho,
                Experiment::Lshape => 8.658,
                _ => 1.0,
            },
        );
        if l.direction.is_none() {
            let dir = match (ex, mesh.loading) {
                (Experiment::Ct, Some(LoadingChoice::Stretch)) | (Experiment::Custom, _) => "x",
                _ => "y",
            };
            l.direction = Some(dir.into());
        }

        self.material_model()?;
        self.scheme_params()?;
        self.load_program()?;
        match ex {
            Experiment::Ct => {
                self.ct_spec()?;
            }
            Experiment::Lshape => {
                self.lshape_spec()?;
            }
            _ => {
                positive("mesh.width", self.mesh.width.unwrap())?;
                positive("mesh.height", self.mesh.height.unwrap())?;
                if self.mesh.nx == Some(0) || self.mesh.ny == Some(0) {
                    bail!("mesh.nx and mesh.ny must be at least 1");
                }
            }
        }
        if !(1..=5).contains(&self.mesh.quadrature.unwrap()) {
            bail!("mesh.quadrature must be between 1 and 5 points per direction");
        }
        Ok(())
    }

    pub fn material_model(&self) -> Result<MaterialModel> {
        let m = &self.material;
        let g = |v: Option<f64>, name: &str| v.with_context(|| format!("material.{name} unresolved"));
        let mut model = match m.preset.context("material.preset unresolved")? {
            EnergyPreset::At => MaterialModel::at(g(m.young_e, "young_e")?, g(m.poisson_nu, "poisson_nu")?, g(m.g_c, "g_c")?, g(m.theta, "theta")?, g(m.eta, "eta")?),
            EnergyPreset::Analysis => MaterialModel::analysis(
                g(m.young_e, "young_e")?,
                g(m.poisson_nu, "poisson_nu")?,
                g(m.kappa_e, "kappa_e")?,
                g(m.kappa_r, "kappa_r")?,
                g(m.eta, "eta")?,
            ),
        }
        .map_err(|e| anyhow::anyhow!("material: {e}"))?;
        model.kappa_e = g(m.kappa_e, "kappa_e")?;
        model.kappa_r = g(m.kappa_r, "kappa_r")?;
        model.validate().map_err(|e| anyhow::anyhow!("material: {e}"))?;
        Ok(model)
    }

    pub fn norm(&self) -> VNorm {
        if self.scheme.h1 == Some(true) {
            VNorm::H1
        } else {
            VNorm::Lalpha(self.scheme.alpha.unwrap_or(4.0))
        }
    }

    pub fn scheme_params(&self) -> Result<SchemeParams> {
        let s = &self.scheme;
        let d = SchemeParams::default();
        let p = SchemeParams {
            rho: s.rho.unwrap_or(d.rho),
            norm: self.norm(),
            tol_am: s.tol_am.unwrap_or(d.tol_am),
            tol_newton: s.tol_newton.unwrap_or(d.tol_newton),
            tol_constraint: s.tol_constraint.unwrap_or(d.tol_constraint),
            max_am_iters: s.max_am_iters.unwrap_or(d.max_am_iters),
            max_al_iters: s.max_al_iters.unwrap_or(d.max_al_iters),
            beta0: s.beta0,
            beta_growth: s.beta_growth.unwrap_or(d.beta_growth),
        };
        p.validate().map_err(|e| anyhow::anyhow!("scheme: {e}"))?;
        Ok(p)
    }

    pub fn load_program(&self) -> Result<LoadProgram> {
        let l = &self.load;
        let mode = match l.mode.context("load.mode unresolved")? {
            LoadKind::Displacement => LoadMode::DirichletRamp,
            LoadKind::Traction => LoadMode::TractionRamp,
        };
        let direction = match l.direction.as_deref() {
            Some("x") => [1.0, 0.0],
            Some("-x") => [-1.0, 0.0],
            Some("y") => [0.0, 1.0],
            Some("-y") => [0.0, -1.0],
            other => bail!("load.direction must be one of x, y, -x, -y, got {other:?}"),
        };
        LoadProgram::new(mode, l.amplitude.context("load.amplitude unresolved")?, l.t_final.context("load.t_final unresolved")?, direction)
            .map_err(|e| anyhow::anyhow!("load: {e}"))
    }

    pub fn ct_spec(&self) -> Result<CtMeshSpec> {
        let m = &self.mesh;
        let coarse = m.coarse_h.context("mesh.coarse_h unresolved")?;
        let fine = m.fine_h.context("mesh.fine_h unresolved")?;
        positive("mesh.coarse_h", coarse)?;
        positive("mesh.fine_h", fine)?;
        if fine > coarse {
            bail!("mesh.fine_h {fine} exceeds mesh.coarse_h {coarse}");
        }
        let mut spec = CtMeshSpec::unit(coarse, fine);
        spec.notch = match m.notch.unwrap_or(NotchChoice::Slit) {
            NotchChoice::Slit => NotchKind::Slit,
            NotchChoice::Damage => NotchKind::InitialDamage,
            NotchChoice::None => NotchKind::None,
        };
        spec.notch_tip = m.notch_tip.unwrap_or(0.5);
        spec.loading = match m.loading.unwrap_or(LoadingChoice::Opening) {
            LoadingChoice::Opening => CtLoading::Opening,
            LoadingChoice::Stretch => CtLoading::Stretch,
        };
        Ok(spec)
    }

    pub fn lshape_spec(&self) -> Result<LShapeMeshSpec> {
        let m = &self.mesh;
        let leg = m.leg_len.context("mesh.leg_len unresolved")?;
        let coarse = m.coarse_h.context("mesh.coarse_h unresolved")?;
        let fine = m.fine_h.context("mesh.fine_h unresolved")?;
        for (n, v) in [("mesh.leg_len", leg), ("mesh.coarse_h", coarse), ("mesh.fine_h", fine)] {
            positive(n, v)?;
        }
        if fine > coarse {
            bail!("mesh.fine_h {fine} exceeds mesh.coarse_h {coarse}");
        }
        Ok(LShapeMeshSpec::new(leg, coarse, fine))
    }

    pub fn zero_dim_model(&self) -> Result<ZeroDimModel> {
        let z = &self.zerodim;
        let d = ZeroDimModel::default();
        Ok(ZeroDimModel {
            a: z.a.unwrap_or(d.a),
            eta: z.eta.unwrap_or(d.eta),
            kappa_e: z.kappa_e.unwrap_or(d.kappa_e),
            kappa_r: z.kappa_r.unwrap_or(d.kappa_r),
            ell_rate: z.ell_rate.unwrap_or(d.ell_rate),
            t_final: z.t_final.unwrap_or(d.t_final),
            tol_am: z.tol_am.unwrap_or(d.tol_am),
            max_am_iters: z.max_am_iters.unwrap_or(d.max_am_iters),
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.directory.clone().unwrap_or_else(|| PathBuf::from("bvdamage-out"))
    }

    /// Applies one `key=value` override, with `key` either a scheme field
    /// (`rho`, `alpha`) or a dotted `section.field` path.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = match key {
            "rho" | "alpha" | "h1" => format!("scheme.{key}"),
            k => k.to_string(),
        };
        let (section, field) = path.split_once('.').with_context(|| format!("override key {key:?} needs a section"))?;
        let mut doc: toml::Table = toml::from_str(&toml::to_string(self)?)?;
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .map(|mut t| t.remove("v").expect("parsed key"))
            .unwrap_or_else(|_| toml::Value::String(value.to_string()));
        doc.entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("{section} is not a section"))?
            .insert(field.to_string(), parsed);
        *self = parse_config(&toml::to_string(&doc)?).with_context(|| format!("override {key}={value}"))?;
        Ok(())
    }
}

/// Worker thread count from `BVDAMAGE_THREADS` (default 1).
pub fn thread_count() -> Result<usize> {
    match std::env::var("BVDAMAGE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => bail!("BVDAMAGE_THREADS must be a positive integer, got {v:?}"),
        },
        Err(_) => Ok(1),
    }
}
