//! Re-runs the trace diagnostics on stored artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bvdamage::diagnostics::{check_invariants, complementarity_check, normalization_error, InvariantTolerances};
use bvdamage::driver::{StepRecord, Trace};

use crate::config::{load_config, Experiment};
use crate::execute::{read_fields, zerodim_oracle_deviation, BALANCE_HEADER, ORACLE_GRID, TRACE_HEADER};

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        Ok(Some(s.parse().with_context(|| format!("bad number {s:?}"))?))
    }
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut rd = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let got: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if got != header {
        bail!("{}: unexpected header {:?}", path.display(), got);
    }
    let mut rows = Vec::new();
    for r in rd.records() {
        rows.push(r?.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

/// Step records as far as `trace.csv` stores them.
pub fn read_trace(path: &Path) -> Result<Vec<StepRecord>> {
    let rows = read_csv(path, &TRACE_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let f = |j: usize| -> Result<f64> { r[j].parse().with_context(|| format!("trace row {i}, column {}", TRACE_HEADER[j])) };
        let n = |j: usize| -> Result<usize> { r[j].parse().with_context(|| format!("trace row {i}, column {}", TRACE_HEADER[j])) };
        out.push(StepRecord {
            k: n(0)?,
            t: f(1)?,
            dt: f(2)?,
            dz_norm_v: f(3)?,
            am_iters: n(4)?,
            am_converged: true,
            energy: f(5)?,
            r_inc: f(6)?,
            reaction: parse_opt(&r[7])?,
            dual_distance: f(8)?,
            xi_norm: 0.0,
            ball_active: r[9] == "1",
            stationarity: 0.0,
            al_iters: 0,
            newton_iters: 0,
            load_power: None,
            ubar: None,
            am_sequence: Vec::new(),
            rejected_z_steps: 0,
        });
    }
    Ok(out)
}

/// Damage values of a VTK snapshot written by `run`.
pub fn read_vtk_damage(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let n: usize = lines
        .by_ref()
        .find_map(|l| l.strip_prefix("POINT_DATA "))
        .context("no POINT_DATA section")?
        .trim()
        .parse()?;
    lines.by_ref().find(|l| l.starts_with("SCALARS z")).context("no damage field")?;
    lines.next();
    lines.take(n).map(|l| Ok(l.trim().parse()?)).collect()
}

/// Checks the artifacts in `dir`. Returns one entry per check.
pub fn verify_dir(dir: &Path) -> Result<Vec<Check>> {
    let cfg = load_config(&dir.join("manifest.toml"))?;
    let rho = cfg.scheme.rho.context("manifest lacks scheme.rho")?;
    let t_final = match cfg.experiment {
        Experiment::Zerodim => cfg.zero_dim_model()?.t_final,
        _ => cfg.load.t_final.context("manifest lacks load.t_final")?,
    };
    let tol_newton = cfg.scheme.tol_newton.unwrap_or(1e-8);
    let records = read_trace(&dir.join("trace.csv"))?;
    let mut out = Vec::new();

    let trace = Trace {
        rho,
        t_final,
        records: records.clone(),
        z_initial: Vec::new(),
        u_initial: Vec::new(),
        initial_energy: 0.0,
        initial_load_power: None,
        initial_reaction: None,
        snapshots: BTreeMap::new(),
    };
    let inv = check_invariants(&trace, &InvariantTolerances::default());
    out.push(check("invariants", inv.is_empty(), inv.first().cloned().unwrap_or_else(|| format!("{} steps", records.len()))));

    let (interior, last) = normalization_error(&trace);
    out.push(check(
        "normalization",
        interior <= 1e-8 && last <= 1e-12,
        format!("interior deviation {interior:.2e}, last-step excess {last:.2e}"),
    ));

    let v = complementarity_check(&records, tol_newton, 1e-10);
    out.push(check(
        "complementarity",
        v.is_empty(),
        match v.first() {
            Some(v) => format!("step {} advanced time by {:.2e} at distance {:.2e}", v.k, v.dt, v.previous_distance),
            None => "no violations".into(),
        },
    ));

    let bal = read_csv(&dir.join("balance.csv"), &BALANCE_HEADER)?;
    let mut worst = 0.0f64;
    let scale = records.iter().fold(1e-300f64, |m, r| m.max(r.energy.abs()));
    let mut cum = 0.0;
    if bal.len() != records.len() {
        out.push(check("balance", false, format!("{} balance rows for {} steps", bal.len(), records.len())));
    } else {
        for (i, row) in bal.iter().enumerate() {
            let x: Vec<f64> = row.iter().skip(1).map(|s| s.parse()).collect::<std::result::Result<_, _>>()?;
            let (de, r_inc, visc, work, res, cum_res) = (x[0], x[1], x[2], x[3], x[4], x[5]);
            let r = &records[i];
            cum += res;
            let mut dev = (de + r_inc + visc - work - res).abs().max((cum - cum_res).abs());
            dev = dev.max((r_inc - r.r_inc).abs()).max((visc - r.dz_norm_v * r.dual_distance).abs());
            if i > 0 {
                dev = dev.max((de - (r.energy - records[i - 1].energy)).abs());
            }
            worst = worst.max(dev / scale);
        }
        out.push(check(
            "balance",
            worst <= 1e-12,
            format!("ledger consistent to {worst:.2e}; cumulative residual {cum:.3e}"),
        ));
    }

    let mut snaps: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "vtk"))
        .collect();
    snaps.sort();
    if !snaps.is_empty() {
        let mut prev: Option<Vec<f64>> = None;
        let mut problem = None;
        for p in &snaps {
            let z = read_vtk_damage(p)?;
            if z.iter().any(|&z| !(-1e-8..=1.0 + 1e-8).contains(&z)) {
                problem.get_or_insert(format!("{}: damage outside [0, 1]", p.display()));
            }
            if let Some(q) = &prev {
                if z.len() != q.len() || z.iter().zip(q).any(|(a, b)| *a > b + 1e-8) {
                    problem.get_or_insert(format!("{}: damage healed", p.display()));
                }
            }
            prev = Some(z);
        }
        out.push(check(
            "snapshots",
            problem.is_none(),
            problem.unwrap_or_else(|| format!("{} fields bounded and irreversible", snaps.len())),
        ));
    }

    if cfg.experiment == Experiment::Zerodim {
        let steps = read_fields(&dir.join("fields.csv"))?;
        let dev = zerodim_oracle_deviation(&cfg, rho, &steps)?;
        out.push(check(
            "oracle",
            dev <= 2.0 * ORACLE_GRID,
            format!("max deviation {dev:.2e} from the brute-force minimizer"),
        ));
    }
    Ok(out)
}
