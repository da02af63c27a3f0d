//! Configuration, execution and verification behind the `bvdamage`
//! command-line tool.

pub mod config;
pub mod execute;
pub mod verify;

use std::path::Path;

use anyhow::{bail, Context, Result};

use config::RunConfig;
use execute::{execute, RunSummary};

/// One swept parameter with its values, parsed from `name=v1,v2,…`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepParam {
    pub name: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for SweepParam {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, values) = s.split_once('=').with_context(|| format!("sweep parameter {s:?} is not name=v1,v2,..."))?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if name.trim().is_empty() || values.is_empty() {
            bail!("sweep parameter {s:?} needs a name and at least one value");
        }
        Ok(Self {
            name: name.trim().to_string(),
            values,
        })
    }
}

/// All combinations of the swept values, each resolved, with output in a
/// subdirectory `name=value[_name=value…]` of the base directory.
pub fn sweep_configs(base: &RunConfig, params: &[SweepParam]) -> Result<Vec<RunConfig>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for p in params {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                p.values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((p.name.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    let root = base.output.directory.clone().unwrap_or_else(|| format!("bvdamage-out/{}", base.experiment.name()).into());
    combos
        .into_iter()
        .map(|combo| {
            let mut cfg = base.clone();
            for (k, v) in &combo {
                cfg.set(k, v)?;
            }
            let leaf: Vec<String> = combo.iter().map(|(k, v)| format!("{k}={v}")).collect();
            cfg.output.directory = Some(root.join(leaf.join("_")));
            cfg.resolve()
        })
        .collect()
}

/// Runs the configurations on up to `threads` worker threads. Results come
/// back in input order.
pub fn run_many(configs: &[RunConfig], threads: usize) -> Vec<Result<RunSummary>> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<Option<Result<RunSummary>>> = configs.iter().map(|_| None).collect();
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, configs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let r = execute(&configs[i], threads);
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    results.into_iter().map(|r| r.expect("every run reported")).collect()
}

/// Reads a configuration without resolving defaults.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    config::parse_config(&text).with_context(|| format!("invalid configuration {}", path.display()))
}
