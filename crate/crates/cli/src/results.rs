use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use skqaoa::Result;

pub const HEADER: &str =
    "subcommand,config_hash,version,walltime_ms,p,nu,d,delta,chi_max_observed,discarded_weight";

/// One line of the results file. Empty cells are left blank.
#[derive(Debug, Default)]
pub struct Row {
    pub subcommand: &'static str,
    pub config_hash: String,
    pub walltime_ms: u128,
    pub p: Option<usize>,
    pub nu: Option<f64>,
    pub d: Option<usize>,
    pub delta: Option<f64>,
    pub chi_max_observed: Option<usize>,
    pub discarded_weight: Option<f64>,
}

/// First 16 hex digits of the SHA-256 of `config`.
pub fn config_hash(config: &str) -> String {
    let digest = Sha256::digest(config.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn append(path: &Path, row: &Row) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{HEADER}")?;
    }
    writeln!(
        f,
        "{},{},{},{},{},{},{},{},{},{}",
        row.subcommand,
        row.config_hash,
        env!("CARGO_PKG_VERSION"),
        row.walltime_ms,
        cell(row.p),
        row.nu.map(|x| format!("{x:.15e}")).unwrap_or_default(),
        cell(row.d),
        row.delta.map(|x| format!("{x:e}")).unwrap_or_default(),
        cell(row.chi_max_observed),
        row.discarded_weight.map(|x| format!("{x:e}")).unwrap_or_default(),
    )?;
    Ok(())
}
