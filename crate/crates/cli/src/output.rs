use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use multipole::{MultipoleRecord, SignedSet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize, Deserialize)]
pub struct ResultFile {
    /// Column names of the mined dataset, in file order.
    pub variables: Vec<String>,
    pub partial: bool,
    pub multipoles: Vec<MultipoleJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MultipoleJson {
    pub members: Vec<String>,
    pub indices: Vec<usize>,
    pub signs: Vec<i8>,
    pub linear_dependence: f64,
    pub linear_gain: f64,
    pub weights: Vec<f64>,
    pub size: usize,
    pub degenerate: bool,
}

impl ResultFile {
    pub fn new(variables: &[String], records: &[MultipoleRecord], partial: bool) -> Self {
        let multipoles = records
            .iter()
            .map(|r| MultipoleJson {
                members: r.members().iter().map(|&i| variables[i].clone()).collect(),
                indices: r.members().to_vec(),
                signs: r.signed.signs().to_vec(),
                linear_dependence: r.sigma,
                linear_gain: r.gain,
                weights: r.weights.clone(),
                size: r.len(),
                degenerate: r.degenerate,
            })
            .collect();
        Self {
            variables: variables.to_vec(),
            partial,
            multipoles,
        }
    }

    pub fn records(&self) -> Result<Vec<MultipoleRecord>> {
        self.multipoles
            .iter()
            .map(|m| {
                if m.indices.iter().any(|&i| i >= self.variables.len()) {
                    anyhow::bail!(crate::Usage(format!(
                        "member index out of range in {:?}",
                        m.members
                    )));
                }
                Ok(MultipoleRecord {
                    signed: SignedSet::new(m.indices.clone(), m.signs.clone())?,
                    sigma: m.linear_dependence,
                    gain: m.linear_gain,
                    weights: m.weights.clone(),
                    maximal: false,
                    degenerate: m.degenerate,
                })
            })
            .collect()
    }

    pub fn summary_csv(&self) -> Vec<u8> {
        let mut out = b"rank,size,members,signs,linear_dependence,linear_gain\n".to_vec();
        for (rank, m) in self.multipoles.iter().enumerate() {
            let signs: Vec<String> = m.signs.iter().map(i8::to_string).collect();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                rank + 1,
                m.size,
                m.members.join(";"),
                signs.join(";"),
                m.linear_dependence,
                m.linear_gain
            )
            .expect("write to vec");
        }
        out
    }
}

pub fn read_result(path: &Path) -> Result<ResultFile> {
    let text = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_slice(&text)
        .map_err(|e| crate::Usage(format!("{}: {e}", path.display())).into())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

/// `r.json` -> `r.<ext>`.
pub fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
    pub status: String,
}

/// Writes every output file, then the manifest next to `primary`.
pub struct Outputs {
    primary: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(primary: &Path) -> Self {
        Self {
            primary: primary.to_path_buf(),
            written: Vec::new(),
        }
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn finish(
        self,
        run: &crate::RunInfo,
        inputs: &[PathBuf],
        partial: bool,
    ) -> Result<PathBuf> {
        let manifest = Manifest {
            command: run.command.clone(),
            argv: run.argv.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: run.config.clone(),
            inputs: inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            outputs: self
                .written
                .iter()
                .map(|p| digest(p))
                .collect::<Result<_>>()?,
            started_at: run.started_at.clone(),
            finished_at: crate::now(),
            status: if partial { "partial" } else { "ok" }.to_string(),
        };
        let path = sibling(&self.primary, "manifest.json");
        fs::write(&path, json_bytes(&manifest))
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
