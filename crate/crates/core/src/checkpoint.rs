//! Run directories: a `key = value` manifest next to a little-endian `f64`
//! parameter blob.
//!
//! ```text
//! <run>/manifest    ansatz structure, tensor table, seed, epoch, extras
//! <run>/best.ckpt   every parameter scalar, tensors in manifest order
//! <run>/metrics.csv one row per epoch
//! ```

use crate::ansatz::{Ansatz, AnsatzConfig, AnsatzError, CellKind, Lattice};
use crate::params::{Manifold, ParameterStore, Tensor};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST_FILE: &str = "manifest";
pub const BLOB_FILE: &str = "best.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
const FORMAT: &str = "hypvmc-checkpoint-1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("manifest is missing key `{0}`")]
    MissingKey(&'static str),
    #[error("blob holds {got} bytes, manifest describes {expected}")]
    Blob { expected: usize, got: usize },
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

pub type Result<T> = std::result::Result<T, CheckpointError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |e| CheckpointError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// A saved model plus the bookkeeping needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: AnsatzConfig,
    pub params: ParameterStore,
    pub seed: u64,
    pub epoch: usize,
    /// Free-form keys carried along, e.g. the Hamiltonian of the run.
    pub extra: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn from_ansatz(ansatz: &Ansatz, seed: u64, epoch: usize) -> Self {
        Checkpoint {
            config: ansatz.config().clone(),
            params: ansatz.params().clone(),
            seed,
            epoch,
            extra: BTreeMap::new(),
        }
    }

    pub fn into_ansatz(self) -> Result<Ansatz> {
        Ok(Ansatz::from_params(self.config, self.params)?)
    }

    pub fn manifest(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("format", FORMAT.into());
        kv("cell", c.cell.to_string());
        kv("hidden", c.hidden.to_string());
        kv("complex", c.complex.to_string());
        kv("curvature", format!("{:?}", c.curvature));
        kv("lattice", c.lattice.to_string());
        kv("marshall_sign", c.marshall_sign.to_string());
        kv("seed", self.seed.to_string());
        kv("epoch", self.epoch.to_string());
        kv("tensors", self.params.len().to_string());
        for (i, t) in self.params.tensors().iter().enumerate() {
            kv(&format!("tensor.{i}"), format!("{} {} {} {}", t.name, t.rows, t.cols, t.manifold));
        }
        kv("scalars", self.params.scalar_count().to_string());
        kv("blob", BLOB_FILE.into());
        for (k, v) in &self.extra {
            kv(&format!("extra.{k}"), v.clone());
        }
        out
    }

    pub fn blob(&self) -> Vec<u8> {
        self.params.flatten().iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Write manifest and blob into `dir`, replacing earlier files whole.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, bytes) in [(BLOB_FILE, self.blob()), (MANIFEST_FILE, self.manifest().into_bytes())] {
            let path = dir.join(name);
            let tmp = dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
            fs::rename(&tmp, &path).map_err(io_err(&path))?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
        let bpath = dir.join(BLOB_FILE);
        let blob = fs::read(&bpath).map_err(io_err(&bpath))?;
        Self::parse(&text, &blob)
    }

    pub fn parse(manifest: &str, blob: &[u8]) -> Result<Self> {
        let mut keys: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, line) in manifest.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(CheckpointError::Manifest {
                line: line_no,
                message: "expected `key = value`".into(),
            })?;
            keys.insert(k.trim().to_string(), (line_no, v.trim().to_string()));
        }
        let get = |k: &'static str| keys.get(k).ok_or(CheckpointError::MissingKey(k));
        fn parse_as<T: std::str::FromStr>(entry: &(usize, String), what: &str) -> Result<T> {
            entry.1.parse().map_err(|_| CheckpointError::Manifest {
                line: entry.0,
                message: format!("invalid {what} `{}`", entry.1),
            })
        }
        let format = get("format")?;
        if format.1 != FORMAT {
            return Err(CheckpointError::Manifest {
                line: format.0,
                message: format!("unsupported format `{}`", format.1),
            });
        }
        let cell: CellKind = parse_as(get("cell")?, "cell kind")?;
        let lattice: Lattice = parse_as(get("lattice")?, "lattice")?;
        let config = AnsatzConfig {
            cell,
            hidden: parse_as(get("hidden")?, "hidden size")?,
            complex: parse_as(get("complex")?, "flag")?,
            curvature: parse_as(get("curvature")?, "curvature")?,
            lattice,
            marshall_sign: parse_as(get("marshall_sign")?, "flag")?,
        };
        let count: usize = parse_as(get("tensors")?, "tensor count")?;
        let mut params = ParameterStore::new();
        for i in 0..count {
            let key = format!("tensor.{i}");
            let entry = keys.get(&key).ok_or(CheckpointError::Manifest {
                line: 0,
                message: format!("missing `{key}`"),
            })?;
            let fields: Vec<&str> = entry.1.split_whitespace().collect();
            let bad = || CheckpointError::Manifest {
                line: entry.0,
                message: format!("expected `name rows cols manifold`, got `{}`", entry.1),
            };
            if fields.len() != 4 {
                return Err(bad());
            }
            let rows: usize = fields[1].parse().map_err(|_| bad())?;
            let cols: usize = fields[2].parse().map_err(|_| bad())?;
            let manifold: Manifold = fields[3].parse().map_err(|_| bad())?;
            params.push(Tensor::zeros(fields[0], rows, cols, manifold));
        }
        let scalars: usize = parse_as(get("scalars")?, "scalar count")?;
        if scalars != params.scalar_count() || blob.len() != 8 * scalars {
            return Err(CheckpointError::Blob {
                expected: 8 * params.scalar_count(),
                got: blob.len(),
            });
        }
        let flat: Vec<f64> = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        params.assign_flat(&flat);
        // Validates names, shapes and tags against the ansatz structure.
        Ansatz::from_params(config.clone(), params.clone())?;
        let extra = keys
            .iter()
            .filter_map(|(k, (_, v))| k.strip_prefix("extra.").map(|k| (k.to_string(), v.clone())))
            .collect();
        Ok(Checkpoint {
            config,
            params,
            seed: parse_as(get("seed")?, "seed")?,
            epoch: parse_as(get("epoch")?, "epoch")?,
            extra,
        })
    }
}
