//! On-disk layout of reduced spaces and run manifests.
//!
//! A spaces directory holds `spaces.json`, the bases `V.mtx` and `W.mtx`
//! (MatrixMarket arrays, `R_V0`-orthonormal columns) and, when written by the
//! greedy driver, `trace.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greedy::GreedyTrace;
use crate::model::FullOrderModel;
use crate::preconditioner::{InverseInterpolant, PrecondMeta};
use crate::projectors::ReducedModel;
use crate::spaces::Basis;

pub const SPACES_FORMAT: &str = "gorom-spaces/1";
pub const SPACES_FILE: &str = "spaces.json";
pub const TRACE_FILE: &str = "trace.json";
pub const RUN_MANIFEST_FILE: &str = "run.json";
const PRIMAL_FILE: &str = "V.mtx";
const DUAL_FILE: &str = "W.mtx";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacesManifest {
    pub format: String,
    pub n: usize,
    pub r: usize,
    pub k: usize,
    pub tol_rank: f64,
    /// Inner product the bases are orthonormal in.
    pub gram: String,
    pub primal: String,
    pub dual: String,
    pub bundle_hash: Option<String>,
    pub preconditioner: Option<PrecondMeta>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn save_spaces(red: &ReducedModel, dir: &Path, bundle_hash: Option<&str>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    red.primal().save(&dir.join(PRIMAL_FILE))?;
    red.dual().save(&dir.join(DUAL_FILE))?;
    let manifest = SpacesManifest {
        format: SPACES_FORMAT.into(),
        n: red.model().n(),
        r: red.r(),
        k: red.k(),
        tol_rank: red.primal().tol_rank(),
        gram: "R_V0".into(),
        primal: PRIMAL_FILE.into(),
        dual: DUAL_FILE.into(),
        bundle_hash: bundle_hash.map(str::to_owned),
        preconditioner: red.preconditioner().map(|p| p.meta()),
    };
    write_json(&dir.join(SPACES_FILE), &manifest)
}

/// Loads a spaces directory against `model`. When both `expected_hash` and
/// the stored hash are present they must agree.
pub fn load_spaces(dir: &Path, model: Arc<FullOrderModel>, expected_hash: Option<&str>) -> Result<ReducedModel> {
    let path = dir.join(SPACES_FILE);
    let m: SpacesManifest = read_json(&path)?;
    if m.format != SPACES_FORMAT {
        return Err(Error::parse(&path, format!("unsupported format `{}`", m.format)));
    }
    if m.n != model.n() {
        return Err(Error::parse(&path, format!("spaces have n = {}, model has n = {}", m.n, model.n())));
    }
    if let (Some(want), Some(have)) = (expected_hash, m.bundle_hash.as_deref()) {
        if want != have {
            return Err(Error::Config(format!(
                "spaces in {} were built for bundle {have}, not {want}",
                dir.display()
            )));
        }
    }
    let gram = model.v0().matrix_arc();
    let v = Basis::load(&dir.join(&m.primal), gram.clone(), m.tol_rank)?;
    let w = Basis::load(&dir.join(&m.dual), gram, m.tol_rank)?;
    let precond = match &m.preconditioner {
        Some(meta) => Some(InverseInterpolant::from_meta(&model, meta)?),
        None => None,
    };
    ReducedModel::new(model, v, w, precond)
}

pub fn save_trace(trace: &GreedyTrace, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(TRACE_FILE), trace)
}

pub fn load_trace(dir: &Path) -> Result<GreedyTrace> {
    read_json(&dir.join(TRACE_FILE))
}

/// Provenance record written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub bundle_hash: Option<String>,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Seconds since the Unix epoch; zero when timing is disabled.
    pub started: u64,
    pub finished: u64,
}

impl RunManifest {
    pub fn start(command: &str, config: serde_json::Value, timing: bool) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            bundle_hash: None,
            config,
            seeds: BTreeMap::new(),
            started: if timing { now() } else { 0 },
            finished: 0,
        }
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.into(), value);
        self
    }

    pub fn finish(mut self, path: &Path, timing: bool) -> Result<()> {
        self.finished = if timing { now() } else { 0 };
        write_json(path, &self)
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}
