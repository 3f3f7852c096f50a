//! On-disk model bundle: `model.json` plus one MatrixMarket file per term.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::affine::{AffineForm, AffineTerm};
use super::fom::{FullOrderModel, ModelParts, NormKind, Symmetry};
use super::mtx;
use super::num17;
use super::param::{CoefficientFn, ParamRange, ParameterDomain};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

pub const BUNDLE_FORMAT: &str = "gorom-bundle/1";
pub const MODEL_FILE: &str = "model.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermEntry {
    pub coefficient: CoefficientFn,
    pub file: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: String,
    pub symmetry: Symmetry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormKind>,
    pub coercive_affine: bool,
    pub n: usize,
    pub l: usize,
    pub domain: Vec<ParamRange>,
    #[serde(with = "num17::vec")]
    pub reference: Vec<f64>,
    pub operator: Vec<TermEntry>,
    pub rhs: Vec<TermEntry>,
    pub output: Vec<TermEntry>,
    pub r_v0: String,
    #[serde(default)]
    pub r_z: Option<String>,
    /// Free-form provenance, e.g. the generator configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<serde_json::Value>,
}

fn require(dir: &Path, file: &str) -> Result<PathBuf> {
    let p = dir.join(file);
    if !p.is_file() {
        return Err(Error::io(
            &p,
            std::io::Error::new(std::io::ErrorKind::NotFound, "bundle file missing"),
        ));
    }
    Ok(p)
}

fn load_matrix_terms(dir: &Path, entries: &[TermEntry]) -> Result<Vec<AffineTerm<CsrMatrix>>> {
    entries
        .iter()
        .map(|e| {
            let m = mtx::read_sparse(&require(dir, &e.file)?)?;
            Ok(AffineTerm::new(e.coefficient.clone(), m))
        })
        .collect()
}

fn load_vector_terms(dir: &Path, entries: &[TermEntry]) -> Result<Vec<AffineTerm<DVector<f64>>>> {
    entries
        .iter()
        .map(|e| {
            let p = require(dir, &e.file)?;
            let m = mtx::read_dense(&p)?;
            if m.ncols() != 1 {
                return Err(Error::parse(&p, format!("expected a column vector, got {} columns", m.ncols())));
            }
            Ok(AffineTerm::new(e.coefficient.clone(), m.column(0).into_owned()))
        })
        .collect()
}

pub fn read_manifest(dir: &Path) -> Result<ModelManifest> {
    let path = require(dir, MODEL_FILE)?;
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let man: ModelManifest =
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
    if man.format != BUNDLE_FORMAT {
        return Err(Error::parse(&path, format!("unknown bundle format `{}`", man.format)));
    }
    Ok(man)
}

pub fn load_bundle(dir: &Path) -> Result<FullOrderModel> {
    let man = read_manifest(dir)?;
    let a = AffineForm::<CsrMatrix>::new(load_matrix_terms(dir, &man.operator)?)?;
    let b = AffineForm::<DVector<f64>>::new(load_vector_terms(dir, &man.rhs)?)?;
    let l = AffineForm::<CsrMatrix>::new(load_matrix_terms(dir, &man.output)?)?;
    let r_v0 = mtx::read_sparse(&require(dir, &man.r_v0)?)?;
    let r_z = match &man.r_z {
        Some(f) => Some(mtx::read_sparse(&require(dir, f)?)?),
        None => None,
    };
    let model = FullOrderModel::new(ModelParts {
        a,
        b,
        l,
        r_v0,
        r_z,
        domain: ParameterDomain::new(man.domain.clone())?,
        reference: man.reference.clone(),
        symmetry: man.symmetry,
        norm: man.norm,
        coercive_affine: man.coercive_affine,
    })?;
    if model.n() != man.n || model.l() != man.l {
        return Err(Error::parse(
            dir.join(MODEL_FILE),
            format!("declared n={} l={}, files give n={} l={}", man.n, man.l, model.n(), model.l()),
        ));
    }
    Ok(model)
}

/// Writes the bundle; `origin` is echoed into `model.json`.
pub fn save_bundle(model: &FullOrderModel, dir: &Path, origin: Option<serde_json::Value>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut operator = Vec::new();
    for (i, t) in model.a_form().terms().iter().enumerate() {
        let file = format!("A_{i}.mtx");
        mtx::write_coordinate(&dir.join(&file), &t.value)?;
        operator.push(TermEntry { coefficient: t.coefficient.clone(), file });
    }
    let mut rhs = Vec::new();
    for (i, t) in model.b_form().terms().iter().enumerate() {
        let file = format!("b_{i}.mtx");
        let col = nalgebra::DMatrix::from_column_slice(t.value.len(), 1, t.value.as_slice());
        mtx::write_array(&dir.join(&file), &col)?;
        rhs.push(TermEntry { coefficient: t.coefficient.clone(), file });
    }
    let mut output = Vec::new();
    for (i, t) in model.l_form().terms().iter().enumerate() {
        let file = format!("L_{i}.mtx");
        mtx::write_coordinate(&dir.join(&file), &t.value)?;
        output.push(TermEntry { coefficient: t.coefficient.clone(), file });
    }
    mtx::write_coordinate(&dir.join("R_V0.mtx"), model.r_v0())?;
    mtx::write_coordinate(&dir.join("R_Z.mtx"), model.r_z())?;
    let man = ModelManifest {
        format: BUNDLE_FORMAT.to_string(),
        symmetry: model.symmetry(),
        norm: Some(model.norm_kind()),
        coercive_affine: model.is_coercive_affine(),
        n: model.n(),
        l: model.l(),
        domain: model.domain().components().to_vec(),
        reference: model.reference().to_vec(),
        operator,
        rhs,
        output,
        r_v0: "R_V0.mtx".into(),
        r_z: Some("R_Z.mtx".into()),
        origin,
    };
    let path = dir.join(MODEL_FILE);
    let text = serde_json::to_string_pretty(&man).map_err(|e| Error::parse(&path, e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// SHA-256 over `model.json` and every file it references, in manifest order.
pub fn bundle_hash(dir: &Path) -> Result<String> {
    let man = read_manifest(dir)?;
    let mut files = vec![MODEL_FILE.to_string()];
    for e in man.operator.iter().chain(&man.rhs).chain(&man.output) {
        files.push(e.file.clone());
    }
    files.push(man.r_v0.clone());
    files.extend(man.r_z.clone());
    let mut h = Sha256::new();
    for f in files {
        let p = require(dir, &f)?;
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        h.update(f.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}
