//! Command-line front end.
//!
//! CSV outputs (column order is stable):
//!
//! | file | columns |
//! |------|---------|
//! | truth | `index, xi_1..xi_d, s_1..s_l, wall_time` |
//! | eval | `index, method, xi_1..xi_d, s_1..s_l, r, k, system_size, online_cost, wall_time` |
//! | estimate | `index, method, tag, xi_1..xi_d, s_1..s_l, delta, primal_factor, dual_factor, alpha` |
//! | constants | `index, xi_1..xi_d, delta_vw, delta_l, alpha` |
//! | compare | `method, spaces, r, k, p, samples, l2_error, linf_error, sup_delta, factorizations, online_cost` |
//!
//! `--xi-file` accepts either bare rows of `d` numbers or any of the CSVs
//! above (the `xi_*` columns are used).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::json;

use crate::constants;
use crate::error::{Error, Result};
use crate::estimators::{effectivity_report, AlphaRule, EstimatorConfig, EstimatorKind};
use crate::greedy::{self, GreedyConfig};
use crate::model::bundle::{bundle_hash, load_bundle, save_bundle};
use crate::model::{FullOrderModel, NormKind};
use crate::preconditioner::PrecondConfig;
use crate::problems::{self, ProblemConfig, ProblemKind};
use crate::projectors::{Method, ReducedModel};
use crate::store::{self, load_spaces, save_spaces, save_trace, RunManifest, RUN_MANIFEST_FILE};

/// Default seed for validation samples; distinct from the training default.
pub const DEFAULT_VALIDATION_SEED: u64 = 1001;

#[derive(Parser, Debug)]
#[command(name = "gorom", version, about = "Goal-oriented reduced-basis model order reduction")]
pub struct Cli {
    /// Worker threads for per-parameter work (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write zeros instead of wall-clock times and timestamps.
    #[arg(long, global = true)]
    pub no_timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a benchmark problem bundle.
    Generate(GenerateArgs),
    /// Run the greedy construction and write a spaces directory.
    Offline(OfflineArgs),
    /// Evaluate reduced outputs.
    Eval(EvalArgs),
    /// Compute full-order outputs.
    Truth(TruthArgs),
    /// Compute quasi-optimality constants.
    Constants(ConstantsArgs),
    /// Compute error estimates.
    Estimate(EstimateArgs),
    /// Effectivity statistics from estimate and truth CSVs.
    Stats(StatsArgs),
    /// Compare all projection methods on a validation sample.
    Compare(CompareArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum KindArg {
    Diffusion,
    AdvectionDiffusion,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum NormArg {
    Energy,
    Reference,
}

#[derive(Copy, Clone, Debug, PartialEq, ValueEnum)]
pub enum MethodArg {
    Primal,
    Dual,
    PrimalDual,
    Saddle,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Primal => vec![Method::Primal],
            MethodArg::Dual => vec![Method::Dual],
            MethodArg::PrimalDual => vec![Method::PrimalDual],
            MethodArg::Saddle => vec![Method::Saddle],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum EstimatorArg {
    Residual,
    Preconditioned,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum AlphaArg {
    Auto,
    MinTheta,
    Exact,
    Omit,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Number of unknowns.
    #[arg(long)]
    pub n: usize,
    /// Number of parameters.
    #[arg(long)]
    pub d: usize,
    /// Number of outputs.
    #[arg(long)]
    pub l: usize,
    /// Problem seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Override the V-norm (energy requires a symmetric positive definite operator).
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    /// Replace the output by the compliant one, `L = bᵀ`.
    #[arg(long)]
    pub compliant: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OfflineArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Greedy configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Enable the interpolated-inverse preconditioner.
    #[arg(long)]
    pub precond: bool,
    /// Sketch size of the preconditioner fit (implies --precond).
    #[arg(long)]
    pub precond_sketch: Option<usize>,
    /// Sketch seed of the preconditioner fit (implies --precond).
    #[arg(long)]
    pub precond_seed: Option<u64>,
    /// Constrain preconditioner coefficients to be nonnegative (implies --precond).
    #[arg(long)]
    pub precond_positivity: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    /// Parameter points, one per row.
    #[arg(long)]
    pub xi_file: Option<PathBuf>,
    /// Number of random points when no file is given.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Seed of the random points.
    #[arg(long, default_value_t = DEFAULT_VALIDATION_SEED)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub spaces: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub method: MethodArg,
    #[command(flatten)]
    pub sample: SampleArgs,
    /// Output CSV (standard output if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TruthArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub spaces: PathBuf,
    /// Method whose test spaces are measured.
    #[arg(long, value_enum, default_value = "primal-dual")]
    pub method: MethodArg,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub spaces: PathBuf,
    #[arg(long, value_enum, default_value = "primal-dual")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "residual")]
    pub estimator: EstimatorArg,
    /// Source of the coercivity constant for residual estimators.
    #[arg(long, value_enum, default_value = "auto")]
    pub alpha: AlphaArg,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Estimate CSV.
    #[arg(long)]
    pub est: PathBuf,
    /// Truth CSV.
    #[arg(long)]
    pub truth: PathBuf,
    /// Bundle whose output norm `R_Z` is used (Euclidean if absent).
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// One or more spaces directories.
    #[arg(long, num_args = 1.., required = true)]
    pub spaces: Vec<PathBuf>,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let timing = !cli.no_timing;
    match cli.command {
        Command::Generate(a) => generate(a, timing),
        Command::Offline(a) => offline(a, timing),
        Command::Eval(a) => eval(a, timing),
        Command::Truth(a) => truth(a, timing),
        Command::Constants(a) => constants_cmd(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::Stats(a) => stats(a),
        Command::Compare(a) => compare(a),
    }
}

fn generate(a: GenerateArgs, timing: bool) -> Result<()> {
    let cfg = ProblemConfig {
        kind: match a.kind {
            KindArg::Diffusion => ProblemKind::Diffusion,
            KindArg::AdvectionDiffusion => ProblemKind::AdvectionDiffusion,
        },
        n: a.n,
        d: a.d,
        l: a.l,
        seed: a.seed,
    };
    let manifest = RunManifest::start(
        "generate",
        json!({ "problem": &cfg, "norm": a.norm.map(|n| format!("{n:?}").to_lowercase()), "compliant": a.compliant }),
        timing,
    )
    .seed("problem", a.seed);
    let mut model = problems::generate(&cfg)?;
    if a.compliant {
        model = model.with_compliant_output()?;
    }
    if let Some(n) = a.norm {
        model = model.with_norm(match n {
            NormArg::Energy => NormKind::Energy,
            NormArg::Reference => NormKind::Reference,
        })?;
    }
    let origin = json!({ "problem": &cfg, "compliant": a.compliant });
    save_bundle(&model, &a.out, Some(origin))?;
    let mut manifest = manifest;
    manifest.bundle_hash = Some(bundle_hash(&a.out)?);
    manifest.finish(&a.out.join(RUN_MANIFEST_FILE), timing)
}

fn load(bundle: &Path) -> Result<(Arc<FullOrderModel>, String)> {
    let model = Arc::new(load_bundle(bundle)?);
    Ok((model, bundle_hash(bundle)?))
}

fn offline(a: OfflineArgs, timing: bool) -> Result<()> {
    let (model, hash) = load(&a.bundle)?;
    let mut cfg: GreedyConfig = store::read_json(&a.config)?;
    if a.precond || a.precond_sketch.is_some() || a.precond_seed.is_some() || a.precond_positivity {
        let base = cfg.preconditioner.clone().unwrap_or_default();
        cfg.preconditioner = Some(PrecondConfig {
            sketch_size: a.precond_sketch.unwrap_or(base.sketch_size),
            seed: a.precond_seed.unwrap_or(base.seed),
            positivity: a.precond_positivity || base.positivity,
        });
    }
    let mut manifest = RunManifest::start("offline", serde_json::to_value(&cfg).expect("config serializes"), timing);
    manifest.bundle_hash = Some(hash.clone());
    if let greedy::TrainingSet::Sample { seed, .. } = cfg.training {
        manifest = manifest.seed("training", seed);
    }
    if let Some(p) = &cfg.preconditioner {
        manifest = manifest.seed("sketch", p.seed);
    }
    match greedy::run(model, &cfg) {
        Ok(out) => {
            save_spaces(&out.reduced, &a.out, Some(&hash))?;
            save_trace(&out.trace, &a.out)?;
            manifest.finish(&a.out.join(RUN_MANIFEST_FILE), timing)
        }
        Err(f) => {
            save_trace(&f.trace, &a.out)?;
            Err(f.error)
        }
    }
}

/// Parameter points from `--xi-file` or a seeded sample.
pub fn sample_points(model: &FullOrderModel, s: &SampleArgs) -> Result<Vec<Vec<f64>>> {
    let pts = match &s.xi_file {
        Some(path) => read_points(path, model.d())?,
        None => model.domain().sample(s.samples, s.seed),
    };
    if pts.is_empty() {
        return Err(Error::EmptySample("no parameter points".into()));
    }
    for p in &pts {
        model.check_param(p)?;
    }
    Ok(pts)
}

fn read_points(path: &Path, d: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for r in rdr.records() {
        rows.push(r.map_err(|e| Error::parse(path, e.to_string()))?);
    }
    let mut cols: Vec<usize> = (0..d).collect();
    let mut start = 0;
    if let Some(first) = rows.first() {
        if first.iter().any(|f| f.parse::<f64>().is_err()) {
            start = 1;
            cols = (1..=d)
                .map(|j| {
                    first
                        .iter()
                        .position(|h| h == format!("xi_{j}"))
                        .ok_or_else(|| Error::parse(path, format!("header lacks column xi_{j}")))
                })
                .collect::<Result<_>>()?;
        }
    }
    rows[start..]
        .iter()
        .enumerate()
        .map(|(i, r)| {
            cols.iter()
                .map(|&c| {
                    r.get(c)
                        .and_then(|f| f.parse::<f64>().ok())
                        .ok_or_else(|| Error::parse(path, format!("row {}: expected {d} numbers", i + start + 1)))
                })
                .collect()
        })
        .collect()
}

struct Table {
    wtr: csv::Writer<Box<dyn Write>>,
    path: String,
}

impl Table {
    fn create(out: Option<&Path>, header: Vec<String>) -> Result<Self> {
        let (sink, path): (Box<dyn Write>, String) = match out {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                }
                let f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
                (Box::new(std::io::BufWriter::new(f)), p.display().to_string())
            }
            None => (Box::new(std::io::stdout()), "<stdout>".into()),
        };
        let mut t = Table { wtr: csv::Writer::from_writer(sink), path };
        t.row(header)?;
        Ok(t)
    }

    fn row(&mut self, fields: Vec<String>) -> Result<()> {
        self.wtr
            .write_record(&fields)
            .map_err(|e| Error::parse(Path::new(&self.path), e.to_string()))
    }

    fn finish(mut self) -> Result<()> {
        self.wtr
            .flush()
            .map_err(|e| Error::io(Path::new(&self.path), e))
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn xi_header(d: usize, prefix: &str) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}_{j}")).collect()
}

fn truth(a: TruthArgs, timing: bool) -> Result<()> {
    let (model, _) = load(&a.bundle)?;
    let pts = sample_points(&model, &a.sample)?;
    let rows: Vec<(DVector<f64>, f64)> = pts
        .par_iter()
        .map(|xi| {
            let t = Instant::now();
            let s = problems::truth_output(&model, xi)?;
            Ok((s, if timing { t.elapsed().as_secs_f64() } else { 0.0 }))
        })
        .collect::<Result<_>>()?;
    let mut header = vec!["index".to_string()];
    header.extend(xi_header(model.d(), "xi"));
    header.extend(xi_header(model.l(), "s"));
    header.push("wall_time".into());
    let mut t = Table::create(a.out.as_deref(), header)?;
    for (i, (xi, (s, w))) in pts.iter().zip(&rows).enumerate() {
        let mut f = vec![i.to_string()];
        f.extend(xi.iter().copied().map(num));
        f.extend(s.iter().copied().map(num));
        f.push(num(*w));
        t.row(f)?;
    }
    t.finish()
}

fn eval(a: EvalArgs, timing: bool) -> Result<()> {
    let (model, hash) = load(&a.bundle)?;
    let red = load_spaces(&a.spaces, model.clone(), Some(&hash))?;
    let pts = sample_points(&model, &a.sample)?;
    let mut header = vec!["index".to_string(), "method".into()];
    header.extend(xi_header(model.d(), "xi"));
    header.extend(xi_header(model.l(), "s"));
    header.extend(["r", "k", "system_size", "online_cost", "wall_time"].map(String::from));
    let mut t = Table::create(a.out.as_deref(), header)?;
    for method in a.method.methods() {
        let sols = pts
            .par_iter()
            .map(|xi| {
                let t0 = Instant::now();
                let sol = red.solve(xi, method)?;
                Ok((sol, if timing { t0.elapsed().as_secs_f64() } else { 0.0 }))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, (xi, (sol, w))) in pts.iter().zip(&sols).enumerate() {
            let mut f = vec![i.to_string(), method.to_string()];
            f.extend(xi.iter().copied().map(num));
            f.extend(sol.s.iter().copied().map(num));
            f.extend([red.r().to_string(), red.k().to_string(), sol.system_size.to_string()]);
            f.push(num(sol.online_cost));
            f.push(num(*w));
            t.row(f)?;
        }
    }
    t.finish()
}

fn single_method(m: MethodArg) -> Result<Method> {
    match m.methods().as_slice() {
        [one] => Ok(*one),
        _ => Err(Error::Config("this command takes a single method".into())),
    }
}

fn constants_cmd(a: ConstantsArgs) -> Result<()> {
    let (model, hash) = load(&a.bundle)?;
    let red = load_spaces(&a.spaces, model.clone(), Some(&hash))?;
    let method = single_method(a.method)?;
    let pts = sample_points(&model, &a.sample)?;
    let reports = pts
        .par_iter()
        .map(|xi| {
            let (s, s_dual) = red.explicit_test_spaces(xi, method)?;
            constants::report(&model, xi, red.primal().matrix(), &s, &s_dual)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["index".to_string()];
    header.extend(xi_header(model.d(), "xi"));
    header.extend(["delta_vw", "delta_l", "alpha"].map(String::from));
    let mut t = Table::create(a.out.as_deref(), header)?;
    for (i, r) in reports.iter().enumerate() {
        let mut f = vec![i.to_string()];
        f.extend(r.xi.iter().copied().map(num));
        f.extend([num(r.delta_vw), num(r.delta_l), num(r.alpha)]);
        t.row(f)?;
    }
    t.finish()
}

fn estimator_config(e: EstimatorArg, a: AlphaArg) -> EstimatorConfig {
    EstimatorConfig {
        kind: match e {
            EstimatorArg::Residual => EstimatorKind::Residual,
            EstimatorArg::Preconditioned => EstimatorKind::Preconditioned,
        },
        alpha: match a {
            AlphaArg::Auto => AlphaRule::Auto,
            AlphaArg::MinTheta => AlphaRule::MinTheta,
            AlphaArg::Exact => AlphaRule::Exact,
            AlphaArg::Omit => AlphaRule::Omit,
        },
    }
}

fn estimate_cmd(a: EstimateArgs) -> Result<()> {
    let (model, hash) = load(&a.bundle)?;
    let red = load_spaces(&a.spaces, model.clone(), Some(&hash))?;
    let method = single_method(a.method)?;
    let cfg = estimator_config(a.estimator, a.alpha);
    let pts = sample_points(&model, &a.sample)?;
    let rows = crate::estimators::estimate_many(&red, &pts, method, &cfg)?;
    let mut header = vec!["index".to_string(), "method".into(), "tag".into()];
    header.extend(xi_header(model.d(), "xi"));
    header.extend(xi_header(model.l(), "s"));
    header.extend(["delta", "primal_factor", "dual_factor", "alpha"].map(String::from));
    let mut t = Table::create(a.out.as_deref(), header)?;
    for (i, (sol, rec)) in rows.iter().enumerate() {
        let mut f = vec![i.to_string(), method.to_string(), rec.tag(cfg.kind)];
        f.extend(rec.xi.iter().copied().map(num));
        f.extend(sol.s.iter().copied().map(num));
        f.extend([num(rec.delta), num(rec.primal_factor), num(rec.dual_factor)]);
        f.push(rec.alpha.map(num).unwrap_or_default());
        t.row(f)?;
    }
    t.finish()
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
        let header = rdr
            .headers()
            .map_err(|e| Error::parse(path, e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for r in rdr.records() {
            rows.push(r.map_err(|e| Error::parse(path, e.to_string()))?.iter().map(String::from).collect());
        }
        Ok(Csv { header, rows })
    }

    fn col(&self, name: &str, path: &Path) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, format!("missing column `{name}`")))
    }

    fn outputs(&self, row: &[String], path: &Path) -> Result<DVector<f64>> {
        let cols: Vec<usize> = (1..)
            .map_while(|j| self.header.iter().position(|h| *h == format!("s_{j}")))
            .collect();
        if cols.is_empty() {
            return Err(Error::parse(path, "no output columns s_1.."));
        }
        cols.iter()
            .map(|&c| row[c].parse::<f64>().map_err(|e| Error::parse(path, e.to_string())))
            .collect::<Result<Vec<_>>>()
            .map(DVector::from_vec)
    }
}

fn stats(a: StatsArgs) -> Result<()> {
    let est = Csv::read(&a.est)?;
    let tru = Csv::read(&a.truth)?;
    let model = a.bundle.as_deref().map(load_bundle).transpose()?;
    let (ei, ti) = (est.col("index", &a.est)?, tru.col("index", &a.truth)?);
    let ed = est.col("delta", &a.est)?;
    let em = est.col("method", &a.est)?;
    let methods: std::collections::BTreeSet<&str> = est.rows.iter().map(|r| r[em].as_str()).collect();
    if methods.len() > 1 {
        return Err(Error::parse(&a.est, "estimate file mixes several methods"));
    }
    let truth: BTreeMap<&str, &Vec<String>> = tru.rows.iter().map(|r| (r[ti].as_str(), r)).collect();
    let (mut deltas, mut errors, mut norms) = (Vec::new(), Vec::new(), Vec::new());
    for r in &est.rows {
        let t = truth
            .get(r[ei].as_str())
            .ok_or_else(|| Error::parse(&a.truth, format!("no truth row for index {}", r[ei])))?;
        let s = tru.outputs(t, &a.truth)?;
        let st = est.outputs(r, &a.est)?;
        if s.len() != st.len() {
            return Err(Error::Shape(format!("truth has {} outputs, estimate {}", s.len(), st.len())));
        }
        let znorm = |e: &DVector<f64>| match &model {
            Some(m) => m.z_norm(e),
            None => e.norm(),
        };
        deltas.push(r[ed].parse::<f64>().map_err(|e| Error::parse(&a.est, e.to_string()))?);
        errors.push(znorm(&(&s - &st)));
        norms.push(znorm(&s));
    }
    let rep = effectivity_report(&deltas, &errors, &norms, a.bins)?;
    let text = serde_json::to_string_pretty(&rep).expect("report serializes") + "\n";
    match a.out {
        Some(p) => std::fs::write(&p, text).map_err(|e| Error::io(&p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// One `compare` row.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub method: Method,
    pub r: usize,
    pub k: usize,
    pub p: usize,
    pub samples: usize,
    pub l2_error: f64,
    pub linf_error: f64,
    pub sup_delta: f64,
    pub online_cost: f64,
}

/// Output error norms and estimates of every method over `points`.
pub fn compare_methods(red: &ReducedModel, points: &[Vec<f64>], truth: &[DVector<f64>]) -> Result<Vec<CompareRow>> {
    let model = red.model();
    let cfg = EstimatorConfig::default();
    Method::ALL
        .iter()
        .map(|&method| {
            let rows = crate::estimators::estimate_many(red, points, method, &cfg)?;
            let errs: Vec<f64> = rows.iter().zip(truth).map(|((sol, _), s)| model.z_norm(&(s - &sol.s))).collect();
            let k = errs.len() as f64;
            Ok(CompareRow {
                method,
                r: red.r(),
                k: red.k(),
                p: red.p(),
                samples: points.len(),
                l2_error: (errs.iter().map(|e| e * e).sum::<f64>() / k).sqrt(),
                linf_error: errs.iter().copied().fold(0.0, f64::max),
                sup_delta: rows.iter().map(|(_, r)| r.delta).fold(0.0, f64::max),
                online_cost: rows.first().map_or(0.0, |(s, _)| s.online_cost),
            })
        })
        .collect()
}

fn compare(a: CompareArgs) -> Result<()> {
    let (model, hash) = load(&a.bundle)?;
    let pts = sample_points(&model, &a.sample)?;
    let truth = pts
        .par_iter()
        .map(|xi| problems::truth_output(&model, xi))
        .collect::<Result<Vec<_>>>()?;
    let header = [
        "method", "spaces", "r", "k", "p", "samples", "l2_error", "linf_error", "sup_delta", "factorizations", "online_cost",
    ]
    .map(String::from)
    .to_vec();
    let mut t = Table::create(a.out.as_deref(), header)?;
    for dir in &a.spaces {
        let red = load_spaces(dir, model.clone(), Some(&hash))?;
        let fact = store::load_trace(dir)
            .ok()
            .and_then(|tr| tr.iterations.last().map(|e| e.factorizations.to_string()))
            .unwrap_or_default();
        let name = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        for row in compare_methods(&red, &pts, &truth)? {
            t.row(vec![
                row.method.to_string(),
                name.clone(),
                row.r.to_string(),
                row.k.to_string(),
                row.p.to_string(),
                row.samples.to_string(),
                num(row.l2_error),
                num(row.linf_error),
                num(row.sup_delta),
                fact.clone(),
                num(row.online_cost),
            ])?;
        }
    }
    t.finish()
}
