//! Scalability benchmarks built from replicas of a seed model.
//!
//! Instance `i` of a configuration joins `n` renamed replicas (labels get the
//! suffix `_1` .. `_n`) under a new root goal `G` with a single refinement `R`
//! whose sources are the replicas' mandatory requirements. `G` is asserted
//! true. Random edges are added between tasks of different replicas and
//! random preferences between refinements of a common target goal.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::print;
use crate::encoder::ObjectiveSpec;
use crate::fixture::{meeting_scheduler, REDUCED_DROP};
use crate::formula::{NumRef, Term};
use crate::json::q_to_string;
use crate::model::{
    build_model, Cgm, Decl, DeclKind, ElementKind, ObjectiveBody, Preference, RelationEdge, PENALTY, REWARD,
};
use crate::reasoner::{self, SolveOptions};
use crate::rng::Stream;
use cgm_smt::Direction;

pub const ROOT: &str = "G";
pub const ROOT_REFINEMENT: &str = "R";
/// Objective labels summing the replicas' attributes of the same name.
pub const SUM_OBJECTIVES: [&str; 3] = ["cost", "workTime", "Weight"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Reduced,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::Reduced => "reduced",
        })
    }
}

impl FromStr for Variant {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Variant::Full),
            "reduced" => Ok(Variant::Reduced),
            _ => Err(BenchError::Config(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub variant: Variant,
    pub seed: u64,
    pub instances: usize,
}

impl BenchConfig {
    pub fn id(&self) -> String {
        format!("{}-n{}-k{}-p{}-s{}", self.variant, self.n, self.k, self.p, self.seed)
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("generated instance is invalid: {0}")]
    Invalid(#[from] crate::model::ValidationReport),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn suffixed(label: &str, i: usize) -> String {
    format!("{label}_{i}")
}

/// Seed declarations with reward/penalty values spelled as `set` statements so
/// that renamed replicas point at their own renamed attributes.
fn replica_decls(seed: &Cgm, drop: &BTreeSet<&str>) -> Vec<DeclKind> {
    let mut out = Vec::new();
    for d in seed.to_decls() {
        match d.kind {
            DeclKind::Element { kind, label, display_name, reward, penalty, prereq_pos, prereq_neg } => {
                if drop.contains(label.as_str()) {
                    continue;
                }
                let values: Vec<DeclKind> = [(REWARD, reward), (PENALTY, penalty)]
                    .into_iter()
                    .filter_map(|(attr, q)| {
                        q.map(|sat| DeclKind::Set { element: label.clone(), attr: attr.to_string(), sat, deny: None })
                    })
                    .collect();
                out.push(DeclKind::Element {
                    kind,
                    label,
                    display_name,
                    reward: None,
                    penalty: None,
                    prereq_pos,
                    prereq_neg,
                });
                out.extend(values);
            }
            DeclKind::Refine { ref label, .. } if label.as_deref().is_some_and(|l| drop.contains(l)) => {}
            // Synthetic labels are regenerated for each replica.
            DeclKind::Refine { label: Some(l), target, sources, prereq_pos, prereq_neg } if l.starts_with('_') => {
                out.push(DeclKind::Refine { label: None, target, sources, prereq_pos, prereq_neg })
            }
            DeclKind::Set { ref element, .. } if drop.contains(element.as_str()) => {}
            DeclKind::Edge(ref e) if drop.contains(e.endpoints().0) || drop.contains(e.endpoints().1) => {}
            // Seed preferences, assertions and objectives are replaced.
            DeclKind::Prefer(_) | DeclKind::Assert { .. } | DeclKind::Objective { .. } => {}
            k => out.push(k),
        }
    }
    out
}

/// The reduced variant removes fixture-specific labels, so it needs the
/// fixture itself as seed.
fn drop_set(cfg: &BenchConfig, seed: &Cgm) -> Result<BTreeSet<&'static str>, BenchError> {
    match cfg.variant {
        Variant::Full => Ok(BTreeSet::new()),
        Variant::Reduced if seed.structural_hash() == meeting_scheduler().structural_hash() => {
            Ok(REDUCED_DROP.iter().copied().collect())
        }
        Variant::Reduced => Err(BenchError::Config("the reduced variant requires the bundled fixture as seed".into())),
    }
}

/// Draws `count` distinct items from a lazily described pool by rejection.
fn distinct<T: Ord + Clone>(rng: &mut Stream, count: usize, pool_size: usize, mut draw: impl FnMut(&mut Stream) -> T) -> Vec<T> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count.min(pool_size) {
        let x = draw(rng);
        if seen.insert(x.clone()) {
            out.push(x);
        }
    }
    out
}

pub fn generate_instance(cfg: &BenchConfig, seed: &Cgm, instance: usize) -> Result<Cgm, BenchError> {
    if cfg.n == 0 || cfg.k == 0 {
        return Err(BenchError::Config("n and k must be at least 1".into()));
    }
    let drop = drop_set(cfg, seed)?;
    let class = seed.classify();
    let mandatory: Vec<&String> = class.mandatory.iter().collect();
    if mandatory.is_empty() {
        return Err(BenchError::Config("the seed model has no mandatory requirement".into()));
    }
    let tasks: Vec<&String> = class.tasks.iter().filter(|t| !drop.contains(t.as_str())).collect();
    let mut alternatives: Vec<(String, String)> = Vec::new();
    for a in &seed.refinements {
        for b in &seed.refinements {
            if a.label != b.label
                && a.target == b.target
                && !drop.contains(a.label.as_str())
                && !drop.contains(b.label.as_str())
            {
                alternatives.push((a.label.clone(), b.label.clone()));
            }
        }
    }
    let contributions = (cfg.k - 1) * cfg.n;
    let conflicts = cfg.n;
    let preferences = cfg.p * cfg.n;
    let cross_pairs = tasks.len() * tasks.len() * cfg.n * (cfg.n - 1);
    if contributions + conflicts > 0 && cross_pairs == 0 {
        return Err(BenchError::Config("random edges need at least two replicas with tasks".into()));
    }
    if contributions > cross_pairs || conflicts > cross_pairs / 2 {
        return Err(BenchError::Config("more random edges requested than distinct task pairs".into()));
    }
    if preferences > alternatives.len() * cfg.n {
        return Err(BenchError::Config("more preferences requested than refinement pairs".into()));
    }

    let base = replica_decls(seed, &drop);
    let mut decls: Vec<Decl> = Vec::new();
    for i in 1..=cfg.n {
        let f = |l: &str| suffixed(l, i);
        decls.extend(base.iter().map(|k| Decl::new(k.renamed(&f))));
    }
    decls.push(Decl::new(DeclKind::Element {
        kind: ElementKind::Goal,
        label: ROOT.into(),
        display_name: None,
        reward: None,
        penalty: None,
        prereq_pos: None,
        prereq_neg: None,
    }));
    decls.push(Decl::new(DeclKind::Refine {
        label: Some(ROOT_REFINEMENT.into()),
        target: ROOT.into(),
        sources: (1..=cfg.n).flat_map(|i| mandatory.iter().map(move |m| suffixed(m, i))).collect(),
        prereq_pos: None,
        prereq_neg: None,
    }));

    let mut rng = Stream::new(cfg.seed, instance as u64);
    let n = cfg.n;
    let cross_task = |rng: &mut Stream| {
        let i = rng.index(n);
        let j = (i + 1 + rng.index(n - 1)) % n;
        (suffixed(tasks[rng.index(tasks.len())], i + 1), suffixed(tasks[rng.index(tasks.len())], j + 1))
    };
    for (src, dst) in distinct(&mut rng, contributions, cross_pairs, cross_task) {
        decls.push(Decl::new(DeclKind::Edge(RelationEdge::Contribution { src, dst })));
    }
    let unordered = |rng: &mut Stream| {
        let (a, b) = cross_task(rng);
        if a < b { (a, b) } else { (b, a) }
    };
    for (a, b) in distinct(&mut rng, conflicts, cross_pairs / 2, unordered) {
        decls.push(Decl::new(DeclKind::Edge(RelationEdge::Conflict { a, b })));
    }
    let pick_pref = |rng: &mut Stream| {
        let (a, b) = &alternatives[rng.index(alternatives.len())];
        let i = 1 + rng.index(n);
        (suffixed(a, i), suffixed(b, i))
    };
    for (preferred, over) in distinct(&mut rng, preferences, alternatives.len() * n, pick_pref) {
        decls.push(Decl::new(DeclKind::Prefer(Preference { preferred, over })));
    }

    decls.push(Decl::new(DeclKind::Assert { label: ROOT.into(), value: true }));
    for name in SUM_OBJECTIVES {
        if seed.attribute(name).is_none() {
            continue;
        }
        let sum = (1..=n)
            .map(|i| Term::Var(NumRef::Global(suffixed(name, i))))
            .reduce(|a, b| Term::Add(Box::new(a), Box::new(b)))
            .expect("n >= 1");
        decls.push(Decl::new(DeclKind::Objective {
            label: Some(name.into()),
            direction: Direction::Minimize,
            body: ObjectiveBody::Term(sum),
        }));
    }
    Ok(build_model(&decls)?)
}

pub fn generate(cfg: &BenchConfig, seed: &Cgm) -> Result<Vec<Cgm>, BenchError> {
    (0..cfg.instances).map(|i| generate_instance(cfg, seed, i)).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a BenchConfig,
    config_id: String,
    files: Vec<String>,
}

/// Writes one `.cgm` file per instance plus `manifest.json` into `dir`.
pub fn write_instances(cfg: &BenchConfig, instances: &[Cgm], dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BenchError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut files = Vec::new();
    for (i, m) in instances.iter().enumerate() {
        let name = format!("{}-{i:03}.cgm", cfg.id());
        let path = dir.join(&name);
        fs::write(&path, print(m)).map_err(io(&path))?;
        files.push(name);
    }
    let manifest = Manifest { config: cfg, config_id: cfg.id(), files: files.clone() };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(files.into_iter().map(|f| dir.join(f)).collect())
}

/// A reasoning request applied to every instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BenchMode {
    Check,
    Optimize(Vec<ObjectiveSpec>),
}

impl BenchMode {
    pub fn name(&self) -> String {
        match self {
            BenchMode::Check => "check".into(),
            BenchMode::Optimize(specs) => {
                let ids: Vec<&str> = specs.iter().map(|s| s.id.as_str()).collect();
                format!("lex:{}", ids.join(","))
            }
        }
    }
}

impl FromStr for BenchMode {
    type Err = BenchError;

    /// `check`, or a comma-separated list of objective ids to minimize.
    fn from_str(s: &str) -> Result<Self, BenchError> {
        let s = s.strip_prefix("lex:").unwrap_or(s);
        if s == "check" {
            return Ok(BenchMode::Check);
        }
        let specs: Vec<ObjectiveSpec> = s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(ObjectiveSpec::min).collect();
        if specs.is_empty() {
            return Err(BenchError::Config(format!("empty mode `{s}`")));
        }
        Ok(BenchMode::Optimize(specs))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub config_id: String,
    pub instance: usize,
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub variant: Variant,
    pub mode: String,
    pub status: String,
    pub time_ms: u128,
    pub obj_values: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchSummary {
    pub config_id: String,
    pub mode: String,
    pub instances: usize,
    pub solved: usize,
    /// Empty when no instance was solved.
    pub median_ms: Option<f64>,
    pub pct_unrealizable: f64,
    pub pct_budget: f64,
}

pub struct SuiteReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<BenchSummary>,
}

fn run_one(cfg: &BenchConfig, seed: &Cgm, instance: usize, mode: &BenchMode, opts: &SolveOptions) -> BenchRow {
    let start = Instant::now();
    let outcome = generate_instance(cfg, seed, instance).map_err(|e| e.to_string()).and_then(|m| match mode {
        BenchMode::Check => Ok(reasoner::check_realizability(&m, &SolveOptions { core: false, ..opts.clone() })),
        BenchMode::Optimize(specs) => {
            reasoner::optimize(&m, specs, &SolveOptions { core: false, ..opts.clone() }).map_err(|e| e.to_string())
        }
    });
    let time_ms = start.elapsed().as_millis();
    let (status, obj_values) = match &outcome {
        Ok(o) => {
            let values = o.realization().map(|r| {
                r.objective_values.iter().map(q_to_string).collect::<Vec<_>>().join(";")
            });
            (o.status().to_string(), values.unwrap_or_default())
        }
        Err(e) => (format!("error: {e}"), String::new()),
    };
    BenchRow {
        config_id: cfg.id(),
        instance,
        n: cfg.n,
        k: cfg.k,
        p: cfg.p,
        variant: cfg.variant,
        mode: mode.name(),
        status,
        time_ms,
        obj_values,
    }
}

fn summarize(rows: &[BenchRow]) -> BenchSummary {
    let first = &rows[0];
    let solved: Vec<u128> = rows
        .iter()
        .filter(|r| r.status == "realizable" || r.status == "unbounded")
        .map(|r| r.time_ms)
        .collect();
    let pct = |status: &str| 100.0 * rows.iter().filter(|r| r.status == status).count() as f64 / rows.len() as f64;
    let median_ms = if solved.is_empty() {
        None
    } else {
        let mut t = solved.clone();
        t.sort_unstable();
        let mid = t.len() / 2;
        Some(if t.len() % 2 == 1 { t[mid] as f64 } else { (t[mid - 1] + t[mid]) as f64 / 2.0 })
    };
    BenchSummary {
        config_id: first.config_id.clone(),
        mode: first.mode.clone(),
        instances: rows.len(),
        solved: solved.len(),
        median_ms,
        pct_unrealizable: pct("unrealizable"),
        pct_budget: pct("budget"),
    }
}

/// Runs every mode on every instance of every configuration with `jobs`
/// worker threads. Rows come back in configuration, mode and instance order.
pub fn run_suite(
    configs: &[BenchConfig],
    modes: &[BenchMode],
    seed: &Cgm,
    opts: &SolveOptions,
    jobs: usize,
) -> SuiteReport {
    let tasks: Vec<(&BenchConfig, &BenchMode, usize)> = configs
        .iter()
        .flat_map(|c| modes.iter().flat_map(move |m| (0..c.instances).map(move |i| (c, m, i))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    let rows: Vec<BenchRow> =
        pool.install(|| tasks.par_iter().map(|(c, m, i)| run_one(c, seed, *i, m, opts)).collect());
    let mut summary = Vec::new();
    let mut start = 0;
    for c in configs {
        for _ in modes {
            if c.instances > 0 {
                summary.push(summarize(&rows[start..start + c.instances]));
            }
            start += c.instances;
        }
    }
    SuiteReport { rows, summary }
}

impl SuiteReport {
    /// Per-instance CSV; the header is
    /// `config_id,instance,n,k,p,variant,mode,status,time_ms,obj_values`.
    pub fn rows_csv(&self) -> Result<String, BenchError> {
        to_csv(&self.rows)
    }

    /// Per-configuration CSV; the header is
    /// `config_id,mode,instances,solved,median_ms,pct_unrealizable,pct_budget`.
    pub fn summary_csv(&self) -> Result<String, BenchError> {
        to_csv(&self.summary)
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
