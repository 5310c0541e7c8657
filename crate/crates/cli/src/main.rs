//! `cgm`: command-line front end for checking, optimizing and exploring
//! constrained goal models.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use cgm_core::benchgen::{self, BenchConfig, BenchMode, Variant};
use cgm_core::json::{canonical, model_from_json, q_to_string};
use cgm_core::reasoner::{self, CoreResult, Realization};
use cgm_core::{smtlib, Cgm, EvolutionMode, LoadError, ObjectiveSpec, SolveOptions, SolveOutcome};
use clap::{Args, Parser, Subcommand, ValueEnum};

// Output errors such as a closed pipe are ignored rather than panicking.
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

const OK: u8 = 0;
const UNREALIZABLE: u8 = 1;
const USAGE: u8 = 2;
const BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "cgm", version, about = "Reason about constrained goal models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Print canonical JSON instead of a report.
    #[arg(long, global = true)]
    json: bool,
    /// Time budget in seconds.
    #[arg(long, global = true, default_value_t = 1000.0)]
    timeout: f64,
    /// Solver seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone, Default)]
struct Objectives {
    /// Objective ids in lexicographic order.
    #[arg(long, value_delimiter = ',')]
    lex: Vec<String>,
    /// Ids to maximize; appended to the order when not already listed.
    #[arg(long, value_delimiter = ',')]
    max: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide realizability.
    Check {
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Find a realization, optimizing any given objectives.
    Solve {
        model: PathBuf,
        #[command(flatten)]
        objectives: Objectives,
        #[command(flatten)]
        common: Common,
    },
    /// Lexicographic optimization; defaults to the objectives declared in the model.
    Optimize {
        model: PathBuf,
        #[command(flatten)]
        objectives: Objectives,
        #[command(flatten)]
        common: Common,
    },
    /// List distinct realizations.
    Enumerate {
        model: PathBuf,
        /// Stop after this many realizations.
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Minimal set of conflicting constraint groups.
    Core {
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Elements and task pairs excluded once an element holds.
    Entail {
        model: PathBuf,
        antecedent: String,
        /// Consider every element, not only tasks and requirements.
        #[arg(long)]
        all: bool,
        /// Also list task pairs that cannot hold together.
        #[arg(long)]
        pairs: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Realization of a changed model closest to a previous one.
    Evolve {
        old: PathBuf,
        new: PathBuf,
        /// Previous realization as JSON, as printed by `solve --json`.
        #[arg(long)]
        from: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Hamming)]
        mode: Mode,
        /// Restrict the objective to these elements.
        #[arg(long, value_delimiter = ',')]
        scope: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate replicated benchmark instances and time the reasoner on them.
    Bench {
        /// Seed model; the bundled meeting scheduler when omitted.
        model: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        p: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "full")]
        variant: Vec<String>,
        #[arg(long, default_value_t = 1)]
        instances: usize,
        /// `check` or a comma-separated objective list; repeatable.
        #[arg(long = "mode", default_value = "check")]
        modes: Vec<String>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Directory for instances and CSV results.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// SMT-LIB v2 script of the encoding.
    Export {
        model: PathBuf,
        #[command(flatten)]
        objectives: Objectives,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Hamming,
    NewElements,
    Both,
    Effort,
}

impl From<Mode> for EvolutionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Hamming => EvolutionMode::Hamming,
            Mode::NewElements => EvolutionMode::NewElements,
            Mode::Both => EvolutionMode::Both,
            Mode::Effort => EvolutionMode::Effort,
        }
    }
}

/// Failure carrying its exit code; the message goes to stderr.
struct Fail(u8, String);

fn usage(msg: impl Into<String>) -> Fail {
    Fail(USAGE, msg.into())
}

impl Common {
    fn options(&self) -> Result<SolveOptions, Fail> {
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(usage(format!("invalid timeout {}", self.timeout)));
        }
        let mut opts = SolveOptions::with_timeout(Duration::from_secs_f64(self.timeout));
        opts.seed = self.seed;
        Ok(opts)
    }
}

impl Objectives {
    fn specs(&self) -> Vec<ObjectiveSpec> {
        let mut specs: Vec<ObjectiveSpec> = self
            .lex
            .iter()
            .map(|id| if self.max.contains(id) { ObjectiveSpec::max(id) } else { ObjectiveSpec::named(id) })
            .collect();
        specs.extend(self.max.iter().filter(|id| !self.lex.contains(id)).map(|id| ObjectiveSpec::max(id)));
        specs
    }

    fn specs_or_declared(&self, m: &Cgm) -> Vec<ObjectiveSpec> {
        let specs = self.specs();
        if specs.is_empty() {
            m.objectives.iter().map(|o| ObjectiveSpec::named(&o.label)).collect()
        } else {
            specs
        }
    }
}

fn read_source(path: &Path) -> Result<String, Fail> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| usage(format!("stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Loads a model written in the modelling language, or in JSON when the text
/// starts with `{`.
fn load_model(path: &Path) -> Result<Cgm, Fail> {
    let text = read_source(path)?;
    let name = path.display();
    if text.trim_start().starts_with('{') {
        return model_from_json(&text).map_err(|e| usage(format!("{name}: {e}")));
    }
    cgm_core::load(&text).map_err(|e| {
        let lines: Vec<String> = match e {
            LoadError::Parse(errs) => errs.iter().map(|e| format!("{name}:{e}")).collect(),
            LoadError::Invalid(report) => report.issues.iter().map(|i| format!("{name}: {i}")).collect(),
        };
        usage(lines.join("\n"))
    })
}

fn print_realization(r: &Realization) {
    for (id, v) in r.objectives.iter().zip(&r.objective_values) {
        outln!("objective {id} = {}", q_to_string(v));
    }
    if !r.attained {
        outln!("optimum not attained");
    }
    let labels: Vec<&str> = r.satisfied.iter().map(String::as_str).collect();
    outln!("satisfied ({}): {}", labels.len(), labels.join(" "));
    for (name, v) in &r.numeric_values {
        outln!("  {name} = {}", q_to_string(v));
    }
}

fn print_core(m: &Cgm, groups: &[cgm_core::GroupTag]) {
    outln!("core ({} group(s)):", groups.len());
    for g in groups {
        outln!("  {g}  [{}]", g.labels(m).join(", "));
    }
}

/// Prints an outcome and maps it to an exit code.
fn report(m: &Cgm, out: &SolveOutcome, json: bool) -> Result<u8, Fail> {
    if json {
        outln!("{}", canonical(out));
    } else {
        outln!("{}", out.status());
        match out {
            SolveOutcome::Realizable { realization } => print_realization(realization),
            SolveOutcome::Unrealizable { core: Some(core) } => print_core(m, core),
            SolveOutcome::Unrealizable { core: None } => {}
            SolveOutcome::Unbounded { objective, realization } => {
                outln!("objective {objective} is unbounded; witness:");
                print_realization(realization);
            }
            SolveOutcome::Budget { best, completed } => {
                outln!("{completed} objective(s) completed");
                if let Some(r) = best {
                    outln!("best so far:");
                    print_realization(r);
                }
            }
        }
    }
    Ok(exit_code(out))
}

fn exit_code(out: &SolveOutcome) -> u8 {
    match out {
        SolveOutcome::Realizable { .. } | SolveOutcome::Unbounded { .. } => OK,
        SolveOutcome::Unrealizable { .. } => UNREALIZABLE,
        SolveOutcome::Budget { .. } => BUDGET,
    }
}

fn optimize(m: &Cgm, specs: &[ObjectiveSpec], common: &Common) -> Result<u8, Fail> {
    let out = reasoner::optimize(m, specs, &common.options()?).map_err(|e| usage(e.to_string()))?;
    report(m, &out, common.json)
}

fn previous_realization(path: &Path) -> Result<Realization, Fail> {
    let text = read_source(path)?;
    let mut v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if let Some(inner) = v.get_mut("realization") {
        v = inner.take();
    }
    serde_json::from_value(v).map_err(|e| usage(format!("{}: not a realization: {e}", path.display())))
}

fn bench(
    model: Option<&Path>,
    grid: (&[usize], &[usize], &[usize], &[String]),
    instances: usize,
    modes: &[String],
    jobs: usize,
    out: Option<&Path>,
    common: &Common,
) -> Result<u8, Fail> {
    let seed_model = match model {
        Some(p) => load_model(p)?,
        None => cgm_core::fixture::meeting_scheduler(),
    };
    let (ns, ks, ps, variants) = grid;
    let mut configs = Vec::new();
    for v in variants {
        let variant: Variant = v.parse().map_err(|e: benchgen::BenchError| usage(e.to_string()))?;
        for &n in ns {
            for &k in ks {
                for &p in ps {
                    configs.push(BenchConfig { n, k, p, variant, seed: common.seed, instances });
                }
            }
        }
    }
    let modes: Vec<BenchMode> =
        modes.iter().map(|s| s.parse()).collect::<Result<_, benchgen::BenchError>>().map_err(|e| usage(e.to_string()))?;
    for c in &configs {
        benchgen::generate_instance(c, &seed_model, 0).map_err(|e| usage(format!("{}: {e}", c.id())))?;
    }
    if let Some(dir) = out {
        for c in &configs {
            let ms = benchgen::generate(c, &seed_model).map_err(|e| usage(e.to_string()))?;
            benchgen::write_instances(c, &ms, &dir.join("instances").join(c.id())).map_err(|e| usage(e.to_string()))?;
        }
    }
    let report = benchgen::run_suite(&configs, &modes, &seed_model, &common.options()?, jobs);
    let rows = report.rows_csv().map_err(|e| usage(e.to_string()))?;
    let summary = report.summary_csv().map_err(|e| usage(e.to_string()))?;
    if let Some(dir) = out {
        let write = |name: &str, text: &str| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
        };
        write("results.csv", &rows)?;
        write("summary.csv", &summary)?;
    }
    out!("{summary}");
    Ok(OK)
}

fn run(cli: Cli) -> Result<u8, Fail> {
    match cli.command {
        Command::Check { model, common } => {
            let m = load_model(&model)?;
            let out = reasoner::check_realizability(&m, &common.options()?);
            if common.json {
                return report(&m, &out, true);
            }
            outln!("{}", out.status());
            if let SolveOutcome::Unrealizable { core: Some(core) } = &out {
                print_core(&m, core);
            }
            Ok(exit_code(&out))
        }
        Command::Solve { model, objectives, common } => {
            let m = load_model(&model)?;
            optimize(&m, &objectives.specs(), &common)
        }
        Command::Optimize { model, objectives, common } => {
            let m = load_model(&model)?;
            let specs = objectives.specs_or_declared(&m);
            if specs.is_empty() {
                return Err(usage("no objectives: pass --lex or declare objectives in the model"));
            }
            optimize(&m, &specs, &common)
        }
        Command::Enumerate { model, limit, common } => {
            let m = load_model(&model)?;
            let mut it = reasoner::enumerate(&m, &common.options()?);
            let mut all = Vec::new();
            for r in it.by_ref() {
                all.push(r);
                if limit.is_some_and(|l| all.len() >= l) {
                    break;
                }
            }
            let complete = it.exhausted();
            let hit_limit = limit.is_some_and(|l| all.len() >= l);
            if common.json {
                let v = serde_json::json!({ "realizations": all, "exhausted": complete });
                outln!("{}", canonical(&v));
            } else {
                for (i, r) in all.iter().enumerate() {
                    let labels: Vec<&str> = r.satisfied.iter().map(String::as_str).collect();
                    outln!("{}: {}", i + 1, labels.join(" "));
                }
                outln!("{} realization(s){}", all.len(), if complete { "" } else { ", more may exist" });
            }
            Ok(if !complete && !hit_limit {
                BUDGET
            } else if all.is_empty() {
                UNREALIZABLE
            } else {
                OK
            })
        }
        Command::Core { model, common } => {
            let m = load_model(&model)?;
            let out = reasoner::unsat_core(&m, &common.options()?);
            if common.json {
                outln!("{}", canonical(&out));
            } else {
                match &out {
                    CoreResult::Core { groups } => {
                        outln!("unrealizable");
                        print_core(&m, groups);
                    }
                    CoreResult::Realizable => outln!("realizable"),
                    CoreResult::Budget => outln!("budget"),
                }
            }
            Ok(match out {
                CoreResult::Core { .. } => UNREALIZABLE,
                CoreResult::Realizable => OK,
                CoreResult::Budget => BUDGET,
            })
        }
        Command::Entail { model, antecedent, all, pairs, common } => {
            let m = load_model(&model)?;
            let opts = common.options()?;
            let forced =
                reasoner::entailed_implications(&m, &antecedent, all, &opts).map_err(|e| usage(e.to_string()))?;
            let pair_list = if pairs {
                reasoner::entailed_pairs(&m, &antecedent, &opts).map_err(|e| usage(e.to_string()))?
            } else {
                Vec::new()
            };
            if common.json {
                let v = serde_json::json!({
                    "antecedent": antecedent,
                    "forcedFalse": forced,
                    "forbiddenPairs": pair_list,
                });
                outln!("{}", canonical(&v));
            } else {
                for l in &forced {
                    outln!("{antecedent} -> !{l}");
                }
                for (a, b) in &pair_list {
                    outln!("{antecedent} -> !({a} & {b})");
                }
            }
            Ok(OK)
        }
        Command::Evolve { old, new, from, mode, scope, common } => {
            let old_m = load_model(&old)?;
            let new_m = load_model(&new)?;
            let prev = previous_realization(&from)?;
            let scope: Option<BTreeSet<String>> = (!scope.is_empty()).then(|| scope.into_iter().collect());
            let out = reasoner::evolve(&old_m, &prev, &new_m, mode.into(), scope.as_ref(), &common.options()?)
                .map_err(|e| usage(e.to_string()))?;
            report(&new_m, &out, common.json)
        }
        Command::Bench { model, n, k, p, variant, instances, modes, jobs, out, common } => {
            bench(model.as_deref(), (&n, &k, &p, &variant), instances, &modes, jobs, out.as_deref(), &common)
        }
        Command::Export { model, objectives } => {
            let m = load_model(&model)?;
            let text = smtlib::export(&m, &objectives.specs()).map_err(|e| usage(e.to_string()))?;
            out!("{text}");
            Ok(OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
