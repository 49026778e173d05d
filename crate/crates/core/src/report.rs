//! Batch evaluation of plan directories, report files and run comparison.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::constraints::{aggregate_rates, check_plan, CheckConfig, ConstraintReport, Query, RateSummary};
use crate::embedding::{EmbedError, Embedder, EmbedderConfig};
use crate::metrics::{attraction_day_samples, evaluate_all, AttractionDaySample, MetricError, ScoreReport};
use crate::params::{
    builtin_category_durations, estimate_attraction_params, estimate_meal_params, DurationClass, ParamError, ParamFile,
    ParamSet,
};
use crate::plan::{parse_plan, parse_plan_json_str, ItineraryPlan};
use crate::sandbox::{load_sandbox, Sandbox, SandboxError};
use crate::vocab::Meal;

/// Two scores closer than this are reported as tied.
pub const TIE_BAND: f64 = 1e-9;

pub const SCORES_HEADER: [&str; 8] =
    ["plan_id", "category", "delivered", "t_meal", "t_attrac", "s_spatial", "s_persona", "s_ord"];
pub const RATES_HEADER: [&str; 8] =
    ["category", "plans", "delivery_rate", "cpr_micro", "cpr_macro", "hcpr_micro", "hcpr_macro", "final_pass_rate"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Config(String),
    #[error("no plans found in {0}")]
    NoPlans(String),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("{path} line {line}: {message}")]
    Query { path: String, line: usize, message: String },
    #[error("runs cover different queries: {0}")]
    QueryMismatch(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Everything one evaluation run needs.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub sandbox_root: PathBuf,
    pub queries_file: PathBuf,
    pub plans_dir: PathBuf,
    pub gold_dir: Option<PathBuf>,
    pub params_file: Option<PathBuf>,
    pub embed: EmbedderConfig,
    pub check: CheckConfig,
    /// Worker count; `None` uses every logical core.
    pub jobs: Option<usize>,
    pub output_dir: PathBuf,
}

impl RunManifest {
    pub fn new(sandbox_root: impl Into<PathBuf>, queries_file: impl Into<PathBuf>, plans_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            sandbox_root: sandbox_root.into(),
            queries_file: queries_file.into(),
            plans_dir: plans_dir.into(),
            gold_dir: None,
            params_file: None,
            embed: EmbedderConfig::default(),
            check: CheckConfig::default(),
            jobs: None,
            output_dir: output_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let mut required = vec![&self.sandbox_root, &self.queries_file, &self.plans_dir];
        required.extend(self.gold_dir.iter());
        required.extend(self.params_file.iter());
        for p in required {
            if !p.exists() {
                return Err(ReportError::Config(format!("{} does not exist", p.display())));
            }
        }
        if self.jobs == Some(0) {
            return Err(ReportError::Config("--jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanOutcome {
    pub id: String,
    pub category: DurationClass,
    pub constraints: ConstraintReport,
    pub scores: Option<ScoreReport>,
}

impl PlanOutcome {
    pub fn delivered(&self) -> bool {
        self.constraints.delivered
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Sorted by plan id.
    pub outcomes: Vec<PlanOutcome>,
    /// Per class label, plus `"all"`.
    pub rates: BTreeMap<String, RateSummary>,
    pub warnings: Vec<String>,
}

/// Reads one query per nonblank line.
pub fn load_queries(path: &Path) -> Result<Vec<Query>, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| ReportError::Query { path: path.display().to_string(), line: i + 1, message };
        let q: Query = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        q.validate().map_err(|e| err(e.to_string()))?;
        if q.id.is_empty() {
            return Err(err("query has no id".into()));
        }
        if !seen.insert(q.id.clone()) {
            return Err(err(format!("duplicate query id {}", q.id)));
        }
        out.push(q);
    }
    Ok(out)
}

/// Plan files in `dir` keyed by file stem; `.txt` and `.json` are accepted.
pub fn list_plan_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>, ReportError> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if !path.is_file() || !matches!(ext, "txt" | "json") {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.entry(stem.to_string()).or_insert(path);
        }
    }
    Ok(out)
}

pub fn read_plan_file(path: &Path) -> Result<ItineraryPlan, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("unreadable: {e}"))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") { parse_plan_json_str(&text) } else { parse_plan(&text) };
    parsed.map_err(|e| format!("unparsable: {e}"))
}

struct Shared<'a> {
    sandbox: &'a Sandbox,
    params: &'a ParamFile,
    embedder: &'a dyn Embedder,
    check: &'a CheckConfig,
    gold_dir: Option<&'a Path>,
}

/// Embedding failures abort the run; every other problem stays in the plan's report.
fn evaluate_one(query: &Query, plan_path: Option<&PathBuf>, ctx: &Shared<'_>) -> Result<PlanOutcome, EmbedError> {
    let category = query.duration_class().expect("validated query");
    let undelivered = |why: String| PlanOutcome {
        id: query.id.clone(),
        category,
        constraints: ConstraintReport::undelivered(why),
        scores: None,
    };
    let Some(path) = plan_path else { return Ok(undelivered("no plan file".into())) };
    let plan = match read_plan_file(path) {
        Ok(p) => p,
        Err(why) => return Ok(undelivered(why)),
    };
    let constraints = check_plan(&plan, query, ctx.sandbox, ctx.check);

    let gold = ctx.gold_dir.and_then(|dir| {
        ["txt", "json"].iter().map(|ext| dir.join(format!("{}.{ext}", query.id))).find(|p| p.is_file())
    });
    let mut notes = Vec::new();
    let gold = gold.and_then(|p| match read_plan_file(&p) {
        Ok(g) => Some(g),
        Err(why) => {
            notes.push(format!("reference plan {why}"));
            None
        }
    });
    let scores = match &query.persona {
        None => {
            notes.push("query has no persona; scores skipped".into());
            None
        }
        Some(persona) => {
            let params: ParamSet = ctx.params.get(category);
            match evaluate_all(&plan, persona, gold.as_ref(), ctx.sandbox, &params, ctx.embedder) {
                Ok(mut s) => {
                    s.notes.extend(notes.drain(..));
                    Some(s)
                }
                Err(MetricError::Embedding(e)) => return Err(e),
                Err(e) => {
                    notes.push(format!("scoring failed: {e}"));
                    None
                }
            }
        }
    };
    let mut constraints = constraints;
    if scores.is_none() && !notes.is_empty() {
        constraints.failure = Some(notes.join("; "));
    }
    Ok(PlanOutcome { id: query.id.clone(), category, constraints, scores })
}

/// Aggregated rates per duration class and overall.
pub fn rates_by_class(outcomes: &[PlanOutcome]) -> BTreeMap<String, RateSummary> {
    let mut groups: BTreeMap<String, Vec<ConstraintReport>> = BTreeMap::new();
    for o in outcomes {
        groups.entry(o.category.label().to_string()).or_default().push(o.constraints.clone());
        groups.entry("all".into()).or_default().push(o.constraints.clone());
    }
    groups
        .into_iter()
        .map(|(k, reports)| (k, aggregate_rates(&reports).expect("groups are nonempty")))
        .collect()
}

/// Evaluates every query's plan without writing anything.
pub fn evaluate_run(manifest: &RunManifest) -> Result<RunResult, ReportError> {
    manifest.validate()?;
    let sandbox = load_sandbox(&manifest.sandbox_root)?;
    let queries = load_queries(&manifest.queries_file)?;
    let plans = list_plan_files(&manifest.plans_dir)?;
    if plans.is_empty() {
        return Err(ReportError::NoPlans(manifest.plans_dir.display().to_string()));
    }
    let params = match &manifest.params_file {
        Some(p) => ParamFile::load(p)?,
        None => ParamFile::builtin(),
    };
    let embedder = manifest.embed.build()?;
    evaluate_loaded(&sandbox, &queries, &plans, &params, embedder.as_ref(), manifest)
}

/// The evaluation core, for callers that already hold loaded inputs.
pub fn evaluate_loaded(
    sandbox: &Sandbox,
    queries: &[Query],
    plans: &BTreeMap<String, PathBuf>,
    params: &ParamFile,
    embedder: &dyn Embedder,
    manifest: &RunManifest,
) -> Result<RunResult, ReportError> {
    let ctx = Shared { sandbox, params, embedder, check: &manifest.check, gold_dir: manifest.gold_dir.as_deref() };
    let known: BTreeSet<&str> = queries.iter().map(|q| q.id.as_str()).collect();
    let warnings: Vec<String> = plans
        .keys()
        .filter(|id| !known.contains(id.as_str()))
        .map(|id| format!("plan {id} has no matching query and was ignored"))
        .collect();

    let mut sorted: Vec<&Query> = queries.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let run = || sorted.par_iter().map(|q| evaluate_one(q, plans.get(&q.id), &ctx)).collect::<Result<Vec<_>, _>>();
    let outcomes = match manifest.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| ReportError::Config(format!("worker pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let rates = rates_by_class(&outcomes);
    Ok(RunResult { outcomes, rates, warnings })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn scores_csv(result: &RunResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCORES_HEADER).expect("in-memory write");
    for o in &result.outcomes {
        let s = o.scores.as_ref();
        w.write_record([
            o.id.clone(),
            o.category.label().to_string(),
            o.delivered().to_string(),
            cell(s.and_then(|s| s.t_meal)),
            cell(s.map(|s| s.t_attrac)),
            cell(s.map(|s| s.s_spatial)),
            cell(s.and_then(|s| s.s_persona)),
            cell(s.and_then(|s| s.s_ord)),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn rates_csv(result: &RunResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RATES_HEADER).expect("in-memory write");
    let count = |k: &str| result.outcomes.iter().filter(|o| k == "all" || o.category.label() == k).count();
    for (k, r) in &result.rates {
        w.write_record([
            k.clone(),
            count(k).to_string(),
            format!("{:.6}", r.delivery_rate),
            format!("{:.6}", r.cpr_micro),
            format!("{:.6}", r.cpr_macro),
            format!("{:.6}", r.hcpr_micro),
            format!("{:.6}", r.hcpr_macro),
            format!("{:.6}", r.final_pass_rate),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn summary_text(result: &RunResult) -> String {
    let mut s = String::new();
    let delivered = result.outcomes.iter().filter(|o| o.delivered()).count();
    let _ = writeln!(s, "evaluated {} plans, {} delivered", result.outcomes.len(), delivered);
    for (k, r) in &result.rates {
        let _ = writeln!(
            s,
            "{k:>6}: delivery {:.3}  cpr {:.3}/{:.3}  hcpr {:.3}/{:.3}  final {:.3}",
            r.delivery_rate, r.cpr_micro, r.cpr_macro, r.hcpr_micro, r.hcpr_macro, r.final_pass_rate
        );
    }
    for w in &result.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// Writes `scores.csv`, `rates.csv` and `reports/<id>.json`.
pub fn write_artifacts(result: &RunResult, out: &Path) -> Result<(), ReportError> {
    let reports = out.join("reports");
    std::fs::create_dir_all(&reports).map_err(|e| io_err(&reports, e))?;
    let write = |path: PathBuf, body: String| std::fs::write(&path, body).map_err(|e| io_err(&path, e));
    write(out.join("scores.csv"), scores_csv(result))?;
    write(out.join("rates.csv"), rates_csv(result))?;
    for o in &result.outcomes {
        let body = serde_json::to_string_pretty(o).expect("outcome serializes");
        write(reports.join(format!("{}.json", o.id)), format!("{body}\n"))?;
    }
    Ok(())
}

/// Evaluates, writes artifacts and returns the result for printing.
pub fn run_evaluate(manifest: &RunManifest) -> Result<RunResult, ReportError> {
    let result = evaluate_run(manifest)?;
    write_artifacts(&result, &manifest.output_dir)?;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Better {
    A,
    B,
    Tie,
}

impl Better {
    pub fn of(a: Option<f64>, b: Option<f64>) -> Self {
        match (a, b) {
            (Some(a), Some(b)) if a > b + TIE_BAND => Better::A,
            (Some(a), Some(b)) if b > a + TIE_BAND => Better::B,
            _ => Better::Tie,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MeanScores {
    pub t_meal: Option<f64>,
    pub t_attrac: Option<f64>,
    pub s_spatial: Option<f64>,
    pub s_persona: Option<f64>,
    pub s_ord: Option<f64>,
}

impl MeanScores {
    pub fn cells(&self) -> [Option<f64>; 5] {
        [self.t_meal, self.t_attrac, self.s_spatial, self.s_persona, self.s_ord]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassComparison {
    pub category: String,
    /// Plan ids delivered and scored in both runs.
    pub plan_ids: Vec<String>,
    pub a: MeanScores,
    pub b: MeanScores,
}

impl ClassComparison {
    pub fn markers(&self) -> [Better; 5] {
        let (a, b) = (self.a.cells(), self.b.cells());
        std::array::from_fn(|i| Better::of(a[i], b[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ClassComparison>,
}

const METRIC_NAMES: [&str; 5] = ["t_meal", "t_attrac", "s_spatial", "s_persona", "s_ord"];

impl ComparisonTable {
    /// Plain-text table; `*` marks the better run in each cell.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<8}{:>6}", "class", "plans");
        for m in METRIC_NAMES {
            let _ = write!(s, "{:>22}", format!("{m} A / B"));
        }
        s.push('\n');
        for row in &self.rows {
            let _ = write!(s, "{:<8}{:>6}", row.category, row.plan_ids.len());
            let (a, b) = (row.a.cells(), row.b.cells());
            for (i, better) in row.markers().iter().enumerate() {
                let fmt = |v: Option<f64>, mark: bool| {
                    v.map(|x| format!("{x:.4}{}", if mark { "*" } else { "" })).unwrap_or_else(|| "-".into())
                };
                let cellv = format!("{} / {}", fmt(a[i], *better == Better::A), fmt(b[i], *better == Better::B));
                let _ = write!(s, "{cellv:>22}");
            }
            s.push('\n');
        }
        s
    }
}

/// Mean of `get` over `ids`, counting only ids where both runs have a value.
fn paired_means(
    ids: &[&str],
    a: &HashMap<&str, &ScoreReport>,
    b: &HashMap<&str, &ScoreReport>,
    get: impl Fn(&ScoreReport) -> Option<f64>,
) -> (Option<f64>, Option<f64>) {
    let pairs: Vec<(f64, f64)> = ids.iter().filter_map(|id| Some((get(a[id])?, get(b[id])?))).collect();
    if pairs.is_empty() {
        return (None, None);
    }
    let n = pairs.len() as f64;
    (Some(pairs.iter().map(|p| p.0).sum::<f64>() / n), Some(pairs.iter().map(|p| p.1).sum::<f64>() / n))
}

/// Compares two runs over the plans both delivered, per duration class.
pub fn compare_runs(a: &RunResult, b: &RunResult) -> Result<ComparisonTable, ReportError> {
    let ids = |r: &RunResult| r.outcomes.iter().map(|o| o.id.clone()).collect::<BTreeSet<_>>();
    let (ia, ib) = (ids(a), ids(b));
    if ia != ib {
        let only: Vec<&String> = ia.symmetric_difference(&ib).take(5).collect();
        return Err(ReportError::QueryMismatch(format!("ids in only one run: {only:?}")));
    }
    fn scored(r: &RunResult) -> HashMap<&str, (&'static str, &ScoreReport)> {
        r.outcomes
            .iter()
            .filter(|o| o.delivered())
            .filter_map(|o| Some((o.id.as_str(), (o.category.label(), o.scores.as_ref()?))))
            .collect()
    }
    let (sa, sb) = (scored(a), scored(b));
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, (class, _)) in &sa {
        if sb.contains_key(id) {
            by_class.entry(class).or_default().push(id);
            by_class.entry("all").or_default().push(id);
        }
    }
    let ma: HashMap<&str, &ScoreReport> = sa.iter().map(|(k, v)| (*k, v.1)).collect();
    let mb: HashMap<&str, &ScoreReport> = sb.iter().map(|(k, v)| (*k, v.1)).collect();
    let rows = by_class
        .into_iter()
        .map(|(class, mut ids)| {
            ids.sort_unstable();
            let (t_meal_a, t_meal_b) = paired_means(&ids, &ma, &mb, |s| s.t_meal);
            let (t_attrac_a, t_attrac_b) = paired_means(&ids, &ma, &mb, |s| Some(s.t_attrac));
            let (spatial_a, spatial_b) = paired_means(&ids, &ma, &mb, |s| Some(s.s_spatial));
            let (persona_a, persona_b) = paired_means(&ids, &ma, &mb, |s| s.s_persona);
            let (ord_a, ord_b) = paired_means(&ids, &ma, &mb, |s| s.s_ord);
            ClassComparison {
                category: class.to_string(),
                plan_ids: ids.iter().map(|s| s.to_string()).collect(),
                a: MeanScores { t_meal: t_meal_a, t_attrac: t_attrac_a, s_spatial: spatial_a, s_persona: persona_a, s_ord: ord_a },
                b: MeanScores { t_meal: t_meal_b, t_attrac: t_attrac_b, s_spatial: spatial_b, s_persona: persona_b, s_ord: ord_b },
            }
        })
        .collect();
    Ok(ComparisonTable { rows })
}

/// Result of fitting parameters to annotated plans.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub params: ParamFile,
    /// Classes left out, with the reason.
    pub skipped: BTreeMap<DurationClass, String>,
    pub warnings: Vec<String>,
}

/// Fits meal and attraction parameters per duration class.
///
/// A class is emitted only when all three meals can be estimated. Attraction
/// parameters fall back to the builtin table when the class lacks one of the
/// traveler types.
pub fn estimate_from_plans(
    plans: &BTreeMap<String, ItineraryPlan>,
    queries: &[Query],
    sandbox: &Sandbox,
) -> Result<Estimate, ReportError> {
    let personas: HashMap<&str, &Query> = queries.iter().map(|q| (q.id.as_str(), q)).collect();
    let ordered: Vec<ItineraryPlan> = plans.values().cloned().collect();
    let mut meal_fits: BTreeMap<DurationClass, Vec<Result<_, _>>> = BTreeMap::new();
    for meal in Meal::ALL {
        for (class, fit) in estimate_meal_params(&ordered, *meal) {
            meal_fits.entry(class).or_default().push(fit);
        }
    }
    let durations = builtin_category_durations();
    let mut days: BTreeMap<DurationClass, Vec<AttractionDaySample>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (id, plan) in plans {
        let Some(class) = DurationClass::from_days(plan.days.len()) else {
            warnings.push(format!("plan {id} has {} days; ignored", plan.days.len()));
            continue;
        };
        match personas.get(id.as_str()).and_then(|q| q.persona.as_ref()) {
            Some(p) => days.entry(class).or_default().extend(attraction_day_samples(plan, p.traveler_type, sandbox, &durations)),
            None => warnings.push(format!("plan {id} has no persona; attraction days skipped")),
        }
    }

    let mut out = BTreeMap::new();
    let mut skipped = BTreeMap::new();
    for class in DurationClass::ALL {
        let fits = meal_fits.remove(&class).unwrap_or_default();
        if fits.len() != Meal::ALL.len() {
            skipped.insert(class, "no annotated plans".to_string());
            continue;
        }
        let mut set = crate::params::builtin_params(class);
        let mut failure = None;
        for (meal, fit) in Meal::ALL.iter().zip(fits) {
            match fit {
                Ok(d) => *set.meals.get_mut(*meal) = d,
                Err(e) => {
                    failure = Some(format!("{meal}: {e}"));
                    break;
                }
            }
        }
        if let Some(why) = failure {
            skipped.insert(class, why);
            continue;
        }
        match estimate_attraction_params(days.get(&class).map(Vec::as_slice).unwrap_or(&[])) {
            Ok(a) => set.attractions = a,
            Err(e) => warnings.push(format!("{class}: attraction parameters kept at builtin values ({e})")),
        }
        match set.validate() {
            Ok(()) => {
                out.insert(class, set);
            }
            Err(e) => {
                skipped.insert(class, e.to_string());
            }
        }
    }
    if out.is_empty() {
        let why: Vec<String> = skipped.iter().map(|(c, w)| format!("{c}: {w}")).collect();
        return Err(ReportError::InsufficientData(why.join("; ")));
    }
    Ok(Estimate { params: ParamFile(out), skipped, warnings })
}

/// Reads annotated plans and writes `params.json` into `out`.
pub fn run_estimate(plans_dir: &Path, queries_file: &Path, sandbox_root: &Path, out: &Path) -> Result<Estimate, ReportError> {
    let sandbox = load_sandbox(sandbox_root)?;
    let queries = load_queries(queries_file)?;
    let files = list_plan_files(plans_dir)?;
    if files.is_empty() {
        return Err(ReportError::NoPlans(plans_dir.display().to_string()));
    }
    let mut plans = BTreeMap::new();
    let mut unreadable = Vec::new();
    for (id, path) in files {
        match read_plan_file(&path) {
            Ok(p) => {
                plans.insert(id, p);
            }
            Err(why) => unreadable.push(format!("plan {id} {why}")),
        }
    }
    let mut est = estimate_from_plans(&plans, &queries, &sandbox)?;
    est.warnings.extend(unreadable);
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let path = out.join("params.json");
    std::fs::write(&path, est.params.to_json()).map_err(|e| io_err(&path, e))?;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(id: &str, delivered: bool, t_meal: f64) -> PlanOutcome {
        PlanOutcome {
            id: id.into(),
            category: DurationClass::ThreeDay,
            constraints: if delivered {
                ConstraintReport { delivered: true, commonsense: vec![], hard: vec![], failure: None }
            } else {
                ConstraintReport::undelivered("missing")
            },
            scores: delivered.then(|| ScoreReport {
                t_meal: Some(t_meal),
                t_attrac: 0.5,
                s_spatial: 0.5,
                s_persona: None,
                s_ord: None,
                notes: vec![],
            }),
        }
    }

    fn run(outcomes: Vec<PlanOutcome>) -> RunResult {
        let rates = rates_by_class(&outcomes);
        RunResult { outcomes, rates, warnings: vec![] }
    }

    #[test]
    fn compare_uses_only_shared_deliveries() {
        let a = run(vec![outcome("1", true, 0.2), outcome("2", true, 0.4), outcome("3", true, 0.6), outcome("4", false, 0.0)]);
        let b = run(vec![outcome("1", false, 0.0), outcome("2", true, 0.1), outcome("3", true, 0.3), outcome("4", true, 0.9)]);
        let t = compare_runs(&a, &b).unwrap();
        let row = t.rows.iter().find(|r| r.category == "3-day").unwrap();
        assert_eq!(row.plan_ids, ["2", "3"]);
        assert!((row.a.t_meal.unwrap() - 0.5).abs() < 1e-12);
        assert!((row.b.t_meal.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(row.markers()[0], Better::A);
        assert_eq!(row.markers()[1], Better::Tie);
    }

    #[test]
    fn compare_rejects_different_queries() {
        let a = run(vec![outcome("1", true, 0.2)]);
        let b = run(vec![outcome("2", true, 0.2)]);
        assert!(matches!(compare_runs(&a, &b), Err(ReportError::QueryMismatch(_))));
    }

    #[test]
    fn csv_headers_are_stable() {
        let r = run(vec![outcome("1", true, 0.25), outcome("2", false, 0.0)]);
        let scores = scores_csv(&r);
        assert_eq!(scores.lines().next().unwrap(), "plan_id,category,delivered,t_meal,t_attrac,s_spatial,s_persona,s_ord");
        assert_eq!(scores.lines().nth(1).unwrap(), "1,3-day,true,0.250000,0.500000,0.500000,,");
        assert_eq!(scores.lines().nth(2).unwrap(), "2,3-day,false,,,,,");
        let rates = rates_csv(&r);
        assert_eq!(rates.lines().next().unwrap(), "category,plans,delivery_rate,cpr_micro,cpr_macro,hcpr_micro,hcpr_macro,final_pass_rate");
        assert!(rates.lines().any(|l| l.starts_with("all,2,0.500000")));
    }
}
