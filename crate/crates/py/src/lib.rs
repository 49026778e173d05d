//! Python bindings: parse, check, score, generate and batch-evaluate plans.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tripgrade::constraints::{self, CheckConfig, ConstraintReport, Query};
use tripgrade::datagen::{self, PerturbationKind};
use tripgrade::embedding::{BaselineEmbedder, DEFAULT_DIMENSION};
use tripgrade::metrics::{self, ScoreReport};
use tripgrade::params::{DurationClass, ParamFile};
use tripgrade::plan::{self, ItineraryPlan};
use tripgrade::report::{self, RunManifest};
use tripgrade::sandbox::{self, Sandbox};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Sandbox", module = "tripgrade", frozen)]
pub struct PySandbox {
    inner: Sandbox,
}

#[pymethods]
impl PySandbox {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        sandbox::load_sandbox(&path).map(|inner| Self { inner }).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn city_names(&self) -> Vec<String> {
        self.inner.cities().iter().map(|c| c.name.clone()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Sandbox({} cities)", self.inner.cities().len())
    }
}

#[pyclass(name = "Plan", module = "tripgrade", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyPlan {
    inner: ItineraryPlan,
}

#[pymethods]
impl PyPlan {
    /// Parses the plain-text layout.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        plan::parse_plan(text).map(|inner| Self { inner }).map_err(value_err)
    }

    /// Parses the keyed JSON layout.
    #[staticmethod]
    fn parse_json(text: &str) -> PyResult<Self> {
        plan::parse_plan_json_str(text).map(|inner| Self { inner }).map_err(value_err)
    }

    fn to_text(&self) -> String {
        plan::serialize_plan(&self.inner)
    }

    fn to_json(&self) -> String {
        plan::serialize_plan_json(&self.inner).to_string()
    }

    #[getter]
    fn day_count(&self) -> usize {
        self.inner.days.len()
    }

    /// Visit names per day, in order.
    fn visit_names(&self) -> Vec<Vec<String>> {
        self.inner.days.iter().map(|d| d.poi_list.iter().map(|v| v.name.clone()).collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Plan({} days)", self.inner.days.len())
    }
}

#[pyclass(name = "Query", module = "tripgrade", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyQuery {
    inner: Query,
}

#[pymethods]
impl PyQuery {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: Query = serde_json::from_str(text).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("query serializes")
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.inner.budget
    }
}

#[pyclass(name = "ConstraintReport", module = "tripgrade", frozen)]
pub struct PyConstraintReport {
    inner: ConstraintReport,
}

#[pymethods]
impl PyConstraintReport {
    #[getter]
    fn delivered(&self) -> bool {
        self.inner.delivered
    }

    #[getter]
    fn all_passed(&self) -> bool {
        self.inner.all_passed()
    }

    /// `(constraint, passed, applicable, detail)` for every check.
    fn results(&self) -> Vec<(String, bool, bool, String)> {
        self.inner
            .commonsense
            .iter()
            .chain(&self.inner.hard)
            .map(|r| (r.id.to_string(), r.passed, r.applicable, r.detail.clone()))
            .collect()
    }

    fn failed(&self) -> Vec<String> {
        self.inner
            .commonsense
            .iter()
            .chain(&self.inner.hard)
            .filter(|r| !r.counts_as_pass())
            .map(|r| r.id.to_string())
            .collect()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("report serializes")
    }
}

#[pyclass(name = "Scores", module = "tripgrade", frozen, get_all)]
pub struct PyScores {
    t_meal: Option<f64>,
    t_attrac: f64,
    s_spatial: f64,
    s_persona: Option<f64>,
    s_ord: Option<f64>,
    notes: Vec<String>,
}

impl From<ScoreReport> for PyScores {
    fn from(s: ScoreReport) -> Self {
        Self { t_meal: s.t_meal, t_attrac: s.t_attrac, s_spatial: s.s_spatial, s_persona: s.s_persona, s_ord: s.s_ord, notes: s.notes }
    }
}

#[pymethods]
impl PyScores {
    fn __repr__(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "None".to_string(), |x| x.to_string());
        format!(
            "Scores(t_meal={}, t_attrac={}, s_spatial={}, s_persona={}, s_ord={})",
            opt(self.t_meal),
            self.t_attrac,
            self.s_spatial,
            opt(self.s_persona),
            opt(self.s_ord)
        )
    }
}

#[pyfunction]
#[pyo3(signature = (plan, query, sandbox, checkin_gap=30, checkout_gap=30))]
fn check_plan(plan: &PyPlan, query: &PyQuery, sandbox: &PySandbox, checkin_gap: u32, checkout_gap: u32) -> PyConstraintReport {
    let cfg = CheckConfig { checkin_gap_minutes: checkin_gap, checkout_gap_minutes: checkout_gap };
    PyConstraintReport { inner: constraints::check_plan(&plan.inner, &query.inner, &sandbox.inner, &cfg) }
}

/// Scores a plan with the baseline embedder; the persona comes from the query.
#[pyfunction]
#[pyo3(signature = (plan, query, sandbox, gold=None, params_path=None))]
fn score_plan(
    plan: &PyPlan,
    query: &PyQuery,
    sandbox: &PySandbox,
    gold: Option<&PyPlan>,
    params_path: Option<PathBuf>,
) -> PyResult<PyScores> {
    let persona = query.inner.persona.as_ref().ok_or_else(|| value_err("query has no persona"))?;
    let class = query.inner.duration_class().ok_or_else(|| value_err("unsupported trip length"))?;
    let params = match params_path {
        Some(p) => ParamFile::load(&p).map_err(value_err)?,
        None => ParamFile::builtin(),
    };
    let embedder = BaselineEmbedder::new(DEFAULT_DIMENSION);
    metrics::evaluate_all(&plan.inner, persona, gold.map(|g| &g.inner), &sandbox.inner, &params.get(class), &embedder)
        .map(PyScores::from)
        .map_err(value_err)
}

#[pyfunction]
fn spatial_point_score(distance_m: f64) -> f64 {
    metrics::spatial_point_score(distance_m)
}

#[pyfunction]
fn sequence_similarity(a: Vec<String>, b: Vec<String>) -> f64 {
    metrics::sequence_similarity(&a, &b)
}

/// Builtin parameters for a 3, 5 or 7 day trip, as JSON.
#[pyfunction]
fn builtin_params_json(days: usize) -> PyResult<String> {
    let class = DurationClass::from_days(days).ok_or_else(|| value_err("days must be 3, 5 or 7"))?;
    Ok(serde_json::to_string(&tripgrade::params::builtin_params(class)).expect("params serialize"))
}

fn classes(days: Option<usize>) -> PyResult<Vec<DurationClass>> {
    match days {
        None => Ok(DurationClass::ALL.to_vec()),
        Some(n) => DurationClass::from_days(n).map(|c| vec![c]).ok_or_else(|| value_err("days must be 3, 5 or 7")),
    }
}

/// Writes a synthetic sandbox, queries and reference plans; returns the query count.
#[pyfunction]
#[pyo3(signature = (out_dir, seed=0, days=None, count=10))]
fn generate_fixture(out_dir: PathBuf, seed: u64, days: Option<usize>, count: usize) -> PyResult<usize> {
    let fx = datagen::generate_fixture(seed, &classes(days)?, count).map_err(value_err)?;
    datagen::write_fixture(&fx, seed, &out_dir).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(fx.items.len())
}

/// Applies one named perturbation; `amount` is the shift in hours or the factor.
#[pyfunction]
#[pyo3(signature = (plan, kind, sandbox, amount=None, seed=0))]
fn perturb(plan: &PyPlan, kind: &str, sandbox: &PySandbox, amount: Option<f64>, seed: u64) -> PyResult<PyPlan> {
    let need = || amount.ok_or_else(|| value_err(format!("{kind} needs an amount")));
    let kind = match kind {
        "meal_shift" => PerturbationKind::MealShift(need()?),
        "transit_inflate" => PerturbationKind::TransitInflate(need()?),
        "order_shuffle" => PerturbationKind::OrderShuffle,
        "duplicate_attraction" => PerturbationKind::DuplicateAttraction,
        "budget_bust" => PerturbationKind::BudgetBust(need()?),
        "drop_accommodation" => PerturbationKind::DropAccommodation,
        other => return Err(value_err(format!("unknown perturbation {other}"))),
    };
    datagen::perturb_plan(&plan.inner, kind, seed, &sandbox.inner).map(|inner| PyPlan { inner }).map_err(value_err)
}

/// Runs a batch evaluation, writes its artifacts and returns rates per class.
#[pyfunction]
#[pyo3(signature = (sandbox, queries, plans, out, gold=None, jobs=None))]
fn evaluate<'py>(
    py: Python<'py>,
    sandbox: PathBuf,
    queries: PathBuf,
    plans: PathBuf,
    out: PathBuf,
    gold: Option<PathBuf>,
    jobs: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut m = RunManifest::new(sandbox, queries, plans, out);
    m.gold_dir = gold;
    m.jobs = jobs;
    let result = py.detach(|| report::run_evaluate(&m)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let rates = PyDict::new(py);
    for (class, r) in &result.rates {
        let row = PyDict::new(py);
        row.set_item("delivery_rate", r.delivery_rate)?;
        row.set_item("cpr_micro", r.cpr_micro)?;
        row.set_item("cpr_macro", r.cpr_macro)?;
        row.set_item("hcpr_micro", r.hcpr_micro)?;
        row.set_item("hcpr_macro", r.hcpr_macro)?;
        row.set_item("final_pass_rate", r.final_pass_rate)?;
        rates.set_item(class, row)?;
    }
    Ok(rates)
}

#[pymodule(name = "tripgrade")]
pub fn tripgrade_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySandbox>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyQuery>()?;
    m.add_class::<PyConstraintReport>()?;
    m.add_class::<PyScores>()?;
    m.add_function(wrap_pyfunction!(check_plan, m)?)?;
    m.add_function(wrap_pyfunction!(score_plan, m)?)?;
    m.add_function(wrap_pyfunction!(spatial_point_score, m)?)?;
    m.add_function(wrap_pyfunction!(sequence_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_params_json, m)?)?;
    m.add_function(wrap_pyfunction!(generate_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(perturb, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
