use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::attach(|py| {
        let m = PyModule::new(py, "tripgrade").unwrap();
        tripgrade_py::tripgrade_py(&m).unwrap();
        let globals = PyDict::new(py);
        globals.set_item("tg", m).unwrap();
        f(py, &globals);
    });
}

fn run(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) {
    let src = std::ffi::CString::new(code).unwrap();
    if let Err(e) = py.run(&src, Some(globals), None) {
        e.print(py);
        panic!("python snippet failed");
    }
}

#[test]
fn fixture_round_trip_checks_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    with_module(|py, g| {
        g.set_item("root", dir.path().to_str().unwrap()).unwrap();
        run(
            py,
            g,
            r#"
import json, os
n = tg.generate_fixture(root, seed=5, days=3, count=2)
assert n == 2
sb = tg.Sandbox.load(os.path.join(root, "sandbox"))
line = open(os.path.join(root, "queries.jsonl")).readline()
q = tg.Query.from_json(line)
plan = tg.Plan.parse(open(os.path.join(root, "gold", q.id + ".txt")).read())
assert plan.day_count == 3
assert tg.Plan.parse(plan.to_text()).to_text() == plan.to_text()
rep = tg.check_plan(plan, q, sb)
assert rep.delivered and rep.all_passed, rep.failed()
s = tg.score_plan(plan, q, sb, gold=plan)
assert abs(s.s_ord - 1.0) < 1e-9
assert 0.0 <= s.s_spatial <= 1.0
bad = tg.perturb(plan, "drop_accommodation", sb)
assert not tg.check_plan(bad, q, sb).all_passed
"#,
        );
    });
}

#[test]
fn scalar_helpers_and_errors() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
assert tg.spatial_point_score(0.0) == 1.0
assert tg.sequence_similarity(["a", "b"], ["a", "b"]) == 1.0
import json
assert json.loads(tg.builtin_params_json(5))
for bad in (lambda: tg.Plan.parse("nonsense"), lambda: tg.builtin_params_json(4)):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
"#,
        );
    });
}

#[test]
fn batch_evaluate_returns_rates() {
    let dir = tempfile::tempdir().unwrap();
    with_module(|py, g| {
        g.set_item("root", dir.path().to_str().unwrap()).unwrap();
        run(
            py,
            g,
            r#"
import os
tg.generate_fixture(root, seed=2, days=3, count=3)
j = lambda *p: os.path.join(root, *p)
rates = tg.evaluate(j("sandbox"), j("queries.jsonl"), j("gold"), j("out"), gold=j("gold"), jobs=1)
assert rates["all"]["final_pass_rate"] == 1.0, rates
assert os.path.isfile(j("out", "rates.csv"))
"#,
        );
    });
}
