//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use tripgrade::constraints::{aggregate_rates, check_plan, CheckConfig, ConstraintId, ConstraintReport, Query};
use tripgrade::datagen::{
    generate_query_at, generate_sandbox, perturb_plan, sample_meals, GenSpec, PerturbationKind,
};
use tripgrade::embedding::{BaselineEmbedder, DEFAULT_DIMENSION};
use tripgrade::metrics::{
    evaluate_all, meal_score, sequence_similarity, spatial_point_score, temporal_attraction_score_obs,
    AttractionObservation, MealObservation, ScoreReport,
};
use tripgrade::params::{builtin_params, estimate_meal_dist, DurationClass, MealDist};
use tripgrade::plan::{parse_plan, parse_plan_json_str, serialize_plan, ItineraryPlan};
use tripgrade::report::{compare_runs, rates_by_class, PlanOutcome, RunResult};
use tripgrade::sandbox::{load_sandbox, Sandbox};
use tripgrade::vocab::{Category, Meal, TravelerType};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((a - b).abs() <= tol, format!("{what}: got {a}, want {b} within {tol}"))
}

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures"))
}

fn spatial_closed_forms() -> Outcome {
    let start = Instant::now();
    close(spatial_point_score(0.0), 1.0, 1e-9, "S(0)")?;
    close(spatial_point_score(5000.0), 0.5, 1e-9, "S(5000)")?;
    close(spatial_point_score(10_000.0), 0.5 * (-1.0f64).exp(), 1e-9, "S(10000)")?;
    let took = start.elapsed();
    ensure(took < Duration::from_millis(1), format!("took {took:?}"))?;
    Ok(format!("S(10000) = {:.9}", spatial_point_score(10_000.0)))
}

/// Independent form: explicit 2x2 covariance inverse.
fn inverse_oracle(t: f64, d: f64, dist: &MealDist) -> f64 {
    let (st, sd, b) = (dist.std_time, dist.std_duration, dist.beta);
    let (a11, a12, a22) = (st * st, b * st * sd, sd * sd);
    let det = a11 * a22 - a12 * a12;
    let (i11, i12, i22) = (a22 / det, -a12 / det, a11 / det);
    let (x, y) = (t - dist.mean_time, d - dist.mean_duration);
    (-0.5 * (x * x * i11 + 2.0 * x * y * i12 + y * y * i22)).exp()
}

fn meal_closed_forms() -> Outcome {
    let obs = |t, d| MealObservation { meal: Meal::Breakfast, t_m: t, d_m: d };
    let breakfast = builtin_params(DurationClass::ThreeDay).meals.breakfast;
    ensure((breakfast.beta - 0.21).abs() < 1e-12, "3-day breakfast beta is not 0.21")?;
    let at_mean = meal_score(&obs(breakfast.mean_time, breakfast.mean_duration), &breakfast).map_err(|e| e.to_string())?;
    close(at_mean, 1.0, 1e-9, "score at the mean")?;

    let uncorrelated = MealDist { beta: 0.0, ..breakfast };
    let one_sigma = meal_score(&obs(uncorrelated.mean_time + uncorrelated.std_time, uncorrelated.mean_duration), &uncorrelated)
        .map_err(|e| e.to_string())?;
    close(one_sigma, (-0.5f64).exp(), 1e-9, "one sigma in time")?;

    let mut worst = 0.0f64;
    for (dt, dd) in [(0.3, -0.1), (-0.5, 0.2), (1.0, 0.4), (-0.2, -0.3)] {
        let (t, d) = (breakfast.mean_time + dt, breakfast.mean_duration + dd);
        let got = meal_score(&obs(t, d), &breakfast).map_err(|e| e.to_string())?;
        worst = worst.max((got - inverse_oracle(t, d, &breakfast)).abs());
    }
    ensure(worst <= 1e-9, format!("matrix-inverse oracle differs by {worst}"))?;
    Ok(format!("max deviation from inverse oracle {worst:.1e}"))
}

fn dp_levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in table.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        table[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = table[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            table[i][j] = sub.min(table[i - 1][j] + 1).min(table[i][j - 1] + 1);
        }
    }
    table[a.len()][b.len()]
}

fn ordering_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<u8> {
        let n = rng.random_range(0..=8);
        (0..n).map(|_| rng.random_range(0..5u8)).collect()
    };
    for i in 0..1000 {
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let longest = a.len().max(b.len());
        let expected = if longest == 0 { 1.0 } else { 1.0 - dp_levenshtein(&a, &b) as f64 / longest as f64 };
        let got = sequence_similarity(&a, &b);
        ensure(got == expected, format!("pair {i} {a:?} vs {b:?}: {got} != {expected}"))?;
        ensure(sequence_similarity(&a, &a) == 1.0, format!("identity pair {i} is not 1.0"))?;
    }
    Ok("1000 pairs exact".into())
}

fn attraction_hand_case() -> Outcome {
    let params = builtin_params(DurationClass::ThreeDay).attractions;
    let obs = [AttractionObservation {
        name: "museum".into(),
        category_mean: Category::Museums.duration_hours(),
        d_i: 4.12,
        day_index: 1,
    }];
    let got = temporal_attraction_score_obs(&obs, TravelerType::Laidback, &params);
    let want = 1.10 * (-1.10f64).exp();
    close(got, want, 1e-6, "laid-back museum score")?;
    Ok(format!("{got:.6}"))
}

fn estimator_recovery() -> Outcome {
    let start = Instant::now();
    let truth = builtin_params(DurationClass::ThreeDay).meals.breakfast;
    let fit = estimate_meal_dist(&sample_meals(&truth, Meal::Breakfast, 10_000, 2024)).map_err(|e| e.to_string())?;
    let rel = |got: f64, want: f64, what: &str| {
        ensure(((got - want) / want).abs() <= 0.05, format!("{what}: {got} vs {want}"))
    };
    rel(fit.mean_time, truth.mean_time, "mean time")?;
    rel(fit.mean_duration, truth.mean_duration, "mean duration")?;
    rel(fit.std_time, truth.std_time, "time spread")?;
    rel(fit.std_duration, truth.std_duration, "duration spread")?;
    close(fit.beta, truth.beta, 0.05, "correlation")?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(2), format!("took {took:?}"))?;
    Ok(format!("beta {:.3} in {took:?}", fit.beta))
}

struct Case {
    sandbox: Sandbox,
    query: Query,
    plan: ItineraryPlan,
}

fn gold_case(seed: u64, class: DurationClass) -> Result<Case, String> {
    let spec = GenSpec::new(seed, class);
    let sandbox = generate_sandbox(&spec).map_err(|e| e.to_string())?;
    let (query, _, plan) = generate_query_at(&spec, &sandbox, 0).map_err(|e| e.to_string())?;
    Ok(Case { sandbox, query, plan })
}

fn gold_feasibility() -> Outcome {
    let cases: Vec<(u64, DurationClass)> =
        (0..50).flat_map(|s| DurationClass::ALL.into_iter().map(move |c| (s, c))).collect();
    let reports: Vec<Result<ConstraintReport, String>> = cases
        .par_iter()
        .map(|&(seed, class)| {
            let c = gold_case(seed, class)?;
            let reparsed = parse_plan(&serialize_plan(&c.plan)).map_err(|e| e.to_string())?;
            Ok(check_plan(&reparsed, &c.query, &c.sandbox, &CheckConfig::default()))
        })
        .collect();
    let reports: Vec<ConstraintReport> = reports.into_iter().collect::<Result<_, _>>()?;
    let r = aggregate_rates(&reports).map_err(|e| e.to_string())?;
    for (name, v) in [("delivery", r.delivery_rate), ("cpr_macro", r.cpr_macro), ("hcpr_macro", r.hcpr_macro), ("final", r.final_pass_rate)] {
        ensure(v == 1.0, format!("{name} rate {v}"))?;
    }
    Ok(format!("{} plans, all rates 1.0", reports.len()))
}

fn scores(plan: &ItineraryPlan, case: &Case) -> Result<ScoreReport, String> {
    let persona = case.query.persona.as_ref().ok_or("query without persona")?;
    let params = builtin_params(case.query.duration_class().ok_or("bad class")?);
    evaluate_all(plan, persona, Some(&case.plan), &case.sandbox, &params, &BaselineEmbedder::new(DEFAULT_DIMENSION))
        .map_err(|e| e.to_string())
}

fn metric_vector(s: &ScoreReport) -> [f64; 5] {
    [s.t_meal.unwrap_or(f64::NAN), s.t_attrac, s.s_spatial, s.s_persona.unwrap_or(f64::NAN), s.s_ord.unwrap_or(f64::NAN)]
}

fn perturbation_monotonicity() -> Outcome {
    #[derive(Clone, Copy)]
    enum Target {
        Metric(usize),
        Check(ConstraintId),
    }
    let kinds = [
        (PerturbationKind::MealShift(3.0), Target::Metric(0)),
        (PerturbationKind::TransitInflate(3.0), Target::Metric(2)),
        (PerturbationKind::OrderShuffle, Target::Metric(4)),
        (PerturbationKind::DuplicateAttraction, Target::Check(ConstraintId::DiverseAttractions)),
        (PerturbationKind::BudgetBust(10.0), Target::Check(ConstraintId::Budget)),
        (PerturbationKind::DropAccommodation, Target::Check(ConstraintId::CompleteInformation)),
    ];
    let results: Vec<Result<(), String>> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let case = gold_case(seed, DurationClass::ALL[seed as usize % 3])?;
            let base = metric_vector(&scores(&case.plan, &case)?);
            if base.iter().any(|v| v.is_nan()) {
                return Err(format!("seed {seed}: gold plan lacks a score"));
            }
            for (kind, target) in kinds {
                let bad = perturb_plan(&case.plan, kind, seed, &case.sandbox).map_err(|e| format!("{}: {e}", kind.name()))?;
                let after = metric_vector(&scores(&bad, &case)?);
                let tag = |m: &str| format!("seed {seed} {}: {m}", kind.name());
                for i in 0..5 {
                    let targeted = matches!(target, Target::Metric(t) if t == i);
                    if targeted {
                        ensure(after[i] < base[i], tag(&format!("metric {i} did not drop ({} -> {})", base[i], after[i])))?;
                    } else {
                        ensure((after[i] - base[i]).abs() < 1e-9, tag(&format!("untargeted metric {i} moved ({} -> {})", base[i], after[i])))?;
                    }
                }
                if let Target::Check(id) = target {
                    let report = check_plan(&bad, &case.query, &case.sandbox, &CheckConfig::default());
                    let passed = report.result(id).map(|r| r.passed).unwrap_or(true);
                    ensure(!passed, tag(&format!("{id} still passes")))?;
                }
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    Ok("6 kinds x 50 plans".into())
}

fn worked_example_fidelity() -> Outcome {
    let text = std::fs::read_to_string(fixtures().join("charlotte_plan.txt")).map_err(|e| e.to_string())?;
    let plan = parse_plan(&text).map_err(|e| e.to_string())?;
    ensure(plan.days.len() == 3, format!("{} days", plan.days.len()))?;
    let lens: Vec<usize> = plan.days.iter().map(|d| d.poi_list.len()).collect();
    ensure(lens == [6, 7, 5], format!("visit counts {lens:?}"))?;
    let home = "Affordable Spacious Refurbished Room in Bushwick!";
    let first_day = &plan.days[0].poi_list;
    ensure(first_day[0].name == home && first_day[5].name == home, "day 1 does not start and end at the accommodation")?;
    ensure(serialize_plan(&plan) == text, "serialized text differs from the source")?;

    let dir = fixtures().join("santa_fe");
    let sandbox = load_sandbox(&dir.join("sandbox")).map_err(|e| e.to_string())?;
    let query: Query = serde_json::from_str(&std::fs::read_to_string(dir.join("query.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let late = parse_plan_json_str(&std::fs::read_to_string(dir.join("plan.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let report = check_plan(&late, &query, &sandbox, &CheckConfig::default());
    let r = report.result(ConstraintId::ValidPoIList).ok_or("no ValidPoIList result")?;
    ensure(!r.passed, "ValidPoIList passed")?;
    ensure(r.detail.contains("La Plazuela") && r.detail.contains("13:05"), format!("detail does not name the overrun: {}", r.detail))?;
    Ok(r.detail.clone())
}

fn intersection_protocol() -> Outcome {
    let run = |delivered: std::ops::RangeInclusive<u32>, scale: f64| {
        let outcomes: Vec<PlanOutcome> = (1..=10u32)
            .map(|i| {
                let on = delivered.contains(&i);
                PlanOutcome {
                    id: format!("p{i:02}"),
                    category: DurationClass::FiveDay,
                    constraints: if on {
                        ConstraintReport { delivered: true, commonsense: vec![], hard: vec![], failure: None }
                    } else {
                        ConstraintReport::undelivered("missing")
                    },
                    scores: on.then(|| ScoreReport {
                        t_meal: Some(scale * f64::from(i)),
                        t_attrac: 0.5,
                        s_spatial: scale,
                        s_persona: Some(1.0 - scale * f64::from(i)),
                        s_ord: None,
                        notes: vec![],
                    }),
                }
            })
            .collect();
        let rates = rates_by_class(&outcomes);
        RunResult { outcomes, rates, warnings: vec![] }
    };
    let (a, b) = (run(1..=8, 0.1), run(3..=10, 0.05));
    let table = compare_runs(&a, &b).map_err(|e| e.to_string())?;
    let row = table.rows.iter().find(|r| r.category == "5-day").ok_or("no 5-day row")?;
    let want_ids: Vec<String> = (3..=8).map(|i| format!("p{i:02}")).collect();
    ensure(row.plan_ids == want_ids, format!("ids {:?}", row.plan_ids))?;
    // Ids 3..=8 sum to 33 over six plans.
    close(row.a.t_meal.ok_or("no A mean")?, 0.1 * 33.0 / 6.0, 1e-12, "A t_meal")?;
    close(row.b.t_meal.ok_or("no B mean")?, 0.05 * 33.0 / 6.0, 1e-12, "B t_meal")?;
    close(row.a.s_persona.ok_or("no A persona")?, 1.0 - 0.1 * 33.0 / 6.0, 1e-12, "A s_persona")?;
    ensure(row.a.s_ord.is_none() && row.b.s_ord.is_none(), "ordering mean without references")?;
    let same = compare_runs(&a, &a).map_err(|e| e.to_string())?;
    ensure(
        same.rows.iter().all(|r| r.markers().iter().all(|m| *m == tripgrade::report::Better::Tie)),
        "A vs A is not tied everywhere",
    )?;
    Ok("means over p03..p08".into())
}

fn throughput() -> Outcome {
    let spec = GenSpec::new(99, DurationClass::SevenDay);
    let sandbox = generate_sandbox(&spec).map_err(|e| e.to_string())?;
    let items: Vec<(Query, ItineraryPlan)> = (0..1000u64)
        .into_par_iter()
        .map(|i| generate_query_at(&spec, &sandbox, i).map(|(q, _, p)| (q, p)).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let params: BTreeMap<_, _> = DurationClass::ALL.into_iter().map(|c| (c, builtin_params(c))).collect();
    let embedder = BaselineEmbedder::new(DEFAULT_DIMENSION);
    let start = Instant::now();
    let done: Vec<bool> = items
        .par_iter()
        .map(|(q, p)| {
            let report = check_plan(p, q, &sandbox, &CheckConfig::default());
            let persona = q.persona.as_ref().expect("generated persona");
            let s = evaluate_all(p, persona, Some(p), &sandbox, &params[&DurationClass::SevenDay], &embedder);
            report.all_passed() && s.is_ok()
        })
        .collect();
    let took = start.elapsed();
    ensure(done.iter().all(|b| *b), "some plans failed to evaluate cleanly")?;
    ensure(took < Duration::from_secs(5), format!("took {took:?}"))?;
    Ok(format!("1000 seven-day plans in {took:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("spatial formula exactness", spatial_closed_forms),
        ("meal score closed form", meal_closed_forms),
        ("ordering score oracle", ordering_oracle),
        ("attraction hand case", attraction_hand_case),
        ("parameter estimator recovery", estimator_recovery),
        ("gold plan feasibility", gold_feasibility),
        ("perturbation monotonicity", perturbation_monotonicity),
        ("worked example fidelity", worked_example_fidelity),
        ("intersection protocol", intersection_protocol),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(note) => println!("criterion {:>2} PASS  {name}: {note}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
