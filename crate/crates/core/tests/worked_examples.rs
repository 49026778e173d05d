use std::path::Path;

use tripgrade::constraints::{check_plan, CheckConfig, ConstraintId, Query};
use tripgrade::plan::{parse_plan, parse_plan_json_str, parse_plan_json_with, serialize_plan, ParseOptions, Verb};
use tripgrade::sandbox::load_sandbox;

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn charlotte_plan_parses_with_its_visit_lists() {
    let plan = parse_plan(&fixture("charlotte_plan.txt")).unwrap();
    assert_eq!(plan.days.len(), 3);
    let day2 = &plan.days[1];
    let names: Vec<&str> = day2.poi_list.iter().map(|v| v.name.as_str()).collect();
    assert_eq!(names[2], "The Mint Museum");
    assert_eq!(names[4], "Romare Bearden Park");
    assert_eq!(day2.attractions.len(), 2);
    let last = day2.poi_list.last().unwrap();
    assert_eq!(last.verb, Verb::Stay);
    assert!(last.window.wraps_midnight);
    assert_eq!(last.window.duration_minutes(), 570);
    assert!(plan.days[2].accommodation.is_none());
}

#[test]
fn charlotte_plan_is_byte_stable() {
    let text = fixture("charlotte_plan.txt");
    let once = serialize_plan(&parse_plan(&text).unwrap());
    assert_eq!(once, text);
    assert_eq!(serialize_plan(&parse_plan(&once).unwrap()), once);
}

#[test]
fn missing_transit_clause_is_reported() {
    let text = fixture("charlotte_plan.txt").replacen(", nearest transit: Uptown Station, 200m away", "", 1);
    let err = parse_plan(&text).unwrap_err();
    assert!(err.to_string().contains("nearest transit"), "{err}");
}

#[test]
fn houston_keyed_day_has_one_overnight_stay() {
    let doc: serde_json::Value = serde_json::from_str(&fixture("houston_day1.json")).unwrap();
    let plan = parse_plan_json_with(&doc, ParseOptions::free_form()).unwrap();
    assert_eq!(plan.days.len(), 1);
    let visits = &plan.days[0].poi_list;
    assert_eq!(visits.len(), 1);
    assert!(visits[0].window.wraps_midnight);
    assert_eq!(visits[0].transit_distance, 98.06);
}

#[test]
fn visit_past_departure_fails_the_visit_list_check() {
    let sandbox = load_sandbox(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/santa_fe/sandbox")).unwrap();
    let query: Query = serde_json::from_str(&fixture("santa_fe/query.json")).unwrap();
    let plan = parse_plan_json_str(&fixture("santa_fe/plan.json")).unwrap();
    let report = check_plan(&plan, &query, &sandbox, &CheckConfig::default());
    let r = report.result(ConstraintId::ValidPoIList).unwrap();
    assert!(!r.passed);
    assert!(r.detail.contains("La Plazuela") && r.detail.contains("13:05"), "{}", r.detail);
    let others_failing: Vec<_> = report
        .commonsense
        .iter()
        .chain(&report.hard)
        .filter(|c| !c.counts_as_pass() && c.id != ConstraintId::ValidPoIList)
        .map(|c| format!("{}: {}", c.id, c.detail))
        .collect();
    assert!(others_failing.is_empty(), "{others_failing:?}");
}
