use tripgrade::constraints::{check_plan, CheckConfig, ConstraintId};
use tripgrade::datagen::{generate_query_at, generate_sandbox, perturb_plan, GenSpec, PerturbationKind};
use tripgrade::params::DurationClass;
use tripgrade::plan::parse_plan;

fn failing(report: &tripgrade::constraints::ConstraintReport) -> Vec<String> {
    report
        .commonsense
        .iter()
        .chain(&report.hard)
        .filter(|r| !r.counts_as_pass())
        .map(|r| format!("{}: {}", r.id, r.detail))
        .collect()
}

#[test]
fn gold_plans_pass_every_check_after_round_trip() {
    for class in DurationClass::ALL {
        for seed in 0..8 {
            let spec = GenSpec::new(seed, class);
            let sb = generate_sandbox(&spec).unwrap();
            let (query, _, plan) = generate_query_at(&spec, &sb, 0).unwrap();
            let reparsed = parse_plan(&plan.source_text).unwrap();
            for p in [&plan, &reparsed] {
                let report = check_plan(p, &query, &sb, &CheckConfig::default());
                assert!(report.all_passed(), "{} seed {seed}: {:?}", query.id, failing(&report));
            }
        }
    }
}

#[test]
fn constraint_perturbations_fail_their_target() {
    let cases = [
        (PerturbationKind::DuplicateAttraction, ConstraintId::DiverseAttractions),
        (PerturbationKind::BudgetBust(10.0), ConstraintId::Budget),
        (PerturbationKind::DropAccommodation, ConstraintId::CompleteInformation),
    ];
    for class in DurationClass::ALL {
        for seed in 0..5 {
            let spec = GenSpec::new(seed, class);
            let sb = generate_sandbox(&spec).unwrap();
            let (query, _, plan) = generate_query_at(&spec, &sb, 0).unwrap();
            for (kind, target) in cases {
                let bad = perturb_plan(&plan, kind, seed, &sb).unwrap();
                let report = check_plan(&bad, &query, &sb, &CheckConfig::default());
                let r = report.result(target).unwrap();
                assert!(!r.passed, "{} {}: {target} still passes", query.id, kind.name());
            }
        }
    }
}
