//! The five continuous plan scores.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::Persona;
use crate::embedding::{cosine_similarity, EmbedError, Embedder};
use crate::params::{AttractionParams, MealDist, MealParams, ParamSet};
use crate::plan::{DayRecord, ItineraryPlan, PoiVisit, Verb, VisitKind};
use crate::sandbox::{normalize_name, Attraction, Sandbox};
use crate::vocab::{Meal, TravelerType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("plan has no meal with a scheduled visit")]
    NoMeals,
    #[error("{meal} parameters have a singular covariance")]
    SingularCovariance { meal: Meal },
    #[error("plan has {plan} days, reference has {gold}")]
    DayCountMismatch { plan: usize, gold: usize },
    #[error("plan has no points of interest")]
    EmptyPlan,
    #[error("persona has no non-empty component")]
    EmptyPersona,
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealObservation {
    pub meal: Meal,
    /// Midpoint, fractional hours of day.
    pub t_m: f64,
    /// Duration, hours.
    pub d_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionObservation {
    pub name: String,
    pub category_mean: f64,
    pub d_i: f64,
    pub day_index: u32,
}

/// One day's attraction visits as (observed hours, category mean hours),
/// labelled with the traveler type. Input to parameter estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionDaySample {
    pub traveler: TravelerType,
    pub visits: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub t_meal: Option<f64>,
    pub t_attrac: f64,
    pub s_spatial: f64,
    pub s_persona: Option<f64>,
    /// Present only when a reference plan was supplied.
    pub s_ord: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn meal_observations(plan: &ItineraryPlan) -> Vec<MealObservation> {
    let mut out = Vec::new();
    for day in &plan.days {
        for (slot, idx) in day.meal_visit_indices().into_iter().enumerate() {
            if let Some(i) = idx {
                let w = &day.poi_list[i].window;
                out.push(MealObservation {
                    meal: Meal::ALL[slot],
                    t_m: w.midpoint_hours(),
                    d_m: w.duration_hours(),
                });
            }
        }
    }
    out
}

/// Peak-normalized bivariate normal density at one meal, in `[0, 1]`.
pub fn meal_score(obs: &MealObservation, dist: &MealDist) -> Result<f64, MetricError> {
    if !dist.is_nondegenerate() {
        return Err(MetricError::SingularCovariance { meal: obs.meal });
    }
    let zt = (obs.t_m - dist.mean_time) / dist.std_time;
    let zd = (obs.d_m - dist.mean_duration) / dist.std_duration;
    let b = dist.beta;
    let m2 = (zt * zt - 2.0 * b * zt * zd + zd * zd) / (1.0 - b * b);
    Ok((-m2 / 2.0).exp())
}

/// Mean per-meal score over every meal with a visit window.
pub fn temporal_meal_score(plan: &ItineraryPlan, params: &MealParams) -> Result<f64, MetricError> {
    let obs = meal_observations(plan);
    if obs.is_empty() {
        return Err(MetricError::NoMeals);
    }
    let mut total = 0.0;
    for o in &obs {
        total += meal_score(o, params.get(o.meal))?;
    }
    Ok(total / obs.len() as f64)
}

fn poisson_pmf(lambda: f64, n: u32) -> f64 {
    let mut p = (-lambda).exp();
    for i in 1..=n {
        p *= lambda / f64::from(i);
    }
    p
}

/// Expected visit length for an attraction on a day with `n` attractions.
pub fn adjusted_duration(
    category_mean: f64,
    n: u32,
    traveler: TravelerType,
    params: &AttractionParams,
) -> f64 {
    match traveler {
        TravelerType::Adventure => {
            category_mean - params.k * (f64::from(n) - f64::from(params.n_min))
        }
        TravelerType::Laidback => {
            category_mean + params.k * (f64::from(params.n_max) - f64::from(n))
        }
    }
}

/// Gaussian fit of the duration times the Poisson weight of the day's count.
pub fn attraction_term(
    obs: &AttractionObservation,
    n: u32,
    traveler: TravelerType,
    params: &AttractionParams,
) -> f64 {
    let mu = adjusted_duration(obs.category_mean, n, traveler, params);
    let gauss = (-(obs.d_i - mu).powi(2) / (2.0 * params.sigma_d * params.sigma_d)).exp();
    gauss * poisson_pmf(params.lambda(traveler), n)
}

/// Mean term over observations; `n` for each is the count sharing its day.
/// Returns 0 for an empty list.
pub fn temporal_attraction_score_obs(
    obs: &[AttractionObservation],
    traveler: TravelerType,
    params: &AttractionParams,
) -> f64 {
    if obs.is_empty() {
        return 0.0;
    }
    let mut per_day: HashMap<u32, u32> = HashMap::new();
    for o in obs {
        *per_day.entry(o.day_index).or_default() += 1;
    }
    obs.iter()
        .map(|o| attraction_term(o, per_day[&o.day_index], traveler, params))
        .sum::<f64>()
        / obs.len() as f64
}

fn resolve_attraction<'s>(
    sb: &'s Sandbox,
    v: &PoiVisit,
    day: &DayRecord,
) -> Option<&'s Attraction> {
    if v.verb != Verb::Visit || !matches!(v.kind, VisitKind::Attraction | VisitKind::Unclassified) {
        return None;
    }
    day.current_city
        .cities()
        .into_iter()
        .find_map(|c| sb.attraction(&v.name, c))
}

fn category_mean(a: &Attraction, durations: &BTreeMap<String, f64>) -> f64 {
    let vals: Vec<f64> = a
        .categories
        .iter()
        .map(|c| {
            durations
                .get(c.label())
                .copied()
                .unwrap_or_else(|| c.duration_hours())
        })
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Attraction visits in the plan that resolve in the sandbox. Visits that do
/// not resolve have no category and are left out.
pub fn attraction_observations(
    plan: &ItineraryPlan,
    sandbox: &Sandbox,
    category_durations: &BTreeMap<String, f64>,
) -> Vec<AttractionObservation> {
    let mut out = Vec::new();
    for day in &plan.days {
        for v in &day.poi_list {
            if let Some(a) = resolve_attraction(sandbox, v, day) {
                out.push(AttractionObservation {
                    name: v.name.clone(),
                    category_mean: category_mean(a, category_durations),
                    d_i: v.window.duration_hours(),
                    day_index: day.day_index,
                });
            }
        }
    }
    out
}

/// Per-day samples for estimation, including days without attractions.
pub fn attraction_day_samples(
    plan: &ItineraryPlan,
    traveler: TravelerType,
    sandbox: &Sandbox,
    category_durations: &BTreeMap<String, f64>,
) -> Vec<AttractionDaySample> {
    let obs = attraction_observations(plan, sandbox, category_durations);
    plan.days
        .iter()
        .map(|day| AttractionDaySample {
            traveler,
            visits: obs
                .iter()
                .filter(|o| o.day_index == day.day_index)
                .map(|o| (o.d_i, o.category_mean))
                .collect(),
        })
        .collect()
}

pub fn temporal_attraction_score(
    plan: &ItineraryPlan,
    traveler: TravelerType,
    params: &AttractionParams,
    category_durations: &BTreeMap<String, f64>,
    sandbox: &Sandbox,
) -> f64 {
    temporal_attraction_score_obs(
        &attraction_observations(plan, sandbox, category_durations),
        traveler,
        params,
    )
}

pub const SPATIAL_THRESHOLD_M: f64 = 5000.0;
pub const SPATIAL_DECAY_PER_M: f64 = 0.0002;

/// Score of one transit distance in meters: linear to 0.5 at the threshold,
/// exponential decay beyond.
pub fn spatial_point_score(distance_m: f64) -> f64 {
    if distance_m <= SPATIAL_THRESHOLD_M {
        1.0 - 0.5 * distance_m / SPATIAL_THRESHOLD_M
    } else {
        0.5 * (-SPATIAL_DECAY_PER_M * (distance_m - SPATIAL_THRESHOLD_M)).exp()
    }
}

/// Mean over every visit; 0 for a plan without visits.
pub fn spatial_score(plan: &ItineraryPlan) -> f64 {
    let (sum, n) = plan.visits().fold((0.0, 0usize), |(s, n), v| {
        (s + spatial_point_score(v.transit_distance), n + 1)
    });
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Unit-cost edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let next = (diag + usize::from(x != y))
                .min(row[j] + 1)
                .min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// `1 - distance / longer length`; two empty sequences score 1.
pub fn sequence_similarity<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

fn day_sequence(day: &DayRecord) -> Vec<String> {
    day.poi_list
        .iter()
        .map(|v| normalize_name(&v.name))
        .collect()
}

/// Mean per-day similarity of the visit order to a reference plan.
pub fn ordering_score(plan: &ItineraryPlan, gold: &ItineraryPlan) -> Result<f64, MetricError> {
    if plan.days.len() != gold.days.len() {
        return Err(MetricError::DayCountMismatch {
            plan: plan.days.len(),
            gold: gold.days.len(),
        });
    }
    if plan.days.is_empty() {
        return Ok(1.0);
    }
    let total: f64 = plan
        .days
        .iter()
        .zip(&gold.days)
        .map(|(a, b)| sequence_similarity(&day_sequence(a), &day_sequence(b)))
        .sum();
    Ok(total / plan.days.len() as f64)
}

/// Mean cosine over every (persona component, visited place) pair.
///
/// Every visit counts, so a place visited twice weighs twice. Blank persona
/// components are skipped.
pub fn persona_score(
    plan: &ItineraryPlan,
    persona: &Persona,
    embedder: &dyn Embedder,
) -> Result<f64, MetricError> {
    let components: Vec<&str> = persona
        .components()
        .into_iter()
        .filter(|c| !c.trim().is_empty())
        .collect();
    if components.is_empty() {
        return Err(MetricError::EmptyPersona);
    }
    let mut weights: BTreeMap<&str, usize> = BTreeMap::new();
    for v in plan.visits() {
        *weights.entry(v.name.as_str()).or_default() += 1;
    }
    if weights.is_empty() {
        return Err(MetricError::EmptyPlan);
    }
    let mut texts = components.clone();
    texts.extend(weights.keys().copied());
    let vectors = embedder.embed(&texts)?;
    let (pv, qv) = vectors.split_at(components.len());
    let mut total = 0.0;
    let mut count = 0usize;
    for p in pv {
        for (q, w) in qv.iter().zip(weights.values()) {
            total += cosine_similarity(p, q)? * *w as f64;
            count += w;
        }
    }
    Ok(total / count as f64)
}

/// All five scores for one delivered plan.
///
/// A plan without meals or visits still gets a report: the affected score is
/// left empty and a note says why. Configuration problems (degenerate
/// parameters, an unreachable embedder) are errors.
pub fn evaluate_all(
    plan: &ItineraryPlan,
    persona: &Persona,
    gold: Option<&ItineraryPlan>,
    sandbox: &Sandbox,
    params: &ParamSet,
    embedder: &dyn Embedder,
) -> Result<ScoreReport, MetricError> {
    let mut notes = Vec::new();
    let t_meal = match temporal_meal_score(plan, &params.meals) {
        Ok(v) => Some(v),
        Err(MetricError::NoMeals) => {
            notes.push("no meals scheduled".to_string());
            None
        }
        Err(e) => return Err(e),
    };
    let obs = attraction_observations(plan, sandbox, &params.category_durations);
    if obs.is_empty() {
        notes.push("no attractions scored".to_string());
    }
    let t_attrac = temporal_attraction_score_obs(&obs, persona.traveler_type, &params.attractions);
    let s_persona = match persona_score(plan, persona, embedder) {
        Ok(v) => Some(v),
        Err(e @ (MetricError::EmptyPlan | MetricError::EmptyPersona)) => {
            notes.push(e.to_string());
            None
        }
        Err(e) => return Err(e),
    };
    let s_ord = match gold.map(|g| ordering_score(plan, g)) {
        None => None,
        Some(Ok(v)) => Some(v),
        Some(Err(e)) => {
            notes.push(e.to_string());
            None
        }
    };
    Ok(ScoreReport {
        t_meal,
        t_attrac,
        s_spatial: spatial_score(plan),
        s_persona,
        s_ord,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{builtin_params, DurationClass};
    use proptest::prelude::*;

    fn dist(beta: f64) -> MealDist {
        MealDist::new(9.63, 0.90, 1.08, 0.24, beta)
    }

    #[test]
    fn meal_peak_and_one_sigma() {
        let d = dist(0.0);
        let at = |t, dur| {
            meal_score(
                &MealObservation {
                    meal: Meal::Breakfast,
                    t_m: t,
                    d_m: dur,
                },
                &d,
            )
            .unwrap()
        };
        assert_eq!(at(9.63, 0.90), 1.0);
        assert!((at(9.63 + 1.08, 0.90) - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn meal_matches_matrix_inverse() {
        let d = dist(0.21);
        let (x, y) = (9.5 - d.mean_time, 1.0 - d.mean_duration);
        let (a, b, c) = (
            d.std_time.powi(2),
            d.beta * d.std_time * d.std_duration,
            d.std_duration.powi(2),
        );
        let det = a * c - b * b;
        let m2 = (c * x * x - 2.0 * b * x * y + a * y * y) / det;
        let got = meal_score(
            &MealObservation {
                meal: Meal::Breakfast,
                t_m: 9.5,
                d_m: 1.0,
            },
            &d,
        )
        .unwrap();
        assert!((got - (-m2 / 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn singular_meal_params_rejected() {
        let obs = MealObservation {
            meal: Meal::Lunch,
            t_m: 14.0,
            d_m: 1.0,
        };
        assert!(matches!(
            meal_score(&obs, &dist(1.0)),
            Err(MetricError::SingularCovariance { .. })
        ));
    }

    #[test]
    fn attraction_hand_case() {
        let p = builtin_params(DurationClass::ThreeDay).attractions;
        let o = AttractionObservation {
            name: "Museum".into(),
            category_mean: 3.0,
            d_i: 4.12,
            day_index: 1,
        };
        let got = temporal_attraction_score_obs(&[o], TravelerType::Laidback, &p);
        assert!((got - 1.10 * (-1.10f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn traveler_types_differ_by_poisson_factor() {
        let p = builtin_params(DurationClass::ThreeDay).attractions;
        let mk = |traveler| {
            let mu = adjusted_duration(3.0, 1, traveler, &p);
            let o = AttractionObservation {
                name: "M".into(),
                category_mean: 3.0,
                d_i: mu,
                day_index: 1,
            };
            attraction_term(&o, 1, traveler, &p)
        };
        assert!((mk(TravelerType::Laidback) - 1.10 * (-1.10f64).exp()).abs() < 1e-12);
        assert!((mk(TravelerType::Adventure) - 2.01 * (-2.01f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn busy_adventure_day_stays_small() {
        let p = builtin_params(DurationClass::ThreeDay).attractions;
        let obs: Vec<AttractionObservation> = (0..3)
            .map(|i| AttractionObservation {
                name: format!("A{i}"),
                category_mean: 3.0,
                d_i: 2.5,
                day_index: 2,
            })
            .collect();
        let s = temporal_attraction_score_obs(&obs, TravelerType::Adventure, &p);
        assert!(s > 0.0 && s < 0.3, "{s}");
    }

    #[test]
    fn spatial_closed_forms() {
        assert_eq!(spatial_point_score(0.0), 1.0);
        assert_eq!(spatial_point_score(5000.0), 0.5);
        assert!((spatial_point_score(10_000.0) - 0.5 * (-1f64).exp()).abs() < 1e-12);
        assert!((spatial_point_score(5000.0 + 1e-9) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn ordering_examples() {
        assert_eq!(sequence_similarity(&["a", "b", "c"], &["a", "b", "c"]), 1.0);
        assert!(
            (sequence_similarity(&["a", "b", "c"], &["a", "c", "b"]) - 1.0 / 3.0).abs() < 1e-12
        );
        assert_eq!(sequence_similarity(&["x", "y"], &["a", "b", "c"]), 0.0);
        let empty: [&str; 0] = [];
        assert_eq!(sequence_similarity(&empty, &empty), 1.0);
    }

    proptest! {
        #[test]
        fn spatial_is_monotone(a in 0.0f64..50_000.0, b in 0.0f64..50_000.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(spatial_point_score(lo) >= spatial_point_score(hi));
            prop_assert!(spatial_point_score(hi) > 0.0 && spatial_point_score(hi) <= 1.0);
        }

        #[test]
        fn ordering_is_symmetric(a in proptest::collection::vec(0u8..5, 0..8), b in proptest::collection::vec(0u8..5, 0..8)) {
            prop_assert_eq!(sequence_similarity(&a, &b), sequence_similarity(&b, &a));
            prop_assert_eq!(sequence_similarity(&a, &b) == 1.0, a == b);
        }

        #[test]
        fn meal_score_falls_away_from_mean(off1 in 0.0f64..5.0, off2 in 0.0f64..5.0) {
            let d = dist(0.0);
            let s = |off: f64| meal_score(&MealObservation { meal: Meal::Breakfast, t_m: 9.63 + off, d_m: 0.90 }, &d).unwrap();
            if off1 < off2 {
                prop_assert!(s(off1) > s(off2) || s(off2) == 0.0);
            }
        }
    }
}
