//! Commonsense and hard constraint checks, the cost model, and pass-rate
//! aggregation.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use chrono::NaiveDate;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::params::DurationClass;
use crate::plan::{
    DayRecord, FlightLeg, ItineraryPlan, PlaceRef, PoiVisit, Transportation, Verb, VisitKind,
};
use crate::sandbox::{normalize_name, Event, Flight, PoiKind, PoiRecord, Sandbox};
use crate::vocab::{Category, Cuisine, EventType, HouseRule, Meal, RoomType, TravelerType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub traveler_type: TravelerType,
    pub purpose: String,
    pub spending: String,
    pub location_pref: String,
}

impl Persona {
    /// The four component texts, bare values without field labels.
    pub fn components(&self) -> [&str; 4] {
        [
            self.traveler_type.label(),
            &self.purpose,
            &self.spending,
            &self.location_pref,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoomRequirement {
    Exactly(RoomType),
    /// Entire or private room.
    NotShared,
}

impl RoomRequirement {
    pub fn accepts(self, room: RoomType) -> bool {
        match self {
            RoomRequirement::Exactly(r) => r == room,
            RoomRequirement::NotShared => room != RoomType::SharedRoom,
        }
    }
}

impl fmt::Display for RoomRequirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RoomRequirement::Exactly(r) => write!(f, "{r}"),
            RoomRequirement::NotShared => f.write_str("not shared room"),
        }
    }
}

impl std::str::FromStr for RoomRequirement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize_name(s);
        if key == "not shared room" {
            return Ok(RoomRequirement::NotShared);
        }
        key.parse()
            .map(RoomRequirement::Exactly)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportRule {
    NoFlight,
    NoSelfDriving,
}

impl fmt::Display for TransportRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportRule::NoFlight => "no flight",
            TransportRule::NoSelfDriving => "no self-driving",
        })
    }
}

impl std::str::FromStr for TransportRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_name(s).replace(['-', '_'], " ").as_str() {
            "no flight" | "no flights" => Ok(TransportRule::NoFlight),
            "no self driving" => Ok(TransportRule::NoSelfDriving),
            _ => Err(format!("unknown transportation rule `{s}`")),
        }
    }
}

/// Query-specific requirements. Absent entries are not checked.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocalConstraints {
    /// Restriction that must not apply, e.g. `NoPets` for a query asking for
    /// pets to be allowed.
    pub house_rule: Option<HouseRule>,
    pub cuisines: Vec<Cuisine>,
    pub room_type: Option<RoomRequirement>,
    pub transportation: Option<TransportRule>,
    pub event_types: Vec<EventType>,
    pub attraction_types: Vec<Category>,
}

fn opt_string<E: de::Error>(v: &Value, key: &str) -> Result<Option<String>, E> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.trim().is_empty() || s.trim() == "-" => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(E::custom(format!(
            "`{key}` must be a string or null, found {other}"
        ))),
    }
}

fn string_list<E: de::Error>(v: &Value, key: &str) -> Result<Vec<String>, E> {
    match v.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::String(s)) => Ok(s
            .split(',')
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty())
            .collect()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| {
                i.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| E::custom(format!("`{key}` entries must be strings")))
            })
            .collect(),
        Some(other) => Err(E::custom(format!(
            "`{key}` must be a list, string or null, found {other}"
        ))),
    }
}

fn parse_all<T: std::str::FromStr, E: de::Error>(items: Vec<String>) -> Result<Vec<T>, E>
where
    T::Err: fmt::Display,
{
    items
        .iter()
        .map(|s| s.parse::<T>().map_err(E::custom))
        .collect()
}

impl<'de> Deserialize<'de> for LocalConstraints {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(deserializer)?;
        if v.is_null() {
            return Ok(Self::default());
        }
        if !v.is_object() {
            return Err(de::Error::custom("local_constraint must be an object"));
        }
        let house_rule = opt_string::<D::Error>(&v, "house rule")?
            .map(|s| HouseRule::from_activity(&s).map_err(de::Error::custom))
            .transpose()?;
        let room_type = opt_string::<D::Error>(&v, "room type")?
            .map(|s| s.parse().map_err(de::Error::custom))
            .transpose()?;
        let transportation = opt_string::<D::Error>(&v, "transportation")?
            .map(|s| s.parse().map_err(de::Error::custom))
            .transpose()?;
        Ok(Self {
            house_rule,
            cuisines: parse_all(string_list::<D::Error>(&v, "cuisine")?)?,
            room_type,
            transportation,
            event_types: parse_all(string_list::<D::Error>(&v, "event")?)?,
            attraction_types: parse_all(string_list::<D::Error>(&v, "attraction")?)?,
        })
    }
}

impl Serialize for LocalConstraints {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let list = |items: Vec<String>| {
            if items.is_empty() {
                Value::Null
            } else {
                Value::from(items)
            }
        };
        let v = serde_json::json!({
            "house rule": self.house_rule.map(|r| r.label().trim_start_matches("No ").to_string()),
            "cuisine": list(self.cuisines.iter().map(|c| c.to_string()).collect()),
            "room type": self.room_type.map(|r| r.to_string()),
            "transportation": self.transportation.map(|t| t.to_string()),
            "event": list(self.event_types.iter().map(|e| e.to_string()).collect()),
            "attraction": list(self.attraction_types.iter().map(|a| a.to_string()).collect()),
        });
        v.serialize(serializer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    #[serde(default)]
    pub id: String,
    pub org: String,
    /// A city for one-city trips, otherwise a state.
    pub dest: String,
    pub days: u32,
    pub visiting_city_number: u32,
    #[serde(rename = "date")]
    pub dates: Vec<NaiveDate>,
    pub people_number: u32,
    #[serde(rename = "local_constraint", default)]
    pub local_constraints: LocalConstraints,
    pub budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<Persona>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid query `{id}`: {message}")]
pub struct QueryError {
    pub id: String,
    pub message: String,
}

impl Query {
    pub fn duration_class(&self) -> Option<DurationClass> {
        DurationClass::from_days(self.days as usize)
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        let bad = |message: String| {
            Err(QueryError {
                id: self.id.clone(),
                message,
            })
        };
        let Some(class) = self.duration_class() else {
            return bad(format!("days must be 3, 5 or 7, got {}", self.days));
        };
        if self.dates.len() != self.days as usize {
            return bad(format!(
                "{} dates for a {}-day trip",
                self.dates.len(),
                self.days
            ));
        }
        if self.visiting_city_number as usize != class.visiting_cities() {
            return bad(format!(
                "a {class} trip visits {} cities, query says {}",
                class.visiting_cities(),
                self.visiting_city_number
            ));
        }
        if self.people_number == 0 {
            return bad("people_number must be positive".into());
        }
        if !(self.budget >= 0.0) {
            return bad("budget must be non-negative".into());
        }
        Ok(())
    }

    /// Calendar date of the plan's `pos`-th day (0-based).
    pub fn date_of(&self, pos: usize) -> Option<NaiveDate> {
        self.dates.get(pos).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConstraintId {
    WithinSandbox,
    CompleteInformation,
    SufficientMealGaps,
    ValidPoIList,
    DiverseEvents,
    DiverseRestaurants,
    DiverseAttractions,
    WithinCurrentCity,
    ReasonableCityRoute,
    NonConflictingTransportation,
    Budget,
    RoomRule,
    RoomType,
    Cuisine,
    Transportation,
    EventTypes,
    AttractionTypes,
}

impl ConstraintId {
    pub const COMMONSENSE: [ConstraintId; 10] = [
        ConstraintId::WithinSandbox,
        ConstraintId::CompleteInformation,
        ConstraintId::SufficientMealGaps,
        ConstraintId::ValidPoIList,
        ConstraintId::DiverseEvents,
        ConstraintId::DiverseRestaurants,
        ConstraintId::DiverseAttractions,
        ConstraintId::WithinCurrentCity,
        ConstraintId::ReasonableCityRoute,
        ConstraintId::NonConflictingTransportation,
    ];

    pub const HARD: [ConstraintId; 7] = [
        ConstraintId::Budget,
        ConstraintId::RoomRule,
        ConstraintId::RoomType,
        ConstraintId::Cuisine,
        ConstraintId::Transportation,
        ConstraintId::EventTypes,
        ConstraintId::AttractionTypes,
    ];

    pub fn is_hard(self) -> bool {
        Self::HARD.contains(&self)
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintResult {
    #[serde(rename = "constraint_id")]
    pub id: ConstraintId,
    pub passed: bool,
    /// False for hard constraints the query did not ask for.
    pub applicable: bool,
    pub detail: String,
}

impl ConstraintResult {
    fn from_problems(id: ConstraintId, problems: Vec<String>) -> Self {
        if problems.is_empty() {
            return Self {
                id,
                passed: true,
                applicable: true,
                detail: String::new(),
            };
        }
        const SHOWN: usize = 3;
        let mut detail = problems
            .iter()
            .take(SHOWN)
            .cloned()
            .collect::<Vec<_>>()
            .join("; ");
        if problems.len() > SHOWN {
            detail.push_str(&format!("; (+{} more)", problems.len() - SHOWN));
        }
        Self {
            id,
            passed: false,
            applicable: true,
            detail,
        }
    }

    fn not_requested(id: ConstraintId) -> Self {
        Self {
            id,
            passed: true,
            applicable: false,
            detail: "not requested".into(),
        }
    }

    /// Counts toward pass rates: applicable and failed fails, all else passes.
    pub fn counts_as_pass(&self) -> bool {
        self.passed || !self.applicable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub delivered: bool,
    pub commonsense: Vec<ConstraintResult>,
    pub hard: Vec<ConstraintResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ConstraintReport {
    pub fn undelivered(reason: impl Into<String>) -> Self {
        Self {
            delivered: false,
            commonsense: Vec::new(),
            hard: Vec::new(),
            failure: Some(reason.into()),
        }
    }

    pub fn commonsense_passed(&self) -> bool {
        self.delivered && self.commonsense.iter().all(|r| r.passed)
    }

    pub fn hard_passed(&self) -> bool {
        self.delivered && self.hard.iter().all(ConstraintResult::counts_as_pass)
    }

    pub fn all_passed(&self) -> bool {
        self.commonsense_passed() && self.hard_passed()
    }

    pub fn result(&self, id: ConstraintId) -> Option<&ConstraintResult> {
        self.commonsense
            .iter()
            .chain(&self.hard)
            .find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Minutes between a flight's arrival and the first activity after it.
    pub checkin_gap_minutes: u32,
    /// Minutes between the last activity before a flight and its departure.
    pub checkout_gap_minutes: u32,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            checkin_gap_minutes: 30,
            checkout_gap_minutes: 30,
        }
    }
}

/// Where a named place was found relative to the day it appears on.
enum Placement<'s> {
    Here(PoiRecord<'s>),
    Elsewhere(PoiRecord<'s>),
    Missing,
}

fn name_variants(place: &PlaceRef) -> Vec<String> {
    let mut v = vec![place.name.clone()];
    if place.city.is_some() {
        v.push(place.raw());
    }
    v
}

fn find_in<'s>(
    sb: &'s Sandbox,
    names: &[String],
    cities: &[&str],
    kind: Option<PoiKind>,
) -> Option<PoiRecord<'s>> {
    for city in cities {
        for name in names {
            let hit = match kind {
                Some(k) => sb.lookup_kind(name, city, k),
                None => sb.lookup_poi(name, city).ok().or_else(|| {
                    sb.lookup_any_city(name)
                        .into_iter()
                        .find(|r| normalize_name(r.city()) == normalize_name(city))
                }),
            };
            if hit.is_some() {
                return hit;
            }
        }
    }
    None
}

fn locate<'s>(
    sb: &'s Sandbox,
    names: &[String],
    day_cities: &[&str],
    kind: Option<PoiKind>,
) -> Placement<'s> {
    if let Some(r) = find_in(sb, names, day_cities, kind) {
        return Placement::Here(r);
    }
    for name in names {
        if let Some(r) = sb
            .lookup_any_city(name)
            .into_iter()
            .find(|r| kind.is_none_or(|k| r.kind() == k))
        {
            return Placement::Elsewhere(r);
        }
    }
    Placement::Missing
}

fn locate_place<'s>(
    sb: &'s Sandbox,
    place: &PlaceRef,
    day: &DayRecord,
    kind: PoiKind,
) -> Placement<'s> {
    locate(
        sb,
        &name_variants(place),
        &day.current_city.cities(),
        Some(kind),
    )
}

fn visit_kind_hint(v: &PoiVisit) -> Option<PoiKind> {
    match (v.kind, v.verb) {
        (VisitKind::Accommodation, _) | (_, Verb::Stay) => Some(PoiKind::Accommodation),
        (VisitKind::Attraction, _) => Some(PoiKind::Attraction),
        (VisitKind::Restaurant, _) => Some(PoiKind::Restaurant),
        (VisitKind::Unclassified, Verb::Visit) => None,
    }
}

fn locate_visit<'s>(sb: &'s Sandbox, v: &PoiVisit, day: &DayRecord) -> Placement<'s> {
    locate(
        sb,
        &[v.name.clone()],
        &day.current_city.cities(),
        visit_kind_hint(v),
    )
}

fn resolve_flight<'s>(
    sb: &'s Sandbox,
    leg: &FlightLeg,
    date: Option<NaiveDate>,
) -> Result<&'s Flight, String> {
    let candidates = sb.flights_by_number(&leg.number);
    if candidates.is_empty() {
        return Err(format!("flight {} not in sandbox", leg.number));
    }
    let same_route: Vec<&Flight> = candidates
        .into_iter()
        .filter(|f| {
            normalize_name(&f.origin_city) == normalize_name(&leg.origin)
                && normalize_name(&f.dest_city) == normalize_name(&leg.dest)
        })
        .collect();
    let Some(first) = same_route.first() else {
        return Err(format!(
            "flight {} does not fly {} to {}",
            leg.number, leg.origin, leg.dest
        ));
    };
    let on_date = match date {
        Some(d) => same_route.iter().find(|f| f.date == d).copied(),
        None => Some(*first),
    };
    let Some(f) = on_date else {
        return Err(format!(
            "flight {} does not operate on {}",
            leg.number,
            date.expect("date checked")
        ));
    };
    if f.departure != leg.departure || f.arrival != leg.arrival {
        return Err(format!(
            "flight {} is scheduled {}-{}, plan says {}-{}",
            leg.number, f.departure, f.arrival, leg.departure, leg.arrival
        ));
    }
    Ok(f)
}

fn resolve_event<'s>(
    sb: &'s Sandbox,
    place: &PlaceRef,
    day: &DayRecord,
) -> Option<(&'s Event, bool)> {
    let names = name_variants(place);
    for city in day.current_city.cities() {
        for name in &names {
            if let Some(e) = sb.event(name, city) {
                return Some((e, true));
            }
        }
    }
    names
        .iter()
        .find_map(|n| sb.events_by_name(n).into_iter().next())
        .map(|e| (e, false))
}

fn meal_places(day: &DayRecord) -> impl Iterator<Item = (Meal, &PlaceRef)> {
    Meal::ALL
        .iter()
        .filter_map(move |m| day.meal(*m).map(|p| (*m, p)))
}

fn is_final(plan: &ItineraryPlan, pos: usize) -> bool {
    pos + 1 == plan.days.len()
}

fn within_sandbox(plan: &ItineraryPlan, query: &Query, sb: &Sandbox) -> ConstraintResult {
    let mut problems = Vec::new();
    for (pos, day) in plan.days.iter().enumerate() {
        let d = day.day_index;
        let mut check = |place: &PlaceRef, kind: PoiKind, field: &str| {
            if matches!(locate_place(sb, place, day, kind), Placement::Missing) {
                problems.push(format!("day {d} {field} `{place}` not in sandbox"));
            }
        };
        for (meal, place) in meal_places(day) {
            check(place, PoiKind::Restaurant, meal.label());
        }
        for place in &day.attractions {
            check(place, PoiKind::Attraction, "attraction");
        }
        if let Some(place) = &day.accommodation {
            check(place, PoiKind::Accommodation, "accommodation");
        }
        if let Some(place) = &day.event {
            match resolve_event(sb, place, day) {
                None => problems.push(format!("day {d} event `{place}` not in sandbox")),
                Some((e, _)) => {
                    if let Some(date) = query.date_of(pos) {
                        if e.date != date {
                            problems.push(format!(
                                "day {d} event `{place}` takes place on {}, not {date}",
                                e.date
                            ));
                        }
                    }
                }
            }
        }
        if let Some(leg) = day.flight() {
            if let Err(e) = resolve_flight(sb, leg, query.date_of(pos)) {
                problems.push(format!("day {d}: {e}"));
            }
        }
        for v in &day.poi_list {
            if matches!(locate_visit(sb, v, day), Placement::Missing) {
                problems.push(format!(
                    "day {d} point of interest `{}` not in sandbox",
                    v.name
                ));
            }
        }
    }
    ConstraintResult::from_problems(ConstraintId::WithinSandbox, problems)
}

fn complete_information(plan: &ItineraryPlan, query: &Query) -> ConstraintResult {
    let mut problems = Vec::new();
    if plan.days.len() != query.days as usize {
        problems.push(format!(
            "plan has {} days, query asks for {}",
            plan.days.len(),
            query.days
        ));
    }
    for (pos, day) in plan.days.iter().enumerate() {
        let d = day.day_index;
        if !is_final(plan, pos) && day.accommodation.is_none() {
            problems.push(format!("day {d} has no accommodation"));
        }
        if matches!(
            day.current_city,
            crate::plan::CurrentCity::Transition { .. }
        ) && day.transportation.is_none()
        {
            problems.push(format!("day {d} changes city without transportation"));
        }
        let slots = day.meal_visit_indices();
        for (slot, meal) in Meal::ALL.iter().enumerate() {
            if let Some(place) = day.meal(*meal) {
                if slots[slot].is_none() {
                    problems.push(format!(
                        "day {d} {meal} `{place}` missing from the point of interest list"
                    ));
                }
            }
        }
    }
    ConstraintResult::from_problems(ConstraintId::CompleteInformation, problems)
}

const MIN_MEAL_GAP_MINUTES: i32 = 4 * 60;

fn sufficient_meal_gaps(plan: &ItineraryPlan) -> ConstraintResult {
    let mut problems = Vec::new();
    for day in &plan.days {
        let slots = day.meal_visit_indices();
        let meals: Vec<(Meal, &PoiVisit)> = Meal::ALL
            .iter()
            .zip(slots)
            .filter_map(|(m, s)| s.map(|i| (*m, &day.poi_list[i])))
            .collect();
        for pair in meals.windows(2) {
            let ((m0, v0), (m1, v1)) = (pair[0], pair[1]);
            let gap = i32::from(v1.window.start.minutes()) - i32::from(v0.window.start.minutes());
            if gap < MIN_MEAL_GAP_MINUTES {
                problems.push(format!(
                    "day {} {m1} at {} starts {:.2} h after {m0} at {} (minimum 4 h)",
                    day.day_index,
                    v1.window.start,
                    f64::from(gap) / 60.0,
                    v0.window.start
                ));
            }
        }
    }
    ConstraintResult::from_problems(ConstraintId::SufficientMealGaps, problems)
}

fn fmt_minutes(m: i32) -> String {
    let m = m.rem_euclid(24 * 60);
    format!("{:02}:{:02}", m / 60, m % 60)
}

fn valid_poi_list(plan: &ItineraryPlan, sb: &Sandbox, cfg: &CheckConfig) -> ConstraintResult {
    let mut problems = Vec::new();
    let mut prev_accommodation: Option<&PlaceRef> = None;
    for (pos, day) in plan.days.iter().enumerate() {
        let d = day.day_index;
        let list = &day.poi_list;
        let morning_stay = if pos == 0 {
            day.accommodation.as_ref()
        } else {
            prev_accommodation
        };
        prev_accommodation = day.accommodation.as_ref();

        let (Some(first), Some(last)) = (list.first(), list.last()) else {
            problems.push(format!("day {d} has an empty point of interest list"));
            continue;
        };
        if first.verb != Verb::Stay {
            problems.push(format!(
                "day {d} starts at `{}` instead of the accommodation",
                first.name
            ));
        } else if let Some(acc) = morning_stay {
            if !acc.matches(&first.name) {
                problems.push(format!(
                    "day {d} starts at `{}`, expected `{}`",
                    first.name, acc.name
                ));
            }
        }
        if !is_final(plan, pos) {
            if last.verb != Verb::Stay {
                problems.push(format!(
                    "day {d} ends at `{}` instead of the accommodation",
                    last.name
                ));
            } else if let Some(acc) = &day.accommodation {
                if !acc.matches(&last.name) {
                    problems.push(format!(
                        "day {d} ends at `{}`, expected `{}`",
                        last.name, acc.name
                    ));
                }
            }
        }

        for v in list {
            let record = match locate_visit(sb, v, day) {
                Placement::Here(r) | Placement::Elsewhere(r) => Some(r),
                Placement::Missing => None,
            };
            if let Some(r) = record {
                let stays = r.kind() == PoiKind::Accommodation;
                if (v.verb == Verb::Stay) != stays {
                    problems.push(format!(
                        "day {d} `{}`: a {} cannot be a {}",
                        v.name,
                        kind_label(r.kind()),
                        v.verb.as_str()
                    ));
                }
            }
        }

        // Chronology: minutes since the day's midnight, overnight stays run on.
        let mut prev_end: Option<(i32, &str)> = None;
        for (i, v) in list.iter().enumerate() {
            let start = i32::from(v.window.start.minutes());
            let end = start + v.window.duration_minutes() as i32;
            if v.window.wraps_midnight && i + 1 != list.len() {
                problems.push(format!(
                    "day {d} `{}` runs past midnight before the day is over",
                    v.name
                ));
            }
            if let Some((pe, pname)) = prev_end {
                if start < pe {
                    problems.push(format!(
                        "day {d} `{}` starts at {} before `{pname}` ends at {}",
                        v.name,
                        v.window.start,
                        fmt_minutes(pe)
                    ));
                }
            }
            prev_end = Some((end, &v.name));
        }

        if let Some(leg) = day.flight() {
            let dep = i32::from(leg.departure.minutes());
            let mut arr = i32::from(leg.arrival.minutes());
            if arr <= dep {
                arr += 24 * 60;
            }
            let out_by = dep - cfg.checkout_gap_minutes as i32;
            let in_from = arr + cfg.checkin_gap_minutes as i32;
            for v in list {
                let start = i32::from(v.window.start.minutes());
                let end = start + v.window.duration_minutes() as i32;
                if start < dep {
                    if end > out_by {
                        problems.push(format!(
                            "day {d} `{}` ends at {}, past departure {} less the {} min check-out gap",
                            v.name, v.window.end, leg.departure, cfg.checkout_gap_minutes
                        ));
                    }
                } else if start < in_from {
                    problems.push(format!(
                        "day {d} `{}` starts at {}, before arrival {} plus the {} min check-in gap",
                        v.name, v.window.start, leg.arrival, cfg.checkin_gap_minutes
                    ));
                }
            }
        }
    }
    ConstraintResult::from_problems(ConstraintId::ValidPoIList, problems)
}

fn kind_label(kind: PoiKind) -> &'static str {
    match kind {
        PoiKind::Restaurant => "restaurant",
        PoiKind::Attraction => "attraction",
        PoiKind::Accommodation => "accommodation",
    }
}

/// Fails when any key repeats; `keys` yields (key, label).
fn diverse(id: ConstraintId, keys: impl Iterator<Item = (String, String)>) -> ConstraintResult {
    let mut seen = HashSet::new();
    let mut problems = Vec::new();
    for (key, label) in keys {
        if !seen.insert(key) {
            problems.push(format!("`{label}` chosen more than once"));
        }
    }
    ConstraintResult::from_problems(id, problems)
}

fn place_key(place: &PlaceRef, day: &DayRecord) -> String {
    let city = place
        .city
        .as_deref()
        .unwrap_or_else(|| day.current_city.end_city());
    format!("{}|{}", normalize_name(&place.name), normalize_name(city))
}

fn within_current_city(plan: &ItineraryPlan, sb: &Sandbox) -> ConstraintResult {
    let mut problems = Vec::new();
    for day in &plan.days {
        let d = day.day_index;
        let cities = day.current_city.cities().join(" / ");
        let elsewhere = |what: &str, r: PoiRecord| {
            format!(
                "day {d} {what} `{}` is in {}, not {cities}",
                r.name(),
                r.city()
            )
        };
        for (meal, place) in meal_places(day) {
            if let Placement::Elsewhere(r) = locate_place(sb, place, day, PoiKind::Restaurant) {
                problems.push(elsewhere(meal.label(), r));
            }
        }
        for place in &day.attractions {
            if let Placement::Elsewhere(r) = locate_place(sb, place, day, PoiKind::Attraction) {
                problems.push(elsewhere("attraction", r));
            }
        }
        if let Some(place) = &day.accommodation {
            if let Placement::Elsewhere(r) = locate_place(sb, place, day, PoiKind::Accommodation) {
                problems.push(elsewhere("accommodation", r));
            }
        }
        if let Some(place) = &day.event {
            if let Some((e, false)) = resolve_event(sb, place, day) {
                problems.push(format!(
                    "day {d} event `{}` is in {}, not {cities}",
                    e.name, e.city
                ));
            }
        }
        for v in &day.poi_list {
            if let Placement::Elsewhere(r) = locate_visit(sb, v, day) {
                problems.push(elsewhere("point of interest", r));
            }
        }
    }
    ConstraintResult::from_problems(ConstraintId::WithinCurrentCity, problems)
}

fn reasonable_city_route(plan: &ItineraryPlan, query: &Query, sb: &Sandbox) -> ConstraintResult {
    let mut problems = Vec::new();
    let same = |a: &str, b: &str| normalize_name(a) == normalize_name(b);
    let (Some(first), Some(last)) = (plan.days.first(), plan.days.last()) else {
        return ConstraintResult::from_problems(
            ConstraintId::ReasonableCityRoute,
            vec!["plan has no days".into()],
        );
    };
    if !same(first.current_city.start_city(), &query.org) {
        problems.push(format!(
            "trip starts in {}, not {}",
            first.current_city.start_city(),
            query.org
        ));
    }
    if !same(last.current_city.end_city(), &query.org) {
        problems.push(format!(
            "trip ends in {}, not {}",
            last.current_city.end_city(),
            query.org
        ));
    }
    for pair in plan.days.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if !same(a.current_city.end_city(), b.current_city.start_city()) {
            problems.push(format!(
                "day {} starts in {} but day {} ended in {}",
                b.day_index,
                b.current_city.start_city(),
                a.day_index,
                a.current_city.end_city()
            ));
        }
    }

    // Sequence of cities visited, consecutive repeats collapsed.
    let mut route: Vec<String> = Vec::new();
    for day in &plan.days {
        for c in day.current_city.cities() {
            let c = normalize_name(c);
            if route.last() != Some(&c) {
                route.push(c);
            }
        }
    }
    let org = normalize_name(&query.org);
    let inner = if route.len() >= 2 && route[0] == org && route[route.len() - 1] == org {
        &route[1..route.len() - 1]
    } else {
        &route[..]
    };
    let mut seen = HashSet::new();
    for c in inner {
        if *c == org {
            problems.push(format!("returns to {} mid-trip", query.org));
        } else if !seen.insert(c.clone()) {
            problems.push(format!("revisits {c}"));
        }
    }
    if seen.len() != query.visiting_city_number as usize {
        problems.push(format!(
            "visits {} destination cities, query asks for {}",
            seen.len(),
            query.visiting_city_number
        ));
    }

    let dest = normalize_name(&query.dest);
    let dest_is_city = sb.city(&query.dest).is_some();
    for c in &seen {
        let ok = if dest_is_city {
            *c == dest
        } else {
            sb.city(c)
                .is_some_and(|city| normalize_name(&city.state) == dest)
        };
        if !ok {
            problems.push(format!("{c} is not in {}", query.dest));
        }
    }

    for day in &plan.days {
        if let crate::plan::CurrentCity::Transition { from, to } = &day.current_city {
            match &day.transportation {
                Some(Transportation::Flight(leg))
                    if !(same(&leg.origin, from) && same(&leg.dest, to)) =>
                {
                    problems.push(format!(
                        "day {} moves {from} to {to} on a flight from {} to {}",
                        day.day_index, leg.origin, leg.dest
                    ))
                }
                None => problems.push(format!(
                    "day {} moves {from} to {to} with no transportation",
                    day.day_index
                )),
                _ => {}
            }
        }
    }
    ConstraintResult::from_problems(ConstraintId::ReasonableCityRoute, problems)
}

fn non_conflicting_transportation(plan: &ItineraryPlan) -> ConstraintResult {
    let modes: Vec<&Transportation> = plan
        .days
        .iter()
        .filter_map(|d| d.transportation.as_ref())
        .collect();
    let flies = modes.iter().any(|t| matches!(t, Transportation::Flight(_)));
    let drives = modes.iter().any(|t| t.is_self_driving());
    let problems = if flies && drives {
        vec!["plan mixes flights and self-driving".to_string()]
    } else {
        Vec::new()
    };
    ConstraintResult::from_problems(ConstraintId::NonConflictingTransportation, problems)
}

pub fn check_commonsense(
    plan: &ItineraryPlan,
    query: &Query,
    sandbox: &Sandbox,
    config: &CheckConfig,
) -> Vec<ConstraintResult> {
    let events = plan
        .days
        .iter()
        .filter_map(|d| d.event.as_ref().map(|e| (place_key(e, d), e.name.clone())));
    let restaurants = plan
        .days
        .iter()
        .flat_map(|d| meal_places(d).map(move |(_, p)| (place_key(p, d), p.name.clone())));
    let attractions = plan.days.iter().flat_map(|d| {
        d.attractions
            .iter()
            .map(move |p| (place_key(p, d), p.name.clone()))
    });
    vec![
        within_sandbox(plan, query, sandbox),
        complete_information(plan, query),
        sufficient_meal_gaps(plan),
        valid_poi_list(plan, sandbox, config),
        diverse(ConstraintId::DiverseEvents, events),
        diverse(ConstraintId::DiverseRestaurants, restaurants),
        diverse(ConstraintId::DiverseAttractions, attractions),
        within_current_city(plan, sandbox),
        reasonable_city_route(plan, query, sandbox),
        non_conflicting_transportation(plan),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("cannot price {0}")]
    NotFound(String),
}

/// Trip cost: flights and meals per person, lodging per room-night.
///
/// The final day's accommodation field is not a night of the trip and is
/// not charged. Attractions and events are free.
pub fn compute_cost(
    plan: &ItineraryPlan,
    query: &Query,
    sandbox: &Sandbox,
) -> Result<f64, CostError> {
    let people = f64::from(query.people_number);
    let mut total = 0.0;
    for (pos, day) in plan.days.iter().enumerate() {
        if let Some(leg) = day.flight() {
            let f =
                resolve_flight(sandbox, leg, query.date_of(pos)).map_err(CostError::NotFound)?;
            total += f.price * people;
        }
        if !is_final(plan, pos) {
            if let Some(place) = &day.accommodation {
                let (Placement::Here(PoiRecord::Accommodation(acc))
                | Placement::Elsewhere(PoiRecord::Accommodation(acc))) =
                    locate_place(sandbox, place, day, PoiKind::Accommodation)
                else {
                    return Err(CostError::NotFound(format!("accommodation `{place}`")));
                };
                let rooms = match acc.max_occupancy {
                    Some(cap) => query.people_number.div_ceil(cap),
                    None => 1,
                };
                total += acc.price_per_night * f64::from(rooms);
            }
        }
        for (meal, place) in meal_places(day) {
            let (Placement::Here(PoiRecord::Restaurant(r))
            | Placement::Elsewhere(PoiRecord::Restaurant(r))) =
                locate_place(sandbox, place, day, PoiKind::Restaurant)
            else {
                return Err(CostError::NotFound(format!("{meal} `{place}`")));
            };
            total += r.avg_cost * people;
        }
    }
    Ok(total)
}

fn resolved_accommodations<'s>(
    plan: &ItineraryPlan,
    sb: &'s Sandbox,
) -> Vec<(u32, &'s crate::sandbox::Accommodation)> {
    plan.days
        .iter()
        .filter_map(|d| {
            let place = d.accommodation.as_ref()?;
            match locate_place(sb, place, d, PoiKind::Accommodation) {
                Placement::Here(PoiRecord::Accommodation(a))
                | Placement::Elsewhere(PoiRecord::Accommodation(a)) => Some((d.day_index, a)),
                _ => None,
            }
        })
        .collect()
}

pub fn check_hard(plan: &ItineraryPlan, query: &Query, sandbox: &Sandbox) -> Vec<ConstraintResult> {
    let lc = &query.local_constraints;
    let mut out = Vec::with_capacity(ConstraintId::HARD.len());

    out.push(match compute_cost(plan, query, sandbox) {
        Ok(cost) if cost <= query.budget => {
            ConstraintResult::from_problems(ConstraintId::Budget, Vec::new())
        }
        Ok(cost) => ConstraintResult::from_problems(
            ConstraintId::Budget,
            vec![format!("cost {cost:.2} exceeds budget {:.2}", query.budget)],
        ),
        Err(e) => ConstraintResult::from_problems(ConstraintId::Budget, vec![e.to_string()]),
    });

    let stays = resolved_accommodations(plan, sandbox);
    out.push(match lc.house_rule {
        None => ConstraintResult::not_requested(ConstraintId::RoomRule),
        Some(rule) => ConstraintResult::from_problems(
            ConstraintId::RoomRule,
            stays
                .iter()
                .filter(|(_, a)| a.house_rules.contains(&rule))
                .map(|(d, a)| format!("day {d} `{}` has rule `{rule}`", a.name))
                .collect(),
        ),
    });
    out.push(match lc.room_type {
        None => ConstraintResult::not_requested(ConstraintId::RoomType),
        Some(req) => ConstraintResult::from_problems(
            ConstraintId::RoomType,
            stays
                .iter()
                .filter(|(_, a)| !req.accepts(a.room_type))
                .map(|(d, a)| {
                    format!(
                        "day {d} `{}` is a {}, query asks for {req}",
                        a.name, a.room_type
                    )
                })
                .collect(),
        ),
    });

    out.push(if lc.cuisines.is_empty() {
        ConstraintResult::not_requested(ConstraintId::Cuisine)
    } else {
        let served: BTreeSet<Cuisine> = plan
            .days
            .iter()
            .flat_map(|d| meal_places(d).map(move |(_, p)| (d, p)))
            .filter_map(
                |(d, p)| match locate_place(sandbox, p, d, PoiKind::Restaurant) {
                    Placement::Here(PoiRecord::Restaurant(r))
                    | Placement::Elsewhere(PoiRecord::Restaurant(r)) => Some(r),
                    _ => None,
                },
            )
            .flat_map(|r| r.cuisines.iter().copied())
            .collect();
        ConstraintResult::from_problems(
            ConstraintId::Cuisine,
            lc.cuisines
                .iter()
                .filter(|c| !served.contains(c))
                .map(|c| format!("no {c} restaurant visited"))
                .collect(),
        )
    });

    out.push(match lc.transportation {
        None => ConstraintResult::not_requested(ConstraintId::Transportation),
        Some(rule) => {
            let offending: Vec<String> = plan
                .days
                .iter()
                .filter(|d| match (&d.transportation, rule) {
                    (Some(Transportation::Flight(_)), TransportRule::NoFlight) => true,
                    (Some(t), TransportRule::NoSelfDriving) => t.is_self_driving(),
                    _ => false,
                })
                .map(|d| format!("day {} violates `{rule}`", d.day_index))
                .collect();
            ConstraintResult::from_problems(ConstraintId::Transportation, offending)
        }
    });

    out.push(if lc.event_types.is_empty() {
        ConstraintResult::not_requested(ConstraintId::EventTypes)
    } else {
        let attended: BTreeSet<EventType> = plan
            .days
            .iter()
            .filter_map(|d| resolve_event(sandbox, d.event.as_ref()?, d))
            .map(|(e, _)| e.event_type)
            .collect();
        ConstraintResult::from_problems(
            ConstraintId::EventTypes,
            lc.event_types
                .iter()
                .filter(|t| !attended.contains(t))
                .map(|t| format!("no {t} event attended"))
                .collect(),
        )
    });

    out.push(if lc.attraction_types.is_empty() {
        ConstraintResult::not_requested(ConstraintId::AttractionTypes)
    } else {
        let covered: BTreeSet<Category> = plan
            .days
            .iter()
            .flat_map(|d| d.attractions.iter().map(move |p| (d, p)))
            .filter_map(
                |(d, p)| match locate_place(sandbox, p, d, PoiKind::Attraction) {
                    Placement::Here(PoiRecord::Attraction(a))
                    | Placement::Elsewhere(PoiRecord::Attraction(a)) => Some(a),
                    _ => None,
                },
            )
            .flat_map(|a| a.categories.iter().copied())
            .collect();
        ConstraintResult::from_problems(
            ConstraintId::AttractionTypes,
            lc.attraction_types
                .iter()
                .filter(|c| !covered.contains(c))
                .map(|c| format!("no {c} attraction visited"))
                .collect(),
        )
    });
    out
}

/// Runs both check families on a delivered plan.
pub fn check_plan(
    plan: &ItineraryPlan,
    query: &Query,
    sandbox: &Sandbox,
    config: &CheckConfig,
) -> ConstraintReport {
    ConstraintReport {
        delivered: true,
        commonsense: check_commonsense(plan, query, sandbox, config),
        hard: check_hard(plan, query, sandbox),
        failure: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub delivery_rate: f64,
    pub cpr_micro: f64,
    pub cpr_macro: f64,
    pub hcpr_micro: f64,
    pub hcpr_macro: f64,
    pub final_pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RateError {
    #[error("no reports to aggregate")]
    EmptyInput,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Micro rates count individual checks over delivered plans; macro and final
/// rates count whole plans over all plans, undelivered ones failing.
pub fn aggregate_rates(reports: &[ConstraintReport]) -> Result<RateSummary, RateError> {
    if reports.is_empty() {
        return Err(RateError::EmptyInput);
    }
    let total = reports.len();
    let delivered: Vec<&ConstraintReport> = reports.iter().filter(|r| r.delivered).collect();
    let cs_checks: usize = delivered.iter().map(|r| r.commonsense.len()).sum();
    let cs_passed: usize = delivered
        .iter()
        .map(|r| r.commonsense.iter().filter(|c| c.passed).count())
        .sum();
    let hard_checks: usize = delivered
        .iter()
        .map(|r| r.hard.iter().filter(|c| c.applicable).count())
        .sum();
    let hard_passed: usize = delivered
        .iter()
        .map(|r| r.hard.iter().filter(|c| c.applicable && c.passed).count())
        .sum();
    // With no applicable hard checks at all, delivered plans pass vacuously.
    let hcpr_micro = if hard_checks == 0 && !delivered.is_empty() {
        1.0
    } else {
        ratio(hard_passed, hard_checks)
    };
    Ok(RateSummary {
        delivery_rate: ratio(delivered.len(), total),
        cpr_micro: ratio(cs_passed, cs_checks),
        cpr_macro: ratio(
            reports.iter().filter(|r| r.commonsense_passed()).count(),
            total,
        ),
        hcpr_micro,
        hcpr_macro: ratio(reports.iter().filter(|r| r.hard_passed()).count(), total),
        final_pass_rate: ratio(reports.iter().filter(|r| r.all_passed()).count(), total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_3: &str = r#"{"org": "Tulsa", "dest": "California", "days": 7, "visiting_city_number": 3,
        "date": ["2024-11-01", "2024-11-02", "2024-11-03", "2024-11-04", "2024-11-05", "2024-11-06", "2024-11-07"],
        "people_number": 2, "local_constraint": {"house rule": null, "cuisine": null, "room type": "not shared room",
        "transportation": null, "event": ["Arts & Theatre", "Film"], "attraction": ["Museums", "Food & Drink"]},
        "budget": 6000, "level": "hard"}"#;

    #[test]
    fn parses_published_query_shape() {
        let q: Query = serde_json::from_str(EXAMPLE_3).unwrap();
        q.validate().unwrap();
        assert_eq!(
            q.local_constraints.room_type,
            Some(RoomRequirement::NotShared)
        );
        assert_eq!(
            q.local_constraints.event_types,
            vec![EventType::ArtsTheatre, EventType::Film]
        );
        assert_eq!(
            q.local_constraints.attraction_types,
            vec![Category::Museums, Category::FoodDrink]
        );
        assert_eq!(q.duration_class(), Some(DurationClass::SevenDay));
        let back: Query = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn house_rule_and_transport_values() {
        let q: Query = serde_json::from_str(
            r#"{"org":"A","dest":"B","days":3,"visiting_city_number":1,"date":["2024-01-01","2024-01-02","2024-01-03"],
            "people_number":1,"local_constraint":{"house rule":"pets","cuisine":["Chinese","Indian"],"room type":null,
            "transportation":"no self-driving","event":null,"attraction":null},"budget":900}"#,
        )
        .unwrap();
        let lc = &q.local_constraints;
        assert_eq!(lc.house_rule, Some(HouseRule::NoPets));
        assert_eq!(lc.cuisines, vec![Cuisine::Chinese, Cuisine::Indian]);
        assert_eq!(lc.transportation, Some(TransportRule::NoSelfDriving));
        let back: Query = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn query_invariants() {
        let mut q: Query = serde_json::from_str(EXAMPLE_3).unwrap();
        q.visiting_city_number = 2;
        assert!(q.validate().is_err());
        let mut q: Query = serde_json::from_str(EXAMPLE_3).unwrap();
        q.dates.pop();
        assert!(q.validate().is_err());
    }

    #[test]
    fn persona_rejects_unknown_traveler_type() {
        let ok = r#"{"traveler_type":"Adventure Seeker","purpose":"Adventure","spending":"Luxury Traveler","location_pref":"Mountains"}"#;
        let p: Persona = serde_json::from_str(ok).unwrap();
        assert_eq!(p.components()[0], "Adventure Seeker");
        let bad = ok.replace("Adventure Seeker", "Casual Tourist");
        assert!(serde_json::from_str::<Persona>(&bad).is_err());
    }

    fn pass(id: ConstraintId) -> ConstraintResult {
        ConstraintResult {
            id,
            passed: true,
            applicable: true,
            detail: String::new(),
        }
    }

    fn fail(id: ConstraintId) -> ConstraintResult {
        ConstraintResult {
            id,
            passed: false,
            applicable: true,
            detail: "x".into(),
        }
    }

    fn report(cs: Vec<ConstraintResult>, hard: Vec<ConstraintResult>) -> ConstraintReport {
        ConstraintReport {
            delivered: true,
            commonsense: cs,
            hard,
            failure: None,
        }
    }

    #[test]
    fn rates_hand_counts() {
        let good = report(
            vec![pass(ConstraintId::WithinSandbox)],
            vec![pass(ConstraintId::Budget)],
        );
        let rates =
            aggregate_rates(&[good.clone(), ConstraintReport::undelivered("garbage")]).unwrap();
        assert_eq!(rates.delivery_rate, 0.5);
        assert_eq!(rates.cpr_macro, 0.5);
        assert_eq!(rates.final_pass_rate, 0.5);
        assert_eq!(rates.cpr_micro, 1.0);

        let none = aggregate_rates(&[
            ConstraintReport::undelivered("a"),
            ConstraintReport::undelivered("b"),
        ])
        .unwrap();
        assert_eq!(
            none,
            RateSummary {
                delivery_rate: 0.0,
                cpr_micro: 0.0,
                cpr_macro: 0.0,
                hcpr_micro: 0.0,
                hcpr_macro: 0.0,
                final_pass_rate: 0.0
            }
        );
        assert_eq!(aggregate_rates(&[]), Err(RateError::EmptyInput));
    }

    #[test]
    fn not_requested_hard_constraints_leave_denominators() {
        let r = report(
            vec![
                pass(ConstraintId::WithinSandbox),
                fail(ConstraintId::DiverseEvents),
            ],
            vec![
                fail(ConstraintId::Budget),
                ConstraintResult::not_requested(ConstraintId::Cuisine),
            ],
        );
        let ok = report(
            vec![pass(ConstraintId::WithinSandbox)],
            vec![
                pass(ConstraintId::Budget),
                ConstraintResult::not_requested(ConstraintId::Cuisine),
            ],
        );
        let rates = aggregate_rates(&[r, ok]).unwrap();
        assert!((rates.cpr_micro - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rates.hcpr_micro, 0.5);
        assert_eq!(rates.hcpr_macro, 0.5);
        assert_eq!(rates.final_pass_rate, 0.5);
        assert!(rates.final_pass_rate <= rates.cpr_macro.min(rates.hcpr_macro));
    }

    #[test]
    fn room_requirement_matching() {
        let r: RoomRequirement = "not shared room".parse().unwrap();
        assert!(
            r.accepts(RoomType::EntireRoom)
                && r.accepts(RoomType::PrivateRoom)
                && !r.accepts(RoomType::SharedRoom)
        );
        let r: RoomRequirement = "Entire Room".parse().unwrap();
        assert!(!r.accepts(RoomType::PrivateRoom));
    }
}
