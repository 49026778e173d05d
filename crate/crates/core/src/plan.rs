//! Structured itinerary text: parser and serializer.
//!
//! A plan is a sequence of `Day N:` blocks, each carrying nine fields. The
//! last field, `Point of Interest List`, is a `;`-separated list of entries of
//! the form
//!
//! ```text
//! <name>, (stay|visit) from HH:MM to HH:MM, nearest transit: <stop>, <d>m away
//! ```
//!
//! The same days can also arrive as a JSON array of per-day objects whose
//! string values follow the text grammar. Both forms produce one
//! [`ItineraryPlan`].

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::sandbox::normalize_name;
use crate::time::{TimeOfDay, MINUTES_PER_DAY};
use crate::vocab::Meal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: expected {expected}, found `{found}`")]
pub struct ParseError {
    pub line: usize,
    pub expected: String,
    pub found: String,
}

impl ParseError {
    fn new(line: usize, expected: impl Into<String>, found: impl Into<String>) -> Self {
        Self {
            line,
            expected: expected.into(),
            found: found.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimeWindow {
    pub start: TimeOfDay,
    pub end: TimeOfDay,
    pub wraps_midnight: bool,
}

impl TimeWindow {
    /// A window that ends after it starts on the same day.
    pub fn same_day(start: TimeOfDay, end: TimeOfDay) -> Option<Self> {
        (end > start).then_some(Self {
            start,
            end,
            wraps_midnight: false,
        })
    }

    /// `end < start` is read as running past midnight.
    pub fn overnight(start: TimeOfDay, end: TimeOfDay) -> Option<Self> {
        if end > start {
            Some(Self {
                start,
                end,
                wraps_midnight: false,
            })
        } else if end < start {
            Some(Self {
                start,
                end,
                wraps_midnight: true,
            })
        } else {
            None
        }
    }

    pub fn duration_minutes(&self) -> u32 {
        let (s, e) = (
            u32::from(self.start.minutes()),
            u32::from(self.end.minutes()),
        );
        if self.wraps_midnight {
            e + u32::from(MINUTES_PER_DAY) - s
        } else {
            e - s
        }
    }

    pub fn duration_hours(&self) -> f64 {
        f64::from(self.duration_minutes()) / 60.0
    }

    /// Midpoint in fractional hours of day, in `[0, 24)`.
    pub fn midpoint_hours(&self) -> f64 {
        let mid = f64::from(self.start.minutes()) + f64::from(self.duration_minutes()) / 2.0;
        (mid / 60.0) % 24.0
    }

    /// Shifts both ends by `minutes`, wrapping around the clock.
    pub fn shifted(&self, minutes: i64) -> Self {
        let start = TimeOfDay::from_minutes_wrapping(i64::from(self.start.minutes()) + minutes);
        let end = TimeOfDay::from_minutes_wrapping(i64::from(self.end.minutes()) + minutes);
        Self {
            start,
            end,
            wraps_midnight: end < start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verb {
    Stay,
    Visit,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Stay => "stay",
            Verb::Visit => "visit",
        }
    }
}

/// What a visit was matched to among the day's named places.
///
/// `Unclassified` marks a visited name that none of the day's meal or
/// attraction fields mention; checkers resolve it against the sandbox.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VisitKind {
    Accommodation,
    Attraction,
    Restaurant,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoiVisit {
    pub name: String,
    pub kind: VisitKind,
    pub window: TimeWindow,
    pub transit_stop: String,
    /// Meters.
    pub transit_distance: f64,
    pub verb: Verb,
}

/// A place named in a day field: `name` or `name, City`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlaceRef {
    pub name: String,
    pub city: Option<String>,
}

impl PlaceRef {
    pub fn new(name: impl Into<String>, city: Option<String>) -> Self {
        Self {
            name: name.into(),
            city,
        }
    }

    pub fn parse(text: &str) -> Self {
        let text = text.trim();
        match text.rsplit_once(',') {
            Some((name, city)) if !name.trim().is_empty() && !city.trim().is_empty() => Self {
                name: name.trim().to_string(),
                city: Some(city.trim().to_string()),
            },
            _ => Self {
                name: text.to_string(),
                city: None,
            },
        }
    }

    /// The field text as written.
    pub fn raw(&self) -> String {
        match &self.city {
            Some(city) => format!("{}, {}", self.name, city),
            None => self.name.clone(),
        }
    }

    /// True when `name` refers to this place, with or without the city suffix.
    pub fn matches(&self, name: &str) -> bool {
        let n = normalize_name(name);
        n == normalize_name(&self.name) || (self.city.is_some() && n == normalize_name(&self.raw()))
    }
}

impl fmt::Display for PlaceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentCity {
    Single(String),
    Transition { from: String, to: String },
}

impl CurrentCity {
    fn parse(text: &str) -> Self {
        let t = text.trim();
        if let Some(rest) = strip_prefix_ci(t, "from ") {
            if let Some((from, to)) = rest.split_once(" to ") {
                return CurrentCity::Transition {
                    from: from.trim().to_string(),
                    to: to.trim().to_string(),
                };
            }
        }
        CurrentCity::Single(t.to_string())
    }

    /// Cities the day takes place in: one, or both ends of a transition.
    pub fn cities(&self) -> Vec<&str> {
        match self {
            CurrentCity::Single(c) => vec![c],
            CurrentCity::Transition { from, to } => vec![from, to],
        }
    }

    /// Where the traveler is at the end of the day.
    pub fn end_city(&self) -> &str {
        match self {
            CurrentCity::Single(c) => c,
            CurrentCity::Transition { to, .. } => to,
        }
    }

    pub fn start_city(&self) -> &str {
        match self {
            CurrentCity::Single(c) => c,
            CurrentCity::Transition { from, .. } => from,
        }
    }
}

impl fmt::Display for CurrentCity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurrentCity::Single(c) => f.write_str(c),
            CurrentCity::Transition { from, to } => write!(f, "from {from} to {to}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlightLeg {
    pub number: String,
    pub origin: String,
    pub dest: String,
    pub departure: TimeOfDay,
    pub arrival: TimeOfDay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Transportation {
    Flight(FlightLeg),
    /// Any other mode, kept verbatim (e.g. "Self-driving, from A to B, ...").
    Other(String),
}

impl Transportation {
    pub fn is_self_driving(&self) -> bool {
        match self {
            Transportation::Flight(_) => false,
            Transportation::Other(text) => {
                let t = normalize_name(text).replace(['-', '_'], " ");
                t.contains("self driving")
            }
        }
    }
}

impl fmt::Display for Transportation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transportation::Flight(leg) => write!(
                f,
                "Flight Number: {}, from {} to {}, Departure Time: {}, Arrival Time: {}",
                leg.number, leg.origin, leg.dest, leg.departure, leg.arrival
            ),
            Transportation::Other(text) => f.write_str(text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayRecord {
    pub day_index: u32,
    pub current_city: CurrentCity,
    pub transportation: Option<Transportation>,
    pub breakfast: Option<PlaceRef>,
    pub attractions: Vec<PlaceRef>,
    pub lunch: Option<PlaceRef>,
    pub dinner: Option<PlaceRef>,
    pub accommodation: Option<PlaceRef>,
    pub event: Option<PlaceRef>,
    pub poi_list: Vec<PoiVisit>,
}

impl DayRecord {
    pub fn meal(&self, meal: Meal) -> Option<&PlaceRef> {
        match meal {
            Meal::Breakfast => self.breakfast.as_ref(),
            Meal::Lunch => self.lunch.as_ref(),
            Meal::Dinner => self.dinner.as_ref(),
        }
    }

    pub fn meal_mut(&mut self, meal: Meal) -> &mut Option<PlaceRef> {
        match meal {
            Meal::Breakfast => &mut self.breakfast,
            Meal::Lunch => &mut self.lunch,
            Meal::Dinner => &mut self.dinner,
        }
    }

    /// Indexes into `poi_list` of the visit serving each named meal.
    ///
    /// Meals are matched in breakfast, lunch, dinner order; a visit serves at
    /// most one meal, so a restaurant named twice needs two visits.
    pub fn meal_visit_indices(&self) -> [Option<usize>; 3] {
        let mut used = vec![false; self.poi_list.len()];
        let mut out = [None; 3];
        for (slot, meal) in Meal::ALL.iter().enumerate() {
            let Some(place) = self.meal(*meal) else {
                continue;
            };
            let hit = self.poi_list.iter().enumerate().position(|(i, v)| {
                !used[i] && v.kind == VisitKind::Restaurant && place.matches(&v.name)
            });
            if let Some(i) = hit {
                used[i] = true;
                out[slot] = Some(i);
            }
        }
        out
    }

    pub fn meal_visit(&self, meal: Meal) -> Option<&PoiVisit> {
        let slot = Meal::ALL.iter().position(|m| *m == meal)?;
        self.meal_visit_indices()[slot].map(|i| &self.poi_list[i])
    }

    pub fn flight(&self) -> Option<&FlightLeg> {
        match &self.transportation {
            Some(Transportation::Flight(leg)) => Some(leg),
            _ => None,
        }
    }

    /// Re-derives each visit's kind from the day's named places.
    pub fn classify_visits(&mut self) {
        let meals: Vec<PlaceRef> = Meal::ALL
            .iter()
            .filter_map(|m| self.meal(*m).cloned())
            .collect();
        for visit in &mut self.poi_list {
            visit.kind = match visit.verb {
                Verb::Stay => VisitKind::Accommodation,
                Verb::Visit if meals.iter().any(|m| m.matches(&visit.name)) => {
                    VisitKind::Restaurant
                }
                Verb::Visit if self.attractions.iter().any(|a| a.matches(&visit.name)) => {
                    VisitKind::Attraction
                }
                Verb::Visit => VisitKind::Unclassified,
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItineraryPlan {
    pub days: Vec<DayRecord>,
    #[serde(skip)]
    pub source_text: String,
}

impl ItineraryPlan {
    pub fn visits(&self) -> impl Iterator<Item = &PoiVisit> {
        self.days.iter().flat_map(|d| d.poi_list.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Require 3, 5 or 7 days.
    pub benchmark_lengths: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            benchmark_lengths: true,
        }
    }
}

impl ParseOptions {
    pub fn free_form() -> Self {
        Self {
            benchmark_lengths: false,
        }
    }
}

const FIELDS: [&str; 9] = [
    "Current City",
    "Transportation",
    "Breakfast",
    "Attraction",
    "Lunch",
    "Dinner",
    "Accommodation",
    "Event",
    "Point of Interest List",
];

const POI_FIELD: usize = 8;

const JSON_KEYS: [&str; 9] = [
    "current_city",
    "transportation",
    "breakfast",
    "attraction",
    "lunch",
    "dinner",
    "accommodation",
    "event",
    "point_of_interest_list",
];

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix)
        .then(|| &s[prefix.len()..])
}

fn field_index(key: &str) -> Option<usize> {
    let key = key.trim();
    FIELDS.iter().position(|f| f.eq_ignore_ascii_case(key))
}

fn day_header(line: &str) -> Option<Result<u32, ()>> {
    let rest = strip_prefix_ci(line, "day ")?;
    let num = rest.trim().strip_suffix(':')?;
    Some(num.trim().parse().map_err(|_| ()))
}

/// Field values for one day, each with the line it came from.
struct RawDay {
    index: u32,
    line: usize,
    fields: [Option<(usize, String)>; 9],
}

fn optional(value: &str) -> Option<&str> {
    let v = value.trim();
    (!v.is_empty() && v != "-").then_some(v)
}

fn parse_transportation(value: &str, line: usize) -> Result<Option<Transportation>, ParseError> {
    let Some(v) = optional(value) else {
        return Ok(None);
    };
    let Some(rest) = strip_prefix_ci(v, "Flight Number:") else {
        return Ok(Some(Transportation::Other(v.to_string())));
    };
    let bad = |expected: &str| ParseError::new(line, expected, v);
    let (number, rest) = rest
        .split_once(", from ")
        .ok_or_else(|| bad("`, from <city> to <city>`"))?;
    let (route, rest) = rest
        .split_once(", Departure Time:")
        .ok_or_else(|| bad("`, Departure Time:`"))?;
    let (origin, dest) = route
        .split_once(" to ")
        .ok_or_else(|| bad("`<city> to <city>`"))?;
    let (dep, arr) = rest
        .split_once(", Arrival Time:")
        .ok_or_else(|| bad("`, Arrival Time:`"))?;
    let time = |t: &str| {
        t.trim()
            .parse::<TimeOfDay>()
            .map_err(|_| bad("time as HH:MM"))
    };
    Ok(Some(Transportation::Flight(FlightLeg {
        number: number.trim().to_string(),
        origin: origin.trim().to_string(),
        dest: dest.trim().to_string(),
        departure: time(dep)?,
        arrival: time(arr.trim_end_matches('.'))?,
    })))
}

/// Parses one point-of-interest entry.
pub fn parse_poi_entry(entry: &str, line: usize) -> Result<PoiVisit, ParseError> {
    let e = entry.trim().trim_end_matches('.').trim_end();
    let (head, tail) = e
        .split_once(", nearest transit:")
        .ok_or_else(|| ParseError::new(line, "`nearest transit:`", entry.trim()))?;
    let (stop, dist) = tail
        .rsplit_once(',')
        .ok_or_else(|| ParseError::new(line, "`<stop>, <d>m away`", tail.trim()))?;
    let dist = dist.trim();
    let number = dist
        .strip_suffix("m away")
        .ok_or_else(|| ParseError::new(line, "`<d>m away`", dist))?
        .trim();
    let transit_distance: f64 = number
        .parse()
        .ok()
        .filter(|d: &f64| d.is_finite() && *d >= 0.0)
        .ok_or_else(|| ParseError::new(line, "non-negative distance in meters", number))?;

    let (name, verb, times) = [(", stay from ", Verb::Stay), (", visit from ", Verb::Visit)]
        .iter()
        .filter_map(|(pat, verb)| head.rfind(pat).map(|i| (i, pat, *verb)))
        .max_by_key(|(i, _, _)| *i)
        .map(|(i, pat, verb)| (&head[..i], verb, &head[i + pat.len()..]))
        .ok_or_else(|| ParseError::new(line, "`, stay from` or `, visit from`", head.trim()))?;
    if name.trim().is_empty() {
        return Err(ParseError::new(line, "place name", head.trim()));
    }
    let (start, end) = times
        .split_once(" to ")
        .ok_or_else(|| ParseError::new(line, "`HH:MM to HH:MM`", times.trim()))?;
    let start: TimeOfDay = start
        .trim()
        .parse()
        .map_err(|_| ParseError::new(line, "time as HH:MM", start.trim()))?;
    let end: TimeOfDay = end
        .trim()
        .parse()
        .map_err(|_| ParseError::new(line, "time as HH:MM", end.trim()))?;
    let window = match verb {
        Verb::Stay => TimeWindow::overnight(start, end),
        Verb::Visit => TimeWindow::same_day(start, end),
    }
    .ok_or_else(|| ParseError::new(line, "end time after start time", times.trim()))?;

    Ok(PoiVisit {
        name: name.trim().to_string(),
        kind: match verb {
            Verb::Stay => VisitKind::Accommodation,
            Verb::Visit => VisitKind::Unclassified,
        },
        window,
        transit_stop: stop.trim().to_string(),
        transit_distance,
        verb,
    })
}

fn parse_poi_list(value: &str, line: usize) -> Result<Vec<PoiVisit>, ParseError> {
    let Some(v) = optional(value) else {
        return Ok(Vec::new());
    };
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != ".")
        .map(|entry| parse_poi_entry(entry, line))
        .collect()
}

fn build_day(raw: RawDay) -> Result<DayRecord, ParseError> {
    let mut values: Vec<(usize, String)> = Vec::with_capacity(9);
    for (i, field) in raw.fields.into_iter().enumerate() {
        match field {
            Some(v) => values.push(v),
            None => {
                return Err(ParseError::new(
                    raw.line,
                    format!("`{}:` in Day {}", FIELDS[i], raw.index),
                    "end of day",
                ))
            }
        }
    }
    let place = |i: usize| optional(&values[i].1).map(PlaceRef::parse);
    let (city_line, city) = &values[0];
    let city =
        optional(city).ok_or_else(|| ParseError::new(*city_line, "current city", city.as_str()))?;
    let attractions = optional(&values[3].1)
        .map(|v| {
            v.split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty() && *s != "-")
                .map(PlaceRef::parse)
                .collect()
        })
        .unwrap_or_default();
    let mut day = DayRecord {
        day_index: raw.index,
        current_city: CurrentCity::parse(city),
        transportation: parse_transportation(&values[1].1, values[1].0)?,
        breakfast: place(2),
        attractions,
        lunch: place(4),
        dinner: place(5),
        accommodation: place(6),
        event: place(7),
        poi_list: parse_poi_list(&values[POI_FIELD].1, values[POI_FIELD].0)?,
    };
    day.classify_visits();
    Ok(day)
}

fn finish(
    days: Vec<DayRecord>,
    source_text: &str,
    last_line: usize,
    opts: ParseOptions,
) -> Result<ItineraryPlan, ParseError> {
    if days.is_empty() {
        return Err(ParseError::new(last_line, "`Day 1:`", "no day blocks"));
    }
    if opts.benchmark_lengths && ![3, 5, 7].contains(&days.len()) {
        return Err(ParseError::new(
            last_line,
            "3, 5 or 7 days",
            format!("{} days", days.len()),
        ));
    }
    Ok(ItineraryPlan {
        days,
        source_text: source_text.to_string(),
    })
}

/// Parses the plain-text plan layout with default options.
pub fn parse_plan(text: &str) -> Result<ItineraryPlan, ParseError> {
    parse_plan_with(text, ParseOptions::default())
}

pub fn parse_plan_with(text: &str, opts: ParseOptions) -> Result<ItineraryPlan, ParseError> {
    let mut days: Vec<DayRecord> = Vec::new();
    let mut current: Option<RawDay> = None;
    let mut in_poi_list = false;
    let mut last_line = 0;

    let close =
        |current: &mut Option<RawDay>, days: &mut Vec<DayRecord>| -> Result<(), ParseError> {
            if let Some(raw) = current.take() {
                days.push(build_day(raw)?);
            }
            Ok(())
        };

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = day_header(line) {
            let index = header.map_err(|_| ParseError::new(line_no, "day number", line))?;
            let prev = days
                .last()
                .map(|d| d.day_index)
                .or(current.as_ref().map(|d| d.index));
            close(&mut current, &mut days)?;
            if let Some(prev) = prev {
                if index <= prev {
                    return Err(ParseError::new(
                        line_no,
                        format!("day number greater than {prev}"),
                        line,
                    ));
                }
            } else if index == 0 {
                return Err(ParseError::new(line_no, "positive day number", line));
            }
            current = Some(RawDay {
                index,
                line: line_no,
                fields: Default::default(),
            });
            in_poi_list = false;
            continue;
        }
        let Some(day) = current.as_mut() else {
            if line.eq_ignore_ascii_case("Travel Plan:") {
                continue;
            }
            return Err(ParseError::new(line_no, "`Day 1:`", line));
        };
        let field = line
            .split_once(':')
            .and_then(|(k, v)| field_index(k).map(|i| (i, v)));
        match field {
            Some((i, value)) => {
                if day.fields[i].is_some() {
                    return Err(ParseError::new(
                        line_no,
                        format!("a single `{}:` field", FIELDS[i]),
                        line,
                    ));
                }
                day.fields[i] = Some((line_no, value.trim().to_string()));
                in_poi_list = i == POI_FIELD;
            }
            None if in_poi_list => {
                let (_, value) = day.fields[POI_FIELD].as_mut().expect("poi field open");
                if !value.is_empty() {
                    value.push(' ');
                }
                value.push_str(line);
            }
            None => return Err(ParseError::new(line_no, "`<Field>: <value>`", line)),
        }
    }
    close(&mut current, &mut days)?;
    finish(days, text, last_line, opts)
}

/// Parses the keyed (JSON) form with default options.
pub fn parse_plan_json(doc: &Value) -> Result<ItineraryPlan, ParseError> {
    parse_plan_json_with(doc, ParseOptions::default())
}

pub fn parse_plan_json_str(text: &str) -> Result<ItineraryPlan, ParseError> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| ParseError::new(e.line(), "a JSON document", e.to_string()))?;
    let mut plan = parse_plan_json(&doc)?;
    plan.source_text = text.to_string();
    Ok(plan)
}

pub fn parse_plan_json_with(doc: &Value, opts: ParseOptions) -> Result<ItineraryPlan, ParseError> {
    let objects: Vec<&Map<String, Value>> = match doc {
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_object()
                    .ok_or_else(|| ParseError::new(i + 1, "a day object", v.to_string()))
            })
            .collect::<Result<_, _>>()?,
        Value::Object(obj) => match obj.get("plan") {
            Some(Value::Array(_)) => return parse_plan_json_with(&obj["plan"], opts),
            _ => vec![obj],
        },
        other => {
            return Err(ParseError::new(
                0,
                "an array of day objects",
                other.to_string(),
            ))
        }
    };
    let mut days: Vec<DayRecord> = Vec::with_capacity(objects.len());
    for (pos, obj) in objects.iter().enumerate() {
        let line = pos + 1;
        let index = match obj.get("days") {
            Some(Value::Number(n)) => n.as_u64(),
            Some(Value::String(s)) => s.trim().parse().ok(),
            _ => return Err(ParseError::new(line, "key `days`", "missing")),
        }
        .and_then(|n| u32::try_from(n).ok())
        .filter(|n| *n > 0)
        .ok_or_else(|| ParseError::new(line, "positive integer `days`", obj["days"].to_string()))?;
        if let Some(prev) = days.last() {
            if index <= prev.day_index {
                return Err(ParseError::new(
                    line,
                    format!("day number greater than {}", prev.day_index),
                    index.to_string(),
                ));
            }
        }
        let mut raw = RawDay {
            index,
            line,
            fields: Default::default(),
        };
        for (i, key) in JSON_KEYS.iter().enumerate() {
            let value = match obj.get(*key) {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Null) => String::new(),
                Some(other) => {
                    return Err(ParseError::new(
                        line,
                        format!("string value for `{key}`"),
                        other.to_string(),
                    ))
                }
                None => return Err(ParseError::new(line, format!("key `{key}`"), "missing")),
            };
            raw.fields[i] = Some((line, value));
        }
        days.push(build_day(raw)?);
    }
    finish(days, &doc.to_string(), objects.len(), opts)
}

fn format_distance(d: f64) -> String {
    format!("{d}m away")
}

pub fn format_poi_entry(v: &PoiVisit) -> String {
    format!(
        "{}, {} from {} to {}, nearest transit: {}, {}",
        v.name,
        v.verb.as_str(),
        v.window.start,
        v.window.end,
        v.transit_stop,
        format_distance(v.transit_distance)
    )
}

fn format_poi_list(list: &[PoiVisit]) -> String {
    if list.is_empty() {
        return "-".to_string();
    }
    let mut s = list
        .iter()
        .map(format_poi_entry)
        .collect::<Vec<_>>()
        .join("; ");
    s.push('.');
    s
}

fn opt_text<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref()
        .map(|x| x.to_string())
        .unwrap_or_else(|| "-".to_string())
}

fn day_fields(day: &DayRecord) -> [String; 9] {
    let attractions = if day.attractions.is_empty() {
        "-".to_string()
    } else {
        day.attractions
            .iter()
            .map(PlaceRef::raw)
            .collect::<Vec<_>>()
            .join("; ")
    };
    [
        day.current_city.to_string(),
        opt_text(&day.transportation),
        opt_text(&day.breakfast),
        attractions,
        opt_text(&day.lunch),
        opt_text(&day.dinner),
        opt_text(&day.accommodation),
        opt_text(&day.event),
        format_poi_list(&day.poi_list),
    ]
}

/// Emits the plain-text layout accepted by [`parse_plan`].
pub fn serialize_plan(plan: &ItineraryPlan) -> String {
    let mut out = String::from("Travel Plan:\n");
    for (i, day) in plan.days.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("Day {}:\n", day.day_index));
        for (name, value) in FIELDS.iter().zip(day_fields(day)) {
            out.push_str(&format!("{name}: {value}\n"));
        }
    }
    out
}

/// Emits the keyed form accepted by [`parse_plan_json`].
pub fn serialize_plan_json(plan: &ItineraryPlan) -> Value {
    Value::Array(
        plan.days
            .iter()
            .map(|day| {
                let mut obj: BTreeMap<&str, Value> = BTreeMap::new();
                obj.insert("days", json!(day.day_index));
                for (key, value) in JSON_KEYS.iter().zip(day_fields(day)) {
                    obj.insert(key, Value::String(value));
                }
                json!(obj)
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> TimeOfDay {
        s.parse().unwrap()
    }

    #[test]
    fn overnight_stay_wraps() {
        let v = parse_poi_entry(
            "Affordable Spacious Refurbished Room in Bushwick!, stay from 21:00 to 07:00, nearest transit: Bushwick Stop, 100m away",
            1,
        )
        .unwrap();
        assert_eq!(
            v.window,
            TimeWindow {
                start: t("21:00"),
                end: t("07:00"),
                wraps_midnight: true
            }
        );
        assert_eq!(v.window.duration_hours(), 10.0);
        assert_eq!(v.verb, Verb::Stay);
        assert_eq!(v.kind, VisitKind::Accommodation);
        assert_eq!(v.transit_distance, 100.0);
    }

    #[test]
    fn decimal_distances_and_single_digit_hours() {
        let v = parse_poi_entry(
            "Phoenicia Specialty Foods, visit from 7:15 to 7:45, nearest transit: Lamar St @ Austin St, 9.87m away.",
            3,
        )
        .unwrap();
        assert_eq!(v.transit_distance, 9.87);
        assert_eq!(v.window.start, t("07:15"));
        assert_eq!(v.transit_stop, "Lamar St @ Austin St");
    }

    #[test]
    fn commas_inside_names_and_stops() {
        let v = parse_poi_entry(
            "Cozy, quiet loft, stay from 22:00 to 08:00, nearest transit: Main St, Northbound, 12.5m away",
            1,
        )
        .unwrap();
        assert_eq!(v.name, "Cozy, quiet loft");
        assert_eq!(v.transit_stop, "Main St, Northbound");
    }

    #[test]
    fn visit_cannot_wrap() {
        let err = parse_poi_entry(
            "Late Diner, visit from 23:00 to 01:00, nearest transit: X, 5m away",
            4,
        )
        .unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.expected.contains("end time after start"));
    }

    #[test]
    fn missing_transit_clause_names_token() {
        let err = parse_poi_entry("Olive Tree Cafe, visit from 09:00 to 09:45", 7).unwrap_err();
        assert_eq!(err.expected, "`nearest transit:`");
        assert_eq!(err.line, 7);
    }

    #[test]
    fn malformed_entries_are_errors() {
        for bad in [
            "X, visit from 9:00 to 10:00, nearest transit: S, -3m away",
            "X, visit from 9:00 to 10:00, nearest transit: S, 3km away",
            "X, visit from 9:00 to 24:00, nearest transit: S, 3m away",
            "X, visit at 9:00, nearest transit: S, 3m away",
            "X, visit from 9:00 until 10:00, nearest transit: S, 3m away",
            "X, stay from 09:00 to 09:00, nearest transit: S, 3m away",
            ", visit from 9:00 to 10:00, nearest transit: S, 3m away",
        ] {
            assert!(parse_poi_entry(bad, 1).is_err(), "{bad}");
        }
    }

    #[test]
    fn window_midpoints() {
        let w = TimeWindow::same_day(t("09:00"), t("10:00")).unwrap();
        assert_eq!(w.midpoint_hours(), 9.5);
        let w = TimeWindow::overnight(t("23:00"), t("03:00")).unwrap();
        assert_eq!(w.midpoint_hours(), 1.0);
        let shifted = TimeWindow::same_day(t("20:00"), t("22:00"))
            .unwrap()
            .shifted(180);
        assert!(shifted.wraps_midnight);
        assert_eq!(shifted.duration_minutes(), 120);
    }

    #[test]
    fn single_day_serializes_to_exact_grammar() {
        let text = "Day 1:\nCurrent City: Charlotte\nTransportation: -\nBreakfast: -\nAttraction: The Mint Museum, Charlotte\nLunch: -\nDinner: -\nAccommodation: -\nEvent: -\nPoint of Interest List: The Mint Museum, visit from 10:30 to 13:00, nearest transit: Mint Stop, 200m away.\n";
        let plan = parse_plan_with(text, ParseOptions::free_form()).unwrap();
        assert_eq!(plan.days[0].poi_list[0].kind, VisitKind::Attraction);
        let out = serialize_plan(&plan);
        assert_eq!(out, format!("Travel Plan:\n{text}"));
        assert!(out.contains(
            "Point of Interest List: The Mint Museum, visit from 10:30 to 13:00, nearest transit: Mint Stop, 200m away.\n"
        ));
    }

    #[test]
    fn benchmark_lengths_enforced_by_default() {
        let text = "Day 1:\nCurrent City: Charlotte\nTransportation: -\nBreakfast: -\nAttraction: -\nLunch: -\nDinner: -\nAccommodation: -\nEvent: -\nPoint of Interest List: -\n";
        let err = parse_plan(text).unwrap_err();
        assert_eq!(err.expected, "3, 5 or 7 days");
        assert!(parse_plan_with(text, ParseOptions::free_form())
            .unwrap()
            .days[0]
            .poi_list
            .is_empty());
    }

    #[test]
    fn missing_field_and_stray_text() {
        let text = "Day 1:\nCurrent City: Charlotte\nTransportation: -\n";
        let err = parse_plan_with(text, ParseOptions::free_form()).unwrap_err();
        assert!(err.expected.contains("Breakfast"), "{err}");

        let err = parse_plan("Sure! Here is your plan.\nDay 1:\n").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn day_numbers_must_increase() {
        let day = |n: u32| {
            format!("Day {n}:\nCurrent City: A\nTransportation: -\nBreakfast: -\nAttraction: -\nLunch: -\nDinner: -\nAccommodation: -\nEvent: -\nPoint of Interest List: -\n")
        };
        let text = format!("{}{}", day(2), day(1));
        let err = parse_plan_with(&text, ParseOptions::free_form()).unwrap_err();
        assert!(err.expected.contains("greater than 2"));
    }

    #[test]
    fn flight_transportation() {
        let tr = parse_transportation(
            "Flight Number: F3633413, from Ithaca to Charlotte, Departure Time: 05:15, Arrival Time: 07:28",
            1,
        )
        .unwrap()
        .unwrap();
        let Transportation::Flight(leg) = &tr else {
            panic!()
        };
        assert_eq!(leg.number, "F3633413");
        assert_eq!(
            (leg.origin.as_str(), leg.dest.as_str()),
            ("Ithaca", "Charlotte")
        );
        assert_eq!(leg.arrival, t("07:28"));
        assert!(
            parse_transportation("Flight Number: F1, from A to B, Departure Time: 5pm", 1).is_err()
        );
        let drive = parse_transportation("Self-driving, from A to B, duration: 2 hours", 1)
            .unwrap()
            .unwrap();
        assert!(drive.is_self_driving());
    }

    #[test]
    fn place_refs() {
        assert_eq!(
            PlaceRef::parse("Entire Apt in the Heart of the City - Galleria, Houston"),
            PlaceRef::new(
                "Entire Apt in the Heart of the City - Galleria",
                Some("Houston".into())
            )
        );
        let p = PlaceRef::parse("Niko Niko's Greek");
        assert_eq!(p.city, None);
        assert!(p.matches("niko  niko's greek"));
    }

    #[test]
    fn repeated_restaurant_needs_two_visits() {
        let text = "Day 1:\nCurrent City: A\nTransportation: -\nBreakfast: Diner, A\nAttraction: -\nLunch: Diner, A\nDinner: -\nAccommodation: -\nEvent: -\nPoint of Interest List: Diner, visit from 09:00 to 10:00, nearest transit: S, 1m away.\n";
        let plan = parse_plan_with(text, ParseOptions::free_form()).unwrap();
        assert_eq!(plan.days[0].meal_visit_indices(), [Some(0), None, None]);
    }
}
