//! The closed world every plan is judged against.
//!
//! A sandbox is eight comma-separated tables under one directory. Loading
//! validates each row, resolves city references and builds name indexes so
//! that checkers can resolve the free-text names that appear in a plan.
//! Names are compared after lowercasing and collapsing internal whitespace.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::path::Path;

use chrono::NaiveDate;
use csv::StringRecord;
use serde::Serialize;
use thiserror::Error;

use crate::time::TimeOfDay;
use crate::vocab::{Category, Cuisine, EventType, HouseRule, RoomType};

pub const CITIES_FILE: &str = "cities.csv";
pub const FLIGHTS_FILE: &str = "flights.csv";
pub const RESTAURANTS_FILE: &str = "restaurants.csv";
pub const ATTRACTIONS_FILE: &str = "attractions.csv";
pub const ACCOMMODATIONS_FILE: &str = "accommodations.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const TRANSIT_FILE: &str = "transit.csv";
pub const DISTANCES_FILE: &str = "distances.csv";

/// Lowercases and collapses runs of whitespace.
pub fn normalize_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for word in name.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct City {
    pub name: String,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flight {
    pub flight_number: String,
    pub origin_city: String,
    pub dest_city: String,
    pub date: NaiveDate,
    pub departure: TimeOfDay,
    pub arrival: TimeOfDay,
    /// Per person.
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Restaurant {
    pub name: String,
    pub city: String,
    pub cuisines: BTreeSet<Cuisine>,
    pub avg_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attraction {
    pub name: String,
    pub city: String,
    pub categories: BTreeSet<Category>,
    /// Mean of the reference durations of `categories`, in hours.
    pub visit_duration: f64,
}

impl Attraction {
    pub fn new(
        name: impl Into<String>,
        city: impl Into<String>,
        categories: BTreeSet<Category>,
    ) -> Self {
        let visit_duration = mean_category_duration(&categories);
        Self {
            name: name.into(),
            city: city.into(),
            categories,
            visit_duration,
        }
    }
}

pub fn mean_category_duration(categories: &BTreeSet<Category>) -> f64 {
    if categories.is_empty() {
        return 0.0;
    }
    categories.iter().map(|c| c.duration_hours()).sum::<f64>() / categories.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accommodation {
    pub name: String,
    pub city: String,
    pub room_type: RoomType,
    pub house_rules: BTreeSet<HouseRule>,
    pub price_per_night: f64,
    pub max_occupancy: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub name: String,
    pub city: String,
    pub date: NaiveDate,
    pub event_type: EventType,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitLink {
    pub poi_name: String,
    pub poi_city: String,
    pub stop_name: String,
    /// Meters.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceRecord {
    pub from_poi: String,
    pub to_poi: String,
    pub city: String,
    /// Meters.
    pub distance: f64,
    /// Minutes.
    pub travel_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoiKind {
    Restaurant,
    Attraction,
    Accommodation,
}

/// A resolved point of interest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoiRecord<'a> {
    Restaurant(&'a Restaurant),
    Attraction(&'a Attraction),
    Accommodation(&'a Accommodation),
}

impl<'a> PoiRecord<'a> {
    pub fn kind(&self) -> PoiKind {
        match self {
            PoiRecord::Restaurant(_) => PoiKind::Restaurant,
            PoiRecord::Attraction(_) => PoiKind::Attraction,
            PoiRecord::Accommodation(_) => PoiKind::Accommodation,
        }
    }

    pub fn name(&self) -> &'a str {
        match self {
            PoiRecord::Restaurant(r) => &r.name,
            PoiRecord::Attraction(a) => &a.name,
            PoiRecord::Accommodation(a) => &a.name,
        }
    }

    pub fn city(&self) -> &'a str {
        match self {
            PoiRecord::Restaurant(r) => &r.city,
            PoiRecord::Attraction(a) => &a.city,
            PoiRecord::Accommodation(a) => &a.city,
        }
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("missing sandbox file {0}")]
    MissingFile(String),
    #[error("{file}:{line}: column `{column}`: {message}")]
    Schema {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{entity} references unknown city `{city}`")]
    DanglingReference { entity: String, city: String },
    #[error("reading {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("`{name}` not found in {city}")]
    NotFound { name: String, city: String },
    #[error("`{name}` in {city} matches more than one kind of place")]
    Ambiguous { name: String, city: String },
    #[error("`{name}` in {city} has no transit data")]
    NoTransitData { name: String, city: String },
}

/// Raw collections; [`Sandbox::from_parts`] validates and indexes them.
#[derive(Debug, Clone, Default)]
pub struct SandboxParts {
    pub cities: Vec<City>,
    pub flights: Vec<Flight>,
    pub restaurants: Vec<Restaurant>,
    pub attractions: Vec<Attraction>,
    pub accommodations: Vec<Accommodation>,
    pub events: Vec<Event>,
    pub transit_links: Vec<TransitLink>,
    pub distances: Vec<DistanceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum PoiId {
    Restaurant(usize),
    Attraction(usize),
    Accommodation(usize),
}

type Key = (String, String);

fn key(name: &str, city: &str) -> Key {
    (normalize_name(name), normalize_name(city))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SandboxCounts {
    pub cities: usize,
    pub flights: usize,
    pub restaurants: usize,
    pub attractions: usize,
    pub accommodations: usize,
    pub events: usize,
    pub transit_links: usize,
    pub distances: usize,
}

impl fmt::Display for SandboxCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} cities, {} flights, {} restaurants, {} attractions, {} accommodations, {} events, {} transit links, {} distances",
            self.cities,
            self.flights,
            self.restaurants,
            self.attractions,
            self.accommodations,
            self.events,
            self.transit_links,
            self.distances
        )
    }
}

/// Indexed, immutable sandbox.
#[derive(Debug, Clone)]
pub struct Sandbox {
    parts: SandboxParts,
    city_index: HashMap<String, usize>,
    poi_index: HashMap<Key, Vec<PoiId>>,
    poi_by_name: HashMap<String, Vec<PoiId>>,
    flight_index: HashMap<String, Vec<usize>>,
    event_index: HashMap<Key, usize>,
    event_by_name: HashMap<String, Vec<usize>>,
    transit_index: HashMap<Key, usize>,
}

fn schema(file: &str, line: u64, column: &str, message: impl Into<String>) -> SandboxError {
    SandboxError::Schema {
        file: file.to_string(),
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

impl Sandbox {
    /// Validates invariants and builds the lookup indexes.
    pub fn from_parts(parts: SandboxParts) -> Result<Self, SandboxError> {
        if parts.cities.is_empty() {
            return Err(schema(CITIES_FILE, 1, "name", "sandbox has no cities"));
        }
        let mut city_index = HashMap::new();
        for (i, city) in parts.cities.iter().enumerate() {
            let line = i as u64 + 2;
            if city.name.trim().is_empty() {
                return Err(schema(CITIES_FILE, line, "name", "empty city name"));
            }
            if city_index.insert(normalize_name(&city.name), i).is_some() {
                return Err(schema(
                    CITIES_FILE,
                    line,
                    "name",
                    format!("duplicate city `{}`", city.name),
                ));
            }
        }
        let has_city = |c: &str| city_index.contains_key(&normalize_name(c));
        let dangling = |entity: String, city: &str| SandboxError::DanglingReference {
            entity,
            city: city.to_string(),
        };

        let mut flight_index: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, f) in parts.flights.iter().enumerate() {
            let line = i as u64 + 2;
            if f.flight_number.trim().is_empty() {
                return Err(schema(
                    FLIGHTS_FILE,
                    line,
                    "flight_number",
                    "empty flight number",
                ));
            }
            if !(f.price >= 0.0 && f.price.is_finite()) {
                return Err(schema(
                    FLIGHTS_FILE,
                    line,
                    "price",
                    "price must be a finite non-negative number",
                ));
            }
            if normalize_name(&f.origin_city) == normalize_name(&f.dest_city) {
                return Err(schema(
                    FLIGHTS_FILE,
                    line,
                    "dest",
                    "origin and destination are the same city",
                ));
            }
            for c in [&f.origin_city, &f.dest_city] {
                if !has_city(c) {
                    return Err(dangling(format!("flight {}", f.flight_number), c));
                }
            }
            flight_index
                .entry(normalize_name(&f.flight_number))
                .or_default()
                .push(i);
        }

        let mut poi_index: HashMap<Key, Vec<PoiId>> = HashMap::new();
        let mut poi_by_name: HashMap<String, Vec<PoiId>> = HashMap::new();
        let mut add_poi = |file: &str, line: u64, name: &str, city: &str, id: PoiId| {
            if name.trim().is_empty() {
                return Err(schema(file, line, "name", "empty name"));
            }
            if !has_city(city) {
                return Err(dangling(name.to_string(), city));
            }
            let ids = poi_index.entry(key(name, city)).or_default();
            if ids
                .iter()
                .any(|other| std::mem::discriminant(other) == std::mem::discriminant(&id))
            {
                return Err(schema(
                    file,
                    line,
                    "name",
                    format!("duplicate `{name}` in {city}"),
                ));
            }
            ids.push(id);
            poi_by_name
                .entry(normalize_name(name))
                .or_default()
                .push(id);
            Ok(())
        };
        for (i, r) in parts.restaurants.iter().enumerate() {
            let line = i as u64 + 2;
            if !(r.avg_cost >= 0.0 && r.avg_cost.is_finite()) {
                return Err(schema(
                    RESTAURANTS_FILE,
                    line,
                    "avg_cost",
                    "cost must be a finite non-negative number",
                ));
            }
            add_poi(
                RESTAURANTS_FILE,
                line,
                &r.name,
                &r.city,
                PoiId::Restaurant(i),
            )?;
        }
        for (i, a) in parts.attractions.iter().enumerate() {
            let line = i as u64 + 2;
            if a.categories.is_empty() {
                return Err(schema(
                    ATTRACTIONS_FILE,
                    line,
                    "categories",
                    "attraction needs at least one category",
                ));
            }
            let expected = mean_category_duration(&a.categories);
            if (a.visit_duration - expected).abs() > 1e-6 {
                return Err(schema(
                    ATTRACTIONS_FILE,
                    line,
                    "visit_duration",
                    format!(
                        "{} differs from the category mean {expected}",
                        a.visit_duration
                    ),
                ));
            }
            add_poi(
                ATTRACTIONS_FILE,
                line,
                &a.name,
                &a.city,
                PoiId::Attraction(i),
            )?;
        }
        for (i, a) in parts.accommodations.iter().enumerate() {
            let line = i as u64 + 2;
            if !(a.price_per_night >= 0.0 && a.price_per_night.is_finite()) {
                return Err(schema(
                    ACCOMMODATIONS_FILE,
                    line,
                    "price_per_night",
                    "price must be a finite non-negative number",
                ));
            }
            if a.max_occupancy == Some(0) {
                return Err(schema(
                    ACCOMMODATIONS_FILE,
                    line,
                    "max_occupancy",
                    "occupancy must be positive",
                ));
            }
            add_poi(
                ACCOMMODATIONS_FILE,
                line,
                &a.name,
                &a.city,
                PoiId::Accommodation(i),
            )?;
        }

        let mut event_index = HashMap::new();
        let mut event_by_name: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in parts.events.iter().enumerate() {
            let line = i as u64 + 2;
            if e.name.trim().is_empty() {
                return Err(schema(EVENTS_FILE, line, "name", "empty name"));
            }
            if !has_city(&e.city) {
                return Err(dangling(format!("event {}", e.name), &e.city));
            }
            // The same event may run on several dates; the first row wins the
            // (name, city) slot and the name index keeps all of them.
            event_index.entry(key(&e.name, &e.city)).or_insert(i);
            event_by_name
                .entry(normalize_name(&e.name))
                .or_default()
                .push(i);
        }

        let mut transit_index = HashMap::new();
        for (i, t) in parts.transit_links.iter().enumerate() {
            let line = i as u64 + 2;
            if !(t.distance >= 0.0 && t.distance.is_finite()) {
                return Err(schema(
                    TRANSIT_FILE,
                    line,
                    "distance_m",
                    "distance must be a finite non-negative number",
                ));
            }
            let k = key(&t.poi_name, &t.poi_city);
            match poi_index.get(&k).map(Vec::len) {
                None => {
                    return Err(dangling(
                        format!("transit link for {}", t.poi_name),
                        &t.poi_city,
                    ))
                }
                Some(1) => {}
                Some(_) => {
                    return Err(schema(
                        TRANSIT_FILE,
                        line,
                        "poi_name",
                        format!("`{}` matches more than one kind of place", t.poi_name),
                    ))
                }
            }
            if transit_index.insert(k, i).is_some() {
                return Err(schema(
                    TRANSIT_FILE,
                    line,
                    "poi_name",
                    format!("second link for `{}`", t.poi_name),
                ));
            }
        }

        for (i, d) in parts.distances.iter().enumerate() {
            let line = i as u64 + 2;
            if !(d.distance >= 0.0 && d.distance.is_finite()) {
                return Err(schema(
                    DISTANCES_FILE,
                    line,
                    "distance_m",
                    "distance must be a finite non-negative number",
                ));
            }
            if !(d.travel_time >= 0.0 && d.travel_time.is_finite()) {
                return Err(schema(
                    DISTANCES_FILE,
                    line,
                    "travel_time_min",
                    "travel time must be a finite non-negative number",
                ));
            }
            if !has_city(&d.city) {
                return Err(dangling(
                    format!("distance {} -> {}", d.from_poi, d.to_poi),
                    &d.city,
                ));
            }
        }

        Ok(Self {
            parts,
            city_index,
            poi_index,
            poi_by_name,
            flight_index,
            event_index,
            event_by_name,
            transit_index,
        })
    }

    pub fn parts(&self) -> &SandboxParts {
        &self.parts
    }

    pub fn cities(&self) -> &[City] {
        &self.parts.cities
    }
    pub fn flights(&self) -> &[Flight] {
        &self.parts.flights
    }
    pub fn restaurants(&self) -> &[Restaurant] {
        &self.parts.restaurants
    }
    pub fn attractions(&self) -> &[Attraction] {
        &self.parts.attractions
    }
    pub fn accommodations(&self) -> &[Accommodation] {
        &self.parts.accommodations
    }
    pub fn events(&self) -> &[Event] {
        &self.parts.events
    }
    pub fn transit_links(&self) -> &[TransitLink] {
        &self.parts.transit_links
    }
    pub fn distances(&self) -> &[DistanceRecord] {
        &self.parts.distances
    }

    pub fn counts(&self) -> SandboxCounts {
        SandboxCounts {
            cities: self.parts.cities.len(),
            flights: self.parts.flights.len(),
            restaurants: self.parts.restaurants.len(),
            attractions: self.parts.attractions.len(),
            accommodations: self.parts.accommodations.len(),
            events: self.parts.events.len(),
            transit_links: self.parts.transit_links.len(),
            distances: self.parts.distances.len(),
        }
    }

    pub fn city(&self, name: &str) -> Option<&City> {
        self.city_index
            .get(&normalize_name(name))
            .map(|&i| &self.parts.cities[i])
    }

    /// Cities whose state matches `state`, in file order.
    pub fn cities_in_state<'a>(&'a self, state: &str) -> impl Iterator<Item = &'a City> + 'a {
        let state = normalize_name(state);
        self.parts
            .cities
            .iter()
            .filter(move |c| normalize_name(&c.state) == state)
    }

    fn record(&self, id: PoiId) -> PoiRecord<'_> {
        match id {
            PoiId::Restaurant(i) => PoiRecord::Restaurant(&self.parts.restaurants[i]),
            PoiId::Attraction(i) => PoiRecord::Attraction(&self.parts.attractions[i]),
            PoiId::Accommodation(i) => PoiRecord::Accommodation(&self.parts.accommodations[i]),
        }
    }

    /// Resolves a place by name within one city.
    pub fn lookup_poi(&self, name: &str, city: &str) -> Result<PoiRecord<'_>, LookupError> {
        match self.poi_index.get(&key(name, city)).map(Vec::as_slice) {
            Some([id]) => Ok(self.record(*id)),
            Some([_, _, ..]) => Err(LookupError::Ambiguous {
                name: name.to_string(),
                city: city.to_string(),
            }),
            _ => Err(LookupError::NotFound {
                name: name.to_string(),
                city: city.to_string(),
            }),
        }
    }

    /// Resolves a place of a known kind, which disambiguates a name shared
    /// across collections.
    pub fn lookup_kind(&self, name: &str, city: &str, kind: PoiKind) -> Option<PoiRecord<'_>> {
        self.poi_index
            .get(&key(name, city))?
            .iter()
            .map(|&id| self.record(id))
            .find(|r| r.kind() == kind)
    }

    pub fn restaurant(&self, name: &str, city: &str) -> Option<&Restaurant> {
        match self.lookup_kind(name, city, PoiKind::Restaurant)? {
            PoiRecord::Restaurant(r) => Some(r),
            _ => None,
        }
    }

    pub fn attraction(&self, name: &str, city: &str) -> Option<&Attraction> {
        match self.lookup_kind(name, city, PoiKind::Attraction)? {
            PoiRecord::Attraction(a) => Some(a),
            _ => None,
        }
    }

    pub fn accommodation(&self, name: &str, city: &str) -> Option<&Accommodation> {
        match self.lookup_kind(name, city, PoiKind::Accommodation)? {
            PoiRecord::Accommodation(a) => Some(a),
            _ => None,
        }
    }

    /// Every place with this name, in any city.
    pub fn lookup_any_city(&self, name: &str) -> Vec<PoiRecord<'_>> {
        self.poi_by_name
            .get(&normalize_name(name))
            .map(|ids| ids.iter().map(|&id| self.record(id)).collect())
            .unwrap_or_default()
    }

    pub fn transit_for(&self, name: &str, city: &str) -> Result<&TransitLink, LookupError> {
        let record = self.lookup_poi(name, city)?;
        self.transit_index
            .get(&key(record.name(), record.city()))
            .map(|&i| &self.parts.transit_links[i])
            .ok_or_else(|| LookupError::NoTransitData {
                name: name.to_string(),
                city: city.to_string(),
            })
    }

    /// All scheduled instances of a flight number.
    pub fn flights_by_number(&self, number: &str) -> Vec<&Flight> {
        self.flight_index
            .get(&normalize_name(number))
            .map(|ids| ids.iter().map(|&i| &self.parts.flights[i]).collect())
            .unwrap_or_default()
    }

    pub fn event(&self, name: &str, city: &str) -> Option<&Event> {
        self.event_index
            .get(&key(name, city))
            .map(|&i| &self.parts.events[i])
    }

    pub fn events_by_name(&self, name: &str) -> Vec<&Event> {
        self.event_by_name
            .get(&normalize_name(name))
            .map(|ids| ids.iter().map(|&i| &self.parts.events[i]).collect())
            .unwrap_or_default()
    }

    /// Writes the eight-table layout that [`load_sandbox`] reads.
    pub fn write_dir(&self, root: &Path) -> Result<(), SandboxError> {
        std::fs::create_dir_all(root).map_err(|source| SandboxError::Io {
            file: root.display().to_string(),
            source,
        })?;
        let p = &self.parts;
        write_table(
            root,
            CITIES_FILE,
            &["name", "state"],
            p.cities
                .iter()
                .map(|c| vec![c.name.clone(), c.state.clone()]),
        )?;
        write_table(
            root,
            FLIGHTS_FILE,
            &[
                "flight_number",
                "origin",
                "dest",
                "date",
                "departure",
                "arrival",
                "price",
            ],
            p.flights.iter().map(|f| {
                vec![
                    f.flight_number.clone(),
                    f.origin_city.clone(),
                    f.dest_city.clone(),
                    f.date.to_string(),
                    f.departure.to_string(),
                    f.arrival.to_string(),
                    f.price.to_string(),
                ]
            }),
        )?;
        write_table(
            root,
            RESTAURANTS_FILE,
            &["name", "city", "cuisines", "avg_cost"],
            p.restaurants.iter().map(|r| {
                vec![
                    r.name.clone(),
                    r.city.clone(),
                    join_labels(r.cuisines.iter().map(|c| c.label())),
                    r.avg_cost.to_string(),
                ]
            }),
        )?;
        write_table(
            root,
            ATTRACTIONS_FILE,
            &["name", "city", "categories", "visit_duration"],
            p.attractions.iter().map(|a| {
                vec![
                    a.name.clone(),
                    a.city.clone(),
                    join_labels(a.categories.iter().map(|c| c.label())),
                    a.visit_duration.to_string(),
                ]
            }),
        )?;
        write_table(
            root,
            ACCOMMODATIONS_FILE,
            &[
                "name",
                "city",
                "room_type",
                "house_rules",
                "price_per_night",
                "max_occupancy",
            ],
            p.accommodations.iter().map(|a| {
                vec![
                    a.name.clone(),
                    a.city.clone(),
                    a.room_type.label().to_string(),
                    join_labels(a.house_rules.iter().map(|r| r.label())),
                    a.price_per_night.to_string(),
                    a.max_occupancy.map(|o| o.to_string()).unwrap_or_default(),
                ]
            }),
        )?;
        write_table(
            root,
            EVENTS_FILE,
            &["name", "city", "date", "event_type"],
            p.events.iter().map(|e| {
                vec![
                    e.name.clone(),
                    e.city.clone(),
                    e.date.to_string(),
                    e.event_type.label().to_string(),
                ]
            }),
        )?;
        write_table(
            root,
            TRANSIT_FILE,
            &["poi_name", "city", "stop_name", "distance_m"],
            p.transit_links.iter().map(|t| {
                vec![
                    t.poi_name.clone(),
                    t.poi_city.clone(),
                    t.stop_name.clone(),
                    t.distance.to_string(),
                ]
            }),
        )?;
        write_table(
            root,
            DISTANCES_FILE,
            &["from", "to", "city", "distance_m", "travel_time_min"],
            p.distances.iter().map(|d| {
                vec![
                    d.from_poi.clone(),
                    d.to_poi.clone(),
                    d.city.clone(),
                    d.distance.to_string(),
                    d.travel_time.to_string(),
                ]
            }),
        )?;
        Ok(())
    }
}

fn join_labels<'a>(labels: impl Iterator<Item = &'a str>) -> String {
    labels.collect::<Vec<_>>().join("|")
}

fn write_table(
    root: &Path,
    file: &str,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), SandboxError> {
    let io = |e: csv::Error| SandboxError::Io {
        file: file.to_string(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(root.join(file)).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|source| SandboxError::Io {
        file: file.to_string(),
        source,
    })
}

/// One parsed CSV file with named-column access.
struct Table {
    file: &'static str,
    columns: HashMap<String, usize>,
    rows: Vec<(u64, StringRecord)>,
}

impl Table {
    fn read(root: &Path, file: &'static str, required: &[&str]) -> Result<Self, SandboxError> {
        let path = root.join(file);
        let handle = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(SandboxError::MissingFile(file.to_string()))
            }
            Err(source) => {
                return Err(SandboxError::Io {
                    file: file.to_string(),
                    source,
                })
            }
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(handle);
        let csv_err = |e: csv::Error| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            schema(file, line, "-", e.to_string())
        };
        let headers = reader.headers().map_err(csv_err)?.clone();
        let columns: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_lowercase(), i))
            .collect();
        for col in required {
            if !columns.contains_key(*col) {
                return Err(schema(file, 1, col, "missing column in header"));
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, record));
        }
        Ok(Self {
            file,
            columns,
            rows,
        })
    }

    fn get<'r>(
        &self,
        row: &'r StringRecord,
        line: u64,
        column: &str,
    ) -> Result<&'r str, SandboxError> {
        self.opt(row, column)
            .ok_or_else(|| schema(self.file, line, column, "missing value"))
    }

    fn opt<'r>(&self, row: &'r StringRecord, column: &str) -> Option<&'r str> {
        self.columns
            .get(column)
            .and_then(|&i| row.get(i))
            .filter(|s| !s.is_empty())
    }

    fn text(&self, row: &StringRecord, line: u64, column: &str) -> Result<String, SandboxError> {
        self.get(row, line, column).map(str::to_string)
    }

    fn number(&self, row: &StringRecord, line: u64, column: &str) -> Result<f64, SandboxError> {
        let raw = self.get(row, line, column)?;
        raw.parse::<f64>()
            .map_err(|_| schema(self.file, line, column, format!("`{raw}` is not a number")))
    }

    fn parse<T: std::str::FromStr>(
        &self,
        row: &StringRecord,
        line: u64,
        column: &str,
    ) -> Result<T, SandboxError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.get(row, line, column)?;
        raw.parse::<T>()
            .map_err(|e| schema(self.file, line, column, e.to_string()))
    }

    fn labels<T: std::str::FromStr + Ord>(
        &self,
        row: &StringRecord,
        line: u64,
        column: &str,
    ) -> Result<BTreeSet<T>, SandboxError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.opt(row, column).unwrap_or("");
        raw.split('|')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| schema(self.file, line, column, e.to_string()))
            })
            .collect()
    }
}

/// Loads and indexes the eight-table sandbox under `root`.
pub fn load_sandbox(root: &Path) -> Result<Sandbox, SandboxError> {
    let mut parts = SandboxParts::default();

    let t = Table::read(root, CITIES_FILE, &["name", "state"])?;
    for (line, row) in &t.rows {
        parts.cities.push(City {
            name: t.text(row, *line, "name")?,
            state: t.text(row, *line, "state")?,
        });
    }

    let t = Table::read(
        root,
        FLIGHTS_FILE,
        &[
            "flight_number",
            "origin",
            "dest",
            "date",
            "departure",
            "arrival",
            "price",
        ],
    )?;
    for (line, row) in &t.rows {
        let line = *line;
        parts.flights.push(Flight {
            flight_number: t.text(row, line, "flight_number")?,
            origin_city: t.text(row, line, "origin")?,
            dest_city: t.text(row, line, "dest")?,
            date: t.parse(row, line, "date")?,
            departure: t.parse(row, line, "departure")?,
            arrival: t.parse(row, line, "arrival")?,
            price: t.number(row, line, "price")?,
        });
    }

    let t = Table::read(
        root,
        RESTAURANTS_FILE,
        &["name", "city", "cuisines", "avg_cost"],
    )?;
    for (line, row) in &t.rows {
        let line = *line;
        parts.restaurants.push(Restaurant {
            name: t.text(row, line, "name")?,
            city: t.text(row, line, "city")?,
            cuisines: t.labels(row, line, "cuisines")?,
            avg_cost: t.number(row, line, "avg_cost")?,
        });
    }

    let t = Table::read(root, ATTRACTIONS_FILE, &["name", "city", "categories"])?;
    for (line, row) in &t.rows {
        let line = *line;
        let categories: BTreeSet<Category> = t.labels(row, line, "categories")?;
        let mean = mean_category_duration(&categories);
        let visit_duration = match t.opt(row, "visit_duration") {
            Some(_) => t.number(row, line, "visit_duration")?,
            None => mean,
        };
        parts.attractions.push(Attraction {
            name: t.text(row, line, "name")?,
            city: t.text(row, line, "city")?,
            categories,
            visit_duration,
        });
    }

    let t = Table::read(
        root,
        ACCOMMODATIONS_FILE,
        &[
            "name",
            "city",
            "room_type",
            "house_rules",
            "price_per_night",
        ],
    )?;
    for (line, row) in &t.rows {
        let line = *line;
        let max_occupancy = match t.opt(row, "max_occupancy") {
            Some(_) => Some(t.parse::<u32>(row, line, "max_occupancy")?),
            None => None,
        };
        parts.accommodations.push(Accommodation {
            name: t.text(row, line, "name")?,
            city: t.text(row, line, "city")?,
            room_type: t.parse(row, line, "room_type")?,
            house_rules: t.labels(row, line, "house_rules")?,
            price_per_night: t.number(row, line, "price_per_night")?,
            max_occupancy,
        });
    }

    let t = Table::read(root, EVENTS_FILE, &["name", "city", "date", "event_type"])?;
    for (line, row) in &t.rows {
        let line = *line;
        parts.events.push(Event {
            name: t.text(row, line, "name")?,
            city: t.text(row, line, "city")?,
            date: t.parse(row, line, "date")?,
            event_type: t.parse(row, line, "event_type")?,
        });
    }

    let t = Table::read(
        root,
        TRANSIT_FILE,
        &["poi_name", "city", "stop_name", "distance_m"],
    )?;
    for (line, row) in &t.rows {
        let line = *line;
        parts.transit_links.push(TransitLink {
            poi_name: t.text(row, line, "poi_name")?,
            poi_city: t.text(row, line, "city")?,
            stop_name: t.text(row, line, "stop_name")?,
            distance: t.number(row, line, "distance_m")?,
        });
    }

    let t = Table::read(
        root,
        DISTANCES_FILE,
        &["from", "to", "city", "distance_m", "travel_time_min"],
    )?;
    for (line, row) in &t.rows {
        let line = *line;
        parts.distances.push(DistanceRecord {
            from_poi: t.text(row, line, "from")?,
            to_poi: t.text(row, line, "to")?,
            city: t.text(row, line, "city")?,
            distance: t.number(row, line, "distance_m")?,
            travel_time: t.number(row, line, "travel_time_min")?,
        });
    }

    Sandbox::from_parts(parts)
}
