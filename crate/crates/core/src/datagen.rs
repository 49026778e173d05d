//! Seeded synthetic sandboxes, queries, reference plans and perturbations.
//!
//! Every draw comes from ChaCha8 seeded with the spec's seed; separate
//! streams keep the sandbox, each query and each perturbation independent.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{
    compute_cost, LocalConstraints, Persona, Query, RoomRequirement, TransportRule,
};
use crate::metrics::{adjusted_duration, AttractionDaySample, MealObservation};
use crate::params::{builtin_params, AttractionParams, DurationClass, MealDist, ParamSet};
use crate::plan::{
    serialize_plan, CurrentCity, DayRecord, FlightLeg, ItineraryPlan, PlaceRef, PoiVisit,
    TimeWindow, Transportation, Verb, VisitKind,
};
use crate::sandbox::{
    normalize_name, Accommodation, Attraction, City, DistanceRecord, Event, Flight, Restaurant,
    Sandbox, SandboxError, SandboxParts, TransitLink,
};
use crate::time::TimeOfDay;
use crate::vocab::{Category, Cuisine, EventType, HouseRule, Meal, RoomType, TravelerType};

/// Identifier of the generator algorithm, recorded next to generated files.
pub const RNG_ID: &str = "chacha8-rand_chacha-0.9";

const SANDBOX_STREAM: u64 = 0;
const QUERY_STREAM_BASE: u64 = 1 << 32;
const PERTURB_STREAM: u64 = 1 << 48;

const START_DATE: (i32, u32, u32) = (2024, 11, 1);
const CALENDAR_DAYS: u64 = 14;
const CITIES_PER_STATE: usize = 3;
const TRAVEL_GAP_MIN: u16 = 15;
/// Lowest nightly price of the one luxury listing per city.
const PREMIUM_FLOOR: f64 = 20_000.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub n_cities: usize,
    pub n_restaurants_per_city: usize,
    pub n_attractions_per_city: usize,
    pub n_accommodations_per_city: usize,
    pub n_events_per_city: usize,
    pub duration_class: DurationClass,
}

impl GenSpec {
    pub fn new(seed: u64, duration_class: DurationClass) -> Self {
        Self {
            seed,
            n_cities: 9,
            n_restaurants_per_city: 12,
            n_attractions_per_city: 15,
            n_accommodations_per_city: 4,
            n_events_per_city: 6,
            duration_class,
        }
    }

    pub fn validate(&self) -> Result<(), DatagenError> {
        let counts = [
            self.n_cities,
            self.n_restaurants_per_city,
            self.n_attractions_per_city,
            self.n_accommodations_per_city,
            self.n_events_per_city,
        ];
        if counts.contains(&0) {
            return Err(DatagenError::InvalidSpec(
                "every count must be at least 1".into(),
            ));
        }
        if self.n_cities > CITY_PREFIXES.len() * CITY_SUFFIXES.len() {
            return Err(DatagenError::InvalidSpec(format!(
                "at most {} cities",
                CITY_PREFIXES.len() * CITY_SUFFIXES.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatagenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("sandbox too small: {0}")]
    InsufficientSandbox(String),
    #[error("no feasible plan: {0}")]
    Infeasible(String),
    #[error("perturbation not applicable: {0}")]
    NotApplicable(String),
    #[error(transparent)]
    Sandbox(#[from] SandboxErrorText),
}

/// Sandbox errors carried as text so [`DatagenError`] stays `Eq`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct SandboxErrorText(pub String);

impl From<SandboxError> for DatagenError {
    fn from(e: SandboxError) -> Self {
        DatagenError::Sandbox(SandboxErrorText(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "amount", rename_all = "snake_case")]
pub enum PerturbationKind {
    MealShift(f64),
    TransitInflate(f64),
    OrderShuffle,
    DuplicateAttraction,
    BudgetBust(f64),
    DropAccommodation,
}

impl PerturbationKind {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbationKind::MealShift(_) => "meal_shift",
            PerturbationKind::TransitInflate(_) => "transit_inflate",
            PerturbationKind::OrderShuffle => "order_shuffle",
            PerturbationKind::DuplicateAttraction => "duplicate_attraction",
            PerturbationKind::BudgetBust(_) => "budget_bust",
            PerturbationKind::DropAccommodation => "drop_accommodation",
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(START_DATE.0, START_DATE.1, START_DATE.2).expect("valid start date")
}

fn cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

const CITY_PREFIXES: [&str; 12] = [
    "Ash", "Bel", "Cor", "Dun", "Elm", "Fair", "Glen", "High", "Iron", "Jade", "Kings", "Lark",
];
const CITY_SUFFIXES: [&str; 8] = [
    "ford", "haven", "ton", "field", "wood", "port", "bury", "vale",
];
const STATES: [&str; 12] = [
    "Northmark",
    "Southreach",
    "Eastshire",
    "Westmoor",
    "Midland",
    "Coastal Plains",
    "Highlands",
    "Lakeland",
    "Riverside",
    "Pinecrest",
    "Sunvale",
    "Stonegate",
];

/// Words that echo persona components; half of all names carry one.
const PERSONA_WORDS: [&str; 12] = [
    "Relaxing",
    "Adventure",
    "Cultural",
    "Nature",
    "Luxury",
    "Economical",
    "Beach",
    "Mountain",
    "City",
    "Forest",
    "Laidback",
    "Thrill",
];
const PLAIN_WORDS: [&str; 12] = [
    "Blue", "Corner", "Golden", "Maple", "Union", "Old Mill", "Red Door", "Silver", "Harbor",
    "Market", "Elm", "Copper",
];

const PURPOSES: [&str; 4] = ["Relaxation", "Adventure", "Cultural Exploration", "Nature"];
const SPENDING: [&str; 2] = ["Luxury Traveler", "Economical Traveler"];
const LOCATIONS: [&str; 4] = ["Beaches", "Mountains", "Cities", "Forests"];

fn restaurant_noun(c: Cuisine) -> &'static str {
    match c {
        Cuisine::Chinese => "Noodle House",
        Cuisine::American => "Diner",
        Cuisine::Italian => "Trattoria",
        Cuisine::Mexican => "Cantina",
        Cuisine::Indian => "Curry Kitchen",
        Cuisine::Mediterranean => "Taverna",
        Cuisine::French => "Bistro",
        Cuisine::Other => "Eatery",
    }
}

fn attraction_noun(c: Category) -> &'static str {
    match c {
        Category::BoatToursWaterSports => "Boat Tours",
        Category::CasinosGambling => "Casino",
        Category::ClassesWorkshops => "Workshop",
        Category::ConcertsShows => "Music Hall",
        Category::FoodDrink => "Tasting Room",
        Category::FunGames => "Arcade",
        Category::Museums => "Museum",
        Category::NatureParks => "Park",
        Category::Nightlife => "Lounge",
        Category::OutdoorActivities => "Trailhead",
        Category::Shopping => "Bazaar",
        Category::SightsLandmarks => "Monument",
        Category::SpasWellness => "Spa",
        Category::WaterAmusementParks => "Water Park",
        Category::ZoosAquariums => "Aquarium",
    }
}

const LODGING_NOUNS: [&str; 5] = ["Suite", "Loft", "Inn", "Cottage", "Studio"];

fn event_noun(t: EventType) -> &'static str {
    match t {
        EventType::Sports => "Derby",
        EventType::ArtsTheatre => "Stage Night",
        EventType::Music => "Concert",
        EventType::Film => "Screening",
    }
}

/// Picks a descriptive word: persona keyword for even `i`, plain otherwise.
fn descriptor(i: usize, rng: &mut ChaCha8Rng) -> &'static str {
    if i % 2 == 0 {
        PERSONA_WORDS.choose(rng).copied().expect("nonempty")
    } else {
        PLAIN_WORDS.choose(rng).copied().expect("nonempty")
    }
}

/// Makes `base` unique within `used` by appending a roman-ish counter.
fn unique(base: String, used: &mut HashSet<String>) -> String {
    let mut name = base.clone();
    let mut k = 2;
    while !used.insert(normalize_name(&name)) {
        name = format!("{base} {k}");
        k += 1;
    }
    name
}

pub fn city_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            format!(
                "{}{}",
                CITY_PREFIXES[i % CITY_PREFIXES.len()],
                CITY_SUFFIXES[(i / CITY_PREFIXES.len()) % CITY_SUFFIXES.len()]
            )
        })
        .collect()
}

fn state_name(i: usize) -> String {
    let base = STATES[i % STATES.len()];
    if i < STATES.len() {
        base.to_string()
    } else {
        format!("{base} {}", i / STATES.len() + 1)
    }
}

pub fn generate_sandbox(spec: &GenSpec) -> Result<Sandbox, DatagenError> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, SANDBOX_STREAM);
    let names = city_names(spec.n_cities);
    let cities: Vec<City> = names
        .iter()
        .enumerate()
        .map(|(i, name)| City {
            name: name.clone(),
            state: state_name(i / CITIES_PER_STATE),
        })
        .collect();

    let dates: Vec<NaiveDate> = (0..CALENDAR_DAYS)
        .map(|d| start_date() + Days::new(d))
        .collect();
    let mut flights = Vec::new();
    let mut counter = 0u32;
    for origin in &names {
        for dest in &names {
            if origin == dest {
                continue;
            }
            for date in &dates {
                for (dep_lo, dep_span, dur_lo, dur_span) in
                    [(330u16, 60u16, 60u16, 30u16), (1320, 60, 60, 60)]
                {
                    let dep = dep_lo + rng.random_range(0..dep_span);
                    let dur = dur_lo + rng.random_range(0..dur_span);
                    counter += 1;
                    flights.push(Flight {
                        flight_number: format!("F{:07}", counter),
                        origin_city: origin.clone(),
                        dest_city: dest.clone(),
                        date: *date,
                        departure: TimeOfDay::from_minutes(dep).expect("departure in range"),
                        arrival: TimeOfDay::from_minutes_wrapping(i64::from(dep + dur)),
                        price: rng.random_range(80..=400) as f64,
                    });
                }
            }
        }
    }

    let mut restaurants = Vec::new();
    let mut attractions = Vec::new();
    let mut accommodations = Vec::new();
    let mut events = Vec::new();
    let mut transit_links = Vec::new();
    let mut distances = Vec::new();
    let mut used = HashSet::new();
    let real_cuisines: Vec<Cuisine> = Cuisine::ALL
        .iter()
        .copied()
        .filter(|c| *c != Cuisine::Other)
        .collect();

    for (ci, city) in names.iter().enumerate() {
        let link = |name: &str, rng: &mut ChaCha8Rng, links: &mut Vec<TransitLink>| {
            links.push(TransitLink {
                poi_name: name.to_string(),
                poi_city: city.clone(),
                stop_name: format!(
                    "{} Stop {}",
                    PLAIN_WORDS.choose(rng).expect("nonempty"),
                    rng.random_range(1..100)
                ),
                distance: cents(rng.random_range(10.0..=2000.0)),
            });
        };

        for j in 0..spec.n_restaurants_per_city {
            let primary = real_cuisines[(j + ci) % real_cuisines.len()];
            let mut cuisines = BTreeSet::from([primary]);
            if rng.random_bool(0.3) {
                cuisines.insert(*real_cuisines.choose(&mut rng).expect("nonempty"));
            }
            let word = descriptor(j, &mut rng);
            let name = unique(
                format!("{city} {word} {}", restaurant_noun(primary)),
                &mut used,
            );
            link(&name, &mut rng, &mut transit_links);
            restaurants.push(Restaurant {
                name,
                city: city.clone(),
                cuisines,
                avg_cost: cents(rng.random_range(10.0..=60.0)),
            });
        }

        for j in 0..spec.n_attractions_per_city {
            let primary = Category::ALL[(j + ci) % Category::ALL.len()];
            let mut categories = BTreeSet::from([primary]);
            if rng.random_bool(0.3) {
                categories.insert(*Category::ALL.choose(&mut rng).expect("nonempty"));
            }
            let word = descriptor(j, &mut rng);
            let name = unique(
                format!("{city} {word} {}", attraction_noun(primary)),
                &mut used,
            );
            link(&name, &mut rng, &mut transit_links);
            attractions.push(Attraction::new(name, city.clone(), categories));
        }

        for j in 0..spec.n_accommodations_per_city {
            let word = descriptor(j, &mut rng);
            let noun = LODGING_NOUNS.choose(&mut rng).expect("nonempty");
            let name = unique(format!("{city} {word} {noun}"), &mut used);
            let house_rules: BTreeSet<HouseRule> = HouseRule::ALL
                .iter()
                .copied()
                .filter(|_| rng.random_bool(0.3))
                .collect();
            let max_occupancy = if rng.random_bool(0.2) {
                None
            } else {
                Some(rng.random_range(1..=4))
            };
            link(&name, &mut rng, &mut transit_links);
            accommodations.push(Accommodation {
                name,
                city: city.clone(),
                room_type: *RoomType::ALL.choose(&mut rng).expect("nonempty"),
                house_rules,
                price_per_night: cents(rng.random_range(60.0..=250.0)),
                max_occupancy,
            });
        }
        let name = unique(format!("{city} Luxury Penthouse"), &mut used);
        link(&name, &mut rng, &mut transit_links);
        accommodations.push(Accommodation {
            name,
            city: city.clone(),
            room_type: RoomType::EntireRoom,
            house_rules: BTreeSet::new(),
            price_per_night: cents(rng.random_range(PREMIUM_FLOOR..=PREMIUM_FLOOR * 1.5)),
            max_occupancy: None,
        });

        for j in 0..spec.n_events_per_city {
            let event_type = EventType::ALL[(j + ci) % EventType::ALL.len()];
            let word = descriptor(j, &mut rng);
            let name = unique(
                format!("{city} {word} {}", event_noun(event_type)),
                &mut used,
            );
            events.push(Event {
                name,
                city: city.clone(),
                date: *dates.choose(&mut rng).expect("nonempty"),
                event_type,
            });
        }

        let hotels: Vec<&Accommodation> =
            accommodations.iter().filter(|a| a.city == *city).collect();
        for a in attractions.iter().filter(|a| a.city == *city) {
            for h in &hotels {
                let d = cents(rng.random_range(200.0..=8000.0));
                distances.push(DistanceRecord {
                    from_poi: h.name.clone(),
                    to_poi: a.name.clone(),
                    city: city.clone(),
                    distance: d,
                    travel_time: cents(d / 250.0),
                });
            }
        }
    }

    Ok(Sandbox::from_parts(SandboxParts {
        cities,
        flights,
        restaurants,
        attractions,
        accommodations,
        events,
        transit_links,
        distances,
    })?)
}

/// Destination cities for a query, in sandbox order.
fn route_cities(query: &Query, sandbox: &Sandbox) -> Result<Vec<String>, DatagenError> {
    let org = normalize_name(&query.org);
    let cities: Vec<String> = if let Some(c) = sandbox.city(&query.dest) {
        vec![c.name.clone()]
    } else {
        sandbox
            .cities_in_state(&query.dest)
            .filter(|c| normalize_name(&c.name) != org)
            .map(|c| c.name.clone())
            .collect()
    };
    let need = query.visiting_city_number as usize;
    if cities.len() < need {
        return Err(DatagenError::Infeasible(format!(
            "{} has {} cities, need {need}",
            query.dest,
            cities.len()
        )));
    }
    Ok(cities.into_iter().take(need).collect())
}

fn meal_window(dist: &MealDist) -> TimeWindow {
    let start = ((dist.mean_time - dist.mean_duration / 2.0) * 60.0).round() as u16;
    let end = ((dist.mean_time + dist.mean_duration / 2.0) * 60.0).round() as u16;
    TimeWindow::same_day(
        TimeOfDay::from_minutes(start).expect("meal start"),
        TimeOfDay::from_minutes(end).expect("meal end"),
    )
    .expect("meal window nonempty")
}

fn t(minutes: u16) -> TimeOfDay {
    TimeOfDay::from_minutes(minutes).expect("time within the day")
}

#[derive(Clone, Copy)]
enum DayShape {
    /// Morning flight into a new city.
    Arrive,
    /// Whole day in one city.
    Stay,
    /// Evening flight home.
    Depart,
}

struct Picker<'a> {
    sandbox: &'a Sandbox,
    used: HashSet<String>,
}

impl<'a> Picker<'a> {
    fn key(name: &str, city: &str) -> String {
        format!("{}|{}", normalize_name(name), normalize_name(city))
    }

    fn restaurant(
        &mut self,
        city: &str,
        wanted: &mut Vec<Cuisine>,
    ) -> Result<&'a Restaurant, DatagenError> {
        let free: Vec<&'a Restaurant> = self
            .sandbox
            .restaurants()
            .iter()
            .filter(|r| r.city == city && !self.used.contains(&Self::key(&r.name, &r.city)))
            .collect();
        let pick = free
            .iter()
            .find(|r| wanted.iter().any(|c| r.cuisines.contains(c)))
            .or_else(|| free.first())
            .copied()
            .ok_or_else(|| DatagenError::Infeasible(format!("not enough restaurants in {city}")))?;
        wanted.retain(|c| !pick.cuisines.contains(c));
        self.used.insert(Self::key(&pick.name, &pick.city));
        Ok(pick)
    }

    fn attraction(
        &mut self,
        city: &str,
        fits: impl Fn(&Attraction) -> bool,
        wanted: &mut Vec<Category>,
    ) -> Option<&'a Attraction> {
        let free: Vec<&'a Attraction> = self
            .sandbox
            .attractions()
            .iter()
            .filter(|a| {
                a.city == city && !self.used.contains(&Self::key(&a.name, &a.city)) && fits(a)
            })
            .collect();
        let pick = free
            .iter()
            .find(|a| wanted.iter().any(|c| a.categories.contains(c)))
            .or_else(|| free.first())
            .copied()?;
        wanted.retain(|c| !pick.categories.contains(c));
        self.used.insert(Self::key(&pick.name, &pick.city));
        Some(pick)
    }
}

fn visit(
    sandbox: &Sandbox,
    name: &str,
    city: &str,
    kind: VisitKind,
    verb: Verb,
    window: TimeWindow,
) -> Result<PoiVisit, DatagenError> {
    let link = sandbox
        .transit_for(name, city)
        .map_err(|e| DatagenError::Infeasible(format!("no transit data: {e}")))?;
    Ok(PoiVisit {
        name: name.to_string(),
        kind,
        window,
        transit_stop: link.stop_name.clone(),
        transit_distance: link.distance,
        verb,
    })
}

fn find_flight<'s>(
    sandbox: &'s Sandbox,
    from: &str,
    to: &str,
    date: NaiveDate,
    evening: bool,
) -> Result<&'s Flight, DatagenError> {
    sandbox
        .flights()
        .iter()
        .filter(|f| f.origin_city == from && f.dest_city == to && f.date == date)
        .filter(|f| {
            let dep = f.departure.minutes();
            let arr = f.arrival.minutes();
            if evening {
                dep >= 22 * 60
            } else {
                (330..390).contains(&dep) && arr > dep && arr <= 8 * 60
            }
        })
        .min_by_key(|f| (f.departure, f.flight_number.clone()))
        .ok_or_else(|| {
            DatagenError::Infeasible(format!(
                "no {} flight {from} to {to} on {date}",
                if evening { "evening" } else { "morning" }
            ))
        })
}

/// Builds a reference plan that passes every check for `query`.
///
/// Meals sit at the parameter means; laid-back travelers see one attraction a
/// day and adventure seekers two, each lasting its adjusted expected time.
pub fn generate_gold_plan(
    query: &Query,
    persona: &Persona,
    sandbox: &Sandbox,
    params: &ParamSet,
) -> Result<ItineraryPlan, DatagenError> {
    let infeasible = |m: String| DatagenError::Infeasible(m);
    if query.local_constraints.transportation == Some(TransportRule::NoFlight) {
        return Err(infeasible("generator only plans flights".into()));
    }
    let n_days = query.days as usize;
    if query.dates.len() != n_days || n_days != 2 * query.visiting_city_number as usize + 1 {
        return Err(infeasible("day count does not fit the city count".into()));
    }
    let route = route_cities(query, sandbox)?;
    let lc = &query.local_constraints;

    // One accommodation per city: the cheapest that meets the query.
    let mut lodging: BTreeMap<&str, &Accommodation> = BTreeMap::new();
    for city in &route {
        let ok = |a: &&Accommodation| {
            a.city == *city
                && lc
                    .room_type
                    .is_none_or(|r: RoomRequirement| r.accepts(a.room_type))
                && lc.house_rule.is_none_or(|h| !a.house_rules.contains(&h))
        };
        let best = sandbox
            .accommodations()
            .iter()
            .filter(ok)
            .min_by(|a, b| {
                a.price_per_night
                    .total_cmp(&b.price_per_night)
                    .then_with(|| a.name.cmp(&b.name))
            })
            .ok_or_else(|| infeasible(format!("no acceptable accommodation in {city}")))?;
        lodging.insert(city.as_str(), best);
    }

    // Where each day is spent.
    let mut shapes = Vec::with_capacity(n_days);
    let mut day_city = Vec::with_capacity(n_days);
    let mut current_city = Vec::with_capacity(n_days);
    for k in 0..n_days {
        if k == 0 {
            shapes.push(DayShape::Arrive);
            day_city.push(route[0].clone());
            current_city.push(CurrentCity::Transition {
                from: query.org.clone(),
                to: route[0].clone(),
            });
        } else if k == n_days - 1 {
            let last = route.last().expect("nonempty route").clone();
            shapes.push(DayShape::Depart);
            current_city.push(CurrentCity::Transition {
                from: last.clone(),
                to: query.org.clone(),
            });
            day_city.push(last);
        } else if k % 2 == 1 {
            shapes.push(DayShape::Stay);
            day_city.push(route[(k - 1) / 2].clone());
            current_city.push(CurrentCity::Single(route[(k - 1) / 2].clone()));
        } else {
            let (from, to) = (route[k / 2 - 1].clone(), route[k / 2].clone());
            shapes.push(DayShape::Arrive);
            current_city.push(CurrentCity::Transition {
                from,
                to: to.clone(),
            });
            day_city.push(to);
        }
    }

    let class = query
        .duration_class()
        .ok_or_else(|| infeasible("unsupported trip length".into()))?;
    let _ = class;
    let windows: Vec<TimeWindow> = Meal::ALL
        .iter()
        .map(|m| meal_window(params.meals.get(*m)))
        .collect();
    let (bfast, lunch, dinner) = (windows[0], windows[1], windows[2]);
    if lunch.start.minutes() < bfast.end.minutes() + 2 * TRAVEL_GAP_MIN
        || dinner.start.minutes() < lunch.end.minutes() + 2 * TRAVEL_GAP_MIN
    {
        return Err(infeasible(
            "meal parameters leave no room between meals".into(),
        ));
    }
    let slot = |after: TimeWindow, before: TimeWindow| {
        (
            after.end.minutes() + TRAVEL_GAP_MIN,
            before.start.minutes() - TRAVEL_GAP_MIN,
        )
    };
    let (morning, afternoon) = (slot(bfast, lunch), slot(lunch, dinner));
    let per_day = match persona.traveler_type {
        TravelerType::Laidback => 1u32,
        TravelerType::Adventure => 2u32,
    };
    let expected = |a: &Attraction| -> u16 {
        let mean = a
            .categories
            .iter()
            .map(|c| params.category_duration(*c).unwrap_or(c.duration_hours()))
            .sum::<f64>()
            / a.categories.len() as f64;
        (adjusted_duration(mean, per_day, persona.traveler_type, &params.attractions) * 60.0)
            .round()
            .max(1.0) as u16
    };

    let mut picker = Picker {
        sandbox,
        used: HashSet::new(),
    };
    let mut cuisines_left = lc.cuisines.clone();
    let mut categories_left = lc.attraction_types.clone();
    let mut events_left = lc.event_types.clone();
    let mut days = Vec::with_capacity(n_days);
    let mut prev_acc: Option<&Accommodation> = None;

    for k in 0..n_days {
        let city = day_city[k].as_str();
        let date = query.dates[k];
        let shape = shapes[k];
        let acc = lodging[city];
        let mut poi = Vec::new();
        let mut transportation = None;

        match shape {
            DayShape::Arrive => {
                let from = current_city[k].start_city().to_string();
                let f = find_flight(sandbox, &from, city, date, false)?;
                transportation = Some(Transportation::Flight(FlightLeg {
                    number: f.flight_number.clone(),
                    origin: f.origin_city.clone(),
                    dest: f.dest_city.clone(),
                    departure: f.departure,
                    arrival: f.arrival,
                }));
                if let Some(prev) = prev_acc {
                    let w = TimeWindow::same_day(t(270), t(300)).expect("early window");
                    poi.push(visit(
                        sandbox,
                        &prev.name,
                        &prev.city,
                        VisitKind::Accommodation,
                        Verb::Stay,
                        w,
                    )?);
                }
                let check_in = f.arrival.minutes() + 30;
                let end = bfast.start.minutes() - TRAVEL_GAP_MIN;
                if end < check_in + 10 {
                    return Err(infeasible(format!(
                        "flight {} lands too late for breakfast",
                        f.flight_number
                    )));
                }
                poi.push(visit(
                    sandbox,
                    &acc.name,
                    &acc.city,
                    VisitKind::Accommodation,
                    Verb::Stay,
                    TimeWindow::same_day(t(check_in), t(end)).expect("check-in window"),
                )?);
            }
            DayShape::Stay | DayShape::Depart => {
                let stay = prev_acc.expect("a night precedes this day");
                let w = TimeWindow::same_day(t(7 * 60), t(8 * 60 + 30)).expect("morning window");
                poi.push(visit(
                    sandbox,
                    &stay.name,
                    &stay.city,
                    VisitKind::Accommodation,
                    Verb::Stay,
                    w,
                )?);
            }
        }

        let meals: Vec<&Restaurant> = (0..3)
            .map(|_| picker.restaurant(city, &mut cuisines_left))
            .collect::<Result<_, _>>()?;
        let mut attractions: Vec<&Attraction> = Vec::new();
        let mut attraction_visits: Vec<(usize, PoiVisit)> = Vec::new();
        let slots: Vec<(usize, (u16, u16))> = if per_day == 1 {
            vec![(1, afternoon)]
        } else {
            vec![(0, morning), (1, afternoon)]
        };
        for (after_meal, (lo, hi)) in slots {
            let a = picker
                .attraction(city, |a| lo + expected(a) <= hi, &mut categories_left)
                .ok_or_else(|| {
                    infeasible(format!(
                        "no attraction fits a {}-minute slot in {city}",
                        hi - lo
                    ))
                })?;
            let w = TimeWindow::same_day(t(lo), t(lo + expected(a))).expect("attraction window");
            attraction_visits.push((
                after_meal,
                visit(
                    sandbox,
                    &a.name,
                    &a.city,
                    VisitKind::Attraction,
                    Verb::Visit,
                    w,
                )?,
            ));
            attractions.push(a);
        }
        for (i, (r, w)) in meals.iter().zip(&windows).enumerate() {
            poi.push(visit(
                sandbox,
                &r.name,
                &r.city,
                VisitKind::Restaurant,
                Verb::Visit,
                *w,
            )?);
            for (_, v) in attraction_visits.iter().filter(|(m, _)| *m == i) {
                poi.push(v.clone());
            }
        }

        match shape {
            DayShape::Depart => {
                let f = find_flight(sandbox, city, &query.org, date, true)?;
                if dinner.end.minutes() + 30 > f.departure.minutes() {
                    return Err(infeasible(format!(
                        "flight {} leaves before dinner ends",
                        f.flight_number
                    )));
                }
                transportation = Some(Transportation::Flight(FlightLeg {
                    number: f.flight_number.clone(),
                    origin: f.origin_city.clone(),
                    dest: f.dest_city.clone(),
                    departure: f.departure,
                    arrival: f.arrival,
                }));
            }
            _ => {
                let next_is_flight = matches!(shapes.get(k + 1), Some(DayShape::Arrive));
                let wake = if next_is_flight { 270 } else { 7 * 60 };
                let w = TimeWindow::overnight(t(dinner.end.minutes() + 30), t(wake))
                    .expect("night window");
                poi.push(visit(
                    sandbox,
                    &acc.name,
                    &acc.city,
                    VisitKind::Accommodation,
                    Verb::Stay,
                    w,
                )?);
            }
        }

        let mut event = None;
        if !events_left.is_empty() {
            if let Some(e) = sandbox
                .events()
                .iter()
                .find(|e| e.city == city && e.date == date && events_left.contains(&e.event_type))
            {
                events_left.retain(|t| *t != e.event_type);
                event = Some(PlaceRef::new(e.name.clone(), Some(e.city.clone())));
            }
        }

        let place =
            |name: &str, city: &str| PlaceRef::new(name.to_string(), Some(city.to_string()));
        let is_last = k == n_days - 1;
        days.push(DayRecord {
            day_index: k as u32 + 1,
            current_city: current_city[k].clone(),
            transportation,
            breakfast: Some(place(&meals[0].name, &meals[0].city)),
            attractions: attractions
                .iter()
                .map(|a| place(&a.name, &a.city))
                .collect(),
            lunch: Some(place(&meals[1].name, &meals[1].city)),
            dinner: Some(place(&meals[2].name, &meals[2].city)),
            accommodation: (!is_last).then(|| place(&acc.name, &acc.city)),
            event,
            poi_list: poi,
        });
        prev_acc = Some(acc);
    }

    if let Some(c) = cuisines_left.first() {
        return Err(infeasible(format!("no {c} restaurant on the route")));
    }
    if let Some(c) = categories_left.first() {
        return Err(infeasible(format!("no {c} attraction fits the schedule")));
    }
    if let Some(e) = events_left.first() {
        return Err(infeasible(format!("no {e} event on the route's dates")));
    }
    let mut plan = ItineraryPlan {
        days,
        source_text: String::new(),
    };
    plan.source_text = serialize_plan(&plan);
    Ok(plan)
}

fn random_persona(rng: &mut ChaCha8Rng) -> Persona {
    Persona {
        traveler_type: *TravelerType::ALL.choose(rng).expect("nonempty"),
        purpose: PURPOSES.choose(rng).expect("nonempty").to_string(),
        spending: SPENDING.choose(rng).expect("nonempty").to_string(),
        location_pref: LOCATIONS.choose(rng).expect("nonempty").to_string(),
    }
}

fn random_constraints(rng: &mut ChaCha8Rng) -> LocalConstraints {
    let mut lc = LocalConstraints::default();
    if rng.random_bool(0.3) {
        lc.house_rule = Some(*HouseRule::ALL.choose(rng).expect("nonempty"));
    }
    if rng.random_bool(0.3) {
        let real: Vec<Cuisine> = Cuisine::ALL
            .iter()
            .copied()
            .filter(|c| *c != Cuisine::Other)
            .collect();
        lc.cuisines = {
            let k = 1 + usize::from(rng.random_bool(0.5));
            real.choose_multiple(rng, k)
        }
        .copied()
        .collect();
    }
    if rng.random_bool(0.3) {
        lc.room_type = Some(match rng.random_range(0..4) {
            0 => RoomRequirement::NotShared,
            i => RoomRequirement::Exactly(RoomType::ALL[i - 1]),
        });
    }
    if rng.random_bool(0.2) {
        lc.transportation = Some(TransportRule::NoSelfDriving);
    }
    if rng.random_bool(0.3) {
        lc.event_types = {
            let k = 1 + usize::from(rng.random_bool(0.5));
            EventType::ALL.choose_multiple(rng, k)
        }
        .copied()
        .collect();
    }
    if rng.random_bool(0.3) {
        lc.attraction_types = {
            let k = 1 + usize::from(rng.random_bool(0.5));
            Category::ALL.choose_multiple(rng, k)
        }
        .copied()
        .collect();
    }
    lc
}

/// Drops the first present constraint, most restrictive kinds first.
fn relax(lc: &mut LocalConstraints) -> bool {
    if !lc.event_types.is_empty() {
        lc.event_types.clear();
    } else if !lc.attraction_types.is_empty() {
        lc.attraction_types.clear();
    } else if !lc.cuisines.is_empty() {
        lc.cuisines.clear();
    } else if lc.room_type.is_some() {
        lc.room_type = None;
    } else if lc.house_rule.is_some() {
        lc.house_rule = None;
    } else {
        return false;
    }
    true
}

fn level(lc: &LocalConstraints) -> &'static str {
    let n = [
        lc.house_rule.is_some(),
        !lc.cuisines.is_empty(),
        lc.room_type.is_some(),
        lc.transportation.is_some(),
        !lc.event_types.is_empty(),
        !lc.attraction_types.is_empty(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    match n {
        0 => "easy",
        1 | 2 => "medium",
        _ => "hard",
    }
}

pub fn generate_query(spec: &GenSpec, sandbox: &Sandbox) -> Result<(Query, Persona), DatagenError> {
    generate_query_at(spec, sandbox, 0).map(|(q, p, _)| (q, p))
}

/// The `index`-th query of a spec, with its reference plan.
///
/// Constraints the sandbox cannot satisfy are relaxed one at a time; the
/// budget is 1.5x the reference plan's cost, rounded up to whole dollars.
pub fn generate_query_at(
    spec: &GenSpec,
    sandbox: &Sandbox,
    index: u64,
) -> Result<(Query, Persona, ItineraryPlan), DatagenError> {
    let mut rng = rng_for(spec.seed, QUERY_STREAM_BASE + index);
    let class = spec.duration_class;
    let v = class.visiting_cities();
    let cities = sandbox.cities();

    let mut states: Vec<&str> = cities.iter().map(|c| c.state.as_str()).collect();
    states.dedup();
    let (org, dest) = if v == 1 {
        if cities.len() < 2 {
            return Err(DatagenError::InsufficientSandbox(
                "need at least 2 cities".into(),
            ));
        }
        let org = cities.choose(&mut rng).expect("nonempty");
        let dest = cities
            .iter()
            .filter(|c| c.name != org.name)
            .collect::<Vec<_>>();
        (
            org.name.clone(),
            dest.choose(&mut rng).expect("nonempty").name.clone(),
        )
    } else {
        let eligible: Vec<&str> = states
            .iter()
            .copied()
            .filter(|s| sandbox.cities_in_state(s).count() >= v)
            .collect();
        let state = *eligible.choose(&mut rng).ok_or_else(|| {
            DatagenError::InsufficientSandbox(format!("no state with {v} cities"))
        })?;
        let outside: Vec<&City> = cities.iter().filter(|c| c.state != state).collect();
        let org = outside.choose(&mut rng).ok_or_else(|| {
            DatagenError::InsufficientSandbox("no origin outside the destination state".into())
        })?;
        (org.name.clone(), state.to_string())
    };

    let n = class.days();
    let first = rng.random_range(0..=(CALENDAR_DAYS as usize - n)) as u64;
    let dates: Vec<NaiveDate> = (0..n as u64)
        .map(|d| start_date() + Days::new(first + d))
        .collect();
    let persona = random_persona(&mut rng);
    let mut lc = random_constraints(&mut rng);
    let people_number = rng.random_range(1..=4);

    let params = builtin_params(class);
    loop {
        let mut query = Query {
            id: format!("{}-s{}-q{}", class, spec.seed, index),
            org: org.clone(),
            dest: dest.clone(),
            days: n as u32,
            visiting_city_number: v as u32,
            dates: dates.clone(),
            people_number,
            local_constraints: lc.clone(),
            budget: 0.0,
            level: Some(level(&lc).to_string()),
            persona: Some(persona.clone()),
        };
        match generate_gold_plan(&query, &persona, sandbox, &params) {
            Ok(plan) => {
                let cost = compute_cost(&plan, &query, sandbox)
                    .map_err(|e| DatagenError::Infeasible(e.to_string()))?;
                query.budget = (cost * 1.5).ceil();
                return Ok((query, persona, plan));
            }
            Err(DatagenError::Infeasible(why)) => {
                if !relax(&mut lc) {
                    return Err(DatagenError::InsufficientSandbox(why));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

fn eligible_interior(day: &DayRecord) -> Option<std::ops::Range<usize>> {
    let n = day.poi_list.len();
    let start = usize::from(day.poi_list.first()?.verb == Verb::Stay);
    let end = if n > 1 && day.poi_list[n - 1].verb == Verb::Stay {
        n - 1
    } else {
        n
    };
    (end >= start + 2).then_some(start..end)
}

/// A minimally edited copy of `plan` that degrades one targeted dimension.
///
/// Field-level edits (duplicate_attraction, budget_bust, drop_accommodation)
/// leave the visit list untouched so continuous scores do not move.
pub fn perturb_plan(
    plan: &ItineraryPlan,
    kind: PerturbationKind,
    seed: u64,
    sandbox: &Sandbox,
) -> Result<ItineraryPlan, DatagenError> {
    let mut rng = rng_for(seed, PERTURB_STREAM);
    let mut out = plan.clone();
    let na = |m: &str| DatagenError::NotApplicable(m.to_string());
    match kind {
        PerturbationKind::MealShift(hours) => {
            if !(hours.is_finite() && hours != 0.0) {
                return Err(na("shift must be a nonzero number of hours"));
            }
            let minutes = (hours * 60.0).round() as i64;
            let mut any = false;
            for day in &mut out.days {
                for i in day.meal_visit_indices().into_iter().flatten() {
                    day.poi_list[i].window = day.poi_list[i].window.shifted(minutes);
                    any = true;
                }
            }
            if !any {
                return Err(na("plan has no meal visits"));
            }
        }
        PerturbationKind::TransitInflate(factor) => {
            if !(factor > 1.0) {
                return Err(na("factor must exceed 1"));
            }
            if out.visits().all(|v| v.transit_distance == 0.0) {
                return Err(na("all transit distances are zero"));
            }
            for day in &mut out.days {
                for v in &mut day.poi_list {
                    v.transit_distance *= factor;
                }
            }
        }
        PerturbationKind::OrderShuffle => {
            let candidates: Vec<usize> = out
                .days
                .iter()
                .enumerate()
                .filter(|(_, d)| {
                    eligible_interior(d).is_some_and(|r| {
                        let names: HashSet<String> = d.poi_list[r]
                            .iter()
                            .map(|v| normalize_name(&v.name))
                            .collect();
                        names.len() >= 2
                    })
                })
                .map(|(i, _)| i)
                .collect();
            let &di = candidates
                .choose(&mut rng)
                .ok_or_else(|| na("no day has two distinct interior visits"))?;
            let day = &mut out.days[di];
            let range = eligible_interior(day).expect("candidate day");
            let before: Vec<String> = day.poi_list[range.clone()]
                .iter()
                .map(|v| normalize_name(&v.name))
                .collect();
            let len = range.len();
            let first = rng.random_range(1..len);
            for r in (first..len).chain(1..first) {
                let mut rotated = before.clone();
                rotated.rotate_left(r);
                if rotated != before {
                    day.poi_list[range.clone()].rotate_left(r);
                    break;
                }
            }
        }
        PerturbationKind::DuplicateAttraction => {
            let mut candidates = Vec::new();
            for (i, a) in out.days.iter().enumerate() {
                for place in &a.attractions {
                    for (j, b) in out.days.iter().enumerate().skip(i + 1) {
                        let city = place.city.as_deref().unwrap_or(a.current_city.end_city());
                        let here = b
                            .current_city
                            .cities()
                            .iter()
                            .any(|c| normalize_name(c) == normalize_name(city));
                        let already = b.attractions.iter().any(|p| p.matches(&place.name));
                        if here && !already {
                            candidates.push((j, place.clone()));
                        }
                    }
                }
            }
            let (j, place) = candidates
                .choose(&mut rng)
                .cloned()
                .ok_or_else(|| na("no later day in the same city"))?;
            out.days[j].attractions.push(place);
        }
        PerturbationKind::BudgetBust(factor) => {
            if !(factor > 1.0) {
                return Err(na("factor must exceed 1"));
            }
            let last = out.days.len().saturating_sub(1);
            let mut candidates = Vec::new();
            for (i, day) in out.days.iter().enumerate().take(last) {
                let Some(place) = &day.accommodation else {
                    continue;
                };
                let city = place
                    .city
                    .clone()
                    .unwrap_or_else(|| day.current_city.end_city().to_string());
                let Some(current) = sandbox.accommodation(&place.name, &city) else {
                    continue;
                };
                let pricier = sandbox
                    .accommodations()
                    .iter()
                    .filter(|a| {
                        normalize_name(&a.city) == normalize_name(&city)
                            && a.price_per_night >= factor * current.price_per_night
                    })
                    .min_by(|a, b| a.price_per_night.total_cmp(&b.price_per_night));
                if let Some(p) = pricier {
                    candidates.push((i, PlaceRef::new(p.name.clone(), Some(p.city.clone()))));
                }
            }
            let (i, place) = candidates
                .choose(&mut rng)
                .cloned()
                .ok_or_else(|| na("no accommodation priced that much higher"))?;
            out.days[i].accommodation = Some(place);
        }
        PerturbationKind::DropAccommodation => {
            let last = out.days.len().saturating_sub(1);
            let candidates: Vec<usize> = (0..last)
                .filter(|&i| out.days[i].accommodation.is_some())
                .collect();
            let &i = candidates
                .choose(&mut rng)
                .ok_or_else(|| na("no night with an accommodation"))?;
            out.days[i].accommodation = None;
        }
    }
    out.source_text = serialize_plan(&out);
    Ok(out)
}

/// Draws `n` meals from a bivariate normal.
pub fn sample_meals(dist: &MealDist, meal: Meal, n: usize, seed: u64) -> Vec<MealObservation> {
    let mut rng = rng_for(seed, PERTURB_STREAM + 1);
    let rho = dist.beta;
    let tail = (1.0 - rho * rho).sqrt();
    (0..n)
        .map(|_| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            MealObservation {
                meal,
                t_m: dist.mean_time + dist.std_time * z1,
                d_m: dist.mean_duration + dist.std_duration * (rho * z1 + tail * z2),
            }
        })
        .collect()
}

/// Draws `n_days` of attraction visits, alternating traveler types.
///
/// Daily counts are Poisson clipped to `[n_min, n_max]`; durations are the
/// adjusted expectation plus normal noise with spread `sigma_d`.
pub fn sample_attraction_days(
    params: &AttractionParams,
    n_days: usize,
    seed: u64,
) -> Vec<AttractionDaySample> {
    let mut rng = rng_for(seed, PERTURB_STREAM + 2);
    let poisson = |lambda: f64| Poisson::new(lambda).expect("positive rate");
    let dists = [
        (TravelerType::Laidback, poisson(params.lambda_laidback)),
        (TravelerType::Adventure, poisson(params.lambda_adventurous)),
    ];
    (0..n_days)
        .map(|i| {
            let (traveler, dist) = &dists[i % 2];
            let raw: f64 = dist.sample(&mut rng);
            let n = (raw as u32).clamp(params.n_min, params.n_max);
            let visits = (0..n)
                .map(|_| {
                    let mean = Category::ALL
                        .choose(&mut rng)
                        .expect("nonempty")
                        .duration_hours();
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    (
                        adjusted_duration(mean, n, *traveler, params) + params.sigma_d * noise,
                        mean,
                    )
                })
                .collect();
            AttractionDaySample {
                traveler: *traveler,
                visits,
            }
        })
        .collect()
}

/// A sandbox with generated queries and their reference plans.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub sandbox: Sandbox,
    pub items: Vec<(Query, Persona, ItineraryPlan)>,
}

/// One sandbox per spec seed with `count` queries for each duration class
/// listed.
pub fn generate_fixture(
    seed: u64,
    classes: &[DurationClass],
    count: usize,
) -> Result<Fixture, DatagenError> {
    let base = GenSpec::new(
        seed,
        classes.first().copied().unwrap_or(DurationClass::ThreeDay),
    );
    let sandbox = generate_sandbox(&base)?;
    let mut items = Vec::new();
    for class in classes {
        let spec = GenSpec {
            duration_class: *class,
            ..base.clone()
        };
        for i in 0..count {
            items.push(generate_query_at(&spec, &sandbox, i as u64)?);
        }
    }
    Ok(Fixture { sandbox, items })
}

#[derive(Debug, Error)]
pub enum FixtureWriteError {
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Writes `sandbox/`, `queries.jsonl`, `gold/<id>.txt` and `manifest.json`.
pub fn write_fixture(fixture: &Fixture, seed: u64, out: &Path) -> Result<(), FixtureWriteError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| FixtureWriteError::Io { path, source }
    };
    fixture.sandbox.write_dir(&out.join("sandbox"))?;
    let gold_dir = out.join("gold");
    std::fs::create_dir_all(&gold_dir).map_err(io(&gold_dir))?;
    let mut lines = String::new();
    for (query, _, plan) in &fixture.items {
        lines.push_str(&serde_json::to_string(query).expect("query serializes"));
        lines.push('\n');
        let path = gold_dir.join(format!("{}.txt", query.id));
        std::fs::write(&path, serialize_plan(plan)).map_err(io(&path))?;
    }
    let qpath = out.join("queries.jsonl");
    std::fs::write(&qpath, lines).map_err(io(&qpath))?;
    let manifest =
        serde_json::json!({ "rng": RNG_ID, "seed": seed, "queries": fixture.items.len() });
    let mpath = out.join("manifest.json");
    std::fs::write(
        &mpath,
        format!(
            "{}\n",
            serde_json::to_string_pretty(&manifest).expect("manifest serializes")
        ),
    )
    .map_err(io(&mpath))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandbox::mean_category_duration;

    #[test]
    fn same_spec_same_sandbox_bytes() {
        let spec = GenSpec::new(7, DurationClass::ThreeDay);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        generate_sandbox(&spec)
            .unwrap()
            .write_dir(a.path())
            .unwrap();
        generate_sandbox(&spec)
            .unwrap()
            .write_dir(b.path())
            .unwrap();
        for entry in std::fs::read_dir(a.path()).unwrap() {
            let name = entry.unwrap().file_name();
            assert_eq!(
                std::fs::read(a.path().join(&name)).unwrap(),
                std::fs::read(b.path().join(&name)).unwrap()
            );
        }
    }

    #[test]
    fn three_cities_give_six_ordered_pairs_per_date() {
        let spec = GenSpec {
            n_cities: 3,
            ..GenSpec::new(1, DurationClass::ThreeDay)
        };
        let sb = generate_sandbox(&spec).unwrap();
        let date = start_date();
        let pairs: HashSet<(String, String)> = sb
            .flights()
            .iter()
            .filter(|f| f.date == date)
            .map(|f| (f.origin_city.clone(), f.dest_city.clone()))
            .collect();
        assert_eq!(pairs.len(), 6);
    }

    #[test]
    fn inventory_covers_vocabularies() {
        let sb = generate_sandbox(&GenSpec::new(3, DurationClass::FiveDay)).unwrap();
        let cats: BTreeSet<Category> = sb
            .attractions()
            .iter()
            .flat_map(|a| a.categories.iter().copied())
            .collect();
        assert_eq!(cats.len(), 15);
        let cuisines: BTreeSet<Cuisine> = sb
            .restaurants()
            .iter()
            .flat_map(|r| r.cuisines.iter().copied())
            .collect();
        assert_eq!(cuisines.len(), 7);
        for a in sb.attractions() {
            assert!((a.visit_duration - mean_category_duration(&a.categories)).abs() < 1e-12);
        }
        for l in sb.transit_links() {
            assert!((10.0..=2000.0).contains(&l.distance));
        }
    }

    #[test]
    fn queries_follow_city_count_rule() {
        for (class, cities) in [
            (DurationClass::ThreeDay, 1),
            (DurationClass::FiveDay, 2),
            (DurationClass::SevenDay, 3),
        ] {
            let spec = GenSpec::new(11, class);
            let sb = generate_sandbox(&spec).unwrap();
            let (q, _) = generate_query(&spec, &sb).unwrap();
            assert_eq!(q.visiting_city_number, cities);
            q.validate().unwrap();
            let (q2, _) = generate_query(&spec, &sb).unwrap();
            assert_eq!(q, q2);
        }
    }

    #[test]
    fn laidback_gold_has_one_attraction_a_day() {
        let spec = GenSpec::new(5, DurationClass::FiveDay);
        let sb = generate_sandbox(&spec).unwrap();
        let (mut q, _, _) = generate_query_at(&spec, &sb, 0).unwrap();
        let persona = Persona {
            traveler_type: TravelerType::Laidback,
            ..q.persona.clone().unwrap()
        };
        q.persona = Some(persona.clone());
        let plan =
            generate_gold_plan(&q, &persona, &sb, &builtin_params(DurationClass::FiveDay)).unwrap();
        for day in &plan.days {
            assert_eq!(day.attractions.len(), 1);
        }
    }

    #[test]
    fn sampled_meals_have_requested_moments() {
        let d = builtin_params(DurationClass::ThreeDay).meals.breakfast;
        let obs = sample_meals(&d, Meal::Breakfast, 20_000, 9);
        let mean = obs.iter().map(|o| o.t_m).sum::<f64>() / obs.len() as f64;
        assert!((mean - d.mean_time).abs() < 0.05);
    }

    #[test]
    fn not_applicable_cases() {
        let spec = GenSpec::new(2, DurationClass::ThreeDay);
        let sb = generate_sandbox(&spec).unwrap();
        let (_, _, plan) = generate_query_at(&spec, &sb, 0).unwrap();
        assert!(matches!(
            perturb_plan(&plan, PerturbationKind::TransitInflate(0.5), 1, &sb),
            Err(DatagenError::NotApplicable(_))
        ));
        let empty = ItineraryPlan {
            days: Vec::new(),
            source_text: String::new(),
        };
        assert!(matches!(
            perturb_plan(&empty, PerturbationKind::OrderShuffle, 1, &sb),
            Err(DatagenError::NotApplicable(_))
        ));
    }
}
