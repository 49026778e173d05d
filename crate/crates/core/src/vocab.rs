//! Closed vocabularies shared by the sandbox, queries and checkers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownLabel {
    pub kind: &'static str,
    pub value: String,
}

fn canon(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

macro_rules! labelled_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl FromStr for $name {
            type Err = UnknownLabel;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let key = canon(s);
                $(if key == canon($label) {
                    return Ok($name::$variant);
                })+
                Err(UnknownLabel { kind: $kind, value: s.to_string() })
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.label())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

labelled_enum!(
    /// Attraction categories with a reference visiting duration each.
    Category, "attraction category" {
        BoatToursWaterSports => "Boat Tours & Water Sports",
        CasinosGambling => "Casinos & Gambling",
        ClassesWorkshops => "Classes & Workshops",
        ConcertsShows => "Concerts & Shows",
        FoodDrink => "Food & Drink",
        FunGames => "Fun & Games",
        Museums => "Museums",
        NatureParks => "Nature & Parks",
        Nightlife => "Nightlife",
        OutdoorActivities => "Outdoor Activities",
        Shopping => "Shopping",
        SightsLandmarks => "Sights & Landmarks",
        SpasWellness => "Spas & Wellness",
        WaterAmusementParks => "Water & Amusement Parks",
        ZoosAquariums => "Zoos & Aquariums",
    }
);

impl Category {
    /// Reference visiting duration in hours.
    pub fn duration_hours(self) -> f64 {
        match self {
            Category::BoatToursWaterSports => 3.5,
            Category::CasinosGambling => 2.5,
            Category::ClassesWorkshops => 1.5,
            Category::ConcertsShows => 2.5,
            Category::FoodDrink => 2.5,
            Category::FunGames => 1.5,
            Category::Museums => 3.0,
            Category::NatureParks => 4.5,
            Category::Nightlife => 2.5,
            Category::OutdoorActivities => 4.0,
            Category::Shopping => 1.5,
            Category::SightsLandmarks => 3.0,
            Category::SpasWellness => 2.0,
            Category::WaterAmusementParks => 5.0,
            Category::ZoosAquariums => 2.5,
        }
    }
}

labelled_enum!(
    Cuisine, "cuisine" {
        Chinese => "Chinese",
        American => "American",
        Italian => "Italian",
        Mexican => "Mexican",
        Indian => "Indian",
        Mediterranean => "Mediterranean",
        French => "French",
        Other => "Other",
    }
);

labelled_enum!(
    /// Restrictions an accommodation can impose on its guests.
    HouseRule, "house rule" {
        NoParties => "No parties",
        NoSmoking => "No smoking",
        NoChildrenUnder10 => "No children under 10",
        NoPets => "No pets",
        NoVisitors => "No visitors",
    }
);

impl HouseRule {
    /// Parses either the restriction ("No pets") or the activity a query asks
    /// to be allowed ("pets").
    pub fn from_activity(s: &str) -> Result<Self, UnknownLabel> {
        let key = canon(s);
        let key = key.strip_prefix("no ").unwrap_or(&key);
        format!("No {key}").parse().map_err(|_| UnknownLabel {
            kind: "house rule",
            value: s.to_string(),
        })
    }
}

labelled_enum!(
    RoomType, "room type" {
        EntireRoom => "entire room",
        PrivateRoom => "private room",
        SharedRoom => "shared room",
    }
);

labelled_enum!(
    EventType, "event type" {
        Sports => "Sports",
        ArtsTheatre => "Arts & Theatre",
        Music => "Music",
        Film => "Film",
    }
);

labelled_enum!(
    TravelerType, "traveler type" {
        Laidback => "Laidback Traveler",
        Adventure => "Adventure Seeker",
    }
);

labelled_enum!(
    Meal, "meal" {
        Breakfast => "breakfast",
        Lunch => "lunch",
        Dinner => "dinner",
    }
);
