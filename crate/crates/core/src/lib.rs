//! Constraint checking and continuous scoring for multi-day travel itineraries.

pub mod constraints;
pub mod datagen;
pub mod embedding;
pub mod metrics;
pub mod params;
pub mod plan;
pub mod report;
pub mod sandbox;
pub mod time;
pub mod vocab;
