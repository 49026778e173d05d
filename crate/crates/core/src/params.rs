//! Metric parameters per trip-duration class, and estimators that refit them
//! from annotated plans.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{AttractionDaySample, MealObservation};
use crate::plan::ItineraryPlan;
use crate::vocab::{Category, Meal, TravelerType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DurationClass {
    #[serde(rename = "3-day")]
    ThreeDay,
    #[serde(rename = "5-day")]
    FiveDay,
    #[serde(rename = "7-day")]
    SevenDay,
}

impl DurationClass {
    pub const ALL: [DurationClass; 3] = [
        DurationClass::ThreeDay,
        DurationClass::FiveDay,
        DurationClass::SevenDay,
    ];

    pub fn from_days(days: usize) -> Option<Self> {
        match days {
            3 => Some(DurationClass::ThreeDay),
            5 => Some(DurationClass::FiveDay),
            7 => Some(DurationClass::SevenDay),
            _ => None,
        }
    }

    pub fn days(self) -> usize {
        match self {
            DurationClass::ThreeDay => 3,
            DurationClass::FiveDay => 5,
            DurationClass::SevenDay => 7,
        }
    }

    /// Destination cities a trip of this length covers.
    pub fn visiting_cities(self) -> usize {
        match self {
            DurationClass::ThreeDay => 1,
            DurationClass::FiveDay => 2,
            DurationClass::SevenDay => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DurationClass::ThreeDay => "3-day",
            DurationClass::FiveDay => "5-day",
            DurationClass::SevenDay => "7-day",
        }
    }
}

impl fmt::Display for DurationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Bivariate normal over (midpoint time, duration) for one meal, in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealDist {
    pub mean_time: f64,
    pub mean_duration: f64,
    pub std_time: f64,
    pub std_duration: f64,
    pub beta: f64,
}

impl MealDist {
    pub const fn new(
        mean_time: f64,
        mean_duration: f64,
        std_time: f64,
        std_duration: f64,
        beta: f64,
    ) -> Self {
        Self {
            mean_time,
            mean_duration,
            std_time,
            std_duration,
            beta,
        }
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.std_time > 0.0 && self.std_duration > 0.0 && self.beta.abs() < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealParams {
    pub breakfast: MealDist,
    pub lunch: MealDist,
    pub dinner: MealDist,
}

impl MealParams {
    pub fn get(&self, meal: Meal) -> &MealDist {
        match meal {
            Meal::Breakfast => &self.breakfast,
            Meal::Lunch => &self.lunch,
            Meal::Dinner => &self.dinner,
        }
    }

    pub fn get_mut(&mut self, meal: Meal) -> &mut MealDist {
        match meal {
            Meal::Breakfast => &mut self.breakfast,
            Meal::Lunch => &mut self.lunch,
            Meal::Dinner => &mut self.dinner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractionParams {
    /// Expected attractions per day for a laid-back traveler.
    pub lambda_laidback: f64,
    pub lambda_adventurous: f64,
    /// Spread of visit durations around the adjusted expectation, hours.
    pub sigma_d: f64,
    pub n_max: u32,
    pub n_min: u32,
    /// Hours the expected visit shrinks per extra attraction that day.
    pub k: f64,
}

impl AttractionParams {
    pub fn lambda(&self, traveler: TravelerType) -> f64 {
        match traveler {
            TravelerType::Laidback => self.lambda_laidback,
            TravelerType::Adventure => self.lambda_adventurous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub duration_class: DurationClass,
    pub meals: MealParams,
    pub attractions: AttractionParams,
    /// Category label -> reference duration in hours.
    pub category_durations: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid parameters for {class}: {message}")]
    Invalid {
        class: DurationClass,
        message: String,
    },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

impl ParamSet {
    /// Reference duration of a category.
    pub fn category_duration(&self, category: Category) -> Option<f64> {
        self.category_durations.get(category.label()).copied()
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let bad = |message: String| {
            Err(ParamError::Invalid {
                class: self.duration_class,
                message,
            })
        };
        for meal in Meal::ALL {
            let d = self.meals.get(*meal);
            if !d.is_nondegenerate() {
                return bad(format!("{meal} needs positive spreads and |beta| < 1"));
            }
        }
        let a = &self.attractions;
        if !(a.lambda_laidback > 0.0 && a.lambda_adventurous > 0.0) {
            return bad("attraction rates must be positive".into());
        }
        if !(a.sigma_d > 0.0) {
            return bad("sigma_d must be positive".into());
        }
        if a.n_min > a.n_max {
            return bad("n_min exceeds n_max".into());
        }
        if !(a.k >= 0.0) {
            return bad("k must be non-negative".into());
        }
        for c in Category::ALL {
            if self.category_duration(*c).is_none() {
                return bad(format!("no duration for category `{c}`"));
            }
        }
        Ok(())
    }
}

pub fn builtin_category_durations() -> BTreeMap<String, f64> {
    Category::ALL
        .iter()
        .map(|c| (c.label().to_string(), c.duration_hours()))
        .collect()
}

/// Published parameters for one duration class.
pub fn builtin_params(class: DurationClass) -> ParamSet {
    let (meals, attractions) = match class {
        DurationClass::ThreeDay => (
            MealParams {
                breakfast: MealDist::new(9.63, 0.90, 1.08, 0.24, 0.21),
                lunch: MealDist::new(14.30, 1.11, 1.03, 0.36, 0.10),
                dinner: MealDist::new(20.75, 1.19, 1.25, 0.43, -0.20),
            },
            AttractionParams {
                lambda_laidback: 1.10,
                lambda_adventurous: 2.01,
                sigma_d: 1.11,
                n_max: 5,
                n_min: 0,
                k: 0.28,
            },
        ),
        DurationClass::FiveDay => (
            MealParams {
                breakfast: MealDist::new(9.80, 1.08, 1.08, 1.43, 0.63),
                lunch: MealDist::new(14.46, 1.10, 1.07, 0.35, 0.04),
                dinner: MealDist::new(20.67, 1.32, 1.37, 0.91, -0.18),
            },
            AttractionParams {
                lambda_laidback: 1.26,
                lambda_adventurous: 1.61,
                sigma_d: 1.07,
                n_max: 4,
                n_min: 0,
                k: 0.28,
            },
        ),
        DurationClass::SevenDay => (
            MealParams {
                breakfast: MealDist::new(9.84, 0.85, 1.34, 0.23, 0.03),
                lunch: MealDist::new(14.44, 0.99, 1.07, 0.26, 0.30),
                dinner: MealDist::new(20.42, 1.15, 1.66, 1.15, -0.07),
            },
            AttractionParams {
                lambda_laidback: 1.11,
                lambda_adventurous: 1.82,
                sigma_d: 0.90,
                n_max: 4,
                n_min: 0,
                k: 0.28,
            },
        ),
    };
    ParamSet {
        duration_class: class,
        meals,
        attractions,
        category_durations: builtin_category_durations(),
    }
}

/// A parameter document: one [`ParamSet`] per duration class present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamFile(pub BTreeMap<DurationClass, ParamSet>);

impl ParamFile {
    pub fn builtin() -> Self {
        Self(
            DurationClass::ALL
                .iter()
                .map(|c| (*c, builtin_params(*c)))
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self, ParamError> {
        let io = |message: String| ParamError::Io {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        let file: ParamFile = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
        for (class, set) in &file.0 {
            if *class != set.duration_class {
                return Err(ParamError::Invalid {
                    class: *class,
                    message: "entry filed under the wrong class".into(),
                });
            }
            set.validate()?;
        }
        Ok(file)
    }

    /// The set for `class`, falling back to the built-in values.
    pub fn get(&self, class: DurationClass) -> ParamSet {
        self.0
            .get(&class)
            .cloned()
            .unwrap_or_else(|| builtin_params(class))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("params serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EstimateError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

fn insufficient(msg: impl Into<String>) -> EstimateError {
    EstimateError::InsufficientData(msg.into())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (N-1) sample standard deviation around `m`.
fn sample_std(xs: &[f64], m: f64) -> f64 {
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Fits one meal distribution from observations.
///
/// Input order does not matter: observations are sorted before summation so
/// the result is bit-identical under permutation.
pub fn estimate_meal_dist(observations: &[MealObservation]) -> Result<MealDist, EstimateError> {
    if observations.len() < 2 {
        return Err(insufficient(format!(
            "{} meal observation(s), need at least 2",
            observations.len()
        )));
    }
    let mut pairs: Vec<(f64, f64)> = observations.iter().map(|o| (o.t_m, o.d_m)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let times: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let durations: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (mt, md) = (mean(&times), mean(&durations));
    let (st, sd) = (sample_std(&times, mt), sample_std(&durations, md));
    if st == 0.0 && sd == 0.0 {
        return Err(insufficient("all meal observations identical"));
    }
    let beta = if st > 0.0 && sd > 0.0 {
        let cov =
            pairs.iter().map(|(t, d)| (t - mt) * (d - md)).sum::<f64>() / (pairs.len() - 1) as f64;
        (cov / (st * sd)).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Ok(MealDist {
        mean_time: mt,
        mean_duration: md,
        std_time: st,
        std_duration: sd,
        beta,
    })
}

/// Fits `meal` separately for each duration class present in `plans`.
///
/// Plans whose length is not 3, 5 or 7 days are ignored.
pub fn estimate_meal_params(
    plans: &[ItineraryPlan],
    meal: Meal,
) -> BTreeMap<DurationClass, Result<MealDist, EstimateError>> {
    let mut by_class: BTreeMap<DurationClass, Vec<MealObservation>> = BTreeMap::new();
    for plan in plans {
        let Some(class) = DurationClass::from_days(plan.days.len()) else {
            continue;
        };
        let obs = crate::metrics::meal_observations(plan);
        by_class
            .entry(class)
            .or_default()
            .extend(obs.into_iter().filter(|o| o.meal == meal));
    }
    by_class
        .into_iter()
        .map(|(class, obs)| (class, estimate_meal_dist(&obs)))
        .collect()
}

/// Fits attraction parameters from per-day samples.
///
/// - rates: mean daily attraction count per traveler type (days with no
///   attractions count as zero);
/// - `sigma_d`: sample standard deviation of (observed duration - category
///   mean), pooled over all visits;
/// - `n_min`/`n_max`: observed extremes of the daily count;
/// - `k`: magnitude of the least-squares slope of a day's mean duration
///   residual on its attraction count, with a separate intercept per
///   traveler type.
pub fn estimate_attraction_params(
    days: &[AttractionDaySample],
) -> Result<AttractionParams, EstimateError> {
    let mut days: Vec<&AttractionDaySample> = days.iter().collect();
    let mut residuals: Vec<f64> = days
        .iter()
        .flat_map(|d| d.visits.iter().map(|(dur, mu)| dur - mu))
        .collect();
    residuals.sort_by(f64::total_cmp);
    if residuals.len() < 2 {
        return Err(insufficient(format!(
            "{} attraction visit(s), need at least 2",
            residuals.len()
        )));
    }
    let sigma_d = sample_std(&residuals, mean(&residuals));
    if sigma_d == 0.0 {
        return Err(insufficient("every visit lasted exactly its category mean"));
    }

    let day_residual = |d: &AttractionDaySample| -> f64 {
        let mut r: Vec<f64> = d.visits.iter().map(|(dur, mu)| dur - mu).collect();
        r.sort_by(f64::total_cmp);
        mean(&r)
    };
    days.sort_by(|a, b| {
        a.traveler
            .cmp(&b.traveler)
            .then(a.visits.len().cmp(&b.visits.len()))
            .then_with(|| {
                if a.visits.is_empty() || b.visits.is_empty() {
                    std::cmp::Ordering::Equal
                } else {
                    day_residual(a).total_cmp(&day_residual(b))
                }
            })
    });

    let mut lambdas = [0.0; 2];
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (slot, traveler) in [TravelerType::Laidback, TravelerType::Adventure]
        .into_iter()
        .enumerate()
    {
        let group: Vec<&&AttractionDaySample> =
            days.iter().filter(|d| d.traveler == traveler).collect();
        if group.is_empty() {
            return Err(insufficient(format!("no days for {traveler}")));
        }
        let counts: Vec<f64> = group.iter().map(|d| d.visits.len() as f64).collect();
        lambdas[slot] = mean(&counts);

        let visited: Vec<(f64, f64)> = group
            .iter()
            .filter(|d| !d.visits.is_empty())
            .map(|d| (d.visits.len() as f64, day_residual(d)))
            .collect();
        if visited.is_empty() {
            continue;
        }
        let xs: Vec<f64> = visited.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = visited.iter().map(|p| p.1).collect();
        let (mx, my) = (mean(&xs), mean(&ys));
        sxx += xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        sxy += visited
            .iter()
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>();
    }
    if sxx == 0.0 {
        return Err(insufficient(
            "daily attraction counts never vary, slope undefined",
        ));
    }
    let counts = days.iter().map(|d| d.visits.len() as u32);
    let n_max = counts.clone().max().unwrap_or(0);
    let n_min = counts.min().unwrap_or(0);

    Ok(AttractionParams {
        lambda_laidback: lambdas[0],
        lambda_adventurous: lambdas[1],
        sigma_d,
        n_max,
        n_min,
        k: (sxy / sxx).abs(),
    })
}
