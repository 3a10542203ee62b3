use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DomainError;

/// One of the six hedge events over a three-way outcome partition.
///
/// The singular events are mutually exclusive and exhaustive; each composite
/// event is the union of two singulars and therefore the complement of the
/// third.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Low,
    Medium,
    High,
    LowMedium,
    LowHigh,
    MediumHigh,
}

impl Event {
    pub const ALL: [Event; 6] = [
        Event::Low,
        Event::Medium,
        Event::High,
        Event::LowMedium,
        Event::LowHigh,
        Event::MediumHigh,
    ];
    pub const SINGULAR: [Event; 3] = [Event::Low, Event::Medium, Event::High];
    pub const COMPOSITE: [Event; 3] = [Event::LowMedium, Event::LowHigh, Event::MediumHigh];

    pub fn index(self) -> usize {
        match self {
            Event::Low => 0,
            Event::Medium => 1,
            Event::High => 2,
            Event::LowMedium => 3,
            Event::LowHigh => 4,
            Event::MediumHigh => 5,
        }
    }

    pub fn is_singular(self) -> bool {
        self.index() < 3
    }

    pub fn complement(self) -> Event {
        match self {
            Event::Low => Event::MediumHigh,
            Event::Medium => Event::LowHigh,
            Event::High => Event::LowMedium,
            Event::LowMedium => Event::High,
            Event::LowHigh => Event::Medium,
            Event::MediumHigh => Event::Low,
        }
    }

    /// Indices (0 = low, 1 = medium, 2 = high) of the singular events this event covers.
    pub fn members(self) -> &'static [usize] {
        match self {
            Event::Low => &[0],
            Event::Medium => &[1],
            Event::High => &[2],
            Event::LowMedium => &[0, 1],
            Event::LowHigh => &[0, 2],
            Event::MediumHigh => &[1, 2],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Event::Low => "low",
            Event::Medium => "medium",
            Event::High => "high",
            Event::LowMedium => "low_medium",
            Event::LowHigh => "low_high",
            Event::MediumHigh => "medium_high",
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Event {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Event::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| DomainError::UnknownEvent(s.to_string()))
    }
}

/// Three-way partition of the outcome line by two cutoffs.
///
/// `low = (-inf, c0)`, `medium = [c0, c1]`, `high = (c1, inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventPartition {
    cutoffs: [f64; 2],
}

impl Default for EventPartition {
    fn default() -> Self {
        Self { cutoffs: [950.0, 1100.0] }
    }
}

impl EventPartition {
    pub fn new(lower: f64, upper: f64) -> Result<Self, DomainError> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(DomainError::InvalidCutoffs { lower, upper });
        }
        Ok(Self { cutoffs: [lower, upper] })
    }

    pub fn cutoffs(&self) -> [f64; 2] {
        self.cutoffs
    }

    /// Which singular event an outcome value falls into.
    pub fn singular_of(&self, outcome: f64) -> Event {
        if outcome < self.cutoffs[0] {
            Event::Low
        } else if outcome <= self.cutoffs[1] {
            Event::Medium
        } else {
            Event::High
        }
    }

    pub fn contains(&self, event: Event, outcome: f64) -> bool {
        event.members().contains(&self.singular_of(outcome).index())
    }

    /// Respondent-facing wording for a bet on `event`.
    pub fn describe(&self, event: Event) -> String {
        let [lo, hi] = self.cutoffs;
        match event {
            Event::Low => format!("the investment is worth less than {lo} after six months"),
            Event::Medium => {
                format!("the investment is worth between {lo} and {hi} after six months")
            }
            Event::High => format!("the investment is worth more than {hi} after six months"),
            Event::LowMedium => format!("the investment is worth at most {hi} after six months"),
            Event::LowHigh => format!(
                "the investment is worth less than {lo} or more than {hi} after six months"
            ),
            Event::MediumHigh => format!("the investment is worth at least {lo} after six months"),
        }
    }
}

/// A value per hedge event; entries may be missing until filled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventMap<T> {
    slots: [Option<T>; 6],
}

impl<T> Default for EventMap<T> {
    fn default() -> Self {
        Self { slots: [None, None, None, None, None, None] }
    }
}

impl<T: Copy> EventMap<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_fn(mut f: impl FnMut(Event) -> T) -> Self {
        let mut map = Self::default();
        for e in Event::ALL {
            map.insert(e, f(e));
        }
        map
    }

    /// Builds a full map from singular values (low, medium, high) and the
    /// values of their complements in the same order (not-low, not-medium,
    /// not-high).
    pub fn from_parts(singular: [T; 3], complements: [T; 3]) -> Self {
        let mut map = Self::default();
        for ((e, v), c) in Event::SINGULAR.into_iter().zip(singular).zip(complements) {
            map.insert(e, v);
            map.insert(e.complement(), c);
        }
        map
    }

    pub fn insert(&mut self, event: Event, value: T) {
        self.slots[event.index()] = Some(value);
    }

    pub fn get(&self, event: Event) -> Option<T> {
        self.slots[event.index()]
    }

    pub fn require(&self, event: Event) -> Result<T, DomainError> {
        self.get(event).ok_or(DomainError::MissingEvent(event))
    }

    pub fn is_complete(&self) -> bool {
        self.slots.iter().all(Option::is_some)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Event, T)> + '_ {
        Event::ALL.into_iter().filter_map(|e| self.get(e).map(|v| (e, v)))
    }

    pub fn map<U: Copy>(&self, mut f: impl FnMut(T) -> U) -> EventMap<U> {
        EventMap { slots: self.slots.map(|s| s.map(&mut f)) }
    }
}

impl<T: Copy> FromIterator<(Event, T)> for EventMap<T> {
    fn from_iter<I: IntoIterator<Item = (Event, T)>>(iter: I) -> Self {
        let mut map = Self::default();
        for (e, v) in iter {
            map.insert(e, v);
        }
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complements_are_involutive_and_disjoint() {
        for e in Event::ALL {
            assert_eq!(e.complement().complement(), e);
            assert_ne!(e.is_singular(), e.complement().is_singular());
            let mut covered: Vec<usize> =
                e.members().iter().chain(e.complement().members()).copied().collect();
            covered.sort_unstable();
            assert_eq!(covered, vec![0, 1, 2]);
        }
    }

    #[test]
    fn partition_boundaries() {
        let part = EventPartition::default();
        assert_eq!(part.singular_of(949.99), Event::Low);
        assert_eq!(part.singular_of(950.0), Event::Medium);
        assert_eq!(part.singular_of(1100.0), Event::Medium);
        assert_eq!(part.singular_of(1100.01), Event::High);
        assert!(part.contains(Event::LowMedium, 1100.0));
        assert!(!part.contains(Event::LowMedium, 1200.0));
        assert!(EventPartition::new(1100.0, 950.0).is_err());
        assert!(EventPartition::new(1000.0, 1000.0).is_err());
    }

    #[test]
    fn event_names_round_trip() {
        for e in Event::ALL {
            assert_eq!(e.as_str().parse::<Event>().unwrap(), e);
        }
        assert!("sideways".parse::<Event>().is_err());
    }
}
