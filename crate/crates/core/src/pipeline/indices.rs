use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::history::Window;
use super::PipelineError;
use crate::domain::RespondentId;

/// Weight of the qualitative component in the risk index.
pub const RISK_QUALITATIVE_WEIGHT: f64 = 0.53;

/// Reversed optimism items after fillers are dropped.
pub const DEFAULT_OPTIMISM_REVERSED: [bool; 6] = [false, true, false, true, true, false];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    /// General willingness to take risks, 0–10.
    RiskQualitative,
    /// Certainty equivalent of one of five lotteries.
    #[serde(rename = "risk_ce")]
    RiskCertaintyEquivalent,
    /// One of six scored optimism items, 1–5.
    Optimism,
    /// Correct answers in a numeracy block.
    NumeracyFinancial,
    NumeracyProbabilistic,
    NumeracyBasic,
}

impl Instrument {
    pub const ALL: [Instrument; 6] = [
        Instrument::RiskQualitative,
        Instrument::RiskCertaintyEquivalent,
        Instrument::Optimism,
        Instrument::NumeracyFinancial,
        Instrument::NumeracyProbabilistic,
        Instrument::NumeracyBasic,
    ];
    pub const NUMERACY: [Instrument; 3] =
        [Instrument::NumeracyFinancial, Instrument::NumeracyProbabilistic, Instrument::NumeracyBasic];

    pub fn as_str(self) -> &'static str {
        match self {
            Instrument::RiskQualitative => "risk_qualitative",
            Instrument::RiskCertaintyEquivalent => "risk_ce",
            Instrument::Optimism => "optimism",
            Instrument::NumeracyFinancial => "numeracy_financial",
            Instrument::NumeracyProbabilistic => "numeracy_probabilistic",
            Instrument::NumeracyBasic => "numeracy_basic",
        }
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Instrument {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Instrument::ALL
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| PipelineError::UnknownInstrument(s.to_string()))
    }
}

/// One answer in the long-format measurements file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub respondent: RespondentId,
    pub year: i32,
    pub instrument: Instrument,
    /// 1-based item number; unused for numeracy counts.
    pub item: u8,
    pub value: f64,
}

/// A composite index and whether any component was missing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexValue {
    pub value: f64,
    pub partial: bool,
}

/// Combines standardized, aversion-oriented risk components per year and
/// averages over years. A year with one component uses it alone.
pub fn combine_risk(years: &[(Option<f64>, Option<f64>)]) -> Result<IndexValue, PipelineError> {
    let mut partial = false;
    let per_year: Vec<f64> = years
        .iter()
        .filter_map(|&(qual, quant)| match (qual, quant) {
            (Some(q), Some(c)) => Some(RISK_QUALITATIVE_WEIGHT * q + (1.0 - RISK_QUALITATIVE_WEIGHT) * c),
            (Some(v), None) | (None, Some(v)) => {
                partial = true;
                Some(v)
            }
            (None, None) => None,
        })
        .collect();
    if per_year.is_empty() {
        return Err(PipelineError::MissingIndex("risk aversion"));
    }
    Ok(IndexValue { value: per_year.iter().sum::<f64>() / per_year.len() as f64, partial })
}

/// Mean of six 1–5 items with the flagged ones reversed as `6 − v`.
pub fn optimism_index(items: &[f64; 6], reversed: &[bool; 6]) -> Result<f64, PipelineError> {
    if let Some(v) = items.iter().find(|v| !(1.0..=5.0).contains(*v)) {
        return Err(PipelineError::OutOfRange { what: "optimism item", value: *v });
    }
    Ok(items.iter().zip(reversed).map(|(v, r)| if *r { 6.0 - v } else { *v }).sum::<f64>() / 6.0)
}

/// Equal-weight mean of the available standardized numeracy components.
pub fn combine_cognitive(components: [Option<f64>; 3]) -> Result<IndexValue, PipelineError> {
    let vals: Vec<f64> = components.iter().flatten().copied().collect();
    if vals.is_empty() {
        return Err(PipelineError::MissingIndex("cognitive skill"));
    }
    Ok(IndexValue { value: vals.iter().sum::<f64>() / vals.len() as f64, partial: vals.len() < 3 })
}

type ByYear = BTreeMap<(RespondentId, i32), f64>;

/// Z-scores each year's values with that year's reference respondents.
fn zscore_by_year(raw: &ByYear, reference: &BTreeSet<RespondentId>, what: &'static str) -> Result<ByYear, PipelineError> {
    let years: BTreeSet<i32> = raw.keys().map(|(_, y)| *y).collect();
    let mut out = ByYear::new();
    for year in years {
        let refs: Vec<f64> = raw
            .iter()
            .filter(|((r, y), _)| *y == year && reference.contains(r))
            .map(|(_, v)| *v)
            .collect();
        let n = refs.len() as f64;
        let mean = refs.iter().sum::<f64>() / n;
        let sd = (refs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(sd > 0.0) {
            return Err(PipelineError::DegenerateComponent { what, year });
        }
        for ((r, y), v) in raw.iter().filter(|((_, y), _)| *y == year) {
            out.insert((r.clone(), *y), (v - mean) / sd);
        }
    }
    Ok(out)
}

fn collect(measurements: &[Measurement], instrument: Instrument) -> BTreeMap<(RespondentId, i32), Vec<f64>> {
    let mut map: BTreeMap<_, Vec<f64>> = BTreeMap::new();
    for m in measurements.iter().filter(|m| m.instrument == instrument && m.value.is_finite()) {
        map.entry((m.respondent.clone(), m.year)).or_default().push(m.value);
    }
    map
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Risk-aversion index per respondent before final standardization.
///
/// Both components are sign-flipped so that higher means more averse: the
/// qualitative item asks for willingness to take risks and the quantitative
/// part is the mean certainty equivalent.
pub fn risk_indices(
    measurements: &[Measurement],
    reference: &BTreeSet<RespondentId>,
) -> Result<BTreeMap<RespondentId, IndexValue>, PipelineError> {
    let oriented = |inst| -> ByYear {
        collect(measurements, inst).into_iter().map(|(k, v)| (k, -mean(&v))).collect()
    };
    let qual = zscore_by_year(&oriented(Instrument::RiskQualitative), reference, "risk qualitative")?;
    let quant = zscore_by_year(&oriented(Instrument::RiskCertaintyEquivalent), reference, "risk certainty equivalents")?;
    let keys: BTreeSet<&(RespondentId, i32)> = qual.keys().chain(quant.keys()).collect();
    type Components = Vec<(Option<f64>, Option<f64>)>;
    let mut per_resp: BTreeMap<RespondentId, Components> = BTreeMap::new();
    for k in keys {
        per_resp.entry(k.0.clone()).or_default().push((qual.get(k).copied(), quant.get(k).copied()));
    }
    per_resp.into_iter().map(|(r, ys)| Ok((r, combine_risk(&ys)?))).collect()
}

/// Optimism from the first window year with all six items.
pub fn optimism_indices(
    measurements: &[Measurement],
    window: Window,
    reversed: &[bool; 6],
) -> Result<BTreeMap<RespondentId, f64>, PipelineError> {
    let mut items: BTreeMap<(RespondentId, i32), [Option<f64>; 6]> = BTreeMap::new();
    for m in measurements.iter().filter(|m| m.instrument == Instrument::Optimism && window.contains(m.year)) {
        if !(1..=6).contains(&m.item) {
            return Err(PipelineError::OutOfRange { what: "optimism item number", value: f64::from(m.item) });
        }
        items.entry((m.respondent.clone(), m.year)).or_default()[usize::from(m.item - 1)] = Some(m.value);
    }
    let mut out = BTreeMap::new();
    for ((r, _), slots) in items {
        if out.contains_key(&r) {
            continue;
        }
        if slots.iter().all(Option::is_some) {
            let vals = slots.map(|v| v.expect("checked"));
            out.insert(r, optimism_index(&vals, reversed)?);
        }
    }
    Ok(out)
}

/// Cognitive-skill index: each numeracy component standardized per year,
/// averaged over years, then averaged over the available components.
pub fn cognitive_indices(
    measurements: &[Measurement],
    reference: &BTreeSet<RespondentId>,
) -> Result<BTreeMap<RespondentId, IndexValue>, PipelineError> {
    let mut components: Vec<BTreeMap<RespondentId, f64>> = Vec::new();
    for inst in Instrument::NUMERACY {
        let raw: ByYear = collect(measurements, inst).into_iter().map(|(k, v)| (k, mean(&v))).collect();
        let z = zscore_by_year(&raw, reference, inst.as_str())?;
        let mut acc: BTreeMap<RespondentId, Vec<f64>> = BTreeMap::new();
        for ((r, _), v) in z {
            acc.entry(r).or_default().push(v);
        }
        components.push(acc.into_iter().map(|(r, v)| (r, mean(&v))).collect());
    }
    let respondents: BTreeSet<&RespondentId> = components.iter().flat_map(|c| c.keys()).collect();
    respondents
        .into_iter()
        .map(|r| {
            let parts = [0, 1, 2].map(|i| components[i].get(r).copied());
            Ok((r.clone(), combine_cognitive(parts)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_combination_examples() {
        assert_eq!(combine_risk(&[(Some(0.0), Some(0.0))]).unwrap().value, 0.0);
        assert!((combine_risk(&[(Some(1.0), Some(0.0))]).unwrap().value - 0.53).abs() < 1e-15);
        let one_year = combine_risk(&[(Some(0.4), Some(-0.2)), (None, None)]).unwrap();
        assert_eq!(one_year.value, 0.53 * 0.4 + 0.47 * -0.2);
        assert!(!one_year.partial);
        assert!(combine_risk(&[(None, None)]).is_err());
    }

    #[test]
    fn optimism_examples() {
        let last_three = [false, false, false, true, true, true];
        assert_eq!(optimism_index(&[3.0; 6], &DEFAULT_OPTIMISM_REVERSED).unwrap(), 3.0);
        assert_eq!(optimism_index(&[5.0, 5.0, 5.0, 1.0, 1.0, 1.0], &last_three).unwrap(), 5.0);
        assert_eq!(optimism_index(&[4.0, 4.0, 4.0, 2.0, 2.0, 2.0], &last_three).unwrap(), 4.0);
        assert!(optimism_index(&[0.0, 3.0, 3.0, 3.0, 3.0, 3.0], &last_three).is_err());
    }

    #[test]
    fn cognitive_examples() {
        assert_eq!(combine_cognitive([Some(0.0); 3]).unwrap().value, 0.0);
        assert_eq!(combine_cognitive([Some(3.0), Some(0.0), Some(0.0)]).unwrap().value, 1.0);
        let partial = combine_cognitive([Some(1.0), None, Some(0.0)]).unwrap();
        assert_eq!((partial.value, partial.partial), (0.5, true));
        assert!(combine_cognitive([None; 3]).is_err());
    }

    fn m(r: &str, year: i32, instrument: Instrument, item: u8, value: f64) -> Measurement {
        Measurement { respondent: r.into(), year, instrument, item, value }
    }

    #[test]
    fn population_risk_is_oriented_and_year_standardized() {
        let mut ms = Vec::new();
        for (r, qual, ce) in [("a", 8.0, 60.0), ("b", 2.0, 20.0), ("c", 5.0, 40.0)] {
            ms.push(m(r, 2018, Instrument::RiskQualitative, 1, qual));
            for item in 1..=5 {
                ms.push(m(r, 2018, Instrument::RiskCertaintyEquivalent, item, ce));
            }
        }
        let reference: BTreeSet<RespondentId> = ["a", "b", "c"].map(RespondentId::from).into();
        let idx = risk_indices(&ms, &reference).unwrap();
        // The risk-seeking respondent gets the lowest aversion.
        assert!(idx[&"a".into()].value < idx[&"c".into()].value);
        assert!(idx[&"c".into()].value.abs() < 1e-12);
        let total: f64 = idx.values().map(|v| v.value).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn optimism_uses_first_complete_window_year() {
        let mut ms = Vec::new();
        for item in 1..=6 {
            ms.push(m("a", 2016, Instrument::Optimism, item, 1.0));
            ms.push(m("a", 2019, Instrument::Optimism, item, 4.0));
            ms.push(m("a", 2020, Instrument::Optimism, item, 2.0));
        }
        let idx = optimism_indices(&ms, Window::default(), &[false; 6]).unwrap();
        assert_eq!(idx[&"a".into()], 4.0);
    }
}
