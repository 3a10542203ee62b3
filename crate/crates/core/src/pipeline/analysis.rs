use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::history::{
    classify_occupation, growth_flags, latest_spell, on_call_or_temp, ClassificationMode, EmploymentHistoryRow,
    Occupation, Spell, Window,
};
use super::indices::{cognitive_indices, optimism_indices, risk_indices, Measurement, DEFAULT_OPTIMISM_REVERSED};
use super::PipelineError;
use crate::domain::RespondentId;
use crate::econometrics::{correlation_matrix, standardize, Correlation, EconError, Frame, RegressionSpec, SdConvention};

/// Regressors in the order they appear in fits and tables.
pub const REGRESSORS: [&str; 11] = [
    "aversion",
    "sensitivity",
    "risk_aversion",
    "optimism",
    "cognitive",
    "upper_secondary",
    "tertiary",
    "age",
    "female",
    "married",
    "children",
];

pub const BINARY_REGRESSORS: [&str; 4] = ["upper_secondary", "tertiary", "female", "married"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Education {
    #[default]
    BelowUpperSecondary,
    UpperSecondary,
    Tertiary,
}

impl FromStr for Education {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "below_upper_secondary" => Ok(Education::BelowUpperSecondary),
            "upper_secondary" => Ok(Education::UpperSecondary),
            "tertiary" => Ok(Education::Tertiary),
            other => Err(PipelineError::UnknownEducation(other.to_string())),
        }
    }
}

/// Time-invariant respondent characteristics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub respondent: RespondentId,
    pub age: u32,
    pub female: bool,
    pub married: bool,
    pub children: u32,
    pub education: Education,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StudyInputs {
    pub history: Vec<EmploymentHistoryRow>,
    pub covariates: Vec<Covariates>,
    pub measurements: Vec<Measurement>,
    /// Estimated (aversion, sensitivity) per respondent.
    pub attitudes: BTreeMap<RespondentId, (f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub mode: ClassificationMode,
    pub window: Window,
    pub optimism_reversed: [bool; 6],
    pub sd_convention: SdConvention,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            mode: ClassificationMode::default(),
            window: Window::default(),
            optimism_reversed: DEFAULT_OPTIMISM_REVERSED,
            sd_convention: SdConvention::default(),
        }
    }
}

/// One respondent in the analysis sample. Attitude and index columns are
/// standardized on the extended sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub respondent: RespondentId,
    pub occupation: Occupation,
    /// Classification under the extended mode, which defines the reference sample.
    pub extended_occupation: Occupation,
    pub aversion: Option<f64>,
    pub sensitivity: Option<f64>,
    pub risk_aversion: Option<f64>,
    pub optimism: Option<f64>,
    pub cognitive: Option<f64>,
    /// A composite index was built from a subset of its components.
    pub partial_index: bool,
    pub education: Education,
    pub age: f64,
    pub female: bool,
    pub married: bool,
    pub children: u32,
    pub employment_growth: Option<bool>,
    /// Supervises at least one person in some window year.
    pub employer: bool,
    pub on_call_temp: bool,
    pub necessity: bool,
    pub spell: Option<Spell>,
}

impl AnalysisRow {
    pub fn included(&self) -> bool {
        self.occupation != Occupation::Excluded
    }

    /// Value of a named variable; `None` when missing or unknown.
    pub fn variable(&self, name: &str) -> Option<f64> {
        let flag = |b: bool| Some(if b { 1.0 } else { 0.0 });
        match name {
            "aversion" => self.aversion,
            "sensitivity" => self.sensitivity,
            "risk_aversion" => self.risk_aversion,
            "optimism" => self.optimism,
            "cognitive" => self.cognitive,
            "upper_secondary" => flag(self.education == Education::UpperSecondary),
            "tertiary" => flag(self.education == Education::Tertiary),
            "age" => Some(self.age),
            "female" => flag(self.female),
            "married" => flag(self.married),
            "children" => Some(f64::from(self.children)),
            _ => None,
        }
    }
}

fn group_history(history: &[EmploymentHistoryRow]) -> BTreeMap<RespondentId, Vec<EmploymentHistoryRow>> {
    let mut map: BTreeMap<RespondentId, Vec<EmploymentHistoryRow>> = BTreeMap::new();
    for r in history {
        map.entry(r.respondent.clone()).or_default().push(r.clone());
    }
    map
}

/// Builds one row per respondent with both a history and covariates.
pub fn build_analysis(inputs: &StudyInputs, cfg: &AnalysisConfig) -> Result<Vec<AnalysisRow>, PipelineError> {
    let histories = group_history(&inputs.history);
    let covariates: BTreeMap<&RespondentId, &Covariates> =
        inputs.covariates.iter().map(|c| (&c.respondent, c)).collect();

    let mut extended = BTreeMap::new();
    for (id, h) in &histories {
        extended.insert(id, classify_occupation(h, ClassificationMode::Extended, cfg.window)?);
    }
    let reference: BTreeSet<RespondentId> =
        extended.iter().filter(|(_, o)| **o != Occupation::Excluded).map(|(id, _)| (*id).clone()).collect();

    let risk = risk_indices(&inputs.measurements, &reference)?;
    let cognitive = cognitive_indices(&inputs.measurements, &reference)?;
    let optimism = optimism_indices(&inputs.measurements, cfg.window, &cfg.optimism_reversed)?;

    let mut rows = Vec::new();
    for (id, h) in &histories {
        let Some(cov) = covariates.get(id) else { continue };
        let occupation = classify_occupation(h, cfg.mode, cfg.window)?;
        let growth = growth_flags(h, cfg.window);
        let spell = occupation.is_entrepreneur().then(|| latest_spell(h, occupation)).flatten();
        let attitudes = inputs.attitudes.get(id);
        let r = risk.get(id);
        let c = cognitive.get(id);
        rows.push(AnalysisRow {
            respondent: id.clone(),
            occupation,
            extended_occupation: extended[id],
            aversion: attitudes.map(|a| a.0),
            sensitivity: attitudes.map(|a| a.1),
            risk_aversion: r.map(|v| v.value),
            optimism: optimism.get(id).copied(),
            cognitive: c.map(|v| v.value),
            partial_index: r.is_some_and(|v| v.partial) || c.is_some_and(|v| v.partial),
            education: cov.education,
            age: f64::from(cov.age),
            female: cov.female,
            married: cov.married,
            children: cov.children,
            employment_growth: growth.employment_growth,
            employer: growth.employer,
            on_call_temp: occupation == Occupation::Employee && on_call_or_temp(h, cfg.mode, cfg.window),
            necessity: spell.is_some_and(|s| s.is_necessity()),
            spell,
        });
    }

    let mask: Vec<bool> = rows.iter().map(|r| r.extended_occupation != Occupation::Excluded).collect();
    type Slot = fn(&mut AnalysisRow) -> &mut Option<f64>;
    let slots: [Slot; 5] = [
        |r| &mut r.aversion,
        |r| &mut r.sensitivity,
        |r| &mut r.risk_aversion,
        |r| &mut r.optimism,
        |r| &mut r.cognitive,
    ];
    for slot in slots {
        let raw: Vec<f64> = rows.iter_mut().map(|r| slot(r).unwrap_or(f64::NAN)).collect();
        let z = standardize(&raw, &mask, cfg.sd_convention)?;
        for (row, v) in rows.iter_mut().zip(z) {
            *slot(row) = v.is_finite().then_some(v);
        }
    }
    Ok(rows)
}

/// Binary dependent variables. Each compares a group against all other
/// included respondents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeKind {
    SelfEmployed,
    Incorporated,
    /// Entrepreneur whose staff did not grow; entrepreneurs with unknown growth are dropped.
    EntrepreneurNoGrowth,
    EmploymentGrowth,
    NonEmployer,
    Employer,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 6] = [
        OutcomeKind::SelfEmployed,
        OutcomeKind::Incorporated,
        OutcomeKind::EntrepreneurNoGrowth,
        OutcomeKind::EmploymentGrowth,
        OutcomeKind::NonEmployer,
        OutcomeKind::Employer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::SelfEmployed => "self-employed",
            OutcomeKind::Incorporated => "incorporated",
            OutcomeKind::EntrepreneurNoGrowth => "no-growth",
            OutcomeKind::EmploymentGrowth => "growth",
            OutcomeKind::NonEmployer => "non-employer",
            OutcomeKind::Employer => "employer",
        }
    }

    /// 0/1 outcome, or `None` when the row is not part of this sample.
    pub fn value(self, row: &AnalysisRow) -> Option<f64> {
        if !row.included() {
            return None;
        }
        let entrepreneur = row.occupation.is_entrepreneur();
        let hit = match self {
            OutcomeKind::SelfEmployed => row.occupation == Occupation::SelfEmployed,
            OutcomeKind::Incorporated => row.occupation == Occupation::Incorporated,
            OutcomeKind::EntrepreneurNoGrowth | OutcomeKind::EmploymentGrowth => {
                let growing = match (entrepreneur, row.employment_growth) {
                    (false, _) => None,
                    (true, None) => return None,
                    (true, Some(g)) => Some(g),
                };
                match self {
                    OutcomeKind::EmploymentGrowth => growing == Some(true),
                    _ => growing == Some(false),
                }
            }
            OutcomeKind::NonEmployer => entrepreneur && !row.employer,
            OutcomeKind::Employer => entrepreneur && row.employer,
        };
        Some(if hit { 1.0 } else { 0.0 })
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutcomeKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutcomeKind::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| PipelineError::UnknownOutcome(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleFilter {
    /// Entrepreneurs who entered from unemployment count as 0.
    Necessity,
    /// Drops the entrepreneur type not being modelled.
    OtherEntrepreneurs,
    /// Drops on-call and temp-staff employees.
    OnCallTemp,
}

impl SampleFilter {
    pub const ALL: [SampleFilter; 3] =
        [SampleFilter::Necessity, SampleFilter::OtherEntrepreneurs, SampleFilter::OnCallTemp];

    pub fn as_str(self) -> &'static str {
        match self {
            SampleFilter::Necessity => "necessity",
            SampleFilter::OtherEntrepreneurs => "other-entrepreneurs",
            SampleFilter::OnCallTemp => "on-call-temp",
        }
    }

    /// Parses a comma-separated list; empty input yields no filters.
    pub fn parse_list(s: &str) -> Result<BTreeSet<SampleFilter>, PipelineError> {
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
    }
}

impl FromStr for SampleFilter {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SampleFilter::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| PipelineError::UnknownFilter(s.to_string()))
    }
}

/// Rows in the estimation sample for an outcome, paired with the outcome value.
pub fn apply_filters<'a>(
    rows: &'a [AnalysisRow],
    filters: &BTreeSet<SampleFilter>,
    outcome: OutcomeKind,
) -> Result<Vec<(&'a AnalysisRow, f64)>, PipelineError> {
    let other = match outcome {
        OutcomeKind::SelfEmployed => Some(Occupation::Incorporated),
        OutcomeKind::Incorporated => Some(Occupation::SelfEmployed),
        _ => None,
    };
    if filters.contains(&SampleFilter::OtherEntrepreneurs) && other.is_none() {
        return Err(PipelineError::FilterNotApplicable {
            filter: SampleFilter::OtherEntrepreneurs.as_str().into(),
            outcome: outcome.as_str().into(),
        });
    }
    Ok(rows
        .iter()
        .filter_map(|row| {
            let mut y = outcome.value(row)?;
            if filters.contains(&SampleFilter::OnCallTemp) && row.on_call_temp {
                return None;
            }
            if filters.contains(&SampleFilter::OtherEntrepreneurs) && Some(row.occupation) == other {
                return None;
            }
            if filters.contains(&SampleFilter::Necessity) && row.necessity {
                y = 0.0;
            }
            Some((row, y))
        })
        .collect())
}

/// Outcome column named after the outcome plus all regressors; missing values are NaN.
pub fn regression_frame(
    rows: &[AnalysisRow],
    filters: &BTreeSet<SampleFilter>,
    outcome: OutcomeKind,
) -> Result<Frame, PipelineError> {
    let sample = apply_filters(rows, filters, outcome)?;
    let mut frame = Frame::new();
    frame.push(outcome.as_str(), sample.iter().map(|(_, y)| *y).collect())?;
    for name in REGRESSORS {
        frame.push(name, sample.iter().map(|(r, _)| r.variable(name).unwrap_or(f64::NAN)).collect())?;
    }
    Ok(frame)
}

pub fn regression_spec(outcome: OutcomeKind) -> RegressionSpec {
    RegressionSpec::new(outcome.as_str(), &REGRESSORS).with_binary(&BINARY_REGRESSORS)
}

/// Categories of the four-way choice model; the first is the base.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MnlCategory {
    Employee = 0,
    Manager = 1,
    SelfEmployed = 2,
    Incorporated = 3,
}

impl MnlCategory {
    pub const ALL: [MnlCategory; 4] =
        [MnlCategory::Employee, MnlCategory::Manager, MnlCategory::SelfEmployed, MnlCategory::Incorporated];

    pub fn code(self) -> f64 {
        f64::from(self as u8)
    }

    pub fn of(row: &AnalysisRow) -> Option<MnlCategory> {
        match row.occupation {
            Occupation::Employee if row.employer => Some(MnlCategory::Manager),
            Occupation::Employee => Some(MnlCategory::Employee),
            Occupation::SelfEmployed => Some(MnlCategory::SelfEmployed),
            Occupation::Incorporated => Some(MnlCategory::Incorporated),
            Occupation::Excluded => None,
        }
    }
}

/// Frame with a `category` column coded by [`MnlCategory::code`].
pub fn mnl_frame(rows: &[AnalysisRow]) -> Result<Frame, PipelineError> {
    let sample: Vec<(&AnalysisRow, MnlCategory)> =
        rows.iter().filter_map(|r| MnlCategory::of(r).map(|c| (r, c))).collect();
    let mut frame = Frame::new();
    frame.push("category", sample.iter().map(|(_, c)| c.code()).collect())?;
    for name in REGRESSORS {
        frame.push(name, sample.iter().map(|(r, _)| r.variable(name).unwrap_or(f64::NAN)).collect())?;
    }
    Ok(frame)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationCorrelation {
    pub kind: Occupation,
    pub entrants: usize,
    pub aversion: Correlation,
    pub sensitivity: Correlation,
}

/// Correlates the duration of an ongoing spell with the attitudes, over
/// respondents whose entry into that spell was observed.
pub fn duration_correlation(rows: &[AnalysisRow], kind: Occupation) -> Result<DurationCorrelation, PipelineError> {
    let entrants: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.occupation == kind)
        .filter_map(|r| {
            let s = r.spell.filter(|s| s.ongoing && s.prior_status.is_some())?;
            Some((f64::from(s.duration()), r.aversion?, r.sensitivity?))
        })
        .collect();
    if entrants.len() < 3 {
        return Err(PipelineError::TooFewEntrants(entrants.len()));
    }
    let frame = Frame::new()
        .with("duration", entrants.iter().map(|e| e.0).collect())?
        .with("aversion", entrants.iter().map(|e| e.1).collect())?
        .with("sensitivity", entrants.iter().map(|e| e.2).collect())?;
    let m = correlation_matrix(&frame, &["duration", "aversion", "sensitivity"])?;
    let get = |b| m.get("duration", b).ok_or_else(|| EconError::UnknownColumn(b.to_string()));
    Ok(DurationCorrelation { kind, entrants: entrants.len(), aversion: get("aversion")?, sensitivity: get("sensitivity")? })
}

/// All analysis variables for included rows, for descriptive tables.
pub fn variable_frame(rows: &[AnalysisRow]) -> Result<Frame, PipelineError> {
    let included: Vec<&AnalysisRow> = rows.iter().filter(|r| r.included()).collect();
    let mut frame = Frame::new();
    for name in REGRESSORS {
        frame.push(name, included.iter().map(|r| r.variable(name).unwrap_or(f64::NAN)).collect())?;
    }
    Ok(frame)
}
