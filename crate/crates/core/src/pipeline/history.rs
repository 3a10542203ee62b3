use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::domain::RespondentId;

/// Closed vocabulary of employment statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusCode {
    Employee,
    EmployeeTemporary,
    OnCall,
    TempStaff,
    SelfEmployed,
    Freelancer,
    Professional,
    IncorporatedDirector,
    NotWorking,
    Unemployed,
}

impl StatusCode {
    pub const ALL: [StatusCode; 10] = [
        StatusCode::Employee,
        StatusCode::EmployeeTemporary,
        StatusCode::OnCall,
        StatusCode::TempStaff,
        StatusCode::SelfEmployed,
        StatusCode::Freelancer,
        StatusCode::Professional,
        StatusCode::IncorporatedDirector,
        StatusCode::NotWorking,
        StatusCode::Unemployed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatusCode::Employee => "employee",
            StatusCode::EmployeeTemporary => "employee_temporary",
            StatusCode::OnCall => "on_call",
            StatusCode::TempStaff => "temp_staff",
            StatusCode::SelfEmployed => "self_employed",
            StatusCode::Freelancer => "freelancer",
            StatusCode::Professional => "professional",
            StatusCode::IncorporatedDirector => "incorporated_director",
            StatusCode::NotWorking => "not_working",
            StatusCode::Unemployed => "unemployed",
        }
    }

    /// Occupation this status counts toward, if any.
    pub fn occupation(self) -> Option<Occupation> {
        match self {
            StatusCode::Employee
            | StatusCode::EmployeeTemporary
            | StatusCode::OnCall
            | StatusCode::TempStaff => Some(Occupation::Employee),
            StatusCode::SelfEmployed | StatusCode::Freelancer | StatusCode::Professional => {
                Some(Occupation::SelfEmployed)
            }
            StatusCode::IncorporatedDirector => Some(Occupation::Incorporated),
            StatusCode::NotWorking | StatusCode::Unemployed => None,
        }
    }

    pub fn is_on_call_or_temp(self) -> bool {
        matches!(self, StatusCode::OnCall | StatusCode::TempStaff)
    }

    /// Rank used when one year carries several statuses; higher wins.
    fn priority(self) -> u8 {
        match self.occupation() {
            Some(Occupation::Incorporated) => 4,
            Some(Occupation::SelfEmployed) => 3,
            Some(Occupation::Employee) => 2,
            _ if self == StatusCode::Unemployed => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for StatusCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatusCode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StatusCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| PipelineError::UnknownStatus(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupation {
    Employee,
    SelfEmployed,
    Incorporated,
    Excluded,
}

impl Occupation {
    pub const INCLUDED: [Occupation; 3] =
        [Occupation::Employee, Occupation::SelfEmployed, Occupation::Incorporated];

    pub fn is_entrepreneur(self) -> bool {
        matches!(self, Occupation::SelfEmployed | Occupation::Incorporated)
    }

    pub fn label(self) -> &'static str {
        match self {
            Occupation::Employee => "Employee",
            Occupation::SelfEmployed => "Self-employed",
            Occupation::Incorporated => "Incorp. entrepreneur",
            Occupation::Excluded => "Excluded",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmploymentHistoryRow {
    pub respondent: RespondentId,
    pub year: i32,
    pub status: StatusCode,
    pub supervised: u32,
    pub age: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassificationMode {
    /// Window years only, ages 21–64.
    #[default]
    WorkingAge,
    /// Full history, ages 21 and up.
    Extended,
}

impl FromStr for ClassificationMode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "working-age" => Ok(ClassificationMode::WorkingAge),
            "extended" => Ok(ClassificationMode::Extended),
            other => Err(PipelineError::UnknownMode(other.to_string())),
        }
    }
}

/// Inclusive range of survey years.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub first: i32,
    pub last: i32,
}

impl Default for Window {
    fn default() -> Self {
        Self { first: 2018, last: 2021 }
    }
}

impl Window {
    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }
}

/// One row per year, sorted by year. Where a year has several rows the
/// highest-priority status wins and the largest supervised count and age are kept.
pub fn collapse_years(history: &[EmploymentHistoryRow]) -> Vec<EmploymentHistoryRow> {
    let mut rows: Vec<EmploymentHistoryRow> = history.to_vec();
    rows.sort_by(|a, b| {
        a.year
            .cmp(&b.year)
            .then(b.status.priority().cmp(&a.status.priority()))
            .then(a.status.cmp(&b.status))
    });
    let mut out: Vec<EmploymentHistoryRow> = Vec::with_capacity(rows.len());
    for r in rows {
        match out.last_mut() {
            Some(prev) if prev.year == r.year => {
                prev.supervised = prev.supervised.max(r.supervised);
                prev.age = prev.age.max(r.age);
            }
            _ => out.push(r),
        }
    }
    out
}

fn considered(history: &[EmploymentHistoryRow], mode: ClassificationMode, window: Window) -> Vec<EmploymentHistoryRow> {
    collapse_years(history)
        .into_iter()
        .filter(|r| match mode {
            ClassificationMode::WorkingAge => window.contains(r.year) && r.age > 20 && r.age < 65,
            ClassificationMode::Extended => r.age > 20,
        })
        .collect()
}

/// Occupation with priority incorporated > self-employed > employee over the
/// rows the mode considers.
pub fn classify_occupation(
    history: &[EmploymentHistoryRow],
    mode: ClassificationMode,
    window: Window,
) -> Result<Occupation, PipelineError> {
    if history.is_empty() {
        return Err(PipelineError::EmptyHistory);
    }
    Ok(considered(history, mode, window)
        .iter()
        .filter_map(|r| r.status.occupation())
        .max_by_key(|o| match o {
            Occupation::Incorporated => 3,
            Occupation::SelfEmployed => 2,
            Occupation::Employee => 1,
            Occupation::Excluded => 0,
        })
        .unwrap_or(Occupation::Excluded))
}

/// True when an employee's most recent considered employee-type status is on-call or temp staff.
pub fn on_call_or_temp(history: &[EmploymentHistoryRow], mode: ClassificationMode, window: Window) -> bool {
    considered(history, mode, window)
        .iter()
        .rev()
        .find(|r| r.status.occupation() == Some(Occupation::Employee))
        .is_some_and(|r| r.status.is_on_call_or_temp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthFlags {
    /// Mean consecutive change in employees supervised is positive; `None`
    /// with fewer than two window observations.
    pub employment_growth: Option<bool>,
    pub employer: bool,
}

pub fn growth_flags(history: &[EmploymentHistoryRow], window: Window) -> GrowthFlags {
    let counts: Vec<f64> = collapse_years(history)
        .iter()
        .filter(|r| window.contains(r.year))
        .map(|r| f64::from(r.supervised))
        .collect();
    let employer = counts.iter().any(|&c| c >= 1.0);
    let employment_growth = (counts.len() >= 2).then(|| {
        let diffs: f64 = counts.windows(2).map(|w| w[1] - w[0]).sum();
        diffs / (counts.len() - 1) as f64 > 0.0
    });
    GrowthFlags { employment_growth, employer }
}

/// A run of consecutive observations in one entrepreneur type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Spell {
    pub kind: Occupation,
    pub entry_year: i32,
    pub last_year: i32,
    /// Status observed just before entry, if the panel saw it.
    pub prior_status: Option<StatusCode>,
    /// The spell includes the latest observation.
    pub ongoing: bool,
}

impl Spell {
    /// Whole years between entry and the last observation in the spell.
    pub fn duration(&self) -> i32 {
        self.last_year - self.entry_year
    }

    /// Entered from unemployment.
    pub fn is_necessity(&self) -> bool {
        self.prior_status == Some(StatusCode::Unemployed)
    }
}

/// Most recent spell of the given entrepreneur type.
pub fn latest_spell(history: &[EmploymentHistoryRow], kind: Occupation) -> Option<Spell> {
    let rows = collapse_years(history);
    let end = rows.iter().rposition(|r| r.status.occupation() == Some(kind))?;
    let mut start = end;
    while start > 0 && rows[start - 1].status.occupation() == Some(kind) {
        start -= 1;
    }
    Some(Spell {
        kind,
        entry_year: rows[start].year,
        last_year: rows[end].year,
        prior_status: start.checked_sub(1).map(|i| rows[i].status),
        ongoing: end == rows.len() - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(year: i32, status: StatusCode, supervised: u32, age: u32) -> EmploymentHistoryRow {
        EmploymentHistoryRow { respondent: "r".into(), year, status, supervised, age }
    }

    #[test]
    fn single_incorporated_row() {
        let h = [row(2019, StatusCode::IncorporatedDirector, 0, 45)];
        for mode in [ClassificationMode::WorkingAge, ClassificationMode::Extended] {
            assert_eq!(classify_occupation(&h, mode, Window::default()).unwrap(), Occupation::Incorporated);
        }
    }

    #[test]
    fn incorporated_outranks_self_employed() {
        let h = [row(2018, StatusCode::SelfEmployed, 0, 40), row(2020, StatusCode::IncorporatedDirector, 0, 42)];
        let occ = classify_occupation(&h, ClassificationMode::WorkingAge, Window::default()).unwrap();
        assert_eq!(occ, Occupation::Incorporated);
    }

    #[test]
    fn window_and_mode_walkthrough() {
        let h = [row(2012, StatusCode::Employee, 0, 60), row(2019, StatusCode::NotWorking, 0, 67)];
        let w = Window::default();
        assert_eq!(classify_occupation(&h, ClassificationMode::WorkingAge, w).unwrap(), Occupation::Excluded);
        assert_eq!(classify_occupation(&h, ClassificationMode::Extended, w).unwrap(), Occupation::Employee);
        assert_eq!(classify_occupation(&[], ClassificationMode::Extended, w), Err(PipelineError::EmptyHistory));
    }

    #[test]
    fn age_bounds_are_strict() {
        let w = Window::default();
        let young = [row(2019, StatusCode::Employee, 0, 20)];
        let old = [row(2019, StatusCode::Employee, 0, 65)];
        assert_eq!(classify_occupation(&young, ClassificationMode::WorkingAge, w).unwrap(), Occupation::Excluded);
        assert_eq!(classify_occupation(&old, ClassificationMode::WorkingAge, w).unwrap(), Occupation::Excluded);
        assert_eq!(classify_occupation(&old, ClassificationMode::Extended, w).unwrap(), Occupation::Employee);
    }

    #[test]
    fn growth_examples() {
        let w = Window::default();
        let hist = |counts: &[u32]| -> Vec<_> {
            counts.iter().enumerate().map(|(i, &c)| row(2018 + i as i32, StatusCode::SelfEmployed, c, 40)).collect()
        };
        assert_eq!(growth_flags(&hist(&[2, 2, 2]), w), GrowthFlags { employment_growth: Some(false), employer: true });
        assert_eq!(growth_flags(&hist(&[0, 1, 3]), w).employment_growth, Some(true));
        assert_eq!(growth_flags(&hist(&[3, 1]), w), GrowthFlags { employment_growth: Some(false), employer: true });
        assert_eq!(growth_flags(&hist(&[0]), w), GrowthFlags { employment_growth: None, employer: false });
    }

    #[test]
    fn same_year_takes_highest_priority() {
        let h = [row(2019, StatusCode::Employee, 1, 30), row(2019, StatusCode::SelfEmployed, 0, 30)];
        let c = collapse_years(&h);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].status, StatusCode::SelfEmployed);
        assert_eq!(c[0].supervised, 1);
    }

    #[test]
    fn necessity_spell() {
        let h = [
            row(2017, StatusCode::Employee, 0, 30),
            row(2018, StatusCode::Unemployed, 0, 31),
            row(2019, StatusCode::Freelancer, 0, 32),
            row(2020, StatusCode::SelfEmployed, 0, 33),
        ];
        let s = latest_spell(&h, Occupation::SelfEmployed).unwrap();
        assert!(s.is_necessity() && s.ongoing);
        assert_eq!((s.entry_year, s.duration()), (2019, 1));
        assert!(latest_spell(&h, Occupation::Incorporated).is_none());
        let left_censored = [row(2019, StatusCode::SelfEmployed, 0, 40)];
        assert_eq!(latest_spell(&left_censored, Occupation::SelfEmployed).unwrap().prior_status, None);
    }

    #[test]
    fn on_call_detection() {
        let w = Window::default();
        let h = [row(2018, StatusCode::Employee, 0, 30), row(2020, StatusCode::OnCall, 0, 32)];
        assert!(on_call_or_temp(&h, ClassificationMode::WorkingAge, w));
        let h2 = [row(2018, StatusCode::TempStaff, 0, 30), row(2020, StatusCode::Employee, 0, 32)];
        assert!(!on_call_or_temp(&h2, ClassificationMode::WorkingAge, w));
    }

    #[test]
    fn status_names_round_trip() {
        for s in StatusCode::ALL {
            assert_eq!(s.as_str().parse::<StatusCode>().unwrap(), s);
        }
        assert!("astronaut".parse::<StatusCode>().is_err());
    }
}
