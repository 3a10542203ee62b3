use std::collections::{BTreeMap, BTreeSet};

use ambihedge::domain::RespondentId;
use ambihedge::pipeline::synthetic::{generate_study, StudySpec};
use ambihedge::pipeline::{
    build_analysis, classify_occupation, cognitive_indices, growth_flags, optimism_indices, risk_indices,
    AnalysisConfig, ClassificationMode, EmploymentHistoryRow, Instrument, Measurement, Occupation, StatusCode,
    Window, DEFAULT_OPTIMISM_REVERSED,
};
use ambihedge::simulate::{sample_population, PopulationSpec};
use proptest::prelude::*;
use proptest::sample::select;

fn status() -> impl Strategy<Value = StatusCode> {
    select(StatusCode::ALL.to_vec())
}

fn history() -> impl Strategy<Value = Vec<EmploymentHistoryRow>> {
    proptest::collection::vec((2012i32..2023, status(), 0u32..6, 15u32..75), 1..12).prop_map(|rows| {
        rows.into_iter()
            .map(|(year, status, supervised, age)| EmploymentHistoryRow {
                respondent: "p".into(),
                year,
                status,
                supervised,
                age,
            })
            .collect()
    })
}

fn row(year: i32, status: StatusCode, supervised: u32) -> EmploymentHistoryRow {
    EmploymentHistoryRow { respondent: "p".into(), year, status, supervised, age: 40 }
}

proptest! {
    #[test]
    fn classification_ignores_row_order(h in history(), seed: u64) {
        let mut shuffled = h.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        for mode in [ClassificationMode::WorkingAge, ClassificationMode::Extended] {
            prop_assert_eq!(
                classify_occupation(&h, mode, Window::default()),
                classify_occupation(&shuffled, mode, Window::default())
            );
        }
        prop_assert_eq!(growth_flags(&h, Window::default()), growth_flags(&shuffled, Window::default()));
    }

    #[test]
    fn extended_mode_never_loses_an_entrepreneur(h in history()) {
        let w = classify_occupation(&h, ClassificationMode::WorkingAge, Window::default()).unwrap();
        let e = classify_occupation(&h, ClassificationMode::Extended, Window::default()).unwrap();
        let rank = |o: Occupation| match o {
            Occupation::Excluded => 0,
            Occupation::Employee => 1,
            Occupation::SelfEmployed => 2,
            Occupation::Incorporated => 3,
        };
        prop_assert!(rank(e) >= rank(w));
    }
}

#[test]
fn growth_flag_examples() {
    let flags = |counts: &[u32]| {
        let h: Vec<_> = counts.iter().enumerate().map(|(i, &c)| row(2018 + i as i32, StatusCode::SelfEmployed, c)).collect();
        growth_flags(&h, Window::default())
    };
    let f = flags(&[2, 2, 2]);
    assert_eq!((f.employment_growth, f.employer), (Some(false), true));
    assert_eq!(flags(&[0, 1, 3]).employment_growth, Some(true));
    let f = flags(&[3, 1]);
    assert_eq!((f.employment_growth, f.employer), (Some(false), true));
}

#[test]
fn classification_examples() {
    let one = [row(2019, StatusCode::IncorporatedDirector, 0)];
    assert_eq!(classify_occupation(&one, ClassificationMode::WorkingAge, Window::default()), Ok(Occupation::Incorporated));
    let both = [row(2018, StatusCode::SelfEmployed, 0), row(2020, StatusCode::IncorporatedDirector, 0)];
    assert_eq!(classify_occupation(&both, ClassificationMode::WorkingAge, Window::default()), Ok(Occupation::Incorporated));
    let old = [row(2012, StatusCode::Employee, 0), row(2019, StatusCode::NotWorking, 0)];
    assert_eq!(classify_occupation(&old, ClassificationMode::WorkingAge, Window::default()), Ok(Occupation::Excluded));
    assert_eq!(classify_occupation(&old, ClassificationMode::Extended, Window::default()), Ok(Occupation::Employee));
}

fn measurements(seed: u64) -> Vec<Measurement> {
    let agents = sample_population(&PopulationSpec { count: 60, seed, ..Default::default() }).unwrap();
    generate_study(&agents, &StudySpec::default(), seed).measurements
}

fn relabel_years(ms: &[Measurement]) -> Vec<Measurement> {
    // Swap the two measurement years and reverse the row order.
    ms.iter()
        .rev()
        .map(|m| Measurement { year: if m.year == 2018 { 2020 } else if m.year == 2020 { 2018 } else { m.year }, ..m.clone() })
        .collect()
}

#[test]
fn indices_do_not_depend_on_year_order() {
    for seed in 0..5 {
        let ms = measurements(seed);
        let reference: BTreeSet<RespondentId> = ms.iter().map(|m| m.respondent.clone()).collect();
        let swapped = relabel_years(&ms);
        let close = |a: &BTreeMap<RespondentId, f64>, b: &BTreeMap<RespondentId, f64>| {
            a.len() == b.len() && a.iter().all(|(k, v)| (v - b[k]).abs() < 1e-12)
        };
        let values = |m: BTreeMap<RespondentId, ambihedge::pipeline::IndexValue>| {
            m.into_iter().map(|(k, v)| (k, v.value)).collect::<BTreeMap<_, _>>()
        };
        assert!(close(
            &values(risk_indices(&ms, &reference).unwrap()),
            &values(risk_indices(&swapped, &reference).unwrap())
        ));
        assert!(close(
            &values(cognitive_indices(&ms, &reference).unwrap()),
            &values(cognitive_indices(&swapped, &reference).unwrap())
        ));
        let opt = optimism_indices(&ms, Window::default(), &DEFAULT_OPTIMISM_REVERSED).unwrap();
        let mut reversed = ms.clone();
        reversed.reverse();
        assert_eq!(opt, optimism_indices(&reversed, Window::default(), &DEFAULT_OPTIMISM_REVERSED).unwrap());
    }
}

#[test]
fn occupations_partition_the_included_sample() {
    let agents = sample_population(&PopulationSpec { count: 300, seed: 21, ..Default::default() }).unwrap();
    let mut inputs = generate_study(&agents, &StudySpec::default(), 22);
    inputs.attitudes = agents.iter().map(|a| (a.id.clone(), (a.profile.aversion, a.profile.sensitivity))).collect();
    for mode in [ClassificationMode::WorkingAge, ClassificationMode::Extended] {
        let rows = build_analysis(&inputs, &AnalysisConfig { mode, ..Default::default() }).unwrap();
        let included = rows.iter().filter(|r| r.included()).count();
        let by_label: usize =
            Occupation::INCLUDED.iter().map(|o| rows.iter().filter(|r| r.occupation == *o).count()).sum();
        assert_eq!(included, by_label);
        assert!(rows.iter().all(|r| !r.on_call_temp || r.occupation == Occupation::Employee));
    }
    // The reference sample has standardized attitudes.
    let rows = build_analysis(&inputs, &AnalysisConfig::default()).unwrap();
    let reference: Vec<f64> =
        rows.iter().filter(|r| r.extended_occupation != Occupation::Excluded).filter_map(|r| r.aversion).collect();
    let mean = reference.iter().sum::<f64>() / reference.len() as f64;
    assert!(mean.abs() < 1e-12);
}

#[test]
fn instrument_names_parse() {
    for i in Instrument::ALL {
        assert_eq!(i.as_str().parse::<Instrument>(), Ok(i));
    }
}
