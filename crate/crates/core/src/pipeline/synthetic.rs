//! Synthetic study inputs for simulated agents, with occupational choice
//! driven by the agents' true attitudes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::analysis::{Covariates, Education, StudyInputs};
use super::history::{EmploymentHistoryRow, Occupation, StatusCode};
use super::indices::{Instrument, Measurement};
use crate::simulate::{derive_seed, SyntheticAgent};

/// Latent-index occupational choice. Incorporation is decided first on
/// `incorporated_intercept + aversion_effect·AA + ε`, then self-employment on
/// `self_employed_intercept + sensitivity_effect·s + ε`, with standard normal ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySpec {
    pub incorporated_intercept: f64,
    pub aversion_effect: f64,
    pub self_employed_intercept: f64,
    pub sensitivity_effect: f64,
    pub first_year: i32,
    pub last_year: i32,
    /// Chance that an entrant was unemployed the year before entry.
    pub necessity_share: f64,
    /// Chance that an employee is on call or temp staff.
    pub on_call_share: f64,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            incorporated_intercept: -0.8,
            aversion_effect: -3.0,
            self_employed_intercept: -1.2,
            sensitivity_effect: 0.5,
            first_year: 2016,
            last_year: 2021,
            necessity_share: 0.1,
            on_call_share: 0.05,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn entrepreneur_status(kind: Occupation, rng: &mut ChaCha8Rng) -> StatusCode {
    match kind {
        Occupation::Incorporated => StatusCode::IncorporatedDirector,
        _ => [StatusCode::SelfEmployed, StatusCode::Freelancer, StatusCode::Professional][rng.random_range(0..3)],
    }
}

/// History, covariates and measurements for every agent. Attitudes are left
/// empty for the estimator to fill.
pub fn generate_study(agents: &[SyntheticAgent], spec: &StudySpec, seed: u64) -> StudyInputs {
    let mut inputs = StudyInputs::default();
    for (i, agent) in agents.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64]));
        let id = agent.id.clone();
        let p = &agent.profile;

        let kind = if spec.incorporated_intercept + spec.aversion_effect * p.aversion + normal(&mut rng) > 0.0 {
            Occupation::Incorporated
        } else if spec.self_employed_intercept + spec.sensitivity_effect * p.sensitivity + normal(&mut rng) > 0.0 {
            Occupation::SelfEmployed
        } else {
            Occupation::Employee
        };
        let base_age: u32 = rng.random_range(24..60);
        let entry = rng.random_range(spec.first_year..=spec.last_year);
        let necessity = rng.random::<f64>() < spec.necessity_share;
        let employee_status =
            if rng.random::<f64>() < spec.on_call_share { StatusCode::OnCall } else { StatusCode::Employee };
        let status = entrepreneur_status(kind, &mut rng);
        let mut supervised: u32 = if kind == Occupation::Employee {
            u32::from(rng.random::<f64>() < 0.2) * rng.random_range(1..6)
        } else {
            rng.random_range(0..3)
        };
        let trend: i32 = rng.random_range(-1..=1);
        for year in spec.first_year..=spec.last_year {
            let age = base_age + (year - spec.first_year) as u32;
            let row_status = match kind {
                Occupation::Employee => employee_status,
                _ if year >= entry => status,
                _ if year + 1 == entry && necessity => StatusCode::Unemployed,
                _ => StatusCode::Employee,
            };
            let sup = if row_status == StatusCode::Unemployed { 0 } else { supervised };
            inputs.history.push(EmploymentHistoryRow { respondent: id.clone(), year, status: row_status, supervised: sup, age });
            if kind.is_entrepreneur() && year >= entry {
                supervised = supervised.saturating_add_signed(trend);
            }
        }

        let education = [Education::BelowUpperSecondary, Education::UpperSecondary, Education::Tertiary]
            [rng.random_range(0..3)];
        inputs.covariates.push(Covariates {
            respondent: id.clone(),
            age: base_age + (spec.last_year - spec.first_year) as u32,
            female: rng.random(),
            married: rng.random(),
            children: rng.random_range(0..4),
            education,
        });

        let mut push = |year, instrument, item, value| {
            inputs.measurements.push(Measurement { respondent: id.clone(), year, instrument, item, value });
        };
        for year in [2018, 2020] {
            push(year, Instrument::RiskQualitative, 1, (5.0 + 2.0 * normal(&mut rng)).round().clamp(0.0, 10.0));
            for item in 1..=5 {
                push(year, Instrument::RiskCertaintyEquivalent, item, (40.0 + 10.0 * normal(&mut rng)).max(0.0));
            }
            for inst in Instrument::NUMERACY {
                push(year, inst, 1, f64::from(rng.random_range(0..=5u8)));
            }
        }
        for item in 1..=6 {
            push(2019, Instrument::Optimism, item, f64::from(rng.random_range(1..=5u8)));
        }
    }
    inputs
}
