use std::collections::BTreeMap;

use ambihedge::domain::{AmbiguityProfile, BeliefVector, Event, WaveId};
use ambihedge::elicitation::{IntervalPanel, MatchingInterval};
use ambihedge::estimate::{
    estimate_individual, interval_loglik, interval_loglik_gradient, recover_population, EstimationConfig, WeightLink,
};
use ambihedge::simulate::{sample_population, simulate_panel, PopulationSpec, TruncatedNormal};
use proptest::prelude::*;

fn simplex() -> impl Strategy<Value = [f64; 3]> {
    (0.05f64..1.0, 0.05f64..1.0, 0.05f64..1.0).prop_map(|(a, b, c)| {
        let t = a + b + c;
        [a / t, b / t, c / t]
    })
}

/// Dyadic intervals of width 1/8 around arbitrary points, two waves.
fn intervals() -> impl Strategy<Value = Vec<MatchingInterval>> {
    proptest::collection::vec(0u32..8, 12).prop_map(|ks| {
        ks.iter()
            .enumerate()
            .map(|(i, &k)| {
                let lb = f64::from(k) / 8.0;
                MatchingInterval::new(Event::ALL[i % 6], WaveId(1 + (i / 6) as u32), lb, lb + 0.125).unwrap()
            })
            .collect()
    })
}

fn loglik(p: &AmbiguityProfile<f64>, b: &[BeliefVector<f64>], iv: &[MatchingInterval]) -> f64 {
    interval_loglik(p, b, iv, WeightLink::Linear).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn analytic_gradient_matches_central_differences(
        aa in -0.3f64..0.3, s in 0.2f64..1.2, sigma in 0.05f64..0.3,
        p1 in simplex(), p2 in simplex(), iv in intervals(),
    ) {
        let profile = AmbiguityProfile::new(aa, s, sigma);
        let beliefs = [BeliefVector::new(p1, WaveId(1)).unwrap(), BeliefVector::new(p2, WaveId(2)).unwrap()];
        let g = interval_loglik_gradient(&profile, &beliefs, &iv, WeightLink::Linear).unwrap();
        let h = 1e-6;
        let close = |analytic: f64, numeric: f64| (analytic - numeric).abs() <= 1e-5 * numeric.abs().max(1.0);
        let fd = |f: &dyn Fn(f64) -> f64| (f(h) - f(-h)) / (2.0 * h);

        let d_aa = fd(&|e| loglik(&AmbiguityProfile::new(aa + e, s, sigma), &beliefs, &iv));
        let d_s = fd(&|e| loglik(&AmbiguityProfile::new(aa, s + e, sigma), &beliefs, &iv));
        let d_sigma = fd(&|e| loglik(&AmbiguityProfile::new(aa, s, sigma + e), &beliefs, &iv));
        prop_assert!(close(g.aversion, d_aa), "aversion {} vs {}", g.aversion, d_aa);
        prop_assert!(close(g.sensitivity, d_s), "sensitivity {} vs {}", g.sensitivity, d_s);
        prop_assert!(close(g.error_sd, d_sigma), "error sd {} vs {}", g.error_sd, d_sigma);
        prop_assert!((g.value - loglik(&profile, &beliefs, &iv)).abs() < 1e-10);
    }

    #[test]
    fn loglik_is_never_positive(
        aa in -1.0f64..1.0, s in 0.0f64..1.5, sigma in 0.005f64..0.5,
        p1 in simplex(), p2 in simplex(), iv in intervals(),
    ) {
        let beliefs = [BeliefVector::new(p1, WaveId(1)).unwrap(), BeliefVector::new(p2, WaveId(2)).unwrap()];
        let ll = loglik(&AmbiguityProfile::new(aa, s, sigma), &beliefs, &iv);
        prop_assert!(ll <= 0.0);
    }

    #[test]
    fn more_starts_never_lower_the_optimum(iv in intervals(), seed: u64) {
        let mut waves: BTreeMap<WaveId, Vec<MatchingInterval>> = BTreeMap::new();
        for i in iv {
            waves.entry(i.wave).or_default().push(i);
        }
        let few = estimate_individual(&waves, &EstimationConfig { starts: 2, seed, ..Default::default() }).unwrap();
        let many = estimate_individual(&waves, &EstimationConfig { starts: 8, seed, ..Default::default() }).unwrap();
        prop_assert!(many.loglik >= few.loglik - 1e-6 * (1.0 + few.loglik.abs()), "{} < {}", many.loglik, few.loglik);
        prop_assert!(many.starts.attempted >= few.starts.attempted);
    }
}

fn recovery_error(depth: u32, seed: u64) -> (f64, f64) {
    let spec = PopulationSpec {
        count: 100,
        seed,
        error_sd: TruncatedNormal::point(0.02),
        ..Default::default()
    };
    let agents = sample_population(&spec).unwrap();
    let panel = IntervalPanel::from_transcripts(&simulate_panel(&agents, 2, depth, seed + 1).unwrap());
    let truths = agents.iter().map(|a| (a.id.clone(), a.profile)).collect();
    let s = recover_population(&panel, &EstimationConfig::default(), Some(&truths)).summary.unwrap();
    (s.mae_aversion, s.mae_sensitivity)
}

#[test]
fn deeper_elicitation_recovers_aversion_better() {
    let shallow = recovery_error(3, 11);
    let deep = recovery_error(6, 11);
    assert!(deep.0 < shallow.0, "depth 6 {deep:?} vs depth 3 {shallow:?}");
}

#[test]
fn estimated_profiles_respect_bounds() {
    let agents = sample_population(&PopulationSpec { count: 40, seed: 3, ..Default::default() }).unwrap();
    let panel = IntervalPanel::from_transcripts(&simulate_panel(&agents, 2, 5, 4).unwrap());
    let cfg = EstimationConfig::default();
    for res in recover_population(&panel, &cfg, None).results.values() {
        let r = res.as_ref().unwrap();
        assert!((-1.0..=1.0).contains(&r.profile.aversion));
        assert!((0.0..=1.5).contains(&r.profile.sensitivity));
        assert!((0.005..=0.5).contains(&r.profile.error_sd));
        for b in &r.beliefs {
            assert!(b.singular().iter().all(|&p| p >= cfg.belief_floor * 0.999));
        }
    }
}
