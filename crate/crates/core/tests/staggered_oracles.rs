mod common;

use proptest::prelude::*;

use paneldid::bacon::{bacon_decompose, reconstruct, Comparison};
use paneldid::did_spec::{build_staggered_twfe, DidSpec, SpecKind};
use paneldid::engine::wls_fit;
use paneldid::panel::PanelDataset;
use paneldid::simulate::{generate, DgpConfig, Preset};
use paneldid::staggered::{cs_att, impute_att, sa_event_study, ControlRule, CsOptions, ImputeOptions, SaOptions};

fn staggered(seed: u64, n_units: usize, n_periods: usize) -> (Vec<Option<usize>>, Vec<Vec<f64>>) {
    let mut r = common::rng(seed);
    let starts: Vec<Option<usize>> = (0..n_units)
        .map(|_| {
            let s = rand::Rng::random_range(&mut r, 0..=n_periods + 1);
            (s < n_periods).then_some(s)
        })
        .collect();
    let y = (0..n_units)
        .map(|_| (0..n_periods).map(|_| common::normal(&mut r)).collect())
        .collect();
    (starts, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bacon_reconstructs_twfe(seed in any::<u64>(), n_units in 3usize..16, n_periods in 3usize..10) {
        let (starts, y) = staggered(seed, n_units, n_periods);
        prop_assume!(common::identified(&starts));
        let (data, design) = common::staggered_panel(&starts, n_periods, |_| 1.0, |i, t, _| y[i][t]);
        let comps = bacon_decompose(&data, &design.cohorts()).unwrap();
        let oracle = common::twfe_oracle(&starts, n_periods, &y);
        let engine = wls_fit(&build_staggered_twfe(&data, &design, &DidSpec::new(SpecKind::StaggeredTwfe)).unwrap()).unwrap();
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
        prop_assert!(comps.iter().all(|c| c.weight >= 0.0));
        prop_assert!((reconstruct(&comps) - oracle).abs() <= 1e-8, "{} vs {}", reconstruct(&comps), oracle);
        prop_assert!((reconstruct(&comps) - engine.coefficients[0]).abs() <= 1e-8);
    }

    #[test]
    fn estimators_ignore_uniform_weight_scale(seed in any::<u64>(), c in 0.01f64..100.0) {
        let n_periods = 8;
        let starts = [Some(3), Some(3), Some(5), Some(5), None, None, Some(3), None];
        let mut r = common::rng(seed);
        let y: Vec<Vec<f64>> = (0..starts.len()).map(|_| (0..n_periods).map(|_| common::normal(&mut r)).collect()).collect();
        let w: Vec<f64> = (0..starts.len()).map(|_| rand::Rng::random_range(&mut r, 0.5..3.0)).collect();
        let make = |scale: f64| common::staggered_panel(&starts, n_periods, |i| w[i] * scale, |i, t, _| y[i][t]);
        let summary = |d: &PanelDataset, cohorts| -> Vec<f64> {
            let mut v: Vec<f64> = cs_att(d, cohorts, &CsOptions::new(ControlRule::NeverTreated)).unwrap().entries.iter().map(|e| e.att).collect();
            let sa = sa_event_study(d, cohorts, &SaOptions::default()).unwrap();
            v.extend(sa.by_event_time.iter().map(|e| e.estimate));
            v.push(impute_att(d, cohorts, &ImputeOptions::default()).unwrap().att);
            v
        };
        let (d1, design) = make(1.0);
        let (dc, _) = make(c);
        let cohorts = design.cohorts();
        for (a, b) in summary(&d1, &cohorts).iter().zip(summary(&dc, &cohorts)) {
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }
}

#[test]
fn never_treated_removed_leaves_two_components() {
    let starts = [Some(2), Some(2), Some(5), Some(5), Some(5)];
    let (data, design) = common::staggered_panel(&starts, 8, |_| 1.0, |i, t, d| (i * t) as f64 * 0.1 + f64::from(u8::from(d)));
    let comps = bacon_decompose(&data, &design.cohorts()).unwrap();
    let kinds: Vec<Comparison> = comps.iter().map(|c| c.comparison).collect();
    assert_eq!(kinds, vec![Comparison::EarlyVsLate, Comparison::LateVsEarly]);
}

#[test]
fn noiseless_ground_truth_recovered() {
    let mut config = DgpConfig::preset(Preset::Heterogeneous).with_seed(11);
    config.noise_sd = 0.0;
    let sim = generate(&config).unwrap();
    let cohorts = sim.cohorts();
    let cs = cs_att(&sim.data, &cohorts, &CsOptions::new(ControlRule::NeverTreated)).unwrap();
    for e in &cs.entries {
        let truth = sim.truth.cells.iter().find(|c| c.cohort == e.cohort && c.event_time == e.event_time).unwrap();
        assert!((e.att - truth.tau).abs() <= 1e-9);
    }
    let imp = impute_att(&sim.data, &cohorts, &ImputeOptions::default()).unwrap();
    assert!((imp.att - sim.truth.overall).abs() <= 1e-9);
    let sa = sa_event_study(&sim.data, &cohorts, &SaOptions::default()).unwrap();
    assert!((sa.overall.estimate - sim.truth.overall).abs() <= 1e-8);
}

#[test]
fn placebo_cells_centre_on_zero() {
    // mean over 500 noisy replications of the pooled pre-period cells
    let base = DgpConfig::preset(Preset::Homogeneous);
    let means: Vec<f64> = (0..500u64)
        .map(|r| {
            let sim = generate(&base.clone().with_seed(paneldid::rng::child_seed(77, r))).unwrap();
            let cs = cs_att(&sim.data, &sim.cohorts(), &CsOptions::new(ControlRule::NeverTreated).with_placebo(true)).unwrap();
            let pre: Vec<f64> = cs.entries.iter().filter(|e| e.event_time < -1).map(|e| e.att).collect();
            assert!(!pre.is_empty());
            pre.iter().sum::<f64>() / pre.len() as f64
        })
        .collect();
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let sd = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() <= 3.0 * sd / n.sqrt(), "placebo mean {mean}, mc se {}", sd / n.sqrt());
}
