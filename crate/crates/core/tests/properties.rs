mod common;

use std::f64::consts::{PI, TAU};

use hyperent::analyzers::{tomography_plan, AnalyzerOptions, AnalyzerSetting};
use hyperent::counts::{expected_coincidence_rate, expected_setting, Exposure, RunSeed};
use hyperent::hilbert::{self, expectation, purity, DensityMatrix, Layout, Observable, Pauli};
use hyperent::metrics::{self, chsh_horodecki, dephasing_closed_form, TSIRELSON_BOUND};
use hyperent::state::{
    bell_for, dephased_bell, marginal, marginal_purity_closed_form, noisy_he_state, Dof,
    NoiseParams,
};
use hyperent::tomo::{mle_reconstruct, MleOptions, Observation, TomographyInput};
use proptest::prelude::*;

fn dof_strategy() -> impl Strategy<Value = Dof> {
    prop_oneof![Just(Dof::TimeBin), Just(Dof::FrequencyBin)]
}

fn fringe_visibility(rho: &DensityMatrix, dof: Dof, car: f64) -> f64 {
    let exposure = Exposure {
        pair_rate_hz: 1000.0,
        integration_time_s: 1.0,
        car,
    };
    let samples: Vec<(f64, f64)> = (0..16)
        .map(|k| {
            let phase = TAU * k as f64 / 16.0;
            let ps = AnalyzerSetting::interferometric(dof, phase, 0.0)
                .projectors(&AnalyzerOptions::default())
                .unwrap();
            let r = expected_setting(rho, &ps, &exposure).unwrap();
            (phase, r[0].expected_rate)
        })
        .collect();
    metrics::visibility_from_fringe(&samples)
        .unwrap()
        .visibility
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn purity_is_unitarily_invariant(seed in any::<u64>(), rank in 1usize..=4) {
        let mut rng = common::rng(seed);
        let rho = common::random_state(&mut rng, Layout::time_bin(), rank);
        let u = common::random_unitary(&mut rng, 4);
        let rotated = DensityMatrix::new(&u * rho.matrix() * u.adjoint(), Layout::time_bin()).unwrap();
        prop_assert!((purity(&rho) - purity(&rotated)).abs() < 1e-12);
        prop_assert!(purity(&rho) <= 1.0 + 1e-12 && purity(&rho) >= 0.25 - 1e-12);
    }

    #[test]
    fn noisy_state_is_physical(mu_tb in 0.0f64..=1.0, mu_fb in 0.0f64..=1.0, p in 0.0f64..0.999) {
        let rho = noisy_he_state(&NoiseParams::new(mu_tb, mu_fb, p).unwrap()).unwrap();
        let ev = rho.eigenvalues();
        prop_assert!(ev.iter().all(|&v| v >= -1e-12));
        prop_assert!((hilbert::trace(rho.matrix()).re - 1.0).abs() < 1e-12);
        prop_assert!(hilbert::hermitian_defect(rho.matrix()) < 1e-14);
        for (dof, mu) in [(Dof::TimeBin, mu_tb), (Dof::FrequencyBin, mu_fb)] {
            let m = marginal(&rho, dof).unwrap();
            prop_assert!((purity(&m) - marginal_purity_closed_form(mu, p)).abs() < 1e-12);
        }
    }

    #[test]
    fn chsh_never_exceeds_tsirelson(seed in any::<u64>(), rank in 1usize..=4) {
        let mut rng = common::rng(seed);
        let rho = common::random_state(&mut rng, Layout::frequency_bin(), rank);
        let s = chsh_horodecki(&rho).unwrap();
        prop_assert!(s <= TSIRELSON_BOUND + 1e-9);
        prop_assert!(s >= 0.0);
    }

    #[test]
    fn witness_is_strictly_decreasing(vals in prop::array::uniform4(-1.0f64..=1.0), k in 0usize..4, dv in 1e-6f64..1.0) {
        let w0 = metrics::witness(&vals, 2).unwrap();
        let mut bumped = vals;
        bumped[k] += dv;
        let w1 = metrics::witness(&bumped, 2).unwrap();
        prop_assert!(w1 < w0);
        prop_assert!((w0 - w1 - dv).abs() < 1e-12);
    }

    #[test]
    fn dephasing_closed_forms(mu in 0.0f64..=1.0, p in 0.0f64..0.999, dof in dof_strategy()) {
        let rho = noisy_he_state(&NoiseParams::new(mu, mu, p).unwrap()).unwrap();
        let m = marginal(&rho, dof).unwrap();
        let (f, xx) = dephasing_closed_form(mu, p);
        let fid = hilbert::fidelity_pure(&m, &bell_for(dof)).unwrap();
        let obs = Observable::pauli_string(&[Pauli::X, Pauli::X], dof.layout()).unwrap();
        prop_assert!((fid - f).abs() < 1e-10);
        prop_assert!((expectation(&m, &obs).unwrap() - xx).abs() < 1e-10);
    }

    #[test]
    fn rates_are_linear(seed in any::<u64>(), a in 0.0f64..=1.0, rate in 1.0f64..1e5, dof in dof_strategy()) {
        let mut rng = common::rng(seed);
        let r1 = common::random_state(&mut rng, dof.layout(), 2);
        let r2 = common::random_state(&mut rng, dof.layout(), 4);
        let mix = r1.mix(&r2, a).unwrap();
        for p in tomography_plan(dof) {
            let lhs = expected_coincidence_rate(&mix, &p, rate).unwrap();
            let rhs = (1.0 - a) * expected_coincidence_rate(&r1, &p, rate).unwrap()
                + a * expected_coincidence_rate(&r2, &p, rate).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * rate);
            let doubled = expected_coincidence_rate(&r1, &p, 2.0 * rate).unwrap();
            prop_assert!((doubled - 2.0 * expected_coincidence_rate(&r1, &p, rate).unwrap()).abs() < 1e-9 * rate);
        }
    }

    #[test]
    fn signal_phase_is_invisible_to_the_idler(seed in any::<u64>(), ts in 0.0f64..TAU, ti in 0.0f64..TAU, dof in dof_strategy()) {
        let mut rng = common::rng(seed);
        let rho = common::random_state(&mut rng, dof.layout(), 3);
        // idler rate at phase ti, summed over both signal outcomes θ and θ + π
        let marginal_rate = |ts: f64| -> f64 {
            [0.0, PI]
                .iter()
                .map(|ds| {
                    AnalyzerSetting::interferometric(dof, ts + ds, ti)
                        .projectors(&AnalyzerOptions::default())
                        .unwrap()
                        .iter()
                        .map(|p| expected_coincidence_rate(&rho, p, 1.0).unwrap())
                        .sum::<f64>()
                })
                .sum()
        };
        prop_assert!((marginal_rate(ts) - marginal_rate(0.0)).abs() < 1e-12);
    }

    #[test]
    fn accidentals_never_raise_visibility(mu in 0.05f64..=1.0, car in 1.0f64..200.0, dof in dof_strategy()) {
        let rho = dephased_bell(mu, dof).unwrap();
        let clean = fringe_visibility(&rho, dof, f64::INFINITY);
        let noisy = fringe_visibility(&rho, dof, car);
        prop_assert!((clean - mu).abs() < 1e-9);
        prop_assert!(noisy <= clean + 1e-12);
    }
}

fn random_input(seed: u64, dof: Dof, mean: f64) -> TomographyInput {
    use rand::Rng;
    let mut rng = common::rng(seed);
    let obs = tomography_plan(dof)
        .into_iter()
        .map(|setting| Observation {
            setting,
            counts: (rng.random::<f64>() * mean).floor(),
            integration_time_s: 1.0,
        })
        .collect();
    TomographyInput::new(dof, obs, 30.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mle_is_always_physical_and_ascending(seed in any::<u64>(), dof in dof_strategy(), mean in 1.0f64..1e4) {
        let input = random_input(seed, dof, mean);
        prop_assume!(input.total_counts() > 0.0);
        let rec = mle_reconstruct(&input, &MleOptions::default()).unwrap();
        let rho = rec.rho();
        prop_assert!(rho.eigenvalues().iter().all(|&v| v >= -1e-12));
        prop_assert!((hilbert::trace(rho.matrix()).re - 1.0).abs() < 1e-12);
        prop_assert!(rec.trace.last().unwrap() >= rec.trace.first().unwrap());
        for w in rec.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
        }
    }

    #[test]
    fn mle_ignores_setting_order(seed in any::<u64>(), dof in dof_strategy(), shuffle in any::<u64>()) {
        use rand::seq::SliceRandom;
        let input = random_input(seed, dof, 500.0);
        let mut obs = input.observations().to_vec();
        obs.shuffle(&mut common::rng(shuffle));
        let permuted = TomographyInput::new(dof, obs, 30.0).unwrap();
        let a = mle_reconstruct(&input, &MleOptions::default()).unwrap();
        let b = mle_reconstruct(&permuted, &MleOptions::default()).unwrap();
        prop_assert_eq!(a.rho().matrix(), b.rho().matrix());
        prop_assert_eq!(a.log_likelihood.to_bits(), b.log_likelihood.to_bits());
    }
}

#[test]
fn resampled_mean_is_close_to_point_estimate() {
    use hyperent::counts::sample_settings;
    use hyperent::tomo::{mc_error, Resampling};
    let rho = dephased_bell(0.9, Dof::TimeBin).unwrap();
    let exposure = Exposure {
        pair_rate_hz: 400.0,
        integration_time_s: 10.0,
        car: 30.0,
    };
    let settings = hyperent::analyzers::tomography_settings(Dof::TimeBin);
    let rows = sample_settings(
        &rho,
        &settings,
        &AnalyzerOptions::default(),
        &exposure,
        RunSeed::new(4, 1),
    )
    .unwrap();
    let input = TomographyInput::from_records(Dof::TimeBin, rows, 30.0).unwrap();
    let point = metrics::dof_point(
        mle_reconstruct(&input, &MleOptions::default())
            .unwrap()
            .rho(),
    )
    .unwrap();
    let err = mc_error(
        &input,
        200,
        RunSeed::new(4, 2),
        Resampling::Poisson,
        &MleOptions::default(),
    )
    .unwrap();
    assert!(err.s_parameter > 0.0);
    assert!((err.mean.s_parameter - point.s_parameter).abs() < 2.0 * err.s_parameter);
}
