//! Library results checked against independent computations: quadrature,
//! explicit index loops, interferometer path sums and sampling statistics.

#![allow(clippy::needless_range_loop)]

mod common;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use approx::assert_abs_diff_eq;
use hyperent::analyzers::{ArrivalBin, TbSetting};
use hyperent::counts::{arrival_histogram, sample_counts, Exposure, RunSeed};
use hyperent::device::{
    detuning_for_indistinguishability, lorentzian_overlap, spectral_indistinguishability,
};
use hyperent::hilbert::{partial_trace, CMatrix, DensityMatrix, Layout, Subsystem};
use hyperent::state::{bell_for, dephased_bell, Dof};
use num_complex::Complex64;

/// `⟨a1|a2⟩` of two normalized Lorentzian amplitudes by Simpson quadrature
/// after the substitution `ω = s·tan u`.
fn overlap_quadrature(delta: f64, g1: f64, g2: f64) -> f64 {
    let amp =
        |w: f64, c: f64, g: f64| Complex64::new(g / 2.0, 0.0) / Complex64::new(g / 2.0, -(w - c));
    let s = g1.max(g2);
    let n = 400_000;
    let h = PI / n as f64;
    let mut cross = Complex64::new(0.0, 0.0);
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    for k in 1..n {
        let u = -FRAC_PI_2 + k as f64 * h;
        let w = s * u.tan();
        let jac = s / u.cos().powi(2);
        let coef = if k % 2 == 1 { 4.0 } else { 2.0 };
        let a1 = amp(w, 0.0, g1);
        let a2 = amp(w, delta, g2);
        cross += a1.conj() * a2 * (coef * jac);
        n1 += a1.norm_sqr() * coef * jac;
        n2 += a2.norm_sqr() * coef * jac;
    }
    cross.norm() / (n1 * n2).sqrt()
}

#[test]
fn lorentzian_overlap_matches_quadrature() {
    for &(d, g1, g2) in &[
        (0.0, 1.0, 1.0),
        (1.0, 1.0, 1.0),
        (0.3, 1.942, 1.942),
        (0.7, 1.5, 2.5),
        (2.0, 0.8, 1.1),
    ] {
        let q = overlap_quadrature(d, g1, g2);
        assert_abs_diff_eq!(lorentzian_overlap(d, g1, g2), q, epsilon = 1e-6);
    }
    let mu = spectral_indistinguishability(1.0, 0.0, 1.0, 1.0).unwrap();
    assert_abs_diff_eq!(mu, FRAC_1_SQRT_2, epsilon = 1e-4);
    assert_abs_diff_eq!(
        overlap_quadrature(1.0, 1.0, 1.0),
        FRAC_1_SQRT_2,
        epsilon = 1e-4
    );
}

#[test]
fn equal_detuning_for_measured_indistinguishability() {
    // bisection on the quadrature oracle, common detuning on both photons
    let target = 0.834;
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if overlap_quadrature(mid, 1.0, 1.0).powi(2) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ratio = 0.5 * (lo + hi);
    assert_abs_diff_eq!(ratio, 0.446, epsilon = 1e-3);
    let lw = 1.942;
    let delta = detuning_for_indistinguishability(target, lw).unwrap();
    assert_abs_diff_eq!(delta / lw, ratio, epsilon = 1e-5);
}

fn brute_partial_trace(rho: &CMatrix, keep_tb: bool) -> CMatrix {
    // canonical index = 8·tb_s + 4·tb_i + 2·fb_s + fb_i
    let mut out = CMatrix::zeros(4, 4);
    for a in 0..4 {
        for b in 0..4 {
            for t in 0..4 {
                let (r, c) = if keep_tb {
                    (4 * a + t, 4 * b + t)
                } else {
                    (4 * t + a, 4 * t + b)
                };
                out[(a, b)] += rho[(r, c)];
            }
        }
    }
    out
}

#[test]
fn partial_trace_matches_index_loops() {
    let mut rng = common::rng(11);
    for rank in [1, 3, 16] {
        let rho = common::random_state(&mut rng, Layout::canonical(), rank);
        let tb = partial_trace(&rho, &[Subsystem::TbSignal, Subsystem::TbIdler]).unwrap();
        let fb = partial_trace(&rho, &[Subsystem::FbSignal, Subsystem::FbIdler]).unwrap();
        assert!((tb.matrix() - brute_partial_trace(rho.matrix(), true)).norm() < 1e-13);
        assert!((fb.matrix() - brute_partial_trace(rho.matrix(), false)).norm() < 1e-13);
    }
}

#[test]
fn single_qubit_partial_trace_matches_index_loops() {
    let mut rng = common::rng(12);
    let rho = common::random_state(&mut rng, Layout::canonical(), 4);
    let kept = partial_trace(&rho, &[Subsystem::TbSignal, Subsystem::FbIdler]).unwrap();
    let m = rho.matrix();
    let mut expect = CMatrix::zeros(4, 4);
    for a in 0..2 {
        for d in 0..2 {
            for a2 in 0..2 {
                for d2 in 0..2 {
                    for b in 0..2 {
                        for c in 0..2 {
                            expect[(2 * a + d, 2 * a2 + d2)] +=
                                m[(8 * a + 4 * b + 2 * c + d, 8 * a2 + 4 * b + 2 * c + d2)];
                        }
                    }
                }
            }
        }
    }
    assert!((kept.matrix() - expect).norm() < 1e-13);
}

/// Arrival-bin probabilities at one interferometer output from explicit path
/// amplitudes: each photon takes the short arm (delay 0) or the long arm
/// (delay τ, phase θ), each with amplitude 1/2 at that port.
fn path_oracle(rho: &CMatrix, theta_s: f64, theta_i: f64) -> [[f64; 3]; 3] {
    let arm = |pulse: usize, bin: usize, theta: f64| -> Complex64 {
        match bin as isize - pulse as isize {
            0 => Complex64::new(0.5, 0.0),
            1 => Complex64::from_polar(0.5, theta),
            _ => Complex64::new(0.0, 0.0),
        }
    };
    let mut p = [[0.0; 3]; 3];
    for bs in 0..3 {
        for bi in 0..3 {
            // A_{ab} for pulse pair (a, b) → (bs, bi)
            let amp: Vec<Complex64> = (0..4)
                .map(|ab| arm(ab / 2, bs, theta_s) * arm(ab % 2, bi, theta_i))
                .collect();
            let mut acc = Complex64::new(0.0, 0.0);
            for x in 0..4 {
                for y in 0..4 {
                    acc += rho[(x, y)] * amp[y].conj() * amp[x];
                }
            }
            p[bs][bi] = acc.re;
        }
    }
    p
}

#[test]
fn arrival_histogram_matches_path_enumeration() {
    let mut rng = common::rng(5);
    let exposure = Exposure {
        pair_rate_hz: 1000.0,
        integration_time_s: 1.0,
        car: f64::INFINITY,
    };
    let states = [
        bell_for(Dof::TimeBin).projector(),
        dephased_bell(0.6, Dof::TimeBin).unwrap(),
        common::random_state(&mut rng, Layout::time_bin(), 2),
    ];
    for rho in &states {
        for &(ts, ti) in &[(0.0, 0.0), (0.4, 1.3), (PI, 0.0), (2.5, -0.7)] {
            let setting = TbSetting::interferometric(ts, ti);
            let h = arrival_histogram(rho, &setting, &exposure, RunSeed::new(1, 0)).unwrap();
            let oracle = path_oracle(rho.matrix(), ts, ti);
            for a in 0..3 {
                for b in 0..3 {
                    assert_abs_diff_eq!(h.expected[a][b], 1000.0 * oracle[a][b], epsilon = 1e-9);
                }
            }
        }
    }
}

#[test]
fn middle_bin_minimum_at_opposite_phases() {
    let bell = bell_for(Dof::TimeBin).projector();
    let exposure = Exposure {
        pair_rate_hz: 1000.0,
        integration_time_s: 1.0,
        car: f64::INFINITY,
    };
    let mid = |ts: f64, ti: f64| {
        let h = arrival_histogram(
            &bell,
            &TbSetting::interferometric(ts, ti),
            &exposure,
            RunSeed::new(2, 0),
        )
        .unwrap();
        h.expected[ArrivalBin::Middle.index()][ArrivalBin::Middle.index()]
    };
    assert!(mid(PI / 2.0, PI / 2.0).abs() < 1e-12);
    assert!(mid(0.3, PI - 0.3).abs() < 1e-12);
    for k in 0..16 {
        let ts = k as f64 * PI / 8.0;
        assert!(mid(ts, 0.0) >= mid(PI, 0.0) - 1e-12);
    }
    // the side bins carry no interference
    let h = arrival_histogram(
        &bell,
        &TbSetting::interferometric(1.0, 2.0),
        &exposure,
        RunSeed::new(2, 0),
    )
    .unwrap();
    assert_abs_diff_eq!(h.expected[0][0], 1000.0 / 32.0, epsilon = 1e-9);
    assert_abs_diff_eq!(h.expected[0][2], 0.0, epsilon = 1e-12);
}

#[test]
fn histogram_total_closes_the_budget() {
    let rho = dephased_bell(0.93, Dof::TimeBin).unwrap();
    let exposure = Exposure {
        pair_rate_hz: 4700.0,
        integration_time_s: 10.0,
        car: 30.0,
    };
    let h = arrival_histogram(
        &rho,
        &TbSetting::interferometric(0.2, 0.0),
        &exposure,
        RunSeed::new(3, 0),
    )
    .unwrap();
    // cell weights per photon are 1/4, 1/2, 1/4, so the accidental floor sums to rate·t/(2·CAR)
    let signal: f64 = path_oracle(rho.matrix(), 0.2, 0.0).iter().flatten().sum();
    let mean = 4700.0 * 10.0 * (signal + 1.0 / 60.0);
    assert_abs_diff_eq!(h.expected_total(), mean, epsilon = 1e-9);
    let total = h.total() as f64;
    assert!(
        (total - mean).abs() < 5.0 * mean.sqrt(),
        "{total} vs {mean}"
    );
}

#[test]
fn poisson_sampling_statistics() {
    let base = RunSeed::new(99, 0);
    let n = 10_000;
    let draws: Vec<f64> = (0..n)
        .map(|k| sample_counts(100.0, 10.0, base.child(k)).unwrap() as f64)
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sigma_mean = (1000.0 / n as f64).sqrt();
    assert!((mean - 1000.0).abs() < 4.0 * sigma_mean, "mean {mean}");
    assert!(
        (0.9..=1.1).contains(&(var / mean)),
        "dispersion {}",
        var / mean
    );
    assert_eq!(sample_counts(0.0, 10.0, base).unwrap(), 0);
    assert_eq!(
        sample_counts(100.0, 10.0, base).unwrap(),
        sample_counts(100.0, 10.0, base).unwrap()
    );
}

#[test]
fn mixed_density_matrix_oracle_is_consistent() {
    // one output port of each interferometer: half of each photon for the mixed state
    let rho = DensityMatrix::maximally_mixed(Layout::time_bin());
    let p = path_oracle(rho.matrix(), 0.7, 1.1);
    let total: f64 = p.iter().flatten().sum();
    assert_abs_diff_eq!(total, 0.25, epsilon = 1e-12);
}
