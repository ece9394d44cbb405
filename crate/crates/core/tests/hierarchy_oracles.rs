//! HEOM dynamics against exact diagonalisation and the golden rule.

use ioheom::bath::{BathOptions, SpectralDensityModel};
use ioheom::fitting::{prony_fit, sample_correlation, split_ri, HeomCoefficients};
use ioheom::hierarchy::{propagate, HeomGenerator, SystemModel};
use ioheom::io::{photon_density, propagate_io, FieldSource, OutputFieldPair};
use ioheom::ode::OdeOptions;
use ioheom::Mat2;

mod common;
use common::exact_dynamics;

#[test]
fn three_mode_dynamics_match_exact_diagonalisation() {
    let (g, w) = ([0.1, 0.1, 0.1], [0.8, 1.0, 1.3]);
    let times: Vec<f64> = (0..=60).map(|k| k as f64 * 0.5).collect();
    let exact: Vec<f64> = exact_dynamics(1.0, &g, &w, &times).iter().map(|e| e.0).collect();
    let co = HeomCoefficients::from_discrete_modes(&g, &w);
    let gen = HeomGenerator::new(SystemModel::qubit(1.0), co, 6, 100_000).unwrap();
    let opts = OdeOptions { abs_tol: 1e-10, rel_tol: 1e-9, ..Default::default() };
    let tr = propagate(&gen, &Mat2::excited(), &times, &opts);
    assert!(tr.is_complete());
    let heom = tr.expectation(&Mat2::sigma_z());
    let worst = heom.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 2e-3, "max |Δσz| = {worst}");
    // the dynamics are far from trivial over this window
    assert!(exact.iter().cloned().fold(1.0, f64::min) < 0.0);
}

#[test]
fn mode_occupations_match_exact_diagonalisation() {
    let (g, w) = ([0.1, 0.1, 0.1], [0.8, 1.0, 1.3]);
    let times: Vec<f64> = (0..=10).map(|k| k as f64 * 2.0).collect();
    let exact = exact_dynamics(1.0, &g, &w, &times);
    let co = HeomCoefficients::from_discrete_modes(&g, &w);
    let gen = HeomGenerator::new(SystemModel::qubit(1.0), co, 6, 100_000).unwrap();
    let opts = OdeOptions { abs_tol: 1e-10, rel_tol: 1e-9, ..Default::default() };
    let mut worst = 0.0f64;
    for (t, e) in times.iter().zip(&exact) {
        for j in 0..3 {
            let src = FieldSource::DiscreteMode { coupling: g[j], frequency: w[j] };
            let pair = OutputFieldPair::new(0.0, *t, 1.0, src).unwrap();
            let st = propagate_io(&gen, &pair, &Mat2::excited(), &opts).unwrap();
            let n = photon_density(&pair, &st);
            worst = worst.max((n.occupation - e.1[j]).abs());
        }
    }
    assert!(worst < 1e-3, "max |Δn| = {worst}");
    assert!(exact.iter().map(|e| e.1[1]).fold(0.0, f64::max) > 0.1);
}

#[test]
fn weak_ohmic_decay_follows_golden_rule() {
    let (lambda, omega_c, omega_s) = (0.01, 2.0, 1.0);
    let model = SpectralDensityModel::ohmic(lambda, omega_c, 1.0);
    let opts = BathOptions::default();
    let samples = sample_correlation(&model, f64::INFINITY, 30.0, 301, &opts).unwrap();
    let fit = prony_fit(&samples, 6).unwrap();
    let gen = HeomGenerator::new(SystemModel::qubit(omega_s), split_ri(&fit), 3, 100_000).unwrap();
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * 5.0).collect();
    let tr = propagate(&gen, &Mat2::excited(), &times, &OdeOptions::default());
    assert!(tr.is_complete());
    let rate = 2.0 * model.eval_j(omega_s).unwrap();
    for (t, sz) in times.iter().zip(tr.expectation(&Mat2::sigma_z())) {
        let want = -1.0 + 2.0 * (-rate * t).exp();
        assert!((sz - want).abs() < 1.5e-2, "t = {t}: {sz} vs {want}");
    }
}
