use ghzbayes::clock::{self, ClockConfig, ClockModel, Protocol};
use ghzbayes::{fit, schemes};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

#[test]
fn slip_variance_matches_sampling() {
    for d in [2.0, 3.0] {
        let normal = Normal::new(0.0, d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 2_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let phi: f64 = normal.sample(&mut rng);
            let slip = phi - schemes::wrap(phi);
            acc += slip * slip;
        }
        let mc = acc / n as f64;
        let exact = clock::slip_variance(d);
        assert!((mc / exact - 1.0).abs() < 0.01, "δφ = {d}: {mc} vs {exact}");
    }
}

#[test]
fn ghz_effective_variance_agrees_with_closed_form_bmse() {
    for n in [1, 3, 10] {
        for d in [0.02, 0.05, 0.09] {
            let bmse = schemes::ghz_parity_closed(n, d);
            let eff = clock::effective_uncertainty(bmse, d).unwrap();
            let v = clock::ghz_effective_variance(n, d, 1.0);
            assert!((eff * eff / v - 1.0).abs() < 1e-9, "N = {n}, δφ = {d}");
        }
    }
}

fn model(p: Protocol) -> ClockModel {
    ClockModel::new(ClockConfig { gamma_lo: 1.0, gamma_ind: 1e-4, omega_a: 1.0, n_atoms: 50, protocol: p }).unwrap()
}

fn slope(m: &ClockModel, taus: &[f64]) -> f64 {
    let s: Vec<f64> = taus.iter().map(|&t| m.allan(t).unwrap().sigma_y).collect();
    fit::power_law_exponent(taus, &s).unwrap()
}

#[test]
fn allan_exponents_of_uncorrelated_clock() {
    let m = model(Protocol::Uncorrelated);
    let short = slope(&m, &[1e-3, 2e-3, 5e-3, 1e-2]);
    let long = slope(&m, &[100.0, 200.0, 500.0, 1000.0]);
    assert!((short + 1.0).abs() < 0.05, "short-time exponent {short}");
    assert!((long + 0.5).abs() < 0.05, "long-time exponent {long}");
}

#[test]
fn curves_respect_the_fundamental_limit() {
    let taus = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
    for p in [Protocol::Uncorrelated, Protocol::Ghz, Protocol::BestClassical] {
        let m = model(p);
        for &t in &taus {
            let pt = m.allan(t).unwrap();
            assert!(pt.t_opt <= t * (1.0 + 1e-12));
            assert!(pt.sigma_y >= clock::fundamental_limit(t, 50, 1e-4, 1.0), "{p} at τ = {t}");
        }
    }
}

#[test]
fn oqc_is_heisenberg_limited() {
    let m = model(Protocol::Oqc);
    let pt = m.allan(10.0).unwrap();
    assert!((pt.sigma_y - PI / 50.0 / 10.0).abs() < 1e-15);
}

#[test]
fn optimum_is_the_grid_minimum_or_better() {
    let m = model(Protocol::Uncorrelated);
    for t in [0.5, 5.0, 50.0] {
        let best = m.grid_profile(t).iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        assert!(m.allan(t).unwrap().sigma_y <= best * (1.0 + 1e-12));
    }
}
