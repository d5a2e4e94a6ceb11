use ghzbayes::adaptive::Evaluator;
use ghzbayes::prior;
use ghzbayes::schemes::wrap;
use ghzbayes::unwind::{self, ExtendedPartition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

#[test]
fn rescaling_identity_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..50 {
        let blocks: Vec<(i32, u32)> =
            (0..rng.random_range(1..4)).map(|_| (rng.random_range(-3..3), rng.random_range(1..3))).collect();
        let ep = ExtendedPartition::new(blocks, false).unwrap();
        let l = ep.l_max() + rng.random_range(0..2);
        let d = rng.random_range(0.2..3.0);
        let freqs = ep.frequencies();
        let nodes = 2 * (1usize << (1 + ep.blocks()[0].0.max(0))) * (1 << l);
        let g = prior::gaussian_for(d, nodes).unwrap();
        let rot: Vec<f64> = (0..(1usize << freqs.len()) - 1).map(|_| rng.random_range(-PI..PI)).collect();

        let original = unwind::extended_bmse(&ep, &g, &rot);
        let s = 0.5f64.powi(l as i32);
        let scaled_prior = g.scaled(s);
        let scaled_freqs: Vec<f64> = freqs.iter().map(|f| f / s).collect();
        let r = unwind::rescale(&ep, l).unwrap();
        let mut from_partition: Vec<f64> = r.partition.block_sizes().iter().map(|&k| k as f64).collect();
        let mut sorted = scaled_freqs.clone();
        from_partition.sort_by(f64::total_cmp);
        sorted.sort_by(f64::total_cmp);
        assert_eq!(from_partition, sorted, "case {case}");
        let rescaled = r.scale_factor
            * Evaluator::with_frequencies(&scaled_prior, &scaled_freqs)
                .bmse(&unwind::rescale_rotations(&rot, l));
        assert!(
            (original - rescaled).abs() <= 1e-10 * original.max(1.0),
            "case {case}: {ep} l={l} δφ={d}: {original} vs {rescaled}"
        );
        assert_eq!(r.prior_scale, s);
    }
}

fn level_estimates(phi: f64, errs: &[f64]) -> Vec<f64> {
    errs.iter().enumerate().map(|(j, e)| wrap(phi / 2f64.powi(j as i32) + e)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fold_number_survives_errors_below_a_third_of_pi(
        l in 1usize..6,
        u in -1.0f64..1.0,
        errs in prop::collection::vec(-0.999f64..0.999, 6),
    ) {
        // Keep the deepest level away from the branch cut so its estimate does not wrap.
        let phi = u * (2.0 * PI / 3.0) * 2f64.powi(l as i32);
        let errs: Vec<f64> = errs[..=l].iter().map(|e| e * PI / 3.0).collect();
        let betas = level_estimates(phi, &errs);
        let p = unwind::estimate_p(&betas).unwrap();
        // φ − 2πP must agree with the level-0 estimate up to its own error.
        let resid = phi - 2.0 * PI * p as f64 - betas[0];
        prop_assert!(resid.abs() < PI / 3.0 + 1e-9, "P = {}, residual {}", p, resid);
    }

    #[test]
    fn exact_levels_give_the_true_fold(l in 0usize..8, u in -0.999f64..0.999) {
        let phi = u * PI * 2f64.powi(l as i32);
        let betas = level_estimates(phi, &vec![0.0; l + 1]);
        let p = unwind::estimate_p(&betas).unwrap();
        let theta = phi - 2.0 * PI * p as f64;
        prop_assert!((-PI - 1e-9..=PI + 1e-9).contains(&theta));
    }
}

#[test]
fn half_pi_errors_can_break_the_fold() {
    // |δ| < π/2 at both levels, yet the correction rounds the wrong way.
    let betas = level_estimates(0.0, &[-0.4 * PI, 0.4 * PI]);
    assert_eq!(unwind::estimate_p(&betas).unwrap(), 1);
}

fn integrate(f: impl Fn(f64) -> f64) -> f64 {
    let n = 4000;
    let h = 2.0 * PI / n as f64;
    let mut s = f(-PI) + f(PI - 1e-15);
    for i in 1..n {
        s += f(-PI + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn fold_posterior_is_normalised() {
    for (d, p) in [(3.0, 1), (3.0, 0), (1.0, -2), (0.4, 1), (20.0, 5)] {
        let post = unwind::posterior_after_p(d, p).unwrap();
        let z = integrate(|t| post.density(t));
        assert!((z - 1.0).abs() < 1e-8, "δφ = {d}, P = {p}: {z}");
    }
    assert!(unwind::posterior_after_p(0.0, 0).is_err());
}

#[test]
fn fold_posterior_matches_sampling() {
    let (d, pm) = (3.0, 1i64);
    let post = unwind::posterior_after_p(d, pm).unwrap();
    let normal = Normal::new(0.0, d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bins = 20;
    let mut hist = vec![0usize; bins];
    let mut kept = 0usize;
    for _ in 0..1_000_000 {
        let phi: f64 = normal.sample(&mut rng);
        let p = ((phi + PI) / (2.0 * PI)).floor() as i64;
        if p == pm {
            let theta = phi - 2.0 * PI * pm as f64;
            hist[(((theta + PI) / (2.0 * PI)) * bins as f64) as usize] += 1;
            kept += 1;
        }
    }
    let w = 2.0 * PI / bins as f64;
    for (b, &c) in hist.iter().enumerate() {
        let lo = -PI + b as f64 * w;
        let expect = (0..=100).map(|i| post.density(lo + w * (i as f64 + 0.5) / 101.0)).sum::<f64>() / 101.0 * w;
        let got = c as f64 / kept as f64;
        let se = (expect * (1.0 - expect) / kept as f64).sqrt();
        assert!((got - expect).abs() < 5.0 * se, "bin {b}: {got} vs {expect}");
    }
}

#[test]
fn wide_prior_folds_to_uniform() {
    let post = unwind::posterior_after_p(100.0, 0).unwrap();
    for i in 0..50 {
        let t = -PI + 2.0 * PI * i as f64 / 50.0;
        assert!((post.density(t) * 2.0 * PI - 1.0).abs() < 1e-3);
    }
}

#[test]
fn adaptive_unwinding_beats_non_adaptive() {
    let g = prior::gaussian_for(1.4, 64).unwrap();
    let mc = ghzbayes::mc::McConfig { samples: 4000, seed: 5 };
    let (_, a) = unwind::best_allocation(45, &g, unwind::UnwindMode::Adaptive, &mc).unwrap();
    let (_, n) = unwind::best_allocation(45, &g, unwind::UnwindMode::NonAdaptive, &mc).unwrap();
    assert_eq!(a.n_total, 45);
    assert_eq!(n.n_total, 45);
    assert!(a.bmse.mean < n.bmse.mean);
}
