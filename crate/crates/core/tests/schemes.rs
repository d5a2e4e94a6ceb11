use ghzbayes::mc::McConfig;
use ghzbayes::prior;
use ghzbayes::schemes::{self, Estimator, FixedBlockConfig, VaryingBlockConfig};

#[test]
fn varying_block_sampling_agrees_with_exact_tree() {
    let cfg = VaryingBlockConfig::new(1);
    let g = prior::gaussian_for(0.7, cfg.n_total()).unwrap();
    let exact = schemes::varying_block_bmse(&cfg, &g, true, &McConfig::default()).unwrap();
    assert!(exact.samples == 0);
    let steps = cfg.steps(true);
    let mc = schemes::parity_mc(&g, &steps, &vec![1.0; steps.len()], &McConfig { samples: 200_000, seed: 2 });
    assert!((mc.mean - exact.mean).abs() < 4.0 * mc.std_err, "{} vs {} ± {}", exact.mean, mc.mean, mc.std_err);
}

#[test]
fn rotations_help_varying_block() {
    let cfg = VaryingBlockConfig::new(2);
    let g = prior::gaussian_for(0.7, cfg.n_total()).unwrap();
    let mc = McConfig::default();
    let with = schemes::varying_block_bmse(&cfg, &g, true, &mc).unwrap().mean;
    let without = schemes::varying_block_bmse(&cfg, &g, false, &mc).unwrap().mean;
    assert!(with < without);
}

#[test]
fn bayes_estimator_beats_bit_by_bit() {
    let cfg = FixedBlockConfig::new(1);
    let g = prior::gaussian_for(0.7, cfg.n_total()).unwrap();
    let mc = McConfig { samples: 50_000, seed: 4 };
    let bayes = schemes::fixed_block_bmse(&cfg, &g, Estimator::Bayes, &mc);
    let bit = schemes::fixed_block_bmse(&cfg, &g, Estimator::BitByBit, &mc);
    assert!(bayes.mean < bit.mean);
}

#[test]
fn plateaus_order_and_grow() {
    let mut last = (0.0, 0.0);
    for d in [0.8, 1.0, 1.5, 2.0, 3.0] {
        let (hl, sql) = (schemes::plateau_hl(d), schemes::plateau_sql(d));
        assert!(hl <= sql && hl > last.0 && sql > last.1);
        assert!(sql < d * d);
        last = (hl, sql);
    }
}

#[test]
fn css_approaches_its_plateau_from_above() {
    let d = 1.05;
    let plateau = schemes::plateau_sql(d);
    let mut last = f64::INFINITY;
    for n in [20, 80, 200] {
        let b = schemes::css_bmse(n, &prior::gaussian_for(d, n).unwrap()).unwrap();
        assert!(b > plateau && b < last);
        last = b;
    }
}
