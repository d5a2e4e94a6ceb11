use ghzbayes::adaptive::{self, Evaluator, MeasurementPlan, OptimizerConfig};
use ghzbayes::partitions::Partition;
use ghzbayes::prior;
use proptest::prelude::*;

fn plan_with(p: &str, rotations: &[f64]) -> MeasurementPlan {
    let p: Partition = p.parse().unwrap();
    let mut plan = MeasurementPlan::zeros(&p).unwrap();
    for (r, x) in plan.rotations.iter_mut().zip(rotations.iter().cycle()) {
        *r = *x;
    }
    plan
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn branch_probabilities_sum_to_one(
        rot in prop::collection::vec(-3.2f64..3.2, 15),
        phi in -6.0f64..6.0,
        contrast in 0.0f64..1.0,
    ) {
        let plan = plan_with("1x4+1x2+2x1", &rot);
        let g = prior::gaussian_for(0.7, 8).unwrap();
        let ev = Evaluator::for_plan(&g, &plan).with_contrast(vec![contrast; 4]);
        let total: f64 = (0..16).map(|b| ev.branch_probability(&plan.rotations, b, phi)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let mut by_string = 0.0;
        for b in 0..16usize {
            let s = adaptive::bit_string(b, 4);
            by_string += adaptive::branch_probability(&plan, &s, phi).unwrap();
        }
        prop_assert!((by_string - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences(rot in prop::collection::vec(-1.5f64..1.5, 7)) {
        let plan = plan_with("1x4+2x1", &rot);
        let g = prior::gaussian_for(0.5, 6).unwrap();
        let grad = adaptive::bmse_gradient(&plan, &g);
        let h = 1e-5;
        for i in 0..plan.rotations.len() {
            let mut up = plan.clone();
            up.rotations[i] += h;
            let mut dn = plan.clone();
            dn.rotations[i] -= h;
            let fd = (adaptive::bmse(&up, &g) - adaptive::bmse(&dn, &g)) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() <= 1e-6, "node {}: {} vs {}", i, fd, grad[i]);
        }
    }
}

#[test]
fn bmse_is_prior_average_of_mse_curve() {
    let g = prior::gaussian_for(0.6, 8).unwrap();
    let plan = adaptive::initial_plan(&"1x4+1x2+2x1".parse().unwrap(), &g).unwrap();
    let curve = adaptive::mse_curve(&plan, &g, &g.nodes);
    let avg: f64 = curve.iter().zip(g.mass()).map(|(m, w)| m * w).sum();
    assert!((avg - adaptive::bmse(&plan, &g)).abs() < 1e-12);
}

#[test]
fn bmse_equals_prior_variance_minus_gain() {
    // Independent evaluation: walk every branch, accumulate posterior moments on the grid.
    let g = prior::gaussian_for(0.7, 6).unwrap();
    let plan = plan_with("1x2+2x1", &[0.3, -0.2, 0.9, 0.1, -1.1, 0.4, 0.0]);
    let depth = plan.order.len();
    let mut gain = 0.0;
    for b in 0..(1usize << depth) {
        let (mut a, mut z) = (0.0, 0.0);
        for (&x, &w) in g.nodes.iter().zip(g.mass()) {
            let mut p = 1.0;
            for d in 0..depth {
                let prefix = b >> (depth - d);
                let bit = b >> (depth - d - 1) & 1;
                let r = plan.rotations[MeasurementPlan::node_index(d, prefix)];
                let c = (plan.order[d] as f64 * (x - r)).cos();
                p *= 0.5 * (1.0 + if bit == 0 { c } else { -c });
            }
            a += w * p * x;
            z += w * p;
        }
        gain += a * a / z;
    }
    let expect = g.second_moment() - gain;
    assert!((adaptive::bmse(&plan, &g) - expect).abs() < 1e-13);
}

#[test]
fn optimisation_never_worsens_the_start() {
    let g = prior::gaussian_for(0.7, 9).unwrap();
    let plan = adaptive::initial_plan(&"1x4+1x2+3x1".parse().unwrap(), &g).unwrap();
    let cfg = OptimizerConfig { restarts: 3, max_steps: 400, ..Default::default() };
    let o = adaptive::optimize_plan(&plan, &g, &cfg);
    assert!(o.bmse <= adaptive::bmse(&plan, &g) + 1e-15);
    assert!((adaptive::bmse(&o.plan, &g) - o.bmse).abs() < 1e-14);
    assert_eq!(o.restarts.len(), 3);
    let again = adaptive::optimize_plan(&plan, &g, &cfg);
    assert_eq!(again.plan.rotations, o.plan.rotations);
}

#[test]
fn plan_json_round_trips() {
    let plan = plan_with("1x2+2x1", &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
    let back = MeasurementPlan::from_json(&plan.to_json()).unwrap();
    assert_eq!(back, plan);
    assert_eq!(plan.rotation("01").unwrap(), 0.5);
}

#[test]
fn ranking_is_deterministic_and_sorted() {
    let g = prior::gaussian_for(0.7, 12).unwrap();
    let (a, _) = adaptive::rank_partitions(12, &g, None, 1_000_000).unwrap();
    let (b, _) = adaptive::rank_partitions(12, &g, None, 1_000_000).unwrap();
    assert_eq!(a, b);
    assert!(a.windows(2).all(|w| w[0].1 <= w[1].1 + 1e-12 * w[1].1));
}
