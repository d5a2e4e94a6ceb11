use ghzbayes::oqi::{self, OqiOptions};
use ghzbayes::{adaptive, prior, schemes};

#[test]
fn oqi_improves_with_every_qubit() {
    let mut prev = f64::INFINITY;
    for n in 1..=20 {
        let g = prior::gaussian_for(0.7, n + 1).unwrap();
        let b = oqi::solve_oqi(n, &g, &OqiOptions::default()).unwrap().bmse;
        assert!(b < prev, "N = {n}: {b} !< {prev}");
        prev = b;
    }
}

#[test]
fn oqi_dominates_every_partition_state() {
    for n in [2, 5, 9, 16, 21, 24] {
        let g = prior::gaussian_for(0.7, n).unwrap();
        let q = oqi::solve_oqi(n, &g, &OqiOptions::default()).unwrap().bmse;
        let (ranked, truncated) = adaptive::rank_partitions(n, &g, None, 1_000_000).unwrap();
        assert!(!truncated);
        for (p, b) in &ranked {
            assert!(q <= b * (1.0 + 1e-10), "N = {n}: {p} beats the OQI ({b} < {q})");
        }
    }
}

#[test]
fn random_starts_do_not_beat_the_sine_start_by_much() {
    let g = prior::gaussian_for(0.7, 10).unwrap();
    let a = oqi::solve_oqi(10, &g, &OqiOptions::default()).unwrap();
    let b = oqi::solve_oqi(10, &g, &OqiOptions { random_starts: 4, seed: 3, ..Default::default() }).unwrap();
    assert!(b.bmse <= a.bmse);
    assert!((a.bmse - b.bmse).abs() < 1e-8 * a.bmse);
    assert!(a.converged);
}

#[test]
fn mse_curve_averages_to_bmse() {
    let g = prior::gaussian_for(0.5, 8).unwrap();
    let sol = oqi::solve_oqi(8, &g, &OqiOptions::default()).unwrap();
    let curve = oqi::mse_curve(&sol, &g.nodes);
    let avg: f64 = curve.iter().zip(g.mass()).map(|(m, w)| m * w).sum();
    assert!((avg - sol.bmse).abs() < 1e-10, "{avg} vs {}", sol.bmse);
}

#[test]
fn ghz_closed_form_matches_numerics() {
    for n in [1, 2, 4, 8, 16] {
        for d in [0.05, 0.1, 0.3, 0.7] {
            let g = prior::gaussian_for(d, n).unwrap();
            let num = schemes::ghz_parity_bmse(n, &g);
            let closed = schemes::ghz_parity_closed(n, d);
            assert!((num - closed).abs() <= 1e-8, "N = {n}, δφ = {d}: {num} vs {closed}");
        }
    }
}

#[test]
fn css_probabilities_are_binomial() {
    for n in [1, 5, 12] {
        for phi in [-1.0, 0.0, 0.4] {
            let p = schemes::css_probabilities(n, phi);
            let s = 0.5 * (1.0 + f64::sin(phi));
            let mut c = 1.0;
            for (x, px) in p.iter().enumerate() {
                let expect = c * s.powi(x as i32) * (1.0 - s).powi((n - x) as i32);
                assert!((px - expect).abs() < 1e-13);
                c = c * (n - x) as f64 / (x + 1) as f64;
            }
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }
}

#[test]
fn css_curve_averages_to_bmse() {
    let g = prior::gaussian_for(0.7, 21).unwrap();
    let curve = schemes::css_mse_curve(21, &g, &g.nodes).unwrap();
    let avg: f64 = curve.iter().zip(g.mass()).map(|(m, w)| m * w).sum();
    assert!((avg - schemes::css_bmse(21, &g).unwrap()).abs() < 1e-12);
}

#[test]
fn sine_state_read_by_qft_is_centred() {
    let q = schemes::sine_qft_check(40, 0.0).unwrap();
    assert!((q.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    // Outcomes are symmetric about k = 0 modulo N + 1.
    for k in 1..=20 {
        assert!((q.probabilities[k] - q.probabilities[41 - k]).abs() < 1e-12);
    }
}
