//! Reference protocols and closed-form baselines.

use crate::adaptive::{Evaluator, MeasurementPlan, MAX_COPIES};
use crate::error::{Error, Result};
use crate::mc::{self, Estimate, McConfig};
use crate::partitions::Partition;
use crate::prior::PriorGrid;
use crate::quadrature;
use std::f64::consts::PI;

/// Outcomes with posterior mass below this contribute nothing.
const EMPTY: f64 = 1e-300;

/// Exact enumeration is used up to this many outcomes.
pub const EXACT_OUTCOMES: f64 = 1e7;

/// δφ² − Σ_x A_x²/B_x from per-outcome moments.
pub fn bmse_from_moments(prior: &PriorGrid, moments: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let gain: f64 = moments.into_iter().map(|(a, b)| if b > EMPTY { a * a / b } else { 0.0 }).sum();
    prior.second_moment() - gain
}

/// Variance ratio expressed in decibels.
pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

fn ln_binomial_row(n: usize) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    for x in 1..=n {
        row[x] = row[x - 1] + ((n - x + 1) as f64).ln() - (x as f64).ln();
    }
    row
}

/// Binomial outcome law of an N-qubit CSS read out in one quadrature.
pub fn css_probabilities(n_total: usize, phi: f64) -> Vec<f64> {
    css_probabilities_with(n_total, phi, 1.0)
}

/// As [`css_probabilities`] with single-atom fringe contrast `contrast`.
pub fn css_probabilities_with(n_total: usize, phi: f64, contrast: f64) -> Vec<f64> {
    let lb = ln_binomial_row(n_total);
    let s = 0.5 * (1.0 + contrast * phi.sin());
    let (ls, lc) = (s.ln(), (1.0 - s).ln());
    (0..=n_total)
        .map(|x| {
            let mut l = lb[x];
            if x > 0 {
                l += x as f64 * ls;
            }
            if x < n_total {
                l += (n_total - x) as f64 * lc;
            }
            l.exp()
        })
        .collect()
}

/// BMSE of an N-qubit coherent spin state with Bayes estimators.
pub fn css_bmse(n_total: usize, prior: &PriorGrid) -> Result<f64> {
    css_bmse_with(n_total, prior, 1.0)
}

pub fn css_bmse_with(n_total: usize, prior: &PriorGrid, contrast: f64) -> Result<f64> {
    if n_total == 0 {
        return Err(Error::invalid("n_total must be at least 1"));
    }
    let mut a = vec![0.0; n_total + 1];
    let mut b = vec![0.0; n_total + 1];
    for (&x, &w) in prior.nodes.iter().zip(prior.mass()) {
        for (i, p) in css_probabilities_with(n_total, x, contrast).into_iter().enumerate() {
            a[i] += w * p * x;
            b[i] += w * p;
        }
    }
    Ok(bmse_from_moments(prior, a.into_iter().zip(b)))
}

/// MSE(φ) of the CSS readout with the prior's Bayes estimators.
pub fn css_mse_curve(n_total: usize, prior: &PriorGrid, phis: &[f64]) -> Result<Vec<f64>> {
    if n_total == 0 {
        return Err(Error::invalid("n_total must be at least 1"));
    }
    let mut a = vec![0.0; n_total + 1];
    let mut b = vec![0.0; n_total + 1];
    for (&x, &w) in prior.nodes.iter().zip(prior.mass()) {
        for (i, p) in css_probabilities(n_total, x).into_iter().enumerate() {
            a[i] += w * p * x;
            b[i] += w * p;
        }
    }
    let est: Vec<f64> = a.iter().zip(&b).map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 }).collect();
    Ok(phis
        .iter()
        .map(|&phi| {
            css_probabilities(n_total, phi).iter().zip(&est).map(|(p, e)| p * (phi - e).powi(2)).sum()
        })
        .collect())
}

/// δφ² − N²δφ⁴e^{−N²δφ²}: one N-qubit GHZ state read out at a quarter turn.
pub fn ghz_parity_closed(n_total: usize, delta_phi: f64) -> f64 {
    let v = delta_phi * delta_phi;
    let n2 = (n_total * n_total) as f64;
    v - n2 * v * v * (-n2 * v).exp()
}

/// Numerical two-outcome BMSE of one GHZ state with P(±) = (1 ± sin Nφ)/2.
pub fn ghz_parity_bmse(n_total: usize, prior: &PriorGrid) -> f64 {
    let n = n_total as f64;
    let (mut a0, mut b0, mut a1, mut b1) = (0.0, 0.0, 0.0, 0.0);
    for (&x, &w) in prior.nodes.iter().zip(prior.mass()) {
        let p = 0.5 * (1.0 + (n * x).sin());
        a0 += w * p * x;
        b0 += w * p;
        a1 += w * (1.0 - p) * x;
        b1 += w * (1.0 - p);
    }
    bmse_from_moments(prior, [(a0, b0), (a1, b1)])
}

/// Quantum Cramér–Rao bound [Σ m_k 4^k]^{−1} of a partition state.
pub fn qcrb_bound(p: &Partition) -> f64 {
    1.0 / p.fisher()
}

/// Fixed-block scheme: M copies of each 2^k-qubit GHZ state, k = 0..k_max,
/// half read out in X and half in Y.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedBlockConfig {
    pub k_max: u32,
    pub m: usize,
}

/// Real fixed point of M = (16/π²) ln(M(2^{k_max+1} − 1)) and its rounding.
pub fn solve_fixed_block_m(k_max: u32) -> (f64, usize) {
    let c = (2f64.powi(k_max as i32 + 1)) - 1.0;
    let a = 16.0 / (PI * PI);
    let mut m = 10.0f64;
    for _ in 0..200 {
        let next = a * (m * c).ln();
        if (next - m).abs() < 1e-15 * m {
            m = next;
            break;
        }
        m = next;
    }
    (m, m.round() as usize)
}

impl FixedBlockConfig {
    /// Copies from the implicit equation, bumped to the next even number if odd.
    pub fn new(k_max: u32) -> FixedBlockConfig {
        let (_, m) = solve_fixed_block_m(k_max);
        FixedBlockConfig { k_max, m: m + m % 2 }
    }

    pub fn n_total(&self) -> usize {
        self.m * ((1usize << (self.k_max + 1)) - 1)
    }

    /// Size of the (n_x, n_y) count lattice.
    pub fn outcomes(&self) -> f64 {
        ((self.m / 2 + 1) as f64).powi(2 * (self.k_max as i32 + 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    Bayes,
    BitByBit,
}

/// Wraps to [−π, π).
pub fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        -PI
    } else {
        y
    }
}

/// Dual-quadrature estimate of 2^k φ from even counts out of M/2 each.
pub fn dual_quadrature(n_x: usize, n_y: usize, m: usize) -> f64 {
    let re = 2.0 * n_x as f64 / m as f64 - 0.5;
    let im = 2.0 * n_y as f64 / m as f64 - 0.5;
    wrap(im.atan2(re))
}

/// Bit-by-bit estimate from per-k even counts `(n_x, n_y)`, k ascending.
///
/// Each bit (2φ̂_{j−1} − φ̂_j)/2π is rounded to the nearest integer.
pub fn bit_by_bit_estimate(counts: &[(usize, usize)], m: usize) -> f64 {
    let est: Vec<f64> = counts.iter().map(|&(x, y)| dual_quadrature(x, y, m)).collect();
    let k_max = est.len() - 1;
    let mut acc = 0.0;
    for j in 1..=k_max {
        let z = ((2.0 * est[j - 1] - est[j]) / (2.0 * PI)).round();
        acc += z * 0.5f64.powi(j as i32);
    }
    wrap(2.0 * PI * acc + est[k_max] / 2f64.powi(k_max as i32))
}

/// Per-factor binomial count laws on the grid: `law[f][n][j]`.
fn fixed_block_laws(cfg: &FixedBlockConfig, prior: &PriorGrid) -> Vec<Vec<Vec<f64>>> {
    let h = cfg.m / 2;
    let lb = ln_binomial_row(h);
    let mut out = Vec::new();
    for k in 0..=cfg.k_max {
        let s = 2f64.powi(k as i32);
        for basis in 0..2 {
            let q: Vec<f64> = prior
                .nodes
                .iter()
                .map(|&x| if basis == 0 { 0.5 * (1.0 + (s * x).cos()) } else { 0.5 * (1.0 + (s * x).sin()) })
                .collect();
            let law = (0..=h)
                .map(|n| {
                    q.iter()
                        .map(|&q| lb[n].exp() * q.powi(n as i32) * (1.0 - q).powi((h - n) as i32))
                        .collect()
                })
                .collect();
            out.push(law);
        }
    }
    out
}

/// BMSE of the fixed-block scheme.
///
/// The count lattice is enumerated exactly when it has at most 10⁷ points;
/// otherwise `mc` sets the sample budget.
pub fn fixed_block_bmse(cfg: &FixedBlockConfig, prior: &PriorGrid, est: Estimator, mc: &McConfig) -> Estimate {
    if cfg.outcomes() <= EXACT_OUTCOMES {
        let laws = fixed_block_laws(cfg, prior);
        let mut counts = vec![0usize; laws.len()];
        let mut acc = 0.0;
        fixed_rec(cfg, prior, &laws, 0, prior.mass(), &mut counts, est, &mut acc);
        return Estimate::exact(match est {
            Estimator::Bayes => prior.second_moment() - acc,
            Estimator::BitByBit => acc,
        });
    }
    let h = cfg.m / 2;
    mc::average(mc, |rng| {
        use rand::Rng;
        let phi = mc::sample_prior(prior, rng);
        let mut counts = Vec::with_capacity(2 * (cfg.k_max as usize + 1));
        for k in 0..=cfg.k_max {
            let s = 2f64.powi(k as i32);
            for q in [0.5 * (1.0 + (s * phi).cos()), 0.5 * (1.0 + (s * phi).sin())] {
                counts.push((0..h).filter(|_| rng.random::<f64>() < q).count());
            }
        }
        match est {
            Estimator::Bayes => {
                let ll: Vec<f64> = prior
                    .nodes
                    .iter()
                    .map(|&x| {
                        let mut l = 0.0;
                        for (f, &n) in counts.iter().enumerate() {
                            let s = 2f64.powi((f / 2) as i32);
                            let q = if f % 2 == 0 { 0.5 * (1.0 + (s * x).cos()) } else { 0.5 * (1.0 + (s * x).sin()) };
                            l += n as f64 * q.max(1e-300).ln() + (h - n) as f64 * (1.0 - q).max(1e-300).ln();
                        }
                        l
                    })
                    .collect();
                mc::posterior_variance(prior, &ll)
            }
            Estimator::BitByBit => {
                let pairs: Vec<(usize, usize)> = counts.chunks(2).map(|c| (c[0], c[1])).collect();
                let e = bit_by_bit_estimate(&pairs, cfg.m);
                (phi - e).powi(2)
            }
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn fixed_rec(
    cfg: &FixedBlockConfig,
    prior: &PriorGrid,
    laws: &[Vec<Vec<f64>>],
    f: usize,
    pre: &[f64],
    counts: &mut [usize],
    est: Estimator,
    acc: &mut f64,
) {
    if f == laws.len() {
        match est {
            Estimator::Bayes => {
                let b: f64 = pre.iter().sum();
                if b > EMPTY {
                    let a: f64 = pre.iter().zip(&prior.nodes).map(|(p, x)| p * x).sum();
                    *acc += a * a / b;
                }
            }
            Estimator::BitByBit => {
                let pairs: Vec<(usize, usize)> = counts.chunks(2).map(|c| (c[0], c[1])).collect();
                let e = bit_by_bit_estimate(&pairs, cfg.m);
                *acc += pre.iter().zip(&prior.nodes).map(|(p, x)| p * (x - e) * (x - e)).sum::<f64>();
            }
        }
        return;
    }
    let mut next = vec![0.0; pre.len()];
    for (n, law) in laws[f].iter().enumerate() {
        for ((o, p), l) in next.iter_mut().zip(pre).zip(law) {
            *o = p * l;
        }
        counts[f] = n;
        fixed_rec(cfg, prior, laws, f + 1, &next, counts, est, acc);
    }
}

/// Varying-block scheme: m_k = m_top + μ(k_max − k) copies of each 2^k-qubit
/// GHZ state, copy j read out after a rotation of πj/m_k.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VaryingBlockConfig {
    pub k_max: u32,
    pub m_top: usize,
    pub mu: usize,
}

impl VaryingBlockConfig {
    pub fn new(k_max: u32) -> VaryingBlockConfig {
        VaryingBlockConfig { k_max, m_top: 2, mu: 3 }
    }

    pub fn copies(&self, k: u32) -> usize {
        self.m_top + self.mu * (self.k_max - k) as usize
    }

    pub fn n_total(&self) -> usize {
        (0..=self.k_max).map(|k| self.copies(k) << k).sum()
    }

    /// 5·2^{k_max+1} − 3k_max − 8 for the default (m_top, μ) = (2, 3).
    pub fn suitable_n(k_max: u32) -> usize {
        5 * (1usize << (k_max + 1)) - 3 * k_max as usize - 8
    }

    pub fn partition(&self) -> Partition {
        Partition::new((0..=self.k_max).map(|k| (k, self.copies(k) as u32))).expect("non-empty")
    }

    /// `(block size, phase offset θ)` per copy, largest block first.
    pub fn steps(&self, with_rotations: bool) -> Vec<(usize, f64)> {
        let mut v = Vec::new();
        for k in (0..=self.k_max).rev() {
            let m = self.copies(k);
            for j in 0..m {
                let th = if with_rotations { PI * j as f64 / m as f64 } else { 0.0 };
                v.push((1usize << k, th));
            }
        }
        v
    }

    /// The scheme as a non-adaptive plan: every node at a depth shares θ/2^k.
    pub fn plan(&self, with_rotations: bool) -> Result<MeasurementPlan> {
        let steps = self.steps(with_rotations);
        let mut plan =
            MeasurementPlan::with_order(&self.partition(), steps.iter().map(|s| s.0).collect())?;
        for (d, &(size, th)) in steps.iter().enumerate() {
            for p in 0..(1usize << d) {
                plan.rotations[MeasurementPlan::node_index(d, p)] = th / size as f64;
            }
        }
        Ok(plan)
    }
}

/// BMSE of the varying-block scheme; exact up to 17 copies, sampled beyond.
pub fn varying_block_bmse(
    cfg: &VaryingBlockConfig,
    prior: &PriorGrid,
    with_rotations: bool,
    mc: &McConfig,
) -> Result<Estimate> {
    let steps = cfg.steps(with_rotations);
    if steps.len() <= MAX_COPIES {
        let plan = cfg.plan(with_rotations)?;
        return Ok(Estimate::exact(Evaluator::for_plan(prior, &plan).bmse(&plan.rotations)));
    }
    Ok(parity_mc(prior, &steps, &vec![1.0; steps.len()], mc))
}

/// Rao–Blackwellised MC of independent parity readouts with P(even) =
/// (1 + C cos(kφ − θ))/2: mean posterior variance over sampled records.
pub fn parity_mc(prior: &PriorGrid, steps: &[(usize, f64)], contrast: &[f64], mc: &McConfig) -> Estimate {
    let tables: Vec<(Vec<f64>, Vec<f64>)> = steps
        .iter()
        .zip(contrast)
        .map(|(&(k, th), &c)| {
            prior
                .nodes
                .iter()
                .map(|&x| {
                    let cd = c * (k as f64 * x - th).cos();
                    ((0.5 * (1.0 + cd)).max(1e-300).ln(), (0.5 * (1.0 - cd)).max(1e-300).ln())
                })
                .unzip()
        })
        .collect();
    mc::average(mc, |rng| {
        use rand::Rng;
        let phi = mc::sample_prior(prior, rng);
        let mut ll = vec![0.0; prior.len()];
        for ((&(k, th), &c), (le, lo)) in steps.iter().zip(contrast).zip(&tables) {
            let even = rng.random::<f64>() < 0.5 * (1.0 + c * (k as f64 * phi - th).cos());
            let t = if even { le } else { lo };
            for (l, v) in ll.iter_mut().zip(t) {
                *l += v;
            }
        }
        mc::posterior_variance(prior, &ll)
    })
}

fn gauss(x: f64, v: f64) -> f64 {
    (-x * x / (2.0 * v)).exp()
}

/// Integrates `f` over [lo, hi] with 64 sixteen-point panels.
fn integrate(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = quadrature::composite(lo, hi, 64, 16);
    x.iter().zip(&w).map(|(&x, &w)| w * f(x)).sum()
}

/// Sums `term(k)` over k = 0, ±1, ±2, … until both new terms are below 1e-14
/// relative to the running total (and absolutely negligible).
fn wrap_sum(term: impl Fn(f64) -> f64) -> f64 {
    let mut s = term(0.0);
    let mut k = 1.0;
    loop {
        let a = term(k);
        let b = term(-k);
        s += a + b;
        if (a.abs() + b.abs()) <= 1e-14 * s.abs().max(1e-300) || k > 1e6 {
            return s;
        }
        k += 1.0;
    }
}

/// Large-N BMSE limit of any protocol: residual error from 2π slips.
pub fn plateau_hl(delta_phi: f64) -> f64 {
    let v = delta_phi * delta_phi;
    let norm = 1.0 / (2.0 * PI * v).sqrt();
    let gain = integrate(-PI, PI, |phi| {
        let num = wrap_sum(|k| {
            let p = phi + 2.0 * PI * k;
            p * gauss(p, v)
        });
        let den = wrap_sum(|k| gauss(phi + 2.0 * PI * k, v));
        if den > 0.0 {
            num * num / den
        } else {
            0.0
        }
    });
    v - norm * gain
}

/// Large-N BMSE limit of a single-quadrature CSS: slips plus the φ ↔ π − φ ambiguity.
pub fn plateau_sql(delta_phi: f64) -> f64 {
    let v = delta_phi * delta_phi;
    let norm = 1.0 / (2.0 * PI * v).sqrt();
    let gain = integrate(-PI / 2.0, PI / 2.0, |phi| {
        let num = wrap_sum(|k| {
            let p = phi + 2.0 * PI * k;
            p * gauss(p, v) + (PI - p) * gauss(PI - p, v)
        });
        let den = wrap_sum(|k| {
            let p = phi + 2.0 * PI * k;
            gauss(p, v) + gauss(PI - p, v)
        });
        if den > 0.0 {
            num * num / den
        } else {
            0.0
        }
    });
    v - norm * gain
}

/// Outcome statistics of a sine state read out by a QFT.
#[derive(Clone, Debug)]
pub struct QftStats {
    pub probabilities: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

pub fn sine_qft_check(n_total: usize, phi: f64) -> Result<QftStats> {
    if n_total < 16 {
        return Err(Error::invalid("sine/QFT check needs at least 16 qubits"));
    }
    let amp = crate::oqi::sine_state(n_total);
    let d = (n_total + 1) as f64;
    let probabilities: Vec<f64> = (0..=n_total)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (m, a) in amp.iter().enumerate() {
                let t = m as f64 * (2.0 * PI * k as f64 / d - phi);
                re += a * t.cos();
                im += a * t.sin();
            }
            (re * re + im * im) / d
        })
        .collect();
    let mean: f64 = probabilities.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let second: f64 = probabilities.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
    Ok(QftStats { probabilities, mean, variance: second - mean * mean })
}

/// Analytic RBMSE curve of the fixed-block scheme at intermediate N:
/// (8/π²)√(ln N) times the power-law fit 1.55/N^0.83 of the OQI at δφ = 0.7.
pub fn fixed_block_analytic_rbmse(n_total: usize) -> f64 {
    let n = n_total as f64;
    8.0 / (PI * PI) * n.ln().sqrt() * 1.55 / n.powf(0.83)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::gaussian_prior;

    #[test]
    fn fixed_block_copies() {
        let (real, m) = solve_fixed_block_m(2);
        assert_eq!(m, 6);
        assert!((real - 16.0 / (PI * PI) * (7.0 * real).ln()).abs() < 1e-10);
        assert_eq!(FixedBlockConfig::new(2).n_total(), 42);
        assert_eq!(FixedBlockConfig::new(3).n_total(), 120);
    }

    #[test]
    fn varying_block_sizes() {
        let c = VaryingBlockConfig::new(1);
        assert_eq!(c.partition().to_string(), "2x2+5x1");
        let ns: Vec<usize> = (0..5).map(|k| VaryingBlockConfig::new(k).n_total()).collect();
        assert_eq!(ns, [2, 9, 26, 63, 140]);
        for k in 0..8 {
            assert_eq!(VaryingBlockConfig::new(k).n_total(), VaryingBlockConfig::suitable_n(k));
        }
    }

    #[test]
    fn dual_quadrature_examples() {
        assert_eq!(dual_quadrature(4, 2, 8), 0.0);
        assert!((dual_quadrature(4, 4, 8) - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn ghz_closed_form_value() {
        assert!((ghz_parity_closed(1, 0.5) - (0.25 - 0.0625 * (-0.25f64).exp())).abs() < 1e-16);
        assert!((ghz_parity_closed(50, 3.0) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn qcrb_values() {
        let p = Partition::new([(2, 6), (1, 6), (0, 6)]).unwrap();
        assert!((qcrb_bound(&p) - 1.0 / (6.0 * 21.0)).abs() < 1e-16);
        assert!((qcrb_bound(&Partition::new([(4, 1)]).unwrap()) - 1.0 / 256.0).abs() < 1e-16);
    }

    #[test]
    fn css_is_informative() {
        let g = gaussian_prior(0.7, 512).unwrap();
        let b = css_bmse(1, &g).unwrap();
        assert!(b > 0.0 && b < 0.49);
        let s: f64 = css_probabilities(37, 0.3).iter().sum();
        assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn wrap_convention() {
        assert_eq!(wrap(PI), -PI);
        assert_eq!(wrap(-PI), -PI);
        assert!((wrap(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }
}
