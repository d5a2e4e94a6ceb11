//! Phase unwinding with slow atoms that accumulate φ/2^l.
//!
//! Three routes are provided: the rescaling map that turns a mixed partition
//! of slow atoms and GHZ blocks into a pure GHZ partition at a narrower prior,
//! and two Monte Carlo baselines that first estimate the fold number P from
//! slow-atom Ramsey readouts and then hand the residual phase to a
//! varying-block GHZ stage.

use crate::adaptive::{self, MeasurementPlan, OptimizerConfig, MAX_COPIES};
use crate::error::{Error, Result};
use crate::mc::{self, Estimate, McConfig};
use crate::partitions::Partition;
use crate::prior::{self, PriorGrid};
use crate::schemes::{wrap, VaryingBlockConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::{erf, erfc};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Blocks of `m` copies at exponent `e`: a 2^e-qubit GHZ state for `e ≥ 0`,
/// a single atom accumulating φ/2^{−e} for `e < 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedPartition {
    blocks: Vec<(i32, u32)>,
    /// A qubit may serve as 2^l slow atoms of level l.
    pub reuse: bool,
}

impl ExtendedPartition {
    pub fn new(pairs: impl IntoIterator<Item = (i32, u32)>, reuse: bool) -> Result<ExtendedPartition> {
        let mut blocks: Vec<(i32, u32)> = Vec::new();
        for (e, m) in pairs {
            if !(-62..=62).contains(&e) {
                return Err(Error::invalid(format!("block exponent {e} out of range")));
            }
            if m == 0 {
                continue;
            }
            match blocks.iter_mut().find(|b| b.0 == e) {
                Some(b) => b.1 += m,
                None => blocks.push((e, m)),
            }
        }
        if blocks.is_empty() {
            return Err(Error::invalid("extended partition has no blocks"));
        }
        blocks.sort_by(|a, b| b.0.cmp(&a.0));
        Ok(ExtendedPartition { blocks, reuse })
    }

    /// A pure GHZ partition with no slow atoms.
    pub fn from_partition(p: &Partition) -> ExtendedPartition {
        ExtendedPartition { blocks: p.blocks().iter().map(|&(k, m)| (k as i32, m)).collect(), reuse: false }
    }

    pub fn with_reuse(mut self, reuse: bool) -> ExtendedPartition {
        self.reuse = reuse;
        self
    }

    /// `(exponent, copies)`, descending exponent.
    pub fn blocks(&self) -> &[(i32, u32)] {
        &self.blocks
    }

    /// Deepest slow level, 0 without slow atoms.
    pub fn l_max(&self) -> u32 {
        self.blocks.iter().map(|b| (-b.0).max(0) as u32).max().unwrap_or(0)
    }

    pub fn slow(&self) -> Vec<(u32, u32)> {
        self.blocks.iter().filter(|b| b.0 < 0).map(|&(e, m)| ((-e) as u32, m)).collect()
    }

    pub fn fast(&self) -> Option<Partition> {
        Partition::new(self.blocks.iter().filter(|b| b.0 >= 0).map(|&(e, m)| (e as u32, m))).ok()
    }

    /// Number of slow atoms, counting each use separately.
    pub fn n_slow(&self) -> usize {
        self.slow().iter().map(|&(_, m)| m as usize).sum()
    }

    pub fn n_fast(&self) -> usize {
        self.fast().map_or(0, |p| p.n_total())
    }

    /// Physical qubit count under the partition's reuse rule.
    pub fn n_total(&self) -> usize {
        if self.reuse {
            let l = self.l_max();
            let scaled: usize = self.blocks.iter().map(|&(e, m)| (m as usize) << (e + l as i32)).sum();
            scaled.div_ceil(1 << l)
        } else {
            self.n_slow() + self.n_fast()
        }
    }

    /// Phase multiplier per copy, largest first.
    pub fn frequencies(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|&(e, m)| std::iter::repeat_n(2f64.powi(e), m as usize))
            .collect()
    }

    /// Inverse of [`rescale`]: blocks below `2^l_max` qubits become slow atoms.
    pub fn from_rescaled(p: &Partition, l_max: u32, reuse: bool) -> ExtendedPartition {
        ExtendedPartition {
            blocks: p.blocks().iter().map(|&(k, m)| (k as i32 - l_max as i32, m)).collect(),
            reuse,
        }
    }
}

impl fmt::Display for ExtendedPartition {
    /// `3x(1/8)+2x(1/4)+3x1+2x4`, ascending phase multiplier.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(e, m)) in self.blocks.iter().rev().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            if e < 0 {
                write!(f, "{m}x(1/{})", 1u64 << -e)?;
            } else {
                write!(f, "{m}x{}", 1u64 << e)?;
            }
        }
        Ok(())
    }
}

impl FromStr for ExtendedPartition {
    type Err = Error;

    /// Parses the display form; `reuse` defaults to false.
    fn from_str(s: &str) -> Result<ExtendedPartition> {
        let mut pairs = Vec::new();
        for term in s.split('+') {
            let term = term.trim();
            let (m, size) = term
                .split_once(['x', 'X', '*'])
                .ok_or_else(|| Error::Parse(format!("term '{term}' is not of the form MxS")))?;
            let m: u32 = m.trim().parse().map_err(|_| Error::Parse(format!("bad count in '{term}'")))?;
            let size = size.trim();
            let inner = size.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(size);
            let (denom, slow) = match inner.strip_prefix("1/") {
                Some(d) => (d, true),
                None => (inner, false),
            };
            let v: u64 = denom.trim().parse().map_err(|_| Error::Parse(format!("bad block size in '{term}'")))?;
            if v == 0 || !v.is_power_of_two() {
                return Err(Error::Parse(format!("block size in '{term}' is not a power of two")));
            }
            let e = v.trailing_zeros() as i32;
            pairs.push((if slow { -e } else { e }, m));
        }
        ExtendedPartition::new(pairs, false)
    }
}

/// Output of [`rescale`].
#[derive(Clone, Debug, PartialEq)]
pub struct Rescaled {
    /// Pure GHZ partition in the frame φ′ = φ/2^l_max.
    pub partition: Partition,
    /// BMSE(φ) = scale_factor · BMSE(φ′), i.e. 4^l_max.
    pub scale_factor: f64,
    /// Prior width multiplier 2^−l_max.
    pub prior_scale: f64,
    /// Qubit count of the rescaled partition.
    pub n_prime: usize,
}

/// Maps an extended partition to the frame φ′ = φ/2^l_max, where every block
/// becomes a GHZ state of 2^{e+l_max} qubits.
pub fn rescale(ep: &ExtendedPartition, l_max: u32) -> Result<Rescaled> {
    if ep.l_max() > l_max {
        return Err(Error::invalid(format!("slow level {} exceeds l_max = {l_max}", ep.l_max())));
    }
    let partition = Partition::new(ep.blocks.iter().map(|&(e, m)| ((e + l_max as i32) as u32, m)))?;
    let n_prime = partition.n_total();
    Ok(Rescaled { partition, scale_factor: 4f64.powi(l_max as i32), prior_scale: 0.5f64.powi(l_max as i32), n_prime })
}

/// Rotations of a plan in the rescaled frame.
pub fn rescale_rotations(rotations: &[f64], l_max: u32) -> Vec<f64> {
    let s = 0.5f64.powi(l_max as i32);
    rotations.iter().map(|r| r * s).collect()
}

/// BMSE of an adaptive plan on an extended partition in the original frame.
/// `rotations` are heap ordered over the copies of `ep.frequencies()`.
pub fn extended_bmse(ep: &ExtendedPartition, prior: &PriorGrid, rotations: &[f64]) -> f64 {
    adaptive::Evaluator::with_frequencies(prior, &ep.frequencies()).bmse(rotations)
}

/// Fold number P of φ = 2πP + θ from per-level estimates β_j of φ/2^j,
/// `betas[0..=l_max]`, assuming |φ/2^l_max| < π.
///
/// Each correction (2β_j − β_{j−1})/2π is rounded to the nearest integer.
pub fn estimate_p(betas: &[f64]) -> Result<i64> {
    if betas.is_empty() {
        return Err(Error::invalid("need at least one level estimate"));
    }
    if betas.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid("level estimates must be finite"));
    }
    let mut p = 0i64;
    for j in (1..betas.len()).rev() {
        p = 2 * p + ((2.0 * betas[j] - betas[j - 1]) / (2.0 * PI)).round() as i64;
    }
    Ok(p)
}

/// Conditional law of θ ∈ [−π, π) given P = P_m under a Gaussian prior on
/// φ = 2πP + θ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FoldPosterior {
    pub delta_phi: f64,
    pub p_m: i64,
    norm: f64,
}

impl FoldPosterior {
    pub fn density(&self, theta: f64) -> f64 {
        if !(-PI..PI).contains(&theta) {
            return 0.0;
        }
        let c = 2.0 * PI * self.p_m as f64;
        let x = (c + theta) / self.delta_phi;
        (-0.5 * x * x).exp() / self.norm
    }
}

pub fn posterior_after_p(delta_phi: f64, p_m: i64) -> Result<FoldPosterior> {
    if !(delta_phi > 0.0) || !delta_phi.is_finite() {
        return Err(Error::invalid(format!("delta_phi must be positive, got {delta_phi}")));
    }
    let c = 2.0 * PI * p_m as f64;
    let s = std::f64::consts::SQRT_2 * delta_phi;
    let (a, b) = ((c + PI) / s, (c - PI) / s);
    // Tail differences are taken with erfc to avoid cancellation far from 0.
    let diff = if b > 0.0 {
        erfc(b) - erfc(a)
    } else if a < 0.0 {
        erfc(-a) - erfc(-b)
    } else {
        erf(a) - erf(b)
    };
    let norm = delta_phi * (PI / 2.0).sqrt() * diff;
    Ok(FoldPosterior { delta_phi, p_m, norm })
}

/// Qubit split for the Monte Carlo unwinding baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct UnwindAllocation {
    /// Ramsey atoms at level j accumulating φ/2^j, j = 0..=l_max.
    pub levels: Vec<usize>,
    /// Two-qubit GHZ copies used to narrow θ to a half circle (non-adaptive only).
    pub narrowing: usize,
    /// Probability that the half-circle classification is wrong.
    pub classification_error: f64,
    /// GHZ stage.
    pub ghz: VaryingBlockConfig,
}

impl UnwindAllocation {
    pub fn n_total(&self) -> usize {
        self.levels.iter().sum::<usize>() + 2 * self.narrowing + self.ghz.n_total()
    }

    pub fn l_max(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// Spreads `n_total` minus the GHZ and narrowing cost evenly over
    /// `l_max + 1` levels, extra atoms to the slowest levels.
    pub fn balanced(n_total: usize, l_max: usize, narrowing: usize, ghz: VaryingBlockConfig) -> Result<UnwindAllocation> {
        let fixed = 2 * narrowing + ghz.n_total();
        let levels = l_max + 1;
        if n_total < fixed + 2 * levels {
            return Err(Error::invalid(format!(
                "{n_total} qubits cannot hold a {fixed}-qubit GHZ stage and {levels} Ramsey levels"
            )));
        }
        let s = n_total - fixed;
        let mut v = vec![s / levels; levels];
        for x in v.iter_mut().rev().take(s % levels) {
            *x += 1;
        }
        Ok(UnwindAllocation { levels: v, narrowing, classification_error: 0.0, ghz })
    }

    fn validate(&self) -> Result<()> {
        if self.levels.contains(&1) {
            return Err(Error::invalid("a Ramsey level needs two atoms for both quadratures"));
        }
        if !(0.0..=1.0).contains(&self.classification_error) {
            return Err(Error::invalid("classification_error must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Result of an unwinding simulation.
#[derive(Clone, Debug)]
pub struct UnwindResult {
    pub bmse: Estimate,
    /// Fraction of samples with a wrong fold number.
    pub p_error_rate: f64,
    /// Prior width handed to the GHZ stage (adaptive unwinding only).
    pub stage_width: Option<f64>,
    pub n_total: usize,
}

/// Dual-quadrature Ramsey estimate of `f·φ` from `m` atoms, half in each basis.
fn ramsey_estimate(rng: &mut ChaCha8Rng, phase: f64, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let (mx, my) = (m.div_ceil(2), m / 2);
    let px = 0.5 * (1.0 + phase.cos());
    let py = 0.5 * (1.0 + phase.sin());
    let nx = (0..mx).filter(|_| rng.random::<f64>() < px).count();
    let ny = (0..my).filter(|_| rng.random::<f64>() < py).count();
    let re = 2.0 * nx as f64 / mx as f64 - 1.0;
    let im = if my > 0 { 2.0 * ny as f64 / my as f64 - 1.0 } else { 0.0 };
    wrap(im.atan2(re))
}

/// GHZ stage with grid-posterior-mean estimation: parity tables per step.
struct GhzStage<'a> {
    prior: &'a PriorGrid,
    steps: Vec<(f64, f64)>,
    even: Vec<Vec<f64>>,
}

impl<'a> GhzStage<'a> {
    fn new(prior: &'a PriorGrid, cfg: &VaryingBlockConfig) -> GhzStage<'a> {
        let steps: Vec<(f64, f64)> = cfg.steps(true).into_iter().map(|(k, t)| (k as f64, t)).collect();
        let even = steps
            .iter()
            .map(|&(k, t)| prior.nodes.iter().map(|&x| 0.5 * (1.0 + (k * x - t).cos())).collect())
            .collect();
        GhzStage { prior, steps, even }
    }

    fn estimate(&self, rng: &mut ChaCha8Rng, phase: f64) -> f64 {
        let mut w = self.prior.mass().to_vec();
        for (s, &(k, t)) in self.steps.iter().enumerate() {
            let p = 0.5 * (1.0 + (k * phase - t).cos());
            let even = rng.random::<f64>() < p;
            let mut z = 0.0;
            for (wj, &q) in w.iter_mut().zip(&self.even[s]) {
                *wj *= if even { q } else { 1.0 - q };
                z += *wj;
            }
            if z < 1e-200 {
                return 0.0;
            }
            if z < 1e-100 {
                w.iter_mut().for_each(|x| *x /= z);
            }
        }
        let z: f64 = w.iter().sum();
        w.iter().zip(&self.prior.nodes).map(|(a, x)| a * x).sum::<f64>() / z
    }
}

fn fold_stage(rng: &mut ChaCha8Rng, phi: f64, levels: &[usize]) -> (i64, f64) {
    if levels.is_empty() {
        return (0, 0.0);
    }
    let betas: Vec<f64> =
        levels.iter().enumerate().map(|(j, &m)| ramsey_estimate(rng, phi / 2f64.powi(j as i32), m)).collect();
    (estimate_p(&betas).expect("finite estimates"), betas[0])
}

fn true_fold(phi: f64) -> i64 {
    ((phi - wrap(phi)) / (2.0 * PI)).round() as i64
}

/// Non-adaptive unwinding: slow-atom Ramsey levels fix P, an ideal two-qubit
/// stage narrows θ to a half circle, and the GHZ stage estimates the rest
/// against a flat prior on [−π/2, π/2].
pub fn nonadaptive_unwind_bmse(prior: &PriorGrid, alloc: &UnwindAllocation, mc: &McConfig) -> Result<UnwindResult> {
    alloc.validate()?;
    let direct = alloc.levels.is_empty() && alloc.narrowing == 0;
    let flat;
    let stage_prior = if direct {
        prior
    } else {
        flat = prior::uniform_for(-PI / 2.0, PI / 2.0, alloc.ghz.n_total())?;
        &flat
    };
    let stage = GhzStage::new(stage_prior, &alloc.ghz);
    let slips = std::sync::atomic::AtomicUsize::new(0);
    let bmse = mc::average(mc, |rng| {
        let phi = mc::sample_prior(prior, rng);
        if direct {
            let e = phi - stage.estimate(rng, phi);
            return e * e;
        }
        let (p, _) = fold_stage(rng, phi, &alloc.levels);
        if p != true_fold(phi) {
            slips.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        }
        let theta = wrap(phi);
        let mut c = PI * (theta / PI).round();
        if rng.random::<f64>() < alloc.classification_error {
            c = if c == 0.0 { PI * theta.signum() } else { 0.0 };
        }
        let base = 2.0 * PI * p as f64 + c;
        let r = phi - base;
        let e = r - stage.estimate(rng, r);
        e * e
    });
    Ok(UnwindResult {
        bmse,
        p_error_rate: slips.into_inner() as f64 / mc.samples as f64,
        stage_width: None,
        n_total: alloc.n_total(),
    })
}

/// Adaptive unwinding: slow-atom Ramsey levels estimate φ itself, the phase
/// is shifted by the estimate, and the GHZ stage works with a Gaussian prior
/// whose width is the first stage's RMS error (from a pilot run).
pub fn adaptive_unwind_bmse(prior: &PriorGrid, alloc: &UnwindAllocation, mc: &McConfig) -> Result<UnwindResult> {
    alloc.validate()?;
    let levels = &alloc.levels;
    let width = if levels.is_empty() {
        prior.delta_phi
    } else {
        let pilot = McConfig { samples: mc.samples, seed: mc.seed ^ 0x9e37_79b9_7f4a_7c15 };
        mc::average(&pilot, |rng| {
            let phi = mc::sample_prior(prior, rng);
            let (p, b0) = fold_stage(rng, phi, levels);
            let e = phi - (2.0 * PI * p as f64 + b0);
            e * e
        })
        .mean
        .sqrt()
    };
    let stage_prior = prior::gaussian_for(width, alloc.ghz.n_total())?;
    let stage = GhzStage::new(&stage_prior, &alloc.ghz);
    let slips = std::sync::atomic::AtomicUsize::new(0);
    let bmse = mc::average(mc, |rng| {
        let phi = mc::sample_prior(prior, rng);
        let (p, b0) = fold_stage(rng, phi, levels);
        if !levels.is_empty() && p != true_fold(phi) {
            slips.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        }
        let est = if levels.is_empty() { 0.0 } else { 2.0 * PI * p as f64 + b0 };
        let r = phi - est;
        let e = r - stage.estimate(rng, r);
        e * e
    });
    Ok(UnwindResult {
        bmse,
        p_error_rate: slips.into_inner() as f64 / mc.samples as f64,
        stage_width: Some(width),
        n_total: alloc.n_total(),
    })
}

/// Which unwinding baseline an allocation search targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnwindMode {
    Adaptive,
    NonAdaptive,
}

/// Smallest l with 5δφ/2^l < π: enough levels to fold the prior's bulk.
pub fn levels_needed(delta_phi: f64) -> usize {
    let mut l = 0;
    while 5.0 * delta_phi / 2f64.powi(l as i32) >= PI {
        l += 1;
    }
    l
}

/// Best balanced allocation of exactly `n_total` qubits over GHZ stage depth
/// and number of Ramsey levels; narrowing uses one two-qubit copy.
pub fn best_allocation(
    n_total: usize,
    prior: &PriorGrid,
    mode: UnwindMode,
    mc: &McConfig,
) -> Result<(UnwindAllocation, UnwindResult)> {
    let l0 = levels_needed(prior.delta_phi);
    let narrowing = if mode == UnwindMode::NonAdaptive { 1 } else { 0 };
    let mut best: Option<(UnwindAllocation, UnwindResult)> = None;
    for k_max in 0..=4u32 {
        let ghz = VaryingBlockConfig::new(k_max);
        for l_max in l0..=l0 + 1 {
            let Ok(alloc) = UnwindAllocation::balanced(n_total, l_max, narrowing, ghz) else { continue };
            if alloc.levels.iter().any(|&m| m > 12) {
                continue;
            }
            let res = match mode {
                UnwindMode::Adaptive => adaptive_unwind_bmse(prior, &alloc, mc)?,
                UnwindMode::NonAdaptive => nonadaptive_unwind_bmse(prior, &alloc, mc)?,
            };
            if best.as_ref().is_none_or(|b| res.bmse.mean < b.1.bmse.mean) {
                best = Some((alloc, res));
            }
        }
    }
    best.ok_or_else(|| Error::invalid(format!("no allocation of {n_total} qubits with at most 12 atoms per level")))
}

/// Outcome of [`best_unwind_partition`].
#[derive(Clone, Debug)]
pub struct UnwindChoice {
    pub partition: ExtendedPartition,
    pub l_max: u32,
    /// Optimised plan in the rescaled frame.
    pub plan: MeasurementPlan,
    /// BMSE in the original frame.
    pub bmse: f64,
    pub budget_limited: bool,
}

/// Search limits for [`best_unwind_partition`].
#[derive(Clone, Debug)]
pub struct UnwindSearch {
    /// Deepest slow level tried; by default the level count that folds
    /// ±5δφ into one period.
    pub l_cap: Option<u32>,
    /// Enumeration budget per rescaled qubit count.
    pub budget: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for UnwindSearch {
    fn default() -> Self {
        UnwindSearch { l_cap: None, budget: 200_000, optimizer: OptimizerConfig::default() }
    }
}

/// Optimal mix of slow atoms and GHZ blocks for `n_total` physical qubits.
///
/// For every l_max the rescaled frame has prior width δφ/2^l_max; each
/// rescaled qubit count N′ whose partitions can map back to `n_total`
/// qubits is ranked, and the best feasible candidate per l_max is optimised.
pub fn best_unwind_partition(
    n_total: usize,
    delta_phi: f64,
    reuse: bool,
    search: &UnwindSearch,
) -> Result<UnwindChoice> {
    if n_total == 0 {
        return Err(Error::invalid("n_total must be positive"));
    }
    let mut best: Option<UnwindChoice> = None;
    let mut limited = false;
    let l_cap = search.l_cap.unwrap_or(levels_needed(delta_phi) as u32);
    for l in 0..=l_cap {
        let scale = 4f64.powi(l as i32);
        let width = delta_phi / 2f64.powi(l as i32);
        let hi = n_total << l;
        let rescaled_prior = prior::gaussian_for(width, hi)?;
        let mut cand: Option<(Partition, f64)> = None;
        for n_prime in n_total..=hi {
            let (ranked, truncated) = adaptive::rank_partitions(n_prime, &rescaled_prior, None, search.budget)?;
            limited |= truncated;
            let hit = ranked.into_iter().find(|(p, _)| {
                let ep = ExtendedPartition::from_rescaled(p, l, reuse);
                ep.n_total() == n_total && p.copies() <= MAX_COPIES && (l == 0 || ep.l_max() == l)
            });
            if let Some((p, b)) = hit {
                if cand.as_ref().is_none_or(|c| b < c.1) {
                    cand = Some((p, b));
                }
            }
        }
        let Some((p, _)) = cand else { continue };
        let plan = adaptive::initial_plan(&p, &rescaled_prior)?;
        let o = adaptive::optimize_plan(&plan, &rescaled_prior, &search.optimizer);
        let bmse = scale * o.bmse;
        if best.as_ref().is_none_or(|b| bmse < b.bmse) {
            best = Some(UnwindChoice {
                partition: ExtendedPartition::from_rescaled(&p, l, reuse),
                l_max: l,
                plan: o.plan,
                bmse,
                budget_limited: false,
            });
        }
    }
    let mut choice = best.ok_or_else(|| Error::Budget(format!("no feasible partition of {n_total} qubits")))?;
    choice.budget_limited = limited;
    Ok(choice)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_form_round_trips() {
        let ep: ExtendedPartition = "3x(1/8)+2x(1/4)+4x(1/2)+3x1+3x2+2x4".parse().unwrap();
        assert_eq!(ep.to_string(), "3x(1/8)+2x(1/4)+4x(1/2)+3x1+3x2+2x4");
        assert_eq!(ep.l_max(), 3);
        assert_eq!(ep.n_total(), 26);
        assert_eq!(ep.clone().with_reuse(true).n_total(), 20);
        assert!("3x(1/3)".parse::<ExtendedPartition>().is_err());
    }

    #[test]
    fn rescale_bounds() {
        let ep: ExtendedPartition = "1x(1/4)+2x1".parse().unwrap();
        assert!(rescale(&ep, 1).is_err());
        let r = rescale(&ep, 2).unwrap();
        assert_eq!(r.partition.to_string(), "2x4+1x1");
        assert_eq!(r.n_prime, 9);
        assert_eq!(r.scale_factor, 16.0);
    }

    #[test]
    fn fold_estimates() {
        assert_eq!(estimate_p(&[0.0, 0.0, 0.0]).unwrap(), 0);
        assert!(estimate_p(&[f64::NAN]).is_err());
        let fold = |phi: f64, l: usize| (0..=l).map(|j| wrap(phi / 2f64.powi(j as i32))).collect::<Vec<_>>();
        assert_eq!(estimate_p(&fold(6.9, 2)).unwrap(), 1);
        assert_eq!(estimate_p(&fold(-7.0, 2)).unwrap(), -1);
    }

    #[test]
    fn balanced_allocation() {
        let a = UnwindAllocation::balanced(40, 2, 1, VaryingBlockConfig::new(2)).unwrap();
        assert_eq!(a.levels, vec![4, 4, 4]);
        assert_eq!(a.n_total(), 40);
        assert!(UnwindAllocation::balanced(20, 2, 1, VaryingBlockConfig::new(2)).is_err());
    }
}
