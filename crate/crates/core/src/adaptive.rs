//! Local adaptive measurement plans: a binary tree of rotation angles, one per
//! history of parity outcomes, with Bayes-optimal estimators at the leaves.
//!
//! Node addressing uses heap order. The node reached after `d` outcomes with
//! prefix bits `s` (first outcome most significant, 0 = even) sits at index
//! `2^d − 1 + s`.

use crate::error::{Error, Result};
use crate::oqi;
use crate::partitions::{self, Partition};
use crate::prior::PriorGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::f64::consts::PI;

/// Largest number of block copies for which the full tree is enumerated.
pub const MAX_COPIES: usize = 17;

/// Posterior masses below this are treated as empty branches.
const EMPTY: f64 = 1e-300;

/// Depth below which subtrees are evaluated with `rayon::join`.
const PAR_DEPTH: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementPlan {
    pub partition: Partition,
    /// Block qubit count measured at each step.
    pub order: Vec<usize>,
    /// Heap-ordered rotation angles, `2^M − 1` of them.
    pub rotations: Vec<f64>,
}

impl MeasurementPlan {
    /// All-zero rotations, largest block measured first.
    pub fn zeros(partition: &Partition) -> Result<MeasurementPlan> {
        MeasurementPlan::with_order(partition, partition.block_sizes())
    }

    pub fn with_order(partition: &Partition, order: Vec<usize>) -> Result<MeasurementPlan> {
        let mut a = order.clone();
        let mut b = partition.block_sizes();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(Error::invalid("order is not a permutation of the partition's blocks"));
        }
        if order.len() > MAX_COPIES {
            return Err(Error::Budget(format!(
                "{} block copies exceed the enumeration limit of {MAX_COPIES}",
                order.len()
            )));
        }
        let nodes = (1usize << order.len()) - 1;
        Ok(MeasurementPlan { partition: partition.clone(), order, rotations: vec![0.0; nodes] })
    }

    /// Number of measurement steps M.
    pub fn depth(&self) -> usize {
        self.order.len()
    }

    pub fn node_index(depth: usize, prefix: usize) -> usize {
        (1 << depth) - 1 + prefix
    }

    /// Rotation applied after the outcomes in `prefix` (a string of '0'/'1').
    pub fn rotation(&self, prefix: &str) -> Result<f64> {
        let (d, s) = parse_bits(prefix)?;
        if d >= self.depth() {
            return Err(Error::invalid("prefix longer than the plan"));
        }
        Ok(self.rotations[Self::node_index(d, s)])
    }

    /// JSON with partition, order and the rotation tree keyed by prefix.
    pub fn to_json(&self) -> Value {
        let mut tree = Map::new();
        for d in 0..self.depth() {
            for s in 0..(1usize << d) {
                tree.insert(bit_string(s, d), json!(self.rotations[Self::node_index(d, s)]));
            }
        }
        json!({
            "partition": self.partition.to_json(),
            "order": self.order,
            "rotations": Value::Object(tree),
        })
    }

    pub fn from_json(v: &Value) -> Result<MeasurementPlan> {
        let p = Partition::from_json(&v["partition"])?;
        let order: Vec<usize> = serde_json::from_value(v["order"].clone()).map_err(|e| Error::Parse(e.to_string()))?;
        let mut plan = MeasurementPlan::with_order(&p, order)?;
        let tree = v["rotations"].as_object().ok_or_else(|| Error::Parse("rotations must be an object".into()))?;
        if tree.len() != plan.rotations.len() {
            return Err(Error::Parse(format!("expected {} rotations, got {}", plan.rotations.len(), tree.len())));
        }
        for (k, x) in tree {
            let (d, s) = parse_bits(k)?;
            if d >= plan.depth() {
                return Err(Error::Parse(format!("prefix '{k}' too long")));
            }
            plan.rotations[Self::node_index(d, s)] =
                x.as_f64().ok_or_else(|| Error::Parse(format!("rotation '{k}' is not a number")))?;
        }
        Ok(plan)
    }
}

pub fn bit_string(prefix: usize, depth: usize) -> String {
    (0..depth).rev().map(|i| if prefix >> i & 1 == 1 { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str) -> Result<(usize, usize)> {
    let mut v = 0usize;
    for c in s.chars() {
        v = v << 1
            | match c {
                '0' => 0,
                '1' => 1,
                _ => return Err(Error::Parse(format!("'{s}' is not a bit string"))),
            };
    }
    Ok((s.len(), v))
}

/// Evaluates plans of a fixed block order against one prior, optionally with
/// reduced parity contrast per step.
#[derive(Clone, Debug)]
pub struct Evaluator<'a> {
    prior: &'a PriorGrid,
    sizes: Vec<f64>,
    contrast: Vec<f64>,
    table: Vec<usize>,
    cos_t: Vec<Vec<f64>>,
    sin_t: Vec<Vec<f64>>,
}

/// Scalar outputs of a full tree walk.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub bmse: f64,
    pub gradient: Vec<f64>,
}

struct Walk {
    gain: f64,
    h: Vec<f64>,
    leaves: Vec<(f64, f64)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(prior: &'a PriorGrid, order: &[usize]) -> Evaluator<'a> {
        let freqs: Vec<f64> = order.iter().map(|&m| m as f64).collect();
        Evaluator::with_frequencies(prior, &freqs)
    }

    /// Steps whose parity oscillates as cos(m(φ−Φ)) with arbitrary positive
    /// multipliers m, e.g. fractional ones for slow atoms.
    pub fn with_frequencies(prior: &'a PriorGrid, order: &[f64]) -> Evaluator<'a> {
        let mut distinct: Vec<f64> = Vec::new();
        let table = order
            .iter()
            .map(|&m| match distinct.iter().position(|&x| x == m) {
                Some(i) => i,
                None => {
                    distinct.push(m);
                    distinct.len() - 1
                }
            })
            .collect();
        let cos_t = distinct.iter().map(|&m| prior.nodes.iter().map(|&x| (m * x).cos()).collect()).collect();
        let sin_t = distinct.iter().map(|&m| prior.nodes.iter().map(|&x| (m * x).sin()).collect()).collect();
        Evaluator { prior, sizes: order.to_vec(), contrast: vec![1.0; order.len()], table, cos_t, sin_t }
    }

    /// Parity contrast per measurement step.
    pub fn with_contrast(mut self, contrast: Vec<f64>) -> Evaluator<'a> {
        assert_eq!(contrast.len(), self.sizes.len());
        self.contrast = contrast;
        self
    }

    pub fn for_plan(prior: &'a PriorGrid, plan: &MeasurementPlan) -> Evaluator<'a> {
        Evaluator::new(prior, &plan.order)
    }

    pub fn prior(&self) -> &PriorGrid {
        self.prior
    }

    /// Phase multiplier per measurement step.
    pub fn frequencies(&self) -> &[f64] {
        &self.sizes
    }

    pub fn contrast(&self) -> &[f64] {
        &self.contrast
    }

    pub fn bmse(&self, rotations: &[f64]) -> f64 {
        let w = self.walk_root(rotations, false);
        self.prior.second_moment() - w.gain
    }

    pub fn evaluate(&self, rotations: &[f64]) -> Evaluation {
        let mut grad = vec![0.0; rotations.len()];
        let w = self.walk_root_grad(rotations, &mut grad);
        Evaluation { bmse: self.prior.second_moment() - w.gain, gradient: grad }
    }

    /// Per-leaf `(∫φ p 𝒫, ∫p 𝒫)` in branch order.
    pub fn leaf_moments(&self, rotations: &[f64]) -> Vec<(f64, f64)> {
        self.walk_root(rotations, true).leaves
    }

    fn walk_root(&self, rot: &[f64], leaves: bool) -> Walk {
        assert_eq!(rot.len(), (1 << self.sizes.len()) - 1);
        let pre = self.prior.mass().to_vec();
        self.walk(0, 0, &pre, rot, None, leaves)
    }

    fn walk_root_grad(&self, rot: &[f64], grad: &mut [f64]) -> Walk {
        assert_eq!(rot.len(), (1 << self.sizes.len()) - 1);
        let mut levels = Vec::with_capacity(self.sizes.len());
        let mut rest = grad;
        for d in 0..self.sizes.len() {
            let (lv, r) = rest.split_at_mut(1 << d);
            levels.push(lv);
            rest = r;
        }
        let pre = self.prior.mass().to_vec();
        self.walk(0, 0, &pre, rot, Some(levels), false)
    }

    fn walk(
        &self,
        depth: usize,
        prefix: usize,
        pre: &[f64],
        rot: &[f64],
        grad: Option<Vec<&mut [f64]>>,
        want_leaves: bool,
    ) -> Walk {
        let phis = &self.prior.nodes;
        if depth == self.sizes.len() {
            let b: f64 = pre.iter().sum();
            let a: f64 = pre.iter().zip(phis).map(|(p, x)| p * x).sum();
            let (e, gain) = if b > EMPTY { (a / b, a * a / b) } else { (0.0, 0.0) };
            let h = if grad.is_some() { phis.iter().map(|&x| e * e - 2.0 * e * x).collect() } else { Vec::new() };
            let leaves = if want_leaves { vec![(a, b)] } else { Vec::new() };
            return Walk { gain, h, leaves };
        }
        let phi_r = rot[MeasurementPlan::node_index(depth, prefix)];
        let m = self.sizes[depth];
        let c = self.contrast[depth];
        let (cm, sm) = ((m * phi_r).cos(), (m * phi_r).sin());
        let ct = &self.cos_t[self.table[depth]];
        let st = &self.sin_t[self.table[depth]];
        let n = pre.len();
        let mut t0 = vec![0.0; n];
        let mut pre0 = vec![0.0; n];
        let mut pre1 = vec![0.0; n];
        for j in 0..n {
            let cd = ct[j] * cm + st[j] * sm;
            t0[j] = 0.5 * (1.0 + c * cd);
            pre0[j] = pre[j] * t0[j];
            pre1[j] = pre[j] * (0.5 * (1.0 - c * cd));
        }
        let (own, g0, g1) = match grad {
            Some(mut lv) => {
                let own = lv.remove(0);
                let mut a = Vec::with_capacity(lv.len());
                let mut b = Vec::with_capacity(lv.len());
                for l in lv {
                    let half = l.len() / 2;
                    let (x, y) = l.split_at_mut(half);
                    a.push(x);
                    b.push(y);
                }
                (Some(own), Some(a), Some(b))
            }
            None => (None, None, None),
        };
        let left = |g| self.walk(depth + 1, prefix << 1, &pre0, rot, g, want_leaves);
        let right = |g| self.walk(depth + 1, prefix << 1 | 1, &pre1, rot, g, want_leaves);
        let (w0, w1) = if depth < PAR_DEPTH && self.sizes.len() - depth >= 8 {
            rayon::join(|| left(g0), || right(g1))
        } else {
            (left(g0), right(g1))
        };
        let mut leaves = w0.leaves;
        leaves.extend(w1.leaves);
        let gain = w0.gain + w1.gain;
        let h = match own {
            Some(own) => {
                let k = 0.5 * c * m;
                let mut g = 0.0;
                let mut h = w1.h;
                for j in 0..n {
                    let diff = w0.h[j] - h[j];
                    g += pre[j] * k * (st[j] * cm - ct[j] * sm) * diff;
                    h[j] += t0[j] * diff;
                }
                own[0] = g;
                h
            }
            None => Vec::new(),
        };
        Walk { gain, h, leaves }
    }

    /// Probability of a full outcome string at one phase value.
    pub fn branch_probability(&self, rotations: &[f64], branch: usize, phi: f64) -> f64 {
        let depth = self.sizes.len();
        let mut p = 1.0;
        for d in 0..depth {
            let prefix = branch >> (depth - d);
            let bit = branch >> (depth - d - 1) & 1;
            let r = rotations[MeasurementPlan::node_index(d, prefix)];
            let cd = (self.sizes[d] * (phi - r)).cos();
            p *= 0.5 * (1.0 + if bit == 0 { 1.0 } else { -1.0 } * self.contrast[d] * cd);
        }
        p
    }

    /// Mean squared error at fixed phase values with estimators fixed by the prior.
    pub fn mse_curve(&self, rotations: &[f64], phis: &[f64]) -> Vec<f64> {
        let est: Vec<f64> = self
            .leaf_moments(rotations)
            .into_iter()
            .map(|(a, b)| if b > EMPTY { a / b } else { 0.0 })
            .collect();
        phis.iter()
            .map(|&phi| {
                let mut acc = 0.0;
                self.mse_rec(rotations, &est, phi, 0, 0, 1.0, &mut acc);
                acc
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn mse_rec(&self, rot: &[f64], est: &[f64], phi: f64, depth: usize, prefix: usize, p: f64, acc: &mut f64) {
        if depth == self.sizes.len() {
            let e = est[prefix];
            *acc += p * (phi - e) * (phi - e);
            return;
        }
        let r = rot[MeasurementPlan::node_index(depth, prefix)];
        let cd = self.contrast[depth] * (self.sizes[depth] * (phi - r)).cos();
        self.mse_rec(rot, est, phi, depth + 1, prefix << 1, p * 0.5 * (1.0 + cd), acc);
        self.mse_rec(rot, est, phi, depth + 1, prefix << 1 | 1, p * 0.5 * (1.0 - cd), acc);
    }

    /// Staggered start: each node rotates to its posterior mean offset by
    /// ∓π/(2m), alternating across repeated copies of the same block size.
    pub fn staggered_rotations(&self) -> Vec<f64> {
        let depth = self.sizes.len();
        let mut rot = vec![0.0; (1 << depth) - 1];
        let mut level = vec![self.prior.mass().to_vec()];
        for d in 0..depth {
            let m = self.sizes[d];
            let copy = self.sizes[..d].iter().filter(|&&q| q == m).count();
            let sign = if copy % 2 == 0 { 1.0 } else { -1.0 };
            let mut next = Vec::with_capacity(level.len() * 2);
            for (s, pre) in level.iter().enumerate() {
                let b: f64 = pre.iter().sum();
                let a: f64 = pre.iter().zip(&self.prior.nodes).map(|(p, x)| p * x).sum();
                let mean = if b > EMPTY { a / b } else { 0.0 };
                let r = mean - sign * PI / (2.0 * m);
                rot[MeasurementPlan::node_index(d, s)] = r;
                let c = self.contrast[d];
                let (p0, p1): (Vec<f64>, Vec<f64>) = pre
                    .iter()
                    .zip(&self.prior.nodes)
                    .map(|(p, &x)| {
                        let cd = c * (m * (x - r)).cos();
                        (p * 0.5 * (1.0 + cd), p * 0.5 * (1.0 - cd))
                    })
                    .unzip();
                next.push(p0);
                next.push(p1);
            }
            level = next;
        }
        rot
    }
}

/// Per-branch estimators and posterior masses.
#[derive(Clone, Debug)]
pub struct BranchTable {
    pub depth: usize,
    /// Bayes estimator per branch (0 for empty branches).
    pub estimator: Vec<f64>,
    /// ∫ p(n|φ) 𝒫(φ) dφ per branch.
    pub mass: Vec<f64>,
    /// ∫ φ p(n|φ) 𝒫(φ) dφ per branch.
    pub first_moment: Vec<f64>,
}

impl BranchTable {
    /// BMSE via Σ_n (∫φp𝒫)²/∫p𝒫.
    pub fn bmse(&self, prior: &PriorGrid) -> f64 {
        let gain: f64 = self
            .first_moment
            .iter()
            .zip(&self.mass)
            .map(|(a, b)| if *b > EMPTY { a * a / b } else { 0.0 })
            .sum();
        prior.second_moment() - gain
    }
}

pub fn bayes_estimators(plan: &MeasurementPlan, prior: &PriorGrid) -> BranchTable {
    table_from(&Evaluator::for_plan(prior, plan), &plan.rotations)
}

pub fn table_from(ev: &Evaluator, rotations: &[f64]) -> BranchTable {
    let leaves = ev.leaf_moments(rotations);
    BranchTable {
        depth: ev.frequencies().len(),
        estimator: leaves.iter().map(|&(a, b)| if b > EMPTY { a / b } else { 0.0 }).collect(),
        mass: leaves.iter().map(|l| l.1).collect(),
        first_moment: leaves.iter().map(|l| l.0).collect(),
    }
}

/// Probability of outcome string `branch` ('0' even, '1' odd per step).
pub fn branch_probability(plan: &MeasurementPlan, branch: &str, phi: f64) -> Result<f64> {
    let (d, s) = parse_bits(branch)?;
    if d != plan.depth() {
        return Err(Error::invalid(format!("branch has {d} outcomes, plan has {} steps", plan.depth())));
    }
    let mut p = 1.0;
    for step in 0..d {
        let prefix = s >> (d - step);
        let bit = s >> (d - step - 1) & 1;
        let r = plan.rotations[MeasurementPlan::node_index(step, prefix)];
        let half = plan.order[step] as f64 * (phi - r) / 2.0;
        p *= if bit == 0 { half.cos().powi(2) } else { half.sin().powi(2) };
    }
    Ok(p)
}

pub fn bmse(plan: &MeasurementPlan, prior: &PriorGrid) -> f64 {
    Evaluator::for_plan(prior, plan).bmse(&plan.rotations)
}

pub fn bmse_gradient(plan: &MeasurementPlan, prior: &PriorGrid) -> Vec<f64> {
    Evaluator::for_plan(prior, plan).evaluate(&plan.rotations).gradient
}

pub fn mse_curve(plan: &MeasurementPlan, prior: &PriorGrid, phis: &[f64]) -> Vec<f64> {
    Evaluator::for_plan(prior, plan).mse_curve(&plan.rotations, phis)
}

/// Plan with staggered starting rotations, largest block first.
pub fn initial_plan(partition: &Partition, prior: &PriorGrid) -> Result<MeasurementPlan> {
    let mut plan = MeasurementPlan::zeros(partition)?;
    plan.rotations = Evaluator::for_plan(prior, &plan).staggered_rotations();
    Ok(plan)
}

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub step: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub max_steps: usize,
    pub restarts: usize,
    pub seed: u64,
    pub grad_tol: f64,
    pub rel_tol: f64,
    pub window: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step: 0.02,
            beta1: 0.9,
            beta2: 0.999,
            max_steps: 2000,
            restarts: 8,
            seed: 0,
            grad_tol: 1e-6,
            rel_tol: 1e-10,
            window: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RestartReport {
    pub initial_bmse: f64,
    pub bmse: f64,
    pub steps: usize,
    pub converged: bool,
    /// Final BMSE above the starting BMSE.
    pub diverged: bool,
}

#[derive(Clone, Debug)]
pub struct Optimized {
    pub plan: MeasurementPlan,
    pub bmse: f64,
    pub initial_bmse: f64,
    pub restarts: Vec<RestartReport>,
}

/// Adam descent on every node angle from a single start.
pub fn adam(ev: &Evaluator, start: &[f64], cfg: &OptimizerConfig) -> (Vec<f64>, RestartReport) {
    let mut x = start.to_vec();
    let n = x.len();
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut best = (f64::INFINITY, x.clone());
    let mut history: Vec<f64> = Vec::with_capacity(cfg.max_steps);
    let mut initial = f64::NAN;
    let mut converged = false;
    let mut steps = 0;
    for t in 1..=cfg.max_steps {
        steps = t;
        let e = ev.evaluate(&x);
        if t == 1 {
            initial = e.bmse;
        }
        if e.bmse < best.0 {
            best = (e.bmse, x.clone());
        }
        history.push(e.bmse);
        let gmax = e.gradient.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gmax < cfg.grad_tol {
            converged = true;
            break;
        }
        if history.len() > cfg.window {
            let old = history[history.len() - 1 - cfg.window];
            if (old - e.bmse).abs() <= cfg.rel_tol * old.abs() {
                converged = true;
                break;
            }
        }
        let c1 = 1.0 - cfg.beta1.powi(t as i32);
        let c2 = 1.0 - cfg.beta2.powi(t as i32);
        for i in 0..n {
            let g = e.gradient[i];
            m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g;
            m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g * g;
            x[i] -= cfg.step * (m1[i] / c1) / ((m2[i] / c2).sqrt() + 1e-12);
        }
    }
    if !converged {
        let b = ev.bmse(&x);
        if b < best.0 {
            best = (b, x.clone());
        }
    }
    let report = RestartReport { initial_bmse: initial, bmse: best.0, steps, converged, diverged: best.0 > initial };
    (best.1, report)
}

/// Optimises a plan under the evaluator's model.
///
/// Restart 0 starts from `plan`, restart 1 from the staggered rotations, the
/// rest from the staggered rotations perturbed uniformly by up to ±π/(2m)
/// with a seeded stream per restart.
pub fn optimize_with(ev: &Evaluator, plan: &MeasurementPlan, cfg: &OptimizerConfig) -> Optimized {
    let initial_bmse = ev.bmse(&plan.rotations);
    let stagger = ev.staggered_rotations();
    let mut best = (initial_bmse, plan.rotations.clone());
    let mut reports = Vec::new();
    for r in 0..cfg.restarts.max(1) {
        let start = match r {
            0 => plan.rotations.clone(),
            1 => stagger.clone(),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(r as u64);
                let mut s = stagger.clone();
                for d in 0..plan.depth() {
                    let w = PI / (2.0 * plan.order[d] as f64);
                    for p in 0..(1usize << d) {
                        s[MeasurementPlan::node_index(d, p)] += rng.random_range(-w..w);
                    }
                }
                s
            }
        };
        let (x, rep) = adam(ev, &start, cfg);
        if !rep.diverged && rep.bmse < best.0 {
            best = (rep.bmse, x);
        }
        reports.push(rep);
    }
    let mut out = plan.clone();
    out.rotations = best.1;
    Optimized { plan: out, bmse: best.0, initial_bmse, restarts: reports }
}

pub fn optimize_plan(plan: &MeasurementPlan, prior: &PriorGrid, cfg: &OptimizerConfig) -> Optimized {
    optimize_with(&Evaluator::for_plan(prior, plan), plan, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectMode {
    /// Rank by optimal-measurement BMSE, optimise the winner only.
    Rank,
    OptimizeAll,
    OptimizeTopK(usize),
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub partition: Partition,
    pub plan: MeasurementPlan,
    pub bmse: f64,
    /// Every candidate with its optimal-measurement BMSE, best first.
    pub ranking: Vec<(Partition, f64)>,
    /// Enumeration or tree-size limits excluded candidates.
    pub budget_limited: bool,
}

fn tie_order(a: &(Partition, f64), b: &(Partition, f64)) -> std::cmp::Ordering {
    let scale = a.1.abs().max(b.1.abs()).max(f64::MIN_POSITIVE);
    if (a.1 - b.1).abs() > 1e-12 * scale {
        return a.1.total_cmp(&b.1);
    }
    a.0.copies().cmp(&b.0.copies()).then_with(|| a.0.cmp(&b.0))
}

/// Partitions of `n_total` sorted by the BMSE of their state under optimal measurement.
pub fn rank_partitions(
    n_total: usize,
    prior: &PriorGrid,
    k_cap: Option<u32>,
    budget: usize,
) -> Result<(Vec<(Partition, f64)>, bool)> {
    let e = partitions::enumerate_partitions_budget(n_total, k_cap, budget)?;
    let ch = oqi::Characteristic::new(prior, n_total);
    let m2 = prior.second_moment();
    let mut ranked: Vec<(Partition, f64)> = e
        .partitions
        .into_iter()
        .map(|p| {
            let amp = partitions::frequency_amplitudes(&p).amplitude;
            let b = oqi::optimal_l_with(&oqi::real_state(&amp), &ch, m2).bmse;
            (p, b)
        })
        .collect();
    ranked.sort_by(tie_order);
    Ok((ranked, e.truncated))
}

pub fn select_best_partition(
    n_total: usize,
    prior: &PriorGrid,
    mode: SelectMode,
    cfg: &OptimizerConfig,
) -> Result<Selection> {
    let (ranking, truncated) = rank_partitions(n_total, prior, None, 1_000_000)?;
    let feasible: Vec<&(Partition, f64)> = ranking.iter().filter(|(p, _)| p.copies() <= MAX_COPIES).collect();
    if feasible.is_empty() {
        return Err(Error::Budget(format!("no partition of {n_total} has at most {MAX_COPIES} blocks")));
    }
    let skipped_better = ranking[0].0.copies() > MAX_COPIES;
    let take = match mode {
        SelectMode::Rank => 1,
        SelectMode::OptimizeAll => feasible.len(),
        SelectMode::OptimizeTopK(k) => k.max(1).min(feasible.len()),
    };
    let mut best: Option<(Partition, MeasurementPlan, f64)> = None;
    for (p, _) in feasible.into_iter().take(take) {
        let plan = initial_plan(p, prior)?;
        let o = optimize_plan(&plan, prior, cfg);
        if best.as_ref().is_none_or(|b| o.bmse < b.2) {
            best = Some((p.clone(), o.plan, o.bmse));
        }
    }
    let (partition, plan, bmse) = best.expect("at least one candidate");
    Ok(Selection { partition, plan, bmse, ranking, budget_limited: truncated || skipped_better })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::gaussian_prior;

    #[test]
    fn heap_addressing_and_json() {
        let p: Partition = "1x2+2x1".parse().unwrap();
        let mut plan = MeasurementPlan::zeros(&p).unwrap();
        assert_eq!(plan.order, vec![2, 1, 1]);
        assert_eq!(plan.rotations.len(), 7);
        for (i, r) in plan.rotations.iter_mut().enumerate() {
            *r = i as f64 * 0.1;
        }
        assert_eq!(plan.rotation("").unwrap(), 0.0);
        assert_eq!(plan.rotation("1").unwrap(), 0.2);
        assert_eq!(plan.rotation("10").unwrap(), 0.5);
        let j = plan.to_json();
        assert_eq!(j["rotations"]["01"], json!(0.4));
        assert_eq!(MeasurementPlan::from_json(&j).unwrap(), plan);
    }

    #[test]
    fn order_must_match() {
        let p: Partition = "1x2+1x1".parse().unwrap();
        assert!(MeasurementPlan::with_order(&p, vec![1, 2]).is_ok());
        assert!(MeasurementPlan::with_order(&p, vec![2, 2]).is_err());
        let big = Partition::new([(0, 18)]).unwrap();
        assert!(matches!(MeasurementPlan::zeros(&big), Err(Error::Budget(_))));
    }

    #[test]
    fn probability_examples() {
        let p: Partition = "1x2+2x1".parse().unwrap();
        let plan = MeasurementPlan::zeros(&p).unwrap();
        assert_eq!(branch_probability(&plan, "000", 0.0).unwrap(), 1.0);
        let s: f64 = (0..8).map(|b| branch_probability(&plan, &bit_string(b, 3), 0.37).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-15);
        let two = MeasurementPlan::zeros(&"1x2".parse().unwrap()).unwrap();
        assert!(branch_probability(&two, "0", PI / 2.0).unwrap() < 1e-30);
    }

    #[test]
    fn uninformative_plan_has_zero_estimators() {
        let g = gaussian_prior(0.7, 512).unwrap();
        let plan = MeasurementPlan::zeros(&"1x1".parse().unwrap()).unwrap();
        let t = bayes_estimators(&plan, &g);
        assert!(t.estimator.iter().all(|e| e.abs() < 1e-14));
        assert!((bmse(&plan, &g) - g.second_moment()).abs() < 1e-14);
    }

    #[test]
    fn quarter_turn_gives_opposite_estimators() {
        let g = gaussian_prior(0.7, 512).unwrap();
        let mut plan = MeasurementPlan::zeros(&"1x1".parse().unwrap()).unwrap();
        plan.rotations[0] = PI / 2.0;
        let t = bayes_estimators(&plan, &g);
        assert!((t.estimator[0] + t.estimator[1]).abs() < 1e-14);
        assert!(t.estimator[0].abs() > 0.1);
    }
}
