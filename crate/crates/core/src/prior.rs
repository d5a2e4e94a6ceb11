//! Prior phase distributions sampled on a quadrature grid.

use crate::error::{Error, Result};
use crate::quadrature;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Points per Gauss–Legendre panel.
pub const PANEL_ORDER: usize = 16;
/// Smallest grid accepted by the constructors.
pub const MIN_NODES: usize = 64;
/// Default Gaussian truncation in units of the standard deviation.
pub const GAUSSIAN_SIGMAS: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Gaussian,
    Uniform,
}

/// Prior density tabulated on composite Gauss–Legendre nodes.
///
/// `mass[j] = weights[j] * density[j]` is cached because nearly every
/// integral in the crate is a sum against it.
#[derive(Clone, Debug)]
pub struct PriorGrid {
    pub kind: PriorKind,
    pub delta_phi: f64,
    pub support: (f64, f64),
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub density: Vec<f64>,
    mass: Vec<f64>,
}

fn round_nodes(node_count: usize) -> usize {
    node_count.div_ceil(PANEL_ORDER) * PANEL_ORDER
}

impl PriorGrid {
    fn build(
        kind: PriorKind,
        delta_phi: f64,
        lo: f64,
        hi: f64,
        node_count: usize,
        f: impl Fn(f64) -> f64,
    ) -> PriorGrid {
        let n = round_nodes(node_count);
        let (nodes, weights) = quadrature::composite(lo, hi, n / PANEL_ORDER, PANEL_ORDER);
        let mut density: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
        let z: f64 = weights.iter().zip(&density).map(|(w, d)| w * d).sum();
        for d in &mut density {
            *d /= z;
        }
        let mass = weights.iter().zip(&density).map(|(w, d)| w * d).collect();
        PriorGrid { kind, delta_phi, support: (lo, hi), nodes, weights, density, mass }
    }

    /// Quadrature weight times density at each node.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫ 𝒫(φ) φ^k dφ on the grid.
    pub fn moment(&self, k: i32) -> f64 {
        self.nodes.iter().zip(&self.mass).map(|(x, m)| m * x.powi(k)).sum()
    }

    /// Grid second moment; the reference from which every BMSE is subtracted.
    pub fn second_moment(&self) -> f64 {
        self.moment(2)
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// The law of `factor · φ`: nodes and support stretched, density rescaled.
    pub fn scaled(&self, factor: f64) -> PriorGrid {
        assert!(factor > 0.0, "scale factor must be positive");
        PriorGrid {
            kind: self.kind,
            delta_phi: self.delta_phi * factor,
            support: (self.support.0 * factor, self.support.1 * factor),
            nodes: self.nodes.iter().map(|x| x * factor).collect(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            density: self.density.iter().map(|d| d / factor).collect(),
            mass: self.mass.clone(),
        }
    }

    /// Same prior resampled with a different node count.
    pub fn with_nodes(&self, node_count: usize) -> Result<PriorGrid> {
        match self.kind {
            PriorKind::Gaussian => {
                let sig = (self.support.1 - self.support.0) / (2.0 * self.delta_phi);
                gaussian_prior_truncated(self.delta_phi, node_count, sig)
            }
            PriorKind::Uniform => uniform_prior(self.support.0, self.support.1, node_count),
        }
    }
}

/// Gaussian prior of standard deviation `delta_phi` on `±8 δφ`.
pub fn gaussian_prior(delta_phi: f64, node_count: usize) -> Result<PriorGrid> {
    gaussian_prior_truncated(delta_phi, node_count, GAUSSIAN_SIGMAS)
}

/// Gaussian prior truncated at `±sigmas · δφ` and renormalised on the grid.
pub fn gaussian_prior_truncated(delta_phi: f64, node_count: usize, sigmas: f64) -> Result<PriorGrid> {
    if !(delta_phi > 0.0) || !delta_phi.is_finite() {
        return Err(Error::invalid(format!("delta_phi must be positive, got {delta_phi}")));
    }
    if node_count < MIN_NODES {
        return Err(Error::invalid(format!("node_count must be at least {MIN_NODES}, got {node_count}")));
    }
    if !(sigmas > 0.0) {
        return Err(Error::invalid("truncation must be positive"));
    }
    let v = delta_phi * delta_phi;
    let c = 1.0 / (2.0 * PI * v).sqrt();
    let h = sigmas * delta_phi;
    Ok(PriorGrid::build(PriorKind::Gaussian, delta_phi, -h, h, node_count, |x| {
        c * (-x * x / (2.0 * v)).exp()
    }))
}

/// Flat prior on `[lo, hi]`.
pub fn uniform_prior(lo: f64, hi: f64, node_count: usize) -> Result<PriorGrid> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    if node_count < MIN_NODES {
        return Err(Error::invalid(format!("node_count must be at least {MIN_NODES}, got {node_count}")));
    }
    let d = 1.0 / (hi - lo);
    let dphi = (hi - lo) / 12f64.sqrt();
    Ok(PriorGrid::build(PriorKind::Uniform, dphi, lo, hi, node_count, |_| d))
}

/// Node count that resolves `cos(bandwidth·φ)` with `per_period` nodes per
/// period over `width` radians of support, never below 512.
pub fn nodes_for(bandwidth: usize, width: f64, per_period: f64) -> usize {
    let periods = bandwidth.max(1) as f64 * width / (2.0 * PI);
    round_nodes(((periods * per_period).ceil() as usize).max(512))
}

/// Default Gaussian grid for a protocol with total phase bandwidth `bandwidth`.
pub fn gaussian_for(delta_phi: f64, bandwidth: usize) -> Result<PriorGrid> {
    let n = nodes_for(bandwidth, 2.0 * GAUSSIAN_SIGMAS * delta_phi, 10.0);
    gaussian_prior(delta_phi, n)
}

/// Default uniform grid for a protocol with total phase bandwidth `bandwidth`.
pub fn uniform_for(lo: f64, hi: f64, bandwidth: usize) -> Result<PriorGrid> {
    uniform_prior(lo, hi, nodes_for(bandwidth, hi - lo, 10.0))
}
