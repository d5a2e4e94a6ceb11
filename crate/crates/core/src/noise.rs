//! Parity-contrast noise: amplitude damping, preparation infidelity, readout
//! bit flips, error-detected readout and gain-decay fits.

use crate::adaptive::{self, Evaluator, MeasurementPlan, OptimizerConfig, Optimized};
use crate::error::{Error, Result};
use crate::prior::PriorGrid;
use serde::{Deserialize, Serialize};

/// Per-qubit noise parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Amplitude-damping probability.
    pub p_a: f64,
    /// Readout bit-flip probability.
    pub p_e: f64,
    /// Effective preparation fidelity per qubit.
    pub f0: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::IDEAL
    }
}

impl NoiseModel {
    pub const IDEAL: NoiseModel = NoiseModel { p_a: 0.0, p_e: 0.0, f0: 1.0 };

    pub fn new(p_a: f64, p_e: f64, f0: f64) -> Result<NoiseModel> {
        if !(0.0..=1.0).contains(&p_a) {
            return Err(Error::invalid(format!("p_a must lie in [0, 1], got {p_a}")));
        }
        if !(0.0..=0.5).contains(&p_e) {
            return Err(Error::invalid(format!("p_e must lie in [0, 1/2], got {p_e}")));
        }
        if !(f0 > 0.0 && f0 <= 1.0) {
            return Err(Error::invalid(format!("f0 must lie in (0, 1], got {f0}")));
        }
        Ok(NoiseModel { p_a, p_e, f0 })
    }

    pub fn damping(p_a: f64) -> Result<NoiseModel> {
        NoiseModel::new(p_a, 0.0, 1.0)
    }

    /// Parity contrast of a k-qubit block: (1−p_a)^{k/2}(1−2p_e)^k F₀^k.
    pub fn contrast(&self, k: usize) -> f64 {
        let k = k as f64;
        (1.0 - self.p_a).powf(k / 2.0) * bitflip_contrast(k as usize, self.p_e) * self.f0.powf(k)
    }

    pub fn is_ideal(&self) -> bool {
        *self == NoiseModel::IDEAL
    }

    /// Contrast per measurement step of `order`.
    pub fn contrasts(&self, order: &[usize]) -> Vec<f64> {
        order.iter().map(|&k| self.contrast(k)).collect()
    }
}

/// Even/odd probabilities of a damped k-qubit GHZ parity readout after rotation Φ.
pub fn damped_parity_probs(k: usize, p_a: f64, phi: f64, rotation: f64) -> (f64, f64) {
    let c = (1.0 - p_a).powf(k as f64 / 2.0) * (k as f64 * (phi - rotation)).cos();
    (0.5 * (1.0 + c), 0.5 * (1.0 - c))
}

/// Even-minus-odd parity of k independent flips with probability p_e.
pub fn bitflip_contrast(k: usize, p_e: f64) -> f64 {
    (1.0 - 2.0 * p_e).powi(k as i32)
}

/// Even, odd and discard probabilities when decay events are detected and
/// the affected records thrown away.
pub fn error_detected_parity_probs(k: usize, p_a: f64, phi: f64) -> Result<(f64, f64, f64)> {
    if k < 2 {
        return Err(Error::invalid("error detection needs a block of at least two qubits"));
    }
    let s = 1.0 - p_a;
    let full = s.powi(k as i32);
    let c = 2.0 * s.powf(k as f64 / 2.0) * (k as f64 * phi).cos();
    Ok((0.25 * (1.0 + full + c), 0.25 * (1.0 + full - c), 0.5 * (1.0 - full)))
}

/// Classical Fisher information about φ of one damped parity readout, with or
/// without error detection.
pub fn parity_fisher(k: usize, p_a: f64, phi: f64, detected: bool) -> f64 {
    let kf = k as f64;
    let amp = (1.0 - p_a).powf(kf / 2.0);
    let d = -0.5 * amp * kf * (kf * phi).sin();
    let (pe, po) = if detected {
        let full = (1.0 - p_a).powi(k as i32);
        let c = 2.0 * amp * (kf * phi).cos();
        (0.25 * (1.0 + full + c), 0.25 * (1.0 + full - c))
    } else {
        damped_parity_probs(k, p_a, phi, 0.0)
    };
    d * d / pe + d * d / po
}

/// BMSE of a plan whose parities carry the model's contrast; estimators are
/// the Bayes estimators of the noisy model.
pub fn noisy_plan_bmse(plan: &MeasurementPlan, prior: &PriorGrid, noise: &NoiseModel) -> f64 {
    noisy_evaluator(plan, prior, noise).bmse(&plan.rotations)
}

pub fn noisy_evaluator<'a>(plan: &MeasurementPlan, prior: &'a PriorGrid, noise: &NoiseModel) -> Evaluator<'a> {
    Evaluator::for_plan(prior, plan).with_contrast(noise.contrasts(&plan.order))
}

/// Re-optimises the rotations under the noisy model, starting from `plan`.
pub fn optimize_noisy(
    plan: &MeasurementPlan,
    prior: &PriorGrid,
    noise: &NoiseModel,
    cfg: &OptimizerConfig,
) -> Optimized {
    adaptive::optimize_with(&noisy_evaluator(plan, prior, noise), plan, cfg)
}

/// Horizontal axis of a gain-decay sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayAxis {
    /// Points are (F₀, g); decay variable 1 − F₀.
    Fidelity,
    /// Points are (p_e, g); decay variable 2p_e.
    BitFlip,
}

/// Least-squares fit of ln g = ln A − B x; returns (A, B).
pub fn fit_gain_decay(points: &[(f64, f64)], axis: DecayAxis) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::invalid("a decay fit needs at least three points"));
    }
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::invalid("gains must be positive"));
    }
    let xs: Vec<f64> = points
        .iter()
        .map(|&(v, _)| match axis {
            DecayAxis::Fidelity => 1.0 - v,
            DecayAxis::BitFlip => 2.0 * v,
        })
        .collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (slope, intercept) = crate::fit::linear(&xs, &ys)?;
    Ok((intercept.exp(), -slope))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits() {
        let (e, o) = damped_parity_probs(3, 0.0, 0.4, 0.1);
        assert!((e - (1.5f64 * 0.3).cos().powi(2)).abs() < 1e-15);
        assert!((e + o - 1.0).abs() < 1e-15);
        assert_eq!(damped_parity_probs(5, 1.0, 0.3, 0.0), (0.5, 0.5));
        assert_eq!(bitflip_contrast(7, 0.0), 1.0);
        assert_eq!(bitflip_contrast(7, 0.5), 0.0);
        let (e, o, d) = error_detected_parity_probs(4, 0.0, 0.3).unwrap();
        assert_eq!(d, 0.0);
        assert!((e - (2.0f64 * 0.3).cos().powi(2)).abs() < 1e-15 && (e + o - 1.0).abs() < 1e-15);
        assert!(error_detected_parity_probs(1, 0.1, 0.0).is_err());
    }

    #[test]
    fn contrast_composes() {
        let n = NoiseModel::new(0.01, 0.02, 0.99).unwrap();
        let k = 4;
        let prod = NoiseModel::damping(0.01).unwrap().contrast(k)
            * NoiseModel::new(0.0, 0.02, 1.0).unwrap().contrast(k)
            * NoiseModel::new(0.0, 0.0, 0.99).unwrap().contrast(k);
        assert!((n.contrast(k) - prod).abs() < 1e-15);
        assert!(NoiseModel::new(0.1, 0.6, 1.0).is_err());
        assert!(NoiseModel::new(0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let pts: Vec<(f64, f64)> = [0.95f64, 0.96, 0.98, 1.0].iter().map(|&f| (f, 2.5 * (-7.0 * (1.0 - f)).exp())).collect();
        let (a, b) = fit_gain_decay(&pts, DecayAxis::Fidelity).unwrap();
        assert!((a - 2.5).abs() < 1e-10 && (b - 7.0).abs() < 1e-10);
        assert!(fit_gain_decay(&pts[..2], DecayAxis::Fidelity).is_err());
        assert!(fit_gain_decay(&[(0.9, 1.0), (0.95, -1.0), (1.0, 2.0)], DecayAxis::Fidelity).is_err());
    }
}
