//! Allan deviation of clocks built on the phase-estimation protocols.
//!
//! Rates are in inverse units of `tau`; the prior width grows as
//! δφ = γ_LO·T and single-atom damping over one cycle reduces the fringe
//! contrast by e^{−γ_ind T} per atom.

use crate::error::{Error, Result};
use crate::prior;
use crate::schemes;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// N-atom CSS with Bayes estimation, one Ramsey time per cycle.
    Uncorrelated,
    /// One N-atom GHZ state per cycle.
    Ghz,
    /// Projection-noise-limited CSS with slips removed, T = τ.
    BestClassical,
    /// Heisenberg-limited π/N with slips removed, T = τ, no damping.
    Oqc,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Uncorrelated, Protocol::Ghz, Protocol::BestClassical, Protocol::Oqc];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Uncorrelated => "uncorrelated",
            Protocol::Ghz => "ghz",
            Protocol::BestClassical => "best-classical",
            Protocol::Oqc => "oqc",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Protocol> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown protocol '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    /// Free-running laser linewidth.
    pub gamma_lo: f64,
    /// Single-atom decay rate.
    pub gamma_ind: f64,
    /// Atomic transition angular frequency.
    pub omega_a: f64,
    pub n_atoms: usize,
    pub protocol: Protocol,
}

impl ClockConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_lo > 0.0 && self.gamma_lo.is_finite()) {
            return Err(Error::invalid("gamma_lo must be positive"));
        }
        if !(self.gamma_ind > 0.0 && self.gamma_ind.is_finite()) {
            return Err(Error::invalid("gamma_ind must be positive"));
        }
        if !(self.omega_a > 0.0 && self.omega_a.is_finite()) {
            return Err(Error::invalid("omega_a must be positive"));
        }
        if self.n_atoms == 0 {
            return Err(Error::invalid("n_atoms must be positive"));
        }
        Ok(())
    }
}

/// Variance added by 2πk fold errors for a Gaussian phase of width δφ.
pub fn slip_variance(delta_phi: f64) -> f64 {
    let s = std::f64::consts::SQRT_2 * delta_phi;
    let mut acc = 0.0;
    for k in 1.. {
        let kf = k as f64;
        // erf(b) − erf(a) = erfc(a) − erfc(b) keeps the far tail accurate.
        let mass = erfc((2.0 * kf - 1.0) * PI / s) - erfc((2.0 * kf + 1.0) * PI / s);
        let term = (2.0 * kf * PI).powi(2) * mass;
        acc += term;
        if term < 1e-15 * acc.max(1e-300) || (term == 0.0 && k > 1) {
            break;
        }
    }
    acc
}

/// [(Δφ̃)^{−2} − (δφ)^{−2}]^{−1/2}.
pub fn effective_uncertainty(bmse: f64, delta_phi: f64) -> Result<f64> {
    let prior = delta_phi * delta_phi;
    if !(bmse > 0.0) || bmse >= prior {
        return Err(Error::invalid(format!(
            "posterior variance {bmse} is not below the prior variance {prior}; the measurement is uninformative"
        )));
    }
    Ok((1.0 / (1.0 / bmse - 1.0 / prior)).sqrt())
}

/// Effective variance of one N-atom GHZ parity readout with contrast C:
/// (e^{N²δφ²}/C² − N²δφ²)/N².
pub fn ghz_effective_variance(n: usize, delta_phi: f64, contrast: f64) -> f64 {
    let n2 = (n * n) as f64;
    let x = n2 * delta_phi * delta_phi;
    (x.exp() / (contrast * contrast) - x) / n2
}

/// (1/ω_A)·√(2γ_ind/(τN)).
pub fn fundamental_limit(tau: f64, n_atoms: usize, gamma_ind: f64, omega_a: f64) -> f64 {
    (2.0 * gamma_ind / (tau * n_atoms as f64)).sqrt() / omega_a
}

/// Optimised operating point at one total time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AllanPoint {
    pub tau: f64,
    pub t_opt: f64,
    pub sigma_y: f64,
}

/// Grid of Ramsey times: 200 per decade over [1e-4, 1e2]/γ_LO.
pub fn ramsey_grid(gamma_lo: f64) -> Vec<f64> {
    (0..=1200).map(|i| 10f64.powf(-4.0 + i as f64 / 200.0) / gamma_lo).collect()
}

/// Per-cycle slip-free effective variance for the CSS protocol.
fn css_effective_variance(cfg: &ClockConfig, t: f64) -> f64 {
    let d = cfg.gamma_lo * t;
    let contrast = (-cfg.gamma_ind * t).exp();
    let sig = (PI / d).min(prior::GAUSSIAN_SIGMAS);
    let width = 2.0 * sig * d;
    let n_nodes = prior::nodes_for(cfg.n_atoms, width, 10.0);
    let Ok(grid) = prior::gaussian_prior_truncated(d, n_nodes, sig) else { return f64::INFINITY };
    let Ok(b) = schemes::css_bmse_with(cfg.n_atoms, &grid, contrast) else { return f64::INFINITY };
    effective_uncertainty(b, d).map_or(f64::INFINITY, |u| u * u)
}

/// Allan-deviation model of one clock configuration.
pub struct ClockModel {
    cfg: ClockConfig,
    grid: Vec<f64>,
    /// (Δφ̃_eff², slip variance) per grid point.
    table: Vec<(f64, f64)>,
}

impl ClockModel {
    pub fn new(cfg: ClockConfig) -> Result<ClockModel> {
        cfg.validate()?;
        let grid = ramsey_grid(cfg.gamma_lo);
        let table = match cfg.protocol {
            Protocol::Uncorrelated | Protocol::Ghz => {
                use rayon::prelude::*;
                grid.par_iter().map(|&t| (Self::variance(&cfg, t), slip_variance(cfg.gamma_lo * t))).collect()
            }
            _ => Vec::new(),
        };
        Ok(ClockModel { cfg, grid, table })
    }

    pub fn config(&self) -> &ClockConfig {
        &self.cfg
    }

    fn variance(cfg: &ClockConfig, t: f64) -> f64 {
        let n = cfg.n_atoms;
        match cfg.protocol {
            Protocol::Uncorrelated => css_effective_variance(cfg, t),
            Protocol::Ghz => ghz_effective_variance(n, cfg.gamma_lo * t, (-(n as f64) * cfg.gamma_ind * t).exp()),
            Protocol::BestClassical => (2.0 * cfg.gamma_ind * t).exp() / n as f64,
            Protocol::Oqc => (PI / n as f64).powi(2),
        }
    }

    fn sigma(&self, tau: f64, t: f64, var: f64, slip: f64) -> f64 {
        (var + tau / t * slip).sqrt() / (self.cfg.omega_a * (tau * t).sqrt())
    }

    fn sigma_at(&self, tau: f64, t: f64) -> f64 {
        self.sigma(tau, t, Self::variance(&self.cfg, t), slip_variance(self.cfg.gamma_lo * t))
    }

    /// Minimum over Ramsey times T ≤ τ of σ_y(τ); slip-free protocols use T = τ.
    pub fn allan(&self, tau: f64) -> Result<AllanPoint> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {tau}")));
        }
        if self.table.is_empty() {
            let var = Self::variance(&self.cfg, tau);
            return Ok(AllanPoint { tau, t_opt: tau, sigma_y: self.sigma(tau, tau, var, 0.0) });
        }
        let mut cand: Vec<(f64, f64)> = self
            .grid
            .iter()
            .zip(&self.table)
            .take_while(|(t, _)| **t < tau)
            .map(|(&t, &(v, s))| (t, self.sigma(tau, t, v, s)))
            .collect();
        if tau <= *self.grid.last().expect("non-empty grid") {
            cand.push((tau, self.sigma_at(tau, tau)));
        }
        let (i, &(t_best, s_best)) = cand
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .ok_or_else(|| Error::invalid("tau lies below the Ramsey-time grid"))?;
        if !s_best.is_finite() {
            return Ok(AllanPoint { tau, t_opt: t_best, sigma_y: s_best });
        }
        let lo = cand[i.saturating_sub(1)].0.ln();
        let hi = cand[(i + 1).min(cand.len() - 1)].0.ln();
        let (t, s) = golden_min(|x| self.sigma_at(tau, x.exp()), lo, hi, 60);
        Ok(if s < s_best { AllanPoint { tau, t_opt: t.exp(), sigma_y: s } } else { AllanPoint { tau, t_opt: t_best, sigma_y: s_best } })
    }

    /// σ_y(τ) at every grid Ramsey time T ≤ τ.
    pub fn grid_profile(&self, tau: f64) -> Vec<(f64, f64)> {
        self.grid
            .iter()
            .zip(&self.table)
            .take_while(|(t, _)| **t <= tau)
            .map(|(&t, &(v, s))| (t, self.sigma(tau, t, v, s)))
            .collect()
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// One-shot σ_y(τ) for a configuration.
pub fn allan_deviation(cfg: &ClockConfig, tau: f64) -> Result<AllanPoint> {
    ClockModel::new(*cfg)?.allan(tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slip_limits() {
        assert!(slip_variance(0.1) < 1e-20);
        let mut last = 0.0;
        for i in 0..8 {
            let v = slip_variance(0.5 + 0.5 * i as f64);
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn effective_uncertainty_limits() {
        let d: f64 = 1.0;
        let u = effective_uncertainty(0.01, d).unwrap();
        assert!((u / 0.1 - 1.0 - 0.005).abs() < 1e-4);
        assert!(effective_uncertainty(1.0, d).is_err());
        assert!(effective_uncertainty(1.2, d).is_err());
    }

    #[test]
    fn fundamental_limit_scaling() {
        let a = fundamental_limit(1.0, 200, 1.0, 3.0);
        assert!((a / fundamental_limit(1.0, 400, 1.0, 3.0) - 2f64.sqrt()).abs() < 1e-12);
        assert!((a / fundamental_limit(2.0, 200, 1.0, 3.0) - 2f64.sqrt()).abs() < 1e-12);
        assert!((a - (2.0f64 / 200.0).sqrt() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn protocol_names() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert!("nope".parse::<Protocol>().is_err());
    }
}
