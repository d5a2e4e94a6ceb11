//! Optimal quantum interferometer: the minimal Bayesian MSE over states and
//! measurements, by alternating optimisation in the J_z frequency basis.

use crate::error::{Error, Result};
use crate::prior::PriorGrid;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Λ_φ(ρ): element (a, b) picks up e^{−iφ(a−b)}.
pub fn propagate(rho: &CMatrix, phi: f64) -> CMatrix {
    let mut out = rho.clone();
    for ((a, b), v) in out.iter_mut().enumerate().map(|(i, v)| ((i % rho.nrows(), i / rho.nrows()), v)) {
        let d = a as f64 - b as f64;
        *v *= (-I * phi * d).exp();
    }
    out
}

/// Pure-state density matrix |ψ⟩⟨ψ|.
pub fn pure_state(amplitudes: &[Complex64]) -> CMatrix {
    let v = DVector::from_column_slice(amplitudes);
    &v * v.adjoint()
}

/// Density matrix of a real amplitude vector.
pub fn real_state(amplitudes: &[f64]) -> CMatrix {
    let c: Vec<Complex64> = amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    pure_state(&c)
}

/// Sine-state amplitudes sin(π(n+1)/(N+2)), normalised, n = 0..N.
pub fn sine_state(n_total: usize) -> Vec<f64> {
    let n2 = (n_total + 2) as f64;
    let mut v: Vec<f64> = (0..=n_total)
        .map(|n| (std::f64::consts::PI * (n as f64 + 1.0) / n2).sin())
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// ∫𝒫 e^{−iφd} and ∫𝒫 φ e^{−iφd} for d = −D..D, stored at index d + D.
#[derive(Clone, Debug)]
pub struct Characteristic {
    pub max_d: usize,
    pub chi: Vec<Complex64>,
    pub psi: Vec<Complex64>,
}

impl Characteristic {
    pub fn new(prior: &PriorGrid, max_d: usize) -> Characteristic {
        let len = 2 * max_d + 1;
        let mut chi = vec![Complex64::new(0.0, 0.0); len];
        let mut psi = vec![Complex64::new(0.0, 0.0); len];
        for (&x, &m) in prior.nodes.iter().zip(prior.mass()) {
            for d in 0..=max_d {
                let e = (-I * x * d as f64).exp() * m;
                chi[max_d + d] += e;
                psi[max_d + d] += e * x;
            }
        }
        for d in 1..=max_d {
            chi[max_d - d] = chi[max_d + d].conj();
            psi[max_d - d] = psi[max_d + d].conj();
        }
        Characteristic { max_d, chi, psi }
    }

    pub fn chi(&self, d: i64) -> Complex64 {
        self.chi[(self.max_d as i64 + d) as usize]
    }

    pub fn psi(&self, d: i64) -> Complex64 {
        self.psi[(self.max_d as i64 + d) as usize]
    }
}

/// ρ̄ = ∫𝒫 Λ_φ(ρ) and ρ̄′ = ∫𝒫 φ Λ_φ(ρ).
pub fn averaged(rho: &CMatrix, ch: &Characteristic) -> (CMatrix, CMatrix) {
    let n = rho.nrows();
    let bar = CMatrix::from_fn(n, n, |a, b| rho[(a, b)] * ch.chi(a as i64 - b as i64));
    let prime = CMatrix::from_fn(n, n, |a, b| rho[(a, b)] * ch.psi(a as i64 - b as i64));
    (bar, prime)
}

/// Optimal estimator operator for a fixed state.
#[derive(Clone, Debug)]
pub struct LSolution {
    pub l: CMatrix,
    pub bmse: f64,
    /// Set when some λ_i + λ_j fell below the pseudo-inverse cutoff.
    pub rank_deficient: bool,
}

/// Relative cutoff on λ_i + λ_j below which L entries are zeroed.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Solves {L, ρ̄} = 2ρ̄′ and returns L with the BMSE m₂ − Tr(ρ̄L²).
pub fn optimal_l(rho: &CMatrix, prior: &PriorGrid) -> LSolution {
    let ch = Characteristic::new(prior, rho.nrows().saturating_sub(1));
    optimal_l_with(rho, &ch, prior.second_moment())
}

pub fn optimal_l_with(rho: &CMatrix, ch: &Characteristic, m2: f64) -> LSolution {
    let (bar, prime) = averaged(rho, ch);
    let eig = bar.symmetric_eigen();
    let lam = &eig.eigenvalues;
    let v = &eig.eigenvectors;
    let rp = v.adjoint() * &prime * v;
    let n = rho.nrows();
    let lmax = lam.iter().cloned().fold(0.0f64, f64::max);
    let cut = PINV_CUTOFF * lmax.max(f64::MIN_POSITIVE);
    let mut deficient = false;
    let mut gain = 0.0;
    let lt = CMatrix::from_fn(n, n, |i, j| {
        let s = lam[i] + lam[j];
        if s > cut {
            let x = rp[(i, j)] * (2.0 / s);
            gain += 0.5 * s * x.norm_sqr();
            x
        } else {
            deficient = true;
            Complex64::new(0.0, 0.0)
        }
    });
    let l = v * lt * v.adjoint();
    LSolution { l, bmse: m2 - gain, rank_deficient: deficient }
}

/// Best BMSE of a fixed pure state with real amplitudes under optimal measurement.
pub fn state_bmse(amplitudes: &[f64], prior: &PriorGrid) -> f64 {
    optimal_l(&real_state(amplitudes), prior).bmse
}

/// X = L²∘χ̄ − 2L∘ψ̄, so that BMSE(ρ, L) = m₂ + Tr(ρX).
pub fn state_operator(l: &CMatrix, ch: &Characteristic) -> CMatrix {
    let l2 = l * l;
    let n = l.nrows();
    CMatrix::from_fn(n, n, |c, d| {
        let k = c as i64 - d as i64;
        l2[(c, d)] * ch.chi(k).conj() - l[(c, d)] * ch.psi(k).conj() * 2.0
    })
}

#[derive(Clone, Debug)]
pub struct OqiOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Extra starts from seeded random states besides the sine state.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for OqiOptions {
    fn default() -> Self {
        OqiOptions { tol: 1e-10, max_iter: 1000, random_starts: 0, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct OqiSolution {
    pub dim: usize,
    pub rho: CMatrix,
    pub l: CMatrix,
    pub bmse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// BMSE after every L step of the winning start.
    pub history: Vec<f64>,
}

impl OqiSolution {
    /// Diagonal of ρ: the optimal state's weight on each J_z eigenvalue.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.rho[(i, i)].re).collect()
    }
}

/// Alternates optimal-L and optimal-ρ steps from `start`.
pub fn iterate_from(start: &[Complex64], prior: &PriorGrid, opts: &OqiOptions) -> OqiSolution {
    let dim = start.len();
    let ch = Characteristic::new(prior, dim - 1);
    let m2 = prior.second_moment();
    let mut rho = pure_state(start);
    let mut best: Option<(f64, CMatrix, CMatrix)> = None;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let sol = optimal_l_with(&rho, &ch, m2);
        history.push(sol.bmse);
        let prev = best.as_ref().map(|b| b.0);
        if prev.is_none_or(|p| sol.bmse < p) {
            best = Some((sol.bmse, rho.clone(), sol.l.clone()));
        }
        if let Some(p) = prev {
            if (p - sol.bmse).abs() <= opts.tol * p.abs() {
                converged = true;
                break;
            }
        }
        let x = state_operator(&sol.l, &ch);
        let eig = x.symmetric_eigen();
        let imin = eig.eigenvalues.imin();
        let v: Vec<Complex64> = eig.eigenvectors.column(imin).iter().cloned().collect();
        rho = pure_state(&v);
    }
    let (bmse, rho, l) = best.expect("at least one iteration");
    OqiSolution { dim, rho, l, bmse, iterations, converged, history }
}

/// Minimal BMSE over all N-qubit states and measurements.
pub fn solve_oqi(n_total: usize, prior: &PriorGrid, opts: &OqiOptions) -> Result<OqiSolution> {
    if n_total == 0 {
        return Err(Error::invalid("n_total must be at least 1"));
    }
    let sine: Vec<Complex64> = sine_state(n_total).into_iter().map(|a| Complex64::new(a, 0.0)).collect();
    let mut best = iterate_from(&sine, prior, opts);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_starts {
        let mut v: Vec<Complex64> =
            (0..=n_total).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|c| *c /= norm);
        let sol = iterate_from(&v, prior, opts);
        if sol.bmse < best.bmse {
            best = sol;
        }
    }
    Ok(best)
}

/// MSE(φ) = Tr[Λ_φ(ρ)(φ − L)²] of the optimal state and measurement.
pub fn mse_curve(sol: &OqiSolution, phis: &[f64]) -> Vec<f64> {
    let l2 = &sol.l * &sol.l;
    phis.iter()
        .map(|&phi| {
            let r = propagate(&sol.rho, phi);
            let t1 = (&r * &sol.l).trace().re;
            let t2 = (&r * &l2).trace().re;
            phi * phi - 2.0 * phi * t1 + t2
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::gaussian_prior;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn propagate_examples() {
        let h = 0.5f64.sqrt();
        let rho = pure_state(&[c(h), c(0.0), c(h)]);
        assert_eq!(propagate(&rho, 0.0), rho);
        let out = propagate(&rho, std::f64::consts::FRAC_PI_2);
        assert!((out[(0, 2)] - c(-0.5)).norm() < 1e-15);
        assert!((out[(2, 0)] - c(-0.5)).norm() < 1e-15);
        let diag = CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.2), c(0.3), c(0.5)]));
        assert_eq!(propagate(&diag, 1.234), diag);
    }

    #[test]
    fn maximally_mixed_gives_prior_variance() {
        let g = gaussian_prior(0.7, 512).unwrap();
        let rho = CMatrix::identity(4, 4) / c(4.0);
        let s = optimal_l(&rho, &g);
        assert!(s.l.iter().all(|x| x.norm() < 1e-14));
        assert!((s.bmse - g.second_moment()).abs() < 1e-14);
    }

    #[test]
    fn anticommutator_residual() {
        let g = gaussian_prior(0.7, 512).unwrap();
        let rho = real_state(&sine_state(6));
        let ch = Characteristic::new(&g, 6);
        let s = optimal_l_with(&rho, &ch, g.second_moment());
        let (bar, prime) = averaged(&rho, &ch);
        let r = &s.l * &bar + &bar * &s.l - &prime * c(2.0);
        assert!(r.norm() <= 1e-8 * prime.norm());
    }

    #[test]
    fn iterations_are_monotone() {
        let g = gaussian_prior(0.7, 512).unwrap();
        let sol = solve_oqi(8, &g, &OqiOptions::default()).unwrap();
        for w in sol.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let tr: f64 = sol.populations().iter().sum();
        assert!((tr - 1.0).abs() < 1e-12);
        assert!(sol.bmse > 0.0 && sol.bmse < 0.49);
    }
}
