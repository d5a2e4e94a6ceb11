//! Small least-squares helpers used for scaling and decay fits.

use crate::error::{Error, Result};

/// Ordinary least squares y ≈ a·x + b; returns (a, b).
pub fn linear(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("linear fit needs at least two paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("linear fit needs distinct abscissae"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    Ok((a, my - a * mx))
}

/// Constant c minimising Σ (ln value − ln c·reference)², i.e. the geometric
/// mean of the ratios.
pub fn overhead_constant(values: &[f64], reference: &[f64]) -> Result<f64> {
    if values.len() != reference.len() || values.is_empty() {
        return Err(Error::invalid("overhead fit needs paired, non-empty inputs"));
    }
    if values.iter().chain(reference).any(|v| !(*v > 0.0)) {
        return Err(Error::invalid("overhead fit needs positive inputs"));
    }
    let s: f64 = values.iter().zip(reference).map(|(v, r)| (v / r).ln()).sum();
    Ok((s / values.len() as f64).exp())
}

/// Power-law exponent of y ∝ x^p from a log-log fit.
pub fn power_law_exponent(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    Ok(linear(&lx, &ly)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line() {
        let (a, b) = linear(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((a - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        assert!(linear(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn overhead() {
        let c = overhead_constant(&[2.0, 8.0], &[1.0, 2.0]).unwrap();
        assert!((c - 8f64.sqrt()).abs() < 1e-14);
        assert!(overhead_constant(&[1.0], &[0.0]).is_err());
        let p = power_law_exponent(&[1.0, 10.0, 100.0], &[3.0, 0.3, 0.03]).unwrap();
        assert!((p + 1.0).abs() < 1e-12);
    }
}
