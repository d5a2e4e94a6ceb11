//! Gauss–Legendre rules and composite panels.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Roots are found by Newton iteration on the three-term recurrence,
/// starting from the Tricomi approximation.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// P_n(z) and its derivative.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite rule: `panels` equal panels on `[lo, hi]`, `order` points each.
pub fn composite(lo: f64, hi: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut x = Vec::with_capacity(panels * order);
    let mut w = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let a = lo + h * p as f64;
        for (xi, wi) in gx.iter().zip(&gw) {
            x.push(a + 0.5 * h * (xi + 1.0));
            w.push(0.5 * h * wi);
        }
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "n={n} deg={deg} {s} {exact}");
            }
        }
    }

    #[test]
    fn composite_nodes_increase() {
        let (x, w) = composite(-2.0, 3.0, 7, 16);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(w.iter().all(|&w| w > 0.0));
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.sin().exp()).sum();
        // fine trapezoid reference
        let mut t = 0.0;
        let m = 200_000;
        let h = 5.0 / m as f64;
        for i in 0..=m {
            let xi = -2.0 + h * i as f64;
            let f = xi.sin().exp();
            t += if i == 0 || i == m { 0.5 * f } else { f };
        }
        assert!((s - t * h).abs() < 1e-8);
    }
}
