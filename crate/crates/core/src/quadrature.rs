//! Gaussian quadrature rules used across the crate.
//!
//! Nodes are found by Newton iteration on the orthonormal three-term
//! recurrences; weights come from the Christoffel function, which is stable
//! at any order used here.

use std::sync::OnceLock;

/// Nodes and weights of an n-point Gauss rule.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> GaussRule {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    GaussRule { nodes, weights }
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl GaussRule {
    /// Integrate f over [a, b] with this rule mapped affinely.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Composite integration over [a, b] split into `panels` equal panels.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            acc += self.integrate(a + p as f64 * h, a + (p + 1) as f64 * h, &mut f);
        }
        acc
    }
}

/// Shared 64-point Gauss–Legendre rule.
pub fn gl64() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(64))
}

/// n-point Gauss–Hermite rule for weight exp(-x^2) on the real line.
///
/// Uses the orthonormal Hermite recurrence; weights are the Christoffel
/// function 1 / sum_j p_j(x_i)^2, which avoids the factorial overflow of the
/// classical formula at n = 64.
pub fn gauss_hermite(n: usize) -> GaussRule {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n / 2;
    let mut z = 0.0f64;
    for i in 0..(m + n % 2) {
        // Initial guesses for roots in decreasing order (largest first).
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        for _ in 0..200 {
            let (p, d, _) = hermite_ortho(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-14 * (1.0 + z.abs()) {
                break;
            }
        }
        let (_, _, sum_sq) = hermite_ortho(n, z);
        let w = 1.0 / sum_sq;
        nodes[i] = z;
        weights[i] = w;
        nodes[n - 1 - i] = -z;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[m] = 0.0;
        let (_, _, sum_sq) = hermite_ortho(n, 0.0);
        weights[m] = 1.0 / sum_sq;
    }
    // Ascending order to match the Legendre convention.
    nodes.reverse();
    weights.reverse();
    GaussRule { nodes, weights }
}

/// Orthonormal Hermite value p_n(x), derivative p_n'(x), and sum of squares
/// of p_0..p_{n-1} at x (the inverse Christoffel function).
fn hermite_ortho(n: usize, x: f64) -> (f64, f64, f64) {
    let mut p0 = std::f64::consts::PI.powf(-0.25);
    let mut sum_sq = p0 * p0;
    let mut p1 = std::f64::consts::SQRT_2 * x * p0;
    for j in 1..n {
        sum_sq += p1 * p1;
        let jf = j as f64;
        let p2 = x * (2.0 / (jf + 1.0)).sqrt() * p1 - (jf / (jf + 1.0)).sqrt() * p0;
        p0 = p1;
        p1 = p2;
    }
    // After the loop p1 = p_n, p0 = p_{n-1}; sum_sq covers p_0..p_{n-1}.
    let d = (2.0 * n as f64).sqrt() * p0;
    (p1, d, sum_sq)
}

/// Shared 64-point Gauss–Hermite rule.
pub fn gh64() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(64))
}

/// E[phi(mean + sd * Z)] for standard normal Z via the shared Hermite rule.
pub fn gaussian_expectation<F: FnMut(f64) -> f64>(mean: f64, sd: f64, mut phi: F) -> f64 {
    let rule = gh64();
    let scale = std::f64::consts::SQRT_2 * sd;
    let mut acc = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        acc += w * phi(mean + scale * x);
    }
    acc / std::f64::consts::PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_exact_on_polynomials() {
        let rule = gauss_legendre(8);
        // 8-point rule is exact through degree 15.
        let val = rule.integrate(0.0, 1.0, |x| x.powi(15));
        assert!((val - 1.0 / 16.0).abs() < 1e-14, "{val}");
        let val = rule.integrate(-2.0, 3.0, |x| 3.0 * x * x);
        assert!((val - (27.0 + 8.0)).abs() < 1e-12);
    }

    #[test]
    fn legendre_64_smooth() {
        let rule = gl64();
        let val = rule.integrate(0.0, std::f64::consts::PI, |x| x.sin());
        assert!((val - 2.0).abs() < 1e-13);
    }

    #[test]
    fn hermite_moments() {
        // Weight exp(-x^2): integral 1 -> sqrt(pi), x^2 -> sqrt(pi)/2, x^4 -> 3 sqrt(pi)/4.
        let rule = gauss_hermite(64);
        let total: f64 = rule.weights.iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let m2: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x * x)
            .sum();
        assert!((m2 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-11);
        let m4: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(4))
            .sum();
        assert!((m4 - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn gaussian_expectation_oracles() {
        let one = gaussian_expectation(0.3, 2.0, |_| 1.0);
        assert!((one - 1.0).abs() < 1e-13);
        let mean = gaussian_expectation(0.7, 1.5, |x| x);
        assert!((mean - 0.7).abs() < 1e-12);
        let sq = gaussian_expectation(0.7, 1.5, |x| x * x);
        assert!((sq - (0.49 + 2.25)).abs() < 1e-11);
        // E sin(m + s Z) = sin(m) exp(-s^2/2)
        let s = gaussian_expectation(1.1, 0.8, |x| x.sin());
        let oracle = 1.1f64.sin() * (-0.32f64).exp();
        assert!((s - oracle).abs() < 1e-12, "{s} vs {oracle}");
    }
}
