//! The law of tau, the first exit time of standard Brownian motion from
//! [-1, 1].
//!
//! Two complementary series realize the distribution, both consequences of
//! the Laplace transform E exp(-lambda tau) = 1/cosh(sqrt(2 lambda)):
//!
//! * spectral (eigenfunction) series, fast for large t:
//!   P(tau > t) = (4/pi) sum_{n>=0} (-1)^n/(2n+1) exp(-(2n+1)^2 pi^2 t / 8)
//! * method-of-images series, fast for small t:
//!   P(tau > t) = 1 + 4 sum_{j>=1} (-1)^j Phi(-(2j-1)/sqrt(t))
//!
//! Termwise differentiation gives the density in each regime. Sampling is
//! inverse-CDF: a 4096-point quantile table brackets the draw and a
//! safeguarded Newton refinement pushes the survival residual below 1e-10.

use crate::error::{Error, Result};
use crate::quadrature::gl64;
use crate::special::normal_cdf;
use rand::Rng;
use std::sync::OnceLock;

const QUANTILE_POINTS: usize = 4096;
const REFINE_TOL: f64 = 1e-10;

/// Default law, built once per process.
pub fn standard_law() -> &'static FirstExitLaw {
    static LAW: OnceLock<FirstExitLaw> = OnceLock::new();
    LAW.get_or_init(FirstExitLaw::default)
}

/// The distribution of tau = inf{t > 0 : |B_t| = 1}.
///
/// Immutable after construction; share freely across workers.
#[derive(Debug, Clone)]
pub struct FirstExitLaw {
    pub series_tolerance: f64,
    pub crossover_time: f64,
    /// times[i] solves CDF(t) = i / QUANTILE_POINTS; times[0] = 0 and the
    /// last entry is the tail cap where survival ~ 1e-14.
    quantile_table: Vec<f64>,
    tail_cap: f64,
}

impl Default for FirstExitLaw {
    fn default() -> Self {
        Self::new(1e-12, 0.5)
    }
}

impl FirstExitLaw {
    pub fn new(series_tolerance: f64, crossover_time: f64) -> Self {
        assert!(series_tolerance > 0.0 && crossover_time > 0.0);
        let mut law = FirstExitLaw {
            series_tolerance,
            crossover_time,
            quantile_table: Vec::new(),
            tail_cap: 0.0,
        };
        // Cap where the leading spectral term reaches 1e-14.
        law.tail_cap = 8.0 / (std::f64::consts::PI.powi(2))
            * (4.0 / (std::f64::consts::PI * 1e-14)).ln();
        law.build_quantile_table();
        law
    }

    /// P(tau > t).
    pub fn survival(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::domain(format!("survival: non-finite t = {t}")));
        }
        if t < 0.0 {
            return Err(Error::domain(format!("survival: negative t = {t}")));
        }
        Ok(self.survival_unchecked(t))
    }

    fn survival_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 {
            1.0
        } else if t < self.crossover_time {
            self.survival_images(t)
        } else {
            self.survival_spectral(t)
        }
    }

    /// Large-t eigenfunction series for P(tau > t).
    pub fn survival_spectral(&self, t: f64) -> f64 {
        let c = std::f64::consts::PI * std::f64::consts::PI * t / 8.0;
        let mut acc = 0.0;
        let mut sign = 1.0;
        for n in 0..200 {
            let m = (2 * n + 1) as f64;
            let term = sign * 4.0 / (m * std::f64::consts::PI) * (-m * m * c).exp();
            acc += term;
            if term.abs() <= self.series_tolerance {
                break;
            }
            sign = -sign;
        }
        acc
    }

    /// Small-t method-of-images series for P(tau > t).
    pub fn survival_images(&self, t: f64) -> f64 {
        let inv = 1.0 / t.sqrt();
        let mut acc = 1.0;
        let mut sign = -1.0;
        for j in 1..200 {
            let term = sign * 4.0 * normal_cdf(-((2 * j - 1) as f64) * inv);
            acc += term;
            if term.abs() <= self.series_tolerance {
                break;
            }
            sign = -sign;
        }
        acc
    }

    /// Density of tau at t.
    pub fn density(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::domain(format!("density: non-finite t = {t}")));
        }
        if t <= 0.0 {
            return Err(Error::domain(format!("density: t = {t} <= 0")));
        }
        Ok(self.density_unchecked(t))
    }

    fn density_unchecked(&self, t: f64) -> f64 {
        if t < self.crossover_time {
            self.density_images(t)
        } else {
            self.density_spectral(t)
        }
    }

    /// Termwise derivative of the spectral series.
    pub fn density_spectral(&self, t: f64) -> f64 {
        let c = std::f64::consts::PI * std::f64::consts::PI * t / 8.0;
        let mut acc = 0.0;
        let mut sign = 1.0;
        for n in 0..200 {
            let m = (2 * n + 1) as f64;
            let term = sign * std::f64::consts::PI / 2.0 * m * (-m * m * c).exp();
            acc += term;
            if term.abs() <= self.series_tolerance {
                break;
            }
            sign = -sign;
        }
        acc
    }

    /// Termwise derivative of the images series.
    pub fn density_images(&self, t: f64) -> f64 {
        let pref = (2.0 / (std::f64::consts::PI * t * t * t)).sqrt();
        let inv = 0.5 / t;
        let mut acc = 0.0;
        let mut sign = 1.0;
        for j in 0..200 {
            let m = (2 * j + 1) as f64;
            let term = sign * m * (-m * m * inv).exp();
            acc += term;
            if pref * term.abs() <= self.series_tolerance {
                break;
            }
            sign = -sign;
        }
        pref * acc
    }

    /// CDF of tau.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(1.0 - self.survival(t)?)
    }

    /// t such that P(tau > t) = s, for s in (0, 1).
    pub fn quantile_from_survival(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::domain(format!("quantile: survival target {s}")));
        }
        Ok(self.invert_survival(s))
    }

    fn invert_survival(&self, target: f64) -> f64 {
        let n = QUANTILE_POINTS as f64;
        let cdf_target = 1.0 - target;
        let idx = ((cdf_target * n) as usize).min(QUANTILE_POINTS - 1);
        let (mut lo, mut hi);
        if idx + 1 < self.quantile_table.len() {
            lo = self.quantile_table[idx];
            hi = self.quantile_table[idx + 1];
        } else {
            // Beyond the table: invert the leading spectral term for a start.
            lo = self.tail_cap;
            hi = 8.0 / std::f64::consts::PI.powi(2)
                * (4.0 / (std::f64::consts::PI * target)).ln();
            hi = hi.max(lo + 1.0);
            while self.survival_unchecked(hi) > target {
                hi += 5.0;
            }
        }
        // Linear interpolation start, then safeguarded Newton on survival.
        let s_lo = self.survival_unchecked(lo.max(1e-300));
        let s_hi = self.survival_unchecked(hi);
        let mut t = if s_lo > s_hi {
            lo + (hi - lo) * (s_lo - target) / (s_lo - s_hi)
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..80 {
            let s = self.survival_unchecked(t);
            let resid = s - target;
            if resid.abs() <= REFINE_TOL {
                break;
            }
            if resid > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let p = self.density_unchecked(t.max(1e-12));
            let step = resid / p;
            let cand = t + step;
            t = if cand > lo && cand < hi {
                cand
            } else {
                0.5 * (lo + hi)
            };
        }
        t
    }

    /// Draw one tau.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = loop {
            let u: f64 = rng.random();
            if u > 0.0 && u < 1.0 {
                break u;
            }
        };
        self.invert_survival(u)
    }

    /// Integral of t^p * density(t) over (0, infinity) by composite
    /// Gauss-Legendre; the integrand is superexponentially small past the
    /// tail cap.
    pub fn moment(&self, p: u32) -> f64 {
        let rule = gl64();
        let upper = self.tail_cap + 20.0;
        rule.integrate_panels(0.0, upper, 256, |t| {
            if t <= 0.0 {
                0.0
            } else {
                t.powi(p as i32) * self.density_unchecked(t)
            }
        })
    }

    pub fn tail_cap(&self) -> f64 {
        self.tail_cap
    }

    fn build_quantile_table(&mut self) {
        let mut table = Vec::with_capacity(QUANTILE_POINTS + 1);
        table.push(0.0);
        let n = QUANTILE_POINTS as f64;
        let mut prev = 1e-3f64;
        for i in 1..QUANTILE_POINTS {
            let target = 1.0 - i as f64 / n;
            // Warm-start bisection bracket from the previous quantile.
            let mut lo = prev;
            let mut hi = (prev * 2.0).max(prev + 0.05);
            while self.survival_unchecked(hi) > target {
                lo = hi;
                hi *= 1.5;
            }
            while self.survival_unchecked(lo) < target && lo > 1e-8 {
                lo *= 0.5;
            }
            let mut t = 0.5 * (lo + hi);
            for _ in 0..80 {
                let s = self.survival_unchecked(t);
                let resid = s - target;
                if resid.abs() <= REFINE_TOL {
                    break;
                }
                if resid > 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
                let p = self.density_unchecked(t);
                let cand = t + resid / p;
                t = if cand > lo && cand < hi {
                    cand
                } else {
                    0.5 * (lo + hi)
                };
            }
            table.push(t);
            prev = t;
        }
        table.push(self.tail_cap);
        self.quantile_table = table;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survival_endpoints() {
        let law = FirstExitLaw::default();
        assert_eq!(law.survival(0.0).unwrap(), 1.0);
        // Leading eigenvalue bound at t = 50.
        let tail = law.survival(50.0).unwrap();
        assert!(tail > 0.0 && tail <= 1e-20, "{tail}");
        assert!(law.survival(f64::NAN).is_err());
        assert!(law.survival(-1.0).is_err());
        assert!(law.density(0.0).is_err());
    }

    #[test]
    fn series_agree_near_crossover() {
        let law = FirstExitLaw::default();
        for i in 0..100 {
            let t = 0.3 + 0.4 * (i as f64) / 99.0;
            let a = law.survival_images(t);
            let b = law.survival_spectral(t);
            assert!(
                (a - b).abs() <= 10.0 * law.series_tolerance,
                "t={t}: images={a}, spectral={b}"
            );
            let pa = law.density_images(t);
            let pb = law.density_spectral(t);
            assert!((pa - pb).abs() <= 20.0 * law.series_tolerance);
        }
    }

    #[test]
    fn survival_strictly_decreasing() {
        let law = FirstExitLaw::default();
        let mut prev = law.survival(0.0).unwrap();
        for i in 1..200 {
            let t = i as f64 * 0.05;
            let s = law.survival(t).unwrap();
            assert!(s < prev, "not decreasing at t={t}");
            prev = s;
        }
    }

    #[test]
    fn density_nonnegative_and_vanishing_at_zero() {
        let law = FirstExitLaw::default();
        for i in 1..=300 {
            let t = i as f64 * 0.02;
            assert!(law.density(t).unwrap() >= 0.0);
        }
        assert!(law.density(1e-3).unwrap() < 1e-100);
    }

    #[test]
    fn moments_match_laplace_expansion() {
        let law = FirstExitLaw::default();
        let mass = law.moment(0);
        assert!((mass - 1.0).abs() < 1e-11, "mass {mass}");
        let mean = law.moment(1);
        assert!((mean - 1.0).abs() < 1e-11, "mean {mean}");
        // 1/cosh(sqrt(2 lambda)) = 1 - lambda + (5/6) lambda^2 + ...
        let m2 = law.moment(2);
        assert!((m2 - 5.0 / 3.0).abs() < 1e-10, "m2 {m2}");
    }

    #[test]
    fn laplace_transform_anchor() {
        let law = FirstExitLaw::default();
        let rule = gl64();
        for lambda in [0.5f64, 1.0, 2.0] {
            let lhs = rule.integrate_panels(0.0, law.tail_cap() + 20.0, 256, |t| {
                if t <= 0.0 {
                    0.0
                } else {
                    (-lambda * t).exp() * law.density_unchecked(t)
                }
            });
            let rhs = 1.0 / (2.0 * lambda).sqrt().cosh();
            assert!((lhs - rhs).abs() < 1e-11, "lambda={lambda}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn quantile_roundtrip() {
        let law = FirstExitLaw::default();
        for s in [0.999, 0.9, 0.5, 0.1, 1e-3, 1e-8, 1e-13] {
            let t = law.quantile_from_survival(s).unwrap();
            let back = law.survival(t).unwrap();
            assert!((back - s).abs() <= 2.0 * REFINE_TOL, "s={s}: got {back}");
        }
        assert!(law.quantile_from_survival(0.0).is_err());
        assert!(law.quantile_from_survival(1.0).is_err());
    }

    #[test]
    fn draws_positive() {
        let law = FirstExitLaw::default();
        let mut rng = crate::streams::path_rng(1, crate::streams::Component::TauSampling, 0);
        for _ in 0..2000 {
            assert!(law.sample(&mut rng) > 0.0);
        }
    }
}
