//! Renewal density of the tau-renewal process and the level-k intensity h^k.
//!
//! The jump counting process of the level-k skeleton is a renewal process
//! with interarrivals 2^{-2k} tau, so one Volterra solve of
//! u = p + p * u (p the tau density) on level-0 time serves every level:
//! h^k(t) = u(2^{2k} t) and <A^k, A^k>_t = 2^{-2k} m(2^{2k} t) with m the
//! renewal function. Beyond the solve region the renewal theorem closes the
//! table analytically (u = 1, m linear), which is exact to far below the
//! table tolerance since u - 1 decays exponentially.

use crate::error::{Error, Result};
use crate::first_exit::FirstExitLaw;
use std::sync::OnceLock;

/// Tabulated renewal density u and its integral on a uniform rescaled grid.
#[derive(Debug, Clone)]
pub struct IntensityTable {
    pub ds: f64,
    pub s_max: f64,
    pub u_values: Vec<f64>,
    pub cumulative: Vec<f64>,
}

/// Solve u = p + p * u by forward discretized Volterra convolution
/// (trapezoid rule). p(0) = 0 makes the recursion explicit.
pub fn solve_renewal_density(law: &FirstExitLaw, s_max: f64, ds: f64) -> Result<IntensityTable> {
    if ds <= 0.0 {
        return Err(Error::domain("solve_renewal_density: ds <= 0"));
    }
    if ds > 1e-3 {
        return Err(Error::domain("solve_renewal_density: ds > 1e-3"));
    }
    if s_max < 20.0 {
        return Err(Error::domain("solve_renewal_density: s_max < 20"));
    }
    let n = (s_max / ds).round() as usize;
    let mut p = Vec::with_capacity(n + 1);
    p.push(0.0);
    for i in 1..=n {
        p.push(law.density(i as f64 * ds).unwrap_or(0.0));
    }
    // The tau density decays like exp(-pi^2 s / 8); lags past its numerical
    // support contribute below 1e-18 and are skipped.
    let support = p.iter().rposition(|&v| v > 1e-18).unwrap_or(n);
    let mut u = vec![0.0f64; n + 1];
    for i in 1..=n {
        let lo = i.saturating_sub(support).max(1);
        let mut conv = 0.0;
        // sum_{j=lo}^{i-1} p_{i-j} u_j, running lag-major over contiguous p.
        for j in lo..i {
            conv += p[i - j] * u[j];
        }
        u[i] = p[i] + ds * conv;
    }
    let mut cumulative = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for i in 1..=n {
        acc += 0.5 * ds * (u[i - 1] + u[i]);
        cumulative.push(acc);
    }
    Ok(IntensityTable {
        ds,
        s_max: n as f64 * ds,
        u_values: u,
        cumulative,
    })
}

impl IntensityTable {
    /// Renewal density at rescaled time s; u = 1 past the solve region.
    pub fn u_at(&self, s: f64) -> Result<f64> {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::domain(format!("u_at: s = {s}")));
        }
        Ok(self.u_unchecked(s))
    }

    fn u_unchecked(&self, s: f64) -> f64 {
        if s >= self.s_max {
            return 1.0;
        }
        let pos = s / self.ds;
        let i = pos as usize;
        let w = pos - i as f64;
        self.u_values[i] + w * (self.u_values[i + 1] - self.u_values[i])
    }

    /// Renewal function m(s) = integral of the interpolated u; exact for the
    /// piecewise-linear interpolant (quadratic in-cell), linear past s_max.
    pub fn renewal_at(&self, s: f64) -> Result<f64> {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::domain(format!("renewal_at: s = {s}")));
        }
        Ok(self.renewal_unchecked(s))
    }

    fn renewal_unchecked(&self, s: f64) -> f64 {
        if s >= self.s_max {
            return self.cumulative[self.cumulative.len() - 1] + (s - self.s_max);
        }
        let pos = s / self.ds;
        let i = pos as usize;
        let w = pos - i as f64;
        let du = self.u_values[i + 1] - self.u_values[i];
        self.cumulative[i] + self.ds * (w * self.u_values[i] + 0.5 * w * w * du)
    }

    /// The intensity h^k(t) = u(2^{2k} t).
    pub fn h_k(&self, level: u32, t: f64) -> Result<f64> {
        let scale = (4.0f64).powi(level as i32);
        self.u_at(scale * t)
    }

    /// <A^k, A^k>_t = 2^{-2k} m(2^{2k} t).
    pub fn angle_bracket(&self, level: u32, t: f64) -> Result<f64> {
        let scale = (4.0f64).powi(level as i32);
        Ok(self.renewal_unchecked(
            scale
                * if t.is_finite() && t >= 0.0 {
                    t
                } else {
                    return Err(Error::domain(format!("angle_bracket: t = {t}")));
                },
        ) / scale)
    }

    /// Table-exact integral of h^k over [a, b].
    pub fn angle_increment(&self, level: u32, a: f64, b: f64) -> f64 {
        let scale = (4.0f64).powi(level as i32);
        (self.renewal_unchecked(scale * b) - self.renewal_unchecked(scale * a)) / scale
    }

    /// sup_{0 <= t <= horizon} |<A^k,A^k>_t - t|, evaluated on the table grid.
    pub fn max_bracket_deviation(&self, level: u32, horizon: f64) -> f64 {
        let scale = (4.0f64).powi(level as i32);
        let s_end = scale * horizon;
        let n = ((s_end / self.ds) as usize).min(self.u_values.len() - 1);
        let mut sup = 0.0f64;
        for i in 0..=n {
            let s = i as f64 * self.ds;
            sup = sup.max((self.cumulative[i] - s).abs());
        }
        // Past the table the deviation is frozen at the terminal offset.
        if s_end > self.s_max {
            let last = self.cumulative[self.cumulative.len() - 1];
            sup = sup.max((last - self.s_max).abs());
        }
        sup / scale
    }

    /// Terminal offset c0 in m(s) ~ s - c0 (renewal-theory constant).
    pub fn terminal_offset(&self) -> f64 {
        self.s_max - self.cumulative[self.cumulative.len() - 1]
    }
}

/// Shared table at the spec defaults (s_max = 50, ds = 5e-4), built once per
/// process from the default tau law.
pub fn standard_table() -> &'static IntensityTable {
    static TABLE: OnceLock<IntensityTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let law = FirstExitLaw::default();
        solve_renewal_density(&law, 50.0, 5e-4).expect("default intensity table")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> &'static IntensityTable {
        standard_table()
    }

    #[test]
    fn renewal_density_endpoints() {
        let t = table();
        assert_eq!(t.u_at(0.0).unwrap(), 0.0);
        let end = t.u_at(t.s_max - t.ds).unwrap();
        assert!((end - 1.0).abs() < 1e-3, "u(end) = {end}");
        assert!(t.u_values.iter().all(|&v| v >= 0.0));
        assert!(t.u_at(-1.0).is_err());
        assert!(t.u_at(f64::NAN).is_err());
    }

    #[test]
    fn renewal_function_shape() {
        let t = table();
        // Nondecreasing cumulative; slope approaches 1: m(s) ~ s - 1/6.
        assert!(t.cumulative.windows(2).all(|w| w[1] >= w[0]));
        let c0 = t.terminal_offset();
        assert!((c0 - 1.0 / 6.0).abs() < 2e-3, "c0 = {c0}");
    }

    #[test]
    fn intensity_levels() {
        let t = table();
        assert_eq!(t.h_k(3, 0.0).unwrap(), 0.0);
        for k in [2u32, 4, 6] {
            let v = t.h_k(k, 20.0 * (4.0f64).powi(-(k as i32))).unwrap();
            assert!((v - 1.0).abs() < 1e-3, "k={k}: {v}");
        }
        // Integral of h^k over [0,1] = angle_bracket(1) -> 1.
        for k in [2u32, 4, 6, 8] {
            let ab = t.angle_bracket(k, 1.0).unwrap();
            let tol = 1e-3f64.max(0.2 * (4.0f64).powi(-(k as i32)));
            assert!((ab - 1.0).abs() <= tol, "k={k}: {ab}");
        }
    }

    #[test]
    fn angle_bracket_monotone_and_converging() {
        let t = table();
        for k in [2u32, 4, 6] {
            let mut prev = 0.0;
            for i in 0..=32 {
                let v = t.angle_bracket(k, i as f64 / 32.0).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
        let d2 = t.max_bracket_deviation(2, 1.0);
        let d4 = t.max_bracket_deviation(4, 1.0);
        let d6 = t.max_bracket_deviation(6, 1.0);
        assert!(d2 > d4 && d4 > d6, "{d2} {d4} {d6}");
        // The sup deviation scales as 4^{-k}.
        assert!((d2 / d4 - 16.0).abs() < 0.5);
    }

    #[test]
    fn tail_extension_is_continuous() {
        let t = table();
        let left = t.u_at(t.s_max - 1e-9).unwrap();
        assert!((left - 1.0).abs() < 1e-3);
        assert_eq!(t.u_at(t.s_max + 5.0).unwrap(), 1.0);
        let m_left = t.renewal_at(t.s_max).unwrap();
        let m_right = t.renewal_at(t.s_max + 1.0).unwrap();
        assert!((m_right - m_left - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solver_contract() {
        let law = FirstExitLaw::default();
        assert!(solve_renewal_density(&law, 50.0, -1.0).is_err());
        assert!(solve_renewal_density(&law, 50.0, 0.01).is_err());
        assert!(solve_renewal_density(&law, 5.0, 5e-4).is_err());
    }
}
