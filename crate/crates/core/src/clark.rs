//! Martingale-representation density estimation and residual verification.
//!
//! For F with computable conditional expectations E[F | G^k_n], the
//! estimated integrand on [T_n, T_{n+1}) is the conditional-increment
//! difference quotient times h^k; the self-check integrates the estimated
//! density against the true Brownian increments of the coupled grid path and
//! reports Var(residual)/Var(F).

use crate::error::{Error, Result};
use crate::functionals::{generate_brownian, Functional, GridPath};
use crate::intensity::IntensityTable;
use crate::projection::{delta_projection, stochastic_derivative};
use crate::skeleton::{extract_skeleton_from_grid, Skeleton, StepProcess};
use crate::stats::{variance_with_se, Estimate};
use crate::streams::{path_rng, Component};
use rayon::prelude::*;

/// Which first-passage increment enters the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstPassageVariant {
    /// Increments of the exit-time identity T_n + alpha^2 - A^2 (martingale
    /// increments; the default).
    ExitFormula,
    /// The displayed time-increment-only estimator (kept for side-by-side
    /// comparison; its increments have conditional mean 2^{-2k}, not 0).
    PaperDisplay,
}

/// Per-path estimated integrand: ratio step process, h^k applied at
/// evaluation. Zero on [0, T_1).
#[derive(Debug, Clone)]
pub struct DensityPath {
    pub level: u32,
    pub ratios: StepProcess,
}

impl DensityPath {
    pub fn eval(&self, t: f64, table: &IntensityTable) -> Result<f64> {
        Ok(self.ratios.evaluate(t)? * table.h_k(self.level, t)?)
    }

    pub(crate) fn eval_with_h(&self, t: f64, h_value: f64) -> f64 {
        self.ratios.evaluate_unchecked(t) * h_value
    }
}

/// The estimated Clark-Ocone integrand for one skeleton realization.
pub fn clark_ocone_density(f: &Functional, sk: &Skeleton) -> Result<DensityPath> {
    match f {
        Functional::MartingaleTerminal { .. } => {}
        Functional::FirstPassage { .. } => {}
        other => {
            return Err(Error::regime(format!(
                "clark_ocone_density needs a closed-form conditional expectation regime, got {other:?}"
            )))
        }
    }
    let dx = delta_projection(f, sk)?;
    let d = stochastic_derivative(&dx, sk);
    Ok(DensityPath {
        level: sk.level,
        ratios: d.ratios,
    })
}

/// First-passage density under either increment convention.
pub fn first_passage_density(
    sk: &Skeleton,
    alpha: f64,
    variant: FirstPassageVariant,
) -> Result<DensityPath> {
    match variant {
        FirstPassageVariant::ExitFormula => {
            clark_ocone_density(&Functional::FirstPassage { alpha }, sk)
        }
        FirstPassageVariant::PaperDisplay => {
            let h = sk.jump_size();
            let values = sk.lattice_values();
            let mut ratios = Vec::with_capacity(sk.len());
            let mut prev_t = 0.0;
            let mut hit = false;
            for n in 0..sk.len() {
                if hit || values[n].abs() >= alpha - 0.5 * h {
                    hit = true;
                    ratios.push(0.0);
                } else {
                    ratios.push((sk.times[n] - prev_t) / (sk.signs[n] as f64 * h));
                }
                prev_t = sk.times[n];
            }
            Ok(DensityPath {
                level: sk.level,
                ratios: StepProcess {
                    initial_value: 0.0,
                    jump_times: sk.times.clone(),
                    post_jump_values: ratios,
                    horizon: sk.horizon,
                },
            })
        }
    }
}

/// Residual report for one level.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub level: u32,
    /// Var(F - mean F - int D dB) / Var(F).
    pub ratio: f64,
    pub ratio_se: f64,
    pub var_f: f64,
    /// Sample mean of the stochastic integral (should be ~0: centering).
    pub integral: Estimate,
    pub n_paths: usize,
}

/// Grid engine coupled to skeleton extraction on the same driving path:
/// per path R = F - mean(F) - sum_i D(t_i) dB_i, reported as
/// Var(R)/Var(F) with a delta-method standard error.
#[allow(clippy::too_many_arguments)]
pub fn representation_residual(
    f: &Functional,
    levels: &[u32],
    dt: f64,
    horizon: f64,
    start: f64,
    n_paths: usize,
    seed: u64,
    table: &IntensityTable,
    fp_variant: FirstPassageVariant,
) -> Result<Vec<ResidualReport>> {
    let steps = (horizon / dt).round() as usize;
    let h_grids: Vec<Vec<f64>> = levels
        .iter()
        .map(|&k| {
            (0..steps)
                .map(|i| table.h_k(k, i as f64 * dt).unwrap())
                .collect()
        })
        .collect();
    let per_path: Vec<Result<(f64, Vec<f64>)>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, Component::ClarkOcone, p as u64);
            let path = generate_brownian(dt, horizon, start, &mut rng);
            let f_value = terminal_functional_value(f, &path, horizon)?;
            let mut integrals = Vec::with_capacity(levels.len());
            for (li, &k) in levels.iter().enumerate() {
                let gs = extract_skeleton_from_grid(&path, k)?;
                let density = match f {
                    Functional::FirstPassage { alpha } => {
                        first_passage_density(&gs.skeleton, *alpha, fp_variant)?
                    }
                    _ => clark_ocone_density(f, &gs.skeleton)?,
                };
                integrals.push(grid_ito_integral(&density, &path, &h_grids[li], steps));
            }
            Ok((f_value, integrals))
        })
        .collect();
    let mut f_vals = Vec::with_capacity(n_paths);
    let mut integral_cols = vec![Vec::with_capacity(n_paths); levels.len()];
    for r in per_path {
        let (fv, ints) = r?;
        f_vals.push(fv);
        for (i, v) in ints.into_iter().enumerate() {
            integral_cols[i].push(v);
        }
    }
    let f_mean = f_vals.iter().sum::<f64>() / n_paths as f64;
    let (var_f, var_f_se) = variance_with_se(&f_vals);
    let mut reports = Vec::with_capacity(levels.len());
    for (li, &k) in levels.iter().enumerate() {
        let residuals: Vec<f64> = f_vals
            .iter()
            .zip(&integral_cols[li])
            .map(|(fv, iv)| fv - f_mean - iv)
            .collect();
        let (var_r, var_r_se) = variance_with_se(&residuals);
        let ratio = var_r / var_f;
        let ratio_se = ratio * ((var_r_se / var_r).powi(2) + (var_f_se / var_f).powi(2)).sqrt();
        reports.push(ResidualReport {
            level: k,
            ratio,
            ratio_se,
            var_f,
            integral: Estimate::from_sample(&integral_cols[li]),
            n_paths,
        });
    }
    Ok(reports)
}

/// The Riemann-Ito sum sum_i D(t_i) (B_{t_{i+1}} - B_{t_i}) over the grid.
fn grid_ito_integral(density: &DensityPath, path: &GridPath, h_grid: &[f64], steps: usize) -> f64 {
    let times = &density.ratios.jump_times;
    let vals = &density.ratios.post_jump_values;
    let mut acc = 0.0;
    let mut jn = 0usize;
    let mut ratio = 0.0f64;
    for i in 0..steps {
        let t = i as f64 * path.dt;
        while jn < times.len() && times[jn] <= t {
            ratio = vals[jn];
            jn += 1;
        }
        if ratio != 0.0 {
            acc += ratio * h_grid[i] * (path.values[i + 1] - path.values[i]);
        }
    }
    acc
}

/// F evaluated on the whole grid path (terminal payoff or first-passage
/// conditional value at the horizon).
fn terminal_functional_value(f: &Functional, path: &GridPath, horizon: f64) -> Result<f64> {
    match f {
        Functional::MartingaleTerminal { phi, maturity } => {
            Ok(phi.eval(path.value_at(*maturity)))
        }
        Functional::FirstPassage { alpha } => {
            match path.values.iter().position(|v| v.abs() >= *alpha) {
                Some(i) => Ok(i as f64 * path.dt),
                None => {
                    let x = path.value_at(horizon);
                    Ok(horizon + alpha * alpha - x * x)
                }
            }
        }
        other => Err(Error::regime(format!(
            "representation residual needs a martingale regime, got {other:?}"
        ))),
    }
}

/// Ensemble mean density curve on a reporting grid, with an optional
/// pointwise oracle d(B_t) compared on the same coupled paths.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// mean and se of D(t) - oracle(B_t) when an oracle is supplied.
    pub diff_mean: Vec<f64>,
    pub diff_se: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn density_curve(
    f: &Functional,
    level: u32,
    report_times: &[f64],
    dt: f64,
    horizon: f64,
    start: f64,
    n_paths: usize,
    seed: u64,
    table: &IntensityTable,
    oracle: Option<&(dyn Fn(f64) -> f64 + Sync)>,
) -> Result<DensityCurve> {
    let h_values: Vec<f64> = report_times
        .iter()
        .map(|&t| table.h_k(level, t).unwrap())
        .collect();
    let per_path: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, Component::ClarkOcone, p as u64);
            let path = generate_brownian(dt, horizon, start, &mut rng);
            let gs = extract_skeleton_from_grid(&path, level)?;
            let density = clark_ocone_density(f, &gs.skeleton)?;
            let mut d = Vec::with_capacity(report_times.len());
            let mut diff = Vec::with_capacity(report_times.len());
            for (j, &t) in report_times.iter().enumerate() {
                let v = density.eval_with_h(t, h_values[j]);
                d.push(v);
                if let Some(orc) = oracle {
                    diff.push(v - orc(path.value_at(t)));
                }
            }
            Ok((d, diff))
        })
        .collect();
    let nt = report_times.len();
    let mut d_cols = vec![Vec::with_capacity(n_paths); nt];
    let mut diff_cols = vec![Vec::with_capacity(n_paths); nt];
    for r in per_path {
        let (d, diff) = r?;
        for (j, v) in d.into_iter().enumerate() {
            d_cols[j].push(v);
        }
        for (j, v) in diff.into_iter().enumerate() {
            diff_cols[j].push(v);
        }
    }
    let mut out = DensityCurve {
        times: report_times.to_vec(),
        mean: Vec::with_capacity(nt),
        se: Vec::with_capacity(nt),
        diff_mean: Vec::with_capacity(nt),
        diff_se: Vec::with_capacity(nt),
    };
    for j in 0..nt {
        let e = Estimate::from_sample(&d_cols[j]);
        out.mean.push(e.mean);
        out.se.push(e.std_error);
        if oracle.is_some() {
            let e = Estimate::from_sample(&diff_cols[j]);
            out.diff_mean.push(e.mean);
            out.diff_se.push(e.std_error);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::RealFn;
    use crate::intensity::standard_table;

    fn toy_skeleton() -> Skeleton {
        Skeleton {
            level: 2,
            start_value: 0.0,
            times: vec![0.1, 0.25, 0.4, 0.55],
            signs: vec![1, 1, -1, 1],
            horizon: 1.0,
        }
    }

    #[test]
    fn identity_terminal_density_is_h() {
        let table = standard_table();
        let sk = toy_skeleton();
        let f = Functional::MartingaleTerminal {
            phi: RealFn::Linear { a: 1.0, b: 0.0 },
            maturity: 1.0,
        };
        let d = clark_ocone_density(&f, &sk).unwrap();
        // Ratio 1 from T_1 on, so density = h^k there and 0 before.
        assert_eq!(d.eval(0.05, table).unwrap(), 0.0);
        let t = 0.3;
        let expect = table.h_k(2, t).unwrap();
        assert!((d.eval(t, table).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn state_regime_rejected() {
        let sk = toy_skeleton();
        assert!(clark_ocone_density(&Functional::State(RealFn::Square), &sk).is_err());
    }

    #[test]
    fn scale_equivariance() {
        // Replacing F by aF + b scales the density by a exactly, pathwise.
        let sk = toy_skeleton();
        let base = Functional::MartingaleTerminal {
            phi: RealFn::Square,
            maturity: 1.0,
        };
        let scaled = Functional::MartingaleTerminal {
            phi: RealFn::Poly2 {
                a: 3.0,
                b: 0.0,
                c: 1.0,
            },
            maturity: 1.0,
        };
        let d0 = clark_ocone_density(&base, &sk).unwrap();
        let d1 = clark_ocone_density(&scaled, &sk).unwrap();
        for (a, b) in d0
            .ratios
            .post_jump_values
            .iter()
            .zip(&d1.ratios.post_jump_values)
        {
            assert!((3.0 * a - b).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn constant_f_zero_residual() {
        let sk = toy_skeleton();
        let f = Functional::MartingaleTerminal {
            phi: RealFn::Const(2.0),
            maturity: 1.0,
        };
        let d = clark_ocone_density(&f, &sk).unwrap();
        assert!(d.ratios.post_jump_values.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn paper_variant_differs_by_anchor_sum() {
        // Exit-formula ratio minus paper ratio = A_n + A_{n-1} exactly.
        let sk = toy_skeleton();
        let alpha = 0.75;
        let exit = first_passage_density(&sk, alpha, FirstPassageVariant::ExitFormula).unwrap();
        let paper = first_passage_density(&sk, alpha, FirstPassageVariant::PaperDisplay).unwrap();
        let vals = sk.lattice_values();
        for n in 0..sk.len() {
            let prev = if n == 0 { 0.0 } else { vals[n - 1] };
            let gap = paper.ratios.post_jump_values[n] - exit.ratios.post_jump_values[n];
            assert!((gap - (vals[n] + prev)).abs() < 1e-12, "n={n}");
        }
    }
}
