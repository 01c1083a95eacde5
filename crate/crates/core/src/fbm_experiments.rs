//! Desk-scale fractional Brownian experiments: the raw-energy scan, the
//! projection-convergence surrogate, and a martingale-part surrogate.
//!
//! delta^k f(B^H) has no closed-form conditional expectation, so the scans
//! use f(B^H_{T_n}) itself: exact for the raw-energy claim and a
//! conditional-expectation contraction bound for the projection one. The
//! martingale-part surrogate is the alternating-sign increment sum, whose
//! mean vanishes by cancellation and whose second moment is dominated by the
//! raw energy.

use crate::error::{Error, Result};
use crate::fbm::FbmEvaluator;
use crate::functionals::{generate_brownian, RealFn};
use crate::skeleton::extract_skeleton_from_grid;
use crate::stats::Estimate;
use crate::streams::{path_rng, Component};
use rayon::prelude::*;

/// Per-level outputs of the fBm scan.
#[derive(Debug, Clone)]
pub struct FbmScanRow {
    pub level: u32,
    /// E sum (f(B^H_{T_n}) - f(B^H_{T_{n-1}}))^2 up to the horizon.
    pub e2_raw: Estimate,
    /// E sup over checkpoints of |f(B^H_t) - f(B^H at last anchor)|.
    pub proj_deviation: Estimate,
    /// Mean of the alternating increment sum (martingale-scale surrogate).
    pub alt_sum: Estimate,
    /// Second moment of the alternating increment sum.
    pub alt_sum_sq: Estimate,
}

/// Run the scan for f(B^H) with stopping times extracted from the driving
/// Brownian path. `checkpoints` fixes the reporting subgrid for the sup
/// deviation (the full-grid sup would need B^H on every grid cell).
#[allow(clippy::too_many_arguments)]
pub fn fbm_scan(
    f: &RealFn,
    hurst: f64,
    levels: &[u32],
    dt: f64,
    horizon: f64,
    n_paths: usize,
    seed: u64,
    checkpoints: usize,
) -> Result<Vec<FbmScanRow>> {
    if levels.is_empty() {
        return Err(Error::domain("fbm_scan: no levels"));
    }
    let steps = (horizon / dt).round() as usize;
    let eval = FbmEvaluator::new(hurst, dt, steps)?;
    let check_idx: Vec<usize> = (1..=checkpoints)
        .map(|i| (i * steps) / checkpoints)
        .collect();
    let per_path: Vec<Result<Vec<[f64; 4]>>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, Component::Fbm, p as u64);
            let driver = generate_brownian(dt, horizon, 0.0, &mut rng);
            let mut rows = Vec::with_capacity(levels.len());
            for &k in levels {
                let gs = extract_skeleton_from_grid(&driver, k)?;
                let jump_idx: Vec<usize> = gs
                    .skeleton
                    .times
                    .iter()
                    .map(|t| (t / dt).round() as usize)
                    .collect();
                let jump_vals = eval.values_at_indices(&driver, &jump_idx);
                let mut e2 = 0.0;
                let mut alt = 0.0;
                let mut prev = f.eval(0.0);
                for (n, v) in jump_vals.iter().enumerate() {
                    let fv = f.eval(*v);
                    let d = fv - prev;
                    e2 += d * d;
                    alt += if n % 2 == 0 { d } else { -d };
                    prev = fv;
                }
                let check_vals = eval.values_at_indices(&driver, &check_idx);
                let mut sup = 0.0f64;
                for (ci, cv) in check_idx.iter().zip(&check_vals) {
                    // f at the last anchor at or before the checkpoint.
                    let pos = jump_idx.partition_point(|ji| ji <= ci);
                    let anchor_f = if pos == 0 {
                        f.eval(0.0)
                    } else {
                        f.eval(jump_vals[pos - 1])
                    };
                    sup = sup.max((f.eval(*cv) - anchor_f).abs());
                }
                rows.push([e2, sup, alt, alt * alt]);
            }
            Ok(rows)
        })
        .collect();
    let mut cols = vec![[const { Vec::new() }; 4]; levels.len()];
    for (li, col) in cols.iter_mut().enumerate() {
        for c in col.iter_mut() {
            c.reserve(n_paths);
        }
        let _ = li;
    }
    for r in per_path {
        for (li, row) in r?.into_iter().enumerate() {
            for (ci, v) in row.into_iter().enumerate() {
                cols[li][ci].push(v);
            }
        }
    }
    Ok(levels
        .iter()
        .zip(&cols)
        .map(|(&k, col)| FbmScanRow {
            level: k,
            e2_raw: Estimate::from_sample(&col[0]),
            proj_deviation: Estimate::from_sample(&col[1]),
            alt_sum: Estimate::from_sample(&col[2]),
            alt_sum_sq: Estimate::from_sample(&col[3]),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_f_is_degenerate() {
        let rows = fbm_scan(
            &RealFn::Const(2.0),
            0.75,
            &[3, 4],
            1.0 / 2048.0,
            0.25,
            8,
            5,
            32,
        )
        .unwrap();
        for row in rows {
            assert_eq!(row.e2_raw.mean, 0.0);
            assert_eq!(row.proj_deviation.mean, 0.0);
            assert_eq!(row.alt_sum.mean, 0.0);
        }
    }

    #[test]
    fn small_scan_decreases() {
        // Sanity at tiny scale; the acceptance suite runs the pinned config.
        let rows = fbm_scan(
            &RealFn::Sin,
            0.75,
            &[2, 4],
            1.0 / 4096.0,
            0.25,
            24,
            6,
            32,
        )
        .unwrap();
        assert!(rows[0].e2_raw.mean > rows[1].e2_raw.mean);
        assert!(rows[0].proj_deviation.mean > rows[1].proj_deviation.mean);
    }
}
