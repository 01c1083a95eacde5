//! Level-crossing counts, local-time estimation, bracket identities, and
//! the local-time integral approximation.
//!
//! Each skeleton jump traverses exactly one lattice cell
//! [(j-1) 2^{-k}, j 2^{-k}); counting traversals up to t and the band exit
//! S_m = inf{t : |B_t| = 2^m} gives eta^{k,m}, whose 2^{-k}-scaling
//! estimates twice the local time. The bracket sums over cells (fak1/fak2)
//! are exact rearrangements of the pathwise sums; both are implemented
//! independently so the identity is a real check.

use crate::error::{Error, Result};
use crate::functionals::RealFn;
use crate::intensity::IntensityTable;
use crate::skeleton::Skeleton;
use crate::stats::Estimate;

/// Up/down traversal counts per lattice cell before t and the band exit.
#[derive(Debug, Clone)]
pub struct CrossingCounts {
    pub level: u32,
    pub band_m: u32,
    pub t: f64,
    /// Cell j covers [(j-1) 2^{-k}, j 2^{-k}) for
    /// j = -2^{m+k}+1 ..= 2^{m+k}; index = j + 2^{m+k} - 1.
    up: Vec<u64>,
    down: Vec<u64>,
}

impl CrossingCounts {
    fn cells(level: u32, band_m: u32) -> usize {
        1usize << (band_m + level + 1)
    }

    fn index(&self, j: i64) -> usize {
        (j + (1i64 << (self.band_m + self.level)) - 1) as usize
    }

    /// Lattice cell containing x.
    pub fn cell_of(&self, x: f64) -> i64 {
        let h = (2.0f64).powi(-(self.level as i32));
        (x / h).floor() as i64 + 1
    }

    /// Total traversal count of cell j.
    pub fn eta(&self, j: i64) -> u64 {
        let idx = self.index(j);
        if idx < self.up.len() {
            self.up[idx] + self.down[idx]
        } else {
            0
        }
    }

    pub fn total(&self) -> u64 {
        self.up.iter().sum::<u64>() + self.down.iter().sum::<u64>()
    }

    /// Cell range as (first j, last j).
    pub fn cell_range(&self) -> (i64, i64) {
        let half = 1i64 << (self.band_m + self.level);
        (-half + 1, half)
    }

    /// Additive merge for ensemble statistics.
    pub fn merge(&mut self, other: &CrossingCounts) {
        assert_eq!(self.level, other.level);
        assert_eq!(self.band_m, other.band_m);
        for (a, b) in self.up.iter_mut().zip(&other.up) {
            *a += b;
        }
        for (a, b) in self.down.iter_mut().zip(&other.down) {
            *a += b;
        }
    }
}

/// Scan consecutive anchor pairs up to t and the band exit, incrementing the
/// traversed cell's up- or down-count.
pub fn crossing_counts(sk: &Skeleton, band_m: u32, t: f64) -> Result<CrossingCounts> {
    let band = (2.0f64).powi(band_m as i32);
    if sk.start_value.abs() >= band {
        return Err(Error::domain(format!(
            "crossing_counts: start {} outside (-{band}, {band})",
            sk.start_value
        )));
    }
    let h = sk.jump_size();
    let mut cc = CrossingCounts {
        level: sk.level,
        band_m,
        t,
        up: vec![0; CrossingCounts::cells(sk.level, band_m)],
        down: vec![0; CrossingCounts::cells(sk.level, band_m)],
    };
    let mut anchor = sk.start_value;
    for (time, sign) in sk.times.iter().zip(&sk.signs) {
        if *time > t {
            break;
        }
        let next = anchor + h * (*sign as f64);
        if *sign > 0 {
            let j = (next / h).round() as i64;
            let idx = cc.index(j);
            cc.up[idx] += 1;
        } else {
            let j = (anchor / h).round() as i64;
            let idx = cc.index(j);
            cc.down[idx] += 1;
        }
        anchor = next;
        if anchor.abs() >= band - 0.5 * h {
            break;
        }
    }
    Ok(cc)
}

/// Piecewise-constant local-time estimate L(x) = 2^{-k} eta(t, x) / 2.
#[derive(Debug, Clone)]
pub struct LocalTimeEstimate {
    pub level: u32,
    counts: CrossingCounts,
}

pub fn local_time_estimate(counts: CrossingCounts) -> LocalTimeEstimate {
    LocalTimeEstimate {
        level: counts.level,
        counts,
    }
}

impl LocalTimeEstimate {
    pub fn eval(&self, x: f64) -> f64 {
        let h = (2.0f64).powi(-(self.level as i32));
        0.5 * h * self.counts.eta(self.counts.cell_of(x)) as f64
    }

    /// Value at a lattice point, averaging the two adjacent cells.
    pub fn eval_symmetric(&self, x: f64) -> f64 {
        let h = (2.0f64).powi(-(self.level as i32));
        0.5 * (self.eval(x - 0.5 * h) + self.eval(x + 0.5 * h))
    }
}

fn delta_f_on_cell(f: &RealFn, h: f64, j: i64) -> f64 {
    f.eval(j as f64 * h) - f.eval((j - 1) as f64 * h)
}

/// Eq.-style cell sum [F(A^k), A^k]_{t and S_m} = sum_j 2^{-k} eta_j dF_j.
pub fn bracket_f_a(f: &RealFn, cc: &CrossingCounts) -> f64 {
    let h = (2.0f64).powi(-(cc.level as i32));
    let (lo, hi) = cc.cell_range();
    let mut acc = 0.0;
    for j in lo..=hi {
        let eta = cc.eta(j);
        if eta > 0 {
            acc += h * eta as f64 * delta_f_on_cell(f, h, j);
        }
    }
    acc
}

/// Cell sum [F(A^k), F(A^k)]_{t and S_m} = sum_j dF_j^2 eta_j.
pub fn bracket_f_f(f: &RealFn, cc: &CrossingCounts) -> f64 {
    let h = (2.0f64).powi(-(cc.level as i32));
    let (lo, hi) = cc.cell_range();
    let mut acc = 0.0;
    for j in lo..=hi {
        let eta = cc.eta(j);
        if eta > 0 {
            let d = delta_f_on_cell(f, h, j);
            acc += d * d * eta as f64;
        }
    }
    acc
}

/// Direct pathwise sum sum_n dF(A_n) dA_n 1{T_n <= t and S_m}; the
/// rearrangement identity partner of `bracket_f_a`.
pub fn pathwise_bracket_f_a(f: &RealFn, sk: &Skeleton, band_m: u32, t: f64) -> f64 {
    let band = (2.0f64).powi(band_m as i32);
    let h = sk.jump_size();
    let mut anchor = sk.start_value;
    let mut acc = 0.0;
    for (time, sign) in sk.times.iter().zip(&sk.signs) {
        if *time > t {
            break;
        }
        let next = anchor + h * (*sign as f64);
        acc += (f.eval(next) - f.eval(anchor)) * (next - anchor);
        anchor = next;
        if anchor.abs() >= band - 0.5 * h {
            break;
        }
    }
    acc
}

/// Direct pathwise sum of squared F-increments, partner of `bracket_f_f`.
pub fn pathwise_bracket_f_f(f: &RealFn, sk: &Skeleton, band_m: u32, t: f64) -> f64 {
    let band = (2.0f64).powi(band_m as i32);
    let h = sk.jump_size();
    let mut anchor = sk.start_value;
    let mut acc = 0.0;
    for (time, sign) in sk.times.iter().zip(&sk.signs) {
        if *time > t {
            break;
        }
        let next = anchor + h * (*sign as f64);
        let d = f.eval(next) - f.eval(anchor);
        acc += d * d;
        anchor = next;
        if anchor.abs() >= band - 0.5 * h {
            break;
        }
    }
    acc
}

/// Lattice-cell masses of the Stieltjes measure of F (bounded variation):
/// mass of cell j is F(j h) - F((j-1) h).
pub fn lattice_masses(f: &RealFn, cc: &CrossingCounts) -> Vec<(i64, f64)> {
    let h = (2.0f64).powi(-(cc.level as i32));
    let (lo, hi) = cc.cell_range();
    (lo..=hi)
        .map(|j| (j, delta_f_on_cell(f, h, j)))
        .collect()
}

/// Point masses mapped to their containing cells (for step functions F).
pub fn atom_masses(atoms: &[(f64, f64)], cc: &CrossingCounts) -> Vec<(i64, f64)> {
    atoms.iter().map(|(x, w)| (cc.cell_of(*x), *w)).collect()
}

/// int 2 L(x) mu_F(dx) with the estimated local time and cell masses.
pub fn local_time_mass_integral(est: &LocalTimeEstimate, masses: &[(i64, f64)]) -> f64 {
    let h = (2.0f64).powi(-(est.level as i32));
    masses
        .iter()
        .map(|(j, w)| 2.0 * 0.5 * h * est.counts.eta(*j) as f64 * w)
        .sum()
}

/// The local-time integral approximation
/// 2^{2k} sum_{i in {-1,+1}} int_0^t {F(A_{s-} + i 2^{-k}) - F(A_{s-})} h^k_s ds,
/// evaluated with table-exact h^k mass per inter-jump interval. Computed
/// from the literal two-sided sum, independent of the decomposition path.
pub fn local_time_integral(
    f: &RealFn,
    sk: &Skeleton,
    table: &IntensityTable,
    t: f64,
) -> f64 {
    let h = sk.jump_size();
    let scale = (4.0f64).powi(sk.level as i32);
    let two_sided = |a: f64| f.eval(a + h) + f.eval(a - h) - 2.0 * f.eval(a);
    let mut acc = 0.0;
    let mut anchor = sk.start_value;
    let mut seg_start = 0.0f64;
    for (time, sign) in sk.times.iter().zip(&sk.signs) {
        let seg_end = time.min(t);
        if seg_end > seg_start {
            acc += two_sided(anchor) * table.angle_increment(sk.level, seg_start, seg_end);
        }
        if *time >= t {
            seg_start = t;
            break;
        }
        anchor += h * (*sign as f64);
        seg_start = *time;
    }
    if seg_start < t {
        acc += two_sided(anchor) * table.angle_increment(sk.level, seg_start, t);
    }
    scale * acc
}

/// One row of an ensemble identity check: the cell-sum bracket against its
/// grid oracle, with the paired per-path difference.
#[derive(Debug, Clone)]
pub struct IdentityRow {
    pub level: u32,
    pub bracket: Estimate,
    pub oracle: Estimate,
    pub diff: Estimate,
}

#[derive(Debug, Clone)]
pub struct LocalTimeStudyConfig {
    pub levels: Vec<u32>,
    pub dt: f64,
    pub horizon: f64,
    pub start: f64,
    pub band_m: u32,
    pub n_paths: usize,
    pub seed: u64,
    /// x-grid for the ensemble local-time curve (at the finest level).
    pub curve_xs: Vec<f64>,
}

/// Ensemble outputs of the coupled grid study.
#[derive(Debug, Clone)]
pub struct LocalTimeStudy {
    pub levels: Vec<u32>,
    /// fak1 for F = x^2 against the grid oracle int 2 B_s ds, per level.
    pub covariation_square: Vec<IdentityRow>,
    /// fak2 for f = clip against the grid oracle int f(B_s)^2 ds, per level.
    pub energy_clip: Vec<IdentityRow>,
    /// Largest per-path gap between the cell sums and the direct pathwise
    /// sums (the rearrangement identities; should be rounding-level).
    pub max_rearrangement_gap: f64,
    /// N^{k,|x|} at the horizon (finest level).
    pub tanaka_drift: Estimate,
    /// 2 L(0) prediction (symmetric cell average, finest level).
    pub tanaka_prediction: Estimate,
    /// Paired difference of the two.
    pub tanaka_diff: Estimate,
    /// L(0) estimate and the occupation-density oracle at eps = 2^{-k}.
    pub lhat_zero: Estimate,
    pub occupation_zero: Estimate,
    /// Paired difference L(0) - 0.5 * occupation (pins the normalization).
    pub normalization_diff: Estimate,
    /// Ensemble local-time curve (x, mean, se) at the finest level.
    pub curve: Vec<(f64, f64, f64)>,
}

/// Run the coupled grid study: one Brownian grid path per sample drives the
/// occupation oracle, the Riemann oracles, and skeletons at every level.
pub fn local_time_study(
    cov_f: &RealFn,
    energy_f: &RealFn,
    table: &IntensityTable,
    cfg: &LocalTimeStudyConfig,
) -> Result<LocalTimeStudy> {
    use crate::functionals::generate_brownian;
    use crate::skeleton::extract_skeleton_from_grid;
    use crate::streams::{path_rng, Component};
    use rayon::prelude::*;

    let levels: Vec<u32> = cfg.levels.clone();
    let k_max = *levels.iter().max().ok_or_else(|| Error::domain("no levels"))?;
    let cov_deriv = cov_f.derivative()?;
    let energy_primitive = energy_f.primitive()?;
    let eps = (2.0f64).powi(-(k_max as i32));
    let n_levels = levels.len();
    let nx = cfg.curve_xs.len();
    // Per path: [fak1; oracle1] per level, [fak2; oracle2] per level,
    // tanaka (n, pred), lhat0, occ, curve values, rearrangement gap.
    let per_path: Vec<Result<(Vec<f64>, f64)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, Component::LocalTime, p as u64);
            let path = generate_brownian(cfg.dt, cfg.horizon, cfg.start, &mut rng);
            let mut out = Vec::with_capacity(4 * n_levels + 4 + nx);
            let mut gap = 0.0f64;
            // Grid Riemann oracles (left rule).
            let mut oracle_cov = 0.0;
            let mut oracle_energy = 0.0;
            let mut occ_count = 0usize;
            for i in 0..path.values.len() - 1 {
                let x = path.values[i];
                oracle_cov += cov_deriv.eval(x) * cfg.dt;
                let fe = energy_f.eval(x);
                oracle_energy += fe * fe * cfg.dt;
                if x.abs() < eps {
                    occ_count += 1;
                }
            }
            let occ = occ_count as f64 * cfg.dt / (2.0 * eps);
            let mut tanaka = (0.0, 0.0);
            let mut lhat0 = 0.0;
            let mut curve_vals = vec![0.0; nx];
            for (li, &k) in levels.iter().enumerate() {
                let gs = extract_skeleton_from_grid(&path, k)?;
                let sk = &gs.skeleton;
                let cc = crossing_counts(sk, cfg.band_m, cfg.horizon)?;
                let fak1 = bracket_f_a(cov_f, &cc);
                let fak2 = bracket_f_f(&energy_primitive, &cc);
                gap = gap
                    .max((fak1 - pathwise_bracket_f_a(cov_f, sk, cfg.band_m, cfg.horizon)).abs())
                    .max(
                        (fak2
                            - pathwise_bracket_f_f(
                                &energy_primitive,
                                sk,
                                cfg.band_m,
                                cfg.horizon,
                            ))
                        .abs(),
                    );
                let _ = li;
                out.push(fak1);
                out.push(fak2);
                if k == k_max {
                    let n_abs = 0.5 * local_time_integral(&RealFn::Abs, sk, table, cfg.horizon);
                    let est = local_time_estimate(cc);
                    let pred = 2.0 * est.eval_symmetric(0.0);
                    tanaka = (n_abs, pred);
                    lhat0 = est.eval_symmetric(0.0);
                    for (xi, x) in cfg.curve_xs.iter().enumerate() {
                        curve_vals[xi] = est.eval(*x);
                    }
                }
            }
            out.push(oracle_cov);
            out.push(oracle_energy);
            out.push(occ);
            out.push(tanaka.0);
            out.push(tanaka.1);
            out.push(lhat0);
            out.extend(curve_vals);
            Ok((out, gap))
        })
        .collect();
    let width = 2 * n_levels + 6 + nx;
    let mut cols = vec![Vec::with_capacity(cfg.n_paths); width];
    let mut max_gap = 0.0f64;
    for r in per_path {
        let (vals, gap) = r?;
        max_gap = max_gap.max(gap);
        for (i, v) in vals.into_iter().enumerate() {
            cols[i].push(v);
        }
    }
    let oracle_cov_col = &cols[2 * n_levels];
    let oracle_energy_col = &cols[2 * n_levels + 1];
    let occ_col = &cols[2 * n_levels + 2];
    let tanaka_n_col = &cols[2 * n_levels + 3];
    let tanaka_pred_col = &cols[2 * n_levels + 4];
    let lhat0_col = &cols[2 * n_levels + 5];
    let paired = |a: &[f64], b: &[f64]| -> Estimate {
        Estimate::from_sample(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
    };
    let mut covariation_square = Vec::with_capacity(n_levels);
    let mut energy_clip = Vec::with_capacity(n_levels);
    for li in 0..n_levels {
        covariation_square.push(IdentityRow {
            level: levels[li],
            bracket: Estimate::from_sample(&cols[2 * li]),
            oracle: Estimate::from_sample(oracle_cov_col),
            diff: paired(&cols[2 * li], oracle_cov_col),
        });
        energy_clip.push(IdentityRow {
            level: levels[li],
            bracket: Estimate::from_sample(&cols[2 * li + 1]),
            oracle: Estimate::from_sample(oracle_energy_col),
            diff: paired(&cols[2 * li + 1], oracle_energy_col),
        });
    }
    let half_occ: Vec<f64> = occ_col.iter().map(|v| 0.5 * v).collect();
    let curve = cfg
        .curve_xs
        .iter()
        .enumerate()
        .map(|(xi, &x)| {
            let e = Estimate::from_sample(&cols[2 * n_levels + 6 + xi]);
            (x, e.mean, e.std_error)
        })
        .collect();
    Ok(LocalTimeStudy {
        levels,
        covariation_square,
        energy_clip,
        max_rearrangement_gap: max_gap,
        tanaka_drift: Estimate::from_sample(tanaka_n_col),
        tanaka_prediction: Estimate::from_sample(tanaka_pred_col),
        tanaka_diff: paired(tanaka_n_col, tanaka_pred_col),
        lhat_zero: Estimate::from_sample(lhat0_col),
        occupation_zero: Estimate::from_sample(occ_col),
        normalization_diff: paired(lhat0_col, &half_occ),
        curve,
    })
}

/// fak1 ensemble check against the absolutely-continuous oracle (Eq.-style
/// comparison of the covariation process).
pub fn covariation_identity_check(
    cov_f: &RealFn,
    levels: &[u32],
    table: &IntensityTable,
    cfg: &LocalTimeStudyConfig,
) -> Result<Vec<IdentityRow>> {
    let mut cfg = cfg.clone();
    cfg.levels = levels.to_vec();
    let study = local_time_study(cov_f, &RealFn::Clip { c: 1.0 }, table, &cfg)?;
    Ok(study.covariation_square)
}

/// fak2 ensemble check against int |f(B_s)|^2 ds.
pub fn energy_identity_check(
    energy_f: &RealFn,
    levels: &[u32],
    table: &IntensityTable,
    cfg: &LocalTimeStudyConfig,
) -> Result<Vec<IdentityRow>> {
    let mut cfg = cfg.clone();
    cfg.levels = levels.to_vec();
    let study = local_time_study(&RealFn::Square, energy_f, table, &cfg)?;
    Ok(study.energy_clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::first_exit::standard_law;
    use crate::functionals::Functional;
    use crate::intensity::standard_table;
    use crate::projection::decompose;
    use crate::skeleton::build_skeleton_exact;
    use crate::streams::{path_rng, Component};

    fn toy() -> Skeleton {
        Skeleton {
            level: 2,
            start_value: 0.0,
            times: vec![0.1, 0.25, 0.4, 0.55, 0.7],
            signs: vec![1, 1, -1, -1, -1],
            horizon: 1.0,
        }
    }

    #[test]
    fn monotone_run_counts() {
        let sk = Skeleton {
            level: 2,
            start_value: 0.0,
            times: vec![0.1, 0.2, 0.3],
            signs: vec![1, 1, 1],
            horizon: 1.0,
        };
        let cc = crossing_counts(&sk, 3, 1.0).unwrap();
        // One count in each of the first three cells above 0.
        assert_eq!(cc.eta(1), 1);
        assert_eq!(cc.eta(2), 1);
        assert_eq!(cc.eta(3), 1);
        assert_eq!(cc.eta(4), 0);
        assert_eq!(cc.eta(0), 0);
        assert_eq!(cc.total(), 3);
    }

    #[test]
    fn zero_before_first_jump_and_conservation() {
        let sk = toy();
        let cc = crossing_counts(&sk, 3, 0.05).unwrap();
        assert_eq!(cc.total(), 0);
        let cc = crossing_counts(&sk, 3, 1.0).unwrap();
        assert_eq!(cc.total() as usize, sk.len());
        // Start outside the band is a domain error.
        let mut bad = toy();
        bad.start_value = 9.0;
        assert!(crossing_counts(&bad, 3, 1.0).is_err());
    }

    #[test]
    fn band_stopping_is_lattice_exact() {
        // Level 1, band m = 0: stop at |A| = 1 (2 up moves of 1/2).
        let sk = Skeleton {
            level: 1,
            start_value: 0.0,
            times: vec![0.1, 0.2, 0.3, 0.4],
            signs: vec![1, 1, 1, 1],
            horizon: 1.0,
        };
        let cc = crossing_counts(&sk, 0, 1.0).unwrap();
        assert_eq!(cc.total(), 2);
        let est = local_time_estimate(cc);
        // Support inside [-1, 1].
        assert_eq!(est.eval(1.3), 0.0);
    }

    #[test]
    fn rearrangement_identities_exact() {
        let mut rng = path_rng(17, Component::LocalTime, 0);
        let sk = build_skeleton_exact(standard_law(), 5, 0.0, 1.0, &mut rng);
        for f in [
            RealFn::Square,
            RealFn::Abs,
            RealFn::Linear { a: 2.5, b: 1.0 },
            RealFn::Clip { c: 0.25 },
        ] {
            let cc = crossing_counts(&sk, 3, 0.8).unwrap();
            let fak1 = bracket_f_a(&f, &cc);
            let direct = pathwise_bracket_f_a(&f, &sk, 3, 0.8);
            assert!((fak1 - direct).abs() < 1e-12, "{f:?}: {fak1} vs {direct}");
            let fak2 = bracket_f_f(&f, &cc);
            let direct = pathwise_bracket_f_f(&f, &sk, 3, 0.8);
            assert!((fak2 - direct).abs() < 1e-12, "{f:?}");
        }
    }

    #[test]
    fn linear_f_closed_forms() {
        // F linear slope a: fak1 = a 2^{-2k} N, fak2 = a^2 2^{-2k} N.
        let sk = toy();
        let cc = crossing_counts(&sk, 3, 1.0).unwrap();
        let a = 3.0;
        let f = RealFn::Linear { a, b: -1.0 };
        let n = cc.total() as f64;
        let h2 = (4.0f64).powi(-2);
        assert!((bracket_f_a(&f, &cc) - a * h2 * n).abs() < 1e-12);
        assert!((bracket_f_f(&f, &cc) - a * a * h2 * n).abs() < 1e-12);
        let zero = RealFn::Const(4.0);
        assert_eq!(bracket_f_a(&zero, &cc), 0.0);
        assert_eq!(bracket_f_f(&zero, &cc), 0.0);
    }

    #[test]
    fn mass_route_equals_cell_sum() {
        let sk = toy();
        let cc = crossing_counts(&sk, 3, 1.0).unwrap();
        let f = RealFn::Square;
        let masses = lattice_masses(&f, &cc);
        let est = local_time_estimate(cc);
        let via_masses = local_time_mass_integral(&est, &masses);
        let cc2 = crossing_counts(&sk, 3, 1.0).unwrap();
        let fak1 = bracket_f_a(&f, &cc2);
        assert!((via_masses - fak1).abs() < 1e-12);
    }

    #[test]
    fn step_function_atom() {
        // F = 1{x >= a}: bracket picks up the crossing count of a's cell.
        let sk = toy();
        let cc = crossing_counts(&sk, 3, 1.0).unwrap();
        let a = 0.3; // inside cell j = 2 at level 2
        let est = local_time_estimate(cc);
        let atoms = atom_masses(&[(a, 1.0)], &est.counts);
        let got = local_time_mass_integral(&est, &atoms);
        let eta = est.counts.eta(est.counts.cell_of(a)) as f64;
        assert!((got - 2.0 * 0.5 * 0.25 * eta).abs() < 1e-12);
    }

    #[test]
    fn local_time_integral_is_twice_drift() {
        let table = standard_table();
        let mut rng = path_rng(29, Component::LocalTime, 1);
        let sk = build_skeleton_exact(standard_law(), 4, 0.0, 1.0, &mut rng);
        for f in [RealFn::Square, RealFn::Abs, RealFn::Clip { c: 0.5 }] {
            let lti = local_time_integral(&f, &sk, table, 1.0);
            let dec = decompose(&Functional::State(f.clone()), &sk, table).unwrap();
            let drift = dec.drift_at(1.0, table);
            assert!((lti - 2.0 * drift).abs() < 1e-12, "{f:?}: {lti} vs {drift}");
        }
        // F = x^2: equals 2 * angle bracket exactly.
        let lti = local_time_integral(&RealFn::Square, &sk, table, 1.0);
        let ab = table.angle_bracket(4, 1.0).unwrap();
        assert!((lti - 2.0 * ab).abs() < 1e-12);
        // F linear: identically zero.
        let lti = local_time_integral(&RealFn::Linear { a: 5.0, b: 0.0 }, &sk, table, 1.0);
        assert_eq!(lti, 0.0);
    }
}
