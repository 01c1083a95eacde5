//! The projection calculus: the delta^k embedding of a functional on the
//! skeleton filtration, its stochastic derivative, the drift kernel, the
//! explicit semimartingale decomposition, energies, and the weak-limit
//! probes (covariation and chain rule).

use crate::error::{Error, Result};
use crate::first_exit::standard_law;
use crate::functionals::{generate_brownian, Functional, GridPath, RealFn};
use crate::intensity::IntensityTable;
use crate::quadrature::gaussian_expectation;
use crate::skeleton::{build_skeleton_exact, extract_skeleton_from_grid, Skeleton, StepProcess};
use crate::stats::Estimate;
use crate::streams::{path_rng, Component};
use rayon::prelude::*;

/// delta^k X_t = X_0 + sum_n E[X_{T^k_n} | G^k_n] 1{T^k_n <= t < T^k_{n+1}}.
///
/// Closed forms per regime: state functionals read F at the (measurable)
/// anchor; martingale-terminal conditional expectations are Gaussian with
/// mean A^k_{T_n} and variance T - T_n; first-passage uses the exit-time
/// identity for the band [-alpha, alpha], frozen once the level is hit.
pub fn delta_projection(f: &Functional, sk: &Skeleton) -> Result<StepProcess> {
    let h = sk.jump_size();
    let values = sk.lattice_values();
    match f {
        Functional::State(func) => Ok(StepProcess {
            initial_value: func.eval(sk.start_value),
            jump_times: sk.times.clone(),
            post_jump_values: values.iter().map(|v| func.eval(*v)).collect(),
            horizon: sk.horizon,
        }),
        Functional::MartingaleTerminal { phi, maturity } => {
            let t_end = *maturity;
            if t_end <= 0.0 {
                return Err(Error::domain("maturity must be positive"));
            }
            let n_keep = sk.times.partition_point(|&t| t <= t_end);
            let mut post = Vec::with_capacity(n_keep);
            for n in 0..n_keep {
                let var = t_end - sk.times[n];
                post.push(if var == 0.0 {
                    phi.eval(values[n])
                } else {
                    gaussian_expectation(values[n], var.sqrt(), |z| phi.eval(z))
                });
            }
            Ok(StepProcess {
                initial_value: gaussian_expectation(sk.start_value, t_end.sqrt(), |z| {
                    phi.eval(z)
                }),
                jump_times: sk.times[..n_keep].to_vec(),
                post_jump_values: post,
                horizon: t_end.min(sk.horizon),
            })
        }
        Functional::FirstPassage { alpha } => {
            let a = *alpha;
            if a <= 0.0 || sk.start_value.abs() >= a {
                return Err(Error::domain(format!(
                    "first-passage needs 0 < |start| < alpha, got alpha = {a}"
                )));
            }
            let ratio = a / h;
            if (ratio - ratio.round()).abs() > 1e-9 {
                return Err(Error::regime(format!(
                    "alpha = {a} is not a lattice multiple of 2^-k = {h}"
                )));
            }
            let mut post = Vec::with_capacity(values.len());
            let mut hit: Option<f64> = None;
            for (n, v) in values.iter().enumerate() {
                if let Some(t_hit) = hit {
                    post.push(t_hit);
                } else if v.abs() >= a - 0.5 * h {
                    hit = Some(sk.times[n]);
                    post.push(sk.times[n]);
                } else {
                    post.push(sk.times[n] + a * a - v * v);
                }
            }
            Ok(StepProcess {
                initial_value: a * a - sk.start_value * sk.start_value,
                jump_times: sk.times.clone(),
                post_jump_values: post,
                horizon: sk.horizon,
            })
        }
        Functional::FbmState { .. } => Err(Error::regime(
            "delta projection of fbm-state has no closed form; use the raw surrogate scans"
                .to_string(),
        )),
    }
}

/// The stochastic-derivative ratio process: on [T_n, T_{n+1}) the value is
/// (delta X_{T_n} - delta X_{T_{n-1}}) / (B_{T_n} - B_{T_{n-1}}), zero on
/// [0, T_1). The h^k weight is applied at evaluation/integration time.
#[derive(Debug, Clone)]
pub struct WeightedDerivative {
    pub level: u32,
    pub ratios: StepProcess,
}

pub fn stochastic_derivative(dx: &StepProcess, sk: &Skeleton) -> WeightedDerivative {
    let h = sk.jump_size();
    let n = dx.jump_times.len();
    debug_assert!(n <= sk.signs.len());
    let mut ratios = Vec::with_capacity(n);
    for i in 0..n {
        let num = dx.post_jump_values[i] - dx.pre_jump_value(i);
        let den = sk.signs[i] as f64 * h;
        ratios.push(num / den);
    }
    WeightedDerivative {
        level: sk.level,
        ratios: StepProcess {
            initial_value: 0.0,
            jump_times: dx.jump_times.clone(),
            post_jump_values: ratios,
            horizon: dx.horizon,
        },
    }
}

impl WeightedDerivative {
    /// D^k at time t: ratio * h^k(t).
    pub fn eval(&self, t: f64, table: &IntensityTable) -> Result<f64> {
        Ok(self.ratios.evaluate(t)? * table.h_k(self.level, t)?)
    }

    /// Table-exact integral of D^k over [0, t]: each inter-jump interval
    /// carries its ratio times the exact h^k mass of the interval.
    pub fn integral_up_to(&self, t: f64, table: &IntensityTable) -> f64 {
        let times = &self.ratios.jump_times;
        let vals = &self.ratios.post_jump_values;
        let mut acc = 0.0;
        for i in 0..times.len() {
            if times[i] >= t {
                break;
            }
            let seg_end = if i + 1 < times.len() {
                times[i + 1].min(t)
            } else {
                t
            };
            acc += vals[i] * table.angle_increment(self.level, times[i], seg_end);
        }
        acc
    }
}

/// U^{k,F} on each inter-jump interval: half the symmetric second difference
/// of F at the pre-jump anchor, divided by 2^{-2k}. Entry i covers
/// (T_i, T_{i+1}] with T_0 = 0; there are len + 1 entries, the last one for
/// the open interval after the final jump.
pub fn drift_kernel_state(f: &RealFn, sk: &Skeleton) -> Vec<f64> {
    let h = sk.jump_size();
    let inv = 0.5 / (h * h);
    let mut anchors = Vec::with_capacity(sk.len() + 1);
    anchors.push(sk.start_value);
    anchors.extend(sk.lattice_values());
    anchors
        .iter()
        .map(|a| (f.eval(a + h) + f.eval(a - h) - 2.0 * f.eval(*a)) * inv)
        .collect()
}

/// The explicit decomposition delta^k X = X_0 + M^{k,X} + N^{k,X}.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub level: u32,
    pub initial_value: f64,
    pub delta_x: StepProcess,
    /// Martingale values at the jump times, accumulated independently of
    /// `delta_x` so the decomposition identity is a real check.
    pub martingale_part: StepProcess,
    /// U^{k,X} per inter-jump interval (len = jumps + 1).
    pub drift_kernels: Vec<f64>,
    /// N^{k,X}(T_n) at the jump times.
    pub drift_at_jumps: Vec<f64>,
}

impl Decomposition {
    /// N^{k,X}(t) with table-exact integration of U h^k.
    pub fn drift_at(&self, t: f64, table: &IntensityTable) -> f64 {
        let times = &self.delta_x.jump_times;
        let idx = times.partition_point(|&x| x <= t);
        let (mut acc, seg_start) = if idx == 0 {
            (0.0, 0.0)
        } else {
            (self.drift_at_jumps[idx - 1], times[idx - 1])
        };
        acc += self.drift_kernels[idx] * table.angle_increment(self.level, seg_start, t);
        acc
    }

    /// M^{k,X}(t) = delta^k X(t) - X_0 - N^{k,X}(t).
    pub fn martingale_at(&self, t: f64, table: &IntensityTable) -> Result<f64> {
        Ok(self.delta_x.evaluate(t)? - self.initial_value - self.drift_at(t, table))
    }
}

/// Build the explicit decomposition. State functionals get the second
/// difference drift; martingale-terminal and first-passage projections are
/// already martingales, so their drift vanishes identically.
pub fn decompose(
    f: &Functional,
    sk: &Skeleton,
    table: &IntensityTable,
) -> Result<Decomposition> {
    let delta_x = delta_projection(f, sk)?;
    let n = delta_x.jump_times.len();
    let kernels = match f {
        Functional::State(func) => drift_kernel_state(func, sk),
        Functional::MartingaleTerminal { .. } | Functional::FirstPassage { .. } => {
            vec![0.0; n + 1]
        }
        Functional::FbmState { .. } => unreachable!("rejected by delta_projection"),
    };
    let mut drift_at_jumps = Vec::with_capacity(n);
    let mut mart = Vec::with_capacity(n);
    let mut drift_acc = 0.0;
    let mut mart_acc = 0.0;
    let mut prev_t = 0.0;
    let mut prev_delta = delta_x.initial_value;
    for i in 0..n {
        let t = delta_x.jump_times[i];
        let dn = kernels[i] * table.angle_increment(sk.level, prev_t, t);
        drift_acc += dn;
        mart_acc += (delta_x.post_jump_values[i] - prev_delta) - dn;
        drift_at_jumps.push(drift_acc);
        mart.push(mart_acc);
        prev_t = t;
        prev_delta = delta_x.post_jump_values[i];
    }
    Ok(Decomposition {
        level: sk.level,
        initial_value: delta_x.initial_value,
        martingale_part: StepProcess {
            initial_value: 0.0,
            jump_times: delta_x.jump_times.clone(),
            post_jump_values: mart,
            horizon: delta_x.horizon,
        },
        delta_x,
        drift_kernels: kernels,
        drift_at_jumps,
    })
}

/// Pathwise bracket sum_n dX_n dY_n 1{T_n <= t} of two step processes
/// sharing jump times.
pub fn pathwise_bracket(dx: &StepProcess, dy: &StepProcess, t: f64) -> f64 {
    let n = dx.jump_times.len().min(dy.jump_times.len());
    let mut acc = 0.0;
    for i in 0..n {
        if dx.jump_times[i] > t {
            break;
        }
        acc += (dx.post_jump_values[i] - dx.pre_jump_value(i))
            * (dy.post_jump_values[i] - dy.pre_jump_value(i));
    }
    acc
}

/// Which engine drives an ensemble.
#[derive(Debug, Clone, Copy)]
pub enum Engine {
    /// Exact interarrival sampling at the finest level, coarser levels by
    /// nesting.
    Exact,
    /// Time-grid simulation with skeleton extraction (needed for raw path
    /// values and fbm functionals).
    Grid { dt: f64 },
}

/// Energy estimates per level.
#[derive(Debug, Clone)]
pub struct EnergyScan {
    pub levels: Vec<u32>,
    pub conditional: Vec<Estimate>,
    pub raw: Vec<Estimate>,
}

/// E2 (conditional, through delta^k) and E2^s (raw values at the stopping
/// times) over an ensemble. In the exact engine the two coincide pathwise
/// for the closed-form catalogue (X_{T_n} is G^k_n-measurable there); the
/// grid engine separates them through the overshoot, and fbm functionals use
/// the raw surrogate for both.
pub fn energy_scan(
    f: &Functional,
    levels: &[u32],
    horizon: f64,
    start: f64,
    n_paths: usize,
    seed: u64,
    engine: Engine,
) -> Result<EnergyScan> {
    let k_max = *levels.iter().max().ok_or_else(|| Error::domain("no levels"))?;
    let fbm_eval = match (f, engine) {
        (Functional::FbmState { f: _, hurst }, Engine::Grid { dt }) => Some(
            crate::fbm::FbmEvaluator::new(*hurst, dt, (horizon / dt).round() as usize)?,
        ),
        (Functional::FbmState { .. }, Engine::Exact) => {
            return Err(Error::regime("fbm energy scan requires the grid engine"))
        }
        _ => None,
    };
    let per_path: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, Component::Projection, p as u64);
            let mut conditional = Vec::with_capacity(levels.len());
            let mut raw = Vec::with_capacity(levels.len());
            match engine {
                Engine::Exact => {
                    let fine = build_skeleton_exact(standard_law(), k_max, start, horizon, &mut rng);
                    let mut by_level = levels_by_coarsening(fine, levels);
                    for sk in by_level.drain(..) {
                        let dx = delta_projection(f, &sk)?;
                        conditional.push(squared_increments(&dx, horizon));
                        raw.push(raw_energy_exact(f, &sk, horizon)?);
                    }
                }
                Engine::Grid { dt } => {
                    let path = generate_brownian(dt, horizon, start, &mut rng);
                    for &k in levels {
                        let gs = extract_skeleton_from_grid(&path, k)?;
                        match (f, &fbm_eval) {
                            (Functional::FbmState { f: func, .. }, Some(eval)) => {
                                let e = fbm_raw_energy(func, eval, &path, &gs.skeleton, horizon);
                                conditional.push(e);
                                raw.push(e);
                            }
                            _ => {
                                let dx = delta_projection(f, &gs.skeleton)?;
                                conditional.push(squared_increments(&dx, horizon));
                                raw.push(raw_energy_grid(f, &path, &gs.skeleton, horizon)?);
                            }
                        }
                    }
                }
            }
            Ok((conditional, raw))
        })
        .collect();
    let mut cond_cols = vec![Vec::with_capacity(n_paths); levels.len()];
    let mut raw_cols = vec![Vec::with_capacity(n_paths); levels.len()];
    for r in per_path {
        let (c, w) = r?;
        for (i, v) in c.into_iter().enumerate() {
            cond_cols[i].push(v);
        }
        for (i, v) in w.into_iter().enumerate() {
            raw_cols[i].push(v);
        }
    }
    Ok(EnergyScan {
        levels: levels.to_vec(),
        conditional: cond_cols.iter().map(|c| Estimate::from_sample(c)).collect(),
        raw: raw_cols.iter().map(|c| Estimate::from_sample(c)).collect(),
    })
}

/// Coarsen a finest-level skeleton down to each requested level (levels need
/// not be contiguous; they must not exceed the finest).
pub fn levels_by_coarsening(finest: Skeleton, levels: &[u32]) -> Vec<Skeleton> {
    let mut out: Vec<Option<Skeleton>> = vec![None; levels.len()];
    let mut current = finest;
    loop {
        for (i, &k) in levels.iter().enumerate() {
            if k == current.level {
                out[i] = Some(current.clone());
            }
        }
        if current.level == 0 || out.iter().all(|o| o.is_some()) {
            break;
        }
        current = current.coarsen();
    }
    out.into_iter().map(|o| o.expect("level above finest")).collect()
}

fn squared_increments(dx: &StepProcess, t: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..dx.jump_times.len() {
        if dx.jump_times[i] > t {
            break;
        }
        let d = dx.post_jump_values[i] - dx.pre_jump_value(i);
        acc += d * d;
    }
    acc
}

fn raw_energy_exact(f: &Functional, sk: &Skeleton, t: f64) -> Result<f64> {
    // Raw stopping-time values: on the exact engine the path value at T_n is
    // the lattice anchor, so raw X_{T_n} has the same closed forms.
    let dx = delta_projection(f, sk)?;
    Ok(squared_increments(&dx, t))
}

fn raw_energy_grid(f: &Functional, path: &GridPath, sk: &Skeleton, t: f64) -> Result<f64> {
    // The grid hit time of the first-passage level, found once per path.
    let fp_hit = match f {
        Functional::FirstPassage { alpha } => Some(
            path.values
                .iter()
                .position(|v| v.abs() >= *alpha)
                .map(|i| i as f64 * path.dt),
        ),
        _ => None,
    };
    let raw_value = |time: f64, x: f64| -> Result<f64> {
        Ok(match f {
            Functional::State(func) => func.eval(x),
            Functional::MartingaleTerminal { phi, maturity } => {
                let var = maturity - time;
                if var <= 0.0 {
                    phi.eval(x)
                } else {
                    gaussian_expectation(x, var.sqrt(), |z| phi.eval(z))
                }
            }
            Functional::FirstPassage { alpha } => match fp_hit.as_ref().unwrap() {
                Some(hit) if *hit <= time => *hit,
                _ => time + alpha * alpha - x * x,
            },
            Functional::FbmState { .. } => {
                return Err(Error::regime("fbm raw value needs the fbm evaluator"))
            }
        })
    };
    let mut prev = raw_value(0.0, sk.start_value)?;
    let mut acc = 0.0;
    for &time in &sk.times {
        if time > t {
            break;
        }
        let v = raw_value(time, path.value_at(time))?;
        let d = v - prev;
        acc += d * d;
        prev = v;
    }
    Ok(acc)
}

fn fbm_raw_energy(
    func: &RealFn,
    eval: &crate::fbm::FbmEvaluator,
    path: &GridPath,
    sk: &Skeleton,
    t: f64,
) -> f64 {
    let mut idxs: Vec<usize> = Vec::with_capacity(sk.times.len());
    for &time in &sk.times {
        if time > t {
            break;
        }
        idxs.push((time / path.dt).round() as usize);
    }
    let values = eval.values_at_indices(path, &idxs);
    let mut acc = 0.0;
    let mut prev = func.eval(0.0);
    for v in values {
        let d = func.eval(v) - prev;
        acc += d * d;
        prev = func.eval(v);
    }
    acc
}

/// Bounded test functionals for the weak-limit probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunctional {
    One,
    /// sign of the path value at horizon/2
    SignMid,
    /// path value at the horizon clipped to [-1, 1]
    ClippedTerminal,
}

impl TestFunctional {
    pub fn name(&self) -> &'static str {
        match self {
            TestFunctional::One => "one",
            TestFunctional::SignMid => "sign-mid",
            TestFunctional::ClippedTerminal => "clipped-terminal",
        }
    }

    pub fn eval(&self, mid_value: f64, terminal_value: f64) -> f64 {
        match self {
            TestFunctional::One => 1.0,
            TestFunctional::SignMid => {
                if mid_value >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            TestFunctional::ClippedTerminal => terminal_value.clamp(-1.0, 1.0),
        }
    }

    pub fn catalogue() -> [TestFunctional; 3] {
        [
            TestFunctional::One,
            TestFunctional::SignMid,
            TestFunctional::ClippedTerminal,
        ]
    }
}

/// One row of the delta-covariation probe table.
#[derive(Debug, Clone)]
pub struct CovariationRow {
    pub t: f64,
    pub g: &'static str,
    pub level: u32,
    pub estimate: Estimate,
}

/// Monte Carlo probes E[g [delta^k X, delta^k Y]_t] on the exact engine,
/// coupled across levels by coarsening.
pub fn delta_covariation_probe(
    fx: &Functional,
    fy: &Functional,
    t_list: &[f64],
    g_list: &[TestFunctional],
    levels: &[u32],
    horizon: f64,
    start: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<CovariationRow>> {
    let k_max = *levels.iter().max().ok_or_else(|| Error::domain("no levels"))?;
    let rows_per_path = t_list.len() * g_list.len() * levels.len();
    let per_path: Vec<Result<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, Component::Covariation, p as u64);
            let fine = build_skeleton_exact(standard_law(), k_max, start, horizon, &mut rng);
            let fine_sp = fine.step_process();
            let mid = fine_sp.evaluate_unchecked(horizon / 2.0);
            let terminal = fine_sp.evaluate_unchecked(horizon);
            let skeletons = levels_by_coarsening(fine, levels);
            let mut vals = Vec::with_capacity(rows_per_path);
            for sk in &skeletons {
                let dx = delta_projection(fx, sk)?;
                let dy = delta_projection(fy, sk)?;
                for t in t_list {
                    let bracket = pathwise_bracket(&dx, &dy, *t);
                    for g in g_list {
                        vals.push(g.eval(mid, terminal) * bracket);
                    }
                }
            }
            Ok(vals)
        })
        .collect();
    let mut cols = vec![Vec::with_capacity(n_paths); rows_per_path];
    for r in per_path {
        for (i, v) in r?.into_iter().enumerate() {
            cols[i].push(v);
        }
    }
    let mut rows = Vec::with_capacity(rows_per_path);
    let mut i = 0;
    for k in levels {
        for t in t_list {
            for g in g_list {
                rows.push(CovariationRow {
                    t: *t,
                    g: g.name(),
                    level: *k,
                    estimate: Estimate::from_sample(&cols[i]),
                });
                i += 1;
            }
        }
    }
    Ok(rows)
}

/// One row of the chain rule probe: both sides of
/// E[g int_0^t D^k F(B) ds] = E[g int_0^t f(B_s) D^k B ds].
#[derive(Debug, Clone)]
pub struct ChainRuleRow {
    pub level: u32,
    pub g: &'static str,
    pub lhs: Estimate,
    pub rhs: Estimate,
}

/// Chain-rule probe for X = B on the grid engine. The left side integrates
/// the difference-quotient derivative of F along the skeleton with
/// table-exact h^k mass per interval; the right side integrates f(B) against
/// the same exact h^k mass per grid cell, so a linear F makes the two sides
/// agree pathwise to rounding.
pub fn chain_rule_probe(
    f_outer: &RealFn,
    levels: &[u32],
    t: f64,
    dt: f64,
    start: f64,
    n_paths: usize,
    seed: u64,
    g_list: &[TestFunctional],
    table: &IntensityTable,
) -> Result<Vec<ChainRuleRow>> {
    let f_inner = f_outer.derivative()?;
    let steps = (t / dt).round() as usize;
    // Deterministic per-level angle bracket on the grid, shared by all paths.
    let angle_grids: Vec<Vec<f64>> = levels
        .iter()
        .map(|&k| {
            (0..=steps)
                .map(|i| table.angle_bracket(k, i as f64 * dt).unwrap())
                .collect()
        })
        .collect();
    let rows_per_path = levels.len() * g_list.len();
    let per_path: Vec<Result<Vec<(f64, f64)>>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, Component::ChainRule, p as u64);
            let path = generate_brownian(dt, t, start, &mut rng);
            let mid = path.value_at(t / 2.0);
            let terminal = path.value_at(t);
            let mut vals = Vec::with_capacity(rows_per_path);
            for (li, &k) in levels.iter().enumerate() {
                let gs = extract_skeleton_from_grid(&path, k)?;
                let sk = &gs.skeleton;
                // lhs: sum over intervals of ratio * exact h^k mass.
                let fx = Functional::State(f_outer.clone());
                let dx = delta_projection(&fx, sk)?;
                let deriv = stochastic_derivative(&dx, sk);
                let lhs = deriv.integral_up_to(t, table);
                // rhs: f(B) piecewise constant on grid cells against the
                // same exact h^k cell masses, starting at T_1.
                let angle = &angle_grids[li];
                let t1 = sk.times.first().copied().unwrap_or(f64::INFINITY);
                let mut rhs = 0.0;
                for i in 0..steps {
                    let cell_start = i as f64 * dt;
                    if cell_start + dt <= t1 {
                        continue;
                    }
                    let mass = if cell_start >= t1 {
                        angle[i + 1] - angle[i]
                    } else {
                        table.angle_increment(k, t1, cell_start + dt)
                    };
                    rhs += f_inner.eval(path.values[i]) * mass;
                }
                for g in g_list {
                    let gv = g.eval(mid, terminal);
                    vals.push((gv * lhs, gv * rhs));
                }
            }
            Ok(vals)
        })
        .collect();
    let mut lhs_cols = vec![Vec::with_capacity(n_paths); rows_per_path];
    let mut rhs_cols = vec![Vec::with_capacity(n_paths); rows_per_path];
    for r in per_path {
        for (i, (l, rr)) in r?.into_iter().enumerate() {
            lhs_cols[i].push(l);
            rhs_cols[i].push(rr);
        }
    }
    let mut rows = Vec::with_capacity(rows_per_path);
    let mut i = 0;
    for &k in levels {
        for g in g_list {
            rows.push(ChainRuleRow {
                level: k,
                g: g.name(),
                lhs: Estimate::from_sample(&lhs_cols[i]),
                rhs: Estimate::from_sample(&rhs_cols[i]),
            });
            i += 1;
        }
    }
    Ok(rows)
}
