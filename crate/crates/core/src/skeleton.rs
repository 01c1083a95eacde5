//! The level-k first-passage skeleton ((T^k_n, sigma^k_n)) and cadlag step
//! processes built on it.
//!
//! Two engines produce skeletons: the exact one draws i.i.d. rescaled exit
//! times (interarrivals distributed as 2^{-2k} tau) and uniform signs; the
//! grid one scans a time-discretized path for +-2^{-k} moves, clamping each
//! new anchor to the lattice so downstream identities stay exact while the
//! time bias is measured and reported as overshoot.

use crate::error::{Error, Result};
use crate::first_exit::FirstExitLaw;
use crate::functionals::GridPath;
use rand::Rng;

/// One realization of the level-k skeleton: the complete discrete
/// information set G^k_n.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub level: u32,
    pub start_value: f64,
    /// Strictly increasing jump times T^k_1 < T^k_2 < ... <= horizon.
    pub times: Vec<f64>,
    /// sigma^k_n in {-1, +1}, same length as `times`.
    pub signs: Vec<i8>,
    pub horizon: f64,
}

impl Skeleton {
    /// The jump magnitude 2^{-k}.
    pub fn jump_size(&self) -> f64 {
        (2.0f64).powi(-(self.level as i32))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Lattice values A^k_{T^k_n} for n = 1..len (start_value not included).
    pub fn lattice_values(&self) -> Vec<f64> {
        let h = self.jump_size();
        let mut acc = 0i64;
        self.signs
            .iter()
            .map(|s| {
                acc += *s as i64;
                self.start_value + h * acc as f64
            })
            .collect()
    }

    /// The step process A^k.
    pub fn step_process(&self) -> StepProcess {
        StepProcess {
            initial_value: self.start_value,
            jump_times: self.times.clone(),
            post_jump_values: self.lattice_values(),
            horizon: self.horizon,
        }
    }

    /// Number of jumps with T^k_n <= t.
    pub fn jumps_up_to(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t)
    }

    /// Collapse to the level k-1 skeleton by scanning the embedded +-1 walk:
    /// a coarse jump fires each time the walk moves two net fine steps from
    /// its last coarse anchor.
    pub fn coarsen(&self) -> Skeleton {
        assert!(self.level > 0, "cannot coarsen below level 0");
        let mut times = Vec::with_capacity(self.times.len() / 4 + 1);
        let mut signs = Vec::with_capacity(self.times.len() / 4 + 1);
        let mut walk = 0i64;
        let mut anchor = 0i64;
        for (t, s) in self.times.iter().zip(&self.signs) {
            walk += *s as i64;
            if (walk - anchor).abs() == 2 {
                times.push(*t);
                signs.push(((walk - anchor) / 2) as i8);
                anchor = walk;
            }
        }
        Skeleton {
            level: self.level - 1,
            start_value: self.start_value,
            times,
            signs,
            horizon: self.horizon,
        }
    }

    /// Fine steps consumed per coarse jump, for the coarsening statistics.
    pub fn coarsen_consumption(&self) -> (usize, usize) {
        let coarse = self.coarsen();
        let consumed = match coarse.times.last() {
            Some(last) => self.jumps_up_to(*last),
            None => 0,
        };
        (consumed, coarse.len())
    }
}

/// Exact engine: interarrivals are i.i.d. 2^{-2k} tau, signs i.i.d. uniform
/// on {-1, +1}, independent of the times. Generation stops at the first
/// increment that would cross the horizon.
pub fn build_skeleton_exact<R: Rng + ?Sized>(
    law: &FirstExitLaw,
    level: u32,
    start_value: f64,
    horizon: f64,
    rng: &mut R,
) -> Skeleton {
    assert!(horizon > 0.0);
    let scale = (4.0f64).powi(-(level as i32));
    let expected = (horizon / scale) as usize + 1;
    let mut times = Vec::with_capacity(expected);
    let mut signs = Vec::with_capacity(expected);
    let mut t = 0.0f64;
    loop {
        t += scale * law.sample(rng);
        if t > horizon {
            break;
        }
        times.push(t);
        signs.push(if rng.random::<bool>() { 1 } else { -1 });
    }
    Skeleton {
        level,
        start_value,
        times,
        signs,
        horizon,
    }
}

/// A grid-extracted skeleton plus the measured crossing overshoot
/// max_n (|B_{T^k_n} - A^k_{T^k_{n-1}}| - 2^{-k}).
#[derive(Debug, Clone)]
pub struct GridSkeleton {
    pub skeleton: Skeleton,
    pub max_overshoot: f64,
}

/// Grid engine: sequentially finds the first grid time where the path has
/// moved 2^{-k} from the last anchor and clamps the new anchor to the
/// lattice.
pub fn extract_skeleton_from_grid(path: &GridPath, level: u32) -> Result<GridSkeleton> {
    if path.values.len() < 2 {
        return Err(Error::domain("extract_skeleton_from_grid: empty path"));
    }
    if path.dt <= 0.0 {
        return Err(Error::domain("extract_skeleton_from_grid: dt <= 0"));
    }
    let h = (2.0f64).powi(-(level as i32));
    let mut times = Vec::new();
    let mut signs = Vec::new();
    let mut anchor = path.values[0];
    let mut max_overshoot = 0.0f64;
    for (i, &v) in path.values.iter().enumerate().skip(1) {
        let excess = (v - anchor).abs() - h;
        if excess >= 0.0 {
            times.push(i as f64 * path.dt);
            let sign = if v > anchor { 1 } else { -1 };
            signs.push(sign as i8);
            anchor += h * sign as f64;
            max_overshoot = max_overshoot.max(excess);
        }
    }
    Ok(GridSkeleton {
        skeleton: Skeleton {
            level,
            start_value: path.values[0],
            times,
            signs,
            horizon: path.horizon(),
        },
        max_overshoot,
    })
}

/// A cadlag piecewise-constant process: value on [T_n, T_{n+1}) is
/// post_jump_values[n], value on [0, T_1) is initial_value.
#[derive(Debug, Clone)]
pub struct StepProcess {
    pub initial_value: f64,
    pub jump_times: Vec<f64>,
    pub post_jump_values: Vec<f64>,
    pub horizon: f64,
}

impl StepProcess {
    /// Cadlag evaluation by binary search on the jump times.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::domain(format!("StepProcess::evaluate: t = {t}")));
        }
        if t > self.horizon {
            return Err(Error::domain(format!(
                "StepProcess::evaluate: t = {t} beyond horizon {}",
                self.horizon
            )));
        }
        Ok(self.evaluate_unchecked(t))
    }

    pub(crate) fn evaluate_unchecked(&self, t: f64) -> f64 {
        let idx = self.jump_times.partition_point(|&x| x <= t);
        if idx == 0 {
            self.initial_value
        } else {
            self.post_jump_values[idx - 1]
        }
    }

    /// Value right before the n-th jump (0-indexed).
    pub fn pre_jump_value(&self, n: usize) -> f64 {
        if n == 0 {
            self.initial_value
        } else {
            self.post_jump_values[n - 1]
        }
    }

    pub fn terminal_value(&self) -> f64 {
        *self.post_jump_values.last().unwrap_or(&self.initial_value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{path_rng, Component};

    fn law() -> &'static FirstExitLaw {
        use std::sync::OnceLock;
        static LAW: OnceLock<FirstExitLaw> = OnceLock::new();
        LAW.get_or_init(FirstExitLaw::default)
    }

    #[test]
    fn exact_engine_invariants() {
        let mut rng = path_rng(11, Component::SkeletonSim, 0);
        let sk = build_skeleton_exact(law(), 3, 0.25, 4.0, &mut rng);
        assert!(!sk.is_empty());
        let h = sk.jump_size();
        assert_eq!(h, 0.125);
        // Strictly increasing times within horizon.
        for w in sk.times.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(*sk.times.last().unwrap() <= sk.horizon);
        // Every jump magnitude exactly 2^{-k}; values on the lattice.
        let vals = sk.lattice_values();
        let mut prev = sk.start_value;
        for (v, s) in vals.iter().zip(&sk.signs) {
            assert_eq!((v - prev).abs(), h);
            assert_eq!((v - prev).signum() as i8, *s);
            let m = (v - sk.start_value) / h;
            assert_eq!(m, m.round());
            prev = *v;
        }
    }

    #[test]
    fn level_zero_walks_on_integers() {
        let mut rng = path_rng(5, Component::SkeletonSim, 1);
        let sk = build_skeleton_exact(law(), 0, 0.0, 10.0, &mut rng);
        for v in sk.lattice_values() {
            assert_eq!(v, v.round());
        }
    }

    #[test]
    fn coarsen_monotone_run() {
        let sk = Skeleton {
            level: 3,
            start_value: 0.0,
            times: (1..=6).map(|i| i as f64).collect(),
            signs: vec![1; 6],
            horizon: 10.0,
        };
        let c = sk.coarsen();
        assert_eq!(c.level, 2);
        assert_eq!(c.times, vec![2.0, 4.0, 6.0]);
        assert_eq!(c.signs, vec![1, 1, 1]);
    }

    #[test]
    fn coarsen_nesting_exact() {
        let mut rng = path_rng(23, Component::SkeletonSim, 2);
        let fine = build_skeleton_exact(law(), 6, 0.0, 1.0, &mut rng);
        let mid = fine.coarsen();
        let coarse = mid.coarsen();
        let is_subset = |small: &[f64], big: &[f64]| {
            small.iter().all(|t| big.binary_search_by(|x| x.partial_cmp(t).unwrap()).is_ok())
        };
        assert!(is_subset(&mid.times, &fine.times));
        assert!(is_subset(&coarse.times, &mid.times));
        // Coarse values stay on the coarse lattice.
        let h = coarse.jump_size();
        for v in coarse.lattice_values() {
            let m = v / h;
            assert!((m - m.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_extraction() {
        // Linear path t -> t with dt = 2^{-k}/10: jumps near n 2^{-k}, all +1.
        let k = 4u32;
        let h = (2.0f64).powi(-(k as i32));
        let dt = h / 10.0;
        let n = 400usize;
        let path = GridPath {
            dt,
            values: (0..=n).map(|i| i as f64 * dt).collect(),
        };
        let gs = extract_skeleton_from_grid(&path, k).unwrap();
        assert!(!gs.skeleton.is_empty());
        assert!(gs.skeleton.signs.iter().all(|&s| s == 1));
        for (n, t) in gs.skeleton.times.iter().enumerate() {
            assert!((t - (n + 1) as f64 * h).abs() < dt + 1e-12);
        }
        assert!(gs.max_overshoot < h / 2.0);
    }

    #[test]
    fn quiet_path_has_no_jumps() {
        let k = 2u32;
        let path = GridPath {
            dt: 0.01,
            values: vec![0.5; 100],
        };
        let gs = extract_skeleton_from_grid(&path, k).unwrap();
        assert!(gs.skeleton.is_empty());
        let empty = GridPath {
            dt: 0.01,
            values: vec![],
        };
        assert!(extract_skeleton_from_grid(&empty, k).is_err());
    }

    #[test]
    fn step_process_cadlag_evaluation() {
        let sp = StepProcess {
            initial_value: 1.0,
            jump_times: vec![1.0, 2.0, 3.0],
            post_jump_values: vec![2.0, -1.0, 5.0],
            horizon: 4.0,
        };
        assert_eq!(sp.evaluate(0.0).unwrap(), 1.0);
        assert_eq!(sp.evaluate(0.999).unwrap(), 1.0);
        assert_eq!(sp.evaluate(1.0).unwrap(), 2.0);
        assert_eq!(sp.evaluate(2.5).unwrap(), -1.0);
        assert_eq!(sp.evaluate(3.0).unwrap(), 5.0);
        assert_eq!(sp.evaluate(4.0).unwrap(), 5.0);
        assert!(sp.evaluate(4.1).is_err());
        assert!(sp.evaluate(-0.1).is_err());
    }
}
