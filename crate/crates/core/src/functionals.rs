//! Driving paths and the catalogue of functionals the calculus operates on.

use crate::error::{Error, Result};
use crate::quadrature::gaussian_expectation;
use crate::skeleton::Skeleton;
use rand::Rng;
use rand_distr::StandardNormal;

/// A path sampled on a uniform time grid; values[i] is the value at i * dt.
#[derive(Debug, Clone)]
pub struct GridPath {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl GridPath {
    pub fn start(&self) -> f64 {
        self.values[0]
    }

    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// Grid index at or before time t.
    pub fn index_at(&self, t: f64) -> usize {
        ((t / self.dt) as usize).min(self.values.len() - 1)
    }

    /// Value at the grid point at or before t.
    pub fn value_at(&self, t: f64) -> f64 {
        self.values[self.index_at(t)]
    }
}

/// Cumulative sum of i.i.d. centered Gaussian increments with variance dt.
pub fn generate_brownian<R: Rng + ?Sized>(
    dt: f64,
    horizon: f64,
    start: f64,
    rng: &mut R,
) -> GridPath {
    assert!(dt > 0.0 && horizon > 0.0);
    let steps = (horizon / dt).round() as usize;
    let sd = dt.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = start;
    values.push(x);
    for _ in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        x += sd * z;
        values.push(x);
    }
    GridPath { dt, values }
}

/// Real functions of one variable used as F, phi, or f across the calculus.
#[derive(Debug, Clone, PartialEq)]
pub enum RealFn {
    Const(f64),
    /// a * x + b
    Linear { a: f64, b: f64 },
    Square,
    Abs,
    Sin,
    Cos,
    /// a x^2 + b x + c
    Poly2 { a: f64, b: f64, c: f64 },
    /// clamp(x, -c, c)
    Clip { c: f64 },
    /// Primitive of Clip: x^2/2 inside [-c, c], c|x| - c^2/2 outside.
    ClipPrimitive { c: f64 },
    /// Piecewise-linear table (xs strictly increasing); constant outside.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl RealFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RealFn::Const(c) => *c,
            RealFn::Linear { a, b } => a * x + b,
            RealFn::Square => x * x,
            RealFn::Abs => x.abs(),
            RealFn::Sin => x.sin(),
            RealFn::Cos => x.cos(),
            RealFn::Poly2 { a, b, c } => (a * x + b) * x + c,
            RealFn::Clip { c } => x.clamp(-c, *c),
            RealFn::ClipPrimitive { c } => {
                if x.abs() <= *c {
                    0.5 * x * x
                } else {
                    c * x.abs() - 0.5 * c * c
                }
            }
            RealFn::Table { xs, ys } => {
                if x <= xs[0] {
                    ys[0]
                } else if x >= *xs.last().unwrap() {
                    *ys.last().unwrap()
                } else {
                    let i = xs.partition_point(|&v| v <= x) - 1;
                    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
                    ys[i] + w * (ys[i + 1] - ys[i])
                }
            }
        }
    }

    /// Derivative, where it exists in closed form within the catalogue.
    pub fn derivative(&self) -> Result<RealFn> {
        Ok(match self {
            RealFn::Const(_) => RealFn::Const(0.0),
            RealFn::Linear { a, .. } => RealFn::Const(*a),
            RealFn::Square => RealFn::Linear { a: 2.0, b: 0.0 },
            RealFn::Poly2 { a, b, .. } => RealFn::Linear {
                a: 2.0 * a,
                b: *b,
            },
            RealFn::Sin => RealFn::Cos,
            RealFn::ClipPrimitive { c } => RealFn::Clip { c: *c },
            other => {
                return Err(Error::regime(format!(
                    "no catalogued derivative for {other:?}"
                )))
            }
        })
    }

    /// Primitive F with F(0) = 0, where the catalogue has one.
    pub fn primitive(&self) -> Result<RealFn> {
        Ok(match self {
            RealFn::Const(c) => RealFn::Linear { a: *c, b: 0.0 },
            RealFn::Clip { c } => RealFn::ClipPrimitive { c: *c },
            RealFn::Linear { a, b } => RealFn::Poly2 {
                a: 0.5 * a,
                b: *b,
                c: 0.0,
            },
            other => {
                return Err(Error::regime(format!(
                    "no catalogued primitive for {other:?}"
                )))
            }
        })
    }
}

/// Declared evaluation regime of a Wiener functional.
#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    /// X_t = F(B_t).
    State(RealFn),
    /// X_t = E[phi(B_T) | F_t], t <= maturity T.
    MartingaleTerminal { phi: RealFn, maturity: f64 },
    /// X_t = E[T_alpha | F_t] where T_alpha = inf{t : |B_t| = alpha}.
    FirstPassage { alpha: f64 },
    /// X_t = f(B^H_t) driven by fractional Brownian motion, H in (1/2, 1).
    FbmState { f: RealFn, hurst: f64 },
}

impl Functional {
    /// Catalogue names accepted by the CLI.
    pub fn parse(name: &str, horizon: f64) -> Result<Functional> {
        let name = name.trim();
        if let Some(arg) = name
            .strip_prefix("first-passage(")
            .and_then(|s| s.strip_suffix(')'))
        {
            let alpha: f64 = arg
                .parse()
                .map_err(|_| Error::domain(format!("bad alpha in {name}")))?;
            return Ok(Functional::FirstPassage { alpha });
        }
        if let Some(arg) = name
            .strip_prefix("fbm-sin(")
            .and_then(|s| s.strip_suffix(')'))
        {
            let hurst: f64 = arg
                .parse()
                .map_err(|_| Error::domain(format!("bad hurst in {name}")))?;
            return Ok(Functional::FbmState {
                f: RealFn::Sin,
                hurst,
            });
        }
        Ok(match name {
            "square" => Functional::State(RealFn::Square),
            "abs" => Functional::State(RealFn::Abs),
            "identity-terminal" => Functional::MartingaleTerminal {
                phi: RealFn::Linear { a: 1.0, b: 0.0 },
                maturity: horizon,
            },
            "square-terminal" => Functional::MartingaleTerminal {
                phi: RealFn::Square,
                maturity: horizon,
            },
            other => return Err(Error::domain(format!("unknown functional `{other}`"))),
        })
    }

    /// Tabulated F with linear interpolation, as a state functional.
    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<Functional> {
        if xs.len() != ys.len() || xs.len() < 2 || xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("tabulated F needs increasing xs"));
        }
        Ok(Functional::State(RealFn::Table { xs, ys }))
    }
}

/// Input a functional is evaluated against.
#[derive(Debug, Clone, Copy)]
pub enum EvalInput<'a> {
    /// A grid path of the driver (for FbmState: the already-built B^H path).
    Grid(&'a GridPath),
    Skeleton(&'a Skeleton),
}

/// X_t per the declared kind.
///
/// State and fbm-state read the current value; martingale-terminal takes the
/// conditional Gaussian expectation; first-passage applies the exit-time
/// identity t + alpha^2 - x^2 until the level is hit.
pub fn evaluate_functional(f: &Functional, t: f64, input: EvalInput<'_>) -> Result<f64> {
    let value_at = |t: f64| -> f64 {
        match input {
            EvalInput::Grid(p) => p.value_at(t),
            EvalInput::Skeleton(s) => s.step_process().evaluate_unchecked(t),
        }
    };
    match f {
        Functional::State(func) => Ok(func.eval(value_at(t))),
        Functional::FbmState { f: func, hurst } => {
            if !(0.5..1.0).contains(hurst) || *hurst == 0.5 {
                return Err(Error::domain(format!("hurst {hurst} outside (0.5, 1)")));
            }
            match input {
                EvalInput::Grid(p) => Ok(func.eval(p.value_at(t))),
                EvalInput::Skeleton(_) => Err(Error::regime(
                    "fbm-state requires a grid path".to_string(),
                )),
            }
        }
        Functional::MartingaleTerminal { phi, maturity } => {
            if t > *maturity {
                return Err(Error::domain(format!(
                    "martingale-terminal evaluated at t = {t} past maturity {maturity}"
                )));
            }
            let x = value_at(t);
            let var = maturity - t;
            if var == 0.0 {
                Ok(phi.eval(x))
            } else {
                Ok(gaussian_expectation(x, var.sqrt(), |z| phi.eval(z)))
            }
        }
        Functional::FirstPassage { alpha } => {
            let a = *alpha;
            // Scan for the hit of +-alpha up to t.
            match input {
                EvalInput::Skeleton(s) => {
                    let h = s.jump_size();
                    let mut acc = 0i64;
                    for (time, sign) in s.times.iter().zip(&s.signs) {
                        if *time > t {
                            break;
                        }
                        acc += *sign as i64;
                        let v = s.start_value + h * acc as f64;
                        if v.abs() >= a {
                            return Ok(*time);
                        }
                    }
                    let x = s.step_process().evaluate_unchecked(t);
                    Ok(t + a * a - x * x)
                }
                EvalInput::Grid(p) => {
                    let idx = p.index_at(t);
                    for (i, v) in p.values[..=idx].iter().enumerate() {
                        if v.abs() >= a {
                            return Ok(i as f64 * p.dt);
                        }
                    }
                    let x = p.values[idx];
                    Ok(t + a * a - x * x)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{path_rng, Component};

    #[test]
    fn brownian_path_shape() {
        let mut rng = path_rng(3, Component::GridPaths, 0);
        let p = generate_brownian(0.01, 1.0, 0.25, &mut rng);
        assert_eq!(p.values.len(), 101);
        assert_eq!(p.start(), 0.25);
        assert!((p.horizon() - 1.0).abs() < 1e-12);
        assert_eq!(p.value_at(0.0), 0.25);
    }

    #[test]
    fn realfn_catalogue() {
        assert_eq!(RealFn::Square.eval(-3.0), 9.0);
        assert_eq!(RealFn::Abs.eval(-2.5), 2.5);
        assert_eq!(RealFn::Clip { c: 1.0 }.eval(3.0), 1.0);
        assert_eq!(RealFn::ClipPrimitive { c: 1.0 }.eval(0.5), 0.125);
        assert_eq!(RealFn::ClipPrimitive { c: 1.0 }.eval(-2.0), 1.5);
        let d = RealFn::Square.derivative().unwrap();
        assert_eq!(d.eval(3.0), 6.0);
        let p = RealFn::Clip { c: 2.0 }.primitive().unwrap();
        assert_eq!(p.eval(3.0), 4.0);
        assert!(RealFn::Abs.derivative().is_err());
    }

    #[test]
    fn table_interpolation() {
        let f = RealFn::Table {
            xs: vec![0.0, 1.0, 2.0],
            ys: vec![0.0, 2.0, 0.0],
        };
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(1.5), 1.0);
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.eval(5.0), 0.0);
    }

    #[test]
    fn parse_catalogue_names() {
        assert!(matches!(
            Functional::parse("square", 1.0).unwrap(),
            Functional::State(RealFn::Square)
        ));
        assert!(matches!(
            Functional::parse("first-passage(0.25)", 1.0).unwrap(),
            Functional::FirstPassage { .. }
        ));
        assert!(matches!(
            Functional::parse("fbm-sin(0.75)", 1.0).unwrap(),
            Functional::FbmState { .. }
        ));
        assert!(Functional::parse("nope", 1.0).is_err());
    }

    #[test]
    fn state_square_at_skeleton_time() {
        let sk = Skeleton {
            level: 2,
            start_value: 0.0,
            times: vec![0.5, 1.0],
            signs: vec![1, 1],
            horizon: 2.0,
        };
        let f = Functional::State(RealFn::Square);
        let v = evaluate_functional(&f, 1.0, EvalInput::Skeleton(&sk)).unwrap();
        assert_eq!(v, 0.25);
    }

    #[test]
    fn martingale_terminal_identity_is_current_value() {
        let sk = Skeleton {
            level: 2,
            start_value: 0.5,
            times: vec![0.25],
            signs: vec![-1],
            horizon: 2.0,
        };
        let f = Functional::MartingaleTerminal {
            phi: RealFn::Linear { a: 1.0, b: 0.0 },
            maturity: 1.0,
        };
        let v = evaluate_functional(&f, 0.5, EvalInput::Skeleton(&sk)).unwrap();
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn first_passage_lattice_hit() {
        // alpha = 2 * 2^{-k}: the skeleton hits it at the second up move.
        let sk = Skeleton {
            level: 2,
            start_value: 0.0,
            times: vec![0.1, 0.3, 0.7],
            signs: vec![1, 1, 1],
            horizon: 2.0,
        };
        let f = Functional::FirstPassage { alpha: 0.5 };
        let v = evaluate_functional(&f, 1.0, EvalInput::Skeleton(&sk)).unwrap();
        assert_eq!(v, 0.3);
        // Before the hit: exit-time identity.
        let v = evaluate_functional(&f, 0.2, EvalInput::Skeleton(&sk)).unwrap();
        assert!((v - (0.2 + 0.25 - 0.0625)).abs() < 1e-12);
    }
}
