//! Seeded data-generating processes.
//!
//! Series are produced with a 100-observation burn-in started from zero
//! (the stationary mean); the burn-in is discarded. GARCH variances start at
//! 1.0. Time indices in comments are 1-based as in the usual notation;
//! breaks in the returned segmentation are 0-based regime starts.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Segmentation};

pub const BURN_IN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DgpFamily {
    NoBreak1,
    NoBreak2,
    NoBreak3,
    NoBreak4,
    NoBreak5,
    NoBreak6,
    OneBreak1,
    OneBreak2,
    OneBreak3,
    OneBreak4,
    OneBreak5,
    OneBreak6,
    /// Alternating 0/1 slopes over `regimes` regimes of fixed length `delta`.
    ManyBreaks1,
    /// Same process, parameterised by sample size with ten regimes.
    ManyBreaks2,
}

impl DgpFamily {
    pub const ALL: [DgpFamily; 14] = [
        DgpFamily::NoBreak1,
        DgpFamily::NoBreak2,
        DgpFamily::NoBreak3,
        DgpFamily::NoBreak4,
        DgpFamily::NoBreak5,
        DgpFamily::NoBreak6,
        DgpFamily::OneBreak1,
        DgpFamily::OneBreak2,
        DgpFamily::OneBreak3,
        DgpFamily::OneBreak4,
        DgpFamily::OneBreak5,
        DgpFamily::OneBreak6,
        DgpFamily::ManyBreaks1,
        DgpFamily::ManyBreaks2,
    ];

    pub fn is_many_breaks(self) -> bool {
        matches!(self, DgpFamily::ManyBreaks1 | DgpFamily::ManyBreaks2)
    }
}

impl fmt::Display for DgpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for DgpFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DgpFamily::ALL
            .into_iter()
            .find(|f| f.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown process {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpParams {
    pub sigma_u: f64,
    /// Error standard deviation before the variance switch.
    pub sigma_1: f64,
    /// Error standard deviation after the variance switch.
    pub sigma_2: f64,
    /// Autoregressive coefficient of the dynamic no-break process.
    pub alpha: f64,
    /// Regime length of the many-break processes.
    pub delta: usize,
    /// Number of regimes of the many-break processes.
    pub regimes: usize,
    pub t: usize,
}

impl DgpParams {
    pub fn new(t: usize) -> Self {
        Self {
            sigma_u: 0.5,
            sigma_1: 0.1,
            sigma_2: 0.2,
            alpha: 0.5,
            delta: 30,
            regimes: 10,
            t,
        }
    }

    /// Many-break geometry with `regimes` regimes of length `delta`.
    pub fn many(sigma_u: f64, delta: usize, regimes: usize) -> Self {
        Self {
            sigma_u,
            delta,
            regimes,
            ..Self::new(delta * regimes)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub family: DgpFamily,
    pub params: DgpParams,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(family: DgpFamily, params: DgpParams, seed: u64) -> Self {
        Self { family, params, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{what} must be positive, got {v}")))
            }
        };
        positive(p.sigma_u, "sigma_u")?;
        positive(p.sigma_1, "sigma_1")?;
        positive(p.sigma_2, "sigma_2")?;
        if !(p.alpha.abs() < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (-1, 1), got {}", p.alpha)));
        }
        if self.family.is_many_breaks() {
            if p.delta < 2 || p.regimes < 1 || p.delta * p.regimes != p.t {
                return Err(Error::InvalidConfig(format!(
                    "many-break geometry needs T = delta * regimes with delta >= 2 (T = {}, delta = {}, regimes = {})",
                    p.t, p.delta, p.regimes
                )));
            }
        } else if p.t < 4 || p.t % 2 != 0 {
            return Err(Error::InvalidConfig(format!("T must be even and at least 4, got {}", p.t)));
        }
        Ok(())
    }
}

struct Draws {
    rng: ChaCha8Rng,
}

impl Draws {
    fn normal(&mut self, sd: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        sd * z
    }
}

/// AR(1) with coefficient 0.5 and N(0, 0.75) innovations (unit variance).
fn ar_regressor(d: &mut Draws, total: usize) -> Vec<f64> {
    let sd = 0.75f64.sqrt();
    let mut x = Vec::with_capacity(total);
    let mut prev = 0.0;
    for _ in 0..total {
        prev = 0.5 * prev + d.normal(sd);
        x.push(prev);
    }
    x
}

fn iid(d: &mut Draws, total: usize, sd: f64) -> Vec<f64> {
    (0..total).map(|_| d.normal(sd)).collect()
}

/// `sigma * v_t`, `v_t = 0.5 v_{t-1} + e_t`, `e_t ~ N(0, var_e)`.
fn ar_errors(d: &mut Draws, total: usize, sigma: f64, var_e: f64) -> Vec<f64> {
    let sd = var_e.sqrt();
    let mut v = 0.0;
    (0..total)
        .map(|_| {
            v = 0.5 * v + d.normal(sd);
            sigma * v
        })
        .collect()
}

/// `u_t = sigma sqrt(h_t) e_t`, `h_t = 0.05 + 0.05 u_{t-1}^2 + 0.9 h_{t-1}`.
fn garch_errors(d: &mut Draws, total: usize, sigma: f64) -> Vec<f64> {
    let (mut h, mut u) = (1.0f64, 0.0);
    (0..total)
        .map(|_| {
            h = 0.05 + 0.05 * u * u + 0.9 * h;
            u = sigma * h.sqrt() * d.normal(1.0);
            u
        })
        .collect()
}

/// `sigma (e_t + 0.5 e_{t-1})`, `e_t ~ N(0, 0.8)`.
fn ma_errors(d: &mut Draws, total: usize, sigma: f64) -> Vec<f64> {
    let sd = 0.8f64.sqrt();
    let mut prev = d.normal(sd);
    (0..total)
        .map(|_| {
            let e = d.normal(sd);
            let u = sigma * (e + 0.5 * prev);
            prev = e;
            u
        })
        .collect()
}

/// `y_t = beta_t y_{t-1} + u_t` with the regressor `x_t = y_{t-1}`.
fn dynamic(beta: impl Fn(usize) -> f64, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut y = Vec::with_capacity(u.len());
    let mut x = Vec::with_capacity(u.len());
    let mut prev = 0.0;
    for (t, &ut) in u.iter().enumerate() {
        x.push(prev);
        prev = beta(t) * prev + ut;
        y.push(prev);
    }
    (y, x)
}

/// Draws a series and its true segmentation. Deterministic in `spec.seed`.
pub fn generate(spec: &DgpSpec) -> Result<(Dataset, Segmentation)> {
    spec.validate()?;
    let p = &spec.params;
    let t = p.t;
    let total = BURN_IN + t;
    let half = t / 2;
    let mut d = Draws {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };
    use DgpFamily::*;

    // (x, u) over burn-in plus sample; static designs combine them below
    let (x, u) = match spec.family {
        NoBreak1 | OneBreak1 | ManyBreaks1 | ManyBreaks2 => (iid(&mut d, total, 1.0), iid(&mut d, total, p.sigma_u)),
        NoBreak2 | OneBreak3 => (ar_regressor(&mut d, total), iid(&mut d, total, p.sigma_u)),
        NoBreak3 => (iid(&mut d, total, 1.0), ar_errors(&mut d, total, p.sigma_u, 1.0)),
        OneBreak2 => (iid(&mut d, total, 1.0), ar_errors(&mut d, total, p.sigma_u, 0.75)),
        NoBreak4 | OneBreak4 => (ar_regressor(&mut d, total), garch_errors(&mut d, total, p.sigma_u)),
        OneBreak5 => (ar_regressor(&mut d, total), ma_errors(&mut d, total, p.sigma_u)),
        NoBreak5 => {
            let x = ar_regressor(&mut d, total);
            let u = (0..total)
                .map(|i| d.normal(if i < BURN_IN + half { p.sigma_1 } else { p.sigma_2 }))
                .collect();
            (x, u)
        }
        NoBreak6 => {
            let e = iid(&mut d, total, (1.0 - p.alpha * p.alpha).sqrt());
            let (y, x) = dynamic(|_| p.alpha, &e);
            let data = Dataset::single_regressor(y[BURN_IN..].to_vec(), x[BURN_IN..].to_vec())?;
            return Ok((data, Segmentation::no_breaks(vec![p.alpha])));
        }
        OneBreak6 => {
            let e = iid(&mut d, total, p.sigma_u);
            let (y, x) = dynamic(|i| if i < BURN_IN + half { 0.2 } else { 0.8 }, &e);
            let data = Dataset::single_regressor(y[BURN_IN..].to_vec(), x[BURN_IN..].to_vec())?;
            return Ok((data, Segmentation::new(vec![half], vec![vec![0.2], vec![0.8]])?));
        }
    };

    let (breaks, levels): (Vec<usize>, Vec<f64>) = match spec.family {
        NoBreak1 | NoBreak2 | NoBreak3 | NoBreak4 | NoBreak5 => (vec![], vec![1.0]),
        ManyBreaks1 | ManyBreaks2 => (
            (1..p.regimes).map(|k| k * p.delta).collect(),
            (0..p.regimes).map(|k| (k % 2) as f64).collect(),
        ),
        _ => (vec![half], vec![0.0, 1.0]),
    };
    let beta = |i: usize| levels[breaks.iter().take_while(|&&b| b <= i).count()];
    let x = &x[BURN_IN..];
    let u = &u[BURN_IN..];
    let y: Vec<f64> = (0..t).map(|i| beta(i) * x[i] + u[i]).collect();
    let data = Dataset::single_regressor(y, x.to_vec())?;
    let coeffs = levels.iter().map(|&b| vec![b]).collect();
    Ok((data, Segmentation::new(breaks, coeffs)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_series() {
        for family in DgpFamily::ALL {
            let params = if family.is_many_breaks() {
                DgpParams::many(0.2, 10, 4)
            } else {
                DgpParams::new(50)
            };
            let spec = DgpSpec::new(family, params, 42);
            let (a, sa) = generate(&spec).unwrap();
            let (b, sb) = generate(&spec).unwrap();
            assert_eq!(a, b, "{family}");
            assert_eq!(sa, sb);
            let (c, _) = generate(&DgpSpec { seed: 43, ..spec }).unwrap();
            assert_ne!(a, c, "{family}");
        }
    }

    #[test]
    fn one_break_truth() {
        let (_, seg) = generate(&DgpSpec::new(DgpFamily::OneBreak1, DgpParams::new(100), 1)).unwrap();
        // new regime starts at the 51st observation
        assert_eq!(seg.breaks(), &[50]);
        assert_eq!(seg.coeffs(), &[vec![0.0], vec![1.0]]);
    }

    #[test]
    fn many_break_truth() {
        let (d, seg) = generate(&DgpSpec::new(DgpFamily::ManyBreaks2, DgpParams::many(0.2, 15, 10), 3)).unwrap();
        assert_eq!(d.len(), 150);
        assert_eq!(seg.num_breaks(), 9);
        assert_eq!(seg.breaks()[0], 15);
        assert_eq!(seg.coeffs()[1], vec![1.0]);
        assert_eq!(seg.coeffs()[2], vec![0.0]);
    }

    #[test]
    fn inconsistent_geometry_is_rejected() {
        let mut params = DgpParams::many(0.2, 30, 10);
        params.t = 301;
        assert!(generate(&DgpSpec::new(DgpFamily::ManyBreaks1, params, 0)).is_err());
        assert!(generate(&DgpSpec::new(DgpFamily::OneBreak1, DgpParams::new(101), 0)).is_err());
    }

    #[test]
    fn ar_regressor_has_unit_variance() {
        let (d, _) = generate(&DgpSpec::new(DgpFamily::NoBreak2, DgpParams::new(100_000), 9)).unwrap();
        let x = d.x();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn dynamic_design_uses_lagged_response() {
        let (d, _) = generate(&DgpSpec::new(DgpFamily::NoBreak6, DgpParams::new(20), 5)).unwrap();
        for t in 1..d.len() {
            assert_eq!(d.x()[t], d.y()[t - 1]);
        }
    }

    #[test]
    fn family_names_parse() {
        assert_eq!("onebreak3".parse::<DgpFamily>().unwrap(), DgpFamily::OneBreak3);
        assert!("TwoBreaks".parse::<DgpFamily>().is_err());
    }
}
