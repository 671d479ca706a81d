//! Coefficient inference conditional on an estimated segmentation.
//!
//! Regimes are treated as fixed. The stacked estimator is block diagonal, so
//! everything is computed regime by regime and placed on the diagonal of the
//! full matrices; cross-regime blocks are exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, matmul, spd_inverse, DenseMatrix};
use crate::model::{Dataset, Segmentation};
use crate::segcost::SegmentCostEngine;

pub const NORMAL_95: f64 = 1.96;

/// Smallest eigenvalue accepted for each normalised Gram block.
pub const PSI_EIGEN_FLOOR: f64 = 1e-10;

/// `floor(4 (T / 100)^(2/9))`.
pub fn default_hac_lags(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeEstimate {
    pub start: usize,
    pub end: usize,
    pub coeffs: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub ci: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    /// Regime coefficients stacked in time order, `(m + 1) p` entries.
    pub alpha_hat: Vec<f64>,
    /// Diagonal of the scaling matrix: `sqrt(regime length)` per coefficient.
    pub d_hat: Vec<f64>,
    pub psi_hat: DenseMatrix,
    pub phi_hat: DenseMatrix,
    /// `psi^-1 phi psi^-1`, the covariance of `D (alpha_hat - alpha)`.
    pub cov: DenseMatrix,
    pub std_errors: Vec<f64>,
    pub ci: Vec<Interval>,
    pub u_hat: Vec<f64>,
    pub hac_lags: usize,
    pub regimes: Vec<RegimeEstimate>,
}

/// Sandwich inference for the regime coefficients of `seg`.
///
/// `hac_lags = 0` gives the heteroskedasticity-robust plug-in; larger values
/// add Bartlett-weighted autocovariances of `x_t u_t` within each regime.
pub fn infer(data: &Dataset, seg: &Segmentation, hac_lags: usize) -> Result<InferenceReport> {
    let (n, p) = (data.len(), data.dim());
    seg.validate_for(n, p)?;
    let regimes = seg.regimes(n);
    for (j, &(s, e)) in regimes.iter().enumerate() {
        if e - s < p + 1 {
            return Err(Error::RegimeTooShort {
                regime: j,
                len: e - s,
                needed: p + 1,
            });
        }
    }

    let engine = SegmentCostEngine::new(data);
    let q = regimes.len() * p;
    let mut out = InferenceReport {
        alpha_hat: Vec::with_capacity(q),
        d_hat: Vec::with_capacity(q),
        psi_hat: DenseMatrix::zeros(q, q),
        phi_hat: DenseMatrix::zeros(q, q),
        cov: DenseMatrix::zeros(q, q),
        std_errors: Vec::with_capacity(q),
        ci: Vec::with_capacity(q),
        u_hat: vec![0.0; n],
        hac_lags,
        regimes: Vec::with_capacity(regimes.len()),
    };

    for (j, &(s, e)) in regimes.iter().enumerate() {
        let fit = engine.fit(s, e)?;
        if fit.degenerate {
            return Err(Error::Singular(format!("regime {j} ([{s}, {e})) has a rank-deficient design")));
        }
        let alpha = fit.coeffs;
        let len = (e - s) as f64;

        let mut psi = vec![0.0; p * p];
        for t in s..e {
            let x = data.row(t);
            for a in 0..p {
                for b in 0..p {
                    psi[a * p + b] += x[a] * x[b];
                }
            }
            out.u_hat[t] = data.y()[t] - x.iter().zip(&alpha).map(|(xi, ai)| xi * ai).sum::<f64>();
        }
        psi.iter_mut().for_each(|v| *v /= len);

        let mut shifted = psi.clone();
        for a in 0..p {
            shifted[a * p + a] -= PSI_EIGEN_FLOOR;
        }
        if !cholesky_in_place(&mut shifted, p, 0.0) {
            return Err(Error::Singular(format!("regime {j} Gram matrix is not positive definite")));
        }
        let psi_inv = spd_inverse(&psi, p, 0.0)
            .ok_or_else(|| Error::Singular(format!("regime {j} Gram matrix is not invertible")))?;

        let phi = regime_long_run(data, &out.u_hat, s, e, hac_lags);
        let mut cov = matmul(&matmul(&psi_inv, &phi, p), &psi_inv, p);
        for a in 0..p {
            for b in (a + 1)..p {
                let v = 0.5 * (cov[a * p + b] + cov[b * p + a]);
                cov[a * p + b] = v;
                cov[b * p + a] = v;
            }
        }

        let off = j * p;
        let mut se = Vec::with_capacity(p);
        let mut ci = Vec::with_capacity(p);
        for a in 0..p {
            for b in 0..p {
                out.psi_hat.set(off + a, off + b, psi[a * p + b]);
                out.phi_hat.set(off + a, off + b, phi[a * p + b]);
                out.cov.set(off + a, off + b, cov[a * p + b]);
            }
            let sd = (cov[a * p + a].max(0.0) / len).sqrt();
            se.push(sd);
            ci.push(Interval {
                lower: alpha[a] - NORMAL_95 * sd,
                upper: alpha[a] + NORMAL_95 * sd,
            });
        }
        out.alpha_hat.extend_from_slice(&alpha);
        out.d_hat.extend(std::iter::repeat_n(len.sqrt(), p));
        out.std_errors.extend_from_slice(&se);
        out.ci.extend_from_slice(&ci);
        out.regimes.push(RegimeEstimate {
            start: s,
            end: e,
            coeffs: alpha,
            std_errors: se,
            ci,
        });
    }
    Ok(out)
}

/// Bartlett-weighted long-run covariance of `x_t u_t` over `[s, e)`, divided
/// by the regime length.
fn regime_long_run(data: &Dataset, u: &[f64], s: usize, e: usize, lags: usize) -> Vec<f64> {
    let p = data.dim();
    let v: Vec<f64> = (s..e).flat_map(|t| data.row(t).iter().map(move |x| x * u[t])).collect();
    let len = e - s;
    let mut phi = vec![0.0; p * p];
    for l in 0..=lags.min(len - 1) {
        let w = if l == 0 { 1.0 } else { 1.0 - l as f64 / (lags + 1) as f64 };
        for t in l..len {
            let (cur, prev) = (&v[t * p..(t + 1) * p], &v[(t - l) * p..(t - l + 1) * p]);
            for a in 0..p {
                for b in 0..p {
                    let g = cur[a] * prev[b];
                    if l == 0 {
                        phi[a * p + b] += g;
                    } else {
                        // gamma_l + gamma_l'
                        phi[a * p + b] += w * g;
                        phi[b * p + a] += w * g;
                    }
                }
            }
        }
    }
    phi.iter_mut().for_each(|x| *x /= len as f64);
    phi
}
