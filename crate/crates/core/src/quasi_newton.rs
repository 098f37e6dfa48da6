//! Zero-memory quasi-Newton metrics.
//!
//! Both updates start from the Barzilai–Borwein scaled identity `H₀ = γτ_BB2 I`. SR1 adds a
//! single rank-one term, giving `H = γτI + uuᵀ` and `B = H⁻¹ = (γτ)⁻¹I − vvᵀ`. Memory-one BFGS
//! gives `H = γτI + ρ(1+γ)u_γu_γᵀ − ργ²τ²/(1+γ)·yyᵀ` and the Hessian
//! `B = (γτ)⁻¹(I − ssᵀ/‖s‖²) + yyᵀ/⟨y,s⟩`. `H` drives the forward step and `B` is the metric
//! of the backward (prox) step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm2};
use crate::metric::{LowRankMetric, Sign};

/// `s = xₖ − xₖ₋₁`, `y = ∇f(xₖ) − ∇f(xₖ₋₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QnPair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
}

impl QnPair {
    pub fn new(s: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_dim(s.len(), y.len())?;
        Ok(Self { s, y })
    }

    pub fn curvature(&self) -> f64 {
        dot(&self.s, &self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QnConfig {
    /// Scaling of the BB step in `H₀ = γτI`, in `(0, 1)` for SR1 and `(0, 1]` for BFGS.
    pub gamma: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// The SR1 update is skipped when `⟨s − H₀y, y⟩ ≤ skip_tol·‖y‖‖s − H₀y‖`.
    pub skip_tol: f64,
}

pub type Sr1Config = QnConfig;

impl Default for QnConfig {
    fn default() -> Self {
        Self { gamma: 0.8, tau_min: 1e-8, tau_max: 1e8, skip_tol: 1e-8 }
    }
}

impl QnConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        Self { gamma, ..Self::default() }
    }

    fn validate(&self, allow_one: bool) -> Result<()> {
        let gamma_ok = self.gamma > 0.0 && (self.gamma < 1.0 || (allow_one && self.gamma == 1.0));
        if !gamma_ok {
            return Err(Error::InvalidArgument(format!("γ = {} out of range", self.gamma)));
        }
        if !(self.tau_min > 0.0 && self.tau_min < self.tau_max) {
            return Err(Error::InvalidArgument("need 0 < τ_min < τ_max".into()));
        }
        Ok(())
    }
}

/// `(τ_BB1, τ_BB2) = (‖s‖²/⟨s,y⟩, ⟨s,y⟩/‖y‖²)`.
pub fn bb_stepsizes(pair: &QnPair) -> Result<(f64, f64)> {
    let sy = pair.curvature();
    let yy = dot(&pair.y, &pair.y);
    if !(sy > 0.0) || yy == 0.0 {
        return Err(Error::InvalidArgument(format!("curvature condition fails: ⟨s,y⟩ = {sy}")));
    }
    Ok((dot(&pair.s, &pair.s) / sy, sy / yy))
}

/// A quasi-Newton metric: inverse Hessian `h` (forward step) and Hessian `b` (prox metric).
#[derive(Debug, Clone)]
pub struct QnMetric {
    pub h: LowRankMetric,
    pub b: LowRankMetric,
    /// The (clamped) BB step `τ` used in `H₀ = γτI`.
    pub tau: f64,
    /// True when the low-rank part was dropped.
    pub skipped: bool,
}

impl QnMetric {
    /// `H = τI`.
    pub fn scaled_identity(n: usize, tau: f64) -> Result<Self> {
        let h = LowRankMetric::diagonal(vec![tau; n])?;
        let b = h.invert()?;
        Ok(Self { h, b, tau, skipped: true })
    }
}

fn clamped_bb2(pair: &QnPair, cfg: &QnConfig) -> Option<(f64, bool)> {
    let (_, bb2) = bb_stepsizes(pair).ok()?;
    let tau = bb2.clamp(cfg.tau_min, cfg.tau_max);
    Some((tau, tau == bb2))
}

/// Zero-memory SR1 inverse Hessian `H = γτI + uuᵀ`, `u = (s − γτy)/√⟨s − γτy, y⟩`.
///
/// When the curvature condition fails the BB step is undefined and `H = γτ_fallback·I`.
pub fn sr1_metric(pair: &QnPair, cfg: &Sr1Config, tau_fallback: f64) -> Result<QnMetric> {
    cfg.validate(false)?;
    let n = pair.s.len();
    let Some((tau, _)) = clamped_bb2(pair, cfg) else {
        log::debug!("SR1: curvature condition fails, using scaled identity");
        return QnMetric::scaled_identity(n, cfg.gamma * tau_fallback);
    };
    let h0 = cfg.gamma * tau;
    let v: Vec<f64> = pair.s.iter().zip(&pair.y).map(|(s, y)| s - h0 * y).collect();
    let vy = dot(&v, &pair.y);
    if vy <= cfg.skip_tol * norm2(&pair.y) * norm2(&v) {
        log::debug!("SR1: update skipped");
        let mut m = QnMetric::scaled_identity(n, h0)?;
        m.tau = tau;
        return Ok(m);
    }
    let scale = 1.0 / vy.sqrt();
    let u: Vec<f64> = v.iter().map(|vi| vi * scale).collect();
    let h = LowRankMetric::rank_one(vec![h0; n], u, Sign::Plus)?;
    let b = h.invert()?;
    let skipped = h.rank() == 0;
    Ok(QnMetric { h, b, tau, skipped })
}

/// First-iteration metric `H = τI`.
pub fn initial_metric(n: usize, tau: f64) -> Result<QnMetric> {
    QnMetric::scaled_identity(n, tau)
}

/// Zero-memory BFGS pair `(H, B)`.
///
/// With `τ = τ_BB2` (not clamped), `H = γτI + ρ(1+γ)u_γu_γᵀ − ργ²τ²/(1+γ)·yyᵀ` with
/// `u_γ = s − γτ/(1+γ)·y`. When `τ` had to be clamped the general expansion
/// `H = γτI + [s y]C[s y]ᵀ` is used instead. `B` is always
/// `(γτ)⁻¹(I − ssᵀ/‖s‖²) + yyᵀ/⟨y,s⟩`. If `s` and `y` are parallel both collapse to rank one.
pub fn zbfgs_metric(pair: &QnPair, cfg: &QnConfig, tau_fallback: f64) -> Result<QnMetric> {
    cfg.validate(true)?;
    let n = pair.s.len();
    let Some((tau, exact_bb)) = clamped_bb2(pair, cfg) else {
        log::debug!("0BFGS: curvature condition fails, using scaled identity");
        return QnMetric::scaled_identity(n, cfg.gamma * tau_fallback);
    };
    let g = cfg.gamma * tau;
    let (s, y) = (&pair.s, &pair.y);
    let sy = dot(s, y);
    let ss = dot(s, s);
    let yy = dot(y, y);
    let rho = 1.0 / sy;

    if sy * sy >= (1.0 - 1e-10) * ss * yy {
        // y = ts: B = (γτ)⁻¹I + (t − (γτ)⁻¹) ŝŝᵀ
        let t = sy / ss;
        let coef = t - 1.0 / g;
        let shat: Vec<f64> = s.iter().map(|v| v / ss.sqrt()).collect();
        let sign = if coef >= 0.0 { Sign::Plus } else { Sign::Minus };
        let f: Vec<f64> = shat.iter().map(|v| v * coef.abs().sqrt()).collect();
        let b = LowRankMetric::rank_one(vec![1.0 / g; n], f, sign)?;
        let h = b.invert()?;
        return Ok(QnMetric { h, b, tau, skipped: false });
    }

    let b = LowRankMetric::split(
        vec![1.0 / g; n],
        vec![y.iter().map(|v| v * rho.sqrt()).collect()],
        vec![s.iter().map(|v| v / (g.sqrt() * ss.sqrt())).collect()],
    )?;

    let h = if exact_bb {
        let c = g / (1.0 + cfg.gamma);
        let u_gamma: Vec<f64> = s.iter().zip(y).map(|(si, yi)| si - c * yi).collect();
        let a = (rho * (1.0 + cfg.gamma)).sqrt();
        let w = (rho * g * g / (1.0 + cfg.gamma)).sqrt();
        LowRankMetric::split(
            vec![g; n],
            vec![u_gamma.iter().map(|v| v * a).collect()],
            vec![y.iter().map(|v| v * w).collect()],
        )?
    } else {
        // C = [[γτρ²‖y‖² + ρ, −γτρ], [−γτρ, 0]] in the basis [s y]
        let c11 = g * rho * rho * yy + rho;
        let c12 = -g * rho;
        let mean = 0.5 * c11;
        let rad = (0.25 * c11 * c11 + c12 * c12).sqrt();
        let (l_pos, l_neg) = (mean + rad, mean - rad);
        // eigenvector for λ: (c12, λ − c11)
        let vec_for = |l: f64| {
            let (a, b) = (c12, l - c11);
            let nrm = (a * a + b * b).sqrt();
            (a / nrm, b / nrm)
        };
        let (pa, pb) = vec_for(l_pos);
        let (na, nb) = vec_for(l_neg);
        let plus: Vec<f64> = s.iter().zip(y).map(|(si, yi)| (pa * si + pb * yi) * l_pos.sqrt()).collect();
        let minus: Vec<f64> = s.iter().zip(y).map(|(si, yi)| (na * si + nb * yi) * (-l_neg).sqrt()).collect();
        LowRankMetric::split(vec![g; n], vec![plus], vec![minus])?
    };
    Ok(QnMetric { h, b, tau, skipped: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_secant(h: &LowRankMetric, pair: &QnPair) {
        let hy = h.apply(&pair.y).unwrap();
        let scale = norm2(&pair.s);
        for (a, b) in hy.iter().zip(&pair.s) {
            assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
        }
    }

    fn check_inverse(m: &QnMetric) {
        let n = m.h.dim();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let back = m.b.apply(&m.h.apply(&e).unwrap()).unwrap();
            for i in 0..n {
                assert!((back[i] - e[i]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn bb_trivial_cases() {
        let s = vec![1.0, -2.0, 0.5];
        let p = QnPair::new(s.clone(), s.clone()).unwrap();
        assert_eq!(bb_stepsizes(&p).unwrap(), (1.0, 1.0));
        let p2 = QnPair::new(s.clone(), s.iter().map(|v| 2.0 * v).collect()).unwrap();
        assert_eq!(bb_stepsizes(&p2).unwrap(), (0.5, 0.5));
        let bad = QnPair::new(s.clone(), s.iter().map(|v| -v).collect()).unwrap();
        assert!(bb_stepsizes(&bad).is_err());
    }

    #[test]
    fn sr1_identity_pair() {
        let s = vec![1.0, 2.0, -1.0];
        let pair = QnPair::new(s.clone(), s.clone()).unwrap();
        let m = sr1_metric(&pair, &QnConfig::with_gamma(0.5), 1.0).unwrap();
        assert_eq!(m.h.diag(), &[0.5; 3]);
        // u = 0.5 s / √(0.5‖s‖²) ⇒ uuᵀ = 0.5 ssᵀ/‖s‖²
        let u = &m.h.factors()[0];
        let ss = dot(&s, &s);
        for i in 0..3 {
            for j in 0..3 {
                assert!((u[i] * u[j] - 0.5 * s[i] * s[j] / ss).abs() < 1e-15);
            }
        }
        check_secant(&m.h, &pair);
        check_inverse(&m);
    }

    #[test]
    fn sr1_skip_is_scale_invariant() {
        let s = [0.3, -0.1, 0.2];
        let y = [0.5, 0.2, 0.4];
        for t in [1e-6, 1.0, 1e6] {
            let pair = QnPair::new(s.iter().map(|v| v * t).collect(), y.iter().map(|v| v * t).collect()).unwrap();
            let m = sr1_metric(&pair, &QnConfig::default(), 1.0).unwrap();
            assert!(!m.skipped);
            check_secant(&m.h, &pair);
        }
    }

    #[test]
    fn zbfgs_gamma_one_identity_pair() {
        let s = vec![1.0, 2.0, -1.0];
        let pair = QnPair::new(s.clone(), s.clone()).unwrap();
        let m = zbfgs_metric(&pair, &QnConfig::with_gamma(1.0), 1.0).unwrap();
        let x = [0.3, -0.7, 1.1];
        let hx = m.h.apply(&x).unwrap();
        for i in 0..3 {
            assert!((hx[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn zbfgs_secant_and_inverse() {
        let pair = QnPair::new(vec![0.3, -0.1, 0.2, 0.7], vec![0.5, 0.2, 0.4, 0.9]).unwrap();
        for gamma in [0.5, 0.8, 1.0] {
            let m = zbfgs_metric(&pair, &QnConfig::with_gamma(gamma), 1.0).unwrap();
            check_secant(&m.h, &pair);
            check_inverse(&m);
            assert_eq!(m.b.sign(), None);
        }
        // clamped τ uses the general expansion
        let cfg = QnConfig { gamma: 0.5, tau_min: 2.0, tau_max: 1e8, skip_tol: 1e-8 };
        let m = zbfgs_metric(&pair, &cfg, 1.0).unwrap();
        assert_eq!(m.tau, 2.0);
        check_secant(&m.h, &pair);
        check_inverse(&m);
    }
}
