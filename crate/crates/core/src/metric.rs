//! Diagonal ± low-rank symmetric positive-definite metrics `V = P + Σ sᵢ uᵢuᵢᵀ`.
//!
//! `P` is diagonal with strictly positive entries and every factor carries its own sign
//! `sᵢ ∈ {+1, −1}`. The common cases are a single sign for all factors (`P ± UUᵀ`) and the
//! split form `P + U₁U₁ᵀ − U₂U₂ᵀ` produced by the zero-memory BFGS Hessian.
//!
//! Everything goes through the `r × r` capacitance matrix `K = S + UᵀP⁻¹U`: positive
//! definiteness of `V` is equivalent to `K` having exactly as many positive eigenvalues as
//! there are `+` factors and as many negative ones as there are `−` factors (Haynsworth
//! inertia additivity), and the inverse follows from Woodbury with `K⁻¹`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm2};

/// Factors with Euclidean norm below this are dropped at construction.
pub const FACTOR_DROP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// `V = diag(d) + Σᵢ sᵢ uᵢ uᵢᵀ`, immutable after construction.
#[derive(Debug, Clone)]
pub struct LowRankMetric {
    diag: Vec<f64>,
    factors: Vec<Vec<f64>>,
    signs: Vec<Sign>,
    // P⁻¹uᵢ, reused by every prox evaluation.
    pinv_factors: Vec<Vec<f64>>,
    // UᵀP⁻¹U
    gram: DMatrix<f64>,
}

/// Inverse of a [`LowRankMetric`]. It has the same structure (diagonal `P⁻¹` plus signed
/// factors), with the sign of the low-rank part flipped for single-sign metrics.
pub type MetricInverse = LowRankMetric;

impl LowRankMetric {
    /// Pure diagonal metric.
    pub fn diagonal(diag: Vec<f64>) -> Result<Self> {
        Self::with_signs(diag, Vec::new(), Vec::new())
    }

    /// `P ± Σ uᵢuᵢᵀ` with one sign for all factors.
    pub fn new(diag: Vec<f64>, factors: Vec<Vec<f64>>, sign: Sign) -> Result<Self> {
        let signs = vec![sign; factors.len()];
        Self::with_signs(diag, factors, signs)
    }

    /// Rank-one convenience constructor `P ± uuᵀ`.
    pub fn rank_one(diag: Vec<f64>, u: Vec<f64>, sign: Sign) -> Result<Self> {
        Self::new(diag, vec![u], sign)
    }

    /// `P + Σ plusᵢ plusᵢᵀ − Σ minusⱼ minusⱼᵀ`.
    pub fn split(diag: Vec<f64>, plus: Vec<Vec<f64>>, minus: Vec<Vec<f64>>) -> Result<Self> {
        let mut signs = vec![Sign::Plus; plus.len()];
        signs.extend(std::iter::repeat_n(Sign::Minus, minus.len()));
        let mut factors = plus;
        factors.extend(minus);
        Self::with_signs(diag, factors, signs)
    }

    /// General constructor; validates positivity of `P`, independence of the factors and
    /// positive definiteness of the assembled metric.
    pub fn with_signs(diag: Vec<f64>, factors: Vec<Vec<f64>>, signs: Vec<Sign>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("metric dimension must be positive".into()));
        }
        if let Some(bad) = diag.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::InvalidArgument(format!("diagonal entries must be positive, found {bad}")));
        }
        if factors.len() != signs.len() {
            return Err(Error::InvalidArgument("one sign per factor is required".into()));
        }
        let n = diag.len();
        let mut kept_f = Vec::with_capacity(factors.len());
        let mut kept_s = Vec::with_capacity(factors.len());
        for (u, s) in factors.into_iter().zip(signs) {
            check_dim(n, u.len())?;
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("factor has non-finite entries".into()));
            }
            if norm2(&u) >= FACTOR_DROP_TOL {
                kept_f.push(u);
                kept_s.push(s);
            }
        }
        if kept_f.len() > n {
            return Err(Error::InvalidArgument(format!("rank {} exceeds dimension {n}", kept_f.len())));
        }
        let metric = Self::assemble(diag, kept_f, kept_s);
        metric.validate()?;
        Ok(metric)
    }

    fn assemble(diag: Vec<f64>, factors: Vec<Vec<f64>>, signs: Vec<Sign>) -> Self {
        let pinv_factors: Vec<Vec<f64>> =
            factors.iter().map(|u| u.iter().zip(&diag).map(|(ui, di)| ui / di).collect()).collect();
        let r = factors.len();
        let gram = DMatrix::from_fn(r, r, |i, j| dot(&factors[i], &pinv_factors[j]));
        Self { diag, factors, signs, pinv_factors, gram }
    }

    fn validate(&self) -> Result<()> {
        let r = self.rank();
        if r == 0 {
            return Ok(());
        }
        let gram_eig = SymmetricEigen::new(self.gram.clone()).eigenvalues;
        let gmax = gram_eig.iter().cloned().fold(0.0_f64, f64::max);
        let gmin = gram_eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if gmin <= 1e-12 * gmax.max(1.0) {
            return Err(Error::InvalidArgument("low-rank factors are linearly dependent".into()));
        }
        let k_eig = SymmetricEigen::new(self.capacitance()).eigenvalues;
        let scale = 1.0 + gmax;
        let tol = 1e-13 * scale;
        let pos = k_eig.iter().filter(|&&l| l > tol).count();
        let neg = k_eig.iter().filter(|&&l| l < -tol).count();
        let n_plus = self.signs.iter().filter(|&&s| s == Sign::Plus).count();
        let n_minus = r - n_plus;
        if pos != n_plus || neg != n_minus {
            let detail = if n_plus == 0 {
                format!("‖P^(-1/2)U‖² = {gmax} must be < 1")
            } else {
                format!("capacitance inertia ({pos}+, {neg}−) does not match ({n_plus}+, {n_minus}−)")
            };
            return Err(Error::NotPositiveDefinite(detail));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    /// Columns of `P⁻¹U`.
    pub fn pinv_factors(&self) -> &[Vec<f64>] {
        &self.pinv_factors
    }

    /// `UᵀP⁻¹U`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// The common sign of all factors, or `None` for mixed-sign (and rank-zero) metrics.
    pub fn sign(&self) -> Option<Sign> {
        let first = *self.signs.first()?;
        self.signs.iter().all(|&s| s == first).then_some(first)
    }

    /// `K = S + UᵀP⁻¹U`.
    pub fn capacitance(&self) -> DMatrix<f64> {
        let mut k = self.gram.clone();
        for (i, s) in self.signs.iter().enumerate() {
            k[(i, i)] += s.value();
        }
        k
    }

    /// `‖P^{-1/2}U‖²`, the largest eigenvalue of `UᵀP⁻¹U`.
    pub fn scaled_factor_norm_sq(&self) -> f64 {
        if self.rank() == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.gram.clone()).eigenvalues.iter().cloned().fold(0.0_f64, f64::max)
    }

    /// Lipschitz constant `1 + ‖P^{-1/2}U‖²` of the root map.
    pub fn lipschitz_bound(&self) -> f64 {
        1.0 + self.scaled_factor_norm_sq()
    }

    /// Strong-monotonicity modulus of the root map: `1` for `P + Q`, `1 − ‖P^{-1/2}U‖²` for
    /// `P − Q`. Mixed-sign metrics have no such modulus.
    pub fn monotonicity_modulus(&self) -> Option<f64> {
        match self.sign() {
            Some(Sign::Plus) => Some(1.0),
            Some(Sign::Minus) => Some(1.0 - self.scaled_factor_norm_sq()),
            None if self.rank() == 0 => Some(1.0),
            None => None,
        }
    }

    /// `Vx = Px + Σ sᵢ uᵢ⟨uᵢ, x⟩`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, d), xi) in out.iter_mut().zip(&self.diag).zip(x) {
            *o = d * xi;
        }
        for (u, s) in self.factors.iter().zip(&self.signs) {
            let c = s.value() * dot(u, x);
            for (o, ui) in out.iter_mut().zip(u) {
                *o += c * ui;
            }
        }
    }

    /// `⟨x, Vx⟩`.
    pub fn norm_sq(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let mut acc: f64 = x.iter().zip(&self.diag).map(|(xi, d)| d * xi * xi).sum();
        for (u, s) in self.factors.iter().zip(&self.signs) {
            let c = dot(u, x);
            acc += s.value() * c * c;
        }
        Ok(acc.max(0.0))
    }

    /// Sherman–Morrison–Woodbury inverse.
    ///
    /// With `K = S + UᵀP⁻¹U = QΛQᵀ`, `V⁻¹ = P⁻¹ − Σⱼ λⱼ⁻¹ wⱼwⱼᵀ` where `wⱼ = P⁻¹Uqⱼ`. Each
    /// term becomes a factor `wⱼ/√|λⱼ|` with sign `−sign(λⱼ)`; for rank one this is the
    /// familiar `v = D⁻¹u/√(1 ± Σ uᵢ²/dᵢ)` with the sign flipped.
    pub fn invert(&self) -> Result<MetricInverse> {
        let diag_inv: Vec<f64> = self.diag.iter().map(|d| 1.0 / d).collect();
        let r = self.rank();
        if r == 0 {
            return Ok(Self::assemble(diag_inv, Vec::new(), Vec::new()));
        }
        let (factors, signs) = if r == 1 {
            let lam = self.signs[0].value() + self.gram[(0, 0)];
            if lam.abs() <= 1e-14 {
                return Err(Error::NotPositiveDefinite("singular capacitance".into()));
            }
            let scale = 1.0 / lam.abs().sqrt();
            let f = self.pinv_factors[0].iter().map(|v| v * scale).collect();
            (vec![f], vec![if lam > 0.0 { Sign::Minus } else { Sign::Plus }])
        } else {
            let eig = SymmetricEigen::new(self.capacitance());
            let mut factors = Vec::with_capacity(r);
            let mut signs = Vec::with_capacity(r);
            for j in 0..r {
                let lam = eig.eigenvalues[j];
                if lam.abs() <= 1e-14 {
                    return Err(Error::NotPositiveDefinite("singular capacitance".into()));
                }
                let q = eig.eigenvectors.column(j);
                let scale = 1.0 / lam.abs().sqrt();
                let mut w = vec![0.0; self.dim()];
                for (i, pu) in self.pinv_factors.iter().enumerate() {
                    let c = q[i] * scale;
                    for (wk, pk) in w.iter_mut().zip(pu) {
                        *wk += c * pk;
                    }
                }
                factors.push(w);
                signs.push(if lam > 0.0 { Sign::Minus } else { Sign::Plus });
            }
            // Keep the plus factors first so split-form consumers see a stable layout.
            let mut idx: Vec<usize> = (0..r).collect();
            idx.sort_by_key(|&j| signs[j] == Sign::Minus);
            (idx.iter().map(|&j| factors[j].clone()).collect(), idx.iter().map(|&j| signs[j]).collect())
        };
        Ok(Self::assemble(diag_inv, factors, signs))
    }
}
