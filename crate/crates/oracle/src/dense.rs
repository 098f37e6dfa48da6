use nalgebra::{DMatrix, DVector};

/// `diag(d) + Σ sⱼ wⱼwⱼᵀ` as a dense matrix.
pub fn assemble(diag: &[f64], factors: &[Vec<f64>], signs: &[f64]) -> DMatrix<f64> {
    let n = diag.len();
    let mut m = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
    for (w, s) in factors.iter().zip(signs) {
        let w = DVector::from_column_slice(w);
        m += (&w * w.transpose()) * *s;
    }
    assert_eq!(m.nrows(), n);
    m
}

/// Eigenvalues in ascending order.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Dense inverse (panics on singular input).
pub fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("matrix is invertible")
}

/// `‖M‖₂` for symmetric `M`.
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    sorted_eigenvalues(m).iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_update_eigenvalues() {
        // I + 3e₁e₁ᵀ has spectrum {1, 4}
        let m = assemble(&[1.0, 1.0], &[vec![3f64.sqrt(), 0.0]], &[1.0]);
        let ev = sorted_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 4.0).abs() < 1e-14);
        let inv = inverse(&m);
        assert!((inv[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((spectral_norm_sym(&m) - 4.0).abs() < 1e-14);
    }
}
