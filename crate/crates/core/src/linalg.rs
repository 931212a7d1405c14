//! Dense complex linear algebra shared by the channel, receiver and
//! closed-form modules.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative clamp for eigenvalues of matrices that are PSD in exact arithmetic.
pub const PSD_REL_TOL: f64 = 1e-9;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn cis(phase: f64) -> C64 {
    C64::new(phase.cos(), phase.sin())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn hermitian_eigen(m: &CMat) -> HermitianEigen {
    assert!(m.is_square(), "hermitian_eigen needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        };
    }
    let sym = hermitian_part(m);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    HermitianEigen { values, vectors }
}

/// (M + M^H) / 2, removing round-off asymmetry.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Hermitian PSD square root. Eigenvalues in `[-eps, 0)` with
/// `eps = PSD_REL_TOL * max(lambda_max, 0)` are clamped to zero; anything more
/// negative is rejected.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let eig = hermitian_eigen(m);
    let lambda_max = eig.values[0].max(0.0);
    let tol = PSD_REL_TOL * lambda_max;
    if let Some(&worst) = eig.values.last() {
        if worst < -tol {
            return Err(Error::NotPsd {
                eigenvalue: worst,
                tolerance: tol,
            });
        }
    }
    let roots: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let scaled = CMat::from_fn(n, n, |r, c| eig.vectors[(r, c)] * roots[c]);
    Ok(hermitian_part(&(scaled * eig.vectors.adjoint())))
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// tr(A·B) without forming the product.
pub fn trace_of_product(a: &CMat, b: &CMat) -> C64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn relative_frobenius(a: &CMat, b: &CMat) -> f64 {
    let denom = frobenius(b);
    let diff = frobenius(&(a - b));
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}

/// log2 det of a Hermitian positive-definite matrix via Cholesky.
pub fn log2_det_hpd(m: &CMat) -> Option<f64> {
    if m.nrows() == 0 {
        return Some(0.0);
    }
    let chol = hermitian_part(m).cholesky()?;
    let l = chol.l_dirty();
    Some(2.0 * (0..m.nrows()).map(|i| l[(i, i)].re.log2()).sum::<f64>())
}

/// Determinant of a real square matrix as (sign, ln|det|), via LU with
/// partial pivoting. A singular matrix returns sign 0.
pub fn sign_log_det(mut a: DMatrix<f64>) -> (f64, f64) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut sign = 1.0;
    let mut log_abs = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
            .unwrap();
        let p = a[(pivot, col)];
        if p == 0.0 || !p.is_finite() {
            return (0.0, f64::NEG_INFINITY);
        }
        if pivot != col {
            a.swap_rows(pivot, col);
            sign = -sign;
        }
        if p < 0.0 {
            sign = -sign;
        }
        log_abs += p.abs().ln();
        for r in col + 1..n {
            let factor = a[(r, col)] / p;
            if factor != 0.0 {
                for c in col..n {
                    let v = a[(col, c)];
                    a[(r, c)] -= factor * v;
                }
            }
        }
    }
    (sign, log_abs)
}

/// Inner product a^H b.
pub fn dot_h(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Quadratic form w^H M w.
pub fn quad_form(w: &[C64], m: &CMat) -> C64 {
    assert_eq!(w.len(), m.nrows());
    let mut acc = ZERO;
    for c in 0..m.ncols() {
        let mut col = ZERO;
        for r in 0..m.nrows() {
            col += w[r].conj() * m[(r, c)];
        }
        acc += col * w[c];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rank: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = CMat::from_fn(n, rank, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        &x * x.adjoint()
    }

    #[test]
    fn sqrt_of_identity_and_diag() {
        let i = CMat::identity(5, 5);
        assert!(relative_frobenius(&psd_sqrt(&i).unwrap(), &i) < 1e-14);
        let d = CMat::from_diagonal(&CVec::from_vec(vec![C64::new(4.0, 0.0), ZERO]));
        let s = psd_sqrt(&d).unwrap();
        assert!((s[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!(s[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn sqrt_reconstructs_random_psd() {
        for seed in 0..5 {
            let m = random_psd(8, 8, seed);
            let s = psd_sqrt(&m).unwrap();
            assert!(relative_frobenius(&(&s * &s), &m) < 1e-10);
            assert!(relative_frobenius(&s, &s.adjoint()) < 1e-14);
        }
        // rank deficient
        let m = random_psd(8, 3, 9);
        let s = psd_sqrt(&m).unwrap();
        assert!(relative_frobenius(&(&s * &s), &m) < 1e-10);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![ONE, C64::new(-0.5, 0.0)]));
        match psd_sqrt(&d) {
            Err(Error::NotPsd { eigenvalue, .. }) => assert!((eigenvalue + 0.5).abs() < 1e-12),
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn eigenvalues_sorted_descending() {
        let m = random_psd(6, 6, 3);
        let e = hermitian_eigen(&m);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let v0 = e.vectors.column(0).into_owned();
        let mv = &m * &v0;
        assert!(relative_frobenius(&CMat::from_column_slice(6, 1, mv.as_slice()), &CMat::from_column_slice(6, 1, (v0 * C64::new(e.values[0], 0.0)).as_slice())) < 1e-10);
    }

    #[test]
    fn sign_log_det_matches_small_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 1.0]);
        let (s, l) = sign_log_det(a);
        assert_eq!(s, -1.0);
        assert!((l - 6f64.ln()).abs() < 1e-14);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(sign_log_det(sing).0, 0.0);
    }

    #[test]
    fn log_det_matches_eigen_sum() {
        let m = random_psd(5, 5, 11) + CMat::identity(5, 5);
        let by_eig: f64 = hermitian_eigen(&m).values.iter().map(|v| v.log2()).sum();
        assert!((log2_det_hpd(&m).unwrap() - by_eig).abs() < 1e-10);
    }
}
