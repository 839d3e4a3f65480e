//! Real polynomial helpers for the transfer-function code.
//!
//! Coefficients are stored in descending powers of z: `[c0, c1, ..., cn]`
//! means `c0*z^n + c1*z^(n-1) + ... + cn`.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Horner evaluation at a real point.
pub(crate) fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Polynomial product (convolution of coefficient lists).
pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub(crate) enum RootsError {
    #[error("root finding did not converge")]
    NonConvergence,
}

/// All complex roots, multiplicity respected.
///
/// Leading zeros are stripped first; a constant has no roots. Degrees one and
/// two are closed-form, higher degrees go through the companion matrix and a
/// Schur decomposition.
pub(crate) fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>, RootsError> {
    let first = coeffs.iter().position(|c| *c != 0.0);
    let p = match first {
        Some(i) => &coeffs[i..],
        None => return Ok(Vec::new()),
    };
    let degree = p.len() - 1;
    match degree {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Complex64::new(-p[1] / p[0], 0.0)]),
        2 => {
            let (a, b, c) = (p[0], p[1], p[2]);
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let s = disc.sqrt();
                Ok(vec![
                    Complex64::new((-b + s) / (2.0 * a), 0.0),
                    Complex64::new((-b - s) / (2.0 * a), 0.0),
                ])
            } else {
                let s = (-disc).sqrt() / (2.0 * a);
                let re = -b / (2.0 * a);
                Ok(vec![Complex64::new(re, s), Complex64::new(re, -s)])
            }
        }
        n => {
            // Companion matrix of the monic polynomial.
            let lead = p[0];
            let mut m = DMatrix::<f64>::zeros(n, n);
            for j in 0..n {
                m[(0, j)] = -p[j + 1] / lead;
            }
            for i in 1..n {
                m[(i, i - 1)] = 1.0;
            }
            let schur = nalgebra::Schur::try_new(m, f64::EPSILON.sqrt(), 10_000)
                .ok_or(RootsError::NonConvergence)?;
            let eig = schur.complex_eigenvalues();
            Ok(eig.iter().map(|e| Complex64::new(e.re, e.im)).collect())
        }
    }
}

/// Rebuild a real polynomial from a conjugate-closed root set and a leading
/// coefficient. Residual imaginary parts from rounding are discarded.
pub(crate) fn from_roots(roots: &[Complex64], leading: f64) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, &c) in acc.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        acc = next;
    }
    acc.iter().map(|c| c.re * leading).collect()
}
