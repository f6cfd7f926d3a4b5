//! Deterministic "leading eigenvectors" step.
//!
//! Every algorithm in this crate reduces a factor update to: take the `k`
//! leading eigenvectors of a small symmetric (Gram-type) matrix. The
//! eigendecomposition itself is delegated to `nalgebra`'s dense symmetric
//! solver; this module owns everything that makes the result reproducible:
//!
//! * eigenvalues sorted algebraically descending, ties broken by the
//!   solver's original column index;
//! * each column sign-canonicalized: the entry of largest magnitude is made
//!   positive, magnitude ties resolved toward the lowest index;
//! * columns belonging to numerically zero eigenvalues (rank deficiency) are
//!   replaced by a deterministic orthonormal completion, built by
//!   Gram–Schmidt of the standard basis vectors against the kept columns,
//!   lowest index first.
//!
//! The Gram matrices these updates consume are symmetric positive
//! semidefinite, so taking eigenvectors of `M` and of `M·Mᵀ = M²` yields the
//! same factors. The solver works on `M` directly by default, which avoids
//! squaring the condition number; [`GramStyle::Squared`] restores the
//! squared form for strict comparison runs.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use nalgebra::DMatrix;

/// Whether factor updates eigendecompose the Gram matrix `M` directly or its
/// square `M·Mᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GramStyle {
    /// Decompose `M` itself (default; same eigenvectors, better conditioned).
    #[default]
    Direct,
    /// Decompose `M·Mᵀ`, mirroring the classical formulation verbatim.
    Squared,
}

/// Validated symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricMatrix {
    m: Matrix,
}

/// Relative asymmetry tolerated by [`SymmetricMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-10;

impl SymmetricMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Shape(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..m.rows() {
            for j in (i + 1)..m.cols() {
                worst = worst.max((m.get(i, j) - m.get(j, i)).abs());
            }
        }
        if worst / scale > SYMMETRY_TOL {
            return Err(Error::NotSymmetric {
                max_asym: worst / scale,
            });
        }
        if m.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigen("non-finite entry in symmetric matrix".into()));
        }
        Ok(Self { m })
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }
}

/// Result of [`leading_eigen`]: `k` orthonormal columns, their eigenvalues
/// (zero for completed columns) and how many columns came from the
/// deterministic completion rather than the spectrum.
#[derive(Debug, Clone)]
pub struct LeadingEigen {
    pub vectors: Matrix,
    pub values: Vec<f64>,
    pub completed: usize,
}

/// The `k` leading eigenvectors of `s`, as columns ordered by eigenvalue
/// descending. See the module docs for the determinism rules.
pub fn leading_eigenvectors(s: &SymmetricMatrix, k: usize) -> Result<Matrix> {
    Ok(leading_eigen(s, k)?.vectors)
}

/// As [`leading_eigenvectors`], also reporting eigenvalues and completion.
pub fn leading_eigen(s: &SymmetricMatrix, k: usize) -> Result<LeadingEigen> {
    let n = s.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {} eigenvectors of a {}x{} matrix",
            k, n, n
        )));
    }

    let a = DMatrix::from_fn(n, n, |i, j| s.m.get(i, j));
    let eig = a.symmetric_eigen();

    // Deterministic order: eigenvalue descending, solver column index as the
    // tie break.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let lambda_max = (0..n).fold(0.0f64, |m, i| m.max(eig.eigenvalues[i].abs()));
    let rank_tol = n as f64 * f64::EPSILON * lambda_max;

    let mut vectors = Matrix::zeros(n, k);
    let mut values = vec![0.0; k];
    let mut completed = 0usize;
    let mut needs_completion = Vec::new();
    for (c, &src) in order.iter().take(k).enumerate() {
        let lam = eig.eigenvalues[src];
        if lam.abs() <= rank_tol {
            needs_completion.push(c);
            continue;
        }
        values[c] = lam;
        let col = vectors.col_mut(c);
        for (i, v) in col.iter_mut().enumerate() {
            *v = eig.eigenvectors[(i, src)];
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigen("solver produced a non-finite vector".into()));
        }
        canonicalize_sign(col);
    }

    // Rank-deficient picks: Gram–Schmidt of e_0, e_1, … against everything
    // already kept, lowest index first.
    if !needs_completion.is_empty() {
        let kept: Vec<usize> = (0..k).filter(|c| !needs_completion.contains(c)).collect();
        let mut done: Vec<usize> = kept;
        let mut basis = 0usize;
        for &c in &needs_completion {
            loop {
                if basis >= n {
                    return Err(Error::Eigen(
                        "could not complete an orthonormal basis".into(),
                    ));
                }
                let mut v = vec![0.0; n];
                v[basis] = 1.0;
                basis += 1;
                for &d in &done {
                    let col = vectors.col(d);
                    let dot: f64 = col.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                    for (i, x) in v.iter_mut().enumerate() {
                        *x -= dot * col[i];
                    }
                }
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    for x in v.iter_mut() {
                        *x /= norm;
                    }
                    canonicalize_sign(&mut v);
                    vectors.col_mut(c).copy_from_slice(&v);
                    done.push(c);
                    completed += 1;
                    break;
                }
            }
        }
    }

    Ok(LeadingEigen {
        vectors,
        values,
        completed,
    })
}

/// Leading eigenvectors of `M` or of `M·Mᵀ` depending on `style`.
pub fn factor_from_gram(m: Matrix, k: usize, style: GramStyle) -> Result<LeadingEigen> {
    let target = match style {
        GramStyle::Direct => m,
        GramStyle::Squared => m.mul_tr(&m)?,
    };
    leading_eigen(&SymmetricMatrix::new(target)?, k)
}

/// Flips the column so its largest-magnitude entry is positive; magnitude
/// ties are broken toward the lowest index.
fn canonicalize_sign(col: &mut [f64]) {
    let mut best = 0usize;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        for v in col.iter_mut() {
            *v = -*v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sym(values: &[&[f64]]) -> SymmetricMatrix {
        SymmetricMatrix::new(Matrix::from_rows(values)).unwrap()
    }

    fn random_symmetric(n: usize, seed: u64) -> SymmetricMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-1.0..1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        SymmetricMatrix::new(m).unwrap()
    }

    /// Power iteration with deflation; independent of the nalgebra route.
    fn power_iteration_eigs(s: &SymmetricMatrix, k: usize) -> Vec<(f64, Vec<f64>)> {
        let n = s.n();
        // Shift to make the target eigenvalues the largest in magnitude.
        let shift = s.matrix().frob_norm() + 1.0;
        let mut work = s.matrix().clone();
        for i in 0..n {
            work.add_at(i, i, shift);
        }
        let mut found: Vec<(f64, Vec<f64>)> = Vec::new();
        for t in 0..k {
            let mut v: Vec<f64> = (0..n)
                .map(|i| if (i + t) % 3 == 0 { 1.0 } else { 0.5 })
                .collect();
            for _ in 0..20_000 {
                // Deflate previously found directions.
                for (_, u) in &found {
                    let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                    for i in 0..n {
                        v[i] -= dot * u[i];
                    }
                }
                let mut w = vec![0.0; n];
                for j in 0..n {
                    for i in 0..n {
                        w[i] += work.get(i, j) * v[j];
                    }
                }
                let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                for x in w.iter_mut() {
                    *x /= norm;
                }
                let delta: f64 = w
                    .iter()
                    .zip(v.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                v = w;
                if delta < 1e-14 {
                    break;
                }
            }
            let mut sv = vec![0.0; n];
            for j in 0..n {
                for i in 0..n {
                    sv[i] += s.matrix().get(i, j) * v[j];
                }
            }
            let lam: f64 = sv.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            found.push((lam, v));
        }
        found
    }

    #[test]
    fn diagonal_case() {
        let s = sym(&[&[4.0, 0.0], &[0.0, 1.0]]);
        let u = leading_eigenvectors(&s, 1).unwrap();
        assert!((u.get(0, 0) - 1.0).abs() < 1e-14);
        assert!(u.get(1, 0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_forced_by_symmetry() {
        let s = sym(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = leading_eigen(&s, 2).unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        assert!((e.vectors.get(0, 0) - r).abs() < 1e-12);
        assert!((e.vectors.get(1, 0) - r).abs() < 1e-12);
        // Tie on magnitudes: lowest index made positive.
        assert!((e.vectors.get(0, 1) - r).abs() < 1e-12);
        assert!((e.vectors.get(1, 1) + r).abs() < 1e-12);
    }

    #[test]
    fn residuals_and_values_match_power_iteration_oracle() {
        let s = random_symmetric(6, 99);
        let e = leading_eigen(&s, 3).unwrap();
        let oracle = power_iteration_eigs(&s, 3);
        let norm = s.matrix().frob_norm();
        for c in 0..3 {
            // Residual ‖s·u − λu‖ against our own eigenpair.
            let u = e.vectors.col(c);
            let mut su = [0.0; 6];
            for j in 0..6 {
                for i in 0..6 {
                    su[i] += s.matrix().get(i, j) * u[j];
                }
            }
            let resid: f64 = su
                .iter()
                .zip(u.iter())
                .map(|(a, b)| (a - e.values[c] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(resid <= 1e-8 * norm, "column {c} residual {resid:e}");
            assert!(
                (e.values[c] - oracle[c].0).abs() <= 1e-8 * norm,
                "eigenvalue {c}: {} vs oracle {}",
                e.values[c],
                oracle[c].0
            );
        }
    }

    #[test]
    fn columns_are_orthonormal() {
        let s = random_symmetric(8, 5);
        let u = leading_eigenvectors(&s, 5).unwrap();
        assert!(u.orthonormality_defect() <= 1e-10);
    }

    #[test]
    fn direct_and_squared_agree_for_psd() {
        // Random PSD with distinct leading eigenvalues.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b = Matrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        let psd = b.mul_tr(&b).unwrap();
        let s = SymmetricMatrix::new(psd.clone()).unwrap();
        let squared = SymmetricMatrix::new(psd.mul_tr(&psd).unwrap()).unwrap();
        let u1 = leading_eigenvectors(&s, 3).unwrap();
        let u2 = leading_eigenvectors(&squared, 3).unwrap();
        assert!(u1.max_abs_diff(&u2) < 1e-8);
    }

    #[test]
    fn determinism_bitwise() {
        let s = random_symmetric(7, 31);
        let a = leading_eigen(&s, 4).unwrap();
        let b = leading_eigen(&s, 4).unwrap();
        assert_eq!(a.vectors.values(), b.vectors.values());
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn rank_deficient_completion_uses_standard_basis() {
        let s = sym(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        let e = leading_eigen(&s, 2).unwrap();
        assert_eq!(e.completed, 1);
        // First column is e0; the completion rejects e0 and keeps e1.
        assert!((e.vectors.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((e.vectors.get(1, 1) - 1.0).abs() < 1e-14);
        assert!(e.vectors.orthonormality_defect() < 1e-12);
        assert_eq!(e.values[1], 0.0);
    }

    #[test]
    fn zero_matrix_completes_to_identity_columns() {
        let s = sym(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let e = leading_eigen(&s, 2).unwrap();
        assert_eq!(e.completed, 2);
        assert!(e.vectors.max_abs_diff(&Matrix::identity(2)) < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = random_symmetric(4, 1);
        assert!(leading_eigenvectors(&s, 5).is_err());
        assert!(leading_eigenvectors(&s, 0).is_err());

        let asym = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(SymmetricMatrix::new(asym).is_err());
    }

    #[test]
    fn squared_style_squares_the_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let b = Matrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let psd = b.mul_tr(&b).unwrap();
        let direct = factor_from_gram(psd.clone(), 2, GramStyle::Direct).unwrap();
        let squared = factor_from_gram(psd, 2, GramStyle::Squared).unwrap();
        assert!(direct.vectors.max_abs_diff(&squared.vectors) < 1e-8);
    }
}
