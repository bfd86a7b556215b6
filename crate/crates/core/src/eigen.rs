//! Leading eigenpair of the sample covariance `S = RRᵀ/n`.
//!
//! `S` has rank at most `n`, so the spectrum is computed from the `n × n`
//! Gram matrix `RᵀR/n` and the eigenvector lifted back to `ℝᵖ` through
//! `h = Rφ/(s√n)`, where `φ` is the top Gram eigenvector (the right singular
//! vector of `R`).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ReturnsBlock;

/// Leading-eigenvector artifacts of one returns block.
#[derive(Debug, Clone)]
pub struct FactorEstimate {
    /// Unit leading eigenvector of `S`, signed so that `(h, q) ≥ 0`.
    pub h: DVector<f64>,
    /// Largest eigenvalue `s²` of `S`.
    pub s2: f64,
    /// Average `ℓ²` of the remaining eigenvalues over the rank-`n` part.
    pub l2: f64,
    /// Relative spectral gap `ψ = √((s² − ℓ²)/s²)`.
    pub psi: f64,
    /// Unit right singular vector `φ`, length `n`.
    pub phi: DVector<f64>,
    /// Set when `s² − ℓ²` is not positive; `psi` is then clamped to 0.
    pub no_gap: bool,
}

impl FactorEstimate {
    pub fn p(&self) -> usize {
        self.h.len()
    }
}

/// Compute the leading factor of `R` via the Gram matrix.
///
/// `ℓ² = (tr S − s²)/(n − 1)`.
pub fn leading_factor(returns: &ReturnsBlock) -> Result<FactorEstimate> {
    let r = returns.matrix();
    let (p, n) = (returns.p(), returns.n());
    let gram = (r.transpose() * r) / n as f64;
    let (values, vectors) = symmetric_eigen(&gram);
    let top = values.imax();
    let s2 = values[top];
    if !(s2 > 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    let mut phi: DVector<f64> = vectors.column(top).into_owned();
    let mut h = (r * &phi) / (s2 * n as f64).sqrt();
    h.normalize_mut();

    let hq = h.sum() / (p as f64).sqrt();
    let flip = if hq.abs() <= 1e-14 { h.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0) } else { hq < 0.0 };
    if flip {
        h.neg_mut();
        phi.neg_mut();
    }

    let trace = gram.trace();
    let l2 = ((trace - s2) / (n - 1) as f64).max(0.0);
    let gap = s2 - l2;
    let no_gap = gap <= 1e-14 * s2;
    let psi = if no_gap { 0.0 } else { (gap / s2).sqrt() };
    Ok(FactorEstimate { h, s2, l2, psi, phi, no_gap })
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (unordered) and the matching eigenvectors as columns.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return (DVector::zeros(n), v);
    }

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= f64::EPSILON * scale * 1e-3 {
            break;
        }
        for pi in 0..n {
            for qi in (pi + 1)..n {
                let apq = m[(pi, qi)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(pi, pi)];
                let aqq = m[(qi, qi)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, pi)];
                    let mkq = m[(k, qi)];
                    m[(k, pi)] = c * mkp - s * mkq;
                    m[(k, qi)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(pi, k)];
                    let mqk = m[(qi, k)];
                    m[(pi, k)] = c * mpk - s * mqk;
                    m[(qi, k)] = s * mpk + c * mqk;
                }
                m[(pi, qi)] = 0.0;
                m[(qi, pi)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, pi)];
                    let vkq = v[(k, qi)];
                    v[(k, pi)] = c * vkp - s * vkq;
                    v[(k, qi)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (m.diagonal(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compose_returns, generate_betas, generate_block, unit_q, BetaVector, GenerationParams};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(p: usize, n: usize, seed: u64) -> ReturnsBlock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ReturnsBlock::new(DMatrix::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn jacobi_diagonalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
        let a = &b + b.transpose();
        let (vals, vecs) = symmetric_eigen(&a);
        let recon = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((recon - &a).norm() < 1e-12);
        assert!((vecs.transpose() * &vecs - DMatrix::identity(8, 8)).norm() < 1e-12);
    }

    #[test]
    fn rank_one_block_recovers_beta() {
        let beta = BetaVector::new(vec![0.3, 1.2, 0.8, 1.9, 1.1, 0.7]).unwrap();
        let x = DVector::from_vec(vec![0.2, -0.1, 0.4, -0.3, 0.05]);
        let fe = leading_factor(&compose_returns(&beta, &x, None).unwrap()).unwrap();
        assert!((&fe.h - beta.unit()).norm() < 1e-12);
        assert!(fe.l2 < 1e-14);
        assert_abs_diff_eq!(fe.psi, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sign_convention_positive_against_q() {
        for seed in 0..20 {
            let fe = leading_factor(&random_block(40, 6, seed)).unwrap();
            assert!(fe.h.dot(&unit_q(40)) >= 0.0);
            assert_abs_diff_eq!(fe.h.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sign_tie_uses_first_nonzero_coordinate() {
        // β orthogonal to q
        let beta = BetaVector::new(vec![-1.0, 1.0, 2.0, -2.0]).unwrap();
        let x = DVector::from_vec(vec![0.5, -1.0, 0.25]);
        let fe = leading_factor(&compose_returns(&beta, &x, None).unwrap()).unwrap();
        assert!(fe.h[0] > 0.0);
    }

    #[test]
    fn zero_block_is_degenerate() {
        let r = ReturnsBlock::new(DMatrix::zeros(5, 3)).unwrap();
        assert!(matches!(leading_factor(&r), Err(Error::DegenerateSpectrum)));
    }

    #[test]
    fn invariants_on_random_blocks() {
        for seed in 0..10 {
            let block = random_block(200, 12, seed);
            let fe = leading_factor(&block).unwrap();
            assert!(fe.s2 >= fe.l2 && fe.l2 >= 0.0);
            assert_abs_diff_eq!(fe.psi, ((fe.s2 - fe.l2) / fe.s2).sqrt(), epsilon = 1e-14);
            let r = block.matrix();
            let sh = r * (r.transpose() * &fe.h) / block.n() as f64;
            assert!((sh - &fe.h * fe.s2).norm() < 1e-8 * fe.s2);
            // lifting identity h = Rφ/(s√n)
            let lifted = r * &fe.phi / (fe.s2 * block.n() as f64).sqrt();
            assert!((lifted - &fe.h).norm() < 1e-10);
        }
    }

    #[test]
    fn matches_dense_eigensolve() {
        let block = random_block(200, 12, 99);
        let fe = leading_factor(&block).unwrap();
        let r = block.matrix();
        let s = r * r.transpose() / 12.0;
        let eig = nalgebra::SymmetricEigen::new(s);
        let top = eig.eigenvalues.imax();
        let mut v: DVector<f64> = eig.eigenvectors.column(top).into_owned();
        if v.sum() < 0.0 {
            v.neg_mut();
        }
        assert!((eig.eigenvalues[top] - fe.s2).abs() < 1e-8 * fe.s2);
        assert!((v - &fe.h).amax() < 1e-8);
    }

    #[test]
    fn residual_average_scales_like_noise() {
        let params =
            GenerationParams { p: 500, n: 24, sigma2: 0.16, delta2: 0.25, beta_mean: 1.0, beta_sd: 0.5, seed: 0 };
        let mut ratios = Vec::new();
        for t in 0..30 {
            let beta = generate_betas(500, 1.0, 0.5, 1000 + t).unwrap();
            let (block, _) = generate_block(&GenerationParams { seed: t, ..params }, &beta).unwrap();
            let fe = leading_factor(&block).unwrap();
            ratios.push(fe.l2 / 500.0 / (0.25 / 24.0));
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 1.0).abs() < 0.1, "mean ratio {mean}");
    }
}
