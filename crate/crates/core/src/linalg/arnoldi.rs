//! Shift-invert Arnoldi iteration with explicit restarts and locking.
//!
//! Eigenvalues of `A` closest to a real shift `σ` are the dominant ones of
//! `(A − σI)⁻¹`. Converged pairs are locked into an orthonormal basis `Q`
//! and projected out of later Krylov spaces; eigenvectors of the deflated
//! operator are mapped back to eigenvectors of `A` through the small upper
//! triangular matrix `R = Qᵀ (A − σI)⁻¹ Q`.

use crate::error::{Error, Result};
use crate::linalg::dense::{hessenberg_eigenvalues, real_eigenvector, Dense};
use crate::linalg::multifrontal::SparseLu;
use crate::linalg::sparse::CsrMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ArnoldiSettings<T> {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Relative residual `‖Ax − λx‖ / (‖x‖ · scale)` required for convergence.
    pub tol: T,
}

impl<T: Real> Default for ArnoldiSettings<T> {
    fn default() -> Self {
        ArnoldiSettings {
            krylov_dim: 40,
            max_restarts: 40,
            tol: T::lit(1e-8),
        }
    }
}

/// Real eigenpair of `A` with unit-norm eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair<T> {
    pub value: T,
    pub vector: Vec<T>,
    /// `‖A x − λ x‖ / scale` for the unit vector `x`.
    pub residual: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthogonalizes `w` against `basis` twice (classical Gram–Schmidt with
/// reorthogonalization), accumulating the coefficients into `coef`.
fn orthogonalize<T: Real>(w: &mut [T], basis: &[Vec<T>], coef: &mut [T]) {
    for _ in 0..2 {
        for (c, q) in coef.iter_mut().zip(basis) {
            let h = dot(q, w);
            *c += h;
            axpy(-h, q, w);
        }
    }
}

fn residual<T: Real>(a: &CsrMatrix<T>, lambda: T, x: &[T], scale: T) -> T {
    let ax = a.mul_vec(x);
    let r: T = ax
        .iter()
        .zip(x)
        .map(|(&p, &q)| (p - lambda * q) * (p - lambda * q))
        .sum();
    r.sqrt() / (norm(x) * scale)
}

fn start_vector<T: Real>(n: usize, salt: u64) -> Vec<T> {
    // Deterministic pseudo-random entries (64-bit LCG).
    let mut state = 0x2545_f491_4f6c_dd1d_u64 ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    (0..n)
        .map(|_| {
            state = state
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            T::lit(((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5)
        })
        .collect()
}

/// Finds up to `nev` eigenpairs of `a` nearest `shift`, where `lu` factors
/// `a − shift·I`. Pairs are returned by increasing distance from the shift.
pub fn shift_invert_eigs<T: Real>(
    a: &CsrMatrix<T>,
    lu: &SparseLu<T>,
    shift: T,
    nev: usize,
    settings: &ArnoldiSettings<T>,
    residual_scale: T,
) -> Result<Vec<EigenPair<T>>> {
    shift_invert_eigs_above(a, lu, shift, nev, None, settings, residual_scale)
}

/// As [`shift_invert_eigs`] with `shift` above every wanted eigenvalue;
/// iteration stops early, possibly with fewer than `nev` pairs, once every
/// unconverged Ritz value lies below `floor`.
pub fn shift_invert_eigs_above<T: Real>(
    a: &CsrMatrix<T>,
    lu: &SparseLu<T>,
    shift: T,
    nev: usize,
    floor: Option<T>,
    settings: &ArnoldiSettings<T>,
    residual_scale: T,
) -> Result<Vec<EigenPair<T>>> {
    let n = a.nrows();
    if nev == 0 || n == 0 {
        return Ok(Vec::new());
    }
    let nev = nev.min(n);
    // Locked basis, `(A − σI)⁻¹` restricted to it (upper triangular), and
    // the eigenpairs behind each locked direction.
    let mut q_basis: Vec<Vec<T>> = Vec::new();
    let mut r_mat: Vec<Vec<T>> = Vec::new(); // r_mat[col][row]
    let mut found: Vec<(T, EigenPair<T>)> = Vec::new();

    let mut v0 = start_vector::<T>(n, 0);
    let mut worst = T::infinity();
    for restart in 0..=settings.max_restarts {
        let avail = n - q_basis.len();
        if avail == 0 {
            break;
        }
        let m = settings.krylov_dim.max(2 * nev + 10).min(avail);
        let mut coef = vec![T::zero(); q_basis.len()];
        orthogonalize(&mut v0, &q_basis, &mut coef);
        let nv = norm(&v0);
        if !(nv > T::zero()) {
            v0 = start_vector(n, restart as u64 + 1);
            continue;
        }
        v0.iter_mut().for_each(|v| *v /= nv);

        let mut vs: Vec<Vec<T>> = vec![v0.clone()];
        let mut h = vec![vec![T::zero(); m]; m + 1];
        // g[j] = Qᵀ op v_j, needed to map deflated Ritz vectors back.
        let mut g: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut dim = m;
        for j in 0..m {
            let mut w = lu.solve(&vs[j]);
            let mut gq = vec![T::zero(); q_basis.len()];
            orthogonalize(&mut w, &q_basis, &mut gq);
            g.push(gq);
            let mut hcol = vec![T::zero(); j + 1];
            orthogonalize(&mut w, &vs, &mut hcol);
            for (i, hv) in hcol.into_iter().enumerate() {
                h[i][j] = hv;
            }
            let beta = norm(&w);
            h[j + 1][j] = beta;
            let scale = h.iter().take(j + 2).map(|r| r[j].abs()).fold(T::zero(), T::max);
            if !(beta > T::lit(1e3) * T::epsilon() * scale) {
                dim = j + 1;
                break;
            }
            w.iter_mut().for_each(|v| *v /= beta);
            vs.push(w);
        }

        let mut hm = Dense::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                *hm.at_mut(i, j) = h[i][j];
            }
        }
        let ritz = hessenberg_eigenvalues(&hm).ok_or(Error::NoConvergence {
            iterations: restart,
            residual: f64::INFINITY,
        })?;
        let mut cands: Vec<T> = ritz
            .iter()
            .filter(|c| c.im.abs() <= T::lit(1e-10) * c.norm() && c.re != T::zero())
            .map(|c| c.re)
            .collect();
        cands.sort_by(|x, y| y.abs().partial_cmp(&x.abs()).unwrap_or(std::cmp::Ordering::Equal));
        let want = nev.saturating_sub(found.len());
        cands.truncate(want.max(1));

        let mut next_start = vec![T::zero(); n];
        let mut new_pairs = Vec::new();
        let (mut above, mut below) = (0usize, 0usize);
        worst = T::zero();
        for &mu in &cands {
            let y = real_eigenvector(&hm, mu);
            let mut z = vec![T::zero(); n];
            for (k, &yk) in y.iter().enumerate() {
                axpy(yk, &vs[k], &mut z);
            }
            // Map back: x = z + Q c with (R − μI) c = −G y.
            let k_locked = q_basis.len();
            let mut x = z.clone();
            if k_locked > 0 {
                let mut rhs: Vec<T> = (0..k_locked)
                    .map(|i| -(0..dim).map(|j| g[j][i] * y[j]).sum::<T>())
                    .collect();
                for i in (0..k_locked).rev() {
                    let s: T = (i + 1..k_locked).map(|c| r_mat[c][i] * rhs[c]).sum();
                    let d = r_mat[i][i] - mu;
                    rhs[i] = if d.abs() > T::lit(1e-12) * mu.abs() {
                        (rhs[i] - s) / d
                    } else {
                        T::zero()
                    };
                }
                for (i, ci) in rhs.iter().enumerate() {
                    axpy(*ci, &q_basis[i], &mut x);
                }
            }
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            let lambda = shift + T::one() / mu;
            let res = residual(a, lambda, &x, residual_scale);
            if res <= settings.tol && found.len() + new_pairs.len() < nev {
                new_pairs.push((mu, x, res, lambda));
            } else if floor.is_some_and(|f| lambda < f) {
                below += 1;
            } else {
                above += 1;
                worst = worst.max(res);
                axpy(T::one(), &z, &mut next_start);
            }
        }

        for (mu, x, res, lambda) in new_pairs {
            // Extend Q and R with the new eigenvector.
            let mut qn = x.clone();
            let mut acoef = vec![T::zero(); q_basis.len()];
            orthogonalize(&mut qn, &q_basis, &mut acoef);
            let s = norm(&qn);
            if s > T::lit(1e-8) {
                qn.iter_mut().for_each(|v| *v /= s);
                let k = q_basis.len();
                let mut col: Vec<T> = (0..k)
                    .map(|i| {
                        let ra: T = (i..k).map(|c| r_mat[c][i] * acoef[c]).sum();
                        (mu * acoef[i] - ra) / s
                    })
                    .collect();
                col.push(mu);
                r_mat.push(col);
                q_basis.push(qn);
            }
            found.push((
                mu,
                EigenPair {
                    value: lambda,
                    vector: x,
                    residual: res,
                },
            ));
        }

        if found.len() >= nev || (restart > 0 && above == 0 && below > 0) {
            found.sort_by(|a, b| b.0.abs().partial_cmp(&a.0.abs()).unwrap_or(std::cmp::Ordering::Equal));
            return Ok(found.into_iter().map(|(_, p)| p).take(nev).collect());
        }
        if norm(&next_start) > T::zero() {
            v0 = next_start;
        } else {
            v0 = start_vector(n, restart as u64 + 1);
        }
        if restart == settings.max_restarts {
            return Err(Error::NoConvergence {
                iterations: restart,
                residual: worst.to_f64_lossy(),
            });
        }
    }
    if found.is_empty() && nev > 0 {
        return Err(Error::NoConvergence {
            iterations: settings.max_restarts,
            residual: worst.to_f64_lossy(),
        });
    }
    found.sort_by(|a, b| b.0.abs().partial_cmp(&a.0.abs()).unwrap_or(std::cmp::Ordering::Equal));
    Ok(found.into_iter().map(|(_, p)| p).take(nev).collect())
}
