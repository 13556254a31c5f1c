//! Small dense kernels for the Krylov projection: eigenvalues of an upper
//! Hessenberg matrix (Francis double-shift QR) and eigenvectors by inverse
//! iteration.

use num_complex::Complex;

use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(n: usize) -> Self {
        Dense {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.n + c]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self.at(r, c) * x[c]).sum())
            .collect()
    }
}

/// Eigenvalues of an upper Hessenberg matrix. Returns `None` if the QR
/// iteration stalls.
pub fn hessenberg_eigenvalues<T: Real>(h: &Dense<T>) -> Option<Vec<Complex<T>>> {
    let n = h.n;
    let mut a = h.clone();
    let mut out = vec![Complex::new(T::zero(), T::zero()); n];
    if n == 0 {
        return Some(out);
    }
    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a.at(i, j).abs();
        }
    }
    let half = T::lit(0.5);
    let mut nn = n as isize - 1;
    let mut t = T::zero();
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l >= 1 {
                let mut s = a.at(l - 1, l - 1).abs() + a.at(l, l).abs();
                if s == T::zero() {
                    s = anorm;
                }
                if a.at(l, l - 1).abs() + s == s {
                    *a.at_mut(l, l - 1) = T::zero();
                    break;
                }
                l -= 1;
            }
            let mut x = a.at(nu, nu);
            if l == nu {
                out[nu] = Complex::new(x + t, T::zero());
                nn -= 1;
                break;
            }
            let mut y = a.at(nu - 1, nu - 1);
            let mut w = a.at(nu, nu - 1) * a.at(nu - 1, nu);
            if l == nu - 1 {
                let p = half * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= T::zero() {
                    z = p + if p >= T::zero() { z } else { -z };
                    let hi = x + z;
                    let lo = if z != T::zero() { x - w / z } else { hi };
                    out[nu - 1] = Complex::new(hi, T::zero());
                    out[nu] = Complex::new(lo, T::zero());
                } else {
                    out[nu - 1] = Complex::new(x + p, -z);
                    out[nu] = Complex::new(x + p, z);
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return None;
            }
            if its == 10 || its == 20 {
                t += x;
                for i in 0..=nu {
                    *a.at_mut(i, i) -= x;
                }
                let s = a.at(nu, nu - 1).abs() + a.at(nu - 1, nu - 2).abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            its += 1;
            let (mut p, mut q, mut r);
            let mut m = nu - 2;
            loop {
                let z = a.at(m, m);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a.at(m + 1, m) + a.at(m, m + 1);
                q = a.at(m + 1, m + 1) - z - rr - ss;
                r = a.at(m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a.at(m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (a.at(m - 1, m - 1).abs() + z.abs() + a.at(m + 1, m + 1).abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                *a.at_mut(i, i - 2) = T::zero();
                if i != m + 2 {
                    *a.at_mut(i, i - 3) = T::zero();
                }
            }
            let mut k = m;
            while k + 1 <= nu {
                if k != m {
                    p = a.at(k, k - 1);
                    q = a.at(k + 1, k - 1);
                    r = if k != nu - 1 { a.at(k + 2, k - 1) } else { T::zero() };
                    x = p.abs() + q.abs() + r.abs();
                    if x != T::zero() {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let norm = (p * p + q * q + r * r).sqrt();
                let s = if p >= T::zero() { norm } else { -norm };
                if s != T::zero() {
                    if k == m {
                        if l != m {
                            *a.at_mut(k, k - 1) = -a.at(k, k - 1);
                        }
                    } else {
                        *a.at_mut(k, k - 1) = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a.at(k, j) + q * a.at(k + 1, j);
                        if k != nu - 1 {
                            pp += r * a.at(k + 2, j);
                            *a.at_mut(k + 2, j) -= pp * z;
                        }
                        *a.at_mut(k + 1, j) -= pp * y;
                        *a.at_mut(k, j) -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a.at(i, k) + y * a.at(i, k + 1);
                        if k != nu - 1 {
                            pp += z * a.at(i, k + 2);
                            *a.at_mut(i, k + 2) -= pp * r;
                        }
                        *a.at_mut(i, k + 1) -= pp * q;
                        *a.at_mut(i, k) -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Some(out)
}

/// Solves `m x = b` in place with partial pivoting; tiny pivots are nudged
/// so near-singular shifted systems (inverse iteration) stay solvable.
pub fn solve_dense<T: Real>(m: &Dense<T>, b: &mut [T]) {
    let n = m.n;
    let mut a = m.data.clone();
    let scale = a.iter().fold(T::zero(), |s, v| s.max(v.abs())).max(T::min_positive_value());
    let tiny = scale * T::epsilon();
    for k in 0..n {
        let mut p = k;
        for r in k + 1..n {
            if a[r * n + k].abs() > a[p * n + k].abs() {
                p = r;
            }
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        if a[k * n + k].abs() < tiny {
            a[k * n + k] = if a[k * n + k] >= T::zero() { tiny } else { -tiny };
        }
        let piv = a[k * n + k];
        for r in k + 1..n {
            let l = a[r * n + k] / piv;
            if l != T::zero() {
                for c in k..n {
                    a[r * n + c] = a[r * n + c] - l * a[k * n + c];
                }
                b[r] = b[r] - l * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let s: T = (k + 1..n).map(|c| a[k * n + c] * b[c]).sum();
        b[k] = (b[k] - s) / a[k * n + k];
    }
}

/// Unit eigenvector of `h` for the real eigenvalue `theta` by inverse iteration.
pub fn real_eigenvector<T: Real>(h: &Dense<T>, theta: T) -> Vec<T> {
    let n = h.n;
    let mut shifted = h.clone();
    for i in 0..n {
        *shifted.at_mut(i, i) -= theta;
    }
    let mut x: Vec<T> = (0..n)
        .map(|k| T::one() + T::lit(0.01) * T::from_usize_lossy(k % 7))
        .collect();
    for _ in 0..3 {
        solve_dense(&shifted, &mut x);
        let norm = x.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            break;
        }
        x.iter_mut().for_each(|v| *v /= norm);
    }
    x
}
