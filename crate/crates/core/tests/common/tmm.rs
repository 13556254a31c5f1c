//! 1D multilayer transfer-matrix root finder for guided slab modes.
//!
//! Layers are listed bottom to top between a semi-infinite substrate and a
//! semi-infinite cover. TM modes (field `Ey` normal to the layers) carry
//! `Hx` with `Hx` and `Hx' / ε` continuous; TE modes carry `Ex` with `Ex`
//! and `Ex'` continuous.

#![allow(dead_code)]

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pol {
    Te,
    Tm,
}

#[derive(Debug, Clone)]
pub struct Stack {
    pub substrate: f64,
    pub cover: f64,
    /// `(index, thickness_nm)` from bottom to top.
    pub layers: Vec<(f64, f64)>,
}

impl Stack {
    fn weight(&self, n: f64, pol: Pol) -> f64 {
        match pol {
            Pol::Te => 1.0,
            Pol::Tm => n * n,
        }
    }

    /// Characteristic function; zero at a guided `n_eff`.
    pub fn dispersion(&self, n_eff: f64, lambda_nm: f64, pol: Pol) -> f64 {
        let k0 = 2.0 * std::f64::consts::PI / lambda_nm;
        let beta2 = (n_eff * k0).powi(2);
        let decay = |n: f64| (beta2 - (n * k0).powi(2)).sqrt();
        let gs = decay(self.substrate);
        let mut u = 1.0;
        let mut v = gs / self.weight(self.substrate, pol);
        for &(n, d) in &self.layers {
            let w = self.weight(n, pol);
            let q2 = beta2 - (n * k0).powi(2);
            let (u1, v1) = if q2 >= 0.0 {
                let g = q2.sqrt();
                if g * d < 1e-12 {
                    (u + v * w * d, v + u * q2 * d / w)
                } else {
                    let (c, s) = ((g * d).cosh(), (g * d).sinh());
                    (c * u + (w / g) * s * v, (g / w) * s * u + c * v)
                }
            } else {
                let k = (-q2).sqrt();
                let (c, s) = ((k * d).cos(), (k * d).sin());
                (c * u + (w / k) * s * v, -(k / w) * s * u + c * v)
            };
            // Rescale to keep magnitudes bounded.
            let m = u1.abs().max(v1.abs()).max(1e-300);
            u = u1 / m;
            v = v1 / m;
        }
        let gc = decay(self.cover);
        v + gc / self.weight(self.cover, pol) * u
    }

    /// All guided effective indices, descending.
    pub fn modes(&self, lambda_nm: f64, pol: Pol) -> Vec<f64> {
        let lo = self.substrate.max(self.cover);
        let hi = self.layers.iter().map(|l| l.0).fold(lo, f64::max);
        let samples = 20_000;
        let f = |n: f64| self.dispersion(n, lambda_nm, pol);
        let mut roots = Vec::new();
        let step = (hi - lo) / samples as f64;
        let mut a = lo + step * 1e-6;
        let mut fa = f(a);
        for k in 1..=samples {
            let b = if k == samples { hi - step * 1e-6 } else { lo + step * k as f64 };
            let fb = f(b);
            if fa == 0.0 {
                roots.push(a);
            } else if fa * fb < 0.0 {
                roots.push(bisect(&f, a, b, fa));
            }
            a = b;
            fa = fb;
        }
        roots.sort_by(|x, y| y.partial_cmp(x).unwrap());
        roots
    }

    /// Group index `n_eff − λ dn_eff/dλ` of the mode near `n_guess`, by
    /// central differences of the root with dispersive indices supplied by
    /// `stack_at(λ)`.
    pub fn group_index(
        stack_at: impl Fn(f64) -> Stack,
        lambda_nm: f64,
        pol: Pol,
        order: usize,
        dl: f64,
    ) -> f64 {
        let n = |l: f64| stack_at(l).modes(l, pol)[order];
        let n0 = n(lambda_nm);
        n0 - lambda_nm * (n(lambda_nm + dl) - n(lambda_nm - dl)) / (2.0 * dl)
    }
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) < 1e-15 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}
