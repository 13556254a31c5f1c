//! Sparse LU factorization for operators living on a structured 2D grid.
//!
//! Unknowns are attached to grid "groups" (one group per node, several
//! unknowns per group). A geometric nested dissection of the group grid
//! gives the elimination tree; the numeric phase is a multifrontal LU with
//! partial pivoting restricted to each front's fully summed rows.
//!
//! Correctness requires every matrix entry to couple groups at most one
//! row and one column apart, so a single line of groups separates the two
//! halves of a box. With periodic `x` only horizontal separators are used.

use crate::error::{Error, Result};
use crate::linalg::sparse::CsrMatrix;
use crate::scalar::Real;

const LEAF_GROUPS: usize = 36;
const PANEL: usize = 48;

/// Unknown indices attached to each group of a `gx × gy` grid (row-major, x fastest).
#[derive(Debug, Clone)]
pub struct GroupLayout {
    pub gx: usize,
    pub gy: usize,
    offsets: Vec<usize>,
    vars: Vec<usize>,
    pub split_x: bool,
}

impl GroupLayout {
    pub fn new(gx: usize, gy: usize, split_x: bool) -> Self {
        GroupLayout {
            gx,
            gy,
            offsets: vec![0; gx * gy + 1],
            vars: Vec::new(),
            split_x,
        }
    }

    /// Builds the layout from a per-group list; `groups[j * gx + i]`.
    pub fn from_groups(gx: usize, gy: usize, split_x: bool, groups: &[Vec<usize>]) -> Self {
        assert_eq!(groups.len(), gx * gy);
        let mut layout = Self::new(gx, gy, split_x);
        for (g, list) in groups.iter().enumerate() {
            layout.vars.extend_from_slice(list);
            layout.offsets[g + 1] = layout.vars.len();
        }
        layout
    }

    fn group(&self, i: usize, j: usize) -> &[usize] {
        let g = j * self.gx + i;
        &self.vars[self.offsets[g]..self.offsets[g + 1]]
    }
}

#[derive(Debug, Clone)]
struct SymNode {
    vars: Vec<usize>,
    update: Vec<usize>,
    children: Vec<usize>,
}

/// Elimination tree with the row/column structure of every front.
#[derive(Debug, Clone)]
pub struct Symbolic {
    n: usize,
    nodes: Vec<SymNode>,
}

impl Symbolic {
    /// Orders the unknowns by nested dissection of `layout` and computes the
    /// update sets from the structure of `a` (assumed structurally symmetric).
    pub fn analyze<T: Real>(a: &CsrMatrix<T>, layout: &GroupLayout) -> Self {
        let n = a.nrows();
        let mut nodes = Vec::new();
        dissect(layout, 0, layout.gx, 0, layout.gy, &mut nodes);

        let mut rank = vec![usize::MAX; n];
        let mut next = 0;
        for node in &nodes {
            for &v in &node.vars {
                assert_eq!(rank[v], usize::MAX, "unknown {v} appears in two groups");
                rank[v] = next;
                next += 1;
            }
        }
        assert_eq!(next, n, "group layout does not cover every unknown");

        let mut mark = vec![usize::MAX; n];
        for k in 0..nodes.len() {
            let last = match nodes[k].vars.last() {
                Some(&v) => rank[v],
                None => continue,
            };
            let mut upd = Vec::new();
            for &c in &nodes[k].children {
                for &u in &nodes[c].update {
                    if rank[u] > last && mark[u] != k {
                        mark[u] = k;
                        upd.push(u);
                    }
                }
            }
            for &v in &nodes[k].vars {
                for &c in a.row(v).0 {
                    if rank[c] > last && mark[c] != k {
                        mark[c] = k;
                        upd.push(c);
                    }
                }
            }
            upd.sort_by_key(|&u| rank[u]);
            nodes[k].update = upd;
        }
        Symbolic { n, nodes }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn factor_size(&self) -> usize {
        self.nodes
            .iter()
            .map(|s| {
                let (ns, nu) = (s.vars.len(), s.update.len());
                ns * ns + 2 * ns * nu
            })
            .sum()
    }
}

/// Appends the tree for box `[i0, i1) × [j0, j1)` in postorder; returns the root index.
fn dissect(
    layout: &GroupLayout,
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
    nodes: &mut Vec<SymNode>,
) -> Option<usize> {
    let (w, h) = (i1.saturating_sub(i0), j1.saturating_sub(j0));
    if w == 0 || h == 0 {
        return None;
    }
    let can_x = layout.split_x && w >= 3;
    let can_y = h >= 3;
    let split = if w * h <= LEAF_GROUPS || (!can_x && !can_y) {
        None
    } else if can_x && (w >= h || !can_y) {
        Some(true)
    } else {
        Some(false)
    };
    let mut children = Vec::new();
    let mut vars = Vec::new();
    match split {
        None => {
            for j in j0..j1 {
                for i in i0..i1 {
                    vars.extend_from_slice(layout.group(i, j));
                }
            }
        }
        Some(true) => {
            let m = i0 + w / 2;
            children.extend(dissect(layout, i0, m, j0, j1, nodes));
            children.extend(dissect(layout, m + 1, i1, j0, j1, nodes));
            for j in j0..j1 {
                vars.extend_from_slice(layout.group(m, j));
            }
        }
        Some(false) => {
            let m = j0 + h / 2;
            children.extend(dissect(layout, i0, i1, j0, m, nodes));
            children.extend(dissect(layout, i0, i1, m + 1, j1, nodes));
            for i in i0..i1 {
                vars.extend_from_slice(layout.group(i, m));
            }
        }
    }
    nodes.push(SymNode {
        vars,
        update: Vec::new(),
        children,
    });
    Some(nodes.len() - 1)
}

#[derive(Debug, Clone)]
struct FrontFactor<T> {
    /// `perm[k]`: front row that became pivot row `k`.
    perm: Vec<usize>,
    /// Packed `L11 \ U11`, `ns × ns`.
    lu: Vec<T>,
    /// `ns × nu`.
    u12: Vec<T>,
    /// `nu × ns`.
    l21: Vec<T>,
}

/// LU factors of `A − σ I`.
#[derive(Debug, Clone)]
pub struct SparseLu<T> {
    symbolic: Symbolic,
    fronts: Vec<FrontFactor<T>>,
}

impl<T: Real> SparseLu<T> {
    /// Factorizes `a − shift · I`.
    pub fn factorize(a: &CsrMatrix<T>, shift: T, symbolic: Symbolic) -> Result<Self> {
        let n = symbolic.n;
        assert_eq!(a.nrows(), n);
        let at = a.transpose();
        let mut rank = vec![0usize; n];
        {
            let mut next = 0;
            for node in &symbolic.nodes {
                for &v in &node.vars {
                    rank[v] = next;
                    next += 1;
                }
            }
        }
        let mut loc = vec![usize::MAX; n];
        let mut schur: Vec<Option<Vec<T>>> = vec![None; symbolic.nodes.len()];
        let mut fronts = Vec::with_capacity(symbolic.nodes.len());

        for (k, node) in symbolic.nodes.iter().enumerate() {
            let ns = node.vars.len();
            let nu = node.update.len();
            let nf = ns + nu;
            for (l, &v) in node.vars.iter().chain(&node.update).enumerate() {
                loc[v] = l;
            }
            let mut f = vec![T::zero(); nf * nf];
            if ns > 0 {
                let first = rank[node.vars[0]];
                let last = rank[node.vars[ns - 1]];
                for (l, &v) in node.vars.iter().enumerate() {
                    let (cols, vals) = a.row(v);
                    for (&c, &val) in cols.iter().zip(vals) {
                        if rank[c] >= first {
                            f[l * nf + loc[c]] += val;
                        }
                    }
                    f[l * nf + l] -= shift;
                    let (rows, vals) = at.row(v);
                    for (&r, &val) in rows.iter().zip(vals) {
                        if rank[r] > last {
                            f[loc[r] * nf + l] += val;
                        }
                    }
                }
            }
            for &c in &node.children {
                let s = schur[c].take().expect("child processed before parent");
                let upd = &symbolic.nodes[c].update;
                let m = upd.len();
                for (a_idx, &ua) in upd.iter().enumerate() {
                    let row = loc[ua] * nf;
                    let src = &s[a_idx * m..(a_idx + 1) * m];
                    for (&ub, &val) in upd.iter().zip(src) {
                        f[row + loc[ub]] += val;
                    }
                }
            }

            let perm = partial_lu(&mut f, nf, ns).map_err(|pivot| Error::SingularPivot {
                front: k,
                pivot,
            })?;

            let mut lu = Vec::with_capacity(ns * ns);
            let mut u12 = Vec::with_capacity(ns * nu);
            for r in 0..ns {
                lu.extend_from_slice(&f[r * nf..r * nf + ns]);
                u12.extend_from_slice(&f[r * nf + ns..(r + 1) * nf]);
            }
            let mut l21 = Vec::with_capacity(nu * ns);
            let mut s = Vec::with_capacity(nu * nu);
            for r in ns..nf {
                l21.extend_from_slice(&f[r * nf..r * nf + ns]);
                s.extend_from_slice(&f[r * nf + ns..(r + 1) * nf]);
            }
            schur[k] = Some(s);
            fronts.push(FrontFactor { perm, lu, u12, l21 });
            for &v in node.vars.iter().chain(&node.update) {
                loc[v] = usize::MAX;
            }
        }
        Ok(SparseLu { symbolic, fronts })
    }

    pub fn n(&self) -> usize {
        self.symbolic.n
    }

    /// Overwrites `b` with `(A − σI)⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.symbolic.n);
        let mut y = Vec::new();
        for (node, fac) in self.symbolic.nodes.iter().zip(&self.fronts) {
            let ns = node.vars.len();
            y.clear();
            y.extend(fac.perm.iter().map(|&p| b[node.vars[p]]));
            for k in 0..ns {
                let row = &fac.lu[k * ns..k * ns + k];
                let s: T = row.iter().zip(&y[..k]).map(|(&l, &v)| l * v).sum();
                y[k] -= s;
            }
            for (r, &u) in node.update.iter().enumerate() {
                let row = &fac.l21[r * ns..(r + 1) * ns];
                let s: T = row.iter().zip(&y).map(|(&l, &v)| l * v).sum();
                b[u] -= s;
            }
            for (k, &v) in node.vars.iter().enumerate() {
                b[v] = y[k];
            }
        }
        let mut xu = Vec::new();
        for (node, fac) in self.symbolic.nodes.iter().zip(&self.fronts).rev() {
            let ns = node.vars.len();
            let nu = node.update.len();
            xu.clear();
            xu.extend(node.update.iter().map(|&u| b[u]));
            y.clear();
            y.extend(node.vars.iter().map(|&v| b[v]));
            for k in 0..ns {
                let row = &fac.u12[k * nu..(k + 1) * nu];
                let s: T = row.iter().zip(&xu).map(|(&u, &x)| u * x).sum();
                y[k] -= s;
            }
            for k in (0..ns).rev() {
                let row = &fac.lu[k * ns..(k + 1) * ns];
                let s: T = row[k + 1..].iter().zip(&y[k + 1..]).map(|(&u, &x)| u * x).sum();
                y[k] = (y[k] - s) / row[k];
            }
            for (k, &v) in node.vars.iter().enumerate() {
                b[v] = y[k];
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Number of stored factor entries.
    pub fn factor_size(&self) -> usize {
        self.symbolic.factor_size()
    }
}

/// Blocked right-looking LU of the leading `ns` columns of the `nf × nf`
/// row-major front, pivoting among the first `ns` rows only. On return the
/// trailing block holds the Schur complement. Errors with the pivot index
/// if a zero pivot is met.
fn partial_lu<T: Real>(f: &mut [T], nf: usize, ns: usize) -> std::result::Result<Vec<usize>, usize> {
    let mut perm: Vec<usize> = (0..ns).collect();
    let mut k0 = 0;
    while k0 < ns {
        let k1 = (k0 + PANEL).min(ns);
        for k in k0..k1 {
            let mut p = k;
            let mut best = f[k * nf + k].abs();
            for r in k + 1..ns {
                let v = f[r * nf + k].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(k);
            }
            if p != k {
                swap_rows(f, nf, k, p);
                perm.swap(k, p);
            }
            let (top, bottom) = f.split_at_mut((k + 1) * nf);
            let prow = &top[k * nf..(k + 1) * nf];
            let inv = T::one() / prow[k];
            let pseg = &prow[k + 1..k1];
            for row in bottom.chunks_exact_mut(nf) {
                let l = row[k] * inv;
                row[k] = l;
                if l != T::zero() {
                    axpy_neg(l, pseg, &mut row[k + 1..k1]);
                }
            }
        }
        if k1 < nf {
            // U block rows: unit-lower solve inside the panel.
            for k in k0..k1 {
                let (top, bottom) = f.split_at_mut((k + 1) * nf);
                let src = &top[k * nf + k1..(k + 1) * nf];
                for r in k + 1..k1 {
                    let row = &mut bottom[(r - k - 1) * nf..(r - k) * nf];
                    let l = row[k];
                    if l != T::zero() {
                        axpy_neg(l, src, &mut row[k1..]);
                    }
                }
            }
            // Trailing update.
            let (top, bottom) = f.split_at_mut(k1 * nf);
            let panel = &top[k0 * nf..k1 * nf];
            for row in bottom.chunks_exact_mut(nf) {
                let (lpart, rest) = row.split_at_mut(k1);
                for k in k0..k1 {
                    let l = lpart[k];
                    if l != T::zero() {
                        axpy_neg(l, &panel[(k - k0) * nf + k1..(k - k0 + 1) * nf], rest);
                    }
                }
            }
        }
        k0 = k1;
    }
    Ok(perm)
}

#[inline]
fn axpy_neg<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi -= a * xi;
    }
}

fn swap_rows<T>(f: &mut [T], nf: usize, a: usize, b: usize) {
    let (lo, hi) = (a.min(b), a.max(b));
    let (top, bottom) = f.split_at_mut(hi * nf);
    top[lo * nf..(lo + 1) * nf].swap_with_slice(&mut bottom[..nf]);
}
