//! Sparse symmetric LDLᵀ factorization without pivoting.
//!
//! The pattern is analysed once (fill-reducing ordering, elimination tree,
//! column counts) and refactored numerically at every interior-point
//! iteration. Without pivoting the factorization only exists for matrices
//! whose permuted leading minors are nonsingular; KKT systems are made
//! quasi-definite by a small negative shift on the constraint block, which
//! guarantees that.

use crate::ordering::minimum_degree;

const NONE: usize = usize::MAX;

/// Upper-triangular compressed-column pattern of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymPattern {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl SymPattern {
    /// Builds a pattern from `(row, col)` pairs in any triangle. Returns the
    /// pattern and, for every input pair, the slot its value lands in.
    /// Duplicates share a slot. Diagonal entries are always present.
    pub fn from_entries(n: usize, entries: &[(usize, usize)]) -> (SymPattern, Vec<usize>) {
        let mut cols: Vec<Vec<usize>> = (0..n).map(|j| vec![j]).collect();
        for &(r, c) in entries {
            let (i, j) = if r <= c { (r, c) } else { (c, r) };
            cols[j].push(i);
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in cols.iter_mut() {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let pat = SymPattern { n, col_ptr, row_idx };
        let slots = entries
            .iter()
            .map(|&(r, c)| {
                let (i, j) = if r <= c { (r, c) } else { (c, r) };
                pat.slot(i, j).expect("entry present")
            })
            .collect();
        (pat, slots)
    }

    /// Storage slot of upper entry `(i, j)`, `i <= j`.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let rows = &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]];
        rows.binary_search(&i).ok().map(|k| self.col_ptr[j] + k)
    }

    pub fn diag_slot(&self, i: usize) -> usize {
        self.slot(i, i).expect("diagonal present")
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// `y = A x` for symmetric `A` stored as this upper pattern.
    pub fn sym_matvec(&self, vals: &[f64], x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                y[i] += vals[p] * x[j];
                if i != j {
                    y[j] += vals[p] * x[i];
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Symbolic analysis plus numeric storage for repeated factorizations.
#[derive(Clone, Debug)]
pub struct Ldl {
    n: usize,
    perm: Vec<usize>,
    // permuted upper pattern plus, per permuted slot, the original slot
    cp: Vec<usize>,
    ci: Vec<usize>,
    src: Vec<usize>,
    parent: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    // scratch
    y: Vec<f64>,
    flag: Vec<usize>,
    pattern: Vec<usize>,
    lnz: Vec<usize>,
}

impl Ldl {
    pub fn analyse(pat: &SymPattern) -> Ldl {
        let n = pat.n;
        let perm = minimum_degree(pat);
        let mut pinv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        // permuted upper pattern C = P A Pᵀ
        let mut cols: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for j in 0..n {
            for p in pat.col_ptr[j]..pat.col_ptr[j + 1] {
                let i = pat.row_idx[p];
                let (a, b) = (pinv[i], pinv[j]);
                let (r, c) = if a <= b { (a, b) } else { (b, a) };
                cols[c].push((r, p));
            }
        }
        let mut cp = vec![0; n + 1];
        let mut ci = Vec::with_capacity(pat.nnz());
        let mut src = Vec::with_capacity(pat.nnz());
        for (c, col) in cols.iter_mut().enumerate() {
            col.sort_unstable();
            for &(r, p) in col.iter() {
                ci.push(r);
                src.push(p);
            }
            cp[c + 1] = ci.len();
        }

        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &i0 in &ci[cp[k]..cp[k + 1]] {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let nnz_l = lp[n];
        Ldl {
            n,
            perm,
            cp,
            ci,
            src,
            parent,
            lp,
            li: vec![0; nnz_l],
            lx: vec![0.0; nnz_l],
            d: vec![0.0; n],
            y: vec![0.0; n],
            flag,
            pattern: vec![0; n],
            lnz,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization of the matrix whose upper values (in the
    /// original pattern's slot order) are `vals`. Fails on a pivot with
    /// magnitude below `pivot_tol`.
    pub fn factor(&mut self, vals: &[f64], pivot_tol: f64) -> Result<Inertia, usize> {
        let n = self.n;
        let mut inertia = Inertia { positive: 0, negative: 0, zero: 0 };
        for k in 0..n {
            self.y[k] = 0.0;
            let mut top = n;
            self.flag[k] = k;
            self.lnz[k] = 0;
            for p in self.cp[k]..self.cp[k + 1] {
                let mut i = self.ci[p];
                self.y[i] += vals[self.src[p]];
                let mut len = 0;
                while self.flag[i] != k {
                    self.pattern[len] = i;
                    len += 1;
                    self.flag[i] = k;
                    i = self.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    self.pattern[top] = self.pattern[len];
                }
            }
            let mut dk = self.y[k];
            self.y[k] = 0.0;
            while top < n {
                let i = self.pattern[top];
                let yi = self.y[i];
                self.y[i] = 0.0;
                let p2 = self.lp[i] + self.lnz[i];
                for p in self.lp[i]..p2 {
                    self.y[self.li[p]] -= self.lx[p] * yi;
                }
                let l_ki = yi / self.d[i];
                dk -= l_ki * yi;
                self.li[p2] = k;
                self.lx[p2] = l_ki;
                self.lnz[i] += 1;
                top += 1;
            }
            if !(dk.abs() > pivot_tol) || !dk.is_finite() {
                return Err(k);
            }
            self.d[k] = dk;
            if dk > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
        }
        Ok(inertia)
    }

    /// Solves `A x = b` in place using the last factorization.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = x[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_from(pat: &SymPattern, vals: &[f64]) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; pat.n]; pat.n];
        for j in 0..pat.n {
            for p in pat.col_ptr[j]..pat.col_ptr[j + 1] {
                let i = pat.row_idx[p];
                a[i][j] = vals[p];
                a[j][i] = vals[p];
            }
        }
        a
    }

    #[test]
    fn solves_quasi_definite_kkt() {
        // [[4 1 1],[1 3 2],[1 2 -1e-3]]: two positive, one negative
        let entries = [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)];
        let (pat, slots) = SymPattern::from_entries(3, &entries);
        let mut vals = vec![0.0; pat.nnz()];
        for (s, v) in slots.iter().zip([4.0, 1.0, 3.0, 1.0, 2.0, -1e-3]) {
            vals[*s] = v;
        }
        let mut ldl = Ldl::analyse(&pat);
        let inertia = ldl.factor(&vals, 1e-14).unwrap();
        assert_eq!(inertia, Inertia { positive: 2, negative: 1, zero: 0 });
        let a = dense_from(&pat, &vals);
        let mut b = vec![1.0, -2.0, 0.5];
        let rhs = b.clone();
        ldl.solve(&mut b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i][j] * b[j]).sum();
            assert!((r - rhs[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let (pat, slots) = SymPattern::from_entries(2, &[(0, 0), (1, 1)]);
        let mut vals = vec![0.0; pat.nnz()];
        vals[slots[0]] = 1.0;
        let mut ldl = Ldl::analyse(&pat);
        assert!(ldl.factor(&vals, 1e-14).is_err());
    }
}
