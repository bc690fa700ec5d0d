//! Exact integer and rational matrices: Smith normal form with witnesses, rational
//! kernels and solves, characteristic polynomials and rational-root factoring.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<BigInt>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<alloc::string::String> = (0..self.cols).map(|j| alloc::format!("{}", self[(i, j)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = x.into();
            }
        }
        m
    }

    pub fn from_columns(cols: &[Vec<BigInt>], rows: usize) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..rows {
                m[(i, j)] = c[i].clone();
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<BigInt> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].clone();
            }
        }
        m
    }

    pub fn mul(&self, o: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let mut m = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = &o[(k, j)];
                    if !b.is_zero() {
                        m[(i, j)] += a * b;
                    }
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| (0..self.cols).fold(BigInt::zero(), |acc, j| acc + &self[(i, j)] * &x[j]))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn to_rat(&self) -> RatMatrix {
        RatMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| BigRational::from(x.clone())).collect() }
    }

    /// Vertical concatenation.
    pub fn stack(&self, o: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, o.cols);
        let mut data = self.data.clone();
        data.extend(o.data.iter().cloned());
        IntMatrix { rows: self.rows + o.rows, cols: self.cols, data }
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut prev = BigInt::one();
        let mut sign = BigInt::one();
        for k in 0..n - 1 {
            if a[(k, k)].is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !a[(i, k)].is_zero()) else {
                    return BigInt::zero();
                };
                a.swap_rows(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&a[(i, j)] * &a[(k, k)] - &a[(i, k)] * &a[(k, j)]) / &prev;
                    a[(i, j)] = v;
                }
            }
            prev = a[(k, k)].clone();
        }
        sign * a[(n - 1, n - 1)].clone()
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i != j {
            for c in 0..self.cols {
                self.data.swap(i * self.cols + c, j * self.cols + c);
            }
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i != j {
            for r in 0..self.rows {
                self.data.swap(r * self.cols + i, r * self.cols + j);
            }
        }
    }

    // row_i += q row_j
    fn add_row(&mut self, i: usize, j: usize, q: &BigInt) {
        for c in 0..self.cols {
            let v = &self.data[j * self.cols + c] * q;
            self.data[i * self.cols + c] += v;
        }
    }

    fn add_col(&mut self, i: usize, j: usize, q: &BigInt) {
        for r in 0..self.rows {
            let v = &self.data[r * self.cols + j] * q;
            self.data[r * self.cols + i] += v;
        }
    }

    fn negate_col(&mut self, j: usize) {
        for r in 0..self.rows {
            let v = -&self.data[r * self.cols + j];
            self.data[r * self.cols + j] = v;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for c in 0..self.cols {
            let v = -&self.data[i * self.cols + c];
            self.data[i * self.cols + c] = v;
        }
    }
}

/// U A V = D with U, V unimodular and D diagonal, d_1 | d_2 | ... | d_rank, all positive.
#[derive(Clone, Debug)]
pub struct Smith {
    pub u: IntMatrix,
    pub v: IntMatrix,
    pub diag: Vec<BigInt>,
    pub rank: usize,
    pub u_inv: IntMatrix,
    pub v_inv: IntMatrix,
}

impl Smith {
    pub fn d(&self) -> IntMatrix {
        let mut m = IntMatrix::zeros(self.u.rows, self.v.rows);
        for (i, x) in self.diag.iter().enumerate() {
            m[(i, i)] = x.clone();
        }
        m
    }

    /// Invariant factors different from 1.
    pub fn torsion(&self) -> Vec<BigInt> {
        self.diag.iter().filter(|d| !d.is_one()).cloned().collect()
    }

    /// Columns of V spanning the integer kernel of A.
    pub fn kernel(&self) -> Vec<Vec<BigInt>> {
        (self.rank..self.v.cols).map(|j| self.v.column(j)).collect()
    }
}

pub fn smith(a: &IntMatrix) -> Smith {
    let (r, c) = (a.rows, a.cols);
    let mut m = a.clone();
    let mut u = IntMatrix::identity(r);
    let mut v = IntMatrix::identity(c);
    // inverses tracked alongside: a row op on U is the inverse column op on U⁻¹
    let mut ui = IntMatrix::identity(r);
    let mut vi = IntMatrix::identity(c);
    let mut t = 0;
    while t < r.min(c) {
        // smallest nonzero entry of the trailing block becomes the pivot
        let mut best: Option<(usize, usize)> = None;
        for i in t..r {
            for j in t..c {
                if !m[(i, j)].is_zero() && best.is_none_or(|(bi, bj)| m[(i, j)].abs() < m[(bi, bj)].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        m.swap_rows(t, pi);
        u.swap_rows(t, pi);
        ui.swap_cols(t, pi);
        m.swap_cols(t, pj);
        v.swap_cols(t, pj);
        vi.swap_rows(t, pj);
        loop {
            let mut clean = true;
            for i in t + 1..r {
                if !m[(i, t)].is_zero() {
                    let q = -(&m[(i, t)] / &m[(t, t)]);
                    m.add_row(i, t, &q);
                    u.add_row(i, t, &q);
                    ui.add_col(t, i, &-q);
                    clean &= m[(i, t)].is_zero();
                }
            }
            for j in t + 1..c {
                if !m[(t, j)].is_zero() {
                    let q = -(&m[(t, j)] / &m[(t, t)]);
                    m.add_col(j, t, &q);
                    v.add_col(j, t, &q);
                    vi.add_row(t, j, &-q);
                    clean &= m[(t, j)].is_zero();
                }
            }
            if !clean {
                // a remainder is smaller than the pivot; move it into place
                let mut best = (t, t);
                for i in t + 1..r {
                    if !m[(i, t)].is_zero() && m[(i, t)].abs() < m[best].abs() {
                        best = (i, t);
                    }
                }
                for j in t + 1..c {
                    if !m[(t, j)].is_zero() && m[(t, j)].abs() < m[best].abs() {
                        best = (t, j);
                    }
                }
                if best.0 != t {
                    m.swap_rows(t, best.0);
                    u.swap_rows(t, best.0);
                    ui.swap_cols(t, best.0);
                } else if best.1 != t {
                    m.swap_cols(t, best.1);
                    v.swap_cols(t, best.1);
                    vi.swap_rows(t, best.1);
                }
                continue;
            }
            // divisibility of the trailing block
            let bad = (t + 1..r).find(|&i| (t + 1..c).any(|j| !m[(i, j)].is_multiple_of(&m[(t, t)])));
            match bad {
                Some(i) => {
                    let one = BigInt::one();
                    m.add_row(t, i, &one);
                    u.add_row(t, i, &one);
                    ui.add_col(i, t, &-one);
                }
                None => break,
            }
        }
        if m[(t, t)].is_negative() {
            m.negate_row(t);
            u.negate_row(t);
            ui.negate_col(t);
        }
        t += 1;
    }
    let diag = (0..t).map(|i| m[(i, i)].clone()).collect();
    Smith { u, v, diag, rank: t, u_inv: ui, v_inv: vi }
}

#[derive(Clone, PartialEq, Eq)]
pub struct RatMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<BigRational>,
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RatMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<alloc::string::String> = (0..self.cols).map(|j| alloc::format!("{}", self[(i, j)])).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for RatMatrix {
    type Output = BigRational;
    fn index(&self, (i, j): (usize, usize)) -> &BigRational {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigRational {
        &mut self.data[i * self.cols + j]
    }
}

impl RatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RatMatrix { rows, cols, data: vec![BigRational::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigRational::one();
        }
        m
    }

    pub fn from_columns(cols: &[Vec<BigRational>], rows: usize) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..rows {
                m[(i, j)] = c[i].clone();
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> Vec<BigRational> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn mul(&self, o: &RatMatrix) -> RatMatrix {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let mut m = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let b = &o[(k, j)];
                    if !b.is_zero() {
                        m[(i, j)] += a * b;
                    }
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[BigRational]) -> Vec<BigRational> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| (0..self.cols).fold(BigRational::zero(), |acc, j| acc + &self[(i, j)] * &x[j]))
            .collect()
    }

    pub fn add(&self, o: &RatMatrix) -> RatMatrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        RatMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: &BigRational) -> RatMatrix {
        RatMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn trace(&self) -> BigRational {
        (0..self.rows.min(self.cols)).fold(BigRational::zero(), |acc, i| acc + &self[(i, i)])
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (RatMatrix, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&i| !m[(i, col)].is_zero()) else { continue };
            if p != row {
                for c in 0..m.cols {
                    m.data.swap(p * m.cols + c, row * m.cols + c);
                }
            }
            let inv = m[(row, col)].recip();
            for c in col..m.cols {
                let v = &m[(row, c)] * &inv;
                m[(row, c)] = v;
            }
            for i in 0..m.rows {
                if i != row && !m[(i, col)].is_zero() {
                    let f = m[(i, col)].clone();
                    for c in col..m.cols {
                        let v = &m[(row, c)] * &f;
                        m[(i, c)] -= v;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right kernel, one vector per free column.
    pub fn kernel(&self) -> Vec<Vec<BigRational>> {
        let (r, piv) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !piv.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut x = vec![BigRational::zero(); self.cols];
                x[f] = BigRational::one();
                for (i, &p) in piv.iter().enumerate() {
                    x[p] = -r[(i, f)].clone();
                }
                x
            })
            .collect()
    }

    /// Some solution of A x = b, if one exists.
    pub fn solve(&self, b: &[BigRational]) -> Option<Vec<BigRational>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = RatMatrix::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, self.cols)] = b[i].clone();
        }
        let (r, piv) = aug.rref();
        if piv.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![BigRational::zero(); self.cols];
        for (i, &p) in piv.iter().enumerate() {
            x[p] = r[(i, self.cols)].clone();
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<RatMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = RatMatrix::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = BigRational::one();
        }
        let (r, piv) = aug.rref();
        if piv.len() < n || (n > 0 && piv[n - 1] != n - 1) {
            return None;
        }
        let mut inv = RatMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = r[(i, n + j)].clone();
            }
        }
        Some(inv)
    }

    /// p(A) for coefficients listed from the constant term up.
    pub fn poly_eval(&self, p: &[BigRational]) -> RatMatrix {
        let n = self.rows;
        let mut acc = RatMatrix::zeros(n, n);
        for c in p.iter().rev() {
            acc = acc.mul(self).add(&RatMatrix::identity(n).scale(c));
        }
        acc
    }
}

/// Characteristic polynomial det(x I - A), constant term first, by Faddeev-LeVerrier.
pub fn charpoly(a: &RatMatrix) -> Vec<BigRational> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut c = vec![BigRational::zero(); n + 1];
    c[n] = BigRational::one();
    let mut m = RatMatrix::zeros(n, n);
    for k in 1..=n {
        m = a.mul(&m).add(&RatMatrix::identity(n).scale(&c[n - k + 1]));
        let am = a.mul(&m);
        c[n - k] = -am.trace() / BigRational::from(BigInt::from(k));
    }
    c
}

fn poly_eval(p: &[BigRational], x: &BigRational) -> BigRational {
    p.iter().rev().fold(BigRational::zero(), |acc, c| acc * x + c)
}

// synthetic division by (x - r); assumes r is a root
fn deflate(p: &[BigRational], r: &BigRational) -> Vec<BigRational> {
    let n = p.len() - 1;
    let mut q = vec![BigRational::zero(); n];
    let mut carry = BigRational::zero();
    for i in (0..n).rev() {
        carry = &p[i + 1] + &carry * r;
        q[i] = carry.clone();
    }
    q
}

fn divisors_big(n: &BigInt) -> Vec<BigInt> {
    let n = n.abs();
    let mut out = Vec::new();
    let mut d = BigInt::one();
    while &d * &d <= n {
        if (&n % &d).is_zero() {
            out.push(d.clone());
            let e = &n / &d;
            if e != d {
                out.push(e);
            }
        }
        d += 1;
    }
    out
}

/// Rational roots with multiplicity and the remaining factor (constant term first).
/// The input must have rational coefficients; it is scaled to integers internally.
pub fn rational_roots(p: &[BigRational]) -> (Vec<(BigRational, usize)>, Vec<BigRational>) {
    let mut cur: Vec<BigRational> = p.to_vec();
    while cur.len() > 1 && cur.last().is_some_and(|c| c.is_zero()) {
        cur.pop();
    }
    let mut roots: Vec<(BigRational, usize)> = Vec::new();
    let push = |r: BigRational, roots: &mut Vec<(BigRational, usize)>| match roots.iter_mut().find(|(x, _)| *x == r) {
        Some(e) => e.1 += 1,
        None => roots.push((r, 1)),
    };
    while cur.len() > 1 && cur[0].is_zero() {
        cur.remove(0);
        push(BigRational::zero(), &mut roots);
    }
    loop {
        if cur.len() <= 1 {
            break;
        }
        let lcm = cur.iter().fold(BigInt::one(), |l, c| l.lcm(c.denom()));
        let ints: Vec<BigInt> = cur.iter().map(|c| (c * BigRational::from(lcm.clone())).to_integer()).collect();
        let a0 = ints[0].clone();
        let an = ints.last().unwrap().clone();
        let mut found = None;
        'search: for p in divisors_big(&a0) {
            for q in divisors_big(&an) {
                for sgn in [1, -1] {
                    let r = BigRational::new(&p * sgn, q.clone());
                    if poly_eval(&cur, &r).is_zero() {
                        found = Some(r);
                        break 'search;
                    }
                }
            }
        }
        match found {
            Some(r) => {
                cur = deflate(&cur, &r);
                push(r, &mut roots);
            }
            None => break,
        }
    }
    roots.sort_by(|a, b| a.0.cmp(&b.0));
    (roots, cur)
}

/// (x - r)^e as coefficients, constant term first.
pub fn linear_power(r: &BigRational, e: usize) -> Vec<BigRational> {
    let mut p = vec![BigRational::one()];
    for _ in 0..e {
        let mut q = vec![BigRational::zero(); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            q[i + 1] += c;
            q[i] -= c * r;
        }
        p = q;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> BigRational {
        BigRational::from(BigInt::from(n))
    }

    #[test]
    fn smith_small() {
        let a = IntMatrix::from_rows(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]]);
        let s = smith(&a);
        assert_eq!(s.diag, vec![BigInt::from(2), BigInt::from(6), BigInt::from(12)]);
        assert_eq!(s.u.mul(&a).mul(&s.v), s.d());
        assert!(s.u.det().abs().is_one() && s.v.det().abs().is_one());
        assert_eq!(s.u.mul(&s.u_inv), IntMatrix::identity(3));
        assert_eq!(s.v_inv.mul(&s.v), IntMatrix::identity(3));
    }

    #[test]
    fn smith_rank_deficient() {
        let a = IntMatrix::from_rows(&[vec![1, 1, 0], vec![0, 0, 2], vec![1, 1, 1]]);
        let s = smith(&a);
        assert_eq!(s.rank, 2);
        assert!(s.torsion().is_empty());
        for k in s.kernel() {
            assert!(a.mul_vec(&k).iter().all(|x| x.is_zero()));
        }
        let z = smith(&IntMatrix::zeros(2, 3));
        assert_eq!(z.rank, 0);
        assert_eq!(z.kernel().len(), 3);
    }

    #[test]
    fn charpoly_and_roots() {
        // diag(-2,-2,3) conjugated by an integer matrix
        let mut d = RatMatrix::zeros(3, 3);
        d[(0, 0)] = q(-2);
        d[(1, 1)] = q(-2);
        d[(2, 2)] = q(3);
        let p = IntMatrix::from_rows(&[vec![1, 2, 0], vec![0, 1, 1], vec![1, 0, 1]]).to_rat();
        let a = p.mul(&d).mul(&p.inverse().unwrap());
        let c = charpoly(&a);
        // (x+2)^2 (x-3)
        assert_eq!(c, vec![q(-12), q(-8), q(1), q(1)]);
        let (roots, rest) = rational_roots(&c);
        assert_eq!(roots, vec![(q(-2), 2), (q(3), 1)]);
        assert_eq!(rest, vec![q(1)]);
        assert!(a.poly_eval(&c).is_zero());
    }

    #[test]
    fn irreducible_remainder() {
        // x^2 - 2 has no rational root
        let (roots, rest) = rational_roots(&[q(-2), q(0), q(1)]);
        assert!(roots.is_empty());
        assert_eq!(rest.len(), 3);
    }

    #[test]
    fn kernel_and_solve() {
        let a = IntMatrix::from_rows(&[vec![1, 2, 3], vec![2, 4, 6]]).to_rat();
        let k = a.kernel();
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(a.mul_vec(v).iter().all(|x| x.is_zero()));
        }
        assert!(a.solve(&[q(1), q(3)]).is_none());
        let x = a.solve(&[q(1), q(2)]).unwrap();
        assert_eq!(a.mul_vec(&x), vec![q(1), q(2)]);
    }
}
