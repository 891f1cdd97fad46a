//! Affine expressions over the program's real scalar variables, plus the
//! complex/Hermitian views the beamforming subproblems are written in.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::{C64, CVector};

pub type VarId = usize;

/// Sparse affine expression `sum coeff_i * x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(id: VarId) -> Self {
        Self { terms: vec![(id, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: vec![], constant: c }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn add_term(&mut self, id: VarId, coeff: f64) {
        self.terms.push((id, coeff));
    }

    /// Merges duplicate variables and drops negligible coefficients.
    pub fn simplified(mut self) -> Self {
        self.terms.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for (i, c) in self.terms {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        Self { terms: out, constant: self.constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        self + rhs.scaled(-1.0)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in &self.terms {
            write!(f, "{c:+}*x{i} ")?;
        }
        write!(f, "{:+}", self.constant)
    }
}

/// Complex affine expression as a (re, im) pair of real ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CLinExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl CLinExpr {
    pub fn constant(c: C64) -> Self {
        Self { re: LinExpr::constant(c.re), im: LinExpr::constant(c.im) }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: self.im.scaled(-1.0) }
    }

    /// Multiplication by a complex constant.
    pub fn scaled(&self, s: C64) -> Self {
        Self {
            re: self.re.scaled(s.re) - self.im.scaled(s.im),
            im: self.re.scaled(s.im) + self.im.scaled(s.re),
        }
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        C64::new(self.re.eval(x), self.im.eval(x))
    }

    /// Structural check that `self == conj(other)` after simplification.
    pub fn is_conjugate_of(&self, other: &CLinExpr) -> bool {
        let a_re = self.re.clone().simplified();
        let b_re = other.re.clone().simplified();
        let a_im = self.im.clone().simplified();
        let b_im = other.im.scaled(-1.0).simplified();
        a_re == b_re && a_im == b_im
    }
}

impl Add for CLinExpr {
    type Output = CLinExpr;
    fn add(self, rhs: CLinExpr) -> CLinExpr {
        CLinExpr { re: self.re + rhs.re, im: self.im + rhs.im }
    }
}

impl Sub for CLinExpr {
    type Output = CLinExpr;
    fn sub(self, rhs: CLinExpr) -> CLinExpr {
        CLinExpr { re: self.re - rhs.re, im: self.im - rhs.im }
    }
}

/// Complex vector variable: `len` complex entries stored as interleaved
/// (re, im) scalar variables starting at `base`.
#[derive(Debug, Clone, Copy)]
pub struct CVecVar {
    base: VarId,
    len: usize,
}

impl CVecVar {
    pub(crate) fn new(base: VarId, len: usize) -> Self {
        Self { base, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn re_id(&self, i: usize) -> VarId {
        self.base + 2 * i
    }

    pub fn im_id(&self, i: usize) -> VarId {
        self.base + 2 * i + 1
    }

    pub fn entry(&self, i: usize) -> CLinExpr {
        CLinExpr { re: LinExpr::var(self.re_id(i)), im: LinExpr::var(self.im_id(i)) }
    }

    /// `c^H v` for a constant vector `c`.
    pub fn inner_with(&self, c: &CVector) -> CLinExpr {
        assert_eq!(c.len(), self.len);
        let mut acc = CLinExpr::zero();
        for i in 0..self.len {
            acc = acc + self.entry(i).scaled(c[i].conj());
        }
        acc
    }

    /// All real scalar ids, interleaved; handy for norm constraints.
    pub fn scalar_exprs(&self) -> Vec<LinExpr> {
        (0..2 * self.len).map(|i| LinExpr::var(self.base + i)).collect()
    }

    pub fn read(&self, x: &[f64]) -> CVector {
        CVector::from_fn(self.len, |i, _| C64::new(x[self.re_id(i)], x[self.im_id(i)]))
    }
}

/// Hermitian matrix variable of dimension `dim`: `dim` real diagonal
/// variables followed by interleaved (re, im) pairs for the strictly lower
/// triangle in column-major order.
#[derive(Debug, Clone, Copy)]
pub struct HermVar {
    base: VarId,
    dim: usize,
}

impl HermVar {
    pub(crate) fn new(base: VarId, dim: usize) -> Self {
        Self { base, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diag_id(&self, i: usize) -> VarId {
        self.base + i
    }

    /// Index of the (re, im) pair for strictly-lower entry (i, j), i > j.
    fn off_pair(&self, i: usize, j: usize) -> VarId {
        debug_assert!(i > j);
        // Offset of column j within the packed strict lower triangle.
        let col_off: usize = (0..j).map(|c| self.dim - 1 - c).sum();
        self.base + self.dim + 2 * (col_off + (i - j - 1))
    }

    pub fn entry(&self, i: usize, j: usize) -> CLinExpr {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Equal => CLinExpr {
                re: LinExpr::var(self.diag_id(i)),
                im: LinExpr::zero(),
            },
            Ordering::Greater => {
                let p = self.off_pair(i, j);
                CLinExpr { re: LinExpr::var(p), im: LinExpr::var(p + 1) }
            }
            Ordering::Less => self.entry(j, i).conj(),
        }
    }

    pub fn entries(&self) -> Vec<Vec<CLinExpr>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entry(i, j)).collect())
            .collect()
    }

    pub fn trace(&self) -> LinExpr {
        let mut e = LinExpr::zero();
        for i in 0..self.dim {
            e.add_term(self.diag_id(i), 1.0);
        }
        e
    }

    /// `sum_i d_i W_ii` for a real diagonal weight vector.
    pub fn weighted_trace(&self, d: &[f64]) -> LinExpr {
        let mut e = LinExpr::zero();
        for i in 0..self.dim {
            e.add_term(self.diag_id(i), d[i]);
        }
        e
    }

    /// Real quadratic form `f^H W f` of a constant vector.
    pub fn quad_form(&self, f: &CVector) -> LinExpr {
        assert_eq!(f.len(), self.dim);
        let mut e = LinExpr::zero();
        for i in 0..self.dim {
            e.add_term(self.diag_id(i), f[i].norm_sqr());
        }
        for j in 0..self.dim {
            for i in j + 1..self.dim {
                // f_i^* W_ij f_j + conj -> 2 Re{ (f_i^* f_j) W_ij }.
                let c = f[i].conj() * f[j];
                let p = self.off_pair(i, j);
                e.add_term(p, 2.0 * c.re);
                e.add_term(p + 1, -2.0 * c.im);
            }
        }
        e
    }

    /// Complex affine vector `W f` for a constant `f`.
    pub fn mat_vec(&self, f: &CVector) -> Vec<CLinExpr> {
        assert_eq!(f.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let mut acc = CLinExpr::zero();
                for j in 0..self.dim {
                    acc = acc + self.entry(i, j).scaled(f[j]);
                }
                acc
            })
            .collect()
    }

    /// Column-major `vec(S W S)` for a real diagonal `S` (given by its
    /// entries), as complex affine expressions.
    pub fn vec_sym_scaled(&self, s: &[f64]) -> Vec<CLinExpr> {
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for j in 0..self.dim {
            for i in 0..self.dim {
                out.push(self.entry(i, j).scaled(C64::new(s[i] * s[j], 0.0)));
            }
        }
        out
    }

    pub fn read(&self, x: &[f64]) -> crate::CMatrix {
        crate::CMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j).eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ConeProgram;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn lin_expr_algebra() {
        let e = (LinExpr::var(0).scaled(2.0) + LinExpr::var(1) - LinExpr::constant(3.0))
            .simplified();
        assert_eq!(e.eval(&[1.0, 4.0]), 3.0);
        let dedup = (LinExpr::var(0) + LinExpr::var(0)).simplified();
        assert_eq!(dedup.terms, vec![(0, 2.0)]);
    }

    #[test]
    fn herm_var_quadratic_form_matches_dense() {
        let mut p = ConeProgram::new();
        let w = p.add_hermitian(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Random Hermitian assignment of the scalar variables.
        let x: Vec<f64> = (0..p.n_vars()).map(|_| rng.sample(StandardNormal)).collect();
        let dense = w.read(&x);
        assert!((dense.clone() - dense.adjoint()).norm() < 1e-14);
        let f = CVector::from_fn(3, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let want = (f.adjoint() * &dense * &f)[(0, 0)];
        assert!(want.im.abs() < 1e-12);
        let got = w.quad_form(&f).eval(&x);
        assert!((got - want.re).abs() < 1e-12 * want.re.abs().max(1.0));

        let mv = w.mat_vec(&f);
        let want_v = &dense * &f;
        for i in 0..3 {
            assert!((mv[i].eval(&x) - want_v[i]).norm() < 1e-12);
        }

        let d = [0.3, 0.7, 1.3];
        let dm = crate::CMatrix::from_diagonal(&CVector::from_iterator(
            3,
            d.iter().map(|&v| C64::new(v, 0.0)),
        ));
        let scaled = &dm * &dense * &dm;
        let packed = w.vec_sym_scaled(&d);
        let mut idx = 0;
        for j in 0..3 {
            for i in 0..3 {
                assert!((packed[idx].eval(&x) - scaled[(i, j)]).norm() < 1e-12);
                idx += 1;
            }
        }
        let tr = w.weighted_trace(&d).eval(&x);
        let want_tr: f64 = (0..3).map(|i| d[i] * dense[(i, i)].re).sum();
        assert!((tr - want_tr).abs() < 1e-12);
    }

    #[test]
    fn cvec_inner_matches_dense() {
        let mut p = ConeProgram::new();
        let v = p.add_cvec(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..p.n_vars()).map(|_| rng.sample(StandardNormal)).collect();
        let c = CVector::from_fn(2, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let got = v.inner_with(&c).eval(&x);
        let want = (c.adjoint() * v.read(&x))[(0, 0)];
        assert!((got - want).norm() < 1e-13);
    }
}
