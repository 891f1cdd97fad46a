//! A small conic-programming layer: linear objective over real scalar
//! variables, constraints as affine maps into cone blocks, and a single
//! `solve` entry point backed by an interior-point solver.
//!
//! Block semantics: a block with rows `r_1..r_d` (each an affine expression
//! of the variables) and cone tag `K` constrains `(r_1(x), .., r_d(x)) ∈ K`.
//!
//! Cone conventions:
//! * `SecondOrder`: `r_1 >= ||(r_2, .., r_d)||_2`.
//! * `RotatedSecondOrder`: `2 r_1 r_2 >= ||(r_3, .., r_d)||_2^2`, `r_1, r_2 >= 0`.
//! * `Exponential`: `(x, y, z)` with `y > 0`, `y e^{x/y} <= z` (so
//!   `(r, 1, s)` encodes `r <= ln s`).
//! * `Psd(d)`: rows are the lower triangle of a symmetric `d x d` matrix,
//!   column-major, off-diagonal entries scaled by `sqrt(2)`.

mod expr;
mod solver;

pub use expr::{CLinExpr, CVecVar, HermVar, LinExpr, VarId};

use crate::error::SecError;
use crate::{C64, CMatrix};

/// Cone tags for constraint blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero,
    Nonnegative,
    SecondOrder,
    RotatedSecondOrder,
    Exponential,
    /// Positive semidefinite cone of `d x d` symmetric matrices in packed
    /// lower-triangular form (`d (d+1) / 2` rows).
    Psd(usize),
}

impl Cone {
    fn dimension_ok(&self, rows: usize) -> bool {
        match self {
            Cone::Zero | Cone::Nonnegative => rows >= 1,
            Cone::SecondOrder => rows >= 1,
            Cone::RotatedSecondOrder => rows >= 2,
            Cone::Exponential => rows == 3,
            Cone::Psd(d) => rows == d * (d + 1) / 2,
        }
    }
}

/// One constraint block: `rows(x) ∈ cone`.
#[derive(Debug, Clone)]
pub struct ConeBlock {
    pub rows: Vec<LinExpr>,
    pub cone: Cone,
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Solver output.
#[derive(Debug, Clone)]
pub struct ConeSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// Seconds spent inside the backend.
    pub solve_time: f64,
}

/// Conic program under construction; variables are appended, blocks record
/// affine maps into cones, and the objective is minimized.
#[derive(Debug, Clone, Default)]
pub struct ConeProgram {
    n_vars: usize,
    objective: Vec<f64>,
    blocks: Vec<ConeBlock>,
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn blocks(&self) -> &[ConeBlock] {
        &self.blocks
    }

    pub fn add_var(&mut self) -> VarId {
        self.objective.push(0.0);
        self.n_vars += 1;
        self.n_vars - 1
    }

    pub fn add_vars(&mut self, n: usize) -> Vec<VarId> {
        (0..n).map(|_| self.add_var()).collect()
    }

    /// Complex vector variable of `len` entries (interleaved re/im scalars).
    pub fn add_cvec(&mut self, len: usize) -> CVecVar {
        let base = self.n_vars;
        self.add_vars(2 * len);
        CVecVar::new(base, len)
    }

    /// Hermitian matrix variable of dimension `dim`.
    pub fn add_hermitian(&mut self, dim: usize) -> HermVar {
        let base = self.n_vars;
        self.add_vars(dim * dim);
        HermVar::new(base, dim)
    }

    /// Adds `coeff * var` to the minimized objective.
    pub fn add_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var] += coeff;
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn add_block(&mut self, rows: Vec<LinExpr>, cone: Cone) {
        assert!(
            cone.dimension_ok(rows.len()),
            "cone {:?} cannot take {} rows",
            cone,
            rows.len()
        );
        self.blocks.push(ConeBlock { rows, cone });
    }

    /// `expr = 0`.
    pub fn add_eq_zero(&mut self, expr: LinExpr) {
        self.add_block(vec![expr], Cone::Zero);
    }

    /// `expr >= 0`.
    pub fn add_nonneg(&mut self, expr: LinExpr) {
        self.add_block(vec![expr], Cone::Nonnegative);
    }

    /// `head >= || tail ||_2`.
    pub fn add_soc(&mut self, head: LinExpr, tail: Vec<LinExpr>) {
        let mut rows = vec![head];
        rows.extend(tail);
        self.add_block(rows, Cone::SecondOrder);
    }

    /// Hypograph of the natural log: `r <= ln(s)` (with `s > 0` implied).
    pub fn add_log_hypograph(&mut self, r: LinExpr, s: LinExpr) {
        self.add_block(vec![r, LinExpr::constant(1.0), s], Cone::Exponential);
    }

    /// Quadratic-over-linear epigraph: `||u||^2 / y <= r` with `y >= 0`,
    /// encoded as the rotated cone `(r/2, y, u)`.
    pub fn add_quad_over_lin(&mut self, r: LinExpr, y: LinExpr, u: &[LinExpr]) {
        let mut rows = vec![r.scaled(0.5), y];
        rows.extend_from_slice(u);
        self.add_block(rows, Cone::RotatedSecondOrder);
    }

    /// Constrains an affine Hermitian matrix expression to be PSD through
    /// the real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`, which
    /// is PSD iff `H` is. Entries are validated against the Hermitian
    /// symmetry `H[j][i] == conj(H[i][j])`.
    pub fn embed_hermitian_psd(&mut self, h: &[Vec<CLinExpr>]) -> Result<(), SecError> {
        let d = h.len();
        for (i, row) in h.iter().enumerate() {
            if row.len() != d {
                return Err(SecError::ShapeMismatch {
                    expected: format!("{d}x{d}"),
                    got: format!("row {i} has {} entries", row.len()),
                });
            }
            for j in 0..d {
                if !h[i][j].is_conjugate_of(&h[j][i]) {
                    return Err(SecError::Domain(format!(
                        "matrix expression is not Hermitian at ({i},{j})"
                    )));
                }
            }
        }
        let dim = 2 * d;
        // Real embedding entry (r, c), r >= c, of [[Re, -Im], [Im, Re]].
        let entry = |r: usize, c: usize| -> LinExpr {
            let (br, ir) = (r / d, r % d);
            let (bc, ic) = (c / d, c % d);
            match (br, bc) {
                (0, 0) | (1, 1) => h[ir][ic].re.clone(),
                (1, 0) => h[ir][ic].im.clone(),
                _ => unreachable!("lower triangle only"),
            }
        };
        let sq2 = std::f64::consts::SQRT_2;
        let mut rows = Vec::with_capacity(dim * (dim + 1) / 2);
        for c in 0..dim {
            for r in c..dim {
                let e = entry(r, c);
                rows.push(if r == c { e } else { e.scaled(sq2) });
            }
        }
        self.add_block(rows, Cone::Psd(dim));
        Ok(())
    }

    /// Solves the program to the requested tolerance.
    pub fn solve(&self, tolerance: f64) -> ConeSolution {
        solver::solve_clarabel(self, tolerance)
    }

    /// Maximum constraint violation of a candidate point across all blocks.
    pub fn residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for block in &self.blocks {
            let vals: Vec<f64> = block.rows.iter().map(|r| r.eval(x)).collect();
            let v = match block.cone {
                Cone::Zero => vals.iter().fold(0.0f64, |a, &b| a.max(b.abs())),
                Cone::Nonnegative => vals.iter().fold(0.0f64, |a, &b| a.max(-b)),
                Cone::SecondOrder => {
                    let tail: f64 = vals[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                    tail - vals[0]
                }
                Cone::RotatedSecondOrder => {
                    let tail: f64 = vals[2..].iter().map(|v| v * v).sum();
                    (tail - 2.0 * vals[0] * vals[1]).max(-vals[0]).max(-vals[1])
                }
                Cone::Exponential => {
                    let (px, py, pz) = (vals[0], vals[1], vals[2]);
                    if py > 0.0 {
                        py * (px / py).exp() - pz
                    } else {
                        // Closure boundary: y = 0 needs x <= 0, z >= 0.
                        px.max(-pz).max(-py)
                    }
                }
                Cone::Psd(d) => {
                    let m = unpack_symmetric(&vals, d);
                    let eig = m.symmetric_eigen();
                    -eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
                }
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Plain-text rendering of the program (objective, then one line per
    /// block row) for attaching solver inputs to bug reports.
    pub fn dump_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "vars: {}", self.n_vars).unwrap();
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| format!("{c:+}*x{i}"))
            .collect();
        writeln!(out, "minimize: {}", if obj.is_empty() { "0".into() } else { obj.join(" ") })
            .unwrap();
        for (bi, block) in self.blocks.iter().enumerate() {
            writeln!(out, "block {bi}: {:?} ({} rows)", block.cone, block.rows.len()).unwrap();
            for row in &block.rows {
                writeln!(out, "  {row}").unwrap();
            }
        }
        out
    }
}

/// Expands packed lower-triangular (column-major, sqrt(2)-scaled
/// off-diagonals) storage back into a dense symmetric matrix.
pub fn unpack_symmetric(packed: &[f64], d: usize) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(d, d);
    let mut idx = 0;
    let sq2 = std::f64::consts::SQRT_2;
    for c in 0..d {
        for r in c..d {
            let v = if r == c { packed[idx] } else { packed[idx] / sq2 };
            m[(r, c)] = v;
            m[(c, r)] = v;
            idx += 1;
        }
    }
    m
}

/// Packs a constant Hermitian complex matrix through the real embedding,
/// matching [`ConeProgram::embed_hermitian_psd`]'s layout.
pub fn pack_hermitian_constant(h: &CMatrix) -> Vec<f64> {
    let d = h.nrows();
    let dim = 2 * d;
    let entry = |r: usize, c: usize| -> f64 {
        let (br, ir) = (r / d, r % d);
        let (bc, ic) = (c / d, c % d);
        match (br, bc) {
            (0, 0) | (1, 1) => h[(ir, ic)].re,
            (1, 0) => h[(ir, ic)].im,
            _ => unreachable!(),
        }
    };
    let sq2 = std::f64::consts::SQRT_2;
    let mut rows = Vec::with_capacity(dim * (dim + 1) / 2);
    for c in 0..dim {
        for r in c..dim {
            let e = entry(r, c);
            rows.push(if r == c { e } else { e * sq2 });
        }
    }
    rows
}

/// Convenience: constant complex matrix to a grid of constant expressions.
pub fn constant_matrix_expr(h: &CMatrix) -> Vec<Vec<CLinExpr>> {
    (0..h.nrows())
        .map(|i| (0..h.ncols()).map(|j| CLinExpr::constant(h[(i, j)])).collect())
        .collect()
}

/// Convenience: `c` as a complex constant expression.
pub fn cconst(c: C64) -> CLinExpr {
    CLinExpr::constant(c)
}
