//! Lowering of [`ConeProgram`] onto the Clarabel interior-point backend.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::{Cone, ConeProgram, ConeSolution, SolveStatus};
use crate::conic::expr::LinExpr;

/// Clarabel solves `min 1/2 x'Px + q'x  s.t. Ax + s = b, s ∈ K`; a block
/// `rows(x) ∈ K` becomes `s = rows(x)`, i.e. `A = -coef(rows)`,
/// `b = const(rows)`.
pub(super) fn solve_clarabel(program: &ConeProgram, tolerance: f64) -> ConeSolution {
    let n = program.n_vars();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    let push_row = |row: &LinExpr, b: &mut Vec<f64>, triplets: &mut Vec<(usize, usize, f64)>| {
        let r = b.len();
        let simplified = row.clone().simplified();
        for (var, coeff) in simplified.terms {
            triplets.push((r, var, -coeff));
        }
        b.push(simplified.constant);
    };

    for block in program.blocks() {
        match block.cone {
            Cone::Zero => {
                for row in &block.rows {
                    push_row(row, &mut b, &mut triplets);
                }
                merge_or_push(&mut cones, CKind::Zero, block.rows.len());
            }
            Cone::Nonnegative => {
                for row in &block.rows {
                    push_row(row, &mut b, &mut triplets);
                }
                merge_or_push(&mut cones, CKind::Nonneg, block.rows.len());
            }
            Cone::SecondOrder => {
                for row in &block.rows {
                    push_row(row, &mut b, &mut triplets);
                }
                cones.push(SupportedConeT::SecondOrderConeT(block.rows.len()));
            }
            Cone::RotatedSecondOrder => {
                // (t, y, u) with ||u||^2 <= 2ty maps onto the standard cone
                // via [t + y, t - y, sqrt(2) u].
                let t = &block.rows[0];
                let y = &block.rows[1];
                let sum = t.clone() + y.clone();
                let diff = t.clone() - y.clone();
                push_row(&sum, &mut b, &mut triplets);
                push_row(&diff, &mut b, &mut triplets);
                for row in &block.rows[2..] {
                    push_row(&row.scaled(std::f64::consts::SQRT_2), &mut b, &mut triplets);
                }
                cones.push(SupportedConeT::SecondOrderConeT(block.rows.len()));
            }
            Cone::Exponential => {
                for row in &block.rows {
                    push_row(row, &mut b, &mut triplets);
                }
                cones.push(SupportedConeT::ExponentialConeT());
            }
            Cone::Psd(d) => {
                // Internal packing is lower-triangular column-major; the
                // backend wants the upper triangle column-major. Entry
                // (i, j), i >= j sits at backend position i(i+1)/2 + j.
                let rows_here = block.rows.len();
                let base = b.len();
                b.resize(base + rows_here, 0.0);
                let mut k = 0;
                for j in 0..d {
                    for i in j..d {
                        let pos = base + i * (i + 1) / 2 + j;
                        let simplified = block.rows[k].clone().simplified();
                        for (var, coeff) in simplified.terms {
                            triplets.push((pos, var, -coeff));
                        }
                        b[pos] = simplified.constant;
                        k += 1;
                    }
                }
                cones.push(SupportedConeT::PSDTriangleConeT(d));
            }
        }
    }

    let m_rows = b.len();
    let a = csc_from_triplets(m_rows, n, &mut triplets);
    let p = CscMatrix::new(n, n, vec![0; n + 1], vec![], vec![]);
    let q = program.objective().to_vec();

    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: tolerance,
        tol_gap_rel: tolerance,
        tol_feas: tolerance,
        max_iter: 200,
        ..DefaultSettings::default()
    };

    let mut solver = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
        Ok(s) => s,
        // Malformed problem data surfaces as a failure status, never a panic.
        Err(_) => {
            return ConeSolution {
                status: SolveStatus::NumericalFailure,
                x: vec![0.0; n],
                objective_value: f64::NAN,
                solve_time: 0.0,
            };
        }
    };
    solver.solve();

    let status = match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    };
    ConeSolution {
        status,
        x: solver.solution.x.clone(),
        objective_value: solver.solution.obj_val,
        solve_time: solver.solution.solve_time,
    }
}

#[derive(PartialEq)]
enum CKind {
    Zero,
    Nonneg,
}

fn merge_or_push(cones: &mut Vec<SupportedConeT<f64>>, kind: CKind, n: usize) {
    match (cones.last_mut(), kind) {
        (Some(SupportedConeT::ZeroConeT(m)), CKind::Zero) => *m += n,
        (Some(SupportedConeT::NonnegativeConeT(m)), CKind::Nonneg) => *m += n,
        (_, CKind::Zero) => cones.push(SupportedConeT::ZeroConeT(n)),
        (_, CKind::Nonneg) => cones.push(SupportedConeT::NonnegativeConeT(n)),
    }
}

fn csc_from_triplets(rows: usize, cols: usize, triplets: &mut [(usize, usize, f64)]) -> CscMatrix {
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut colptr = Vec::with_capacity(cols + 1);
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval = Vec::with_capacity(triplets.len());
    let mut col = 0;
    colptr.push(0);
    let mut i = 0;
    while i < triplets.len() {
        let (r, c, mut v) = triplets[i];
        // Accumulate duplicates targeting the same entry.
        let mut j = i + 1;
        while j < triplets.len() && triplets[j].0 == r && triplets[j].1 == c {
            v += triplets[j].2;
            j += 1;
        }
        while col < c {
            colptr.push(rowval.len());
            col += 1;
        }
        rowval.push(r);
        nzval.push(v);
        i = j;
    }
    while col < cols {
        colptr.push(rowval.len());
        col += 1;
    }
    CscMatrix::new(rows, cols, colptr, rowval, nzval)
}
