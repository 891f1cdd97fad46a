//! Executable checks of the analytical building blocks: bound tightness,
//! majorization dominance, Bernstein algebra and its Monte Carlo safety.
//! The CLI prints these as a pass/fail report; the acceptance suite runs
//! the same routines with its own budgets.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::rates::{bound_re_upper, bound_rk_lower, rate_reflect, tight_aux};
use crate::robust::bti::{
    bti_deterministic_check, dense_quadratic_helper_k, dense_quadratic_user_big_k, dense_terms,
    monte_carlo_violation, rho_bar, BtiTerms,
};
use crate::{C64, CMatrix, CVector};

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.into(), pass, detail }
    }
}

pub(crate) fn random_cvector(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub(crate) fn random_cmatrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Dominance and tightness of the two auxiliary-variable rate bounds over
/// random scenes.
pub fn check_bound_tightness(seed: u64, scenes: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gap: f64 = 0.0;
    for _ in 0..scenes {
        let m = rng.random_range(1..5usize);
        let kh = rng.random_range(1..4usize);
        let h = random_cmatrix(&mut rng, m, kh);
        let e = random_cvector(&mut rng, m);
        let w = random_cvector(&mut rng, kh);
        let sigma2 = rng.random_range(0.05..5.0);
        let rate = rate_reflect(&w, &e, &h, sigma2);
        let a_rand = rng.random_range(1e-3..10.0);
        let up = bound_re_upper(&w, &e, &h, sigma2, a_rand).unwrap();
        if up < rate - 1e-10 {
            return Check::new("bound-tightness", false, format!("upper bound {up} < rate {rate}"));
        }
        let q = (e.adjoint() * &h * &w)[(0, 0)];
        let (a, v) = tight_aux(q, sigma2);
        let a_e_tight = 1.0 / (1.0 + q.norm_sqr() / sigma2);
        let up_t = bound_re_upper(&w, &e, &h, sigma2, a_e_tight).unwrap();
        let lo_rand = bound_rk_lower(
            &w,
            &e,
            &h,
            sigma2,
            a_rand,
            v * C64::new(rng.random_range(0.0..2.0), 0.1),
        )
        .unwrap();
        if lo_rand > rate + 1e-10 {
            return Check::new("bound-tightness", false, format!("lower bound {lo_rand} > rate {rate}"));
        }
        let lo_t = bound_rk_lower(&w, &e, &h, sigma2, a, v).unwrap();
        let scale = rate.max(1.0);
        worst_gap = worst_gap.max((up_t - rate).abs() / scale).max((lo_t - rate).abs() / scale);
    }
    Check::new(
        "bound-tightness",
        worst_gap <= 1e-12,
        format!("worst tight-point relative gap {worst_gap:.2e} over {scenes} scenes"),
    )
}

/// Dominance and touch of the unit-modulus quadratic majorizer.
pub fn check_majorization(seed: u64, scenes: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..scenes {
        let m = rng.random_range(1..5usize);
        let b = random_cmatrix(&mut rng, m, m);
        let a = linalg::hermitize(&(&b * b.adjoint()));
        let e_prev = linalg::unit_phases_of(
            &random_cvector(&mut rng, m),
            &CVector::from_element(m, C64::new(1.0, 0.0)),
            0.0,
        );
        let lmax = linalg::lambda_max(&a);
        let majorizer = |x: &CVector| -> f64 {
            let shifted = CMatrix::identity(m, m) * C64::new(lmax, 0.0) - &a;
            lmax * x.norm_squared() - 2.0 * (e_prev.adjoint() * &shifted * x)[(0, 0)].re
                + (e_prev.adjoint() * &shifted * &e_prev)[(0, 0)].re
        };
        let at_prev = (e_prev.adjoint() * &a * &e_prev)[(0, 0)].re;
        if (majorizer(&e_prev) - at_prev).abs() > 1e-9 * at_prev.abs().max(1.0) {
            return Check::new("mm-majorization", false, "majorizer does not touch".into());
        }
        let x = linalg::unit_phases_of(
            &random_cvector(&mut rng, m),
            &CVector::from_element(m, C64::new(1.0, 0.0)),
            0.0,
        );
        let quad = (x.adjoint() * &a * &x)[(0, 0)].re;
        if majorizer(&x) < quad - 1e-9 * quad.abs().max(1.0) {
            return Check::new("mm-majorization", false, "majorizer dominated by quadratic".into());
        }
    }
    Check::new("mm-majorization", true, format!("dominance and touch on {scenes} scenes"))
}

/// Fast Bernstein scalars against the dense stacked-error construction.
pub fn check_bti_algebra(seed: u64, instances: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let m = rng.random_range(1..4usize);
        let kh = rng.random_range(1..3usize);
        let inst = random_bti_instance(&mut rng, m, kh);
        let fast = crate::robust::bti_terms_helper_k(
            &inst.w_mat, &inst.e, &inst.h_e, &inst.lambda_e, inst.a_e, inst.sigma2_e, 0.3, 0.1,
        );
        let dense = dense_terms(&dense_quadratic_helper_k(
            &inst.w_mat, &inst.e, &inst.h_e, &inst.lambda_e, inst.a_e, inst.sigma2_e, 0.3, 0.1,
        ));
        worst = worst.max(terms_gap(&fast, &dense));
        let fast_k = crate::robust::bti_terms_user_big_k(
            &inst.w_mat,
            &inst.w,
            &inst.e,
            &inst.h_k,
            &inst.h_e,
            &inst.lambda_k,
            &inst.lambda_e,
            inst.a_k,
            inst.a_e,
            inst.v,
            inst.sigma2_k,
            inst.sigma2_e,
            0.2,
        );
        let dense_k = dense_terms(&dense_quadratic_user_big_k(
            &inst.w_mat,
            &inst.w,
            &inst.e,
            &inst.h_k,
            &inst.h_e,
            &inst.lambda_k,
            &inst.lambda_e,
            inst.a_k,
            inst.a_e,
            inst.v,
            inst.sigma2_k,
            inst.sigma2_e,
            0.2,
        ));
        worst = worst.max(terms_gap(&fast_k, &dense_k));
    }
    Check::new(
        "bti-algebra",
        worst <= 1e-10,
        format!("worst scalar deviation {worst:.2e} over {instances} instances"),
    )
}

/// Monte Carlo safety of the deterministic Bernstein form: instances that
/// pass the check must keep their sampled violation below the budget.
pub fn check_bti_monte_carlo(seed: u64, instances: usize, samples: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rb = rho_bar(0.05, 5);
    let se = (rb * (1.0 - rb) / samples as f64).sqrt();
    let budget = rb + 3.0 * se;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < instances {
        let m = rng.random_range(1..4usize);
        let kh = rng.random_range(1..3usize);
        let inst = random_bti_instance(&mut rng, m, kh);
        let mut dense = dense_quadratic_user_big_k(
            &inst.w_mat,
            &inst.w,
            &inst.e,
            &inst.h_k,
            &inst.h_e,
            &inst.lambda_k,
            &inst.lambda_e,
            inst.a_k,
            inst.a_e,
            inst.v,
            inst.sigma2_k,
            inst.sigma2_e,
            0.0,
        );
        // Force the deterministic check to hold with a random margin.
        let terms = dense_terms(&dense);
        let margin = rng.random_range(0.0..1.0) * terms.lhs(rb).abs().max(0.1);
        dense.u_const -= terms.lhs(rb) + margin;
        let shifted = dense_terms(&dense);
        if !bti_deterministic_check(&shifted, rb) {
            continue;
        }
        done += 1;
        let violation = monte_carlo_violation(&dense, samples, &mut rng);
        worst = worst.max(violation);
        if violation > budget {
            return Check::new(
                "bti-monte-carlo",
                false,
                format!("violation {violation:.4} > budget {budget:.4}"),
            );
        }
    }
    Check::new(
        "bti-monte-carlo",
        true,
        format!("worst violation {worst:.5} <= budget {budget:.5} over {instances} instances"),
    )
}

fn terms_gap(a: &BtiTerms, b: &BtiTerms) -> f64 {
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
    rel(a.trace_u, b.trace_u)
        .max(rel(a.frob_u, b.frob_u))
        .max(rel(a.norm_u, b.norm_u))
        .max(rel(a.lambda_max_u, b.lambda_max_u))
        .max(rel(a.u_const, b.u_const))
}

pub(crate) struct BtiInstance {
    pub w: CVector,
    pub w_mat: CMatrix,
    pub e: CVector,
    pub h_k: CMatrix,
    pub h_e: CMatrix,
    pub lambda_k: Vec<f64>,
    pub lambda_e: Vec<f64>,
    pub a_k: f64,
    pub a_e: f64,
    pub v: C64,
    pub sigma2_k: f64,
    pub sigma2_e: f64,
}

pub(crate) fn random_bti_instance(rng: &mut ChaCha8Rng, m: usize, kh: usize) -> BtiInstance {
    let w = random_cvector(rng, kh);
    // Near-rank-one PSD lift with a small Hermitian perturbation.
    let perturb = random_cmatrix(rng, kh, kh);
    let w_mat = &w * w.adjoint()
        + linalg::hermitize(&(&perturb * perturb.adjoint())) * C64::new(0.02, 0.0);
    let e = linalg::unit_phases_of(
        &random_cvector(rng, m),
        &CVector::from_element(m, C64::new(1.0, 0.0)),
        0.0,
    );
    BtiInstance {
        w,
        w_mat,
        e,
        h_k: random_cmatrix(rng, m, kh),
        h_e: random_cmatrix(rng, m, kh),
        lambda_k: (0..kh).map(|_| rng.random_range(0.0..0.5)).collect(),
        lambda_e: (0..kh).map(|_| rng.random_range(0.0..0.5)).collect(),
        a_k: rng.random_range(0.5..3.0),
        a_e: rng.random_range(0.1..2.0),
        v: C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)),
        sigma2_k: rng.random_range(0.2..2.0),
        sigma2_e: rng.random_range(0.2..2.0),
    }
}

/// Full report, as printed by `secswipt validate-lemmas`.
pub fn validate_lemmas(seed: u64) -> Vec<Check> {
    vec![
        check_bound_tightness(seed, 1000),
        check_majorization(seed.wrapping_add(1), 1000),
        check_bti_algebra(seed.wrapping_add(2), 100),
        check_bti_monte_carlo(seed.wrapping_add(3), 20, 20_000),
    ]
}
