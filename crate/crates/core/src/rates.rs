//! Rate expressions for both transmission phases, the auxiliary-variable
//! bounds used by the robust design, and the ergodic eavesdropper
//! statistics behind the passive design.
//!
//! All rates are in bits/s/Hz and carry the 1/2 pre-log of the two-phase
//! protocol.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::channel::{irs_offsets, node_offset, steering_upa, Polar, SystemConfig, Topology};
use crate::error::SecError;
use crate::{C64, CMatrix, CVector};

/// Grid points of the composite trapezoid rule over the eavesdropper
/// segment.
pub const ERGODIC_GRID_POINTS: usize = 257;

/// `0.5 * log2(1 + x)` with a log1p evaluation so tiny SNRs keep accuracy.
#[inline]
pub fn half_log2_1p(x: f64) -> f64 {
    0.5 * x.ln_1p() / std::f64::consts::LN_2
}

/// First-phase rate of helper `k`:
/// `1/2 log2(1 + t_k |g_k^H Q z|^2 / sigma_k^2)`.
pub fn rate_helper(z: &CVector, t_k: f64, g_k: &CVector, q: &CMatrix, sigma2_k: f64) -> f64 {
    let p = (g_k.adjoint() * q * z)[(0, 0)].norm_sqr();
    half_log2_1p(t_k * p / sigma2_k)
}

/// First-phase harvested power of helper `k`: `(1 - t_k) |g_k^H Q z|^2`.
pub fn harvested_power(z: &CVector, t_k: f64, g_k: &CVector, q: &CMatrix) -> f64 {
    let p = (g_k.adjoint() * q * z)[(0, 0)].norm_sqr();
    (1.0 - t_k) * p
}

/// Second-phase rate through a cascaded channel:
/// `1/2 log2(1 + |e^H H w|^2 / sigma^2)`.
pub fn rate_reflect(w: &CVector, e: &CVector, h: &CMatrix, sigma2: f64) -> f64 {
    let q = (e.adjoint() * h * w)[(0, 0)].norm_sqr();
    half_log2_1p(q / sigma2)
}

/// `[min_k rates - rate_e]^+`.
pub fn secrecy_rate(rates_lu: &[f64], rate_e: f64) -> f64 {
    let min = rates_lu.iter().copied().fold(f64::INFINITY, f64::min);
    (min - rate_e).max(0.0)
}

/// Upper bound on the eavesdropping rate with auxiliary `a_e > 0`:
/// `(a_e |e^H H_E w|^2 / sigma_E^2 + a_e - ln a_e - 1) / (2 ln 2)`.
///
/// Tight at `a_e = 1 / (1 + SNR_E)`.
pub fn bound_re_upper(
    w: &CVector,
    e: &CVector,
    h_e: &CMatrix,
    sigma2_e: f64,
    a_e: f64,
) -> Result<f64, SecError> {
    if !(a_e > 0.0) {
        return Err(SecError::Domain("a_e must be positive".into()));
    }
    let snr = (e.adjoint() * h_e * w)[(0, 0)].norm_sqr() / sigma2_e;
    Ok((a_e * snr + a_e - a_e.ln() - 1.0) / (2.0 * std::f64::consts::LN_2))
}

/// Lower bound on the legitimate second-phase rate with auxiliaries
/// `a_k > 0` and complex `v`; tight at the values from [`tight_aux`].
pub fn bound_rk_lower(
    w: &CVector,
    e: &CVector,
    h_k: &CMatrix,
    sigma2_k: f64,
    a_k: f64,
    v: C64,
) -> Result<f64, SecError> {
    if !(a_k > 0.0) {
        return Err(SecError::Domain("a_k must be positive".into()));
    }
    let q = (e.adjoint() * h_k * w)[(0, 0)];
    let vq = v * q;
    let num = -a_k * v.norm_sqr() * q.norm_sqr() - sigma2_k * a_k * v.norm_sqr()
        + 2.0 * a_k * vq.re
        - a_k
        + a_k.ln()
        + 1.0;
    Ok(num / (2.0 * std::f64::consts::LN_2))
}

/// Maximizers of the two scalar auxiliary problems for a received scalar
/// `q` and noise power `sigma2`: `a = (sigma2 + |q|^2)/sigma2` and
/// `v = conj(q)/(|q|^2 + sigma2)`.
pub fn tight_aux(q: C64, sigma2: f64) -> (f64, C64) {
    let a = (sigma2 + q.norm_sqr()) / sigma2;
    let v = q.conj() / C64::new(q.norm_sqr() + sigma2, 0.0);
    (a, v)
}

/// Position-and-fading averaged eavesdropper statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicEveStats {
    /// LoS mean of `h_E` at the topology's actual eavesdropper position.
    pub h_bar_e: CVector,
    /// `1/D_K` integral over the BS-user-K segment of `E[h_E h_E^H]`;
    /// Hermitian PSD, M x M.
    pub r_e_mat: CMatrix,
}

fn eve_los_term(
    config: &SystemConfig,
    irs: Polar,
    theta: f64,
    d_e: f64,
) -> Result<(f64, CVector), SecError> {
    let node = Polar::new(d_e, theta);
    // Distance floor keeps the pathloss finite when the grid touches the
    // segment endpoint nearest the IRS.
    let off = match node_offset(irs, node) {
        Ok(o) => o,
        Err(_) => return Err(SecError::DegenerateGeometry("eve grid point on IRS".into())),
    };
    let dist = off.dist.max(crate::channel::MIN_IRS_DISTANCE);
    let pathloss = config.rho0 * (dist / config.d0).powf(-config.alpha_irs);
    let los = steering_upa(off.sin_phi, off.cos_phi, config.phi_elev, theta, config.mx, config.my);
    Ok((pathloss, los))
}

/// Averaged second-order statistics of the eavesdropper's IRS channel,
/// integrating the Rician correlation over a uniform position on the
/// BS-user-K segment with a 257-point composite trapezoid rule.
pub fn ergodic_eve_correlation(
    config: &SystemConfig,
    topology: &Topology,
) -> Result<ErgodicEveStats, SecError> {
    ergodic_eve_correlation_with_grid(config, topology, ERGODIC_GRID_POINTS)
}

/// Same as [`ergodic_eve_correlation`] with an explicit grid size (used by
/// the grid-refinement check).
pub fn ergodic_eve_correlation_with_grid(
    config: &SystemConfig,
    topology: &Topology,
    grid: usize,
) -> Result<ErgodicEveStats, SecError> {
    topology.validate()?;
    let m = config.m();
    let d_k = topology.user_k().dist;
    let theta = topology.user_k().angle;
    let k_irs = config.k_irs;
    let nlos_frac = 1.0 / (1.0 + k_irs);
    let los_frac = k_irs / (1.0 + k_irs);

    let mut acc = CMatrix::zeros(m, m);
    let step = d_k / (grid - 1) as f64;
    for i in 0..grid {
        let d_e = i as f64 * step;
        let (pathloss, los) = eve_los_term(config, topology.irs, theta, d_e)?;
        let weight = if i == 0 || i == grid - 1 { 0.5 } else { 1.0 };
        let scale = C64::new(weight * pathloss, 0.0);
        // pathloss * [ I/(1+K) + K/(1+K) los los^H ]
        let outer = &los * los.adjoint() * C64::new(los_frac, 0.0)
            + CMatrix::identity(m, m) * C64::new(nlos_frac, 0.0);
        acc += outer * scale;
    }
    // Composite trapezoid of (1/D_K) * integrand over [0, D_K].
    let r_e_mat = acc * C64::new(step / d_k, 0.0);

    let offs = irs_offsets(topology)?;
    let pathloss = config.rho0 * (offs.eve.dist / config.d0).powf(-config.alpha_irs);
    let los = steering_upa(offs.eve.sin_phi, offs.eve.cos_phi, config.phi_elev, theta, config.mx, config.my);
    let h_bar_e = los * C64::new((pathloss * los_frac).sqrt(), 0.0);
    Ok(ErgodicEveStats { h_bar_e, r_e_mat })
}

/// Jensen upper bound on the average eavesdropping rate:
/// `1/2 log2(1 + w^H H_irs^H diag(e) R_E diag(conj(e)) H_irs w / sigma_E^2)`.
pub fn rate_e_jensen(
    w: &CVector,
    e: &CVector,
    h_irs: &CMatrix,
    r_e_mat: &CMatrix,
    sigma2_e: f64,
) -> f64 {
    let de = CMatrix::from_diagonal(e);
    let de_conj = CMatrix::from_diagonal(&e.map(|x| x.conj()));
    let q = (w.adjoint() * h_irs.adjoint() * de * r_e_mat * de_conj * h_irs * w)[(0, 0)].re;
    half_log2_1p(q / sigma2_e)
}

/// Draws one eavesdropper IRS channel with the position uniform on the
/// BS-user-K segment (the Monte Carlo counterpart of
/// [`ergodic_eve_correlation`]).
pub fn sample_eve_position_channel(
    config: &SystemConfig,
    topology: &Topology,
    rng: &mut ChaCha8Rng,
) -> Result<CVector, SecError> {
    use rand_distr::StandardNormal;
    let d_k = topology.user_k().dist;
    let theta = topology.user_k().angle;
    let d_e = rng.random_range(0.0..d_k);
    let (pathloss, los) = eve_los_term(config, topology.irs, theta, d_e)?;
    let m = config.m();
    let s = (1.0f64 / (2.0 * (1.0 + config.k_irs))).sqrt();
    let nlos = CVector::from_fn(m, |_, _| {
        C64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
    });
    let a = (config.k_irs / (1.0 + config.k_irs)).sqrt();
    Ok((los * C64::new(a, 0.0) + nlos) * C64::new(pathloss.sqrt(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, sample_topology};
    use rand::SeedableRng;
    use rand_distr::StandardNormal;

    fn cvec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    #[test]
    fn rate_helper_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = cvec(&mut rng, 3);
        let q = crate::linalg::householder_null_basis(&cvec(&mut rng, 3)).unwrap();
        let z = cvec(&mut rng, 2);
        assert_eq!(rate_helper(&z, 0.0, &g, &q, 1.0), 0.0);
        let z0 = CVector::zeros(2);
        assert_eq!(rate_helper(&z0, 0.7, &g, &q, 1.0), 0.0);
        // |g^H Q z|^2 = sigma^2 and t = 1 gives exactly 1/2.
        let p = (g.adjoint() * &q * &z)[(0, 0)].norm_sqr();
        let r = rate_helper(&z, 1.0, &g, &q, p);
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn harvested_power_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = cvec(&mut rng, 3);
        let q = crate::linalg::householder_null_basis(&cvec(&mut rng, 3)).unwrap();
        let z = cvec(&mut rng, 2);
        assert_eq!(harvested_power(&z, 1.0, &g, &q), 0.0);
        let p = (g.adjoint() * &q * &z)[(0, 0)].norm_sqr();
        assert!((harvested_power(&z, 0.0, &g, &q) - p).abs() < 1e-15 * p);
        let t = 0.37;
        assert!((harvested_power(&z, t, &g, &q) - (1.0 - t) * p).abs() < 1e-15 * p);
    }

    #[test]
    fn rate_reflect_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = cmat(&mut rng, 4, 2);
        let e = cvec(&mut rng, 4);
        let w0 = CVector::zeros(2);
        assert_eq!(rate_reflect(&w0, &e, &h, 1.0), 0.0);
        // |e^H H w|^2 = 3 sigma^2 -> 1/2 log2(4) = 1.
        let w = cvec(&mut rng, 2);
        let q = (e.adjoint() * &h * &w)[(0, 0)].norm_sqr();
        let r = rate_reflect(&w, &e, &h, q / 3.0);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn secrecy_rate_examples() {
        assert_eq!(secrecy_rate(&[2.0, 3.0], 3.0), 0.0);
        assert_eq!(secrecy_rate(&[2.0, 5.0], 0.5), 1.5);
        assert_eq!(secrecy_rate(&[2.0], 2.0), 0.0);
    }

    #[test]
    fn bounds_dominance_and_tightness() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let h = cmat(&mut rng, 3, 2);
            let e = cvec(&mut rng, 3);
            let w = cvec(&mut rng, 2);
            let sigma2 = rng.random_range(0.1..4.0);
            let re = rate_reflect(&w, &e, &h, sigma2);
            let a_rand = rng.random_range(1e-3..10.0);
            let up = bound_re_upper(&w, &e, &h, sigma2, a_rand).unwrap();
            assert!(up >= re - 1e-10, "upper bound violated: {up} < {re}");
            let q = (e.adjoint() * &h * &w)[(0, 0)];
            let (a, v) = tight_aux(q, sigma2);
            let up_tight = bound_re_upper(&w, &e, &h, sigma2, 1.0 / (1.0 + q.norm_sqr() / sigma2)).unwrap();
            assert!((up_tight - re).abs() < 1e-12 * re.max(1.0));
            let lo_rand = bound_rk_lower(&w, &e, &h, sigma2, a_rand, v * C64::new(rng.random_range(0.0..2.0), 0.3)).unwrap();
            assert!(lo_rand <= re + 1e-10);
            let lo_tight = bound_rk_lower(&w, &e, &h, sigma2, a, v).unwrap();
            assert!((lo_tight - re).abs() < 1e-12 * re.max(1.0));
        }
    }

    #[test]
    fn bounds_zero_cases_and_domain_errors() {
        let h = CMatrix::zeros(3, 2);
        let e = CVector::from_element(3, C64::new(1.0, 0.0));
        let w = CVector::zeros(2);
        assert_eq!(bound_re_upper(&w, &e, &h, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(bound_rk_lower(&w, &e, &h, 1.0, 1.0, C64::new(0.0, 0.0)).unwrap(), 0.0);
        assert!(bound_re_upper(&w, &e, &h, 1.0, 0.0).is_err());
        assert!(bound_rk_lower(&w, &e, &h, 1.0, -1.0, C64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn tight_aux_examples() {
        let (a, v) = tight_aux(C64::new(0.0, 0.0), 2.0);
        assert_eq!(a, 1.0);
        assert_eq!(v, C64::new(0.0, 0.0));
        let q = C64::new(1.0, 1.0); // |q|^2 = 2 = sigma^2
        let (a, v) = tight_aux(q, 2.0);
        assert!((a - 2.0).abs() < 1e-15);
        assert!((v - q.conj() / C64::new(4.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rates_invariant_under_common_phase_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = SystemConfig::defaults(4, 3, 2, 2);
        let topo = sample_topology(&cfg, 0.5, &mut rng).unwrap();
        let set = sample_channels(&cfg, &topo, &mut rng).unwrap();
        let stats = ergodic_eve_correlation(&cfg, &topo).unwrap();
        let e = crate::linalg::unit_phases_of(&cvec(&mut rng, cfg.m()), &CVector::from_element(cfg.m(), C64::new(1.0, 0.0)), 0.0);
        let w = cvec(&mut rng, cfg.k - 1);
        let psi = C64::from_polar(1.0, 1.234);
        let e_rot = &e * psi;
        let s2 = cfg.noise.users[cfg.k - 1];
        assert!((rate_reflect(&w, &e, &set.h_cascade_k, s2) - rate_reflect(&w, &e_rot, &set.h_cascade_k, s2)).abs() < 1e-10);
        assert!((rate_reflect(&w, &e, &set.h_cascade_e, cfg.noise.eve) - rate_reflect(&w, &e_rot, &set.h_cascade_e, cfg.noise.eve)).abs() < 1e-10);
        let j1 = rate_e_jensen(&w, &e, &set.h_irs, &stats.r_e_mat, cfg.noise.eve);
        let j2 = rate_e_jensen(&w, &e_rot, &set.h_irs, &stats.r_e_mat, cfg.noise.eve);
        assert!((j1 - j2).abs() < 1e-10);
    }

    #[test]
    fn ergodic_correlation_rayleigh_limit_is_scaled_identity() {
        let mut cfg = SystemConfig::defaults(4, 3, 2, 2);
        cfg.k_irs = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let topo = sample_topology(&cfg, 0.5, &mut rng).unwrap();
        let stats = ergodic_eve_correlation(&cfg, &topo).unwrap();
        let c = stats.r_e_mat[(0, 0)].re;
        assert!(c > 0.0);
        let target = CMatrix::identity(cfg.m(), cfg.m()) * C64::new(c, 0.0);
        assert!((stats.r_e_mat.clone() - target).norm() < 1e-12 * c);
    }

    #[test]
    fn ergodic_correlation_hermitian_psd_and_grid_refinement() {
        let cfg = SystemConfig::defaults(4, 3, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let topo = sample_topology(&cfg, 0.5, &mut rng).unwrap();
        let a = ergodic_eve_correlation_with_grid(&cfg, &topo, 257).unwrap();
        let b = ergodic_eve_correlation_with_grid(&cfg, &topo, 1025).unwrap();
        let rel = (&a.r_e_mat - &b.r_e_mat).norm() / b.r_e_mat.norm();
        assert!(rel <= 1e-4, "grid refinement relative error {rel}");
        assert!((&a.r_e_mat - a.r_e_mat.adjoint()).norm() < 1e-12 * a.r_e_mat.norm());
        let (vals, _) = crate::linalg::hermitian_eig(&a.r_e_mat);
        assert!(vals.iter().all(|&l| l >= -1e-10 * a.r_e_mat.norm()));
    }

    #[test]
    fn ergodic_correlation_trace_matches_scalar_integral() {
        let cfg = SystemConfig::defaults(4, 3, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let topo = sample_topology(&cfg, 0.5, &mut rng).unwrap();
        let stats = ergodic_eve_correlation(&cfg, &topo).unwrap();
        // Independent scalar quadrature of the pathloss integral; both the
        // identity and LoS parts contribute trace M * pathloss.
        let d_k = topo.user_k().dist;
        let theta = topo.user_k().angle;
        let grid = ERGODIC_GRID_POINTS;
        let step = d_k / (grid - 1) as f64;
        let mut acc = 0.0;
        for i in 0..grid {
            let d_e = i as f64 * step;
            let off = node_offset(topo.irs, Polar::new(d_e, theta)).unwrap();
            let dist = off.dist.max(crate::channel::MIN_IRS_DISTANCE);
            let pl = cfg.rho0 * (dist / cfg.d0).powf(-cfg.alpha_irs);
            acc += if i == 0 || i == grid - 1 { 0.5 * pl } else { pl };
        }
        let scalar = acc * step / d_k;
        let want = cfg.m() as f64 * scalar;
        let got: f64 = stats.r_e_mat.diagonal().iter().map(|x| x.re).sum();
        assert!((got - want).abs() < 1e-6 * want, "trace {got} vs {want}");
    }

    #[test]
    fn jensen_bound_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h_irs = cmat(&mut rng, 3, 2);
        let r = CMatrix::identity(3, 3);
        let e = CVector::from_element(3, C64::new(1.0, 0.0));
        let w0 = CVector::zeros(2);
        assert_eq!(rate_e_jensen(&w0, &e, &h_irs, &r, 1.0), 0.0);
        // M = 1 with a one-point LoS correlation equals the deterministic rate.
        let h1 = cmat(&mut rng, 1, 2);
        let he = cvec(&mut rng, 1);
        let rr = &he * he.adjoint();
        let e1 = CVector::from_element(1, C64::from_polar(1.0, 0.3));
        let w = cvec(&mut rng, 2);
        let casc = crate::channel::cascade(&he, &h1);
        let a = rate_e_jensen(&w, &e1, &h1, &rr, 0.7);
        let b = rate_reflect(&w, &e1, &casc, 0.7);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn jensen_dominates_monte_carlo_average() {
        let cfg = SystemConfig::defaults(4, 3, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let topo = sample_topology(&cfg, 0.5, &mut rng).unwrap();
        let set = sample_channels(&cfg, &topo, &mut rng).unwrap();
        let stats = ergodic_eve_correlation(&cfg, &topo).unwrap();
        let e = crate::linalg::unit_phases_of(&cvec(&mut rng, cfg.m()), &CVector::from_element(cfg.m(), C64::new(1.0, 0.0)), 0.0);
        let w = cvec(&mut rng, cfg.k - 1) * C64::new(1e-3, 0.0);
        let bound = rate_e_jensen(&w, &e, &set.h_irs, &stats.r_e_mat, cfg.noise.eve);
        let draws = 10_000;
        let mut vals = Vec::with_capacity(draws);
        for _ in 0..draws {
            let h_e = sample_eve_position_channel(&cfg, &topo, &mut rng).unwrap();
            let casc = crate::channel::cascade(&h_e, &set.h_irs);
            vals.push(rate_reflect(&w, &e, &casc, cfg.noise.eve));
        }
        let mean: f64 = vals.iter().sum::<f64>() / draws as f64;
        let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!(
            bound >= mean - 3.0 * se,
            "jensen bound {bound} below MC mean {mean} (se {se})"
        );
    }
}
