//! Network geometry, Rician fading, cascaded IRS channels and the
//! statistical CSI error model.
//!
//! The base station sits at the origin with a uniform linear array; the IRS
//! is a uniform planar array at a polar position (default 50 m, 0 rad).
//! `K` users and one eavesdropper are placed by polar coordinates, the
//! eavesdropper on the segment between the BS and user `K`. Every link is
//! Rician:
//!
//! ```text
//! g_i = sqrt(rho0 (D_i/d0)^-alpha) ( sqrt(Kf/(1+Kf)) g_los + sqrt(1/(1+Kf)) g_nlos )
//! ```
//!
//! with the analogous expression for the IRS-side links `h_i`. Cascaded
//! helper->IRS->destination channels have columns `conj(h_dest) ⊙ h_k`.

use nalgebra::Complex;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::SecError;
use crate::linalg::householder_null_basis;
use crate::{C64, CMatrix, CVector};

/// Minimum admissible IRS-to-node distance in meters; topologies closer
/// than this are resampled to avoid pathloss singularities.
pub const MIN_IRS_DISTANCE: f64 = 0.5;

/// Polar coordinate relative to the BS at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polar {
    /// Distance from the BS in meters.
    pub dist: f64,
    /// Azimuth in radians.
    pub angle: f64,
}

impl Polar {
    pub fn new(dist: f64, angle: f64) -> Self {
        Self { dist, angle }
    }

    pub fn cartesian(&self) -> (f64, f64) {
        (self.dist * self.angle.cos(), self.dist * self.angle.sin())
    }
}

/// Per-node noise powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisePowers {
    /// One entry per user, index `k-1` for user `k`.
    pub users: Vec<f64>,
    pub eve: f64,
}

impl NoisePowers {
    pub fn uniform(k: usize, sigma2: f64) -> Self {
        Self { users: vec![sigma2; k], eve: sigma2 }
    }
}

/// Static system parameters; linear units throughout (watts, meters,
/// radians, linear pathloss and Rician factors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS antennas.
    pub n: usize,
    /// Users (K >= 2); user K is the one the eavesdropper shadows.
    pub k: usize,
    /// IRS grid: `m = mx * my` elements.
    pub mx: usize,
    pub my: usize,
    /// Transmit power budget in watts.
    pub p_max: f64,
    pub noise: NoisePowers,
    /// Pathloss at the reference distance `d0`, linear.
    pub rho0: f64,
    /// Reference distance in meters.
    pub d0: f64,
    pub alpha_bs: f64,
    pub alpha_irs: f64,
    /// Rician factors, linear.
    pub k_bs: f64,
    pub k_irs: f64,
    /// IRS elevation angle in radians.
    pub phi_elev: f64,
    /// Secrecy outage probability rho in (0, 1].
    pub rho_outage: f64,
    /// Relative cascaded CSI error levels in [0, 1).
    pub delta_k: f64,
    pub delta_e: f64,
    /// IRS placement.
    pub irs_position: Polar,
}

impl SystemConfig {
    /// Baseline parameters: -30 dB reference pathloss at 1 m, exponents
    /// 2.2, Rician factor 5, 30 dBm budget, -100 dBm noise, outage 0.05,
    /// IRS at (50 m, 0) with elevation 2*pi/3.
    pub fn defaults(n: usize, k: usize, mx: usize, my: usize) -> Self {
        Self {
            n,
            k,
            mx,
            my,
            p_max: 1.0,
            noise: NoisePowers::uniform(k, 1e-13),
            rho0: 1e-3,
            d0: 1.0,
            alpha_bs: 2.2,
            alpha_irs: 2.2,
            k_bs: 5.0,
            k_irs: 5.0,
            phi_elev: 2.0 * std::f64::consts::PI / 3.0,
            rho_outage: 0.05,
            delta_k: 0.05,
            delta_e: 0.05,
            irs_position: Polar::new(50.0, 0.0),
        }
    }

    pub fn m(&self) -> usize {
        self.mx * self.my
    }

    pub fn validate(&self) -> Result<(), SecError> {
        let bad = |key: &str, detail: &str| {
            Err(SecError::ConfigDomain { key: key.into(), detail: detail.into() })
        };
        if self.n < 2 {
            return bad("n", "need at least 2 BS antennas");
        }
        if self.k < 2 {
            return bad("k", "need at least 2 users");
        }
        if self.mx < 1 || self.my < 1 {
            return bad("mx/my", "IRS grid dimensions must be >= 1");
        }
        if !(self.p_max > 0.0) {
            return bad("p_max", "power budget must be positive");
        }
        if self.noise.users.len() != self.k {
            return bad("sigma2", "need one user noise power per user");
        }
        if self.noise.users.iter().any(|&s| !(s > 0.0)) || !(self.noise.eve > 0.0) {
            return bad("sigma2", "noise powers must be positive");
        }
        if !(self.rho0 > 0.0) || !(self.d0 > 0.0) {
            return bad("rho0/d0", "reference pathloss and distance must be positive");
        }
        if !(self.rho_outage > 0.0 && self.rho_outage <= 1.0) {
            return bad("rho_outage", "outage probability must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.delta_k) {
            return bad("delta_k", "relative CSI error must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.delta_e) {
            return bad("delta_e", "relative CSI error must lie in [0, 1)");
        }
        if !(self.irs_position.dist > 0.0) {
            return bad("d_irs", "IRS distance must be positive");
        }
        Ok(())
    }
}

/// Node placement for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub irs: Polar,
    /// Users 1..K in order; the last entry is user K.
    pub users: Vec<Polar>,
    /// Eavesdropper, on the BS-user-K segment: same angle, shorter range.
    pub eve: Polar,
}

impl Topology {
    pub fn user_k(&self) -> Polar {
        *self.users.last().expect("at least one user")
    }

    pub fn validate(&self) -> Result<(), SecError> {
        let uk = self.user_k();
        if self.eve.angle != uk.angle {
            return Err(SecError::Domain("eavesdropper must share user K's azimuth".into()));
        }
        if !(self.eve.dist > 0.0 && self.eve.dist < uk.dist) {
            return Err(SecError::Domain("eavesdropper distance must lie in (0, D_K)".into()));
        }
        if self.users.iter().any(|p| !(p.dist > 0.0)) || !(self.irs.dist > 0.0) {
            return Err(SecError::Domain("all node distances must be positive".into()));
        }
        Ok(())
    }
}

/// IRS-relative distance and direction cosines for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offset {
    pub dist: f64,
    pub sin_phi: f64,
    pub cos_phi: f64,
}

/// Offsets for all users plus the eavesdropper.
#[derive(Debug, Clone, PartialEq)]
pub struct IrsOffsets {
    pub users: Vec<Offset>,
    pub eve: Offset,
}

/// IRS-relative geometry for a single node.
pub fn node_offset(irs: Polar, node: Polar) -> Result<Offset, SecError> {
    let dx = irs.dist * irs.angle.cos() - node.dist * node.angle.cos();
    let dy = irs.dist * irs.angle.sin() - node.dist * node.angle.sin();
    let dist = (dx * dx + dy * dy).sqrt();
    if dist < 1e-9 {
        return Err(SecError::DegenerateGeometry(format!(
            "node at ({:.3} m, {:.4} rad) coincides with the IRS",
            node.dist, node.angle
        )));
    }
    Ok(Offset { dist, sin_phi: -dy / dist, cos_phi: dx / dist })
}

/// IRS-relative geometry for every node in the topology.
pub fn irs_offsets(topology: &Topology) -> Result<IrsOffsets, SecError> {
    let users = topology
        .users
        .iter()
        .map(|&u| node_offset(topology.irs, u))
        .collect::<Result<Vec<_>, _>>()?;
    let eve = node_offset(topology.irs, topology.eve)?;
    Ok(IrsOffsets { users, eve })
}

/// Draws a topology: users uniform on D ~ U(20, 40) m, theta ~ U(-pi/2,
/// pi/2); the eavesdropper at `de_ratio * D_K` along user K's azimuth.
/// Layouts with any IRS distance below [`MIN_IRS_DISTANCE`] are resampled
/// (at most 100 times).
pub fn sample_topology(
    config: &SystemConfig,
    de_ratio: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Topology, SecError> {
    config.validate()?;
    if !(de_ratio > 0.0 && de_ratio < 1.0) {
        return Err(SecError::Domain("de_ratio must lie in (0, 1)".into()));
    }
    for _ in 0..100 {
        let users: Vec<Polar> = (0..config.k)
            .map(|_| {
                let d = rng.random_range(20.0..40.0);
                let th = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
                Polar::new(d, th)
            })
            .collect();
        let uk = *users.last().unwrap();
        let topo = Topology {
            irs: config.irs_position,
            users,
            eve: Polar::new(de_ratio * uk.dist, uk.angle),
        };
        match irs_offsets(&topo) {
            Ok(off) => {
                let min_d = off
                    .users
                    .iter()
                    .map(|o| o.dist)
                    .chain(std::iter::once(off.eve.dist))
                    .fold(f64::INFINITY, f64::min);
                if min_d >= MIN_IRS_DISTANCE {
                    return Ok(topo);
                }
            }
            Err(_) => continue,
        }
    }
    Err(SecError::DegenerateGeometry(
        "no admissible topology in 100 attempts".into(),
    ))
}

/// ULA steering vector: entry `n` is `exp(-j pi n sin(theta))`.
pub fn steering_ula(theta: f64, n: usize) -> CVector {
    CVector::from_fn(n, |i, _| {
        Complex::from_polar(1.0, -std::f64::consts::PI * i as f64 * theta.sin())
    })
}

/// UPA steering vector over an `mx x my` grid, vectorized as
/// `m = y*mx + x` (zero-based). The element phase is
/// `-pi (x cos(phi_i) cos(phi) + y sin(phi_i) cos(phi)) sin(theta_i)`.
pub fn steering_upa(
    sin_phi_i: f64,
    cos_phi_i: f64,
    phi_elev: f64,
    theta_i: f64,
    mx: usize,
    my: usize,
) -> CVector {
    let cos_elev = phi_elev.cos();
    let sin_theta = theta_i.sin();
    CVector::from_fn(mx * my, |m, _| {
        let x = (m % mx) as f64;
        let y = (m / mx) as f64;
        let phase =
            -std::f64::consts::PI * (x * cos_phi_i * cos_elev + y * sin_phi_i * cos_elev) * sin_theta;
        Complex::from_polar(1.0, phase)
    })
}

/// All channels of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS->node channels, length-N vectors; `g_users[k-1]` is user k.
    pub g_users: Vec<CVector>,
    pub g_eve: CVector,
    /// IRS->node channels, length-M vectors.
    pub h_users: Vec<CVector>,
    pub h_eve: CVector,
    /// Helper columns `h_1 .. h_{K-1}` (M x (K-1)).
    pub h_irs: CMatrix,
    /// Cascaded helper->IRS->user-K channel, column k = conj(h_K) ⊙ h_k.
    pub h_cascade_k: CMatrix,
    /// Cascaded helper->IRS->eavesdropper channel.
    pub h_cascade_e: CMatrix,
    /// Null-space basis of g_K (N x (N-1), orthonormal).
    pub q: CMatrix,
}

impl ChannelSet {
    pub fn n(&self) -> usize {
        self.g_users[0].len()
    }

    pub fn k(&self) -> usize {
        self.g_users.len()
    }

    pub fn m(&self) -> usize {
        self.h_users[0].len()
    }

    /// g of user K (the attacked user).
    pub fn g_user_k(&self) -> &CVector {
        self.g_users.last().unwrap()
    }
}

/// Cascaded matrix with columns `conj(h_dest) ⊙ h_k` for each helper column
/// of `h_irs`.
pub fn cascade(h_dest: &CVector, h_irs: &CMatrix) -> CMatrix {
    let m = h_irs.nrows();
    let kh = h_irs.ncols();
    CMatrix::from_fn(m, kh, |i, j| h_dest[i].conj() * h_irs[(i, j)])
}

fn complex_gaussian_vector(rng: &mut ChaCha8Rng, n: usize, variance_per_entry: f64) -> CVector {
    let s = (variance_per_entry / 2.0).sqrt();
    CVector::from_fn(n, |_, _| {
        C64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
    })
}

fn rician_vector(los: &CVector, rician: f64, pathloss: f64, rng: &mut ChaCha8Rng) -> CVector {
    let n = los.len();
    let nlos = complex_gaussian_vector(rng, n, 1.0);
    let a = (rician / (1.0 + rician)).sqrt();
    let b = (1.0 / (1.0 + rician)).sqrt();
    (los * C64::new(a, 0.0) + nlos * C64::new(b, 0.0)) * C64::new(pathloss.sqrt(), 0.0)
}

/// Draws one full channel realization. Draw order is fixed (all BS-side
/// channels for users 1..K then the eavesdropper, then the IRS-side ones in
/// the same order), so equal seeds give identical sets.
pub fn sample_channels(
    config: &SystemConfig,
    topology: &Topology,
    rng: &mut ChaCha8Rng,
) -> Result<ChannelSet, SecError> {
    topology.validate()?;
    let offsets = irs_offsets(topology)?;
    let n = config.n;
    let (mx, my) = (config.mx, config.my);

    let bs_pathloss =
        |d: f64| config.rho0 * (d / config.d0).powf(-config.alpha_bs);
    let irs_pathloss =
        |d: f64| config.rho0 * (d / config.d0).powf(-config.alpha_irs);

    let mut g_users = Vec::with_capacity(config.k);
    for node in &topology.users {
        let los = steering_ula(node.angle, n);
        g_users.push(rician_vector(&los, config.k_bs, bs_pathloss(node.dist), rng));
    }
    let g_eve = {
        let los = steering_ula(topology.eve.angle, n);
        rician_vector(&los, config.k_bs, bs_pathloss(topology.eve.dist), rng)
    };

    let mut h_users = Vec::with_capacity(config.k);
    for (node, off) in topology.users.iter().zip(&offsets.users) {
        let los = steering_upa(off.sin_phi, off.cos_phi, config.phi_elev, node.angle, mx, my);
        h_users.push(rician_vector(&los, config.k_irs, irs_pathloss(off.dist), rng));
    }
    let h_eve = {
        let off = offsets.eve;
        let los = steering_upa(off.sin_phi, off.cos_phi, config.phi_elev, topology.eve.angle, mx, my);
        rician_vector(&los, config.k_irs, irs_pathloss(off.dist), rng)
    };

    let kh = config.k - 1;
    let m = mx * my;
    let mut h_irs = CMatrix::zeros(m, kh);
    for j in 0..kh {
        h_irs.set_column(j, &h_users[j]);
    }
    let h_k = h_users.last().unwrap().clone();
    let h_cascade_k = cascade(&h_k, &h_irs);
    let h_cascade_e = cascade(&h_eve, &h_irs);
    let q = householder_null_basis(g_users.last().unwrap())?;

    Ok(ChannelSet {
        g_users,
        g_eve,
        h_users,
        h_eve,
        h_irs,
        h_cascade_k,
        h_cascade_e,
        q,
    })
}

/// Isotropic per-helper cascaded error variances: column k of the error is
/// CN(0, eps^2_k I_M).
#[derive(Debug, Clone, PartialEq)]
pub struct CsiErrorModel {
    /// eps^2 per helper column of the user-K cascade.
    pub lambda_k: Vec<f64>,
    /// eps^2 per helper column of the eavesdropper cascade.
    pub lambda_e: Vec<f64>,
}

impl CsiErrorModel {
    pub fn new(lambda_k: Vec<f64>, lambda_e: Vec<f64>) -> Result<Self, SecError> {
        if lambda_k.len() != lambda_e.len() {
            return Err(SecError::ShapeMismatch {
                expected: format!("{} variances", lambda_k.len()),
                got: format!("{}", lambda_e.len()),
            });
        }
        if lambda_k.iter().chain(&lambda_e).any(|&v| v < 0.0) {
            return Err(SecError::Domain("error variances must be >= 0".into()));
        }
        Ok(Self { lambda_k, lambda_e })
    }

    /// Relative errors scaled by cascaded-column energy:
    /// `eps^2_{K,k} = delta_K^2 ||conj(h_K) ⊙ h_k||^2` and likewise for the
    /// eavesdropper cascade.
    pub fn from_channels(config: &SystemConfig, channels: &ChannelSet) -> Self {
        let dk2 = config.delta_k * config.delta_k;
        let de2 = config.delta_e * config.delta_e;
        let lambda_k = (0..channels.h_cascade_k.ncols())
            .map(|j| dk2 * channels.h_cascade_k.column(j).norm_squared())
            .collect();
        let lambda_e = (0..channels.h_cascade_e.ncols())
            .map(|j| de2 * channels.h_cascade_e.column(j).norm_squared())
            .collect();
        Self { lambda_k, lambda_e }
    }

    pub fn helpers(&self) -> usize {
        self.lambda_k.len()
    }

    pub fn all_zero(&self) -> bool {
        self.lambda_k.iter().chain(&self.lambda_e).all(|&v| v == 0.0)
    }
}

/// Draws cascaded-channel error matrices; column k of each output is
/// CN(0, eps^2_k I_M), independent across columns and between the two.
pub fn sample_csi_errors(
    model: &CsiErrorModel,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> (CMatrix, CMatrix) {
    let kh = model.helpers();
    let mut delta_k = CMatrix::zeros(m, kh);
    for j in 0..kh {
        delta_k.set_column(j, &complex_gaussian_vector(rng, m, model.lambda_k[j]));
    }
    let mut delta_e = CMatrix::zeros(m, kh);
    for j in 0..kh {
        delta_e.set_column(j, &complex_gaussian_vector(rng, m, model.lambda_e[j]));
    }
    (delta_k, delta_e)
}

/// Estimated channel from a true one: `H_hat = H - Delta`, so the truth
/// decomposes as `H_hat + Delta`.
pub fn estimated_channels(true_h: &CMatrix, delta: &CMatrix) -> Result<CMatrix, SecError> {
    if true_h.shape() != delta.shape() {
        return Err(SecError::ShapeMismatch {
            expected: format!("{}x{}", true_h.nrows(), true_h.ncols()),
            got: format!("{}x{}", delta.nrows(), delta.ncols()),
        });
    }
    Ok(true_h - delta)
}
