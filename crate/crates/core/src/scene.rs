//! Array geometry, atomic constants and synthesis of the effective channel
//! seen by the vapor-cell array.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::numerics::RngStream;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant (CODATA 2018), J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Elementary charge, C.
pub const ELECTRON_CHARGE: f64 = 1.602e-19;
/// Bohr radius, m.
pub const BOHR_RADIUS: f64 = 5.292e-11;
/// Transition dipole magnitude of 52D5/2 → 53P3/2 in units of q·a₀.
pub const DIPOLE_QA0: f64 = 1785.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicConstants {
    pub hbar: f64,
    /// Transition dipole moment μ_eg, C·m.
    pub dipole_moment: [f64; 3],
    /// Angular carrier frequency, rad/s.
    pub omega: f64,
    pub electron_charge: f64,
    pub bohr_radius: f64,
}

impl Default for AtomicConstants {
    /// The 5 GHz 52D5/2 → 53P3/2 transition with a y-polarized dipole.
    fn default() -> Self {
        Self {
            hbar: PLANCK / (2.0 * PI),
            dipole_moment: [0.0, DIPOLE_QA0 * ELECTRON_CHARGE * BOHR_RADIUS, 0.0],
            omega: 2.0 * PI * 5e9,
            electron_charge: ELECTRON_CHARGE,
            bohr_radius: BOHR_RADIUS,
        }
    }
}

impl AtomicConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0) || !(self.omega > 0.0) {
            return Err(Error::invalid("hbar and omega must be positive"));
        }
        if self.dipole_moment.iter().all(|&x| x == 0.0) {
            return Err(Error::invalid("dipole moment must have a nonzero component"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.omega
    }

    pub fn dipole_norm(&self) -> f64 {
        self.dipole_moment.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Which trigonometric function of the arrival angle drives the
/// inter-element phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SteeringConvention {
    /// Phase ∝ sin θ, θ measured from broadside.
    Sine,
    /// Phase ∝ cos θ, θ measured from the array axis. One-to-one on
    /// (0°, 180°).
    #[default]
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    elements: usize,
    spacing: f64,
    wavelength: f64,
    convention: SteeringConvention,
}

impl ArrayGeometry {
    pub fn new(elements: usize, spacing: f64, wavelength: f64, convention: SteeringConvention) -> Result<Self> {
        if elements == 0 {
            return Err(Error::invalid("array needs at least one element"));
        }
        if !(spacing > 0.0) || !(wavelength > 0.0) {
            return Err(Error::invalid("element spacing and wavelength must be positive"));
        }
        Ok(Self {
            elements,
            spacing,
            wavelength,
            convention,
        })
    }

    /// Uniform linear array with spacing `d_over_lambda · λ`.
    pub fn uniform(elements: usize, d_over_lambda: f64, wavelength: f64, convention: SteeringConvention) -> Result<Self> {
        Self::new(elements, d_over_lambda * wavelength, wavelength, convention)
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn convention(&self) -> SteeringConvention {
        self.convention
    }

    /// Phase advance between adjacent elements, `2π d f(θ) / λ`.
    pub fn phase_step(&self, theta: f64) -> f64 {
        let f = match self.convention {
            SteeringConvention::Sine => theta.sin(),
            SteeringConvention::Cosine => theta.cos(),
        };
        2.0 * PI * self.spacing * f / self.wavelength
    }
}

/// Far-field ULA response, `(1/√M)·exp(−j·m·ψ(θ))` for m = 0..M−1.
pub fn steering_vector(theta: f64, geom: &ArrayGeometry) -> CVector {
    let m = geom.elements();
    let step = geom.phase_step(theta);
    let amp = 1.0 / (m as f64).sqrt();
    CVector::from_iterator(m, (0..m).map(|i| C64::from_polar(amp, -(i as f64) * step)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserSet {
    angles: Vec<f64>,
    per_user_power: f64,
    alpha: f64,
}

impl UserSet {
    /// `angles` in radians; every user gets `per_user_power`.
    pub fn new(angles: Vec<f64>, per_user_power: f64, alpha: f64, min_separation: f64) -> Result<Self> {
        if angles.is_empty() {
            return Ok(Self {
                angles,
                per_user_power,
                alpha,
            });
        }
        if !(per_user_power > 0.0) || !per_user_power.is_finite() {
            return Err(Error::invalid(format!("per-user power must be positive, got {per_user_power}")));
        }
        if !alpha.is_finite() {
            return Err(Error::invalid("channel gain must be finite"));
        }
        let mut sorted = angles.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[1] - w[0] < min_separation) {
            return Err(Error::invalid("user angles closer than the minimum separation"));
        }
        Ok(Self {
            angles,
            per_user_power,
            alpha,
        })
    }

    /// Splits `total_power` evenly over the users.
    pub fn with_total_power(angles: Vec<f64>, total_power: f64, alpha: f64, min_separation: f64) -> Result<Self> {
        let k = angles.len().max(1);
        Self::new(angles, total_power / k as f64, alpha, min_separation)
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn per_user_power(&self) -> f64 {
        self.per_user_power
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Draws `k` angles uniformly on `[lo, hi)` (radians), rejecting draws that
/// put any pair closer than `min_separation`.
pub fn sample_angles(rng: &mut RngStream, k: usize, lo: f64, hi: f64, min_separation: f64) -> Result<Vec<f64>> {
    const MAX_ATTEMPTS: usize = 10_000;
    if !(hi > lo) {
        return Err(Error::invalid("empty angle range"));
    }
    for _ in 0..MAX_ATTEMPTS {
        let draw: Vec<f64> = (0..k).map(|_| rng.uniform_in(lo, hi)).collect();
        let mut sorted = draw.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).all(|w| w[1] - w[0] >= min_separation) {
            return Ok(draw);
        }
    }
    Err(Error::invalid(format!(
        "could not place {k} users with the requested separation in the angle range"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationMode {
    /// One polarization draw per user, shared by every cell.
    #[default]
    PerUser,
    /// An independent draw for every (cell, user) pair.
    PerCell,
}

/// How the dipole projection is scaled into channel units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnitSystem {
    /// Gain divided by its RMS `‖μ‖/√3`; powers are variances of the
    /// received terms directly.
    #[default]
    Normalized,
    /// Gain divided by ħ, giving Rabi frequencies in rad/s per √W.
    Physical,
}

impl UnitSystem {
    pub fn gain_scale(self, consts: &AtomicConstants) -> f64 {
        match self {
            UnitSystem::Normalized => 3f64.sqrt() / consts.dipole_norm(),
            UnitSystem::Physical => 1.0 / consts.hbar,
        }
    }
}

/// `μ_egᵀ ε` with each polarization component drawn from N(0, 1/3).
pub fn dipole_projection_gain(rng: &mut RngStream, consts: &AtomicConstants) -> f64 {
    let sd = (1.0f64 / 3.0).sqrt();
    consts
        .dipole_moment
        .iter()
        .map(|&mu| mu * sd * rng.standard_normal())
        .sum()
}

/// Effective atomic channel, one row per cell and one column per user.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    pub entries: CMatrix,
    /// Realized scaled dipole projections, same shape as `entries`.
    pub polarization_gains: nalgebra::DMatrix<f64>,
}

impl ChannelMatrix {
    pub fn elements(&self) -> usize {
        self.entries.nrows()
    }

    pub fn users(&self) -> usize {
        self.entries.ncols()
    }

    /// Builds `a_{m,k} = g_{m,k}·√P_k·α·exp(+j·m·ψ(θ_k))` from given gains.
    ///
    /// The channel phase runs opposite to [`steering_vector`], so column k is
    /// proportional to `conj(a(θ_k))`; the conjugate-transpose assembly of the
    /// recovered channel then lands back on the steering manifold.
    pub fn from_gains(geom: &ArrayGeometry, users: &UserSet, gains: nalgebra::DMatrix<f64>) -> Result<Self> {
        let (m, k) = (geom.elements(), users.len());
        if gains.shape() != (m, k) {
            return Err(Error::DimensionMismatch {
                axis: "polarization gain",
                expected: m * k,
                found: gains.len(),
            });
        }
        let amp = users.per_user_power().sqrt() * users.alpha();
        let entries = CMatrix::from_fn(m, k, |row, col| {
            let step = geom.phase_step(users.angles()[col]);
            C64::from_polar(gains[(row, col)] * amp, row as f64 * step)
        });
        Ok(Self {
            entries,
            polarization_gains: gains,
        })
    }
}

pub fn generate_channel(
    rng: &mut RngStream,
    geom: &ArrayGeometry,
    users: &UserSet,
    consts: &AtomicConstants,
    mode: PolarizationMode,
    units: UnitSystem,
) -> Result<ChannelMatrix> {
    consts.validate()?;
    let (m, k) = (geom.elements(), users.len());
    let scale = units.gain_scale(consts);
    let gains = match mode {
        PolarizationMode::PerUser => {
            let per_user: Vec<f64> = (0..k).map(|_| scale * dipole_projection_gain(rng, consts)).collect();
            nalgebra::DMatrix::from_fn(m, k, |_, col| per_user[col])
        }
        PolarizationMode::PerCell => {
            let mut g = nalgebra::DMatrix::zeros(m, k);
            for row in 0..m {
                for col in 0..k {
                    g[(row, col)] = scale * dipole_projection_gain(rng, consts);
                }
            }
            g
        }
    };
    ChannelMatrix::from_gains(geom, users, gains)
}

/// Holographic reference seen by each cell, constant over all pilot
/// snapshots.
#[derive(Debug, Clone)]
pub struct BiasVector {
    pub entries: CVector,
    pub bias_ratio: f64,
}

/// Reference of magnitude `bias_ratio · signal_rms` at every cell with a
/// uniformly random phase. The LO-path polarization draw only contributes its
/// sign, which is absorbed into the phase.
pub fn generate_bias(
    rng: &mut RngStream,
    geom: &ArrayGeometry,
    consts: &AtomicConstants,
    bias_ratio: f64,
    signal_rms: f64,
) -> Result<BiasVector> {
    if !(bias_ratio >= 0.0) || !bias_ratio.is_finite() {
        return Err(Error::invalid(format!("bias ratio must be non-negative, got {bias_ratio}")));
    }
    if !(signal_rms > 0.0) || !signal_rms.is_finite() {
        return Err(Error::invalid(format!("signal RMS must be positive, got {signal_rms}")));
    }
    let magnitude = bias_ratio * signal_rms;
    let entries = CVector::from_iterator(
        geom.elements(),
        (0..geom.elements()).map(|_| {
            let phasor = rng.unit_phasor();
            let sign = if dipole_projection_gain(rng, consts) < 0.0 { -1.0 } else { 1.0 };
            phasor * (sign * magnitude)
        }),
    );
    Ok(BiasVector { entries, bias_ratio })
}

/// Excited-state population `sin²(Ω t / 2)` after resonant driving for `t`.
pub fn rabi_excitation_probability(rabi_frequency: f64, t: f64) -> f64 {
    (0.5 * rabi_frequency * t).sin().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_wave(m: usize, convention: SteeringConvention) -> ArrayGeometry {
        ArrayGeometry::uniform(m, 0.5, 1.0, convention).unwrap()
    }

    fn rank_one_residual(col: &CVector, reference: &CVector) -> f64 {
        // ‖col − (refᴴcol / ‖ref‖²)·ref‖ / ‖col‖
        let coef = reference.dotc(col) / reference.norm_squared();
        (col - reference * coef).norm() / col.norm()
    }

    #[test]
    fn single_element_steering() {
        let g = half_wave(1, SteeringConvention::Sine);
        let a = steering_vector(0.7, &g);
        assert_eq!(a.len(), 1);
        assert!((a[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_phase_gradient() {
        let g = half_wave(4, SteeringConvention::Sine);
        let a = steering_vector(0.0, &g);
        for x in a.iter() {
            assert!((x - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
        let g = half_wave(4, SteeringConvention::Cosine);
        let a = steering_vector(PI / 2.0, &g);
        for x in a.iter() {
            assert!((x - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn endfire_half_wave_alternates() {
        let g = half_wave(2, SteeringConvention::Sine);
        let a = steering_vector(PI / 2.0, &g);
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((a[1] - C64::new(-s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn steering_norm_and_collisions() {
        let g = half_wave(16, SteeringConvention::Sine);
        for i in 0..50 {
            let t = -1.5 + 0.06 * i as f64;
            let a = steering_vector(t, &g);
            assert!((a.norm() - 1.0).abs() < 1e-12);
            for x in a.iter() {
                assert!((x.norm() - 0.25).abs() < 1e-15);
            }
        }
        // sin θ = sin(π − θ): identical responses
        let a = steering_vector(0.4, &g);
        let b = steering_vector(PI - 0.4, &g);
        assert!((a.dotc(&b).norm() - 1.0).abs() < 1e-12);
        let c = steering_vector(0.5, &g);
        assert!(a.dotc(&c).norm() < 1.0 - 1e-3);
    }

    #[test]
    fn dipole_gain_degenerate_and_variance() {
        let mut rng = RngStream::new(1, 0);
        let zero = AtomicConstants {
            dipole_moment: [0.0; 3],
            ..AtomicConstants::default()
        };
        assert_eq!(dipole_projection_gain(&mut rng, &zero), 0.0);

        let unit = AtomicConstants {
            dipole_moment: [0.0, 1.0, 0.0],
            ..AtomicConstants::default()
        };
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| dipole_projection_gain(&mut rng, &unit)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0 / 3.0).abs() < 0.01, "variance {var}");
    }

    #[test]
    fn dipole_gain_rydberg_scale() {
        let consts = AtomicConstants::default();
        let mu = 1785.9 * 1.602e-19 * 5.292e-11;
        assert!((consts.dipole_norm() - mu).abs() < 1e-12 * mu);
        let mut rng = RngStream::new(2, 0);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| dipole_projection_gain(&mut rng, &consts)).collect();
        let sd = (draws.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
        let want = mu / 3f64.sqrt();
        assert!((sd / want - 1.0).abs() < 0.01, "sd {sd:e} vs {want:e}");
    }

    #[test]
    fn empty_user_set_gives_empty_channel() {
        let g = half_wave(4, SteeringConvention::Cosine);
        let users = UserSet::new(vec![], 1.0, 1.0, 0.0).unwrap();
        let a = generate_channel(
            &mut RngStream::new(0, 0),
            &g,
            &users,
            &AtomicConstants::default(),
            PolarizationMode::PerUser,
            UnitSystem::Normalized,
        )
        .unwrap();
        assert_eq!(a.entries.shape(), (4, 0));
    }

    #[test]
    fn hand_evaluated_two_element_channel() {
        let g = half_wave(2, SteeringConvention::Sine);
        let users = UserSet::new(vec![PI / 2.0], 1.0, 1.0, 0.0).unwrap();
        let a = ChannelMatrix::from_gains(&g, &users, nalgebra::DMatrix::from_element(2, 1, 1.0)).unwrap();
        assert!((a.entries[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a.entries[(1, 0)] - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn per_user_columns_pair_with_conjugate_steering() {
        let g = half_wave(12, SteeringConvention::Cosine);
        let angles = vec![0.7, 1.3, 2.2];
        let users = UserSet::new(angles.clone(), 1.0, 1.0, 0.01).unwrap();
        let a = generate_channel(
            &mut RngStream::new(3, 0),
            &g,
            &users,
            &AtomicConstants::default(),
            PolarizationMode::PerUser,
            UnitSystem::Normalized,
        )
        .unwrap();
        for (k, &theta) in angles.iter().enumerate() {
            let col = a.entries.column(k).into_owned();
            let steer = steering_vector(theta, &g).map(|x| x.conj());
            assert!(rank_one_residual(&col, &steer) < 1e-9);
            // elementwise: column = g_k · √M · conj(a(θ_k))
            let gk = a.polarization_gains[(0, k)];
            let want = steer.scale(gk * (12f64).sqrt());
            assert!((col - want).norm() < 1e-12 * gk.abs().max(1.0));
        }
    }

    #[test]
    fn per_cell_breaks_manifold() {
        let g = half_wave(12, SteeringConvention::Cosine);
        let users = UserSet::new(vec![1.0], 1.0, 1.0, 0.0).unwrap();
        let a = generate_channel(
            &mut RngStream::new(3, 0),
            &g,
            &users,
            &AtomicConstants::default(),
            PolarizationMode::PerCell,
            UnitSystem::Normalized,
        )
        .unwrap();
        let col = a.entries.column(0).into_owned();
        let steer = steering_vector(1.0, &g).map(|x| x.conj());
        assert!(rank_one_residual(&col, &steer) > 1e-3);
    }

    #[test]
    fn channel_scales_with_sqrt_power() {
        let g = half_wave(8, SteeringConvention::Cosine);
        let consts = AtomicConstants::default();
        let build = |p: f64| {
            let users = UserSet::new(vec![0.9, 1.9], p, 1.0, 0.01).unwrap();
            generate_channel(&mut RngStream::new(5, 1), &g, &users, &consts, PolarizationMode::PerUser, UnitSystem::Normalized)
                .unwrap()
        };
        let a1 = build(1.0);
        let a2 = build(2.0);
        assert!((a2.entries - a1.entries.scale(2f64.sqrt())).norm() < 1e-14);
    }

    #[test]
    fn bias_contracts() {
        let g = half_wave(6, SteeringConvention::Cosine);
        let consts = AtomicConstants::default();
        let zero = generate_bias(&mut RngStream::new(1, 0), &g, &consts, 0.0, 1.0).unwrap();
        assert!(zero.entries.iter().all(|x| x.norm() == 0.0));

        let b = generate_bias(&mut RngStream::new(1, 0), &g, &consts, 5.0, 1.0).unwrap();
        for x in b.entries.iter() {
            assert!((x.norm() - 5.0).abs() < 1e-12);
        }
        let again = generate_bias(&mut RngStream::new(1, 0), &g, &consts, 5.0, 1.0).unwrap();
        assert_eq!(b.entries, again.entries);

        assert!(generate_bias(&mut RngStream::new(1, 0), &g, &consts, -1.0, 1.0).is_err());
        assert!(generate_bias(&mut RngStream::new(1, 0), &g, &consts, 1.0, 0.0).is_err());
    }

    #[test]
    fn rabi_formula_examples() {
        assert_eq!(rabi_excitation_probability(3.0, 0.0), 0.0);
        assert!((rabi_excitation_probability(PI, 1.0) - 1.0).abs() < 1e-15);
        assert!((rabi_excitation_probability(PI / 2.0, 1.0) - 0.5).abs() < 1e-15);
        let omega = 2.7;
        let t = 0.37;
        let period = 2.0 * PI / omega;
        assert!((rabi_excitation_probability(omega, t) - rabi_excitation_probability(omega, t + period)).abs() < 1e-12);
    }

    #[test]
    fn angle_sampling_respects_separation() {
        let mut rng = RngStream::new(8, 0);
        let sep = 2f64.to_radians();
        for _ in 0..200 {
            let a = sample_angles(&mut rng, 4, 30f64.to_radians(), 150f64.to_radians(), sep).unwrap();
            assert_eq!(a.len(), 4);
            let mut s = a.clone();
            s.sort_by(f64::total_cmp);
            assert!(s.windows(2).all(|w| w[1] - w[0] >= sep));
            assert!(s[0] >= 30f64.to_radians() && s[3] < 150f64.to_radians());
        }
        assert!(sample_angles(&mut rng, 3, 0.0, 0.01, 0.1).is_err());
    }

    #[test]
    fn user_set_rejects_close_angles() {
        assert!(UserSet::new(vec![1.0, 1.001], 1.0, 1.0, 0.01).is_err());
        assert!(UserSet::new(vec![1.0], 0.0, 1.0, 0.01).is_err());
        let u = UserSet::with_total_power(vec![0.6, 1.2, 1.8, 2.4], 1.0, 1.0, 0.01).unwrap();
        assert_eq!(u.per_user_power(), 0.25);
    }
}
