//! What the two receivers observe: pilot matrices, the atomic receiver's
//! magnitude-only panel, and complex snapshots for the RF baseline.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::numerics::{hermitian_eig, sample_complex_gaussian, RngStream};
use crate::scene::{BiasVector, ChannelMatrix};
use crate::{CMatrix, Error, Result, C64};

/// Largest condition number of `S Sᴴ` a generated pilot matrix may have.
pub const MAX_PILOT_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PilotKind {
    /// i.i.d. uniformly random phases, unit modulus.
    #[default]
    UnitModulusRandomPhase,
    /// i.i.d. CN(0, 1).
    ComplexGaussian,
    /// Supplied by the caller.
    Provided,
}

/// Known pilot symbols, one row per user and one column per snapshot.
#[derive(Debug, Clone)]
pub struct PilotMatrix {
    pub entries: CMatrix,
    pub kind: PilotKind,
}

impl PilotMatrix {
    pub fn provided(entries: CMatrix) -> Self {
        Self {
            entries,
            kind: PilotKind::Provided,
        }
    }

    pub fn users(&self) -> usize {
        self.entries.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.entries.ncols()
    }

    pub fn gram_condition(&self) -> f64 {
        let gram = &self.entries * self.entries.adjoint();
        match hermitian_eig(&gram) {
            Ok(e) if !e.eigenvalues.is_empty() => {
                let lo = *e.eigenvalues.last().unwrap();
                if lo > 0.0 {
                    e.eigenvalues[0] / lo
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        }
    }
}

pub fn generate_pilots(rng: &mut RngStream, users: usize, snapshots: usize, kind: PilotKind) -> Result<PilotMatrix> {
    const MAX_DRAWS: usize = 64;
    if users == 0 {
        return Err(Error::invalid("pilots need at least one user"));
    }
    if snapshots < users {
        return Err(Error::invalid(format!(
            "{snapshots} pilot snapshots cannot identify {users} users"
        )));
    }
    for _ in 0..MAX_DRAWS {
        let entries = match kind {
            PilotKind::UnitModulusRandomPhase => CMatrix::from_fn(users, snapshots, |_, _| rng.unit_phasor()),
            PilotKind::ComplexGaussian => {
                CMatrix::from_vec(users, snapshots, sample_complex_gaussian(rng, users * snapshots, 1.0)?)
            }
            PilotKind::Provided => return Err(Error::invalid("cannot generate provided pilots")),
        };
        let pilots = PilotMatrix { entries, kind };
        if pilots.gram_condition() <= MAX_PILOT_CONDITION {
            return Ok(pilots);
        }
    }
    Err(Error::IllConditioned {
        matrix: format!("generated pilot matrix ({users}x{snapshots})"),
        condition: f64::INFINITY,
    })
}

/// Rabi-frequency magnitudes, one row per cell and one column per snapshot.
#[derive(Debug, Clone)]
pub struct MagnitudePanel {
    pub entries: DMatrix<f64>,
}

/// Complex RF snapshots, one row per element and one column per snapshot.
#[derive(Debug, Clone)]
pub struct ComplexPanel {
    pub entries: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Quantum shot noise power (atomic receiver).
    pub sigma_n_sq: f64,
    /// Johnson–Nyquist thermal noise power (RF receiver).
    pub sigma_t_sq: f64,
}

impl NoiseModel {
    pub fn new(sigma_n_sq: f64, sigma_t_sq: f64) -> Result<Self> {
        if !(sigma_n_sq >= 0.0) || !(sigma_t_sq >= 0.0) {
            return Err(Error::invalid("noise powers must be non-negative"));
        }
        Ok(Self { sigma_n_sq, sigma_t_sq })
    }

    pub fn noiseless() -> Self {
        Self {
            sigma_n_sq: 0.0,
            sigma_t_sq: 0.0,
        }
    }
}

fn check_users(channel: &ChannelMatrix, pilots: &PilotMatrix) -> Result<()> {
    if channel.users() != pilots.users() {
        return Err(Error::DimensionMismatch {
            axis: "user",
            expected: channel.users(),
            found: pilots.users(),
        });
    }
    Ok(())
}

/// Noiseless pre-magnitude interior `s_pᴴ a_m + b_m`, shape M×P.
pub fn noiseless_interior(channel: &ChannelMatrix, pilots: &PilotMatrix, bias: &BiasVector) -> Result<CMatrix> {
    check_users(channel, pilots)?;
    if bias.entries.len() != channel.elements() {
        return Err(Error::DimensionMismatch {
            axis: "element",
            expected: channel.elements(),
            found: bias.entries.len(),
        });
    }
    // (Aᵀ conj(S))[m,p] = Σ_k a_{m,k} conj(s_{k,p}) = s_pᴴ a_m
    let mut interior = &channel.entries * pilots.entries.map(|x| x.conj());
    for (m, mut row) in interior.row_iter_mut().enumerate() {
        row.add_scalar_mut(bias.entries[m]);
    }
    Ok(interior)
}

/// `z_{m,p} = |s_pᴴ a_m + b_m + n_{m,p}|`, with `n ~ CN(0, σ_n²)`.
pub fn synth_quantum_measurements(
    channel: &ChannelMatrix,
    pilots: &PilotMatrix,
    bias: &BiasVector,
    noise: &NoiseModel,
    rng: &mut RngStream,
) -> Result<MagnitudePanel> {
    let interior = noiseless_interior(channel, pilots, bias)?;
    let (m, p) = interior.shape();
    let n = sample_complex_gaussian(rng, m * p, noise.sigma_n_sq)?;
    // noise is drawn cell by cell, snapshot by snapshot
    let entries = DMatrix::from_fn(m, p, |row, col| (interior[(row, col)] + n[row * p + col]).norm());
    Ok(MagnitudePanel { entries })
}

/// Noiseless RF response `a_mᴴ s_p` (receive-side orientation `Aᴴ S`),
/// shape M×P. Equal in magnitude to the atomic receiver's interior without
/// bias.
pub fn noiseless_rf(channel: &ChannelMatrix, pilots: &PilotMatrix) -> Result<CMatrix> {
    check_users(channel, pilots)?;
    Ok(channel.entries.map(|x| x.conj()) * &pilots.entries)
}

/// `Y[m,p] = a_mᴴ s_p + n_{m,p}`, `n ~ CN(0, σ_t²)`; no reference signal.
pub fn synth_rf_snapshots(
    channel: &ChannelMatrix,
    pilots: &PilotMatrix,
    noise: &NoiseModel,
    rng: &mut RngStream,
) -> Result<ComplexPanel> {
    let clean = noiseless_rf(channel, pilots)?;
    let (m, p) = clean.shape();
    let n = sample_complex_gaussian(rng, m * p, noise.sigma_t_sq)?;
    let entries = CMatrix::from_fn(m, p, |row, col| clean[(row, col)] + n[row * p + col]);
    Ok(ComplexPanel { entries })
}

/// RMS over all entries of a complex panel.
pub fn panel_rms(panel: &CMatrix) -> f64 {
    if panel.is_empty() {
        return 0.0;
    }
    (panel.iter().map(C64::norm_sqr).sum::<f64>() / panel.len() as f64).sqrt()
}
