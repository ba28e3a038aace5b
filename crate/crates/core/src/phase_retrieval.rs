//! Channel recovery from magnitude-only panels.
//!
//! Each cell is solved independently: a spectral initializer built from the
//! pilot matrix expanded with the known reference row, then a fixed number
//! of biased Gerchberg–Saxton iterations that alternate between guessing the
//! missing phases and a least-squares fit of the channel.

use serde::{Deserialize, Serialize};

use crate::measurement::{MagnitudePanel, PilotMatrix};
use crate::numerics::{principal_eigenvector, LeastSquares};
use crate::scene::BiasVector;
use crate::{CMatrix, CVector, Error, Result, C64};

/// Pilot matrix together with its prefactored least-squares solver and `Sᴴ`.
#[derive(Debug, Clone)]
pub struct PilotSystem {
    pilots: CMatrix,
    pilots_h: CMatrix,
    solver: LeastSquares,
}

impl PilotSystem {
    pub fn new(pilots: &PilotMatrix) -> Result<Self> {
        Ok(Self {
            pilots: pilots.entries.clone(),
            pilots_h: pilots.entries.adjoint(),
            solver: LeastSquares::new(&pilots.entries)?,
        })
    }

    pub fn users(&self) -> usize {
        self.pilots.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.pilots.ncols()
    }

    pub fn pilots(&self) -> &CMatrix {
        &self.pilots
    }

    /// `Sᴴ a + b` for a constant reference `b`.
    pub fn interior(&self, a: &CVector, bias: C64) -> CVector {
        (&self.pilots_h * a).add_scalar(bias)
    }

    pub fn solve(&self, rhs: &CVector) -> Result<CVector> {
        self.solver.solve(rhs)
    }
}

/// Pilot matrix with the reference appended as an extra "user" row, so the
/// measurement reads `z = |S̄ᴴ ā|` with `ā = [a; 1]`.
#[derive(Debug, Clone)]
pub struct ExpandedSystem {
    s_bar: CMatrix,
}

impl ExpandedSystem {
    pub fn new(pilots: &CMatrix, bias: C64) -> Self {
        let (k, p) = pilots.shape();
        let mut s_bar = CMatrix::zeros(k + 1, p);
        s_bar.rows_mut(0, k).copy_from(pilots);
        s_bar.row_mut(k).fill(bias.conj());
        Self { s_bar }
    }

    pub fn users(&self) -> usize {
        self.s_bar.nrows() - 1
    }

    pub fn snapshots(&self) -> usize {
        self.s_bar.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.s_bar
    }

    /// The cell reference `b`.
    pub fn bias(&self) -> C64 {
        if self.s_bar.ncols() == 0 {
            return C64::new(0.0, 0.0);
        }
        self.s_bar[(self.users(), 0)].conj()
    }
}

/// How the expanded initial point is reduced to the K channel entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitTruncation {
    /// Keep the first K entries of `r̄·v` as they are.
    #[default]
    Verbatim,
    /// Divide by the reference entry first so that it equals 1.
    NormalizeByLast,
}

#[derive(Debug, Clone)]
pub struct SpectralInit {
    /// `ā⁰`, first K entries in measurement units.
    pub expanded: CVector,
    /// The magnitude factor `r̄`.
    pub radius: f64,
    /// `a⁰`, the first K entries after truncation.
    pub channel: CVector,
}

fn check_measurements(z: &[f64], snapshots: usize) -> Result<()> {
    if z.len() != snapshots {
        return Err(Error::DimensionMismatch {
            axis: "snapshot",
            expected: snapshots,
            found: z.len(),
        });
    }
    if z.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid("magnitude measurements must be finite and non-negative"));
    }
    Ok(())
}

/// Spectral initial point for one cell.
///
/// Builds `R̄ = Σ_p z_p s̄_p s̄_pᴴ`, takes its principal eigenvector `v`, and
/// scales it by `r̄ = (|vᴴS̄| z) / ‖S̄ᴴv‖²`. The computation runs on `z` and
/// the reference divided by `rms(z)/2` (results are mapped back afterwards), which makes the initializer homogeneous in the
/// measurement scale.
pub fn spectral_init(system: &ExpandedSystem, z: &[f64], truncation: InitTruncation) -> Result<SpectralInit> {
    let k = system.users();
    let p = system.snapshots();
    check_measurements(z, p)?;
    if p < k + 1 {
        return Err(Error::invalid(format!(
            "spectral initialization needs at least {} snapshots, got {p}",
            k + 1
        )));
    }

    // Work in units where rms(z) = 2, so the reference row outweighs the
    // unit-modulus pilot rows whenever the bias dominates the interior.
    let rms = (z.iter().map(|x| x * x).sum::<f64>() / p as f64).sqrt();
    let scale = if rms > 0.0 && rms.is_finite() { rms / 2.0 } else { 1.0 };
    let mut s_bar = system.matrix().clone();
    s_bar.row_mut(k).iter_mut().for_each(|x| *x /= scale);
    let zn: Vec<f64> = z.iter().map(|x| x / scale).collect();

    let mut weighted = s_bar.clone();
    for (mut col, &w) in weighted.column_iter_mut().zip(&zn) {
        col.scale_mut(w);
    }
    let r_bar = &weighted * s_bar.adjoint();
    let v = principal_eigenvector(&r_bar)?;

    let response = s_bar.adjoint() * &v;
    let num: f64 = response.iter().zip(&zn).map(|(r, z)| r.norm() * z).sum();
    let den: f64 = response.iter().map(C64::norm_sqr).sum();
    if !(den > 0.0) {
        return Err(Error::DegeneratePilot);
    }
    let radius = num / den;
    let a_bar = v.scale(radius);

    let mut expanded = a_bar.clone();
    expanded.rows_mut(0, k).iter_mut().for_each(|x| *x *= scale);

    let channel = match truncation {
        InitTruncation::Verbatim => expanded.rows(0, k).into_owned(),
        InitTruncation::NormalizeByLast => {
            let last = a_bar[k];
            if !(last.norm() > 1e-12 * a_bar.norm()) {
                return Err(Error::invalid("initial point has no reference component to normalize by"));
            }
            a_bar.rows(0, k).map(|x| x * scale / last)
        }
    };
    Ok(SpectralInit {
        expanded,
        radius,
        channel,
    })
}

#[derive(Debug, Clone)]
pub struct GsState {
    pub a: CVector,
    pub iteration: usize,
    /// `‖z ∘ e^{j∠z̄} − Sᴴa − b‖²` at the best phases for `a`, which is
    /// `Σ_p (z_p − |s_pᴴa + b|)²`.
    pub objective: f64,
}

impl GsState {
    pub fn start(system: &PilotSystem, bias: C64, z: &[f64], a: CVector) -> Result<Self> {
        check_measurements(z, system.snapshots())?;
        let objective = gs_objective(system, bias, z, &a);
        Ok(Self {
            a,
            iteration: 0,
            objective,
        })
    }
}

pub fn gs_objective(system: &PilotSystem, bias: C64, z: &[f64], a: &CVector) -> f64 {
    system
        .interior(a, bias)
        .iter()
        .zip(z)
        .map(|(w, z)| (z - w.norm()).powi(2))
        .sum()
}

fn unit_phase(w: C64) -> C64 {
    let r = w.norm();
    if r > 0.0 {
        w / r
    } else {
        C64::new(1.0, 0.0)
    }
}

/// One alternating-minimization step: phases from the current model, then
/// `a ← (SSᴴ)⁻¹ S (z ∘ e^{j∠z̄} − b)`.
pub fn gs_step(state: &GsState, system: &PilotSystem, bias: C64, z: &[f64]) -> Result<GsState> {
    let interior = system.interior(&state.a, bias);
    let rhs = CVector::from_iterator(
        z.len(),
        interior.iter().zip(z).map(|(w, &zp)| unit_phase(*w) * zp - bias),
    );
    let a = system.solve(&rhs)?;
    let objective = gs_objective(system, bias, z, &a);
    Ok(GsState {
        a,
        iteration: state.iteration + 1,
        objective,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub iterations: usize,
    pub truncation: InitTruncation,
    /// Stop once an iteration improves the objective by less than this.
    pub early_exit_tol: Option<f64>,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            iterations: 50,
            truncation: InitTruncation::Verbatim,
            early_exit_tol: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellRecovery {
    pub channel: CVector,
    pub initial: CVector,
    /// Objective before the first step and after every step.
    pub objective_trace: Vec<f64>,
}

impl CellRecovery {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().unwrap()
    }
}

pub fn recover_cell_channel(system: &PilotSystem, bias: C64, z: &[f64], opts: &RecoveryOptions) -> Result<CellRecovery> {
    let expanded = ExpandedSystem::new(system.pilots(), bias);
    let init = spectral_init(&expanded, z, opts.truncation)?;
    let mut state = GsState::start(system, bias, z, init.channel.clone())?;
    let mut trace = Vec::with_capacity(opts.iterations + 1);
    trace.push(state.objective);
    for _ in 0..opts.iterations {
        let next = gs_step(&state, system, bias, z)?;
        let gain = state.objective - next.objective;
        trace.push(next.objective);
        state = next;
        if opts.early_exit_tol.is_some_and(|tol| gain < tol) {
            break;
        }
    }
    Ok(CellRecovery {
        channel: state.a,
        initial: init.channel,
        objective_trace: trace,
    })
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// `Â = [â_1 … â_M]ᴴ`, M×K.
    pub matrix: CMatrix,
    pub final_objectives: Vec<f64>,
}

/// Recovers every cell and assembles `Â` with row m equal to `â_mᴴ`.
pub fn recover_channel_matrix(
    system: &PilotSystem,
    bias: &BiasVector,
    panel: &MagnitudePanel,
    opts: &RecoveryOptions,
) -> Result<ChannelEstimate> {
    let (m, p) = panel.entries.shape();
    if bias.entries.len() != m {
        return Err(Error::DimensionMismatch {
            axis: "element",
            expected: m,
            found: bias.entries.len(),
        });
    }
    if p != system.snapshots() {
        return Err(Error::DimensionMismatch {
            axis: "snapshot",
            expected: system.snapshots(),
            found: p,
        });
    }
    let k = system.users();
    let mut matrix = CMatrix::zeros(m, k);
    let mut final_objectives = Vec::with_capacity(m);
    for cell in 0..m {
        let z: Vec<f64> = panel.entries.row(cell).iter().copied().collect();
        let rec = recover_cell_channel(system, bias.entries[cell], &z, opts).map_err(|e| e.in_cell(cell))?;
        for (j, x) in rec.channel.iter().enumerate() {
            matrix[(cell, j)] = x.conj();
        }
        final_objectives.push(rec.final_objective());
    }
    Ok(ChannelEstimate {
        matrix,
        final_objectives,
    })
}
