//! MUSIC subspace estimation shared by the quantum path (recovered channel
//! covariance) and the RF baseline (snapshot covariance).

use crate::measurement::ComplexPanel;
use crate::numerics::hermitian_eig;
use crate::scene::{steering_vector, ArrayGeometry};
use crate::{CMatrix, Error, Result};

/// Lower clamp on the pseudospectrum denominator.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// `(1/P)·Â·Âᴴ`.
pub fn channel_covariance(a_hat: &CMatrix, snapshots: usize) -> Result<CMatrix> {
    if snapshots == 0 {
        return Err(Error::invalid("covariance normalization needs P >= 1"));
    }
    Ok((a_hat * a_hat.adjoint()).unscale(snapshots as f64))
}

/// Sample covariance `(1/P)·Y·Yᴴ` of an RF snapshot panel.
pub fn snapshot_covariance(panel: &ComplexPanel) -> Result<CMatrix> {
    channel_covariance(&panel.entries, panel.entries.ncols())
}

#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    /// `U_S`, M×K.
    pub signal_basis: CMatrix,
    /// `U_N`, M×(M−K).
    pub noise_basis: CMatrix,
    /// Descending.
    pub eigenvalues: Vec<f64>,
}

pub fn subspace_split(r: &CMatrix, sources: usize) -> Result<SubspaceSplit> {
    let m = r.nrows();
    if sources == 0 || sources >= m {
        return Err(Error::invalid(format!(
            "need 1 <= K < M for a noise subspace, got K={sources}, M={m}"
        )));
    }
    let eig = hermitian_eig(r)?;
    Ok(SubspaceSplit {
        signal_basis: eig.eigenvectors.columns(0, sources).into_owned(),
        noise_basis: eig.eigenvectors.columns(sources, m - sources).into_owned(),
        eigenvalues: eig.eigenvalues,
    })
}

/// Uniform angle grid `lo + i·(hi − lo)/G`, i = 0..G−1, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGrid {
    pub lo_deg: f64,
    pub hi_deg: f64,
    pub size: usize,
}

impl AngleGrid {
    pub fn new(lo_deg: f64, hi_deg: f64, size: usize) -> Result<Self> {
        if !(hi_deg > lo_deg) || size < 2 {
            return Err(Error::invalid("angle grid needs hi > lo and at least 2 points"));
        }
        Ok(Self { lo_deg, hi_deg, size })
    }

    pub fn step_deg(&self) -> f64 {
        (self.hi_deg - self.lo_deg) / self.size as f64
    }

    pub fn angle_deg(&self, i: usize) -> f64 {
        self.lo_deg + i as f64 * self.step_deg()
    }

    pub fn angles_deg(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.angle_deg(i)).collect()
    }
}

/// Steering vectors for every grid angle, computed once per geometry.
#[derive(Debug, Clone)]
pub struct SteeringGrid {
    grid: AngleGrid,
    angles: Vec<f64>,
    // M×G, column g is a(θ_g)
    vectors: CMatrix,
}

impl SteeringGrid {
    pub fn new(geom: &ArrayGeometry, grid: AngleGrid) -> Self {
        let angles: Vec<f64> = grid.angles_deg().iter().map(|d| d.to_radians()).collect();
        let m = geom.elements();
        let mut vectors = CMatrix::zeros(m, grid.size);
        for (g, &theta) in angles.iter().enumerate() {
            vectors.set_column(g, &steering_vector(theta, geom));
        }
        Self { grid, angles, vectors }
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn elements(&self) -> usize {
        self.vectors.nrows()
    }
}

#[derive(Debug, Clone)]
pub struct Pseudospectrum {
    /// Radians.
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
}

/// `P(θ) = 1 / (a(θ)ᴴ U_N U_Nᴴ a(θ))` over the grid, with the denominator
/// clamped at [`DENOMINATOR_FLOOR`].
pub fn pseudospectrum(split: &SubspaceSplit, steering: &SteeringGrid) -> Result<Pseudospectrum> {
    let m = steering.elements();
    if split.noise_basis.nrows() != m {
        return Err(Error::DimensionMismatch {
            axis: "element",
            expected: m,
            found: split.noise_basis.nrows(),
        });
    }
    let noise = split.noise_basis.as_slice();
    let cols = split.noise_basis.ncols();
    let values = steering
        .vectors
        .as_slice()
        .chunks_exact(m)
        .map(|a| {
            let mut denom = 0.0;
            for j in 0..cols {
                let u = &noise[j * m..(j + 1) * m];
                let proj: crate::C64 = u.iter().zip(a).map(|(u, a)| u.conj() * a).sum();
                denom += proj.norm_sqr();
            }
            1.0 / denom.max(DENOMINATOR_FLOOR)
        })
        .collect();
    Ok(Pseudospectrum {
        angles: steering.angles.clone(),
        values,
    })
}

/// Indices of local maxima. A run of equal values counts once, at its
/// leftmost index, when it is strictly above both outer neighbours; grid
/// endpoints only need to beat their single neighbour.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_ok = i == 0 || values[i - 1] < values[i];
        let right_ok = j == n - 1 || values[j + 1] < values[i];
        let has_neighbour = i > 0 || j < n - 1;
        if left_ok && right_ok && has_neighbour {
            peaks.push(i);
        }
        i = j + 1;
    }
    peaks
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoAEstimate {
    /// Radians, ascending.
    pub angles: Vec<f64>,
    /// Grid indices matching `angles`.
    pub indices: Vec<usize>,
    /// Fewer than K local maxima existed and the estimate was padded with the
    /// highest non-peak grid points.
    pub padded: bool,
}

pub fn find_peaks(spec: &Pseudospectrum, sources: usize) -> AoAEstimate {
    let values = &spec.values;
    let by_height = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));

    let mut peaks = local_maxima(values);
    peaks.sort_by(by_height);
    peaks.truncate(sources);

    let padded = peaks.len() < sources;
    if padded {
        let mut rest: Vec<usize> = (0..values.len()).filter(|i| !peaks.contains(i)).collect();
        rest.sort_by(by_height);
        let missing = sources - peaks.len();
        peaks.extend(rest.into_iter().take(missing));
    }
    peaks.sort_unstable();
    AoAEstimate {
        angles: peaks.iter().map(|&i| spec.angles[i]).collect(),
        indices: peaks,
        padded,
    }
}

pub enum CovarianceSource<'a> {
    /// Recovered channel `Â` and the pilot count used in its normalization.
    Channel { a_hat: &'a CMatrix, snapshots: usize },
    Snapshots(&'a ComplexPanel),
}

#[derive(Debug, Clone)]
pub struct MusicResult {
    pub estimate: AoAEstimate,
    pub spectrum: Pseudospectrum,
    pub split: SubspaceSplit,
}

pub fn estimate_aoa(source: CovarianceSource<'_>, sources: usize, steering: &SteeringGrid) -> Result<MusicResult> {
    let r = match source {
        CovarianceSource::Channel { a_hat, snapshots } => channel_covariance(a_hat, snapshots)?,
        CovarianceSource::Snapshots(panel) => snapshot_covariance(panel)?,
    };
    let split = subspace_split(&r, sources)?;
    let spectrum = pseudospectrum(&split, steering)?;
    if spectrum.values.len() <= 2 * sources {
        return Err(Error::invalid("angle grid too coarse for the requested number of peaks"));
    }
    let estimate = find_peaks(&spectrum, sources);
    Ok(MusicResult {
        estimate,
        spectrum,
        split,
    })
}
