//! Seeded sampling and the small dense linear algebra used by the rest of
//! the crate: Hermitian eigendecomposition and full-row-rank least squares.

use nalgebra::{linalg::Cholesky, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::{CMatrix, CVector, Error, Result, C64};

/// Largest condition number of `S Sᴴ` accepted by [`LeastSquares`].
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha20 with the stream id mapped onto the cipher's stream
/// counter, so the sequence is platform independent and distinct ids never
/// overlap.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unit-modulus complex number with phase uniform on `[0, 2π)`.
    pub fn unit_phasor(&mut self) -> C64 {
        C64::from_polar(1.0, 2.0 * PI * self.uniform())
    }

    pub fn index_below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

/// Draws `n` i.i.d. circularly-symmetric complex Gaussians with total
/// variance `variance` (each quadrature carries `variance / 2`).
pub fn sample_complex_gaussian(rng: &mut RngStream, n: usize, variance: f64) -> Result<Vec<C64>> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::invalid(format!(
            "complex Gaussian variance must be finite and non-negative, got {variance}"
        )));
    }
    let sd = (variance / 2.0).sqrt();
    Ok((0..n)
        .map(|_| {
            let re = rng.standard_normal();
            let im = rng.standard_normal();
            C64::new(sd * re, sd * im)
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: CMatrix,
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized as `(R + Rᴴ)/2` first. Eigenpairs come back in
/// descending eigenvalue order, and every eigenvector has its
/// largest-magnitude entry rotated onto the non-negative real axis so that
/// the output is fully determined by the input.
pub fn hermitian_eig(r: &CMatrix) -> Result<HermitianEigen> {
    let (rows, cols) = r.shape();
    if rows != cols {
        return Err(Error::invalid(format!(
            "eigendecomposition needs a square matrix, got {rows}x{cols}"
        )));
    }
    if r.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if rows == 0 {
        return Ok(HermitianEigen {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }

    let sym = (r + r.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = CMatrix::zeros(rows, rows);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_phase(&mut col);
        eigenvectors.set_column(dst, &col);
    }
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Rotates `v` so that its largest-magnitude entry (first one on ties) is
/// real and non-negative.
pub(crate) fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, x) in v.iter().enumerate() {
        let mag = x.norm();
        if mag > best_mag {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag > 0.0 {
        let rot = v[best].conj() / best_mag;
        v.iter_mut().for_each(|x| *x *= rot);
    }
}

/// Unit eigenvector of the largest eigenvalue, under the phase convention of
/// [`hermitian_eig`].
pub fn principal_eigenvector(r: &CMatrix) -> Result<CVector> {
    let eig = hermitian_eig(r)?;
    if eig.eigenvalues.is_empty() {
        return Err(Error::invalid("principal eigenvector of an empty matrix"));
    }
    Ok(eig.eigenvectors.column(0).into_owned())
}

/// Prefactored solver for `min_a ‖Sᴴa − rhs‖₂` with `S` of full row rank,
/// i.e. `a = (S Sᴴ)⁻¹ S rhs`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    s: CMatrix,
    cholesky: Option<Cholesky<C64, Dyn>>,
    condition: f64,
}

impl LeastSquares {
    pub fn new(s: &CMatrix) -> Result<Self> {
        let (k, p) = s.shape();
        if p < k {
            return Err(Error::invalid(format!(
                "pilot matrix S ({k}x{p}) has fewer snapshots than users"
            )));
        }
        if k == 0 {
            return Ok(Self {
                s: s.clone(),
                cholesky: None,
                condition: 1.0,
            });
        }
        let gram = s * s.adjoint();
        let ev = hermitian_eig(&gram)?.eigenvalues;
        let condition = if ev[k - 1] > 0.0 {
            ev[0] / ev[k - 1]
        } else {
            f64::INFINITY
        };
        let ill = || Error::IllConditioned {
            matrix: format!("pilot matrix S ({k}x{p})"),
            condition,
        };
        if !(condition <= MAX_GRAM_CONDITION) {
            return Err(ill());
        }
        let cholesky = Cholesky::new(gram).ok_or_else(ill)?;
        Ok(Self {
            s: s.clone(),
            cholesky: Some(cholesky),
            condition,
        })
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn pilots(&self) -> &CMatrix {
        &self.s
    }

    pub fn solve(&self, rhs: &CVector) -> Result<CVector> {
        if rhs.len() != self.s.ncols() {
            return Err(Error::DimensionMismatch {
                axis: "snapshot",
                expected: self.s.ncols(),
                found: rhs.len(),
            });
        }
        match &self.cholesky {
            Some(chol) => Ok(chol.solve(&(&self.s * rhs))),
            None => Ok(CVector::zeros(0)),
        }
    }
}

/// One-shot `(S Sᴴ)⁻¹ S rhs`.
pub fn least_squares_solve(s: &CMatrix, rhs: &CVector) -> Result<CVector> {
    LeastSquares::new(s)?.solve(rhs)
}
