//! Dense complex Hermitian matrices.
//!
//! Beamforming covariances, the sensing covariance and their sums are all
//! stored as [`HermitianMatrix`]. The serialized form is row-major with each
//! entry written as an `[re, im]` pair.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Absolute tolerance on `A - A^H`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative (to the trace) tolerance on the smallest eigenvalue.
pub const PSD_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    data: CMatrix,
    psd: bool,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            data: CMatrix::zeros(dim, dim),
            psd: true,
        }
    }

    /// `scale * I`.
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self {
            data: CMatrix::identity(dim, dim) * Complex64::new(scale, 0.0),
            psd: scale >= 0.0,
        }
    }

    /// `scale * v v^H`.
    pub fn outer(v: &CVector, scale: f64) -> Self {
        let data = v * v.adjoint() * Complex64::new(scale, 0.0);
        Self {
            data,
            psd: scale >= 0.0,
        }
    }

    /// Symmetrizes `m` as `(m + m^H)/2` and records whether the result is psd.
    pub fn from_matrix(m: CMatrix) -> Self {
        assert!(m.is_square(), "Hermitian matrix must be square");
        let data = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let mut h = Self { data, psd: false };
        h.psd = h.check_psd();
        h
    }

    /// Wraps `m` without symmetrizing. Returns `None` when `m` is not
    /// Hermitian within [`HERMITIAN_TOL`].
    pub fn try_new(m: CMatrix) -> Option<Self> {
        if !m.is_square() {
            return None;
        }
        let n = m.nrows();
        for i in 0..n {
            for j in 0..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > HERMITIAN_TOL {
                    return None;
                }
            }
        }
        let mut h = Self {
            data: m,
            psd: false,
        };
        h.psd = h.check_psd();
        Some(h)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_psd(&self) -> bool {
        self.psd
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.data.diagonal().iter().map(|c| c.re).sum()
    }

    /// `v^H A v`, which is real for Hermitian `A`.
    pub fn quad_form(&self, v: &CVector) -> f64 {
        let av = &self.data * v;
        v.iter().zip(av.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `Re tr(C A)` for another Hermitian `C`.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (other.data[(j, i)] * self.data[(i, j)]).re;
            }
        }
        acc
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.data.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Principal eigenpair (largest eigenvalue, unit eigenvector).
    pub fn principal(&self) -> (f64, CVector) {
        let eig = SymmetricEigen::new(self.data.clone());
        let (idx, val) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        (val, eig.eigenvectors.column(idx).into_owned())
    }

    /// Numerical rank: eigenvalues above `rel_tol * lambda_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let ev = self.eigenvalues();
        let max = ev.last().copied().unwrap_or(0.0);
        if max <= 0.0 {
            return 0;
        }
        ev.iter().filter(|&&l| l > rel_tol * max).count()
    }

    fn check_psd(&self) -> bool {
        if self.dim() == 0 {
            return true;
        }
        let tr = self.trace().abs().max(f64::MIN_POSITIVE);
        self.min_eigenvalue() >= -PSD_REL_TOL * tr
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            data: &self.data + &other.data,
            psd: self.psd && other.psd,
        }
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix::from_matrix(&self.data - &other.data)
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix {
            data: &self.data * Complex64::new(s, 0.0),
            psd: self.psd && s >= 0.0,
        }
    }

    pub fn sum<'a>(dim: usize, items: impl IntoIterator<Item = &'a HermitianMatrix>) -> Self {
        items
            .into_iter()
            .fold(HermitianMatrix::zeros(dim), |acc, m| acc.add(m))
    }

    /// Real-symmetric embedding `[Re, -Im; Im, Re]` of doubled dimension.
    pub fn real_embedding(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut e = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let c = self.data[(i, j)];
                e[(i, j)] = c.re;
                e[(i + n, j + n)] = c.re;
                e[(i + n, j)] = c.im;
                e[(i, j + n)] = -c.im;
            }
        }
        e
    }
}

#[derive(Serialize, Deserialize)]
struct HermitianRepr {
    dim: usize,
    psd: bool,
    entries: Vec<[f64; 2]>,
}

impl Serialize for HermitianMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let n = self.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let c = self.data[(i, j)];
                entries.push([c.re, c.im]);
            }
        }
        HermitianRepr {
            dim: n,
            psd: self.psd,
            entries,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = HermitianRepr::deserialize(d)?;
        if r.entries.len() != r.dim * r.dim {
            return Err(serde::de::Error::custom(format!(
                "expected {} entries, found {}",
                r.dim * r.dim,
                r.entries.len()
            )));
        }
        let m = CMatrix::from_row_iterator(
            r.dim,
            r.dim,
            r.entries.iter().map(|e| Complex64::new(e[0], e[1])),
        );
        Ok(HermitianMatrix {
            data: m,
            psd: r.psd,
        })
    }
}

pub(crate) mod cvec_serde {
    use super::CVector;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &CVector, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVector::from_iterator(
            pairs.len(),
            pairs.iter().map(|p| Complex64::new(p[0], p[1])),
        ))
    }
}

pub(crate) mod opt_cvecs_serde {
    use super::CVector;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<CVector>>, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Option<Vec<Vec<[f64; 2]>>> = v.as_ref().map(|vs| {
            vs.iter()
                .map(|v| v.iter().map(|c| [c.re, c.im]).collect())
                .collect()
        });
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<CVector>>, D::Error> {
        let pairs = Option::<Vec<Vec<[f64; 2]>>>::deserialize(d)?;
        Ok(pairs.map(|vs| {
            vs.into_iter()
                .map(|p| {
                    CVector::from_iterator(p.len(), p.iter().map(|c| Complex64::new(c[0], c[1])))
                })
                .collect()
        }))
    }
}
