//! Dense complex Hermitian linear algebra: operators, density operators,
//! tensor powers, partial traces, spectral decompositions, operator
//! logarithms on the support, and seeded random generation.
//!
//! Every other module builds on the conventions fixed here: row-major
//! matrices with the first tensor factor most significant, max-entry norm
//! for comparisons, the support cutoff, and the eigenvalue clustering rule.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub type CMatrix = DMatrix<Complex64>;

/// Per-entry Hermiticity tolerance.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Trace-one tolerance for density operators.
pub const TRACE_TOL: f64 = 1e-9;
/// Eigenvalues in [-PSD_CLIP_TOL, 0) are clipped to zero; anything more
/// negative is rejected as a genuine error rather than ingestion rounding.
pub const PSD_CLIP_TOL: f64 = 1e-10;
/// Eigenvalues at or below this cutoff are treated as exact zeros for all
/// rank and support decisions.
pub const SUPPORT_CUTOFF: f64 = 1e-12;
/// Two eigenvalues land in the same spectral projector when
/// |l_i - l_j| <= CLUSTER_TOL * max(1, |l_i|).
pub const CLUSTER_TOL: f64 = 1e-9;
/// Mass outside supp(sigma) up to this amount still counts as
/// supp(rho) <= supp(sigma); robust against eigenvector rounding.
pub const SUPPORT_LEQ_TOL: f64 = 1e-10;

/// Memory/enumeration budgets shared by every module.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    /// Cap on the dimension of any tensor power (d^n <= dim_cap).
    pub dim_cap: u64,
    /// Cap on the number of type classes enumerated in one call.
    pub type_cap: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            dim_cap: 1 << 16,
            type_cap: 1e7,
        }
    }
}

impl Budget {
    pub fn check_dim(&self, dim: u128) -> Result<()> {
        if dim > self.dim_cap as u128 {
            return Err(Error::BudgetExceeded {
                requested: dim,
                cap: self.dim_cap,
            });
        }
        Ok(())
    }

    pub fn check_types(&self, count: f64) -> Result<()> {
        if count > self.type_cap {
            return Err(Error::TypeCountExceeded {
                count,
                cap: self.type_cap,
            });
        }
        Ok(())
    }
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    let mut t = Complex64::new(0.0, 0.0);
    for i in 0..m.nrows().min(m.ncols()) {
        t += m[(i, i)];
    }
    t
}

/// Largest entry magnitude; the crate's canonical comparison norm.
pub fn max_entry_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-entry distance between two matrices of equal shape.
pub fn max_entry_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_entry_distance shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && hermiticity_deviation(m) <= tol
}

/// (A + A^dagger)/2; removes rounding-level asymmetry before spectral work.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn commute_within(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    max_entry_norm(&(a * b - b * a)) <= tol
}

/// Kronecker product; the first factor is the most significant index,
/// so (A tensor B)[(i*dB + k), (j*dB + l)] = A[i,j] * B[k,l].
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Which tensor factor to trace out of an operator on H (x) H_a.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Partial trace of an operator on a bipartite space with factor
/// dimensions (d, d_a).
pub fn partial_trace(x: &CMatrix, dims: (usize, usize), over: Subsystem) -> Result<CMatrix> {
    let (d, da) = dims;
    if x.nrows() != d * da || x.ncols() != d * da {
        return Err(Error::DimensionMismatch(format!(
            "partial_trace: operator is {}x{}, expected {0}x{0} with {} = {} * {}",
            x.nrows(),
            x.ncols(),
            d * da,
            d,
            da,
        )));
    }
    match over {
        Subsystem::Second => {
            let mut y = CMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let mut s = Complex64::new(0.0, 0.0);
                    for a in 0..da {
                        s += x[(i * da + a, j * da + a)];
                    }
                    y[(i, j)] = s;
                }
            }
            Ok(y)
        }
        Subsystem::First => {
            let mut y = CMatrix::zeros(da, da);
            for a in 0..da {
                for b in 0..da {
                    let mut s = Complex64::new(0.0, 0.0);
                    for i in 0..d {
                        s += x[(i * da + a, i * da + b)];
                    }
                    y[(a, b)] = s;
                }
            }
            Ok(y)
        }
    }
}

/// Raw Hermitian eigendecomposition: eigenvalues sorted in nonincreasing
/// order with the per-vector (unclustered) eigenvector columns.
pub fn eigen_pairs(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let dev = hermiticity_deviation(h);
    if !h.is_square() || dev > HERMITICITY_TOL {
        return Err(Error::NonHermitian {
            deviation: dev,
            tolerance: HERMITICITY_TOL,
        });
    }
    let eig = hermitize(h).symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalue NaN")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Spectral decomposition with eigenvalues grouped into distinct values.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Distinct eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal projections onto the corresponding eigenspaces.
    pub projectors: Vec<CMatrix>,
    pub multiplicities: Vec<usize>,
}

impl SpectralDecomposition {
    /// Sum of eigenvalue * projector; reproduces the operator.
    pub fn reconstruct(&self) -> CMatrix {
        let dim = self.projectors[0].nrows();
        let mut m = CMatrix::zeros(dim, dim);
        for (l, p) in self.eigenvalues.iter().zip(&self.projectors) {
            m += p * Complex64::new(*l, 0.0);
        }
        m
    }
}

/// Cluster a nonincreasing eigenvalue list; returns (start, len) runs.
/// Adjacent values chain into one cluster when their gap is within
/// CLUSTER_TOL * max(1, |previous|).
pub(crate) fn cluster_sorted(values: &[f64]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || {
            let prev = values[i - 1];
            (prev - values[i]).abs() > CLUSTER_TOL * prev.abs().max(1.0)
        };
        if split {
            runs.push((start, i - start));
            start = i;
        }
    }
    runs
}

pub fn eigendecompose(h: &CMatrix) -> Result<SpectralDecomposition> {
    let (values, vectors) = eigen_pairs(h)?;
    let runs = cluster_sorted(&values);
    let mut eigenvalues = Vec::with_capacity(runs.len());
    let mut projectors = Vec::with_capacity(runs.len());
    let mut multiplicities = Vec::with_capacity(runs.len());
    for (start, len) in runs {
        let cols = vectors.columns(start, len);
        // representative: multiplicity-weighted mean of the cluster
        let mean = values[start..start + len].iter().sum::<f64>() / len as f64;
        eigenvalues.push(mean);
        projectors.push(&cols * cols.adjoint());
        multiplicities.push(len);
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        projectors,
        multiplicities,
    })
}

/// An orthogonal projection together with its rank.
#[derive(Debug, Clone)]
pub struct Projection {
    mat: CMatrix,
    rank: usize,
}

impl Projection {
    pub fn new(mat: CMatrix) -> Result<Self> {
        let dev = hermiticity_deviation(&mat);
        if !mat.is_square() || dev > HERMITICITY_TOL {
            return Err(Error::NonHermitian {
                deviation: dev,
                tolerance: HERMITICITY_TOL,
            });
        }
        let idem = max_entry_distance(&(&mat * &mat), &mat);
        if idem > 1e-9 {
            return Err(Error::InvalidProjection(format!(
                "not idempotent (max |q^2 - q| = {idem:.3e})"
            )));
        }
        let t = trace(&mat).re;
        let rank = t.round() as usize;
        if (t - rank as f64).abs() > 1e-6 {
            return Err(Error::InvalidProjection(format!(
                "trace {t} is not close to an integer rank"
            )));
        }
        Ok(Projection { mat, rank })
    }

    pub(crate) fn from_parts(mat: CMatrix, rank: usize) -> Self {
        Projection { mat, rank }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// 1 - q.
    pub fn complement(&self) -> Projection {
        Projection {
            mat: identity(self.dim()) - &self.mat,
            rank: self.dim() - self.rank,
        }
    }
}

/// A positive unit-trace Hermitian matrix; the state objects of the crate.
#[derive(Debug, Clone)]
pub struct Density {
    mat: CMatrix,
}

impl Density {
    /// Validate (Hermitian, unit trace, positive) and apply the clipping
    /// policy: a minimum eigenvalue in [-1e-10, 0) is projected back to the
    /// PSD cone by clipping and renormalizing the trace; anything more
    /// negative is rejected.
    pub fn new(mat: CMatrix) -> Result<Self> {
        let dev = hermiticity_deviation(&mat);
        if !mat.is_square() || dev > HERMITICITY_TOL {
            return Err(Error::NonHermitian {
                deviation: dev,
                tolerance: HERMITICITY_TOL,
            });
        }
        let t = trace(&mat).re;
        if (t - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidDensity(format!(
                "trace is {t}, not 1 within {TRACE_TOL:.1e}"
            )));
        }
        let (values, vectors) = eigen_pairs(&mat)?;
        let min = values.last().copied().unwrap_or(0.0);
        if min < -PSD_CLIP_TOL {
            return Err(Error::InvalidDensity(format!(
                "minimum eigenvalue {min:.3e} is below -{PSD_CLIP_TOL:.1e}"
            )));
        }
        if min < 0.0 {
            let clipped: Vec<f64> = values.iter().map(|&l| l.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            let n = mat.nrows();
            let mut rebuilt = CMatrix::zeros(n, n);
            for (k, &l) in clipped.iter().enumerate() {
                if l > 0.0 {
                    let v = vectors.column(k);
                    rebuilt += (&v * v.adjoint()) * Complex64::new(l / total, 0.0);
                }
            }
            return Ok(Density { mat: rebuilt });
        }
        Ok(Density { mat })
    }

    /// Wrap a matrix known-valid by construction (tensor products of valid
    /// densities, unitary conjugations, channel outputs).
    pub(crate) fn from_trusted(mat: CMatrix) -> Self {
        Density { mat }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn maximally_mixed(dim: usize) -> Density {
        Density {
            mat: identity(dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// |v><v| / <v|v>.
    pub fn pure(v: &[Complex64]) -> Density {
        let n = v.len();
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let mut mat = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                mat[(i, j)] = v[i] * v[j].conj() / norm2;
            }
        }
        Density { mat }
    }

    pub fn diagonal(probs: &[f64]) -> Density {
        let n = probs.len();
        let mut mat = CMatrix::zeros(n, n);
        for (i, &p) in probs.iter().enumerate() {
            mat[(i, i)] = Complex64::new(p, 0.0);
        }
        Density { mat }
    }

    pub fn tensor(&self, other: &Density) -> Density {
        Density {
            mat: tensor(&self.mat, &other.mat),
        }
    }

    /// n-fold tensor product under the dimension budget.
    pub fn tensor_power(&self, n: usize, budget: Budget) -> Result<Density> {
        assert!(n >= 1, "tensor_power requires n >= 1");
        budget.check_dim((self.dim() as u128).pow(n as u32))?;
        let mut out = self.mat.clone();
        for _ in 1..n {
            out = tensor(&out, &self.mat);
        }
        Ok(Density { mat: out })
    }

    /// tr(rho^2).
    pub fn purity(&self) -> f64 {
        trace(&(&self.mat * &self.mat)).re
    }

    /// U rho U^dagger.
    pub fn conjugate_by(&self, u: &CMatrix) -> Density {
        Density {
            mat: u * &self.mat * u.adjoint(),
        }
    }
}

/// Operator logarithm restricted to the support.
///
/// The kernel is mapped to 0 and reported separately so callers never mix
/// kernel and support contributions.
#[derive(Debug, Clone)]
pub struct SupportLog {
    /// log applied to eigenvalues above the support cutoff; 0 on the kernel.
    pub matrix: CMatrix,
    pub support: Projection,
    pub kernel_rank: usize,
}

/// Natural logarithm of a density operator on its support.
pub fn operator_log(d: &Density) -> SupportLog {
    let (values, vectors) = eigen_pairs(d.matrix()).expect("density is Hermitian");
    let n = d.dim();
    let mut log = CMatrix::zeros(n, n);
    let mut supp = CMatrix::zeros(n, n);
    let mut rank = 0;
    for (k, &l) in values.iter().enumerate() {
        if l > SUPPORT_CUTOFF {
            let v = vectors.column(k);
            let vv = &v * v.adjoint();
            log += &vv * Complex64::new(l.ln(), 0.0);
            supp += vv;
            rank += 1;
        }
    }
    SupportLog {
        matrix: log,
        support: Projection::from_parts(supp, rank),
        kernel_rank: n - rank,
    }
}

/// Projection onto the span of eigenvectors with eigenvalue above the
/// support cutoff.
pub fn support_projection(d: &Density) -> Projection {
    operator_log(d).support
}

/// Mass of rho outside the support of sigma: tr((1 - supp sigma) rho).
pub fn support_leak(rho: &Density, sigma: &Density) -> f64 {
    let comp = support_projection(sigma).complement();
    trace(&(comp.matrix() * rho.matrix())).re
}

/// Decides supp(rho) <= supp(sigma) via tr((1 - supp sigma) rho) <= 1e-10.
pub fn support_leq(rho: &Density, sigma: &Density) -> bool {
    support_leak(rho, sigma) <= SUPPORT_LEQ_TOL
}

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = seed::rng(seed);
    // Row-major fill order is part of the determinism contract.
    let mut m = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    m
}

/// Deterministic random density of the given rank: G G^dagger / tr(G G^dagger)
/// for a dim x rank complex standard-Gaussian G.
pub fn random_density(dim: usize, rank: usize, seed: u64) -> Result<Density> {
    if rank < 1 || rank > dim {
        return Err(Error::InvalidRank { rank, dim });
    }
    let g = gaussian_matrix(dim, rank, seed);
    let mut m = &g * g.adjoint();
    let t = trace(&m).re;
    m /= Complex64::new(t, 0.0);
    Ok(Density::from_trusted(hermitize(&m)))
}

/// Deterministic Haar-style random unitary: QR of a complex Gaussian matrix
/// with the triangular factor's diagonal fixed real positive, which makes
/// the factorization (and hence the result) unique.
pub fn random_unitary(dim: usize, seed: u64) -> CMatrix {
    let g = gaussian_matrix(dim, dim, seed);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Serialized matrix entry convention: [re, im] pairs, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixData {
    pub dim: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl MatrixData {
    pub fn from_matrix(m: &CMatrix) -> Self {
        MatrixData {
            dim: m.nrows(),
            matrix: (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.dim == 0 {
            return Err(Error::MalformedFile("dim must be positive".into()));
        }
        if self.matrix.len() != self.dim || self.matrix.iter().any(|r| r.len() != self.dim) {
            return Err(Error::MalformedFile(format!(
                "matrix is not {0}x{0} as declared",
                self.dim
            )));
        }
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, &[re, im]) in row.iter().enumerate() {
                m[(i, j)] = Complex64::new(re, im);
            }
        }
        Ok(m)
    }
}
