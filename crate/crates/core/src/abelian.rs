//! The abelian algebra generated by the type projections of phi^(x)n
//! together with the spectral projections of the pinched state, restriction
//! of states to it, and the exact decomposition identity
//!
//!   S(psi_n || phi_n) = S(psi_n|B || phi_n|B) + S(E_n(psi_n)) - S(psi_n)
//!
//! that reduces quantum relative entropy to a classical KL plus correction
//! terms (Hiai-Petz). The restriction also exports the classical alphabet
//! (P_i, Q_i, w_i) that drives the typical-set machinery.

use serde::Serialize;

use crate::entropy::{
    entropy_of_spectrum, relative_entropy, shannon, von_neumann, ClassicalDistribution,
    EntropyValue,
};
use crate::error::{Error, Result};
use crate::operators::{cluster_sorted, eigen_pairs, hermitize, Budget, CMatrix, Density};
use crate::type_classes::TypeDecomposition;

/// One minimal projection q_i of the abelian algebra: an eigenprojection of
/// the pinched state inside a single type block.
#[derive(Debug, Clone)]
pub struct MinimalProjection {
    /// Index of the type block containing this projection.
    pub block: usize,
    /// Eigenvalue of the pinched state on this projection.
    pub eigenvalue: f64,
    /// w_i = tr(q_i), the rank.
    pub weight: usize,
    /// Orthonormal columns in block-local coordinates (block dim x weight).
    pub local_basis: CMatrix,
}

/// The abelian restriction data for a state pair at block length n.
#[derive(Debug, Clone)]
pub struct AbelianRestriction {
    pub decomposition: TypeDecomposition,
    pub minimal: Vec<MinimalProjection>,
    /// True when phi^(x)n has a kernel; everything is then restricted to
    /// its support and the identity is asserted there.
    pub restricted_to_support: bool,
}

impl AbelianRestriction {
    /// Within each type block of phi^(x)n, spectrally decompose the
    /// compressed psi^(x)n and cluster the eigenvalues; the clusters
    /// (including each within-block kernel) are the minimal projections.
    pub fn build(psi: &Density, phi: &Density, n: usize, budget: Budget) -> Result<Self> {
        if psi.dim() != phi.dim() {
            return Err(Error::DimensionMismatch(format!(
                "abelian restriction: dims {} vs {}",
                psi.dim(),
                phi.dim()
            )));
        }
        let decomposition = TypeDecomposition::build(phi, n, budget)?;
        let site = decomposition.site_in_eigenbasis(psi);
        let mut minimal = Vec::new();
        let mut restricted_to_support = false;
        for (b, block) in decomposition.blocks.iter().enumerate() {
            if !block.in_support {
                restricted_to_support = true;
            }
            let sub = hermitize(&decomposition.product_subblock(&site, block));
            let (values, vectors) = eigen_pairs(&sub)?;
            for (start, len) in cluster_sorted(&values) {
                let mean = values[start..start + len].iter().sum::<f64>() / len as f64;
                minimal.push(MinimalProjection {
                    block: b,
                    eigenvalue: mean.max(0.0),
                    weight: len,
                    local_basis: vectors.columns(start, len).clone_owned(),
                });
            }
        }
        Ok(AbelianRestriction {
            decomposition,
            minimal,
            restricted_to_support,
        })
    }

    /// Number of minimal projections.
    pub fn count(&self) -> usize {
        self.minimal.len()
    }

    /// The dimension weights w_i.
    pub fn weights(&self) -> Vec<usize> {
        self.minimal.iter().map(|m| m.weight).collect()
    }

    /// Map from minimal projection index to its type block.
    pub fn block_of(&self, i: usize) -> usize {
        self.minimal[i].block
    }

    /// P_i = tr(psi^(x)n q_i) for the state the restriction was built from;
    /// exact products of cluster eigenvalue and weight, with kernel blocks
    /// carrying zero by the support convention.
    pub fn p_of_built_state(&self) -> Vec<f64> {
        self.minimal
            .iter()
            .map(|m| {
                if self.decomposition.blocks[m.block].in_support {
                    m.eigenvalue * m.weight as f64
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Q_i = tr(phi^(x)n q_i) = block eigenvalue times weight.
    pub fn q_of_reference(&self) -> Vec<f64> {
        self.minimal
            .iter()
            .map(|m| {
                let block = &self.decomposition.blocks[m.block];
                if block.in_support {
                    block.eigenvalue * m.weight as f64
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// The density of D restricted to the algebra, with respect to the
    /// trace that gives each minimal projection weight 1: (tr(D q_i))_i.
    pub fn restrict(&self, d: &Density) -> Result<ClassicalDistribution> {
        if d.dim() != self.decomposition.dim {
            return Err(Error::DimensionMismatch(format!(
                "restrict: state dim {} vs algebra dim {}",
                d.dim(),
                self.decomposition.dim
            )));
        }
        let y = self.decomposition.to_eigenbasis(d.matrix());
        let mut probs = Vec::with_capacity(self.minimal.len());
        for m in &self.minimal {
            let block = &self.decomposition.blocks[m.block];
            let s = block.indices.len();
            let mut sub = CMatrix::zeros(s, s);
            for (a, &r) in block.indices.iter().enumerate() {
                for (b, &c) in block.indices.iter().enumerate() {
                    sub[(a, b)] = y[(r, c)];
                }
            }
            let compressed = m.local_basis.adjoint() * &sub * &m.local_basis;
            probs.push(crate::operators::trace(&compressed).re.max(0.0));
        }
        ClassicalDistribution::new(probs)
    }

    /// Dense q_i in the computational basis; intended for verification at
    /// small dimensions.
    pub fn materialize(&self, i: usize) -> CMatrix {
        let m = &self.minimal[i];
        let block = &self.decomposition.blocks[m.block];
        let dim = self.decomposition.dim;
        let mut q = CMatrix::zeros(dim, dim);
        for col in 0..m.weight {
            let mut v = CMatrix::zeros(dim, 1);
            for (r, &idx) in block.indices.iter().enumerate() {
                let basis_vec = self.decomposition.basis_column(idx);
                for row in 0..dim {
                    v[(row, 0)] += m.local_basis[(r, col)] * basis_vec[(row, 0)];
                }
            }
            q += &v * v.adjoint();
        }
        q
    }
}

/// The four independently computed terms of the decomposition identity and
/// their residual.
#[derive(Debug, Clone, Serialize)]
pub struct HiaiPetzReport {
    pub n: usize,
    /// S(psi^(x)n || phi^(x)n), computed on the full product space.
    pub lhs: EntropyValue,
    /// S of the two restricted densities: classical KL of (P_i) vs (Q_i).
    pub restricted: EntropyValue,
    /// S(E_n(psi^(x)n)).
    pub pinched_entropy: f64,
    /// S(psi^(x)n).
    pub state_entropy: f64,
    /// lhs - restricted - pinched_entropy + state_entropy; None when lhs is
    /// infinite (the identity is vacuous there).
    pub residual: Option<f64>,
    /// True when phi^(x)n has a kernel and the identity is asserted on its
    /// support only.
    pub kernel_flagged: bool,
}

/// Verify the exact decomposition identity by computing its four terms
/// along independent routes.
pub fn hiai_petz_decomposition_check(
    psi: &Density,
    phi: &Density,
    n: usize,
    budget: Budget,
) -> Result<HiaiPetzReport> {
    let psi_n = psi.tensor_power(n, budget)?;
    let phi_n = phi.tensor_power(n, budget)?;
    let lhs = relative_entropy(&psi_n, &phi_n)?;
    let state_entropy = von_neumann(&psi_n);

    let restriction = AbelianRestriction::build(psi, phi, n, budget)?;
    let p = ClassicalDistribution::new(restriction.p_of_built_state())?;
    let q_raw = restriction.q_of_reference();
    let restricted = kl_against_subnormalized(&p, &q_raw);
    let pinched_entropy =
        entropy_of_spectrum(&restriction.decomposition.pinched_power_spectrum(psi)?);

    let residual = if lhs.finite && restricted.finite {
        Some(lhs.value - restricted.value - pinched_entropy + state_entropy)
    } else {
        None
    };
    Ok(HiaiPetzReport {
        n,
        lhs,
        restricted,
        pinched_entropy,
        state_entropy,
        residual,
        kernel_flagged: restriction.restricted_to_support,
    })
}

/// KL of p against a nonnegative vector that sums to 1 only up to kernel
/// truncation; q entries that are exactly zero force the infinite flag
/// unless the matching p entry is zero.
fn kl_against_subnormalized(p: &ClassicalDistribution, q: &[f64]) -> EntropyValue {
    let mut sum = 0.0;
    for (&pi, &qi) in p.probabilities().iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return EntropyValue::infinite();
            }
            sum += pi * (pi / qi).ln();
        }
    }
    EntropyValue::finite(sum)
}

/// The classical alphabet exported by the restriction at block length l.
#[derive(Debug, Clone, Serialize)]
pub struct ClassicalReduction {
    /// Alphabet size a_l.
    pub a_l: usize,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    pub w: Vec<f64>,
    /// Classical relative entropy of P with respect to Q.
    #[serde(rename = "D_M")]
    pub d_m: EntropyValue,
    /// Shannon entropy of P.
    pub h: f64,
    /// Expectation of log w under P.
    #[serde(rename = "E_l")]
    pub e_l: f64,
}

pub fn classical_reduction(
    psi: &Density,
    phi: &Density,
    l: usize,
    budget: Budget,
) -> Result<ClassicalReduction> {
    let restriction = AbelianRestriction::build(psi, phi, l, budget)?;
    let p = restriction.p_of_built_state();
    let q = restriction.q_of_reference();
    let w: Vec<f64> = restriction
        .minimal
        .iter()
        .map(|m| m.weight as f64)
        .collect();
    let p_dist = ClassicalDistribution::new(p.clone())?;
    let d_m = kl_against_subnormalized(&p_dist, &q);
    let h = shannon(&p_dist);
    let e_l: f64 = p.iter().zip(&w).map(|(&pi, &wi)| pi * wi.ln()).sum();
    Ok(ClassicalReduction {
        a_l: restriction.count(),
        p,
        q,
        w,
        d_m,
        h,
        e_l,
    })
}

/// Smallest l <= l_max with (1/l) D_M(l) >= S(psi||phi) - eta, or None.
/// Running out of budget during the sweep counts as not found.
pub fn choose_block_length(
    psi: &Density,
    phi: &Density,
    eta: f64,
    l_max: usize,
    budget: Budget,
) -> Result<Option<usize>> {
    if eta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eta must be >= 0, got {eta}"
        )));
    }
    let s = relative_entropy(psi, phi)?;
    if !s.finite {
        return Err(Error::SupportViolation {
            leak: crate::operators::support_leak(psi, phi),
        });
    }
    for l in 1..=l_max {
        let red = match classical_reduction(psi, phi, l, budget) {
            Ok(r) => r,
            Err(Error::BudgetExceeded { .. }) | Err(Error::TypeCountExceeded { .. }) => {
                return Ok(None)
            }
            Err(e) => return Err(e),
        };
        if red.d_m.finite && red.d_m.value / l as f64 >= s.value - eta {
            return Ok(Some(l));
        }
    }
    Ok(None)
}

/// Per-n normalized restricted relative entropy (1/n) S(psi_n|B, phi_n|B).
pub fn restriction_convergence_curve(
    psi: &Density,
    phi: &Density,
    n_max: usize,
    budget: Budget,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let red = classical_reduction(psi, phi, n, budget)?;
        out.push((n, red.d_m.expect_finite() / n as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{
        commute_within, identity, max_entry_distance, operator_log, random_density, trace,
    };
    use num_complex::Complex64;

    fn qubit_pair(seed: u64) -> (Density, Density) {
        (
            random_density(2, 2, seed).unwrap(),
            random_density(2, 2, seed + 1000).unwrap(),
        )
    }

    #[test]
    fn diagonal_pair_gives_basis_projectors() {
        let psi = Density::diagonal(&[0.7, 0.2, 0.1]);
        let phi = Density::diagonal(&[0.5, 0.3, 0.2]);
        let r = AbelianRestriction::build(&psi, &phi, 1, Budget::default()).unwrap();
        assert_eq!(r.count(), 3);
        for i in 0..3 {
            let q = r.materialize(i);
            assert!((trace(&q).re - 1.0).abs() < 1e-10);
            // each q_i is a one-dimensional diagonal projector
            for row in 0..3 {
                for col in 0..3 {
                    if row != col {
                        assert!(q[(row, col)].norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn equal_states_give_type_blocks() {
        let psi = random_density(2, 2, 7).unwrap();
        let r = AbelianRestriction::build(&psi, &psi, 2, Budget::default()).unwrap();
        // pinched psi is constant on each block, so minimal projections are
        // exactly the three type blocks
        assert_eq!(r.count(), r.decomposition.blocks.len());
        for (i, m) in r.minimal.iter().enumerate() {
            assert_eq!(m.weight, r.decomposition.blocks[i].dimension);
        }
    }

    #[test]
    fn minimal_projections_satisfy_algebra_invariants() {
        let (psi, phi) = qubit_pair(31);
        let n = 3;
        let r = AbelianRestriction::build(&psi, &phi, n, Budget::default()).unwrap();
        let dim = r.decomposition.dim;
        let total_weight: usize = r.weights().iter().sum();
        assert_eq!(total_weight, 8);

        let qs: Vec<CMatrix> = (0..r.count()).map(|i| r.materialize(i)).collect();
        let mut sum = CMatrix::zeros(dim, dim);
        for q in &qs {
            sum += q;
        }
        assert!(max_entry_distance(&sum, &identity(dim)) < 1e-9);
        for i in 0..qs.len() {
            for j in 0..qs.len() {
                if i != j {
                    assert!(crate::operators::max_entry_norm(&(&qs[i] * &qs[j])) < 1e-9);
                }
            }
        }

        // commutation with every block projector and with log phi^(x)n
        let phi_n = phi.tensor_power(n, Budget::default()).unwrap();
        let log_phi = operator_log(&phi_n);
        for q in &qs {
            assert!(commute_within(q, &log_phi.matrix, 1e-9));
        }
        for block in &r.decomposition.blocks {
            let mut p = CMatrix::zeros(dim, dim);
            for &idx in &block.indices {
                let v = r.decomposition.basis_column(idx);
                p += &v * v.adjoint();
            }
            for q in &qs {
                assert!(commute_within(q, &p, 1e-9));
            }
        }
    }

    #[test]
    fn restrict_state_basics() {
        let (psi, phi) = qubit_pair(47);
        let n = 2;
        let r = AbelianRestriction::build(&psi, &phi, n, Budget::default()).unwrap();

        // restricting the built state reproduces the stored P
        let psi_n = psi.tensor_power(n, Budget::default()).unwrap();
        let direct = r.restrict(&psi_n).unwrap();
        let stored = r.p_of_built_state();
        for (a, b) in direct.probabilities().iter().zip(&stored) {
            assert!((a - b).abs() < 1e-10);
        }

        // maximally mixed restricts to w_i / d^n
        let mm = Density::maximally_mixed(4);
        let probs = r.restrict(&mm).unwrap();
        for (p, m) in probs.probabilities().iter().zip(&r.minimal) {
            assert!((p - m.weight as f64 / 4.0).abs() < 1e-10);
        }

        // normalized minimal projection restricts to a point mass
        let j = 0;
        let q = r.materialize(j);
        let state =
            Density::new(q * Complex64::new(1.0 / r.minimal[j].weight as f64, 0.0)).unwrap();
        let probs = r.restrict(&state).unwrap();
        for (i, p) in probs.probabilities().iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((p - expect).abs() < 1e-9, "i={i} p={p}");
        }
    }

    #[test]
    fn decomposition_identity_commuting() {
        let psi = Density::diagonal(&[0.6, 0.4]);
        let phi = Density::diagonal(&[0.3, 0.7]);
        for n in 1..=4 {
            let report = hiai_petz_decomposition_check(&psi, &phi, n, Budget::default()).unwrap();
            assert!(report.residual.unwrap().abs() < 1e-10, "n={n}");
            // pinching is the identity here
            let gap = report.pinched_entropy - report.state_entropy;
            assert!(gap.abs() < 1e-10);
        }
    }

    #[test]
    fn decomposition_identity_random_qubits() {
        let (psi, phi) = qubit_pair(101);
        for n in 1..=3 {
            let report = hiai_petz_decomposition_check(&psi, &phi, n, Budget::default()).unwrap();
            assert!(
                report.residual.unwrap().abs() < 1e-8,
                "n={n}, residual={:?}",
                report.residual
            );
            assert!(!report.kernel_flagged);
        }
    }

    #[test]
    fn decomposition_identity_equal_states() {
        let psi = random_density(3, 3, 202).unwrap();
        let report = hiai_petz_decomposition_check(&psi, &psi, 2, Budget::default()).unwrap();
        assert!(report.lhs.finite && report.lhs.value.abs() < 1e-9);
        assert!(report.restricted.value.abs() < 1e-9);
        assert!(report.residual.unwrap().abs() < 1e-9);
    }

    #[test]
    fn decomposition_flags_infinite_case() {
        let psi = Density::diagonal(&[1.0, 0.0]);
        let phi = Density::diagonal(&[0.0, 1.0]);
        let report = hiai_petz_decomposition_check(&psi, &phi, 1, Budget::default()).unwrap();
        assert!(!report.lhs.finite);
        assert!(report.residual.is_none());
        assert!(report.kernel_flagged);
    }

    #[test]
    fn classical_reduction_commuting_l1() {
        let psi = Density::diagonal(&[0.7, 0.3]);
        let phi = Density::diagonal(&[0.4, 0.6]);
        let red = classical_reduction(&psi, &phi, 1, Budget::default()).unwrap();
        assert_eq!(red.a_l, 2);
        let s = relative_entropy(&psi, &phi).unwrap().expect_finite();
        assert!((red.d_m.expect_finite() - s).abs() < 1e-10);
        let mut p_sorted = red.p.clone();
        p_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((p_sorted[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn classical_reduction_invariants() {
        let (psi, phi) = qubit_pair(301);
        let l = 2;
        let red = classical_reduction(&psi, &phi, l, Budget::default()).unwrap();
        assert!((red.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((red.q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(red.w.iter().sum::<f64>() as usize, 4);
        // the data-processing bound D_M <= l S(psi||phi)
        let s = relative_entropy(&psi, &phi).unwrap().expect_finite();
        assert!(red.d_m.expect_finite() <= l as f64 * s + 1e-8);
        // E_l is the expectation of log w under P by construction
        let direct: f64 = red.p.iter().zip(&red.w).map(|(p, w)| p * w.ln()).sum();
        assert_eq!(red.e_l, direct);
    }

    #[test]
    fn refinement_leaves_restricted_entropy_unchanged() {
        // splitting every minimal projection into one-dimensional
        // subprojections keeps the KL fixed because the likelihood ratio is
        // constant on each q_i
        let (psi, phi) = qubit_pair(404);
        let r = AbelianRestriction::build(&psi, &phi, 3, Budget::default()).unwrap();
        let p = r.p_of_built_state();
        let q = r.q_of_reference();
        let coarse: f64 = p
            .iter()
            .zip(&q)
            .filter(|(&pi, _)| pi > 0.0)
            .map(|(&pi, &qi)| pi * (pi / qi).ln())
            .sum();
        let mut fine = 0.0;
        for (i, m) in r.minimal.iter().enumerate() {
            let w = m.weight as f64;
            if p[i] > 0.0 {
                // each one-dimensional part carries p/w and q/w
                fine += w * (p[i] / w) * ((p[i] / w) / (q[i] / w)).ln();
            }
        }
        assert!((coarse - fine).abs() < 1e-9);
    }

    #[test]
    fn choose_block_length_cases() {
        let psi = Density::diagonal(&[0.7, 0.3]);
        let phi = Density::diagonal(&[0.4, 0.6]);
        assert_eq!(
            choose_block_length(&psi, &phi, 0.05, 8, Budget::default()).unwrap(),
            Some(1)
        );
        let same = random_density(2, 2, 55).unwrap();
        assert_eq!(
            choose_block_length(&same, &same, 0.0, 8, Budget::default()).unwrap(),
            Some(1)
        );
        let (psi, phi) = qubit_pair(501);
        let s = relative_entropy(&psi, &phi).unwrap().expect_finite();
        let eta = 0.1;
        if let Some(l) = choose_block_length(&psi, &phi, eta, 8, Budget::default()).unwrap() {
            let red = classical_reduction(&psi, &phi, l, Budget::default()).unwrap();
            let rate = red.d_m.expect_finite() / l as f64;
            assert!(rate >= s - eta - 1e-12 && rate <= s + 1e-8);
        }
    }

    #[test]
    fn convergence_curve_is_sandwiched() {
        let (psi, phi) = qubit_pair(601);
        let s = relative_entropy(&psi, &phi).unwrap().expect_finite();
        let curve = restriction_convergence_curve(&psi, &phi, 6, Budget::default()).unwrap();
        for (n, rate) in curve {
            let lower = s - 2.0 * ((n + 1) as f64).ln() / n as f64;
            assert!(rate <= s + 1e-8, "n={n} rate={rate} s={s}");
            assert!(rate >= lower - 1e-8, "n={n} rate={rate} lower={lower}");
        }
    }

    #[test]
    fn convergence_curve_commuting_is_flat() {
        let psi = Density::diagonal(&[0.8, 0.2]);
        let phi = Density::diagonal(&[0.5, 0.5]);
        let s = relative_entropy(&psi, &phi).unwrap().expect_finite();
        for (_, rate) in restriction_convergence_curve(&psi, &phi, 5, Budget::default()).unwrap() {
            assert!((rate - s).abs() < 1e-10);
        }
        for (_, rate) in restriction_convergence_curve(&psi, &psi, 4, Budget::default()).unwrap() {
            assert!(rate.abs() < 1e-10);
        }
    }
}
