//! The multinomial type decomposition of product density operators and the
//! pinching map E_n.
//!
//! A product state phi^(x)n is block diagonal over occupation-count classes
//! of its single-site eigenbasis. Blocks are stored as index sets over the
//! product eigenbasis, never as dense d^n x d^n projectors, and pinching
//! extracts sub-blocks by index gather; memory drops from d^(2n) to the sum
//! of squared block dimensions, which is the key performance lever of the
//! whole crate.

use num_complex::Complex64;

use crate::entropy::{entropy_of_spectrum, von_neumann};
use crate::error::{Error, Result};
use crate::operators::{
    cluster_sorted, eigen_pairs, max_entry_norm, Budget, CMatrix, Density, SUPPORT_CUTOFF,
};

/// Occupation counts (n_1, ..., n_d) with sum n. Ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TypeVector {
    counts: Vec<usize>,
}

impl TypeVector {
    pub fn new(counts: Vec<usize>) -> Self {
        TypeVector { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn d(&self) -> usize {
        self.counts.len()
    }
}

/// Number of compositions of n into d nonnegative parts: C(n+d-1, d-1).
pub fn type_count(n: usize, d: usize) -> f64 {
    let table = LnFactorial::up_to(n + d);
    (table.ln_factorial(n + d - 1) - table.ln_factorial(n) - table.ln_factorial(d - 1)).exp()
}

/// All compositions of n into d nonnegative parts, lexicographically sorted.
pub fn enumerate_types(n: usize, d: usize, budget: Budget) -> Result<Vec<TypeVector>> {
    assert!(n >= 1 && d >= 1, "enumerate_types requires n, d >= 1");
    budget.check_types(type_count(n, d))?;
    let mut out = Vec::new();
    let mut current = vec![0usize; d];
    fill_types(n, 0, &mut current, &mut out);
    Ok(out)
}

fn fill_types(remaining: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<TypeVector>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(TypeVector::new(current.clone()));
        return;
    }
    for k in 0..=remaining {
        current[pos] = k;
        fill_types(remaining - k, pos + 1, current, out);
    }
}

/// Exact multinomial coefficient n! / prod(n_k!); only used where the
/// result is bounded by d^n under the dimension budget.
pub fn multinomial_exact(counts: &[usize]) -> u128 {
    let mut result: u128 = 1;
    let mut total: u128 = 0;
    for &c in counts {
        for j in 1..=c as u128 {
            total += 1;
            result = result * total / j;
        }
    }
    result
}

/// Cumulative table of ln(k!) with compensated accumulation.
pub struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    pub fn up_to(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        let mut sum = 0.0;
        let mut comp = 0.0;
        for k in 1..=n {
            let term = (k as f64).ln();
            let t = sum + term;
            // Neumaier correction
            comp += if sum.abs() >= term.abs() {
                (sum - t) + term
            } else {
                (term - t) + sum
            };
            sum = t;
            table.push(sum + comp);
        }
        LnFactorial { table }
    }

    pub fn ln_factorial(&self, k: usize) -> f64 {
        self.table[k]
    }

    pub fn ln_multinomial(&self, counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        self.table[n] - counts.iter().map(|&c| self.table[c]).sum::<f64>()
    }
}

/// One eigenvalue block of phi^(x)n: the type vectors whose eigenvalue
/// products coincide within the clustering tolerance, merged.
#[derive(Debug, Clone)]
pub struct TypeBlock {
    pub types: Vec<TypeVector>,
    /// Product eigenvalue of phi^(x)n on this block.
    pub eigenvalue: f64,
    pub dimension: usize,
    /// Member product-basis indices (ascending) in phi's eigenbasis.
    pub indices: Vec<usize>,
    /// False when the block involves a kernel eigenvector of phi.
    pub in_support: bool,
}

/// Type decomposition of phi^(x)n over the single-site eigenbasis of phi.
#[derive(Debug, Clone)]
pub struct TypeDecomposition {
    pub n: usize,
    pub d: usize,
    /// d^n.
    pub dim: usize,
    /// Single-site eigenvalues, one per eigenvector, nonincreasing.
    pub site_eigenvalues: Vec<f64>,
    /// Columns are the corresponding eigenvectors.
    pub site_basis: CMatrix,
    /// Blocks in deterministic order: descending eigenvalue, ties broken
    /// lexicographically by first type vector; kernel blocks last.
    pub blocks: Vec<TypeBlock>,
}

impl TypeDecomposition {
    pub fn build(phi: &Density, n: usize, budget: Budget) -> Result<Self> {
        assert!(n >= 1, "type decomposition requires n >= 1");
        let d = phi.dim();
        let dim_u128 = (d as u128).pow(n as u32);
        budget.check_dim(dim_u128)?;
        budget.check_types(type_count(n, d))?;
        let dim = dim_u128 as usize;
        let (site_eigenvalues, site_basis) = eigen_pairs(phi.matrix())?;

        // Group product-basis strings by occupation counts.
        let mut groups: std::collections::BTreeMap<Vec<usize>, Vec<usize>> =
            std::collections::BTreeMap::new();
        let mut digits = vec![0usize; n];
        for idx in 0..dim {
            let mut rest = idx;
            for m in (0..n).rev() {
                digits[m] = rest % d;
                rest /= d;
            }
            let mut counts = vec![0usize; d];
            for &g in &digits {
                counts[g] += 1;
            }
            groups.entry(counts).or_default().push(idx);
        }

        // Separate kernel types so support blocks never absorb them.
        let in_support_symbol: Vec<bool> = site_eigenvalues
            .iter()
            .map(|&l| l > SUPPORT_CUTOFF)
            .collect();
        let mut entries: Vec<(Vec<usize>, Vec<usize>, f64, bool)> = groups
            .into_iter()
            .map(|(counts, indices)| {
                let supported = counts
                    .iter()
                    .zip(&in_support_symbol)
                    .all(|(&c, &ok)| c == 0 || ok);
                let eigenvalue: f64 = counts
                    .iter()
                    .zip(&site_eigenvalues)
                    .map(|(&c, &l)| if c == 0 { 1.0 } else { l.powi(c as i32) })
                    .product();
                (counts, indices, eigenvalue, supported)
            })
            .collect();
        // descending eigenvalue; support class first; lexicographic tie-break
        entries.sort_by(|a, b| {
            b.3.cmp(&a.3)
                .then(b.2.partial_cmp(&a.2).expect("eigenvalue NaN"))
                .then(a.0.cmp(&b.0))
        });

        let mut blocks = Vec::new();
        for class in [true, false] {
            let slice: Vec<&(Vec<usize>, Vec<usize>, f64, bool)> =
                entries.iter().filter(|e| e.3 == class).collect();
            if slice.is_empty() {
                continue;
            }
            let values: Vec<f64> = slice.iter().map(|e| e.2).collect();
            for (start, len) in cluster_sorted(&values) {
                let members = &slice[start..start + len];
                let mut indices: Vec<usize> = members.iter().flat_map(|e| e.1.clone()).collect();
                indices.sort_unstable();
                let dimension = indices.len();
                let eigenvalue = members
                    .iter()
                    .map(|e| e.2 * e.1.len() as f64)
                    .sum::<f64>()
                    / dimension as f64;
                blocks.push(TypeBlock {
                    types: members
                        .iter()
                        .map(|e| TypeVector::new(e.0.clone()))
                        .collect(),
                    eigenvalue,
                    dimension,
                    indices,
                    in_support: class,
                });
            }
        }

        Ok(TypeDecomposition {
            n,
            d,
            dim,
            site_eigenvalues,
            site_basis,
            blocks,
        })
    }

    /// Apply A (x) ... (x) A from the left, one tensor mode at a time.
    fn apply_modes_left(&self, a: &CMatrix, x: &CMatrix) -> CMatrix {
        let d = self.d;
        let dim = self.dim;
        let cols = x.ncols();
        let mut cur = x.clone();
        for mode in 0..self.n {
            let stride = d.pow((self.n - 1 - mode) as u32);
            let outer = dim / (d * stride);
            let mut next = CMatrix::zeros(dim, cols);
            for c in 0..cols {
                for hi in 0..outer {
                    for lo in 0..stride {
                        let base = hi * d * stride + lo;
                        for r in 0..d {
                            let mut s = Complex64::new(0.0, 0.0);
                            for k in 0..d {
                                s += a[(r, k)] * cur[(base + k * stride, c)];
                            }
                            next[(base + r * stride, c)] = s;
                        }
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// (V^(x)n)^dagger X V^(x)n: the operator in phi's product eigenbasis.
    pub fn to_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        let vh = self.site_basis.adjoint();
        let left = self.apply_modes_left(&vh, x);
        self.apply_modes_left(&vh, &left.adjoint()).adjoint()
    }

    /// V^(x)n Y (V^(x)n)^dagger: back to the computational basis.
    pub fn from_eigenbasis(&self, y: &CMatrix) -> CMatrix {
        let v = &self.site_basis;
        let left = self.apply_modes_left(v, y);
        self.apply_modes_left(v, &left.adjoint()).adjoint()
    }

    /// rho expressed in phi's single-site eigenbasis: V^dagger rho V.
    pub fn site_in_eigenbasis(&self, rho: &Density) -> CMatrix {
        self.site_basis.adjoint() * rho.matrix() * &self.site_basis
    }

    /// Sub-block of (site)^(x)n on the block's index set, built entrywise
    /// from digit products; the full d^n matrix is never materialized.
    pub fn product_subblock(&self, site: &CMatrix, block: &TypeBlock) -> CMatrix {
        let s = block.indices.len();
        let digits: Vec<Vec<usize>> = block
            .indices
            .iter()
            .map(|&idx| self.digits_of(idx))
            .collect();
        let mut sub = CMatrix::zeros(s, s);
        for a in 0..s {
            for b in 0..s {
                let mut prod = Complex64::new(1.0, 0.0);
                for m in 0..self.n {
                    prod *= site[(digits[a][m], digits[b][m])];
                }
                sub[(a, b)] = prod;
            }
        }
        sub
    }

    fn digits_of(&self, idx: usize) -> Vec<usize> {
        let mut digits = vec![0usize; self.n];
        let mut rest = idx;
        for m in (0..self.n).rev() {
            digits[m] = rest % self.d;
            rest /= self.d;
        }
        digits
    }

    /// The product eigenbasis vector with the given index, as a dense column.
    pub fn basis_column(&self, idx: usize) -> CMatrix {
        let digits = self.digits_of(idx);
        let mut v = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for &g in &digits {
            let col = self.site_basis.column(g).clone_owned();
            v = v.kronecker(&col);
        }
        v
    }

    /// The pinching map E_n: sum of p X p over the block projectors.
    pub fn pinch(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "pinch: operator is {}x{}, expected {2}x{2}",
                x.nrows(),
                x.ncols(),
                self.dim
            )));
        }
        let y = self.to_eigenbasis(x);
        let mut z = CMatrix::zeros(self.dim, self.dim);
        for block in &self.blocks {
            for &r in &block.indices {
                for &c in &block.indices {
                    z[(r, c)] = y[(r, c)];
                }
            }
        }
        Ok(self.from_eigenbasis(&z))
    }

    /// Spectrum of E_n(psi^(x)n) collected block by block without
    /// materializing the product operator.
    pub fn pinched_power_spectrum(&self, psi: &Density) -> Result<Vec<f64>> {
        let site = self.site_in_eigenbasis(psi);
        let mut values = Vec::with_capacity(self.dim);
        for block in &self.blocks {
            let sub = self.product_subblock(&site, block);
            let (vals, _) = eigen_pairs(&crate::operators::hermitize(&sub))?;
            values.extend(vals);
        }
        Ok(values)
    }
}

/// S(E_n(psi^(x)n)) - S(psi^(x)n); lies in [0, d ln(n+1)] up to rounding.
pub fn pinching_gap(psi: &Density, phi: &Density, n: usize, budget: Budget) -> Result<f64> {
    if psi.dim() != phi.dim() {
        return Err(Error::DimensionMismatch(format!(
            "pinching_gap: dims {} vs {}",
            psi.dim(),
            phi.dim()
        )));
    }
    let decomp = TypeDecomposition::build(phi, n, budget)?;
    let pinched = entropy_of_spectrum(&decomp.pinched_power_spectrum(psi)?);
    let state = von_neumann(&psi.tensor_power(n, budget)?);
    Ok(pinched - state)
}

/// Max-entry commutator norm; used to route commuting pairs onto exact
/// classical paths.
pub fn commutator_norm(a: &Density, b: &Density) -> f64 {
    max_entry_norm(&(a.matrix() * b.matrix() - b.matrix() * a.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{identity, max_entry_distance, random_density, trace};

    #[test]
    fn enumerate_types_small_cases() {
        let types = enumerate_types(2, 2, Budget::default()).unwrap();
        let counts: Vec<&[usize]> = types.iter().map(|t| t.counts()).collect();
        assert_eq!(counts, vec![&[0, 2][..], &[1, 1][..], &[2, 0][..]]);

        let unit = enumerate_types(1, 4, Budget::default()).unwrap();
        assert_eq!(unit.len(), 4);
        for t in &unit {
            assert_eq!(t.n(), 1);
        }

        // C(6, 2) = 15
        assert_eq!(enumerate_types(4, 3, Budget::default()).unwrap().len(), 15);
        assert!((type_count(4, 3) - 15.0).abs() < 1e-9);
    }

    #[test]
    fn enumerate_types_budget_guard() {
        let budget = Budget {
            type_cap: 100.0,
            ..Budget::default()
        };
        assert!(matches!(
            enumerate_types(100, 4, budget),
            Err(Error::TypeCountExceeded { .. })
        ));
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(multinomial_exact(&[2, 0]), 1);
        assert_eq!(multinomial_exact(&[1, 1]), 2);
        assert_eq!(multinomial_exact(&[2, 2]), 6);
        assert_eq!(multinomial_exact(&[3, 2, 1]), 60);
        let table = LnFactorial::up_to(6);
        assert!((table.ln_multinomial(&[3, 2, 1]) - 60f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_gives_single_block() {
        let phi = Density::maximally_mixed(2);
        let decomp = TypeDecomposition::build(&phi, 3, Budget::default()).unwrap();
        assert_eq!(decomp.blocks.len(), 1);
        assert_eq!(decomp.blocks[0].dimension, 8);
    }

    #[test]
    fn qubit_three_quarters_blocks() {
        let phi = Density::diagonal(&[0.75, 0.25]);
        let decomp = TypeDecomposition::build(&phi, 2, Budget::default()).unwrap();
        let evs: Vec<f64> = decomp.blocks.iter().map(|b| b.eigenvalue).collect();
        let dims: Vec<usize> = decomp.blocks.iter().map(|b| b.dimension).collect();
        assert_eq!(dims, vec![1, 2, 1]);
        assert!((evs[0] - 0.5625).abs() < 1e-12);
        assert!((evs[1] - 0.1875).abs() < 1e-12);
        assert!((evs[2] - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn block_dimensions_sum_to_full_space() {
        let phi = random_density(3, 3, 55).unwrap();
        let decomp = TypeDecomposition::build(&phi, 3, Budget::default()).unwrap();
        let total: usize = decomp.blocks.iter().map(|b| b.dimension).sum();
        assert_eq!(total, 27);
        // trace consistency: sum of eigenvalue * dimension = 1
        let trace_sum: f64 = decomp
            .blocks
            .iter()
            .map(|b| b.eigenvalue * b.dimension as f64)
            .sum();
        assert!((trace_sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pinch_fixes_block_diagonal_operators() {
        let phi = random_density(2, 2, 66).unwrap();
        let n = 3;
        let decomp = TypeDecomposition::build(&phi, n, Budget::default()).unwrap();
        let phi_n = phi.tensor_power(n, Budget::default()).unwrap();
        let pinched = decomp.pinch(phi_n.matrix()).unwrap();
        assert!(max_entry_distance(&pinched, phi_n.matrix()) < 1e-10);

        let id = identity(decomp.dim);
        assert!(max_entry_distance(&decomp.pinch(&id).unwrap(), &id) < 1e-10);
    }

    #[test]
    fn pinch_kills_cross_block_terms() {
        let phi = Density::diagonal(&[0.75, 0.25]);
        let decomp = TypeDecomposition::build(&phi, 2, Budget::default()).unwrap();
        // rank-one coherence between indices in different blocks (0 and 1)
        let mut x = CMatrix::zeros(4, 4);
        x[(0, 1)] = Complex64::new(1.0, 0.5);
        x[(1, 0)] = Complex64::new(1.0, -0.5);
        let pinched = decomp.pinch(&x).unwrap();
        assert!(max_entry_norm(&pinched) < 1e-12);
    }

    #[test]
    fn pinch_is_idempotent_and_trace_preserving() {
        let phi = random_density(2, 2, 77).unwrap();
        let psi = random_density(2, 2, 78).unwrap();
        let n = 3;
        let decomp = TypeDecomposition::build(&phi, n, Budget::default()).unwrap();
        let x = psi.tensor_power(n, Budget::default()).unwrap();
        let once = decomp.pinch(x.matrix()).unwrap();
        let twice = decomp.pinch(&once).unwrap();
        assert!(max_entry_distance(&once, &twice) < 1e-10);
        assert!((trace(&once).re - trace(x.matrix()).re).abs() < 1e-10);
        assert!(trace(&once).im.abs() < 1e-10);
    }

    #[test]
    fn pinched_spectrum_matches_dense_pinch() {
        let phi = random_density(2, 2, 88).unwrap();
        let psi = random_density(2, 2, 89).unwrap();
        let n = 3;
        let decomp = TypeDecomposition::build(&phi, n, Budget::default()).unwrap();
        let x = psi.tensor_power(n, Budget::default()).unwrap();
        let dense = decomp.pinch(x.matrix()).unwrap();
        let (mut dense_vals, _) = eigen_pairs(&dense).unwrap();
        let mut block_vals = decomp.pinched_power_spectrum(&psi).unwrap();
        dense_vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        block_vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in dense_vals.iter().zip(&block_vals) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gap_vanishes_for_commuting_states() {
        let phi = Density::diagonal(&[0.7, 0.3]);
        let psi = Density::diagonal(&[0.2, 0.8]);
        let gap = pinching_gap(&psi, &phi, 3, Budget::default()).unwrap();
        assert!(gap.abs() < 1e-10);
    }

    #[test]
    fn gap_single_site_nondegenerate() {
        let psi = random_density(2, 2, 91).unwrap();
        let phi = random_density(2, 2, 92).unwrap();
        let gap = pinching_gap(&psi, &phi, 1, Budget::default()).unwrap();
        // dephasing psi in phi's eigenbasis cannot lower the entropy
        assert!(gap >= -1e-9);
        let decomp = TypeDecomposition::build(&phi, 1, Budget::default()).unwrap();
        let site = decomp.site_in_eigenbasis(&psi);
        let diag: Vec<f64> = (0..2).map(|i| site[(i, i)].re).collect();
        let expect = entropy_of_spectrum(&diag) - von_neumann(&psi);
        assert!((gap - expect).abs() < 1e-10);
    }

    #[test]
    fn gap_respects_upper_bound() {
        let psi = random_density(2, 2, 93).unwrap();
        let phi = random_density(2, 2, 94).unwrap();
        for n in 1..=4 {
            let gap = pinching_gap(&psi, &phi, n, Budget::default()).unwrap();
            let bound = 2.0 * ((n + 1) as f64).ln();
            assert!(gap >= -1e-9 && gap <= bound + 1e-9, "n={n}: gap {gap}");
        }
    }
}
