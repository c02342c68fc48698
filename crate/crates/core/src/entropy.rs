//! Von Neumann entropy, Umegaki relative entropy with the support
//! condition, classical Shannon/KL quantities, and the mean relative
//! entropy rate of product states. All values are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    self, eigen_pairs, operator_log, trace, Budget, Density, SUPPORT_CUTOFF, SUPPORT_LEQ_TOL,
};

/// A possibly-infinite entropy value. Infinity is an explicit flag, never a
/// float infinity, so downstream comparisons stay total and deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    /// Value in nats; ignored when `finite` is false.
    pub value: f64,
    pub finite: bool,
}

impl EntropyValue {
    pub fn finite(value: f64) -> Self {
        EntropyValue { value, finite: true }
    }

    pub fn infinite() -> Self {
        EntropyValue {
            value: 0.0,
            finite: false,
        }
    }

    /// The finite value, panicking on the infinite flag.
    pub fn expect_finite(&self) -> f64 {
        assert!(self.finite, "entropy value is infinite");
        self.value
    }
}

impl std::fmt::Display for EntropyValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.finite {
            write!(f, "{}", self.value)
        } else {
            write!(f, "inf")
        }
    }
}

/// -sum l ln(l) over eigenvalues above the support cutoff.
pub fn von_neumann(rho: &Density) -> f64 {
    let (values, _) = eigen_pairs(rho.matrix()).expect("density is Hermitian");
    entropy_of_spectrum(&values)
}

/// Entropy of a raw spectrum (clips the cutoff noise floor).
pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    -values
        .iter()
        .filter(|&&l| l > SUPPORT_CUTOFF)
        .map(|&l| l * l.ln())
        .sum::<f64>()
}

/// Umegaki relative entropy S(rho||sigma) = tr(rho (log rho - log sigma))
/// when supp(rho) <= supp(sigma), and the infinite flag otherwise.
///
/// Both terms are evaluated on supp(sigma): rho is compressed onto the
/// support projection before either logarithm touches it, so kernel and
/// support contributions never mix.
pub fn relative_entropy(rho: &Density, sigma: &Density) -> Result<EntropyValue> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "relative_entropy: dims {} vs {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let log_sigma = operator_log(sigma);
    let leak = trace(&(rho.matrix() - log_sigma.support.matrix() * rho.matrix() * log_sigma.support.matrix())).re;
    if leak > SUPPORT_LEQ_TOL {
        return Ok(EntropyValue::infinite());
    }
    let compressed = if log_sigma.kernel_rank == 0 {
        rho.matrix().clone()
    } else {
        log_sigma.support.matrix() * rho.matrix() * log_sigma.support.matrix()
    };
    let (rho_values, _) = eigen_pairs(&operators::hermitize(&compressed))?;
    let tr_rho_log_rho: f64 = rho_values
        .iter()
        .filter(|&&l| l > SUPPORT_CUTOFF)
        .map(|&l| l * l.ln())
        .sum();
    let tr_rho_log_sigma = trace(&(&compressed * &log_sigma.matrix)).re;
    Ok(EntropyValue::finite(tr_rho_log_rho - tr_rho_log_sigma))
}

/// A probability vector; entries in [-1e-12, *) are clipped to zero and the
/// sum must be 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalDistribution {
    probs: Vec<f64>,
}

impl ClassicalDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let mut clipped = probs;
        for p in clipped.iter_mut() {
            if *p < 0.0 {
                if *p < -1e-12 {
                    return Err(Error::InvalidDistribution(format!(
                        "negative probability {p:.3e}"
                    )));
                }
                *p = 0.0;
            }
        }
        let sum: f64 = clipped.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}, not 1 within 1e-9"
            )));
        }
        Ok(ClassicalDistribution { probs: clipped })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Shannon entropy -sum p ln(p) in nats.
pub fn shannon(p: &ClassicalDistribution) -> f64 {
    -p.probs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Classical relative entropy sum p ln(p/q), infinite unless p << q.
pub fn classical_kl(p: &ClassicalDistribution, q: &ClassicalDistribution) -> Result<EntropyValue> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "classical_kl: alphabet sizes {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut sum = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Ok(EntropyValue::infinite());
            }
            sum += pi * (pi / qi).ln();
        }
    }
    Ok(EntropyValue::finite(sum))
}

/// (1/n) S(psi^(x)n || phi^(x)n), computed on the full product space.
/// Equals S(psi||phi) for every admissible n by additivity on products.
pub fn mean_relative_entropy_rate(
    psi: &Density,
    phi: &Density,
    n: usize,
    budget: Budget,
) -> Result<EntropyValue> {
    let psi_n = psi.tensor_power(n, budget)?;
    let phi_n = phi.tensor_power(n, budget)?;
    let s = relative_entropy(&psi_n, &phi_n)?;
    Ok(if s.finite {
        EntropyValue::finite(s.value / n as f64)
    } else {
        s
    })
}

/// Compresses rho onto supp(sigma) and renormalizes nothing; used by callers
/// that need the diagonal distribution of rho in a given eigenbasis.
pub fn diagonal_distribution(rho: &Density, basis: &operators::CMatrix) -> ClassicalDistribution {
    let y = basis.adjoint() * rho.matrix() * basis;
    let probs: Vec<f64> = (0..y.nrows()).map(|i| y[(i, i)].re.max(0.0)).collect();
    let sum: f64 = probs.iter().sum();
    ClassicalDistribution {
        probs: probs.into_iter().map(|p| p / sum).collect(),
    }
}
