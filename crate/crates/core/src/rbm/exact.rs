//! Exact enumeration oracles for small binary RBMs.
//!
//! Everything here is exponential in the number of units and guarded by
//! [`ENUMERATION_LIMIT`]. These routines are the ground truth that the
//! sampled CD statistics are validated against, both in tests and in the
//! `verify` command.

use super::{hidden_given_visible, softplus, RbmGradient, RbmParams, UnitKind};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Largest `N + M` accepted by the enumeration oracles.
pub const ENUMERATION_LIMIT: usize = 24;

fn guard(rbm: &RbmParams) -> Result<()> {
    if rbm.visible_kind != UnitKind::Binary {
        return Err(Error::Unsupported(
            "exact enumeration is defined for binary visibles only".into(),
        ));
    }
    let total = rbm.n_visible() + rbm.n_hidden();
    if total > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            actual: total,
            limit: ENUMERATION_LIMIT,
        });
    }
    rbm.validate()
}

/// Write the binary expansion of `bits` into `buf` (unit `i` = bit `i`).
fn pattern(bits: usize, buf: &mut Array1<f64>) {
    for (i, x) in buf.iter_mut().enumerate() {
        *x = ((bits >> i) & 1) as f64;
    }
}

fn free_energy_raw(rbm: &RbmParams, v: ArrayView1<f64>) -> f64 {
    let act = v.dot(&rbm.weights) + &rbm.hidden_bias;
    -rbm.visible_bias.dot(&v) - act.iter().map(|&a| softplus(a)).sum::<f64>()
}

/// Free energy of a visible state: `F(v) = -b^v . v - sum_j ln(1 + e^{a_j})`
/// with `a = W^T v + b^h`, so that `sum_h exp(-E(v,h)) = exp(-F(v))`.
pub fn free_energy(rbm: &RbmParams, v: ArrayView1<f64>) -> Result<f64> {
    guard(rbm)?;
    if v.len() != rbm.n_visible() {
        return Err(Error::DimensionMismatch(format!(
            "visible state has length {}, model expects {}",
            v.len(),
            rbm.n_visible()
        )));
    }
    Ok(free_energy_raw(rbm, v))
}

/// `ln Z`, summing over all `2^N` visible states in log space.
pub fn exact_log_partition(rbm: &RbmParams) -> Result<f64> {
    guard(rbm)?;
    let n = rbm.n_visible();
    let mut v = Array1::zeros(n);
    let mut terms = Vec::with_capacity(1 << n);
    for bits in 0..(1usize << n) {
        pattern(bits, &mut v);
        terms.push(-free_energy_raw(rbm, v.view()));
    }
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
}

/// Partition function `Z = sum_{v,h} exp(-E(v,h))`.
pub fn exact_partition(rbm: &RbmParams) -> Result<f64> {
    Ok(exact_log_partition(rbm)?.exp())
}

/// Probability of every visible pattern, indexed by bit pattern
/// (`v_i` = bit `i` of the index). Length `2^N`.
pub fn exact_visible_probabilities(rbm: &RbmParams) -> Result<Vec<f64>> {
    let log_z = exact_log_partition(rbm)?;
    let n = rbm.n_visible();
    let mut v = Array1::zeros(n);
    let mut probs = Vec::with_capacity(1 << n);
    for bits in 0..(1usize << n) {
        pattern(bits, &mut v);
        probs.push((-free_energy_raw(rbm, v.view()) - log_z).exp());
    }
    Ok(probs)
}

/// Exact marginals `P(v_i = 1)` for every visible unit.
pub fn exact_visible_marginals(rbm: &RbmParams) -> Result<Array1<f64>> {
    let probs = exact_visible_probabilities(rbm)?;
    let n = rbm.n_visible();
    let mut marginals = Array1::zeros(n);
    for (bits, &p) in probs.iter().enumerate() {
        for i in 0..n {
            if (bits >> i) & 1 == 1 {
                marginals[i] += p;
            }
        }
    }
    Ok(marginals)
}

/// Mean log likelihood of a set of visible states.
pub fn exact_log_likelihood(rbm: &RbmParams, data: ArrayView2<f64>) -> Result<f64> {
    let log_z = exact_log_partition(rbm)?;
    if data.nrows() == 0 {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    if data.ncols() != rbm.n_visible() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} columns, model expects {}",
            data.ncols(),
            rbm.n_visible()
        )));
    }
    let mut total = 0.0;
    for v in data.rows() {
        total += -free_energy_raw(rbm, v) - log_z;
    }
    Ok(total / data.nrows() as f64)
}

/// Exact gradient of the mean log likelihood: data-term expectation minus
/// model-term expectation, the oracle CD updates are validated against.
///
/// Both terms marginalize the hidden layer analytically (the conditionals
/// factorize); the model term enumerates all `2^N` visible states.
pub fn exact_loglik_gradient(rbm: &RbmParams, data: ArrayView2<f64>) -> Result<RbmGradient> {
    guard(rbm)?;
    if data.nrows() == 0 {
        return Err(Error::InvalidParameter("empty dataset".into()));
    }
    if data.ncols() != rbm.n_visible() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} columns, model expects {}",
            data.ncols(),
            rbm.n_visible()
        )));
    }

    let mut grad = RbmGradient::zeros_like(rbm);

    // data term: (1/D) sum_d [ v_d p(v_d)^T, v_d, p(v_d) ]
    for v in data.rows() {
        let p = hidden_given_visible(rbm, v)?;
        add_outer(&mut grad.weights, v, p.view(), 1.0 / data.nrows() as f64);
        grad.visible_bias.scaled_add(1.0 / data.nrows() as f64, &v);
        grad.hidden_bias.scaled_add(1.0 / data.nrows() as f64, &p);
    }

    // model term: sum_v P(v) [ v p(v)^T, v, p(v) ]
    let probs = exact_visible_probabilities(rbm)?;
    let n = rbm.n_visible();
    let mut v = Array1::zeros(n);
    for (bits, &pv) in probs.iter().enumerate() {
        pattern(bits, &mut v);
        let p = hidden_given_visible(rbm, v.view())?;
        add_outer(&mut grad.weights, v.view(), p.view(), -pv);
        grad.visible_bias.scaled_add(-pv, &v);
        grad.hidden_bias.scaled_add(-pv, &p);
    }
    Ok(grad)
}

fn add_outer(acc: &mut Array2<f64>, v: ArrayView1<f64>, h: ArrayView1<f64>, scale: f64) {
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        let mut row = acc.row_mut(i);
        for (j, &hj) in h.iter().enumerate() {
            row[j] += scale * vi * hj;
        }
    }
}
