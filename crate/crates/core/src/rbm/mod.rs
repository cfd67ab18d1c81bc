//! Static restricted Boltzmann machines.
//!
//! Binary-binary and Gaussian-binary parameterizations with the energies
//!
//! ```text
//! binary:    E(v,h) = -sum_ij W_ij v_i h_j - sum_i b^v_i v_i - sum_j b^h_j h_j
//! gaussian:  E(v,h) = -sum_ij W_ij v_i h_j / s_i^2
//!            + sum_i (b^v_i - v_i)^2 / (2 s_i^2) - sum_j b^h_j h_j
//! ```
//!
//! where `s_i^2` are fixed per-dimension visible variances (all ones by
//! default; learning them is out of scope). Hidden units are always binary.
//! Conditionals factorize per unit, which drives Gibbs sampling and the CD
//! statistics in [`cd`]. Exact enumeration oracles for small binary models
//! live in [`exact`].

mod cd;
mod exact;

pub use cd::{
    cd_update, reconstruction_mse, static_pretrain, CdConfig, RbmGradient, SparsityPenalty,
};
pub(crate) use cd::collect_gradient;
pub use exact::{
    exact_log_likelihood, exact_log_partition, exact_loglik_gradient, exact_partition,
    exact_visible_marginals, exact_visible_probabilities, free_energy, ENUMERATION_LIMIT,
};

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Distribution family of the visible layer. Hidden units are always binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    Binary,
    Gaussian,
}

/// Parameters of a static RBM with `N` visible and `M` hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    /// `N x M` weight matrix.
    pub weights: Array2<f64>,
    /// Visible bias, length `N`.
    pub visible_bias: Array1<f64>,
    /// Hidden bias, length `M`.
    pub hidden_bias: Array1<f64>,
    pub visible_kind: UnitKind,
    /// Fixed visible variances, length `N`, strictly positive. All ones by
    /// default; ignored for binary visibles.
    pub visible_variance: Array1<f64>,
}

impl RbmParams {
    /// All-zero parameters with unit variances.
    pub fn zeros(n_visible: usize, n_hidden: usize, kind: UnitKind) -> Self {
        Self {
            weights: Array2::zeros((n_visible, n_hidden)),
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
            visible_kind: kind,
            visible_variance: Array1::ones(n_visible),
        }
    }

    /// Small random initialization: weights from N(0, 0.01^2), biases zero.
    pub fn random(n_visible: usize, n_hidden: usize, kind: UnitKind, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(n_visible, n_hidden, kind);
        for w in p.weights.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *w = 0.01 * z;
        }
        p
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    /// Check shape agreement, finiteness and positive variances.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n_visible(), self.n_hidden());
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter(
                "layer sizes must be at least 1".into(),
            ));
        }
        if self.visible_bias.len() != n || self.hidden_bias.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "bias lengths ({}, {}) do not match weight matrix {}x{}",
                self.visible_bias.len(),
                self.hidden_bias.len(),
                n,
                m
            )));
        }
        if self.visible_variance.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "variance length {} does not match {} visible units",
                self.visible_variance.len(),
                n
            )));
        }
        if self.visible_variance.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(Error::InvalidParameter(
                "visible variances must be strictly positive".into(),
            ));
        }
        let finite = self.weights.iter().all(|x| x.is_finite())
            && self.visible_bias.iter().all(|x| x.is_finite())
            && self.hidden_bias.iter().all(|x| x.is_finite())
            && self.visible_variance.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "parameters contain non-finite entries".into(),
            ));
        }
        Ok(())
    }

    fn check_visible(&self, v: ArrayView1<f64>) -> Result<()> {
        if v.len() != self.n_visible() {
            return Err(Error::DimensionMismatch(format!(
                "visible state has length {}, model expects {}",
                v.len(),
                self.n_visible()
            )));
        }
        Ok(())
    }

    fn check_hidden(&self, h: ArrayView1<f64>) -> Result<()> {
        if h.len() != self.n_hidden() {
            return Err(Error::DimensionMismatch(format!(
                "hidden state has length {}, model expects {}",
                h.len(),
                self.n_hidden()
            )));
        }
        Ok(())
    }

    /// Visible states scaled by `1/s_i^2` (the weight-term scaling of the
    /// Gaussian energy). For binary visibles this is the identity.
    pub(crate) fn scaled_visible(&self, v: ArrayView1<f64>) -> Array1<f64> {
        match self.visible_kind {
            UnitKind::Binary => v.to_owned(),
            UnitKind::Gaussian => &v / &self.visible_variance,
        }
    }

    pub(crate) fn scaled_visible_batch(&self, v: ArrayView2<f64>) -> Array2<f64> {
        match self.visible_kind {
            UnitKind::Binary => v.to_owned(),
            UnitKind::Gaussian => &v / &self.visible_variance,
        }
    }
}

/// Numerically stable logistic function, `1 / (1 + exp(-x))`.
///
/// Saturates to 0 or 1 for large `|x|` and never returns NaN for finite
/// input.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Energy of a joint configuration `(v, h)`.
pub fn energy(rbm: &RbmParams, v: ArrayView1<f64>, h: ArrayView1<f64>) -> Result<f64> {
    rbm.check_visible(v)?;
    rbm.check_hidden(h)?;
    let weight_term = rbm.scaled_visible(v).dot(&rbm.weights).dot(&h);
    let hidden_term = rbm.hidden_bias.dot(&h);
    match rbm.visible_kind {
        UnitKind::Binary => Ok(-weight_term - rbm.visible_bias.dot(&v) - hidden_term),
        UnitKind::Gaussian => {
            let quad: f64 = v
                .iter()
                .zip(rbm.visible_bias.iter())
                .zip(rbm.visible_variance.iter())
                .map(|((&vi, &bi), &s2)| (bi - vi).powi(2) / (2.0 * s2))
                .sum();
            Ok(-weight_term + quad - hidden_term)
        }
    }
}

/// `P(h_j = 1 | v)` for every hidden unit.
pub fn hidden_given_visible(rbm: &RbmParams, v: ArrayView1<f64>) -> Result<Array1<f64>> {
    rbm.check_visible(v)?;
    let act = rbm.scaled_visible(v).dot(&rbm.weights) + &rbm.hidden_bias;
    Ok(act.mapv(sigmoid))
}

/// Batched hidden conditionals: one row of probabilities per visible row in
/// `v` (`Q x N` in, `Q x M` out). `extra_bias`, when given, is added to the
/// hidden pre-activation row-wise (dynamic biases of the temporal models).
pub fn hidden_given_visible_batch(
    rbm: &RbmParams,
    v: ArrayView2<f64>,
    extra_bias: Option<&Array2<f64>>,
) -> Result<Array2<f64>> {
    if v.ncols() != rbm.n_visible() {
        return Err(Error::DimensionMismatch(format!(
            "visible batch has {} columns, model expects {}",
            v.ncols(),
            rbm.n_visible()
        )));
    }
    let mut act = rbm.scaled_visible_batch(v).dot(&rbm.weights);
    act += &rbm.hidden_bias;
    if let Some(b) = extra_bias {
        act += b;
    }
    act.mapv_inplace(sigmoid);
    Ok(act)
}

/// Per-unit conditional of the visible layer given a hidden state.
#[derive(Debug, Clone)]
pub enum VisibleConditional {
    /// Bernoulli success probabilities, length `N`.
    Bernoulli(Array1<f64>),
    /// Independent normals with the stated means and variances.
    Gaussian {
        mean: Array1<f64>,
        variance: Array1<f64>,
    },
}

impl VisibleConditional {
    /// Distribution mean (the mean-field reconstruction).
    pub fn mean(&self) -> &Array1<f64> {
        match self {
            VisibleConditional::Bernoulli(p) => p,
            VisibleConditional::Gaussian { mean, .. } => mean,
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Array1<f64> {
        match self {
            VisibleConditional::Bernoulli(p) => {
                p.mapv(|pi| if rng.random::<f64>() < pi { 1.0 } else { 0.0 })
            }
            VisibleConditional::Gaussian { mean, variance } => {
                let mut out = mean.clone();
                for (x, &s2) in out.iter_mut().zip(variance.iter()) {
                    let z: f64 = StandardNormal.sample(rng);
                    *x += s2.sqrt() * z;
                }
                out
            }
        }
    }
}

/// Conditional `P(v | h)`: Bernoulli probabilities for binary visibles,
/// per-unit normal parameters for Gaussian visibles.
pub fn visible_given_hidden(rbm: &RbmParams, h: ArrayView1<f64>) -> Result<VisibleConditional> {
    rbm.check_hidden(h)?;
    let mean = rbm.weights.dot(&h) + &rbm.visible_bias;
    match rbm.visible_kind {
        UnitKind::Binary => Ok(VisibleConditional::Bernoulli(mean.mapv(sigmoid))),
        UnitKind::Gaussian => Ok(VisibleConditional::Gaussian {
            mean,
            variance: rbm.visible_variance.clone(),
        }),
    }
}

/// Sample a binary hidden state from per-unit probabilities.
pub fn sample_hidden(probs: ArrayView1<f64>, rng: &mut ChaCha8Rng) -> Array1<f64> {
    probs.mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
}

/// One Gibbs transition from a visible state: sample `h ~ P(h|v)`, then
/// `v' ~ P(v|h)`. Returns the hidden sample and the next visible state.
pub fn gibbs_step(
    rbm: &RbmParams,
    v: ArrayView1<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let h_probs = hidden_given_visible(rbm, v)?;
    let h = sample_hidden(h_probs.view(), rng);
    let v_next = visible_given_hidden(rbm, h.view())?.sample(rng);
    Ok((h, v_next))
}

/// Batched visible means given hidden rows: `H W^T + b^v` (`Q x M` in,
/// `Q x N` out). `extra_bias` is added row-wise when given. For binary
/// visibles the result is passed through the sigmoid, so rows are Bernoulli
/// probabilities; for Gaussian visibles rows are conditional means.
pub fn visible_means_batch(
    rbm: &RbmParams,
    h: ArrayView2<f64>,
    extra_bias: Option<&Array2<f64>>,
) -> Result<Array2<f64>> {
    if h.ncols() != rbm.n_hidden() {
        return Err(Error::DimensionMismatch(format!(
            "hidden batch has {} columns, model expects {}",
            h.ncols(),
            rbm.n_hidden()
        )));
    }
    let mut act = h.dot(&rbm.weights.t());
    act += &rbm.visible_bias;
    if let Some(b) = extra_bias {
        act += b;
    }
    if rbm.visible_kind == UnitKind::Binary {
        act.mapv_inplace(sigmoid);
    }
    Ok(act)
}

/// Sample each row of a probability matrix as independent Bernoulli units,
/// one RNG per row.
pub(crate) fn sample_bernoulli_rows(probs: &Array2<f64>, rngs: &mut [ChaCha8Rng]) -> Array2<f64> {
    let mut out = probs.clone();
    for (mut row, rng) in out.axis_iter_mut(Axis(0)).zip(rngs.iter_mut()) {
        for p in row.iter_mut() {
            *p = if rng.random::<f64>() < *p { 1.0 } else { 0.0 };
        }
    }
    out
}

/// Sample visible rows given per-row means. Binary rows are Bernoulli in the
/// given probabilities; Gaussian rows add `s_i N(0,1)` noise unless
/// `mean_field` is set, in which case the means pass through unchanged.
pub(crate) fn sample_visible_rows(
    rbm: &RbmParams,
    means: &Array2<f64>,
    rngs: &mut [ChaCha8Rng],
    mean_field: bool,
) -> Array2<f64> {
    let mut out = means.clone();
    match rbm.visible_kind {
        UnitKind::Binary => {
            for (mut row, rng) in out.axis_iter_mut(Axis(0)).zip(rngs.iter_mut()) {
                for p in row.iter_mut() {
                    *p = if rng.random::<f64>() < *p { 1.0 } else { 0.0 };
                }
            }
        }
        UnitKind::Gaussian => {
            if !mean_field {
                for (mut row, rng) in out.axis_iter_mut(Axis(0)).zip(rngs.iter_mut()) {
                    for (x, &s2) in row.iter_mut().zip(rbm.visible_variance.iter()) {
                        let z: f64 = StandardNormal.sample(rng);
                        *x += s2.sqrt() * z;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn sigmoid_matches_closed_form() {
        assert_abs_diff_eq!(sigmoid(0.0), 0.5, epsilon = 0.0);
        assert_abs_diff_eq!(sigmoid(1.0), 0.7310585786, epsilon = 1e-10);
        assert_abs_diff_eq!(sigmoid(50.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sigmoid(-50.0), 0.0, epsilon = 1e-15);
        // saturates without producing NaN far beyond f64 exp range
        assert_eq!(sigmoid(750.0), 1.0);
        assert_eq!(sigmoid(-750.0), 0.0);
        assert!(sigmoid(f64::MAX).is_finite());
    }

    #[test]
    fn binary_energy_zero_params_is_zero() {
        let rbm = RbmParams::zeros(3, 2, UnitKind::Binary);
        let v = array![1.0, 0.0, 1.0];
        let h = array![1.0, 1.0];
        assert_eq!(energy(&rbm, v.view(), h.view()).unwrap(), 0.0);
    }

    #[test]
    fn binary_energy_direct_arithmetic() {
        // N=2, M=1, W=[[1],[-1]], b_h=(0.5), v=(1,0), h=(1) -> -1.5
        let mut rbm = RbmParams::zeros(2, 1, UnitKind::Binary);
        rbm.weights = array![[1.0], [-1.0]];
        rbm.hidden_bias = array![0.5];
        let e = energy(&rbm, array![1.0, 0.0].view(), array![1.0].view()).unwrap();
        assert_abs_diff_eq!(e, -1.5, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_energy_quadratic_term() {
        let rbm = RbmParams::zeros(2, 3, UnitKind::Gaussian);
        let e = energy(&rbm, array![2.0, 0.0].view(), array![0.0, 1.0, 0.0].view()).unwrap();
        assert_abs_diff_eq!(e, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_rejects_dimension_mismatch() {
        let rbm = RbmParams::zeros(2, 2, UnitKind::Binary);
        let err = energy(&rbm, array![1.0].view(), array![0.0, 0.0].view());
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn hidden_conditional_uninformative_model() {
        let rbm = RbmParams::zeros(4, 3, UnitKind::Binary);
        let p = hidden_given_visible(&rbm, array![1.0, 0.0, 1.0, 1.0].view()).unwrap();
        assert!(p.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn hidden_conditional_binary_cancellation() {
        let mut rbm = RbmParams::zeros(1, 1, UnitKind::Binary);
        rbm.weights = array![[2.0]];
        rbm.hidden_bias = array![-2.0];
        let p = hidden_given_visible(&rbm, array![1.0].view()).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn hidden_conditional_gaussian_variance_scaling() {
        // sigma^2 = 4, W = 2, v = 2 -> sigma(2*2/4) = sigma(1)
        let mut rbm = RbmParams::zeros(1, 1, UnitKind::Gaussian);
        rbm.weights = array![[2.0]];
        rbm.visible_variance = array![4.0];
        let p = hidden_given_visible(&rbm, array![2.0].view()).unwrap();
        assert_abs_diff_eq!(p[0], 0.7310585786, epsilon = 1e-10);
    }

    #[test]
    fn visible_conditional_binary() {
        let mut rbm = RbmParams::zeros(2, 1, UnitKind::Binary);
        rbm.weights = array![[1.0], [-1.0]];
        match visible_given_hidden(&rbm, array![1.0].view()).unwrap() {
            VisibleConditional::Bernoulli(p) => {
                assert_abs_diff_eq!(p[0], 0.7310585786, epsilon = 1e-7);
                assert_abs_diff_eq!(p[1], 0.2689414214, epsilon = 1e-7);
            }
            _ => panic!("binary model must yield Bernoulli conditionals"),
        }
    }

    #[test]
    fn visible_conditional_gaussian_mean() {
        let mut rbm = RbmParams::zeros(1, 1, UnitKind::Gaussian);
        rbm.weights = array![[3.0]];
        rbm.visible_bias = array![1.0];
        match visible_given_hidden(&rbm, array![1.0].view()).unwrap() {
            VisibleConditional::Gaussian { mean, variance } => {
                assert_abs_diff_eq!(mean[0], 4.0, epsilon = 1e-12);
                assert_abs_diff_eq!(variance[0], 1.0, epsilon = 1e-12);
            }
            _ => panic!("gaussian model must yield normal conditionals"),
        }
    }

    #[test]
    fn gibbs_step_fair_coin_sampler() {
        let rbm = RbmParams::zeros(2, 2, UnitKind::Binary);
        let mut rng = RngStream::new(11).rng();
        let mut v = array![0.0, 0.0];
        let mut hidden_sum = array![0.0, 0.0];
        let n = 10_000;
        for _ in 0..n {
            let (h, v_next) = gibbs_step(&rbm, v.view(), &mut rng).unwrap();
            hidden_sum += &h;
            v = v_next;
        }
        for &s in hidden_sum.iter() {
            let mean = s / n as f64;
            assert!((mean - 0.5).abs() < 0.02, "hidden mean {mean} outside 0.5 +/- 0.02");
        }
    }

    #[test]
    fn gibbs_step_is_deterministic_under_fixed_seed() {
        let mut rng = RngStream::new(3).rng();
        let mut rbm = RbmParams::random(3, 2, UnitKind::Binary, &mut rng);
        rbm.visible_bias = array![0.2, -0.1, 0.4];
        let v = array![1.0, 0.0, 1.0];
        let out1 = gibbs_step(&rbm, v.view(), &mut RngStream::new(5).child(1).rng()).unwrap();
        let out2 = gibbs_step(&rbm, v.view(), &mut RngStream::new(5).child(1).rng()).unwrap();
        assert_eq!(out1, out2);
    }

    #[test]
    fn validate_rejects_nonpositive_variance() {
        let mut rbm = RbmParams::zeros(2, 2, UnitKind::Gaussian);
        rbm.visible_variance[0] = 0.0;
        assert!(rbm.validate().is_err());
    }

    #[test]
    fn energy_invariant_under_hidden_relabeling() {
        let mut rng = RngStream::new(9).rng();
        let mut rbm = RbmParams::random(3, 4, UnitKind::Binary, &mut rng);
        for b in rbm.hidden_bias.iter_mut() {
            *b = rng.random::<f64>() - 0.5;
        }
        let v = array![1.0, 0.0, 1.0];
        let h = array![1.0, 0.0, 1.0, 0.0];
        let e = energy(&rbm, v.view(), h.view()).unwrap();

        // relabel hidden units by perm (new_j takes old_j's column, bias and state)
        let perm = [3usize, 0, 2, 1];
        let mut permuted = rbm.clone();
        let mut h_perm = h.clone();
        for (new_j, &old_j) in perm.iter().enumerate() {
            permuted
                .weights
                .column_mut(new_j)
                .assign(&rbm.weights.column(old_j));
            permuted.hidden_bias[new_j] = rbm.hidden_bias[old_j];
            h_perm[new_j] = h[old_j];
        }
        let e_perm = energy(&permuted, v.view(), h_perm.view()).unwrap();
        assert_abs_diff_eq!(e, e_perm, epsilon = 1e-12);
    }
}
