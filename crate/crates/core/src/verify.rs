//! Self-check suites exposed to the command line: each check compares a
//! stochastic or backpropagated quantity against an independent oracle
//! (exact enumeration over all joint states, or central finite differences)
//! and reports pass/fail with a measured margin.

use crate::error::Result;
use crate::rbm::{
    cd_update, exact_loglik_gradient, exact_visible_marginals, exact_visible_probabilities,
    CdConfig, RbmGradient, RbmParams, UnitKind,
};
use crate::rng::RngStream;
use crate::ta::{
    ta_forward_crbm_batch, ta_forward_trbm_batch, ta_gradient_crbm, ta_gradient_trbm, ta_loss,
    OutputActivation, TaConfig,
};
use crate::temporal::{CrbmParams, TrbmParams, WindowBatch};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Breadth of the suite: `Quick` runs one instance per check, `Full` runs
/// the whole set of instances each check is specified over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    Quick,
    Full,
}

/// Fault-injection hook proving the suite can catch a regression: flipping
/// the CD gradient's sign must fail the direction check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VerifyMutation {
    #[default]
    None,
    FlipCdGradientSign,
}

/// Outcome of one check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Measured margin, e.g. the worst deviation against its tolerance.
    pub detail: String,
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

fn small_binary_rbm(rng: &mut ChaCha8Rng) -> RbmParams {
    let mut rbm = RbmParams::random(3, 2, UnitKind::Binary, rng);
    rbm.weights.mapv_inplace(|w| w * 80.0); // lift to O(1) couplings
    rbm.visible_bias.mapv_inplace(|_| rng.random::<f64>() - 0.5);
    rbm.hidden_bias.mapv_inplace(|_| rng.random::<f64>() - 0.5);
    rbm
}

fn binary_frames(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        if rng.random::<f64>() < 0.5 {
            1.0
        } else {
            0.0
        }
    })
}

/// Enumerated visible-state probabilities must form a distribution.
fn check_normalization(models: usize, lane: &RngStream) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for i in 0..models {
        let rbm = small_binary_rbm(&mut lane.child(i as u64).rng());
        let sum: f64 = exact_visible_probabilities(&rbm)?.iter().sum();
        worst = worst.max((sum - 1.0).abs());
    }
    Ok(CheckResult {
        name: "enumeration-normalization",
        passed: worst < 1e-10,
        detail: format!("max |sum - 1| = {worst:.3e} over {models} models (tolerance 1e-10)"),
    })
}

/// The mean of many seeded CD-1 gradients should point along the enumerated
/// log-likelihood gradient.
fn check_cd_direction(
    models: usize,
    trials: u64,
    mutation: VerifyMutation,
    lane: &RngStream,
) -> Result<CheckResult> {
    let cfg = CdConfig {
        learning_rate: 0.0, // keep parameters fixed; we only want the gradient
        momentum: 0.0,
        ..CdConfig::default()
    };
    let mut worst = f64::INFINITY;
    for i in 0..models {
        let model_lane = lane.child(i as u64);
        let rbm = small_binary_rbm(&mut model_lane.child(0).rng());
        let data = binary_frames(10, 3, &mut model_lane.child(1).rng());
        let ids: Vec<u64> = (0..data.nrows() as u64).collect();
        let exact = exact_loglik_gradient(&rbm, data.view())?;

        let mut mean = RbmGradient::zeros_like(&rbm);
        for trial in 0..trials {
            let mut scratch = rbm.clone();
            let mut vel = RbmGradient::zeros_like(&rbm);
            let grad = cd_update(
                &mut scratch,
                data.view(),
                &ids,
                &cfg,
                &mut vel,
                &model_lane.child(2).child(trial),
            )?;
            mean.add(&grad);
        }
        mean.scale(1.0 / trials as f64);
        if mutation == VerifyMutation::FlipCdGradientSign {
            mean.scale(-1.0);
        }
        worst = worst.min(mean.cosine_similarity(&exact));
    }
    Ok(CheckResult {
        name: "cd-gradient-direction",
        passed: worst > 0.8,
        detail: format!(
            "min cosine = {worst:.4} over {models} models x {trials} updates (threshold 0.8)"
        ),
    })
}

const FD_STEP: f64 = 1e-6;
const FD_TOLERANCE: f64 = 1e-5;

fn fd_rel_error(fd: f64, analytic: f64) -> f64 {
    let denom = fd.abs().max(analytic.abs()).max(1e-10);
    (fd - analytic).abs() / denom
}

/// Every backpropagated gradient component of the autoencoding loss is
/// compared against a central finite difference.
fn check_ta_gradients(instances: &[(UnitKind, OutputActivation)], lane: &RngStream) -> Result<CheckResult> {
    let (order, n, m, q) = (3usize, 5usize, 4usize, 4usize);
    let depth = order; // all delays active
    let mut worst = 0.0f64;
    let mut components = 0usize;

    for (i, &(kind, out)) in instances.iter().enumerate() {
        let mut rng = lane.child(i as u64).rng();
        let mut base = RbmParams::random(n, m, kind, &mut rng);
        base.weights.mapv_inplace(|w| w * 60.0);
        base.visible_bias.mapv_inplace(|_| rng.random::<f64>() - 0.5);
        base.hidden_bias.mapv_inplace(|_| rng.random::<f64>() - 0.5);
        let frames = Array2::from_shape_fn((q + order, n), |_| rng.random::<f64>() - 0.5);
        let ds = crate::data::SequenceDataset::new(frames);
        let ws = crate::data::windows(&ds, order, 0..q + order)?;
        let batch = WindowBatch::from_windows(&ws)?;
        let cfg = TaConfig {
            update_biases: true,
            update_static: true,
            output_activation: out,
            ..TaConfig::default_for(kind)
        };

        // TRBM instance
        {
            let mut model = TrbmParams::from_static(base.clone(), order);
            for w in &mut model.delayed_hidden {
                *w = Array2::from_shape_fn((m, m), |_| rng.random::<f64>() - 0.5);
            }
            let (_, grad) = ta_gradient_trbm(&model, &batch, depth, &cfg)?;
            let loss = |m: &TrbmParams| -> Result<f64> {
                let (pred, _) = ta_forward_trbm_batch(m, &batch, depth, out)?;
                let mut sum = 0.0;
                for (p, t) in pred.rows().into_iter().zip(batch.present.rows()) {
                    sum += ta_loss(t, p)?;
                }
                Ok(sum / q as f64)
            };
            let mut probe = |slot: &mut dyn FnMut(&mut TrbmParams) -> &mut f64,
                             analytic: f64|
             -> Result<f64> {
                *slot(&mut model) += FD_STEP;
                let plus = loss(&model)?;
                *slot(&mut model) -= 2.0 * FD_STEP;
                let minus = loss(&model)?;
                *slot(&mut model) += FD_STEP;
                Ok(fd_rel_error((plus - minus) / (2.0 * FD_STEP), analytic))
            };
            for d in 0..order {
                for r in 0..m {
                    for c in 0..m {
                        let g = grad.delayed_hidden[d][[r, c]];
                        worst = worst.max(probe(&mut |mm| &mut mm.delayed_hidden[d][[r, c]], g)?);
                        components += 1;
                    }
                }
            }
            for r in 0..n {
                for c in 0..m {
                    let g = grad.rbm.weights[[r, c]];
                    worst = worst.max(probe(&mut |mm| &mut mm.base.weights[[r, c]], g)?);
                    components += 1;
                }
            }
            for idx in 0..n {
                let g = grad.rbm.visible_bias[idx];
                worst = worst.max(probe(&mut |mm| &mut mm.base.visible_bias[idx], g)?);
                components += 1;
            }
            for idx in 0..m {
                let g = grad.rbm.hidden_bias[idx];
                worst = worst.max(probe(&mut |mm| &mut mm.base.hidden_bias[idx], g)?);
                components += 1;
            }
        }

        // CRBM instance
        {
            let mut model = CrbmParams::from_static(base.clone(), order);
            for w in &mut model.delayed_to_hidden {
                *w = Array2::from_shape_fn((n, m), |_| rng.random::<f64>() - 0.5);
            }
            let (_, grad) = ta_gradient_crbm(&model, &batch, depth, &cfg)?;
            let loss = |m: &CrbmParams| -> Result<f64> {
                let (pred, _) = ta_forward_crbm_batch(m, &batch, depth, out)?;
                let mut sum = 0.0;
                for (p, t) in pred.rows().into_iter().zip(batch.present.rows()) {
                    sum += ta_loss(t, p)?;
                }
                Ok(sum / q as f64)
            };
            let mut probe = |slot: &mut dyn FnMut(&mut CrbmParams) -> &mut f64,
                             analytic: f64|
             -> Result<f64> {
                *slot(&mut model) += FD_STEP;
                let plus = loss(&model)?;
                *slot(&mut model) -= 2.0 * FD_STEP;
                let minus = loss(&model)?;
                *slot(&mut model) += FD_STEP;
                Ok(fd_rel_error((plus - minus) / (2.0 * FD_STEP), analytic))
            };
            for d in 0..order {
                for r in 0..n {
                    for c in 0..m {
                        let g = grad.delayed_to_hidden[d][[r, c]];
                        worst =
                            worst.max(probe(&mut |mm| &mut mm.delayed_to_hidden[d][[r, c]], g)?);
                        components += 1;
                    }
                }
            }
            for r in 0..n {
                for c in 0..m {
                    let g = grad.rbm.weights[[r, c]];
                    worst = worst.max(probe(&mut |mm| &mut mm.base.weights[[r, c]], g)?);
                    components += 1;
                }
            }
            for idx in 0..n {
                let g = grad.rbm.visible_bias[idx];
                worst = worst.max(probe(&mut |mm| &mut mm.base.visible_bias[idx], g)?);
                components += 1;
            }
            for idx in 0..m {
                let g = grad.rbm.hidden_bias[idx];
                worst = worst.max(probe(&mut |mm| &mut mm.base.hidden_bias[idx], g)?);
                components += 1;
            }
        }
    }
    Ok(CheckResult {
        name: "ta-finite-differences",
        passed: worst < FD_TOLERANCE,
        detail: format!(
            "max relative error = {worst:.3e} over {components} components (tolerance {FD_TOLERANCE:.0e})"
        ),
    })
}

/// Long-run Gibbs visible marginals against enumeration, judged in binomial
/// standard errors.
fn check_sampler(chains: usize, burn_in: usize, lane: &RngStream) -> Result<CheckResult> {
    let rbm = small_binary_rbm(&mut lane.child(0).rng());
    let exact = exact_visible_marginals(&rbm)?;

    let n = rbm.n_visible();
    let mut counts = vec![0.0f64; n];
    for chain in 0..chains {
        let mut rng = lane.child(1).child(chain as u64).rng();
        let mut v = ndarray::Array1::from_shape_fn(n, |_| {
            if rng.random::<f64>() < 0.5 {
                1.0
            } else {
                0.0
            }
        });
        for _ in 0..burn_in {
            let (_, next) = crate::rbm::gibbs_step(&rbm, v.view(), &mut rng)?;
            v = next;
        }
        for (c, x) in counts.iter_mut().zip(v.iter()) {
            *c += x;
        }
    }

    let mut worst = 0.0f64;
    for (i, &c) in counts.iter().enumerate() {
        let estimate = c / chains as f64;
        let p = exact[i];
        let se = (p * (1.0 - p) / chains as f64).sqrt().max(1e-12);
        worst = worst.max((estimate - p).abs() / se);
    }
    Ok(CheckResult {
        name: "sampler-frequencies",
        passed: worst <= 3.0,
        detail: format!(
            "worst deviation = {worst:.2} standard errors over {chains} chains (threshold 3)"
        ),
    })
}

/// Run all checks and collect their outcomes; the caller decides how to
/// render and whether to treat failures as fatal.
pub fn run_suite(
    level: VerifyLevel,
    mutation: VerifyMutation,
    seed: u64,
) -> Result<Vec<CheckResult>> {
    let root = RngStream::new(seed);
    let (models, ta_instances): (usize, &[(UnitKind, OutputActivation)]) = match level {
        VerifyLevel::Quick => (
            1,
            &[(UnitKind::Gaussian, OutputActivation::Identity)],
        ),
        VerifyLevel::Full => (
            5,
            &[
                (UnitKind::Gaussian, OutputActivation::Identity),
                (UnitKind::Binary, OutputActivation::Sigmoid),
            ],
        ),
    };
    Ok(vec![
        check_normalization(models, &root.child(0))?,
        check_cd_direction(models, 2000, mutation, &root.child(1))?,
        check_ta_gradients(ta_instances, &root.child(2))?,
        check_sampler(10_000, 50, &root.child(3))?,
    ])
}
