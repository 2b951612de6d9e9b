//! Step selection for finite-difference estimates.
//!
//! Estimates are formed at step `h` and `h/2` on a geometric ladder of
//! trial steps. The pair that agrees best wins and is combined by one
//! Richardson step, assuming an `O(h²)` leading error (central differences).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub initial: f64,
    /// Ratio between consecutive trial steps.
    pub shrink: f64,
    pub max_trials: usize,
    /// Accept immediately below this relative disagreement.
    pub early_exit: f64,
    /// Fail with `StepError` above this relative disagreement.
    pub fail_above: f64,
}

impl StepPolicy {
    pub fn new(initial: f64) -> Self {
        StepPolicy {
            initial,
            shrink: 0.1,
            max_trials: 24,
            early_exit: 1e-9,
            fail_above: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined {
    pub value: f64,
    pub step: f64,
    /// Relative disagreement between the `h` and `h/2` estimates.
    pub disagreement: f64,
}

/// Runs `estimate` on the step ladder and returns the extrapolated value.
///
/// Trial steps where `estimate` errors (e.g. the perturbed point leaves
/// the stable region) are skipped.
pub fn refine<F>(policy: StepPolicy, mut estimate: F) -> Result<Refined>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(policy.initial > 0.0 && policy.initial.is_finite()) {
        return Err(Error::Step(format!(
            "initial step {} must be positive",
            policy.initial
        )));
    }
    let mut best: Option<Refined> = None;
    let mut last_err = None;
    let mut h = policy.initial;
    for _ in 0..policy.max_trials {
        let pair = estimate(h).and_then(|coarse| Ok((coarse, estimate(0.5 * h)?)));
        match pair {
            Ok((coarse, fine)) if coarse.is_finite() && fine.is_finite() => {
                let scale = coarse.abs().max(fine.abs());
                let disagreement = if scale == 0.0 {
                    0.0
                } else {
                    (coarse - fine).abs() / scale
                };
                let candidate = Refined {
                    value: (4.0 * fine - coarse) / 3.0,
                    step: h,
                    disagreement,
                };
                if best.is_none_or(|b| disagreement < b.disagreement) {
                    best = Some(candidate);
                }
                if disagreement <= policy.early_exit {
                    break;
                }
            }
            Ok(_) => last_err = Some(Error::Step(format!("non-finite estimate at step {h:e}"))),
            Err(e) => last_err = Some(e),
        }
        h *= policy.shrink;
        if h < f64::MIN_POSITIVE {
            break;
        }
    }
    match best {
        Some(b) if b.disagreement <= policy.fail_above => Ok(b),
        Some(b) => Err(Error::Step(format!(
            "estimates at h and h/2 disagree by {:.3e} (> {:.1e}) at best step {:e}",
            b.disagreement, policy.fail_above, b.step
        ))),
        None => Err(last_err.unwrap_or_else(|| Error::Step("no usable step".into()))),
    }
}
