//! Exhaustive search over every label sequence, for verifying the DP on
//! small instances.

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::probs::FrameProbMatrix;
use crate::sequence::LabelSequence;

use super::objective::Objective;
use super::{check_inputs, DecodeConfig, DecodeResult, Fallback, Mode, TransitionPrior};

/// Largest `C^T` the oracle will enumerate.
pub const ORACLE_LIMIT: u64 = 10_000_000;

/// Maximizes the same objective as [`super::decode`] by enumerating all
/// `C^T` sequences in lexicographic order. Among equal scores the
/// lexicographically smallest sequence wins.
pub fn oracle_decode(probs: &FrameProbMatrix, cs: &ConstraintSet, cfg: &DecodeConfig) -> Result<DecodeResult> {
    check_inputs(probs, cs, cfg)?;
    let objective = Objective::for_config(cs, cfg);
    match enumerate(&objective, probs)? {
        Some((labels, score)) => {
            let feasible = match cfg.mode {
                Mode::Hard | Mode::Classical => true,
                Mode::Soft => super::validate(&labels, cs).is_empty(),
            };
            Ok(DecodeResult {
                labels: LabelSequence::new(labels, cs.num_classes())?,
                log_score: score,
                feasible,
                used_fallback: false,
                trace: None,
            })
        }
        None => match cfg.infeasible_fallback {
            Fallback::Error => Err(Error::InfeasibleConstraints),
            Fallback::Classical => {
                let classical = Objective::classical(cs.num_classes(), TransitionPrior::Table(cs.transitions()), cfg);
                let (labels, score) = enumerate(&classical, probs)?.ok_or(Error::InfeasibleConstraints)?;
                Ok(DecodeResult {
                    labels: LabelSequence::new(labels, cs.num_classes())?,
                    log_score: score,
                    feasible: false,
                    used_fallback: true,
                    trace: None,
                })
            }
        },
    }
}

/// Exhaustive maximization of an arbitrary objective.
pub fn oracle_maximize(objective: &Objective<'_>, probs: &FrameProbMatrix) -> Result<Option<(Vec<usize>, f64)>> {
    enumerate(objective, probs)
}

fn enumerate(objective: &Objective<'_>, probs: &FrameProbMatrix) -> Result<Option<(Vec<usize>, f64)>> {
    let frames = probs.frames();
    let classes = objective.num_classes();
    let too_large = || Error::InstanceTooLarge {
        num_classes: classes,
        frames,
    };
    let count = (classes as u64)
        .checked_pow(u32::try_from(frames).map_err(|_| too_large())?)
        .ok_or_else(too_large)?;
    if count > ORACLE_LIMIT {
        return Err(too_large());
    }

    let mut labels = vec![0usize; frames];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let score = objective.score(probs, &labels);
        if score > f64::NEG_INFINITY && best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((labels.clone(), score));
        }
        // odometer with the most significant digit at frame 0
        let mut i = frames;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            labels[i] += 1;
            if labels[i] < classes {
                break;
            }
            labels[i] = 0;
        }
    }
}
