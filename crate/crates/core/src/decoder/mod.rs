//! Constraint-aware Viterbi decoding.
//!
//! Three modes share one objective (see [`Objective`]):
//!
//! - [`Mode::Hard`]: start, end, transition and duration constraints are
//!   inviolable;
//! - [`Mode::Soft`]: each violation costs a finite penalty `lambda`;
//! - [`Mode::Classical`]: plain Viterbi over emissions and transition
//!   confidences, ignoring start/end/duration constraints.
//!
//! All modes are solved exactly by [`segmental`]. The frame-level
//! recurrence with a single duration tracker per state is available as
//! [`decode_frame_recurrence`] for comparison.

mod frame;
mod objective;
mod oracle;
mod segmental;
mod validate;

use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSet, TransitionTable};
use crate::error::{Error, Result};
use crate::probs::FrameProbMatrix;
use crate::sequence::LabelSequence;

pub use objective::Objective;
pub use oracle::{oracle_decode, oracle_maximize, ORACLE_LIMIT};
pub use validate::{validate, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Hard,
    Soft,
    Classical,
}

/// What hard decoding does when no sequence satisfies the constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    Error,
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub mode: Mode,
    /// Scales `ln Conf` in every mode and the invalid-switch penalty in soft mode.
    pub w_transition: f64,
    /// Scales the duration penalty in soft mode.
    pub w_duration: f64,
    /// `lambda`, the soft-mode cost of one violation.
    pub soft_penalty: f64,
    /// Probabilities and confidences are floored here before taking logs.
    pub epsilon_floor: f64,
    pub infeasible_fallback: Fallback,
    /// Keep the running objective per frame in [`DecodeResult::trace`].
    pub record_trace: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Hard,
            w_transition: 1.0,
            w_duration: 1.0,
            soft_penalty: 10.0,
            epsilon_floor: 1e-10,
            infeasible_fallback: Fallback::Error,
            record_trace: false,
        }
    }
}

impl DecodeConfig {
    pub fn hard() -> Self {
        Self::default()
    }

    pub fn soft(lambda: f64) -> Self {
        Self {
            mode: Mode::Soft,
            soft_penalty: lambda,
            ..Self::default()
        }
    }

    pub fn classical() -> Self {
        Self {
            mode: Mode::Classical,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, name: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )))
            }
        };
        nonneg(self.w_transition, "w_transition")?;
        nonneg(self.w_duration, "w_duration")?;
        nonneg(self.soft_penalty, "soft_penalty")?;
        if !(self.epsilon_floor > 0.0 && self.epsilon_floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon_floor must be positive, got {}",
                self.epsilon_floor
            )));
        }
        Ok(())
    }
}

/// Source of switch confidences for classical decoding.
#[derive(Debug, Clone, Copy)]
pub enum TransitionPrior<'a> {
    /// Stored pairs only; switches missing from the table are forbidden.
    Table(&'a TransitionTable),
    /// Every switch has confidence `1 / (C - 1)`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResult {
    pub labels: LabelSequence,
    /// Objective value of `labels`, recomputed with [`Objective::score`].
    pub log_score: f64,
    /// Hard/classical: a solution of the requested problem was found.
    /// Soft: the labels also satisfy every constraint.
    pub feasible: bool,
    pub used_fallback: bool,
    /// Running objective per frame, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

pub(crate) fn check_inputs(probs: &FrameProbMatrix, cs: &ConstraintSet, cfg: &DecodeConfig) -> Result<()> {
    cfg.validate()?;
    if probs.classes() != cs.num_classes() {
        return Err(Error::DimensionMismatch {
            what: "probability matrix classes",
            expected: cs.num_classes(),
            found: probs.classes(),
        });
    }
    Ok(())
}

/// Decodes `probs` under `cs` in the mode selected by `cfg`.
pub fn decode(probs: &FrameProbMatrix, cs: &ConstraintSet, cfg: &DecodeConfig) -> Result<DecodeResult> {
    check_inputs(probs, cs, cfg)?;
    let objective = Objective::for_config(cs, cfg);
    match segmental::maximize(&objective, probs) {
        Some((labels, _)) => {
            let feasible = match cfg.mode {
                Mode::Hard | Mode::Classical => true,
                Mode::Soft => validate(&labels, cs).is_empty(),
            };
            finish(&objective, probs, labels, feasible, false, cfg)
        }
        None => match cfg.infeasible_fallback {
            Fallback::Error => Err(Error::InfeasibleConstraints),
            Fallback::Classical => {
                let classical = Objective::classical(cs.num_classes(), TransitionPrior::Table(cs.transitions()), cfg);
                let (labels, _) = segmental::maximize(&classical, probs).ok_or(Error::InfeasibleConstraints)?;
                finish(&classical, probs, labels, false, true, cfg)
            }
        },
    }
}

/// Hard-constrained decoding (the mode in `cfg` is overridden).
pub fn decode_constrained(probs: &FrameProbMatrix, cs: &ConstraintSet, cfg: &DecodeConfig) -> Result<DecodeResult> {
    decode(
        probs,
        cs,
        &DecodeConfig {
            mode: Mode::Hard,
            ..cfg.clone()
        },
    )
}

/// Soft-constrained decoding (the mode in `cfg` is overridden). Never infeasible.
pub fn decode_soft(probs: &FrameProbMatrix, cs: &ConstraintSet, cfg: &DecodeConfig) -> Result<DecodeResult> {
    decode(
        probs,
        cs,
        &DecodeConfig {
            mode: Mode::Soft,
            ..cfg.clone()
        },
    )
}

/// Classical Viterbi: no start, end or duration constraints.
pub fn decode_classical(
    probs: &FrameProbMatrix,
    prior: TransitionPrior<'_>,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    cfg.validate()?;
    if let TransitionPrior::Table(table) = prior {
        if table.num_classes() != probs.classes() {
            return Err(Error::DimensionMismatch {
                what: "probability matrix classes",
                expected: table.num_classes(),
                found: probs.classes(),
            });
        }
    }
    let objective = Objective::classical(probs.classes(), prior, cfg);
    // staying in one class is always allowed, so a path exists
    let (labels, _) = segmental::maximize(&objective, probs).expect("classical decoding is always feasible");
    finish(&objective, probs, labels, true, false, cfg)
}

/// Hard decoding with the frame-level recurrence that tracks a single
/// segment duration per `(t, c)` cell.
///
/// Any returned sequence satisfies `cs`, but the recurrence can miss the
/// optimum or report [`Error::InfeasibleConstraints`] on instances that do
/// have a feasible sequence. `cfg.mode` is ignored.
pub fn decode_frame_recurrence(
    probs: &FrameProbMatrix,
    cs: &ConstraintSet,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    check_inputs(probs, cs, cfg)?;
    let hard = DecodeConfig {
        mode: Mode::Hard,
        ..cfg.clone()
    };
    let objective = Objective::for_config(cs, &hard);
    match frame::maximize(cs, probs, cfg.w_transition, cfg.epsilon_floor) {
        Some(labels) => finish(&objective, probs, labels, true, false, cfg),
        None => match cfg.infeasible_fallback {
            Fallback::Error => Err(Error::InfeasibleConstraints),
            Fallback::Classical => {
                let mut res = decode_classical(probs, TransitionPrior::Table(cs.transitions()), cfg)?;
                res.feasible = false;
                res.used_fallback = true;
                Ok(res)
            }
        },
    }
}

fn finish(
    objective: &Objective<'_>,
    probs: &FrameProbMatrix,
    labels: Vec<usize>,
    feasible: bool,
    used_fallback: bool,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    let trace = cfg.record_trace.then(|| objective.trace(probs, &labels));
    let log_score = match &trace {
        Some(tr) => *tr.last().expect("non-empty"),
        None => objective.score(probs, &labels),
    };
    Ok(DecodeResult {
        labels: LabelSequence::new(labels, objective.num_classes())?,
        log_score,
        feasible,
        used_fallback,
        trace,
    })
}

/// A penalty large enough that soft decoding returns a violation-free
/// sequence whenever one exists, for rows with entries at most 1 and unit
/// weights: `sum_{t,c} |ln P| + T |ln min Conf| + 1`.
pub fn soft_limit_penalty(probs: &FrameProbMatrix, cs: &ConstraintSet, epsilon_floor: f64) -> f64 {
    let emissions: f64 = probs.log_floored(epsilon_floor).iter().map(|v| v.abs()).sum();
    let min_conf = cs.transitions().min_conf().unwrap_or(1.0).max(epsilon_floor);
    emissions + probs.frames() as f64 * min_conf.ln().abs() + 1.0
}
