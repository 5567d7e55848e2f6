//! The scoring rule shared by every decoder and by the exhaustive oracle.
//!
//! A label sequence is scored segment by segment:
//!
//! ```text
//! score = start(c_1) + sum_k [ trans(c_{k-1} -> c_k) ] + sum_t ln max(P[t, y_t], eps)
//!       + sum_k dur(c_k, len_k) + end(c_K)
//! ```
//!
//! Self-continuation carries no transition term. Each violated constraint
//! contributes a penalty: `-inf` in hard mode, a finite `-lambda` (scaled by
//! the relevant weight) in soft mode, and nothing at all in classical mode
//! except for switches missing from a sparse transition table.

use std::collections::BTreeSet;

use crate::constraints::{ConstraintSet, DurationBounds, TransitionTable};
use crate::probs::FrameProbMatrix;
use crate::sequence::segments_of;

use super::{DecodeConfig, Mode, TransitionPrior};

#[derive(Debug, Clone, Copy)]
pub(crate) enum TransitionRule<'a> {
    /// `weight * ln max(conf, floor)` for stored pairs, `invalid` otherwise.
    Table {
        table: &'a TransitionTable,
        weight: f64,
        invalid: f64,
    },
    /// The same score for every switch.
    Uniform { score: f64 },
}

/// A fully resolved objective: which constraints apply and what each
/// violation costs.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub(crate) num_classes: usize,
    pub(crate) floor: f64,
    pub(crate) start: Option<(&'a BTreeSet<usize>, f64)>,
    pub(crate) end: Option<(&'a BTreeSet<usize>, f64)>,
    pub(crate) transitions: TransitionRule<'a>,
    pub(crate) durations: Option<(&'a DurationBounds, f64)>,
}

impl<'a> Objective<'a> {
    /// The objective for `cfg.mode` under `cs`.
    pub fn for_config(cs: &'a ConstraintSet, cfg: &DecodeConfig) -> Self {
        match cfg.mode {
            Mode::Classical => Self::classical(cs.num_classes(), TransitionPrior::Table(cs.transitions()), cfg),
            Mode::Hard => Self::constrained(cs, cfg, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            Mode::Soft => {
                let lambda = cfg.soft_penalty;
                Self::constrained(cs, cfg, -lambda, -cfg.w_transition * lambda, -cfg.w_duration * lambda)
            }
        }
    }

    fn constrained(cs: &'a ConstraintSet, cfg: &DecodeConfig, boundary: f64, transition: f64, duration: f64) -> Self {
        Self {
            num_classes: cs.num_classes(),
            floor: cfg.epsilon_floor,
            start: Some((cs.start_set(), boundary)),
            end: Some((cs.end_set(), boundary)),
            transitions: TransitionRule::Table {
                table: cs.transitions(),
                weight: cfg.w_transition,
                invalid: transition,
            },
            durations: Some((cs.durations(), duration)),
        }
    }

    /// Unconstrained Viterbi objective: emissions plus switch scores only.
    pub fn classical(num_classes: usize, prior: TransitionPrior<'a>, cfg: &DecodeConfig) -> Self {
        let transitions = match prior {
            TransitionPrior::Table(table) => TransitionRule::Table {
                table,
                weight: cfg.w_transition,
                invalid: f64::NEG_INFINITY,
            },
            TransitionPrior::Uniform => TransitionRule::Uniform {
                score: if num_classes > 1 {
                    cfg.w_transition * (1.0 / (num_classes - 1) as f64).max(cfg.epsilon_floor).ln()
                } else {
                    0.0
                },
            },
        };
        Self {
            num_classes,
            floor: cfg.epsilon_floor,
            start: None,
            end: None,
            transitions,
            durations: None,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub(crate) fn start_score(&self, class: usize) -> f64 {
        gate(self.start, class)
    }

    pub(crate) fn end_score(&self, class: usize) -> f64 {
        gate(self.end, class)
    }

    pub(crate) fn transition_score(&self, from: usize, to: usize) -> f64 {
        match self.transitions {
            TransitionRule::Table { table, weight, invalid } => match table.get(from, to) {
                Some(conf) => weight * conf.max(self.floor).ln(),
                None => invalid,
            },
            TransitionRule::Uniform { score } => score,
        }
    }

    pub(crate) fn interior_duration_score(&self, class: usize, len: usize, total: usize) -> f64 {
        match self.durations {
            Some((bounds, penalty)) if !bounds.get(class).admits_interior(len, total) => penalty,
            _ => 0.0,
        }
    }

    pub(crate) fn final_duration_score(&self, class: usize, len: usize, total: usize) -> f64 {
        match self.durations {
            Some((bounds, penalty)) if !bounds.get(class).admits_final(len, total) => penalty,
            _ => 0.0,
        }
    }

    /// Objective value of `labels`; `-inf` when a hard constraint is broken.
    pub fn score(&self, probs: &FrameProbMatrix, labels: &[usize]) -> f64 {
        self.accumulate(probs, labels, |_| {})
    }

    /// Running objective after each frame. Segment-level terms are charged
    /// on the first frame (switch, start) or last frame (duration, end).
    pub fn trace(&self, probs: &FrameProbMatrix, labels: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(labels.len());
        self.accumulate(probs, labels, |v| out.push(v));
        out
    }

    fn accumulate(&self, probs: &FrameProbMatrix, labels: &[usize], mut on_frame: impl FnMut(f64)) -> f64 {
        let total = labels.len();
        let segments = segments_of(labels);
        let last = segments.len() - 1;
        let mut acc = 0.0;
        let mut prev: Option<usize> = None;
        for (k, seg) in segments.iter().enumerate() {
            acc += match prev {
                None => self.start_score(seg.class),
                Some(p) => self.transition_score(p, seg.class),
            };
            for t in seg.start..=seg.end {
                acc += probs.get(t, seg.class).max(self.floor).ln();
                if t == seg.end {
                    if k == last {
                        acc += self.final_duration_score(seg.class, seg.len(), total);
                        acc += self.end_score(seg.class);
                    } else {
                        acc += self.interior_duration_score(seg.class, seg.len(), total);
                    }
                }
                on_frame(acc);
            }
            prev = Some(seg.class);
        }
        acc
    }
}

fn gate(g: Option<(&BTreeSet<usize>, f64)>, class: usize) -> f64 {
    match g {
        Some((set, penalty)) if !set.contains(&class) => penalty,
        _ => 0.0,
    }
}
