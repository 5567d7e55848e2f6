use serde::Serialize;

use crate::constraints::ConstraintSet;
use crate::sequence::segments_of;

/// One broken constraint in a label sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Start {
        class: usize,
    },
    End {
        class: usize,
    },
    /// Switch at frame `t` from `from` (frame `t - 1`) to `to`.
    Transition {
        t: usize,
        from: usize,
        to: usize,
    },
    Duration {
        segment: usize,
        class: usize,
        start: usize,
        end: usize,
        fraction: f64,
        d_min: f64,
        d_max: f64,
        is_final: bool,
    },
}

/// Lists every constraint of `cs` that `labels` breaks.
///
/// Duration checks use the same length predicates as the decoders: the
/// final segment is only checked against `d_max`.
pub fn validate(labels: &[usize], cs: &ConstraintSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let total = labels.len();
    let segments = segments_of(labels);
    let Some(first) = segments.first() else {
        return out;
    };
    if !cs.start_set().contains(&first.class) {
        out.push(Violation::Start { class: first.class });
    }
    for w in segments.as_slice().windows(2) {
        if !cs.transitions().contains(w[0].class, w[1].class) {
            out.push(Violation::Transition {
                t: w[1].start,
                from: w[0].class,
                to: w[1].class,
            });
        }
    }
    let last = segments.len() - 1;
    for (k, seg) in segments.iter().enumerate() {
        let bound = cs.durations().get(seg.class);
        let is_final = k == last;
        let ok = if is_final {
            bound.admits_final(seg.len(), total)
        } else {
            bound.admits_interior(seg.len(), total)
        };
        if !ok {
            out.push(Violation::Duration {
                segment: k,
                class: seg.class,
                start: seg.start,
                end: seg.end,
                fraction: seg.len() as f64 / total as f64,
                d_min: bound.d_min,
                d_max: bound.d_max,
                is_final,
            });
        }
    }
    let end = segments.last().expect("non-empty").class;
    if !cs.end_set().contains(&end) {
        out.push(Violation::End { class: end });
    }
    out
}
