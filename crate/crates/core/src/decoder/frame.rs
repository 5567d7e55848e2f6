//! Frame-level constrained Viterbi with a per-state duration tracker.
//!
//! Each `(t, c)` cell keeps one score `V`, the length `D` of the segment on
//! its best path, and a backpointer `B`. Continuing a segment is allowed
//! while `D / T < d_max`; switching out of `c'` needs `D / T >= d_min(c')`
//! and a stored transition; the last segment needs `D / T <= d_max`.
//!
//! Only the duration of the *best* path into a cell survives, so a path that
//! is worse so far but could later satisfy a duration bound is discarded.
//! The result is always feasible when one is returned, but not necessarily
//! optimal, and some feasible instances are reported infeasible. The
//! segment-level search in [`super::segmental`] is exact.

use crate::constraints::ConstraintSet;
use crate::probs::FrameProbMatrix;

const NONE: u32 = u32::MAX;

/// Scores, current-segment lengths and backpointers of the recurrence.
struct FrameDpState {
    classes: usize,
    score: Vec<f64>,
    duration: Vec<u32>,
    back: Vec<u32>,
}

impl FrameDpState {
    fn new(frames: usize, classes: usize) -> Self {
        Self {
            classes,
            score: vec![f64::NEG_INFINITY; frames * classes],
            duration: vec![0; frames * classes],
            back: vec![NONE; frames * classes],
        }
    }

    fn idx(&self, t: usize, c: usize) -> usize {
        t * self.classes + c
    }
}

pub(crate) fn maximize(
    cs: &ConstraintSet,
    probs: &FrameProbMatrix,
    w_transition: f64,
    floor: f64,
) -> Option<Vec<usize>> {
    let frames = probs.frames();
    let classes = cs.num_classes();
    let total = frames as f64;
    let durations = cs.durations();

    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); classes];
    for (from, to, conf) in cs.transitions().iter() {
        incoming[to].push((from, w_transition * conf.max(floor).ln()));
    }

    // a new segment has length 1, admissible only if (1 - 1) / T < d_max
    let enterable: Vec<bool> = durations.iter().map(|b| b.d_max > 0.0).collect();

    let mut st = FrameDpState::new(frames, classes);
    for &c in cs.start_set().iter().filter(|&&c| enterable[c]) {
        let i = st.idx(0, c);
        st.score[i] = probs.get(0, c).max(floor).ln();
        st.duration[i] = 1;
    }

    for t in 1..frames {
        for c in 0..classes {
            let emit = probs.get(t, c).max(floor).ln();
            let prev = st.idx(t - 1, c);
            let mut best = f64::NEG_INFINITY;
            let mut back = NONE;
            let mut dur = 0;
            if st.score[prev] > f64::NEG_INFINITY && (st.duration[prev] as f64) / total < durations.get(c).d_max {
                best = st.score[prev] + emit;
                back = c as u32;
                dur = st.duration[prev] + 1;
            }
            for &(from, switch) in incoming[c].iter().filter(|_| enterable[c]) {
                let p = st.idx(t - 1, from);
                if st.score[p] == f64::NEG_INFINITY || (st.duration[p] as f64) / total < durations.get(from).d_min {
                    continue;
                }
                let cand = st.score[p] + switch + emit;
                if cand > best {
                    best = cand;
                    back = from as u32;
                    dur = 1;
                }
            }
            let i = st.idx(t, c);
            st.score[i] = best;
            st.back[i] = back;
            st.duration[i] = dur;
        }
    }

    let last = frames - 1;
    let mut end: Option<(usize, f64)> = None;
    for &c in cs.end_set() {
        let i = st.idx(last, c);
        if st.score[i] > f64::NEG_INFINITY
            && (st.duration[i] as f64) / total <= durations.get(c).d_max
            && end.is_none_or(|(_, b)| st.score[i] > b)
        {
            end = Some((c, st.score[i]));
        }
    }
    let (mut class, _) = end?;

    let mut labels = vec![0; frames];
    labels[last] = class;
    for t in (0..last).rev() {
        class = st.back[st.idx(t + 1, class)] as usize;
        labels[t] = class;
    }
    Some(labels)
}
