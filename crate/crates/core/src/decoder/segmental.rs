//! Exact maximization of an [`Objective`] over label sequences.
//!
//! The search runs over segments rather than frames, so a segment's length
//! is known when its duration term is charged. Three tables drive it, each
//! indexed by frame and class:
//!
//! - `enter[s][c]`: best prefix score over frames `[0, s)` that then opens a
//!   `c`-segment at frame `s`, including the start or switch term;
//! - `close[t][c]`: best score over `[0, t]` where a `c`-segment ends at `t`
//!   and is followed by another segment;
//! - the backpointers of both.
//!
//! With prefix sums `pref[t][c]` of log-emissions, a segment `[s, t]` of
//! class `c` scores `pref[t+1][c] - pref[s][c]`, so
//!
//! ```text
//! close[t][c] = pref[t+1][c] + max_s ( enter[s][c] - pref[s][c] + dur(c, t - s + 1) )
//! ```
//!
//! Admissible lengths form one interval per class, so the max over `s` is a
//! sliding-window maximum kept in a monotone deque. Soft penalties need the
//! complement of the window too: a running max for starts that are too
//! early and a second deque for starts that are too late. Every frame costs
//! `O(C + |T|)` amortized, plus an `O(C log C)` sort when invalid switches
//! carry a finite score.

use std::collections::VecDeque;

use crate::probs::FrameProbMatrix;

use super::objective::{Objective, TransitionRule};

const NONE: u32 = u32::MAX;

/// Best labels and the DP's own value for them, or `None` when every
/// sequence scores `-inf`.
pub(crate) fn maximize(obj: &Objective<'_>, probs: &FrameProbMatrix) -> Option<(Vec<usize>, f64)> {
    let frames = probs.frames();
    let classes = obj.num_classes();
    debug_assert_eq!(probs.classes(), classes);

    let spans: Vec<LengthSpan> = (0..classes).map(|c| LengthSpan::new(obj, c, frames)).collect();
    // finite duration penalties make inadmissible lengths reachable
    let soft_durations = obj.durations.is_some_and(|(_, p)| p > f64::NEG_INFINITY);
    let duration_penalty = obj.durations.map_or(0.0, |(_, p)| p);

    // rows t and t + 1 of the prefix sums of floored log-emissions
    let mut pref = vec![0.0; classes];
    let mut pref_next = vec![0.0; classes];

    let switches = SwitchScores::new(obj);
    let start_score: Vec<f64> = (0..classes).map(|c| obj.start_score(c)).collect();

    // open[s][c] = enter[s][c] - pref[s][c]
    let mut open = vec![f64::NEG_INFINITY; frames * classes];
    let mut enter_from = vec![NONE; frames * classes];
    let mut close_start = vec![NONE; frames * classes];
    let mut close_prev = vec![f64::NEG_INFINITY; classes];
    let mut close_cur = vec![f64::NEG_INFINITY; classes];
    let mut ranked: Vec<usize> = (0..classes).collect();

    let mut inside: Vec<MaxQueue> = (0..classes).map(|_| MaxQueue::default()).collect();
    let mut too_late: Vec<MaxQueue> = (0..classes).map(|_| MaxQueue::default()).collect();
    let mut too_early: Vec<Option<(usize, f64)>> = vec![None; classes];

    for t in 0..frames {
        for (c, p) in probs.row(t).iter().enumerate() {
            pref_next[c] = pref[c] + p.max(obj.floor).ln();
        }

        // open segments at frame t
        if t == 0 {
            open[..classes].copy_from_slice(&start_score);
        } else {
            if switches.invalid > f64::NEG_INFINITY {
                ranked.sort_by(|&a, &b| close_prev[b].total_cmp(&close_prev[a]).then(a.cmp(&b)));
            }
            for c in 0..classes {
                let (best, from) = switches.best_entry(c, &close_prev, &ranked);
                open[t * classes + c] = best - pref[c];
                enter_from[t * classes + c] = from;
            }
        }

        if t + 1 == frames {
            break;
        }

        // close interior segments at frame t
        for c in 0..classes {
            let span = &spans[c];
            let q = &mut inside[c];
            if t + 1 >= span.min_interior {
                let s = t + 1 - span.min_interior;
                q.push(s, open[s * classes + c]);
            }
            if t + 1 >= span.max_interior {
                q.evict_before(t + 1 - span.max_interior);
            }
            let mut best = q.front().filter(|_| span.interior_nonempty());

            if soft_durations {
                if t >= span.max_interior {
                    let s = t - span.max_interior;
                    let v = open[s * classes + c];
                    match too_early[c] {
                        Some((_, old)) if old >= v => {}
                        _ => too_early[c] = Some((s, v)),
                    }
                }
                let late = &mut too_late[c];
                if span.min_interior >= 2 {
                    late.push(t, open[t * classes + c]);
                    if t + 2 >= span.min_interior {
                        late.evict_before(t + 2 - span.min_interior);
                    }
                }
                for cand in [too_early[c], late.front()].into_iter().flatten() {
                    let v = cand.1 + duration_penalty;
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((cand.0, v));
                    }
                }
            }

            match best {
                Some((s, v)) if v > f64::NEG_INFINITY => {
                    close_cur[c] = pref_next[c] + v;
                    close_start[t * classes + c] = s as u32;
                }
                _ => close_cur[c] = f64::NEG_INFINITY,
            }
        }
        std::mem::swap(&mut close_prev, &mut close_cur);
        std::mem::swap(&mut pref, &mut pref_next);
    }

    // final segment, row by row; ties go to the smallest (class, start)
    let last = frames - 1;
    let tails: Vec<f64> = (0..classes).map(|c| pref_next[c] + obj.end_score(c)).collect();
    let mut best: Option<(usize, usize, f64)> = None;
    for s in 0..frames {
        let len = frames - s;
        let row = &open[s * classes..(s + 1) * classes];
        for (c, span) in spans.iter().enumerate() {
            let dur = if len <= span.max_final { 0.0 } else { duration_penalty };
            let v = row[c] + dur + tails[c];
            let wins = match best {
                None => v > f64::NEG_INFINITY,
                Some((bc, bs, b)) => v > b || (v == b && (c, s) < (bc, bs)),
            };
            if wins {
                best = Some((c, s, v));
            }
        }
    }
    let (mut class, mut start, score) = best?;

    let mut labels = vec![0usize; frames];
    labels[start..=last].fill(class);
    while start > 0 {
        let prev = enter_from[start * classes + class];
        debug_assert_ne!(prev, NONE);
        let prev = prev as usize;
        let end = start - 1;
        let prev_start = close_start[end * classes + prev] as usize;
        labels[prev_start..=end].fill(prev);
        class = prev;
        start = prev_start;
    }
    Some((labels, score))
}

/// Admissible segment lengths of one class in a sequence of fixed length.
#[derive(Debug, Clone, Copy)]
struct LengthSpan {
    min_interior: usize,
    max_interior: usize,
    max_final: usize,
}

impl LengthSpan {
    fn new(obj: &Objective<'_>, class: usize, frames: usize) -> Self {
        let Some((bounds, _)) = obj.durations else {
            return Self {
                min_interior: 1,
                max_interior: frames,
                max_final: frames,
            };
        };
        let b = bounds.get(class);
        // both predicates are monotone in the length, so admissible lengths
        // are an interval
        let min_interior = (1..=frames)
            .find(|&l| b.admits_interior(l, frames))
            .unwrap_or(frames + 1);
        let max_interior = (1..=frames).rev().find(|&l| b.admits_interior(l, frames)).unwrap_or(0);
        let max_final = (1..=frames).rev().find(|&l| b.admits_final(l, frames)).unwrap_or(0);
        if min_interior > max_interior {
            // nothing admissible: an empty window that leaves every start
            // to the complement structures
            return Self {
                min_interior: frames + 1,
                max_interior: 0,
                max_final,
            };
        }
        Self {
            min_interior,
            max_interior,
            max_final,
        }
    }

    fn interior_nonempty(&self) -> bool {
        self.min_interior <= self.max_interior
    }
}

/// Switch scores arranged for the per-frame entry maximization.
struct SwitchScores {
    /// `incoming[c]`: stored switches `(from, score)` into `c`, ascending `from`.
    incoming: Vec<Vec<(usize, f64)>>,
    /// `stored[from * C + to]`
    stored: Vec<bool>,
    /// Score of any switch not in `incoming`.
    invalid: f64,
    classes: usize,
}

impl SwitchScores {
    fn new(obj: &Objective<'_>) -> Self {
        let classes = obj.num_classes();
        let mut incoming = vec![Vec::new(); classes];
        let mut stored = vec![false; classes * classes];
        let invalid = match obj.transitions {
            TransitionRule::Table { table, invalid, .. } => {
                for (from, to, _) in table.iter() {
                    incoming[to].push((from, obj.transition_score(from, to)));
                    stored[from * classes + to] = true;
                }
                invalid
            }
            TransitionRule::Uniform { score } => score,
        };
        Self {
            incoming,
            stored,
            invalid,
            classes,
        }
    }

    /// Best `close_prev[from] + switch(from -> to)` over `from != to`, lowest
    /// `from` on ties. `ranked` orders classes by descending `close_prev`.
    fn best_entry(&self, to: usize, close_prev: &[f64], ranked: &[usize]) -> (f64, u32) {
        let mut best = f64::NEG_INFINITY;
        let mut from = NONE;
        for &(c, sc) in &self.incoming[to] {
            let v = close_prev[c] + sc;
            if v > best {
                best = v;
                from = c as u32;
            }
        }
        if self.invalid > f64::NEG_INFINITY {
            let other = ranked
                .iter()
                .copied()
                .find(|&c| c != to && !self.stored[c * self.classes + to]);
            if let Some(c) = other {
                let v = close_prev[c] + self.invalid;
                if v > best || (v == best && v > f64::NEG_INFINITY && (c as u32) < from) {
                    best = v;
                    from = c as u32;
                }
            }
        }
        if best == f64::NEG_INFINITY {
            from = NONE;
        }
        (best, from)
    }
}

/// Monotone deque answering sliding-window maxima over `(start, value)`.
#[derive(Debug, Default)]
struct MaxQueue {
    buf: VecDeque<(usize, f64)>,
}

impl MaxQueue {
    fn push(&mut self, s: usize, v: f64) {
        while self.buf.back().is_some_and(|&(_, b)| b <= v) {
            self.buf.pop_back();
        }
        self.buf.push_back((s, v));
    }

    fn evict_before(&mut self, lo: usize) {
        while self.buf.front().is_some_and(|&(s, _)| s < lo) {
            self.buf.pop_front();
        }
    }

    fn front(&self) -> Option<(usize, f64)> {
        self.buf.front().copied()
    }
}
