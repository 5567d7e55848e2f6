//! Frame accuracy, segmental edit score and F1@IoU for action segmentation.
//!
//! All scores are percentages in `[0, 100]`. Corpus aggregation pools
//! frames for accuracy, averages edit scores per video, and pools
//! true-positive / false-positive / false-negative counts for F1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{segments_of, Segment};

/// IoU thresholds reported by [`evaluate_corpus`].
pub const F1_THRESHOLDS: [f64; 3] = [0.10, 0.25, 0.50];

/// Classes excluded from scoring. Empty by default.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub ignore: Vec<usize>,
}

impl EvalOptions {
    fn ignored(&self, class: usize) -> bool {
        self.ignore.contains(&class)
    }

    fn segments(&self, labels: &[usize]) -> Vec<Segment> {
        segments_of(labels)
            .iter()
            .copied()
            .filter(|s| !self.ignored(s.class))
            .collect()
    }
}

fn check_lengths(pred: &[usize], gt: &[usize]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            video: None,
            pred: pred.len(),
            gt: gt.len(),
        });
    }
    Ok(())
}

/// Percentage of frames whose predicted label equals the ground truth.
pub fn frame_accuracy(pred: &[usize], gt: &[usize]) -> Result<f64> {
    frame_accuracy_with(pred, gt, &EvalOptions::default())
}

pub fn frame_accuracy_with(pred: &[usize], gt: &[usize], opts: &EvalOptions) -> Result<f64> {
    let (hits, total) = frame_counts(pred, gt, opts)?;
    Ok(if total == 0 {
        100.0
    } else {
        100.0 * hits as f64 / total as f64
    })
}

fn frame_counts(pred: &[usize], gt: &[usize], opts: &EvalOptions) -> Result<(usize, usize)> {
    check_lengths(pred, gt)?;
    let mut hits = 0;
    let mut total = 0;
    for (&p, &g) in pred.iter().zip(gt) {
        if opts.ignored(g) {
            continue;
        }
        total += 1;
        hits += usize::from(p == g);
    }
    Ok((hits, total))
}

/// Plain Levenshtein distance over class transcripts.
pub fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = (diag + usize::from(x != y)).min(up + 1).min(row[j] + 1);
            diag = up;
        }
    }
    row[b.len()]
}

/// `100 * (1 - lev(transcripts) / max(|pred segments|, |gt segments|))`.
pub fn edit_score(pred: &[usize], gt: &[usize]) -> f64 {
    edit_score_with(pred, gt, &EvalOptions::default())
}

pub fn edit_score_with(pred: &[usize], gt: &[usize], opts: &EvalOptions) -> f64 {
    let p: Vec<usize> = opts.segments(pred).iter().map(|s| s.class).collect();
    let g: Vec<usize> = opts.segments(gt).iter().map(|s| s.class).collect();
    let longest = p.len().max(g.len());
    if longest == 0 {
        return 100.0;
    }
    let score = 100.0 * (1.0 - levenshtein(&p, &g) as f64 / longest as f64);
    score.clamp(0.0, 100.0)
}

/// Segment-level match counts at one IoU threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl MatchCounts {
    pub fn f1(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        let precision = self.tp as f64 / (self.tp + self.fp) as f64;
        let recall = self.tp as f64 / (self.tp + self.fn_) as f64;
        100.0 * 2.0 * precision * recall / (precision + recall)
    }
}

impl std::ops::AddAssign for MatchCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Greedy one-to-one matching in predicted temporal order. Each predicted
/// segment takes the unmatched same-class GT segment of highest IoU (earliest
/// on ties) and is a true positive when that IoU reaches `tau`.
pub fn match_segments(pred: &[usize], gt: &[usize], tau: f64, opts: &EvalOptions) -> Result<MatchCounts> {
    check_lengths(pred, gt)?;
    let p = opts.segments(pred);
    let g = opts.segments(gt);
    let mut used = vec![false; g.len()];
    let mut tp = 0;
    for seg in &p {
        let best = g
            .iter()
            .enumerate()
            .filter(|(j, h)| !used[*j] && h.class == seg.class)
            .map(|(j, h)| (j, seg.iou(h)))
            .fold(None::<(usize, f64)>, |acc, (j, v)| match acc {
                Some((_, b)) if b >= v => acc,
                _ => Some((j, v)),
            });
        if let Some((j, v)) = best {
            if v >= tau {
                used[j] = true;
                tp += 1;
            }
        }
    }
    Ok(MatchCounts {
        tp,
        fp: p.len() - tp,
        fn_: g.len() - tp,
    })
}

/// Segmental F1 at IoU threshold `tau`, as a percentage.
pub fn f1_at(pred: &[usize], gt: &[usize], tau: f64) -> Result<f64> {
    Ok(match_segments(pred, gt, tau, &EvalOptions::default())?.f1())
}

/// Per-video scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub video: String,
    pub acc: f64,
    pub edit: f64,
    pub f1_10: f64,
    pub f1_25: f64,
    pub f1_50: f64,
}

/// Corpus-level evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub edit: f64,
    pub f1_10: f64,
    pub f1_25: f64,
    pub f1_50: f64,
    pub num_videos: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub videos: Vec<VideoReport>,
}

impl EvalReport {
    /// F1 keyed by threshold.
    pub fn f1(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([("0.10", self.f1_10), ("0.25", self.f1_25), ("0.50", self.f1_50)])
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
            "video", "F1@10", "F1@25", "F1@50", "Edit", "Acc"
        ));
        for v in &self.videos {
            out.push_str(&format!(
                "{:<24} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}\n",
                v.video, v.f1_10, v.f1_25, v.f1_50, v.edit, v.acc
            ));
        }
        out.push_str(&format!(
            "{:<24} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}\n",
            format!("TOTAL ({} videos)", self.num_videos),
            self.f1_10,
            self.f1_25,
            self.f1_50,
            self.edit,
            self.acc
        ));
        out
    }
}

/// A named prediction / ground-truth pair.
#[derive(Debug, Clone)]
pub struct EvalPair<'a> {
    pub video: &'a str,
    pub pred: &'a [usize],
    pub gt: &'a [usize],
}

pub fn evaluate_corpus(pairs: &[EvalPair<'_>], opts: &EvalOptions) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let name_err = |video: &str, e: Error| match e {
        Error::LengthMismatch { pred, gt, .. } => Error::LengthMismatch {
            video: Some(video.to_string()),
            pred,
            gt,
        },
        other => other,
    };
    let mut hits = 0usize;
    let mut frames = 0usize;
    let mut edit_sum = 0.0;
    let mut pooled = [MatchCounts::default(); 3];
    let mut videos = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let (h, n) = frame_counts(pair.pred, pair.gt, opts).map_err(|e| name_err(pair.video, e))?;
        hits += h;
        frames += n;
        let edit = edit_score_with(pair.pred, pair.gt, opts);
        edit_sum += edit;
        let mut f1 = [0.0; 3];
        for (k, &tau) in F1_THRESHOLDS.iter().enumerate() {
            let m = match_segments(pair.pred, pair.gt, tau, opts).map_err(|e| name_err(pair.video, e))?;
            f1[k] = m.f1();
            pooled[k] += m;
        }
        videos.push(VideoReport {
            video: pair.video.to_string(),
            acc: if n == 0 { 100.0 } else { 100.0 * h as f64 / n as f64 },
            edit,
            f1_10: f1[0],
            f1_25: f1[1],
            f1_50: f1[2],
        });
    }
    Ok(EvalReport {
        acc: if frames == 0 {
            100.0
        } else {
            100.0 * hits as f64 / frames as f64
        },
        edit: edit_sum / pairs.len() as f64,
        f1_10: pooled[0].f1(),
        f1_25: pooled[1].f1(),
        f1_50: pooled[2].f1(),
        num_videos: pairs.len(),
        videos,
    })
}
