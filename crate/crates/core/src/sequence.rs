//! Frame-level label sequences and their run-length segment view.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-empty sequence of class indices, one per frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSequence {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelSequence {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if let Some((frame, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::ClassIndexOutOfRange {
                label,
                frame,
                num_classes,
            });
        }
        Ok(Self { labels, num_classes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }

    pub fn segments(&self) -> SegmentList {
        segments_of(&self.labels)
    }
}

/// A maximal run of one class over the inclusive frame range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub class: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Intersection-over-union of two inclusive frame intervals.
    pub fn iou(&self, other: &Segment) -> f64 {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if lo > hi {
            return 0.0;
        }
        let inter = hi - lo + 1;
        let union = self.end.max(other.end) - self.start.min(other.start) + 1;
        inter as f64 / union as f64
    }
}

/// Run-length view of a label sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegmentList {
    segments: Vec<Segment>,
}

impl SegmentList {
    pub fn as_slice(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Segment> {
        self.segments.iter()
    }

    /// The class transcript, i.e. segment classes in temporal order.
    pub fn classes(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.class).collect()
    }

    pub fn first(&self) -> Option<&Segment> {
        self.segments.first()
    }

    pub fn last(&self) -> Option<&Segment> {
        self.segments.last()
    }

    /// Expands the runs back into per-frame labels.
    pub fn to_labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.segments.last().map_or(0, |s| s.end + 1));
        for seg in &self.segments {
            out.extend(std::iter::repeat_n(seg.class, seg.len()));
        }
        out
    }
}

impl<'a> IntoIterator for &'a SegmentList {
    type Item = &'a Segment;
    type IntoIter = std::slice::Iter<'a, Segment>;

    fn into_iter(self) -> Self::IntoIter {
        self.segments.iter()
    }
}

/// Splits `labels` into maximal constant runs.
pub fn segments_of(labels: &[usize]) -> SegmentList {
    let mut segments: Vec<Segment> = Vec::new();
    for (t, &class) in labels.iter().enumerate() {
        match segments.last_mut() {
            Some(seg) if seg.class == class => seg.end = t,
            _ => segments.push(Segment {
                class,
                start: t,
                end: t,
            }),
        }
    }
    SegmentList { segments }
}
