//! Structural priors extracted from annotated label sequences.
//!
//! A [`ConstraintSet`] holds four families of constraints:
//!
//! - valid start classes (first segment of some training sequence),
//! - valid end classes (last segment of some training sequence),
//! - a sparse transition table `Conf(A -> B) = Count(A -> B) / Count(A)`,
//!   counted over consecutive *segments* so that self-continuation never
//!   enters the statistics,
//! - per-class duration bounds, expressed as fractions of sequence length.
//!
//! Constraint sets are immutable once built and serialize to a versioned
//! JSON document meant to be read and hand-edited.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::LabelSequence;

/// Current constraint-file schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Allowed deviation of outgoing confidences from a unit sum.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Sparse table of transition confidences between distinct classes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    num_classes: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl TransitionTable {
    /// Builds a table from `(from, to, conf)` triples, checking every invariant.
    pub fn new(num_classes: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (from, to, conf) in entries {
            if from >= num_classes || to >= num_classes {
                return Err(Error::InvalidArgument(format!(
                    "transition {from}->{to} references a class outside [0, {num_classes})"
                )));
            }
            if from == to {
                return Err(Error::InvalidArgument(format!(
                    "self-transition {from}->{to} is not allowed in the transition table"
                )));
            }
            if !(conf > 0.0 && conf <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "confidence {conf} for {from}->{to} is outside (0, 1]"
                )));
            }
            if map.insert((from, to), conf).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate transition {from}->{to}")));
            }
        }
        let table = Self {
            num_classes,
            entries: map,
        };
        if let Some((from, sum)) = table.unnormalized_row() {
            return Err(Error::InvalidArgument(format!(
                "outgoing confidences of class {from} sum to {sum}, expected 1"
            )));
        }
        Ok(table)
    }

    /// Every ordered pair of distinct classes with confidence `1 / (C - 1)`.
    pub fn uniform(num_classes: usize) -> Self {
        let mut entries = BTreeMap::new();
        if num_classes > 1 {
            let conf = 1.0 / (num_classes - 1) as f64;
            for a in 0..num_classes {
                for b in (0..num_classes).filter(|&b| b != a) {
                    entries.insert((a, b), conf);
                }
            }
        }
        Self { num_classes, entries }
    }

    pub fn empty(num_classes: usize) -> Self {
        Self {
            num_classes,
            entries: BTreeMap::new(),
        }
    }

    fn unnormalized_row(&self) -> Option<(usize, f64)> {
        let mut sums = vec![None::<f64>; self.num_classes];
        for (&(from, _), &conf) in &self.entries {
            *sums[from].get_or_insert(0.0) += conf;
        }
        sums.into_iter()
            .enumerate()
            .filter_map(|(from, s)| s.map(|s| (from, s)))
            .find(|(_, s)| (s - 1.0).abs() > ROW_SUM_TOLERANCE)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, from: usize, to: usize) -> Option<f64> {
        self.entries.get(&(from, to)).copied()
    }

    pub fn contains(&self, from: usize, to: usize) -> bool {
        self.entries.contains_key(&(from, to))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(from, to, conf)` in ascending `(from, to)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(a, b), &c)| (a, b, c))
    }

    /// Smallest stored confidence, if any.
    pub fn min_conf(&self) -> Option<f64> {
        self.entries.values().copied().reduce(f64::min)
    }
}

/// Normalized duration interval for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationBound {
    pub d_min: f64,
    pub d_max: f64,
    pub observed: bool,
}

impl DurationBound {
    /// Sentinel for classes absent from the corpus.
    pub const UNOBSERVED: DurationBound = DurationBound {
        d_min: 0.0,
        d_max: 1.0,
        observed: false,
    };

    /// Imposes nothing on any segment length.
    pub const PERMISSIVE: DurationBound = DurationBound {
        d_min: 0.0,
        d_max: 1.0,
        observed: true,
    };

    /// Whether a segment of `len` frames may be followed by another segment
    /// in a sequence of `total` frames.
    ///
    /// The lower bound is checked on the full length. The upper bound follows
    /// the self-continuation rule: the run may grow to `len` only if its
    /// length before the last frame, as a fraction of `total`, is strictly
    /// below `d_max`.
    pub fn admits_interior(&self, len: usize, total: usize) -> bool {
        debug_assert!(len >= 1);
        let t = total as f64;
        len as f64 / t >= self.d_min && (len - 1) as f64 / t < self.d_max
    }

    /// Whether the final segment of a sequence may have `len` frames. Only
    /// the upper bound applies.
    pub fn admits_final(&self, len: usize, total: usize) -> bool {
        debug_assert!(len >= 1);
        len as f64 / total as f64 <= self.d_max
    }

    /// Widens the interval to `(d_min * (1 - s), min(1, d_max * (1 + s)))`.
    pub fn widened(&self, slack: f64) -> DurationBound {
        if !self.observed {
            return *self;
        }
        DurationBound {
            d_min: (self.d_min * (1.0 - slack)).max(0.0),
            d_max: (self.d_max * (1.0 + slack)).min(1.0),
            observed: true,
        }
    }
}

/// Per-class duration bounds, indexed by class.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationBounds {
    bounds: Vec<DurationBound>,
}

impl DurationBounds {
    pub fn new(bounds: Vec<DurationBound>) -> Result<Self> {
        for (c, b) in bounds.iter().enumerate() {
            if !(0.0 <= b.d_min && b.d_min <= b.d_max && b.d_max <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "duration bounds ({}, {}) of class {c} violate 0 <= d_min <= d_max <= 1",
                    b.d_min, b.d_max
                )));
            }
        }
        Ok(Self { bounds })
    }

    pub fn permissive(num_classes: usize) -> Self {
        Self {
            bounds: vec![DurationBound::PERMISSIVE; num_classes],
        }
    }

    pub fn get(&self, class: usize) -> &DurationBound {
        &self.bounds[class]
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DurationBound> {
        self.bounds.iter()
    }

    pub fn widened(&self, slack: f64) -> Self {
        Self {
            bounds: self.bounds.iter().map(|b| b.widened(slack)).collect(),
        }
    }
}

/// The complete structural prior used by constrained decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    num_classes: usize,
    class_names: Option<Vec<String>>,
    start_set: BTreeSet<usize>,
    end_set: BTreeSet<usize>,
    transitions: TransitionTable,
    durations: DurationBounds,
}

impl ConstraintSet {
    pub fn new(
        num_classes: usize,
        start_set: BTreeSet<usize>,
        end_set: BTreeSet<usize>,
        transitions: TransitionTable,
        durations: DurationBounds,
    ) -> Result<Self> {
        let out_of_range = |set: &BTreeSet<usize>, name: &str| -> Result<()> {
            match set.iter().find(|&&c| c >= num_classes) {
                Some(c) => Err(Error::InvalidArgument(format!(
                    "{name} contains class {c} outside [0, {num_classes})"
                ))),
                None => Ok(()),
            }
        };
        out_of_range(&start_set, "start set")?;
        out_of_range(&end_set, "end set")?;
        if transitions.num_classes() != num_classes {
            return Err(Error::DimensionMismatch {
                what: "transition table classes",
                expected: num_classes,
                found: transitions.num_classes(),
            });
        }
        if durations.len() != num_classes {
            return Err(Error::DimensionMismatch {
                what: "duration bound classes",
                expected: num_classes,
                found: durations.len(),
            });
        }
        Ok(Self {
            num_classes,
            class_names: None,
            start_set,
            end_set,
            transitions,
            durations,
        })
    }

    /// Admits every label sequence: all classes may start and end, every
    /// switch is allowed with uniform confidence, durations are unbounded.
    pub fn permissive(num_classes: usize) -> Self {
        Self {
            num_classes,
            class_names: None,
            start_set: (0..num_classes).collect(),
            end_set: (0..num_classes).collect(),
            transitions: TransitionTable::uniform(num_classes),
            durations: DurationBounds::permissive(num_classes),
        }
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes {
            return Err(Error::DimensionMismatch {
                what: "class names",
                expected: self.num_classes,
                found: names.len(),
            });
        }
        self.class_names = Some(names);
        Ok(self)
    }

    /// Same constraints with every observed duration interval widened by `slack`.
    pub fn with_slack(&self, slack: f64) -> Self {
        Self {
            durations: self.durations.widened(slack),
            ..self.clone()
        }
    }

    pub fn with_transitions(&self, transitions: TransitionTable) -> Result<Self> {
        Self::new(
            self.num_classes,
            self.start_set.clone(),
            self.end_set.clone(),
            transitions,
            self.durations.clone(),
        )
        .map(|cs| Self {
            class_names: self.class_names.clone(),
            ..cs
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn start_set(&self) -> &BTreeSet<usize> {
        &self.start_set
    }

    pub fn end_set(&self) -> &BTreeSet<usize> {
        &self.end_set
    }

    pub fn transitions(&self) -> &TransitionTable {
        &self.transitions
    }

    pub fn durations(&self) -> &DurationBounds {
        &self.durations
    }

    pub fn to_json_string(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&Document::from(self)).expect("constraint document is always serializable");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text).map_err(json_error)?;
        match probe.version {
            Some(SCHEMA_VERSION) => {}
            Some(found) => {
                return Err(Error::SchemaVersionMismatch {
                    expected: SCHEMA_VERSION,
                    found,
                })
            }
            None => return Err(Error::parse("version", "missing field `version`")),
        }
        let doc: Document = serde_json::from_str(text).map_err(json_error)?;
        doc.into_constraints()
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_json_string().as_bytes())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text).map_err(|e| Error::io("<reader>", e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Parse { location, message } => Error::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }
}

/// Counts structural statistics over `corpus` and builds a [`ConstraintSet`].
///
/// Transitions are counted between consecutive segments. `Count(A)` is the
/// number of `A`-segments that have a successor, so outgoing confidences of
/// every source class sum to one. Duration bounds are the empirical min and
/// max of `segment length / sequence length`; classes never seen keep the
/// unobserved sentinel `(0, 1)`.
pub fn extract_constraints(corpus: &[LabelSequence], num_classes: usize) -> Result<ConstraintSet> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut pair_counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut source_counts = vec![0u64; num_classes];
    let mut start_set = BTreeSet::new();
    let mut end_set = BTreeSet::new();
    let mut ranges: Vec<Option<(f64, f64)>> = vec![None; num_classes];

    for seq in corpus {
        if let Some((frame, &label)) = seq.labels().iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::ClassIndexOutOfRange {
                label,
                frame,
                num_classes,
            });
        }
        let segments = seq.segments();
        let total = seq.len() as f64;
        let slice = segments.as_slice();
        start_set.insert(slice[0].class);
        end_set.insert(slice[slice.len() - 1].class);
        for seg in slice {
            let frac = seg.len() as f64 / total;
            let r = ranges[seg.class].get_or_insert((frac, frac));
            r.0 = r.0.min(frac);
            r.1 = r.1.max(frac);
        }
        for w in slice.windows(2) {
            *pair_counts.entry((w[0].class, w[1].class)).or_default() += 1;
            source_counts[w[0].class] += 1;
        }
    }

    let transitions = TransitionTable {
        num_classes,
        entries: pair_counts
            .into_iter()
            .map(|((a, b), n)| ((a, b), n as f64 / source_counts[a] as f64))
            .collect(),
    };
    let durations = DurationBounds {
        bounds: ranges
            .into_iter()
            .map(|r| match r {
                Some((d_min, d_max)) => DurationBound {
                    d_min,
                    d_max,
                    observed: true,
                },
                None => DurationBound::UNOBSERVED,
            })
            .collect(),
    };
    Ok(ConstraintSet {
        num_classes,
        class_names: None,
        start_set,
        end_set,
        transitions,
        durations,
    })
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    version: u32,
    num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_names: Option<Vec<String>>,
    start_set: Vec<usize>,
    end_set: Vec<usize>,
    transitions: Vec<TransitionEntry>,
    durations: Vec<DurationEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    from: usize,
    to: usize,
    conf: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DurationEntry {
    class: usize,
    d_min: f64,
    d_max: f64,
    #[serde(default = "default_observed")]
    observed: bool,
}

fn default_observed() -> bool {
    true
}

fn json_error(e: serde_json::Error) -> Error {
    Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string())
}

impl From<&ConstraintSet> for Document {
    fn from(cs: &ConstraintSet) -> Self {
        Document {
            version: SCHEMA_VERSION,
            num_classes: cs.num_classes,
            class_names: cs.class_names.clone(),
            start_set: cs.start_set.iter().copied().collect(),
            end_set: cs.end_set.iter().copied().collect(),
            transitions: cs
                .transitions
                .iter()
                .map(|(from, to, conf)| TransitionEntry { from, to, conf })
                .collect(),
            durations: cs
                .durations
                .iter()
                .enumerate()
                .map(|(class, b)| DurationEntry {
                    class,
                    d_min: b.d_min,
                    d_max: b.d_max,
                    observed: b.observed,
                })
                .collect(),
        }
    }
}

impl Document {
    fn into_constraints(self) -> Result<ConstraintSet> {
        let c = self.num_classes;
        let check_set = |set: &[usize], field: &str| -> Result<BTreeSet<usize>> {
            let mut out = BTreeSet::new();
            for (i, &class) in set.iter().enumerate() {
                if class >= c {
                    return Err(Error::parse(
                        format!("{field}[{i}]"),
                        format!("class {class} outside [0, {c})"),
                    ));
                }
                out.insert(class);
            }
            Ok(out)
        };
        let start_set = check_set(&self.start_set, "start_set")?;
        let end_set = check_set(&self.end_set, "end_set")?;

        let mut entries = BTreeMap::new();
        for (i, e) in self.transitions.iter().enumerate() {
            let loc = |field: &str| format!("transitions[{i}].{field}");
            if e.from >= c {
                return Err(Error::parse(loc("from"), format!("class {} outside [0, {c})", e.from)));
            }
            if e.to >= c {
                return Err(Error::parse(loc("to"), format!("class {} outside [0, {c})", e.to)));
            }
            if e.from == e.to {
                return Err(Error::parse(loc("to"), "self-transitions are not stored"));
            }
            if !(e.conf > 0.0 && e.conf <= 1.0) {
                return Err(Error::parse(
                    loc("conf"),
                    format!("confidence {} outside (0, 1]", e.conf),
                ));
            }
            if entries.insert((e.from, e.to), e.conf).is_some() {
                return Err(Error::parse(
                    format!("transitions[{i}]"),
                    format!("duplicate transition {}->{}", e.from, e.to),
                ));
            }
        }
        let transitions = TransitionTable {
            num_classes: c,
            entries,
        };
        if let Some((from, sum)) = transitions.unnormalized_row() {
            return Err(Error::parse(
                format!("transitions (from = {from})"),
                format!("outgoing confidences sum to {sum}, expected 1"),
            ));
        }

        let mut bounds: Vec<Option<DurationBound>> = vec![None; c];
        for (i, d) in self.durations.iter().enumerate() {
            if d.class >= c {
                return Err(Error::parse(
                    format!("durations[{i}].class"),
                    format!("class {} outside [0, {c})", d.class),
                ));
            }
            if !(0.0 <= d.d_min && d.d_min <= d.d_max && d.d_max <= 1.0) {
                return Err(Error::parse(
                    format!("durations[{i}]"),
                    format!("bounds ({}, {}) violate 0 <= d_min <= d_max <= 1", d.d_min, d.d_max),
                ));
            }
            if bounds[d.class].is_some() {
                return Err(Error::parse(
                    format!("durations[{i}].class"),
                    format!("duplicate entry for class {}", d.class),
                ));
            }
            bounds[d.class] = Some(DurationBound {
                d_min: d.d_min,
                d_max: d.d_max,
                observed: d.observed,
            });
        }
        let durations = DurationBounds {
            bounds: bounds
                .into_iter()
                .map(|b| b.unwrap_or(DurationBound::UNOBSERVED))
                .collect(),
        };

        if let Some(names) = &self.class_names {
            if names.len() != c {
                return Err(Error::parse(
                    "class_names",
                    format!("expected {c} names, found {}", names.len()),
                ));
            }
        }
        Ok(ConstraintSet {
            num_classes: c,
            class_names: self.class_names,
            start_set,
            end_set,
            transitions,
            durations,
        })
    }
}
