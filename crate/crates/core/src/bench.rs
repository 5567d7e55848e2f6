//! Decode-time scaling measurements.
//!
//! Timings cover decoding only; instances are built before the clock starts.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintSet, DurationBound, DurationBounds, TransitionTable};
use crate::decoder::{decode, decode_classical, decode_frame_recurrence, DecodeConfig, Fallback, TransitionPrior};
use crate::error::{Error, Result};
use crate::probs::FrameProbMatrix;
use crate::synth::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub lengths: Vec<usize>,
    pub num_classes: usize,
    pub num_transitions: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            lengths: vec![1000, 2000, 4000, 8000, 16000],
            num_classes: 48,
            num_transitions: 150,
            repetitions: 5,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.lengths.is_empty() || self.lengths[0] == 0 {
            return bad("the length sweep must be non-empty and positive".into());
        }
        if self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return bad("the length sweep must be strictly increasing".into());
        }
        if self.num_classes < 2 {
            return bad("at least 2 classes are needed".into());
        }
        let max_pairs = self.num_classes * (self.num_classes - 1);
        if self.num_transitions < self.num_classes || self.num_transitions > max_pairs {
            return bad(format!(
                "transition count must lie in [{}, {max_pairs}]",
                self.num_classes
            ));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        Ok(())
    }
}

/// A random constraint set whose transitions contain the cycle
/// `0 -> 1 -> ... -> C-1 -> 0`, so every class is reachable.
pub fn random_constraints<R: Rng + ?Sized>(
    num_classes: usize,
    num_transitions: usize,
    rng: &mut R,
) -> Result<ConstraintSet> {
    let c = num_classes;
    let mut pairs: BTreeSet<(usize, usize)> = (0..c).map(|a| (a, (a + 1) % c)).collect();
    let mut others: Vec<(usize, usize)> = (0..c)
        .flat_map(|a| (0..c).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b && !pairs.contains(&(a, b)))
        .collect();
    others.shuffle(rng);
    pairs.extend(others.into_iter().take(num_transitions.saturating_sub(c)));

    let mut weights: Vec<(usize, usize, f64)> =
        pairs.iter().map(|&(a, b)| (a, b, rng.random_range(0.5..1.5))).collect();
    let mut row_sum = vec![0.0; c];
    for &(a, _, w) in &weights {
        row_sum[a] += w;
    }
    for (a, _, w) in &mut weights {
        *w /= row_sum[*a];
    }
    let table = TransitionTable::new(c, weights)?;

    let classes: Vec<usize> = (0..c).collect();
    let k = (c / 8).max(1);
    let start: BTreeSet<usize> = classes.choose_multiple(rng, k).copied().collect();
    let end: BTreeSet<usize> = classes.choose_multiple(rng, k).copied().collect();
    let durations = DurationBounds::new(
        (0..c)
            .map(|_| DurationBound {
                d_min: rng.random_range(0.0..0.005),
                d_max: rng.random_range(0.2..1.0),
                observed: true,
            })
            .collect(),
    )?;
    ConstraintSet::new(c, start, end, table, durations)
}

/// Rows of normalized `Exp(1)` draws.
pub fn random_probs<R: Rng + ?Sized>(frames: usize, num_classes: usize, rng: &mut R) -> FrameProbMatrix {
    let mut data: Vec<f64> = (0..frames * num_classes).map(|_| Exp1.sample(rng)).collect();
    for row in data.chunks_exact_mut(num_classes) {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
    }
    FrameProbMatrix::new(data, frames, num_classes).expect("rows are positive")
}

/// Median timings at one length, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub frames: usize,
    pub constrained_ms: f64,
    pub classical_ms: f64,
    pub frame_recurrence_ms: f64,
    /// Label sequences are identical across repetitions.
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    pub constrained_slope: f64,
    pub classical_slope: f64,
}

impl BenchReport {
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:>8} {:>16} {:>16} {:>16}\n",
            "T", "constrained ms", "classical ms", "frame-rec ms"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>8} {:>16.3} {:>16.3} {:>16.3}\n",
                r.frames, r.constrained_ms, r.classical_ms, r.frame_recurrence_ms
            ));
        }
        out.push_str(&format!(
            "log-log slope: constrained {:.3}, classical {:.3}\n",
            self.constrained_slope, self.classical_slope
        ));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frames,constrained_ms,classical_ms,frame_recurrence_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6}\n",
                r.frames, r.constrained_ms, r.classical_ms, r.frame_recurrence_ms
            ));
        }
        out
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn time_ms<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}

/// Runs the sweep on one random constraint set; each length gets its own
/// random probability matrix.
pub fn run(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let cs = random_constraints(config.num_classes, config.num_transitions, &mut rng)?;
    let cfg = DecodeConfig {
        infeasible_fallback: Fallback::Classical,
        ..DecodeConfig::hard()
    };
    let mut rows = Vec::with_capacity(config.lengths.len());
    for &frames in &config.lengths {
        let probs = random_probs(frames, config.num_classes, &mut rng);
        let mut constrained = Vec::new();
        let mut classical = Vec::new();
        let mut frame_rec = Vec::new();
        let mut first: Option<Vec<usize>> = None;
        let mut deterministic = true;
        for _ in 0..config.repetitions {
            let (res, ms) = time_ms(|| decode(&probs, &cs, &cfg));
            constrained.push(ms);
            let labels = res?.labels.into_labels();
            match &first {
                Some(f) => deterministic &= *f == labels,
                None => first = Some(labels),
            }
            let (res, ms) = time_ms(|| decode_classical(&probs, TransitionPrior::Table(cs.transitions()), &cfg));
            res?;
            classical.push(ms);
            let (res, ms) = time_ms(|| decode_frame_recurrence(&probs, &cs, &cfg));
            match res {
                Ok(_) | Err(Error::InfeasibleConstraints) => {}
                Err(e) => return Err(e),
            }
            frame_rec.push(ms);
        }
        rows.push(BenchRow {
            frames,
            constrained_ms: median(&mut constrained),
            classical_ms: median(&mut classical),
            frame_recurrence_ms: median(&mut frame_rec),
            deterministic,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.frames as f64).collect();
    let slope_of = |f: fn(&BenchRow) -> f64| {
        if rows.len() < 2 {
            f64::NAN
        } else {
            log_log_slope(&x, &rows.iter().map(f).collect::<Vec<_>>())
        }
    };
    let constrained_slope = slope_of(|r| r.constrained_ms);
    let classical_slope = slope_of(|r| r.classical_ms);
    Ok(BenchReport {
        config: config.clone(),
        rows,
        constrained_slope,
        classical_slope,
    })
}
