use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{default_seed, RunManifest, Stopwatch, VideoOutcome, EVAL_REPORT_VERSION};
use super::{BenchArgs, DecodeArgs, EvalArgs, ExtractArgs, ProbFormat, SynthArgs};
use crate::bench::{self, BenchConfig};
use crate::constraints::{extract_constraints, ConstraintSet};
use crate::decoder::{self, DecodeConfig};
use crate::error::{Error, Result};
use crate::io::{self, ClassMapping};
use crate::metrics::{evaluate_corpus, EvalOptions, EvalPair, EvalReport};
use crate::probs::FrameProbMatrix;
use crate::sequence::LabelSequence;
use crate::synth::{generate_corpus, rng_from_seed, GeneratorSpec};

fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T> {
    value
        .clone()
        .ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required")))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// `dir/stem.manifest.json` for an output file, `dir/manifest.json` for a directory.
fn manifest_path(explicit: &Option<PathBuf>, out: &Path, out_is_dir: bool) -> PathBuf {
    if let Some(p) = explicit {
        return p.clone();
    }
    if out_is_dir {
        out.join("manifest.json")
    } else {
        out.with_file_name(format!("{}.manifest.json", io::video_name(out)))
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {jobs} workers: {e}")))
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load_mapping(path: &Option<PathBuf>) -> Result<Option<ClassMapping>> {
    path.as_deref().map(ClassMapping::load).transpose()
}

pub(super) fn extract(mut args: ExtractArgs) -> Result<()> {
    let mut clock = Stopwatch::start();
    let labels_dir = required(&args.labels, "labels")?;
    let out = required(&args.out, "out")?;
    let slack = *args.slack.get_or_insert(0.0);
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(Error::InvalidArgument(format!("--slack must be >= 0, got {slack}")));
    }
    let mapping = load_mapping(&args.mapping)?;
    let files = io::list_files(&labels_dir, &["txt"])?;
    if files.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let raw = files
        .iter()
        .map(|f| io::read_labels(f, mapping.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let largest = raw.iter().flatten().copied().max().unwrap_or(0);
    let num_classes = match (&mapping, args.classes) {
        (Some(m), Some(c)) if c != m.len() => {
            return Err(Error::DimensionMismatch {
                what: "--classes versus mapping size",
                expected: m.len(),
                found: c,
            })
        }
        (Some(m), _) => m.len(),
        (None, Some(c)) => c,
        (None, None) => largest + 1,
    };
    args.classes = Some(num_classes);
    let corpus = raw
        .into_iter()
        .zip(&files)
        .map(|(labels, f)| LabelSequence::new(labels, num_classes).map_err(|e| Error::parse(display(f), e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    clock.lap("load");

    let mut cs = extract_constraints(&corpus, num_classes)?.with_slack(slack);
    if let Some(m) = &mapping {
        cs = cs.with_class_names(m.names().to_vec())?;
    }
    clock.lap("extract");
    io::write_file(&out, cs.to_json_string())?;
    clock.lap("write");
    print!("{}", summary(&cs));

    let mut manifest = RunManifest::new("extract", &args, None);
    manifest.inputs = files.iter().map(|f| display(f)).collect();
    manifest.timings_ms = clock.laps;
    manifest.write(&manifest_path(&args.manifest, &out, false))
}

fn summary(cs: &ConstraintSet) -> String {
    let name = |c: usize| match cs.class_names() {
        Some(names) => names[c].clone(),
        None => c.to_string(),
    };
    let list = |set: &BTreeSet<usize>| set.iter().map(|&c| name(c)).collect::<Vec<_>>().join(" ");
    let mut out = format!(
        "classes: {}\nstart set ({}): {}\nend set ({}): {}\ntransitions: {}\n",
        cs.num_classes(),
        cs.start_set().len(),
        list(cs.start_set()),
        cs.end_set().len(),
        list(cs.end_set()),
        cs.transitions().len()
    );
    out.push_str(&format!("{:<24} {:>8} {:>8}\n", "class", "d_min", "d_max"));
    for (c, b) in cs.durations().iter().enumerate() {
        let note = if b.observed { "" } else { "  (unobserved)" };
        out.push_str(&format!("{:<24} {:>8.4} {:>8.4}{note}\n", name(c), b.d_min, b.d_max));
    }
    out
}

fn expand_prob_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(io::list_files(p, &["csv", "bin"])?);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

pub(super) fn decode(mut args: DecodeArgs) -> Result<()> {
    let mut clock = Stopwatch::start();
    let inputs = required(&args.probs, "probs")?;
    let constraints = required(&args.constraints, "constraints")?;
    let out = required(&args.out, "out")?;
    let defaults = DecodeConfig::default();
    let cfg = DecodeConfig {
        mode: *args.mode.get_or_insert(defaults.mode),
        w_transition: *args.w_transition.get_or_insert(defaults.w_transition),
        w_duration: *args.w_duration.get_or_insert(defaults.w_duration),
        soft_penalty: *args.lambda.get_or_insert(defaults.soft_penalty),
        epsilon_floor: *args.epsilon_floor.get_or_insert(defaults.epsilon_floor),
        infeasible_fallback: *args.fallback.get_or_insert(defaults.infeasible_fallback),
        record_trace: false,
    };
    cfg.validate()?;
    let jobs = *args.jobs.get_or_insert_with(default_jobs);

    let cs = ConstraintSet::load(&constraints)?;
    let mapping = load_mapping(&args.mapping)?;
    if let Some(m) = &mapping {
        if m.len() != cs.num_classes() {
            return Err(Error::DimensionMismatch {
                what: "mapping classes",
                expected: cs.num_classes(),
                found: m.len(),
            });
        }
    }
    let files = expand_prob_inputs(&inputs)?;
    if files.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut seen = BTreeSet::new();
    for f in &files {
        if !seen.insert(io::video_name(f)) {
            return Err(Error::InvalidArgument(format!(
                "two inputs share the video name {:?}",
                io::video_name(f)
            )));
        }
    }
    clock.lap("load_constraints");

    let pool = thread_pool(jobs)?;
    let outcomes: Vec<Result<VideoOutcome>> = pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let video = io::video_name(f);
                let probs = FrameProbMatrix::load(f)?;
                let result = decoder::decode(&probs, &cs, &cfg)?;
                let target = out.join(format!("{video}.txt"));
                io::write_file(&target, io::format_labels(result.labels.labels(), mapping.as_ref()))?;
                Ok(VideoOutcome {
                    video,
                    output: display(&target),
                    frames: probs.frames(),
                    feasible: result.feasible,
                    used_fallback: result.used_fallback,
                    log_score: result.log_score,
                })
            })
            .collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    clock.lap("decode");

    let fallbacks = outcomes.iter().filter(|o| o.used_fallback).count();
    let infeasible = outcomes.iter().filter(|o| !o.feasible).count();
    println!(
        "decoded {} videos into {} ({} infeasible, {} fallback)",
        outcomes.len(),
        out.display(),
        infeasible,
        fallbacks
    );
    let mut manifest = RunManifest::new("decode", &args, None);
    manifest.inputs = std::iter::once(display(&constraints))
        .chain(files.iter().map(|f| display(f)))
        .collect();
    manifest.videos = outcomes;
    manifest.timings_ms = clock.laps;
    manifest.write(&manifest_path(&args.manifest, &out, true))
}

#[derive(Serialize)]
struct VersionedReport<'a> {
    schema_version: u32,
    #[serde(flatten)]
    report: &'a EvalReport,
}

/// Video name, predicted labels, ground-truth labels.
type LoadedPair = (String, Vec<usize>, Vec<usize>);

fn by_name(files: Vec<PathBuf>) -> BTreeMap<String, PathBuf> {
    files.into_iter().map(|f| (io::video_name(&f), f)).collect()
}

pub(super) fn eval(mut args: EvalArgs) -> Result<()> {
    let mut clock = Stopwatch::start();
    let pred_dir = required(&args.pred, "pred")?;
    let gt_dir = required(&args.gt, "gt")?;
    let out = args
        .out
        .get_or_insert_with(|| pred_dir.join("eval_report.json"))
        .clone();
    let jobs = *args.jobs.get_or_insert_with(default_jobs);
    let mapping = load_mapping(&args.mapping)?;
    let ignore = args
        .ignore
        .get_or_insert_with(Vec::new)
        .iter()
        .map(|token| {
            let class = match &mapping {
                Some(m) => m.resolve(token),
                None => token.parse().ok(),
            };
            class.ok_or_else(|| Error::InvalidArgument(format!("unknown class {token:?} in --ignore")))
        })
        .collect::<Result<Vec<_>>>()?;

    let preds = by_name(io::list_files(&pred_dir, &["txt"])?);
    let gts = by_name(io::list_files(&gt_dir, &["txt"])?);
    if let Some(name) = gts.keys().find(|n| !preds.contains_key(*n)) {
        return Err(Error::MissingCounterpart {
            name: name.clone(),
            dir: pred_dir,
        });
    }
    if let Some(name) = preds.keys().find(|n| !gts.contains_key(*n)) {
        return Err(Error::MissingCounterpart {
            name: name.clone(),
            dir: gt_dir,
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let pool = thread_pool(jobs)?;
    let loaded: Vec<Result<LoadedPair>> = pool.install(|| {
        preds
            .par_iter()
            .map(|(name, p)| {
                let pred = io::read_labels(p, mapping.as_ref())?;
                let gt = io::read_labels(&gts[name], mapping.as_ref())?;
                Ok((name.clone(), pred, gt))
            })
            .collect()
    });
    let loaded = loaded.into_iter().collect::<Result<Vec<_>>>()?;
    clock.lap("load");

    let pairs: Vec<EvalPair<'_>> = loaded
        .iter()
        .map(|(video, pred, gt)| EvalPair { video, pred, gt })
        .collect();
    let report = evaluate_corpus(&pairs, &EvalOptions { ignore })?;
    clock.lap("evaluate");
    print!("{}", report.table());
    let mut json = serde_json::to_string_pretty(&VersionedReport {
        schema_version: EVAL_REPORT_VERSION,
        report: &report,
    })
    .expect("report serializes");
    json.push('\n');
    io::write_file(&out, json)?;
    clock.lap("write");

    let mut manifest = RunManifest::new("eval", &args, None);
    manifest.inputs = loaded
        .iter()
        .flat_map(|(name, _, _)| [display(&preds[name]), display(&gts[name])])
        .collect();
    manifest.timings_ms = clock.laps;
    manifest.write(&manifest_path(&args.manifest, &out, false))
}

pub(super) fn synth(mut args: SynthArgs) -> Result<()> {
    let mut clock = Stopwatch::start();
    let out = required(&args.out, "out")?;
    let seed = match args.seed {
        Some(s) => s,
        None => default_seed()?,
    };
    args.seed = Some(seed);
    let n_train = *args.train.get_or_insert(50);
    let n_test = *args.test.get_or_insert(20);
    let format = *args.format.get_or_insert(ProbFormat::Csv);
    let mut spec = match &args.spec {
        Some(path) => {
            let text = io::read_to_string(path)?;
            serde_json::from_str::<GeneratorSpec>(&text).map_err(|e| Error::parse(display(path), e.to_string()))?
        }
        None => GeneratorSpec::published(seed),
    };
    if let Some(sigma) = args.sigma {
        spec.sigma = sigma;
    }
    spec.seed = seed;
    spec.validate()?;
    clock.lap("spec");

    let corpus = generate_corpus(&spec, n_train, n_test, &mut rng_from_seed(seed))?;
    clock.lap("generate");

    let width = (n_train.max(n_test) - 1).to_string().len().max(3);
    let mut train_names = Vec::with_capacity(n_train);
    for (i, gt) in corpus.train.iter().enumerate() {
        let name = format!("train_{i:0width$}");
        io::write_file(
            &out.join("train").join(format!("{name}.txt")),
            io::format_labels(gt.labels(), None),
        )?;
        train_names.push(name);
    }
    let mut test_names = Vec::with_capacity(n_test);
    for (i, (gt, probs)) in corpus.test.iter().enumerate() {
        let name = format!("test_{i:0width$}");
        io::write_file(
            &out.join("test/gt").join(format!("{name}.txt")),
            io::format_labels(gt.labels(), None),
        )?;
        let probs_dir = out.join("test/probs");
        match format {
            ProbFormat::Csv => io::write_file(&probs_dir.join(format!("{name}.csv")), probs.to_csv())?,
            ProbFormat::Bin => io::write_file(&probs_dir.join(format!("{name}.bin")), probs.to_binary())?,
        }
        test_names.push(name);
    }
    let mut spec_json = serde_json::to_string_pretty(&spec).expect("spec serializes");
    spec_json.push('\n');
    io::write_file(&out.join("spec.json"), spec_json)?;
    let mut split = serde_json::to_string_pretty(&serde_json::json!({
        "train": train_names,
        "test": test_names,
    }))
    .expect("split serializes");
    split.push('\n');
    io::write_file(&out.join("split.json"), split)?;
    clock.lap("write");
    println!("wrote {n_train} training and {n_test} test videos to {}", out.display());

    let mut manifest = RunManifest::new("synth", &args, Some(seed));
    manifest.inputs = args.spec.iter().map(|p| display(p)).collect();
    manifest.timings_ms = clock.laps;
    manifest.write(&manifest_path(&args.manifest, &out, true))
}

pub(super) fn bench(mut args: BenchArgs) -> Result<()> {
    let defaults = BenchConfig::default();
    let seed = match args.seed {
        Some(s) => s,
        None => default_seed()?,
    };
    args.seed = Some(seed);
    let config = BenchConfig {
        lengths: args.lengths.get_or_insert(defaults.lengths).clone(),
        num_classes: *args.classes.get_or_insert(defaults.num_classes),
        num_transitions: *args.transitions.get_or_insert(defaults.num_transitions),
        repetitions: *args.reps.get_or_insert(defaults.repetitions),
        seed,
    };
    let out = args.out.get_or_insert_with(|| PathBuf::from("bench.csv")).clone();
    let mut clock = Stopwatch::start();
    let report = bench::run(&config)?;
    clock.lap("bench");
    print!("{}", report.table());
    io::write_file(&out, report.to_csv())?;

    let mut manifest = RunManifest::new("bench", &args, Some(seed));
    manifest.timings_ms = clock.laps;
    for row in &report.rows {
        manifest
            .timings_ms
            .insert(format!("constrained_T{}", row.frames), row.constrained_ms);
        manifest
            .timings_ms
            .insert(format!("classical_T{}", row.frames), row.classical_ms);
    }
    manifest.write(&manifest_path(&args.manifest, &out, false))
}
