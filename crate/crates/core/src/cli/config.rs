use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{BenchArgs, DecodeArgs, EvalArgs, ExtractArgs, SynthArgs};
use crate::error::{Error, Result};
use crate::io;

/// Environment variable that replaces the default seed.
pub const SEED_ENV: &str = "CADEC_SEED";
/// Version of the JSON evaluation report layout.
pub const EVAL_REPORT_VERSION: u32 = 1;

pub(crate) trait Layered: Sized + DeserializeOwned {
    fn config_path(&self) -> Option<&Path>;
    /// Field-wise: values set in `self` win over `lower`.
    fn over(self, lower: Self) -> Self;
}

macro_rules! layered {
    ($t:ty { $($field:ident),* $(,)? }) => {
        impl Layered for $t {
            fn config_path(&self) -> Option<&Path> {
                self.config.as_deref()
            }

            fn over(self, lower: Self) -> Self {
                Self {
                    $($field: self.$field.or(lower.$field),)*
                    config: self.config,
                }
            }
        }
    };
}

layered!(ExtractArgs {
    labels,
    mapping,
    classes,
    out,
    slack,
    manifest
});
layered!(DecodeArgs {
    probs,
    constraints,
    mode,
    w_transition,
    w_duration,
    lambda,
    epsilon_floor,
    fallback,
    out,
    mapping,
    jobs,
    manifest,
});
layered!(EvalArgs {
    pred,
    gt,
    mapping,
    ignore,
    out,
    jobs,
    manifest
});
layered!(SynthArgs {
    out,
    spec,
    train,
    test,
    sigma,
    seed,
    format,
    manifest
});
layered!(BenchArgs {
    lengths,
    classes,
    transitions,
    reps,
    seed,
    out,
    manifest
});

/// Applies the `--config` file under the command-line flags.
pub(crate) fn layer<T: Layered>(args: T, command: &str) -> Result<T> {
    let Some(path) = args.config_path().map(Path::to_path_buf) else {
        return Ok(args);
    };
    let source = path.display().to_string();
    let text = io::read_to_string(&path)?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let mut value: serde_json::Value = if is_toml {
        let table: toml::Table = toml::from_str(&text).map_err(|e| Error::parse(&source, e.to_string()))?;
        serde_json::to_value(table).map_err(|e| Error::parse(&source, e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| Error::parse(&source, e.to_string()))?
    };
    if let Some(obj) = value.as_object_mut() {
        if obj.contains_key("command") && obj.contains_key("config") {
            let recorded = obj.get("command").and_then(|c| c.as_str()).unwrap_or("");
            if recorded != command {
                return Err(Error::InvalidArgument(format!(
                    "{source} is a manifest for `{recorded}`, not `{command}`"
                )));
            }
            value = obj.remove("config").unwrap_or_default();
        }
    }
    let from_file: T = serde_json::from_value(value).map_err(|e| Error::parse(&source, e.to_string()))?;
    Ok(args.over(from_file))
}

/// Seed used when neither the command line nor a config file sets one.
pub(crate) fn default_seed() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

/// Outcome of decoding one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoOutcome {
    pub video: String,
    pub output: String,
    pub frames: usize,
    pub feasible: bool,
    pub used_fallback: bool,
    pub log_score: f64,
}

/// Record of one run: enough to repeat it with `--config <manifest>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Fully resolved settings.
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub videos: Vec<VideoOutcome>,
}

impl RunManifest {
    pub(crate) fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config).expect("settings serialize"),
            inputs: Vec::new(),
            timings_ms: BTreeMap::new(),
            videos: Vec::new(),
        }
    }

    pub(crate) fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        io::write_file(path, text)
    }
}

/// Wall-clock time per named stage.
pub(crate) struct Stopwatch {
    last: Instant,
    pub(crate) laps: BTreeMap<String, f64>,
}

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Self {
            last: Instant::now(),
            laps: BTreeMap::new(),
        }
    }

    pub(crate) fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.laps
            .insert(stage.to_string(), (now - self.last).as_secs_f64() * 1e3);
        self.last = now;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_wins_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "slack = 0.2\nout = \"x.json\"\n").unwrap();
        let args = ExtractArgs {
            slack: Some(0.1),
            config: Some(path),
            ..Default::default()
        };
        let merged = layer(args, "extract").unwrap();
        assert_eq!(merged.slack, Some(0.1));
        assert_eq!(merged.out.as_deref(), Some(Path::new("x.json")));
    }

    #[test]
    fn manifest_replays_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let settings = EvalArgs {
            pred: Some("p".into()),
            jobs: Some(2),
            ..Default::default()
        };
        RunManifest::new("eval", &settings, None).write(&path).unwrap();
        let merged = layer(
            EvalArgs {
                config: Some(path.clone()),
                ..Default::default()
            },
            "eval",
        )
        .unwrap();
        assert_eq!(merged.pred.as_deref(), Some(Path::new("p")));
        assert_eq!(merged.jobs, Some(2));
        assert!(layer(
            DecodeArgs {
                config: Some(path),
                ..Default::default()
            },
            "decode"
        )
        .is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"slak": 0.1}"#).unwrap();
        let err = layer(
            ExtractArgs {
                config: Some(path),
                ..Default::default()
            },
            "extract",
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
