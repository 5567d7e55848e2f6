//! Label files, class mappings and directory listings.
//!
//! A label file holds one token per line, either a class name or an integer
//! index. A mapping file holds `name<TAB>index` lines and resolves names.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Bidirectional class name / index lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMapping {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClassMapping {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate class name {name:?}")));
            }
        }
        Ok(Self { names, index })
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String)> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let loc = || format!("{source}:{}", n + 1);
            let (name, idx) = match line.split_once('\t') {
                Some((name, idx)) => (name.trim(), idx.trim()),
                None => {
                    return Err(Error::parse(loc(), "expected `name<TAB>index`"));
                }
            };
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::parse(loc(), format!("invalid class index {idx:?}")))?;
            entries.push((idx, name.to_string()));
        }
        if entries.is_empty() {
            return Err(Error::parse(source, "mapping file is empty"));
        }
        entries.sort();
        for (k, (idx, name)) in entries.iter().enumerate() {
            if *idx != k {
                return Err(Error::parse(
                    source,
                    format!("class indices must be 0..C without gaps; {name:?} has index {idx}"),
                ));
            }
        }
        Self::new(entries.into_iter().map(|(_, n)| n).collect()).map_err(|e| Error::parse(source, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, class: usize) -> &str {
        &self.names[class]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Resolves a name or integer token.
    pub fn resolve(&self, token: &str) -> Option<usize> {
        self.index(token)
            .or_else(|| token.parse().ok().filter(|&i: &usize| i < self.len()))
    }

    pub fn to_text(&self) -> String {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| format!("{n}\t{i}\n"))
            .collect()
    }
}

/// Parses a label file body. Without a mapping every token must be an
/// integer index.
pub fn parse_labels(text: &str, source: &str, mapping: Option<&ClassMapping>) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let class = match mapping {
            Some(m) => m.resolve(token),
            None => token.parse().ok(),
        };
        match class {
            Some(c) => labels.push(c),
            None => {
                return Err(Error::parse(
                    format!("{source}:{}", n + 1),
                    format!("unknown label {token:?}"),
                ))
            }
        }
    }
    Ok(labels)
}

pub fn read_labels(path: &Path, mapping: Option<&ClassMapping>) -> Result<Vec<usize>> {
    let text = read_to_string(path)?;
    let labels = parse_labels(&text, &path.display().to_string(), mapping)?;
    if labels.is_empty() {
        return Err(Error::parse(path.display().to_string(), "label file has no labels"));
    }
    Ok(labels)
}

/// One token per line, using class names when a mapping is given.
pub fn format_labels(labels: &[usize], mapping: Option<&ClassMapping>) -> String {
    let mut out = String::with_capacity(labels.len() * 3);
    for &c in labels {
        match mapping {
            Some(m) => out.push_str(m.name(c)),
            None => out.push_str(&c.to_string()),
        }
        out.push('\n');
    }
    out
}

/// Files directly inside `dir` whose extension is one of `extensions`,
/// sorted by name.
pub fn list_files(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if path.is_file() && extensions.contains(&ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// File name without its extension, used as the video name.
pub fn video_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
