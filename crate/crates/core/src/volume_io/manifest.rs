//! Dataset manifest CSV linking volumes, tracking logs, windows, labels and covariates.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rigid_motion::SequenceWindow;

pub const MANIFEST_HEADER: [&str; 11] = [
    "volume",
    "log",
    "window_start",
    "window_end",
    "clock_offset",
    "motion_score",
    "drift",
    "breathing",
    "noisy",
    "age",
    "split",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::UnknownSplit(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub volume: String,
    pub log: Option<String>,
    pub window: Option<SequenceWindow>,
    pub motion_score: Option<f64>,
    pub drift: Option<f64>,
    pub breathing: Option<f64>,
    pub noisy: Option<f64>,
    pub covariates: BTreeMap<String, f64>,
    pub split: Split,
}

impl ManifestEntry {
    pub fn new(volume: impl Into<String>, split: Split) -> Self {
        Self {
            volume: volume.into(),
            log: None,
            window: None,
            motion_score: None,
            drift: None,
            breathing: None,
            noisy: None,
            covariates: BTreeMap::new(),
            split,
        }
    }

    /// Usable as a training example: has a precomputed score or a log to compute one from.
    pub fn is_supervised(&self) -> bool {
        self.motion_score.is_some() || self.log.is_some()
    }

    pub fn covariate(&self, name: &str) -> Option<f64> {
        self.covariates.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against.
    pub base_dir: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let m = Self {
            entries,
            base_dir: None,
        };
        m.check_unique()?;
        Ok(m)
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.volume.as_str()) {
                return Err(Error::DuplicateVolume(e.volume.clone()));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn find(&self, volume: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.volume == volume)
    }
}

fn opt_f64(field: &str, column: &str, row: usize, path: &Path) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    let v: f64 = field.parse().map_err(|_| Error::Manifest {
        path: path.to_path_buf(),
        row,
        reason: format!("column {column}: cannot parse {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            row,
            reason: format!("column {column}: non-finite"),
        });
    }
    Ok(Some(v))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn parse_manifest(input: impl std::io::Read, path: &Path) -> Result<DatasetManifest> {
    let row_err = |row: usize, reason: String| Error::Manifest {
        path: path.to_path_buf(),
        row,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
        return Err(row_err(
            0,
            format!("expected header {:?}", MANIFEST_HEADER.join(",")),
        ));
    }
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let rec = record.map_err(|e| row_err(row, e.to_string()))?;
        if rec.len() != MANIFEST_HEADER.len() {
            return Err(row_err(row, format!("expected 11 fields, got {}", rec.len())));
        }
        let f = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| opt_f64(f(k), MANIFEST_HEADER[k], row, path);
        if f(0).is_empty() {
            return Err(row_err(row, "empty volume path".into()));
        }
        let window = match (num(2)?, num(3)?) {
            (Some(s), Some(e)) => Some(
                SequenceWindow::new(s, e, num(4)?.unwrap_or(0.0))
                    .map_err(|err| row_err(row, err.to_string()))?,
            ),
            (None, None) => None,
            _ => {
                return Err(row_err(
                    row,
                    "window_start and window_end must both be present or both empty".into(),
                ))
            }
        };
        let mut covariates = BTreeMap::new();
        if let Some(age) = num(9)? {
            covariates.insert("age".to_string(), age);
        }
        entries.push(ManifestEntry {
            volume: f(0).to_string(),
            log: Some(f(1)).filter(|s| !s.is_empty()).map(str::to_string),
            window,
            motion_score: num(5)?,
            drift: num(6)?,
            breathing: num(7)?,
            noisy: num(8)?,
            covariates,
            split: f(10).parse()?,
        });
    }
    let mut manifest = DatasetManifest::new(entries)?;
    manifest.base_dir = path.parent().map(Path::to_path_buf);
    Ok(manifest)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(file, path)
}

pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    manifest.check_unique()?;
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(MANIFEST_HEADER).map_err(csv_err)?;
    for e in &manifest.entries {
        let (ws, we, wo) = match e.window {
            Some(w) => (
                w.start.to_string(),
                w.end.to_string(),
                w.clock_offset.to_string(),
            ),
            None => Default::default(),
        };
        w.write_record([
            e.volume.clone(),
            e.log.clone().unwrap_or_default(),
            ws,
            we,
            wo,
            fmt_opt(e.motion_score),
            fmt_opt(e.drift),
            fmt_opt(e.breathing),
            fmt_opt(e.noisy),
            fmt_opt(e.covariate("age")),
            e.split.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
