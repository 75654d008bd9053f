//! Output files: CSV matrices, flat tensor files and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fracspec::tensor::Tensor;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// One matrix row per line, 17 significant digits.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::with_capacity(m.len() * 25);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| fmt(v)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<_, _>>())
        .collect::<std::result::Result<_, _>>()?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        bail!("ragged CSV matrix");
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

/// `# shape: n1,n2,...` followed by one `re,im` line per entry, first index
/// fastest.
pub fn tensor_text(t: &Tensor) -> String {
    let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
    let mut s = format!("# shape: {}\n", shape.join(","));
    for v in t.data() {
        s.push_str(&fmt(v.re));
        s.push(',');
        s.push_str(&fmt(v.im));
        s.push('\n');
    }
    s
}

pub fn parse_tensor_text(text: &str) -> Result<Tensor> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let Some(dims) = header.strip_prefix("# shape: ") else {
        bail!("missing shape header");
    };
    let shape: Vec<usize> = dims.split(',').map(str::parse).collect::<std::result::Result<_, _>>()?;
    let data: Vec<Complex64> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| -> Result<Complex64> {
            let (re, im) = l.split_once(',').context("expected re,im")?;
            Ok(Complex64::new(re.parse()?, im.parse()?))
        })
        .collect::<Result<_>>()?;
    Ok(Tensor::new(shape, data)?)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub alpha: Option<String>,
    #[serde(rename = "T")]
    pub t_final: Option<String>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "Nt")]
    pub nt: Option<usize>,
    #[serde(rename = "Nx")]
    pub nx: Option<usize>,
    pub m: Option<u32>,
    pub d: Option<usize>,
    pub digits: Option<u32>,
    pub b: Option<f64>,
    pub filter: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Parameters,
    pub wall_seconds: f64,
    pub version: String,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub results: serde_json::Map<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, parameters: Parameters) -> Self {
        Self {
            command: command.into(),
            parameters,
            wall_seconds: 0.0,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs: Vec::new(),
            results: serde_json::Map::new(),
        }
    }

    pub fn record(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.results.insert(key.into(), value.into());
    }
}

/// Collects the files of one run and writes them with their manifest.
#[derive(Debug)]
pub struct OutputSet {
    prefix: PathBuf,
    files: Vec<(PathBuf, String)>,
}

impl OutputSet {
    pub fn new(prefix: &Path) -> Self {
        Self { prefix: prefix.to_path_buf(), files: Vec::new() }
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        let mut name = self.prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
        name.push(suffix);
        self.prefix.with_file_name(name)
    }

    pub fn add(&mut self, suffix: &str, contents: String) {
        let p = self.path(suffix);
        self.files.push((p, contents));
    }

    pub fn write(self, mut manifest: RunManifest) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for (p, contents) in &self.files {
            write_atomic(p, contents.as_bytes())?;
            manifest.outputs.push(p.file_name().unwrap_or_default().to_string_lossy().into_owned());
            written.push(p.clone());
        }
        let mp = self.path("_manifest.json");
        write_atomic(&mp, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        written.push(mp);
        Ok(written)
    }
}
