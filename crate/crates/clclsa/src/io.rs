//! Comma-separated views, label lists, masks and dataset directories.

use std::fs;
use std::path::{Path, PathBuf};

use clclsa_core::data::{Mask, MultiOmicsDataset};
use clclsa_core::numerics::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{csv_err, io, json, Error, Result};

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// A view matrix: header row of feature names, then one row per subject.
pub fn read_view(path: &Path) -> Result<(Vec<String>, Tensor)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let cols = names.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(csv_err(path))?;
        if record.len() != cols {
            return Err(parse_error(
                path,
                line,
                format!("expected {cols} columns, found {}", record.len()),
            ));
        }
        for cell in record.iter() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(path, line, format!("non-numeric cell {cell:?}")))?;
            data.push(v);
        }
        rows += 1;
    }
    Ok((names, Tensor::from_vec(rows, cols, data)?))
}

/// Writes values in shortest round-trip form, so reading back is exact.
pub fn write_view(path: &Path, names: &[String], x: &Tensor) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(names).map_err(csv_err(path))?;
    for r in 0..x.rows() {
        w.write_record(x.row(r).iter().map(|v| format!("{v:?}")))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

/// One non-negative integer label per line; blank lines are skipped.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| parse_error(path, i + 1, format!("invalid label {:?}", l.trim())))
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::with_capacity(labels.len() * 2);
    for y in labels {
        text.push_str(&y.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(io(path))
}

/// `N` rows of `M` 0/1 flags. A non-numeric first row is taken as a header.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let mut rows: Vec<Vec<bool>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let parsed: Option<Vec<bool>> = record
            .iter()
            .map(|c| match c {
                "0" => Some(false),
                "1" => Some(true),
                _ => None,
            })
            .collect();
        match parsed {
            Some(r) => rows.push(r),
            None if i == 0 => continue,
            None => return Err(parse_error(path, i + 1, "mask cells must be 0 or 1")),
        }
    }
    Mask::from_rows(&rows).map_err(|e| parse_error(path, 0, e.to_string()))
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    let mut text = String::new();
    for j in 0..mask.subjects() {
        let row: Vec<&str> = mask.row(j).iter().map(|&b| if b { "1" } else { "0" }).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(io(path))
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Min-max scale every feature to `[0, 1]` (constant columns become 0).
    pub scale: bool,
    /// Class count; inferred as `max label + 1` when absent.
    pub num_classes: Option<usize>,
    pub mask: Option<PathBuf>,
}

/// Reads one CSV per view and a label file into a dataset.
pub fn load_dataset(
    view_files: &[PathBuf],
    label_file: &Path,
    options: &LoadOptions,
) -> Result<MultiOmicsDataset> {
    let labels = read_labels(label_file)?;
    let mut views = Vec::with_capacity(view_files.len());
    let mut feature_names = Vec::with_capacity(view_files.len());
    for path in view_files {
        let (names, x) = read_view(path)?;
        if x.rows() != labels.len() {
            return Err(parse_error(
                path,
                0,
                format!("{} rows but {} labels", x.rows(), labels.len()),
            ));
        }
        views.push(x);
        feature_names.push(names);
    }
    let classes = options
        .num_classes
        .unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= classes) {
        return Err(parse_error(
            label_file,
            i + 1,
            format!("label {y} out of range for {classes} classes"),
        ));
    }
    let mask = match &options.mask {
        Some(p) => read_mask(p)?,
        None => Mask::full(labels.len(), views.len()),
    };
    let mut ds = MultiOmicsDataset::with_mask(views, mask, labels, classes)?;
    ds.feature_names = feature_names;
    ds.view_names = view_files
        .iter()
        .map(|p| {
            p.file_stem()
                .map_or_else(|| "view".to_string(), |s| s.to_string_lossy().into_owned())
        })
        .collect();
    if options.scale {
        ds.min_max_scale();
    }
    Ok(ds)
}

/// `dataset.json` inside a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub subjects: usize,
    pub num_classes: usize,
    pub view_files: Vec<String>,
    pub view_dims: Vec<usize>,
    pub view_names: Vec<String>,
    pub labels: String,
    pub mask: String,
    pub missing_rate: f64,
    pub seeds: Vec<u64>,
    pub provenance: String,
}

pub const DATASET_MANIFEST: &str = "dataset.json";

/// Writes views, labels, mask and a manifest into `dir`.
pub fn save_dataset_dir(dir: &Path, ds: &MultiOmicsDataset, seeds: &[u64]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut view_files = Vec::new();
    for (i, x) in ds.views().iter().enumerate() {
        let name = format!("view{i}.csv");
        write_view(&dir.join(&name), &ds.feature_names[i], x)?;
        view_files.push(name);
    }
    write_labels(&dir.join("labels.csv"), ds.labels())?;
    write_mask(&dir.join("mask.csv"), ds.mask())?;
    let manifest = DatasetManifest {
        subjects: ds.num_subjects(),
        num_classes: ds.num_classes(),
        view_files,
        view_dims: ds.view_dims(),
        view_names: ds.view_names.clone(),
        labels: "labels.csv".into(),
        mask: "mask.csv".into(),
        missing_rate: ds.missing_rate(),
        seeds: seeds.to_vec(),
        provenance: ds.provenance.clone(),
    };
    write_json(&dir.join(DATASET_MANIFEST), &manifest)
}

/// Reads a directory written by [`save_dataset_dir`].
pub fn load_dataset_dir(dir: &Path) -> Result<MultiOmicsDataset> {
    let manifest: DatasetManifest = read_json(&dir.join(DATASET_MANIFEST))?;
    let views: Vec<PathBuf> = manifest.view_files.iter().map(|f| dir.join(f)).collect();
    let options = LoadOptions {
        scale: false,
        num_classes: Some(manifest.num_classes),
        mask: Some(dir.join(&manifest.mask)),
    };
    let mut ds = load_dataset(&views, &dir.join(&manifest.labels), &options)?;
    ds.view_names = manifest.view_names;
    ds.provenance = manifest.provenance;
    Ok(ds)
}

/// Files a dataset directory's contents come from, for digests.
pub fn dataset_dir_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest: DatasetManifest = read_json(&dir.join(DATASET_MANIFEST))?;
    let mut files = vec![dir.join(DATASET_MANIFEST)];
    files.extend(manifest.view_files.iter().map(|f| dir.join(f)));
    files.push(dir.join(&manifest.labels));
    files.push(dir.join(&manifest.mask));
    Ok(files)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(json(path))?;
    fs::write(path, text + "\n").map_err(io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(json(path))
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}
