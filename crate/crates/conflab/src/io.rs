//! File formats: dataset CSV, IDX image/label pairs, and the per-epoch
//! record's CSV/JSON forms.
//!
//! Floats are written with Rust's shortest-round-trip formatting, so every
//! file re-parses to exactly the values that produced it, and identical runs
//! produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use conflab_core::metrics::{EpochRecord, RunRecord};
use conflab_core::{Dataset, Mat, SplitTag};

use crate::error::{CliError, Result};

/// Reads a dataset from a no-header CSV with the integer label in the last
/// column and real features before it.
pub fn load_csv(path: &Path, class_count: usize, split: SplitTag) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut features: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut dim: Option<usize> = None;
    for (line_no, line) in text.lines().enumerate() {
        let row = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(CliError::parse(
                path,
                format!("row {row}: need at least one feature and a label"),
            ));
        }
        let this_dim = fields.len() - 1;
        match dim {
            None => dim = Some(this_dim),
            Some(d) if d != this_dim => {
                return Err(CliError::parse(
                    path,
                    format!("row {row}: {this_dim} features, expected {d}"),
                ));
            }
            _ => {}
        }
        for f in &fields[..this_dim] {
            features.push(f.trim().parse::<f64>().map_err(|e| {
                CliError::parse(path, format!("row {row}: bad feature {f:?}: {e}"))
            })?);
        }
        let label_field = fields[this_dim].trim();
        let label: usize = label_field.parse().map_err(|e| {
            CliError::parse(path, format!("row {row}: bad label {label_field:?}: {e}"))
        })?;
        if label >= class_count {
            return Err(CliError::parse(
                path,
                format!("row {row}: label {label} out of range for {class_count} classes"),
            ));
        }
        labels.push(label);
    }
    let dim = dim.ok_or_else(|| CliError::parse(path, "no data rows"))?;
    let n = labels.len();
    Ok(Dataset::new(
        Mat::from_vec(n, dim, features),
        labels,
        None,
        class_count,
        split,
    )?)
}

/// Writes a dataset as a no-header CSV, label last.
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..ds.len() {
        for v in ds.features.row(i) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", ds.labels[i]));
    }
    write_atomic(path, out.as_bytes())
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(CliError::parse(
            path,
            format!("truncated at byte {offset}: need 4 more bytes"),
        ));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Reads a big-endian IDX image/label pair (the MNIST container format);
/// pixels are scaled to `[0, 1]` and the class count is inferred from the
/// labels.
pub fn load_idx(images_path: &Path, labels_path: &Path, split: SplitTag) -> Result<Dataset> {
    let images = fs::read(images_path).map_err(|e| CliError::io(images_path, e))?;
    let labels_raw = fs::read(labels_path).map_err(|e| CliError::io(labels_path, e))?;

    let magic = read_be_u32(&images, 0, images_path)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(CliError::parse(
            images_path,
            format!("byte 0: magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"),
        ));
    }
    let count = read_be_u32(&images, 4, images_path)? as usize;
    let rows = read_be_u32(&images, 8, images_path)? as usize;
    let cols = read_be_u32(&images, 12, images_path)? as usize;
    let dim = rows * cols;
    let expected = 16 + count * dim;
    if images.len() != expected {
        return Err(CliError::parse(
            images_path,
            format!("payload is {} bytes, expected {expected}", images.len()),
        ));
    }

    let magic = read_be_u32(&labels_raw, 0, labels_path)?;
    if magic != IDX_LABEL_MAGIC {
        return Err(CliError::parse(
            labels_path,
            format!("byte 0: magic {magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}"),
        ));
    }
    let label_count = read_be_u32(&labels_raw, 4, labels_path)? as usize;
    if label_count != count {
        return Err(CliError::parse(
            labels_path,
            format!("{label_count} labels for {count} images"),
        ));
    }
    if labels_raw.len() != 8 + count {
        return Err(CliError::parse(
            labels_path,
            format!(
                "payload is {} bytes, expected {}",
                labels_raw.len(),
                8 + count
            ),
        ));
    }

    let features: Vec<f64> = images[16..].iter().map(|&b| f64::from(b) / 255.0).collect();
    let labels: Vec<usize> = labels_raw[8..].iter().map(|&b| b as usize).collect();
    let class_count = labels.iter().max().map_or(1, |&m| m + 1).max(2);
    Ok(Dataset::new(
        Mat::from_vec(count, dim, features),
        labels,
        None,
        class_count,
        split,
    )?)
}

/// Fixed column order of the per-epoch CSV; per-class accuracies expand into
/// one column per class, blank when the class has no test examples.
pub fn run_record_to_csv(record: &RunRecord) -> String {
    let mut out = String::from(
        "epoch,train_acc_noisy,train_acc_clean,test_acc,mean_weight,min_weight,soft_label_uniformity",
    );
    for c in 0..record.class_count {
        out.push_str(&format!(",per_class_test_acc_{c}"));
    }
    out.push_str(",labels_changed_count\n");
    for e in &record.epochs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}",
            e.epoch,
            e.train_acc_noisy,
            e.train_acc_clean,
            e.test_acc,
            e.mean_weight,
            e.min_weight,
            e.soft_label_uniformity
        ));
        for acc in &e.per_class_test_acc {
            match acc {
                Some(v) => out.push_str(&format!(",{v}")),
                None => out.push(','),
            }
        }
        out.push_str(&format!(",{}\n", e.labels_changed_count));
    }
    out
}

pub fn run_record_from_csv(text: &str, path: &Path) -> Result<RunRecord> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::parse(path, "empty record file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let class_count = columns
        .iter()
        .filter(|c| c.starts_with("per_class_test_acc_"))
        .count();
    if columns.len() != 8 + class_count {
        return Err(CliError::parse(
            path,
            format!("unexpected header with {} columns", columns.len()),
        ));
    }
    let mut record = RunRecord::new(class_count);
    for (line_no, line) in lines.enumerate() {
        let row = line_no + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 + class_count {
            return Err(CliError::parse(
                path,
                format!(
                    "row {row}: {} fields, expected {}",
                    fields.len(),
                    8 + class_count
                ),
            ));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| CliError::parse(path, format!("row {row}, column {i}: {e}")))
        };
        let mut per_class = Vec::with_capacity(class_count);
        for i in 0..class_count {
            let field = fields[7 + i];
            per_class.push(if field.is_empty() {
                None
            } else {
                Some(num(7 + i)?)
            });
        }
        let entry = EpochRecord {
            epoch: fields[0]
                .parse()
                .map_err(|e| CliError::parse(path, format!("row {row}: epoch: {e}")))?,
            train_acc_noisy: num(1)?,
            train_acc_clean: num(2)?,
            test_acc: num(3)?,
            mean_weight: num(4)?,
            min_weight: num(5)?,
            soft_label_uniformity: num(6)?,
            per_class_test_acc: per_class,
            labels_changed_count: fields[7 + class_count]
                .parse()
                .map_err(|e| CliError::parse(path, format!("row {row}: count: {e}")))?,
        };
        record.push(entry)?;
    }
    Ok(record)
}

pub fn run_record_to_json(record: &RunRecord) -> serde_json::Value {
    serde_json::json!({
        "class_count": record.class_count,
        "epochs": record.epochs.iter().map(|e| serde_json::json!({
            "epoch": e.epoch,
            "train_acc_noisy": e.train_acc_noisy,
            "train_acc_clean": e.train_acc_clean,
            "test_acc": e.test_acc,
            "mean_weight": e.mean_weight,
            "min_weight": e.min_weight,
            "soft_label_uniformity": e.soft_label_uniformity,
            "per_class_test_acc": e.per_class_test_acc,
            "labels_changed_count": e.labels_changed_count,
        })).collect::<Vec<_>>(),
    })
}

pub fn run_record_from_json(value: &serde_json::Value, path: &Path) -> Result<RunRecord> {
    let bad = |msg: &str| CliError::parse(path, msg.to_string());
    let class_count = value["class_count"]
        .as_u64()
        .ok_or_else(|| bad("class_count missing"))? as usize;
    let mut record = RunRecord::new(class_count);
    let epochs = value["epochs"]
        .as_array()
        .ok_or_else(|| bad("epochs missing"))?;
    for e in epochs {
        let f = |key: &str| -> Result<f64> {
            e[key]
                .as_f64()
                .ok_or_else(|| CliError::parse(path, format!("{key} missing")))
        };
        let per_class = e["per_class_test_acc"]
            .as_array()
            .ok_or_else(|| bad("per_class_test_acc missing"))?
            .iter()
            .map(|v| v.as_f64())
            .collect();
        record.push(EpochRecord {
            epoch: e["epoch"].as_u64().ok_or_else(|| bad("epoch missing"))? as usize,
            train_acc_noisy: f("train_acc_noisy")?,
            train_acc_clean: f("train_acc_clean")?,
            test_acc: f("test_acc")?,
            mean_weight: f("mean_weight")?,
            min_weight: f("min_weight")?,
            soft_label_uniformity: f("soft_label_uniformity")?,
            per_class_test_acc: per_class,
            labels_changed_count: e["labels_changed_count"]
                .as_u64()
                .ok_or_else(|| bad("labels_changed_count missing"))?
                as usize,
        })?;
    }
    Ok(record)
}

/// Writes via a temp file then renames, so partially-written outputs never
/// appear under the final name.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::parse(path, e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
