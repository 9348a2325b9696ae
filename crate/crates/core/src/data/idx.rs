//! IDX container reader (MNIST family). Headers are big-endian.

use std::path::Path;

use ndarray::Array2;

use super::{DataError, LabeledDataset};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn format_err(file: &str, field: &'static str, detail: impl Into<String>) -> DataError {
    DataError::Format {
        file: file.to_string(),
        field,
        detail: detail.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize, file: &str, field: &'static str) -> Result<u32, DataError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(file, field, "file truncated inside header"))
}

/// Parses an IDX image file into `(count, rows * cols)` pixels scaled by 1/255.
pub fn read_idx_images(bytes: &[u8], file: &str) -> Result<Array2<f64>, DataError> {
    let magic = be_u32(bytes, 0, file, "magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format_err(
            file,
            "magic",
            format!("expected {IDX_IMAGES_MAGIC:#010x} for images, found {magic:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4, file, "item count")? as usize;
    let rows = be_u32(bytes, 8, file, "row count")? as usize;
    let cols = be_u32(bytes, 12, file, "column count")? as usize;
    let pixels = &bytes[16..];
    let expected = count * rows * cols;
    if pixels.len() < expected {
        return Err(format_err(
            file,
            "pixel data",
            format!("truncated: {} bytes, header promises {expected}", pixels.len()),
        ));
    }
    Ok(Array2::from_shape_fn((count, rows * cols), |(i, j)| {
        f64::from(pixels[i * rows * cols + j]) / 255.0
    }))
}

pub fn read_idx_labels(bytes: &[u8], file: &str) -> Result<Vec<u32>, DataError> {
    let magic = be_u32(bytes, 0, file, "magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(format_err(
            file,
            "magic",
            format!("expected {IDX_LABELS_MAGIC:#010x} for labels, found {magic:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4, file, "item count")? as usize;
    let data = &bytes[8..];
    if data.len() < count {
        return Err(format_err(
            file,
            "label data",
            format!("truncated: {} bytes, header promises {count}", data.len()),
        ));
    }
    Ok(data[..count].iter().map(|&b| u32::from(b)).collect())
}

/// Loads an image/label IDX pair and drops classes with fewer than
/// `min_class_count` samples.
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    min_class_count: usize,
) -> Result<LabeledDataset, DataError> {
    let images_name = images_path.display().to_string();
    let labels_name = labels_path.display().to_string();
    let samples = read_idx_images(&read_file(images_path)?, &images_name)?;
    let labels = read_idx_labels(&read_file(labels_path)?, &labels_name)?;
    if samples.nrows() != labels.len() {
        return Err(format_err(
            &labels_name,
            "item count",
            format!("{} labels for {} images", labels.len(), samples.nrows()),
        ));
    }
    Ok(LabeledDataset::new(samples, labels)?.retain_classes_with_at_least(min_class_count))
}
