use std::path::{Path, PathBuf};

use super::{load_idx, DataError, LabeledDataset};

/// Environment variable naming the directory that holds the IDX files.
pub const DATA_DIR_ENV: &str = "FEDCREF_DATA_DIR";

/// A known IDX dataset and where its files are expected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetEntry {
    pub name: &'static str,
    /// Subdirectory of the data directory; files are also accepted at the top level.
    pub subdir: &'static str,
    pub images: &'static str,
    pub labels: &'static str,
    pub min_class_count: usize,
    pub expected_classes: usize,
}

pub const EMNIST_DIGITS: DatasetEntry = DatasetEntry {
    name: "emnist",
    subdir: "emnist",
    images: "emnist-digits-train-images-idx3-ubyte",
    labels: "emnist-digits-train-labels-idx1-ubyte",
    min_class_count: 0,
    expected_classes: 10,
};

pub const KMNIST: DatasetEntry = DatasetEntry {
    name: "kmnist",
    subdir: "kmnist",
    images: "train-images-idx3-ubyte",
    labels: "train-labels-idx1-ubyte",
    min_class_count: 0,
    expected_classes: 10,
};

pub const KMNIST49: DatasetEntry = DatasetEntry {
    name: "kmnist49",
    subdir: "k49",
    images: "k49-train-images-idx3-ubyte",
    labels: "k49-train-labels-idx1-ubyte",
    min_class_count: 6000,
    expected_classes: 31,
};

pub const CATALOG: [DatasetEntry; 3] = [EMNIST_DIGITS, KMNIST, KMNIST49];

pub fn lookup(name: &str) -> Option<DatasetEntry> {
    CATALOG.iter().copied().find(|e| e.name == name)
}

/// The data directory from the environment, if set and non-empty.
pub fn data_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

impl DatasetEntry {
    /// Image and label paths under `dir`, if both exist.
    pub fn locate(&self, dir: &Path) -> Option<(PathBuf, PathBuf)> {
        [dir.join(self.subdir), dir.to_path_buf()].into_iter().find_map(|base| {
            let (i, l) = (base.join(self.images), base.join(self.labels));
            (i.is_file() && l.is_file()).then_some((i, l))
        })
    }

    pub fn load(&self, dir: &Path) -> Result<LabeledDataset, DataError> {
        let (images, labels) = self.locate(dir).ok_or_else(|| DataError::Io {
            path: dir.join(self.subdir).join(self.images).display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset files not found"),
        })?;
        load_idx(&images, &labels, self.min_class_count)
    }
}
