//! JSON indexes of cloud files: generated datasets and adversarial sets.

use std::path::{Path, PathBuf};

use gsda_core::PointCloud;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_any, read_json, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    /// Relative to the manifest's directory.
    pub path: String,
    pub label: usize,
    pub class: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub n_points: usize,
    pub per_class: usize,
    pub jitter_sigma: f64,
    pub class_names: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

/// Which manifest entries a command works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitFilter {
    Train,
    Test,
    All,
}

impl SplitFilter {
    fn admits(self, s: Split) -> bool {
        match self {
            SplitFilter::All => true,
            SplitFilter::Train => s == Split::Train,
            SplitFilter::Test => s == Split::Test,
        }
    }
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Loads the selected clouds, labelled, in manifest order.
    pub fn load_clouds(&self, manifest_path: &Path, filter: SplitFilter) -> Result<Vec<(ManifestEntry, PointCloud)>> {
        let dir = parent_dir(manifest_path);
        self.entries
            .iter()
            .filter(|e| filter.admits(e.split))
            .map(|e| {
                let cloud = load_any(&dir.join(&e.path))?.with_label(e.label);
                Ok((e.clone(), cloud))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvEntry {
    pub id: usize,
    pub path: String,
    pub label: usize,
    pub target: Option<usize>,
    pub success: bool,
}

/// Output of an attack run, consumed by `defend-eval` and `transfer`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvManifest {
    pub source_model: String,
    pub attack: String,
    pub entries: Vec<AdvEntry>,
}

impl AdvManifest {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }

    pub fn load_clouds(&self, manifest_path: &Path) -> Result<Vec<(AdvEntry, PointCloud)>> {
        let dir = parent_dir(manifest_path);
        if self.entries.is_empty() {
            return Err(Error::Validation(format!("{}: no adversarial entries", manifest_path.display())));
        }
        self.entries
            .iter()
            .map(|e| Ok((e.clone(), load_any(&dir.join(&e.path))?.with_label(e.label))))
            .collect()
    }
}

pub(crate) fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}
