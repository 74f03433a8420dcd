//! Dataset manifests: one entry per image, each listing per-instance mask
//! files relative to the manifest's directory.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scribsim_core::synth::InstanceAnnotation;

use crate::error::{Error, Result};
use crate::png_io::read_binary_mask;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceEntry {
    /// Signed so that negative ids are reported by validation rather than
    /// rejected by the parser.
    pub class_id: i64,
    pub mask_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub instances: Vec<InstanceEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative mask paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn from_json(text: &str, base_dir: &Path, origin: &Path) -> Result<Self> {
        let mut manifest: DatasetManifest = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        manifest.base_dir = base_dir.to_path_buf();
        manifest.validate()?;
        Ok(manifest)
    }

    /// Structural checks; mask files are opened later, per image.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, entry) in self.entries.iter().enumerate() {
            let id = &entry.image_id;
            if let Some(first) = seen.insert(id, i) {
                problems.push(format!("entries[{i}]: duplicate image_id `{id}` (first at entries[{first}])"));
            }
            if !valid_image_id(id) {
                problems.push(format!("entries[{i}]: image_id `{id}` is empty or not a plain file name"));
            }
            if entry.width == 0 || entry.height == 0 {
                problems.push(format!("entries[{i}] `{id}`: zero dimension {}x{}", entry.width, entry.height));
            }
            let backgrounds = entry.instances.iter().filter(|inst| inst.class_id == 0).count();
            if backgrounds > 1 {
                problems.push(format!("entries[{i}] `{id}`: {backgrounds} background (class 0) instances"));
            }
            for (j, inst) in entry.instances.iter().enumerate() {
                if !(0..255).contains(&inst.class_id) {
                    problems.push(format!(
                        "entries[{i}] `{id}` instances[{j}]: class_id {} outside 0..=254",
                        inst.class_id
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn mask_path(&self, inst: &InstanceEntry) -> PathBuf {
        self.base_dir.join(&inst.mask_path)
    }

    /// Reads every instance mask of `entry`, checking its dimensions.
    pub fn load_instances(&self, entry: &ManifestEntry) -> Result<Vec<InstanceAnnotation>> {
        entry
            .instances
            .iter()
            .map(|inst| {
                let path = self.mask_path(inst);
                let mask = read_binary_mask(&path)?;
                if mask.dims() != (entry.width, entry.height) {
                    return Err(Error::malformed(
                        &path,
                        format!(
                            "mask is {}x{}, manifest declares {}x{}",
                            mask.width(),
                            mask.height(),
                            entry.width,
                            entry.height
                        ),
                    ));
                }
                Ok(InstanceAnnotation::new(inst.class_id as u8, mask))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Image ids become output file names, so they may not contain separators.
fn valid_image_id(id: &str) -> bool {
    !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\', '\0'])
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    DatasetManifest::from_json(&text, &base, path)
}
