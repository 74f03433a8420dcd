//! Builds a manifest from paired semantic and instance-id PNGs.
//!
//! For every `<id>.png` present in both directories:
//! - each nonzero instance id becomes one instance, labelled with the most
//!   frequent semantic class under it (smallest class on ties);
//! - pixels without an instance id are grouped per semantic class, class 0
//!   giving the background instance;
//! - semantic value 255 is ignored everywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use scribsim_core::label::IGNORE;
use scribsim_core::BinaryMask;

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, InstanceEntry, ManifestEntry};
use crate::pipeline::list_label_pngs;
use crate::png_io::{read_gray8, write_binary_mask};

/// Instance masks of one image pair, ordered by instance id, then by class
/// for the unassigned regions.
pub fn split_instances(width: usize, height: usize, semantic: &[u8], instance: &[u8]) -> Vec<(u8, BinaryMask)> {
    let mut by_instance: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, (&s, &id)) in semantic.iter().zip(instance).enumerate() {
        if s == IGNORE {
            continue;
        }
        if id == 0 {
            by_class.entry(s).or_default().push(i);
        } else {
            by_instance.entry(id).or_default().push(i);
        }
    }
    let to_mask = |pixels: &[usize]| {
        let mut m = BinaryMask::new(width, height);
        for &i in pixels {
            m.set(i % width, i / width, true);
        }
        m
    };
    let mut out = Vec::new();
    for pixels in by_instance.values() {
        let mut votes = [0usize; 256];
        for &i in pixels {
            votes[usize::from(semantic[i])] += 1;
        }
        let class = (0..=254u8).max_by(|&a, &b| votes[a as usize].cmp(&votes[b as usize]).then(b.cmp(&a))).unwrap_or(0);
        out.push((class, to_mask(pixels)));
    }
    for (&class, pixels) in &by_class {
        out.push((class, to_mask(pixels)));
    }
    // Class 0 may only appear once; merge extra background pieces.
    let mut merged: Vec<(u8, BinaryMask)> = Vec::new();
    let mut background: Option<BinaryMask> = None;
    for (class, mask) in out {
        if class == 0 {
            match &mut background {
                Some(b) => b.union_with(&mask),
                None => background = Some(mask),
            }
        } else {
            merged.push((class, mask));
        }
    }
    merged.extend(background.map(|b| (0, b)));
    merged
}

/// Writes one binary mask per instance into `<out_dir>/masks/` and returns the
/// path of the new `<out_dir>/manifest.json`.
pub fn convert_pairs(semantic_dir: &Path, instance_dir: &Path, out_dir: &Path) -> Result<PathBuf> {
    let mask_dir = out_dir.join("masks");
    fs::create_dir_all(&mask_dir).map_err(|e| Error::io(&mask_dir, e))?;
    let mut manifest = DatasetManifest::default();
    for (id, sem_path) in list_label_pngs(semantic_dir)? {
        let inst_path = instance_dir.join(format!("{id}.png"));
        if !inst_path.is_file() {
            continue;
        }
        let sem = read_gray8(&sem_path)?;
        let inst = read_gray8(&inst_path)?;
        if (sem.width, sem.height) != (inst.width, inst.height) {
            return Err(Error::malformed(&inst_path, "instance and semantic images differ in size"));
        }
        let mut instances = Vec::new();
        for (j, (class, mask)) in split_instances(sem.width, sem.height, &sem.pixels, &inst.pixels).into_iter().enumerate() {
            let rel = PathBuf::from("masks").join(format!("{id}_{j}.png"));
            write_binary_mask(&out_dir.join(&rel), &mask)?;
            instances.push(InstanceEntry { class_id: i64::from(class), mask_path: rel });
        }
        manifest.entries.push(ManifestEntry { image_id: id, width: sem.width, height: sem.height, instances });
    }
    manifest.validate()?;
    let path = out_dir.join("manifest.json");
    fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
