//! Batch runs over a manifest or a directory of label masks.
//!
//! Every image is an independent task on a rayon pool. Outputs depend only on
//! the inputs, the configuration and the seed, never on the worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scribsim_core::distmap::{distance_map, DistanceKind};
use scribsim_core::rng::image_seed;
use scribsim_core::synth::{simulate_image_traced, ScribbleStyle, SimulationConfig};
use scribsim_core::Error as CoreError;

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, ManifestEntry};
use crate::png_io::{read_label_mask, write_distance_map, write_label_mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageStatus {
    Ok,
    Skipped,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StyleCounts {
    pub line: usize,
    pub boundary: usize,
}

impl StyleCounts {
    fn add(&mut self, style: ScribbleStyle) {
        match style {
            ScribbleStyle::Line => self.line += 1,
            ScribbleStyle::Boundary => self.boundary += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image_id: String,
    pub status: ImageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Scribbled components by style.
    pub styles: StyleCounts,
    /// Instances with no component large enough to scribble.
    pub instances_skipped: usize,
}

impl ImageReport {
    fn new(image_id: &str, status: ImageStatus, reason: Option<String>) -> Self {
        Self { image_id: image_id.into(), status, reason, styles: StyleCounts::default(), instances_skipped: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub ok: usize,
    pub skipped: usize,
    pub error: usize,
    pub styles: StyleCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Effective settings of the run.
    pub config: serde_json::Value,
    pub runtime_seconds: f64,
    pub totals: Totals,
    /// Sorted by `image_id`.
    pub images: Vec<ImageReport>,
}

impl RunReport {
    fn assemble(command: &str, seed: Option<u64>, config: serde_json::Value, started: Instant, mut images: Vec<ImageReport>) -> Self {
        images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        let mut totals = Totals::default();
        for img in &images {
            match img.status {
                ImageStatus::Ok => totals.ok += 1,
                ImageStatus::Skipped => totals.skipped += 1,
                ImageStatus::Error => totals.error += 1,
            }
            totals.styles.line += img.styles.line;
            totals.styles.boundary += img.styles.boundary;
        }
        Self {
            command: command.into(),
            seed,
            config,
            runtime_seconds: started.elapsed().as_secs_f64(),
            totals,
            images,
        }
    }

    pub fn has_errors(&self) -> bool {
        self.totals.error > 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Simulates every manifest image into `<out_dir>/<image_id>.png`.
///
/// Failures to read or simulate one image are recorded in its report entry;
/// failures to write output abort the run.
pub fn run_simulate(manifest: &DatasetManifest, config: &SimulationConfig, out_dir: &Path, jobs: usize) -> Result<RunReport> {
    config.validate().map_err(|e| Error::Config(e.to_string()))?;
    let started = Instant::now();
    create_dir(out_dir)?;
    let images = pool(jobs)?.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| simulate_entry(manifest, entry, config, out_dir))
            .collect::<Result<Vec<_>>>()
    })?;
    let echo = serde_json::to_value(config).expect("config serializes");
    Ok(RunReport::assemble("simulate", Some(config.global_seed), echo, started, images))
}

fn simulate_entry(manifest: &DatasetManifest, entry: &ManifestEntry, config: &SimulationConfig, out_dir: &Path) -> Result<ImageReport> {
    let id = &entry.image_id;
    let instances = match manifest.load_instances(entry) {
        Ok(v) => v,
        Err(e) => return Ok(ImageReport::new(id, ImageStatus::Error, Some(e.to_string()))),
    };
    let seed = image_seed(config.global_seed, id);
    let result = match simulate_image_traced(entry.width, entry.height, &instances, config, seed) {
        Ok(r) => r,
        Err(e) => return Ok(ImageReport::new(id, ImageStatus::Error, Some(e.to_string()))),
    };
    write_label_mask(&out_dir.join(format!("{id}.png")), &result.label)?;
    let mut report = ImageReport::new(id, ImageStatus::Ok, None);
    for outcome in &result.instances {
        if outcome.skipped() {
            report.instances_skipped += 1;
        }
        for &style in &outcome.styles {
            report.styles.add(style);
        }
    }
    if report.styles == StyleCounts::default() {
        report.status = ImageStatus::Skipped;
        report.reason = Some(if instances.is_empty() {
            "no instances".into()
        } else {
            "no component reaches the minimum area".into()
        });
    }
    Ok(report)
}

/// Label-mask PNGs in `dir` (excluding distance maps), sorted by file name.
pub fn list_label_pngs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for item in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = item.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if name.ends_with(".dist.png") || !path.is_file() {
            continue;
        }
        if let Some(id) = name.strip_suffix(".png") {
            out.push((id.to_string(), path.clone()));
        }
    }
    out.sort();
    Ok(out)
}

/// Writes `<id>.dist.png` plus sidecar for every label mask in `input_dir`.
/// Images with no source pixel are reported as skipped.
pub fn run_distmaps(input_dir: &Path, lambda: f64, kind: DistanceKind, out_dir: &Path, jobs: usize) -> Result<RunReport> {
    if !lambda.is_finite() {
        return Err(Error::Config(format!("lambda must be finite, got {lambda}")));
    }
    let started = Instant::now();
    let inputs = list_label_pngs(input_dir)?;
    create_dir(out_dir)?;
    let images = pool(jobs)?.install(|| {
        inputs
            .par_iter()
            .map(|(id, path)| {
                let labels = match read_label_mask(path) {
                    Ok(l) => l,
                    Err(e) => return Ok(ImageReport::new(id, ImageStatus::Error, Some(e.to_string()))),
                };
                match distance_map(&labels, lambda, kind) {
                    Ok(map) => {
                        write_distance_map(out_dir, id, &map, lambda)?;
                        Ok(ImageReport::new(id, ImageStatus::Ok, None))
                    }
                    Err(e @ (CoreError::NoForeground | CoreError::NoForegroundScribble)) => {
                        Ok(ImageReport::new(id, ImageStatus::Skipped, Some(e.to_string())))
                    }
                    Err(e) => Ok(ImageReport::new(id, ImageStatus::Error, Some(e.to_string()))),
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let echo = serde_json::json!({ "lambda": lambda, "kind": kind });
    Ok(RunReport::assemble("distmap", None, echo, started, images))
}
