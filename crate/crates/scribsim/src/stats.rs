//! Mask-ratio versus scribble-ratio statistics.
//!
//! For every foreground instance, `x` is the mask area as a percentage of the
//! image and `y` the percentage of the mask covered by scribble pixels of the
//! instance's class. Background (class 0) instances are not measured.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::png_io::read_label_mask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub x_bins: usize,
    pub x_max: f64,
    pub y_bins: usize,
    pub y_max: f64,
}

impl Default for Bins {
    fn default() -> Self {
        Self { x_bins: 10, x_max: 100.0, y_bins: 10, y_max: 20.0 }
    }
}

impl Bins {
    pub fn square(n: usize) -> Self {
        Self { x_bins: n, y_bins: n, ..Self::default() }
    }
}

fn edges(n: usize, max: f64) -> Vec<f64> {
    (0..=n).map(|i| max * i as f64 / n as f64).collect()
}

/// Values at or beyond the last edge land in the last bin.
fn bin_of(v: f64, n: usize, max: f64) -> usize {
    ((v / max * n as f64).floor().max(0.0) as usize).min(n - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsHeatmap {
    /// Mask-ratio bin edges, percent of the image.
    pub x_edges: Vec<f64>,
    /// Scribble-ratio bin edges, percent of the mask.
    pub y_edges: Vec<f64>,
    /// `counts[y][x]`.
    pub counts: Vec<Vec<u64>>,
}

impl StatsHeatmap {
    pub fn new(bins: Bins) -> Result<Self> {
        if bins.x_bins == 0 || bins.y_bins == 0 || !(bins.x_max.is_finite() && bins.x_max > 0.0 && bins.y_max.is_finite() && bins.y_max > 0.0) {
            return Err(Error::Config("bins need a positive count and range".into()));
        }
        Ok(Self {
            x_edges: edges(bins.x_bins, bins.x_max),
            y_edges: edges(bins.y_bins, bins.y_max),
            counts: vec![vec![0; bins.x_bins]; bins.y_bins],
        })
    }

    pub fn add(&mut self, x_pct: f64, y_pct: f64) {
        let nx = self.x_edges.len() - 1;
        let ny = self.y_edges.len() - 1;
        let xi = bin_of(x_pct, nx, self.x_edges[nx]);
        let yi = bin_of(y_pct, ny, self.y_edges[ny]);
        self.counts[yi][xi] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Two header rows of bin edges, then one row per scribble-ratio bin
    /// (labelled by its lower edge) with a count per mask-ratio bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let join = |v: &[f64]| v.iter().map(|e| format!("{e}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "mask_ratio_edges_pct,{}", join(&self.x_edges));
        let _ = writeln!(out, "scribble_ratio_edges_pct,{}", join(&self.y_edges));
        for (row, lo) in self.counts.iter().zip(&self.y_edges) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{lo},{}", cells.join(","));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeasurement {
    pub image_id: String,
    pub instance: usize,
    pub class_id: u8,
    pub mask_ratio_pct: f64,
    pub scribble_ratio_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub heatmap: StatsHeatmap,
    pub measurements: Vec<InstanceMeasurement>,
    /// `(image_id, reason)` for images that could not be measured.
    pub problems: Vec<(String, String)>,
}

/// Measures every foreground instance of `manifest` against the scribble
/// masks `<scribble_dir>/<image_id>.png`.
pub fn compute_stats(manifest: &DatasetManifest, scribble_dir: &Path, bins: Bins) -> Result<StatsReport> {
    let mut heatmap = StatsHeatmap::new(bins)?;
    let mut measurements = Vec::new();
    let mut problems = Vec::new();
    for entry in &manifest.entries {
        let id = &entry.image_id;
        let path = scribble_dir.join(format!("{id}.png"));
        if !path.is_file() {
            problems.push((id.clone(), Error::MissingScribble(id.clone()).to_string()));
            continue;
        }
        let scribble = match read_label_mask(&path) {
            Ok(s) if s.dims() == (entry.width, entry.height) => s,
            Ok(s) => {
                let (w, h) = s.dims();
                problems.push((id.clone(), format!("scribble is {w}x{h}, manifest declares {}x{}", entry.width, entry.height)));
                continue;
            }
            Err(e) => {
                problems.push((id.clone(), e.to_string()));
                continue;
            }
        };
        let instances = match manifest.load_instances(entry) {
            Ok(v) => v,
            Err(e) => {
                problems.push((id.clone(), e.to_string()));
                continue;
            }
        };
        let image_area = (entry.width * entry.height) as f64;
        for (index, inst) in instances.iter().enumerate() {
            let area = inst.mask.count();
            if inst.is_background() || area == 0 {
                continue;
            }
            let covered = inst.mask.iter_set().filter(|&(x, y)| scribble.get(x, y) == inst.class_id).count();
            let m = InstanceMeasurement {
                image_id: id.clone(),
                instance: index,
                class_id: inst.class_id,
                mask_ratio_pct: 100.0 * area as f64 / image_area,
                scribble_ratio_pct: 100.0 * covered as f64 / area as f64,
            };
            heatmap.add(m.mask_ratio_pct, m.scribble_ratio_pct);
            measurements.push(m);
        }
    }
    Ok(StatsReport { heatmap, measurements, problems })
}

/// Mean `(mask ratio, scribble ratio)` of each of `groups` equal-count groups
/// of measurements ordered by mask ratio.
pub fn quantile_means(measurements: &[InstanceMeasurement], groups: usize) -> Vec<(f64, f64)> {
    let mut sorted: Vec<&InstanceMeasurement> = measurements.iter().collect();
    sorted.sort_by(|a, b| a.mask_ratio_pct.total_cmp(&b.mask_ratio_pct));
    let n = sorted.len();
    (0..groups)
        .filter_map(|g| {
            let part = &sorted[g * n / groups..(g + 1) * n / groups];
            if part.is_empty() {
                return None;
            }
            let k = part.len() as f64;
            Some((
                part.iter().map(|m| m.mask_ratio_pct).sum::<f64>() / k,
                part.iter().map(|m| m.scribble_ratio_pct).sum::<f64>() / k,
            ))
        })
        .collect()
}
