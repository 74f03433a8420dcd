//! Scribble synthesis: per-component style decision, boundary-style jittered
//! contours, line-style skeleton paths, Bézier smoothing, rasterisation and
//! per-image integration into one label mask.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{random_depth_search, SkeletonPath};
use crate::label::{LabelMask, BACKGROUND, IGNORE};
use crate::mask::{centroid, connected_components, erode, extract_boundary, BinaryMask, PointF, PointSequence};
use crate::rng::{instance_seed, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ScribbleStyle {
    /// Centre-line stroke along a skeleton path.
    Line,
    /// Jittered stroke following the eroded contour.
    Boundary,
}

/// Knobs of the simulator. Every field has a default, so a partial JSON
/// object is a valid override.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SimulationConfig {
    /// Erosion size `k` in pixels; also the jitter half-range.
    pub erosion_k: usize,
    /// Slope of the boundary-style probability in the area ratio.
    pub style_gain: f64,
    /// Upper bound of the boundary-style probability.
    pub style_cap: f64,
    pub stroke_width: usize,
    pub bezier_samples_per_segment: usize,
    /// Components smaller than this are not scribbled.
    pub min_component_area: usize,
    /// Scribble the top and bottom halves of the background separately.
    pub background_horizontal_split: bool,
    pub global_seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            erosion_k: 20,
            style_gain: 3.0,
            style_cap: 0.9,
            stroke_width: 3,
            bezier_samples_per_segment: 16,
            min_component_area: 100,
            background_horizontal_split: false,
            global_seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.style_cap > 0.0 && self.style_cap <= 1.0) {
            return Err(Error::InvalidConfig("style_cap must be in (0, 1]"));
        }
        if !(self.style_gain.is_finite() && self.style_gain >= 0.0) {
            return Err(Error::InvalidConfig("style_gain must be finite and non-negative"));
        }
        if self.stroke_width < 1 {
            return Err(Error::InvalidConfig("stroke_width must be at least 1"));
        }
        if self.bezier_samples_per_segment < 2 {
            return Err(Error::InvalidConfig("bezier_samples_per_segment must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAnnotation {
    /// 0 is background.
    pub class_id: u8,
    pub mask: BinaryMask,
}

impl InstanceAnnotation {
    pub fn new(class_id: u8, mask: BinaryMask) -> Self {
        Self { class_id, mask }
    }

    pub fn is_background(&self) -> bool {
        self.class_id == BACKGROUND
    }
}

/// `min(gain * ratio, cap)`.
pub fn boundary_probability(area_ratio: f64, gain: f64, cap: f64) -> f64 {
    (gain * area_ratio).min(cap)
}

/// Boundary style with probability `min(gain * P, cap)`; one uniform draw.
pub fn decide_style(area_ratio: f64, config: &SimulationConfig, rng: &mut SplitMix64) -> ScribbleStyle {
    let p = boundary_probability(area_ratio, config.style_gain, config.style_cap);
    if rng.next_f64() < p {
        ScribbleStyle::Boundary
    } else {
        ScribbleStyle::Line
    }
}

/// Moves `point` by `delta` along the ray from `centre` through it. A point
/// on the centre has no direction and stays put.
pub fn displace_radial(point: PointF, centre: PointF, delta: f64) -> PointF {
    let (dx, dy) = (point.x - centre.x, point.y - centre.y);
    if dx == 0.0 && dy == 0.0 {
        return point;
    }
    let theta = libm::atan2(dy, dx);
    PointF::new(point.x + delta * libm::cos(theta), point.y + delta * libm::sin(theta))
}

/// Radial jitter: each point independently moves by `δ ~ U[-k, k]` along its
/// direction from `centre`. One draw per point, order preserved.
pub fn random_affine(points: &[PointF], centre: PointF, k: f64, rng: &mut SplitMix64) -> PointSequence {
    points
        .iter()
        .map(|&p| {
            let delta = rng.symmetric(k);
            displace_radial(p, centre, delta)
        })
        .collect()
}

#[inline]
fn lerp(a: PointF, b: PointF, t: f64) -> PointF {
    // (1-t)a + tb hits both ends exactly.
    PointF::new((1.0 - t) * a.x + t * b.x, (1.0 - t) * a.y + t * b.y)
}

/// De Casteljau evaluation of one cubic segment.
pub fn cubic_point(ctrl: [PointF; 4], t: f64) -> PointF {
    let [a, b, c, d] = ctrl;
    let (ab, bc, cd) = (lerp(a, b, t), lerp(b, c, t), lerp(c, d, t));
    let (abc, bcd) = (lerp(ab, bc, t), lerp(bc, cd, t));
    lerp(abc, bcd, t)
}

/// Piecewise cubic Bézier through windows of four control points that share
/// their end points (`p0..p3`, `p3..p6`, ...); the last window is padded by
/// repeating the final point. Each segment is sampled at
/// `samples_per_segment` uniform parameters including both ends.
pub fn bezier_smooth(points: &[PointF], samples_per_segment: usize) -> Result<PointSequence> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints);
    }
    let samples = samples_per_segment.max(2);
    let last = points.len() - 1;
    let mut out = Vec::new();
    let mut start = 0;
    while start < last {
        let ctrl = core::array::from_fn(|j| points[(start + j).min(last)]);
        let first_sample = if start == 0 { 0 } else { 1 };
        for s in first_sample..samples {
            let t = s as f64 / (samples - 1) as f64;
            out.push(cubic_point(ctrl, t));
        }
        start += 3;
    }
    Ok(out)
}

/// Integer pixels visited by Bresenham lines between consecutive rounded
/// points. May lie outside any canvas.
pub fn centerline(polyline: &[PointF]) -> Vec<(i64, i64)> {
    let rounded: Vec<(i64, i64)> = polyline
        .iter()
        .map(|p| (libm::round(p.x) as i64, libm::round(p.y) as i64))
        .collect();
    let mut out = Vec::new();
    match rounded.as_slice() {
        [] => {}
        [only] => out.push(*only),
        _ => {
            for (i, w) in rounded.windows(2).enumerate() {
                bresenham(w[0], w[1], i > 0, &mut out);
            }
        }
    }
    out
}

fn bresenham(a: (i64, i64), b: (i64, i64), skip_first: bool, out: &mut Vec<(i64, i64)>) {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut first = true;
    loop {
        if !(first && skip_first) {
            out.push((x, y));
        }
        first = false;
        if (x, y) == b {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Offsets of a disk brush of the given diameter.
pub fn brush_offsets(diameter: usize) -> Vec<(i64, i64)> {
    let r = diameter as f64 / 2.0;
    let reach = libm::floor(r) as i64;
    let mut out = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if ((dx * dx + dy * dy) as f64) <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Draws the polyline with a disk brush and keeps only pixels inside `clip`
/// (whose canvas is also the output canvas).
pub fn rasterize(polyline: &[PointF], stroke_width: usize, clip: &BinaryMask) -> BinaryMask {
    let (w, h) = clip.dims();
    let mut out = BinaryMask::new(w, h);
    let brush = brush_offsets(stroke_width.max(1));
    for (cx, cy) in centerline(polyline) {
        for &(dx, dy) in &brush {
            let (x, y) = (cx + dx, cy + dy);
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && clip.get(x as usize, y as usize) {
                out.set(x as usize, y as usize, true);
            }
        }
    }
    out
}

/// What was drawn for one connected component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTrace {
    pub style: ScribbleStyle,
    /// Erosion actually applied (boundary style only; shrinks when `k`
    /// would erase the component).
    pub effective_k: usize,
    /// Skeleton path picked by the depth search (line style only).
    pub skeleton_path: Option<SkeletonPath>,
    /// Polyline handed to the rasteriser.
    pub polyline: PointSequence,
    pub scribble: BinaryMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceScribble {
    pub mask: BinaryMask,
    pub components: Vec<ComponentTrace>,
}

/// Scribble for one instance: the union of one stroke per connected component
/// at least `min_component_area` pixels large.
pub fn simulate_instance(inst: &InstanceAnnotation, config: &SimulationConfig, rng: &mut SplitMix64) -> Result<BinaryMask> {
    simulate_instance_traced(inst, config, rng).map(|s| s.mask)
}

pub fn simulate_instance_traced(
    inst: &InstanceAnnotation,
    config: &SimulationConfig,
    rng: &mut SplitMix64,
) -> Result<InstanceScribble> {
    let (w, h) = inst.mask.dims();
    let total = (w * h) as f64;
    let mut mask = BinaryMask::new(w, h);
    let mut components = Vec::new();
    for component in connected_components(&inst.mask) {
        let area = component.count();
        if area < config.min_component_area.max(1) {
            // Sorted by area, nothing further qualifies.
            break;
        }
        let style = if inst.is_background() {
            ScribbleStyle::Line
        } else {
            decide_style(area as f64 / total, config, rng)
        };
        let trace = match style {
            ScribbleStyle::Boundary => boundary_scribble(&component, config, rng)?,
            ScribbleStyle::Line => line_scribble(&component, !inst.is_background(), config, rng)?,
        };
        mask.union_with(&trace.scribble);
        components.push(trace);
    }
    if components.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(InstanceScribble { mask, components })
}

fn boundary_scribble(component: &BinaryMask, config: &SimulationConfig, rng: &mut SplitMix64) -> Result<ComponentTrace> {
    let mut k = config.erosion_k;
    let mut eroded = erode(component, k);
    while eroded.is_empty() {
        k /= 2;
        eroded = erode(component, k);
    }
    let contour = extract_boundary(&eroded)?;
    let centre = centroid(&eroded)?;
    let mut jittered = random_affine(&contour, centre, k as f64, rng);
    if jittered.len() >= 3 {
        jittered.push(jittered[0]);
    }
    let polyline = if jittered.len() >= 2 {
        bezier_smooth(&jittered, config.bezier_samples_per_segment)?
    } else {
        jittered
    };
    let scribble = rasterize(&polyline, config.stroke_width, component);
    Ok(ComponentTrace { style: ScribbleStyle::Boundary, effective_k: k, skeleton_path: None, polyline, scribble })
}

fn line_scribble(
    component: &BinaryMask,
    smooth: bool,
    config: &SimulationConfig,
    rng: &mut SplitMix64,
) -> Result<ComponentTrace> {
    let path = random_depth_search(component, rng)?;
    let points = path.to_points();
    let polyline = if smooth && points.len() >= 2 {
        bezier_smooth(&points, config.bezier_samples_per_segment)?
    } else {
        points
    };
    let scribble = rasterize(&polyline, config.stroke_width, component);
    Ok(ComponentTrace { style: ScribbleStyle::Line, effective_k: 0, skeleton_path: Some(path), polyline, scribble })
}

/// Per-instance record of an image simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutcome {
    /// Position in the input list.
    pub index: usize,
    pub class_id: u8,
    /// One entry per scribbled component; empty when the instance was skipped.
    pub styles: Vec<ScribbleStyle>,
    pub scribble_pixels: usize,
}

impl InstanceOutcome {
    pub fn skipped(&self) -> bool {
        self.styles.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScribbles {
    pub label: LabelMask,
    pub instances: Vec<InstanceOutcome>,
}

/// Simulates every instance of an image and merges the strokes into one label
/// mask (255 elsewhere).
pub fn simulate_image(
    width: usize,
    height: usize,
    instances: &[InstanceAnnotation],
    config: &SimulationConfig,
    image_seed: u64,
) -> Result<LabelMask> {
    simulate_image_traced(width, height, instances, config, image_seed).map(|s| s.label)
}

/// Like [`simulate_image`], also reporting per-instance outcomes.
///
/// Foreground instances are drawn in input order, background instances last;
/// later strokes overwrite earlier ones. Instance `i` draws from its own
/// generator seeded with `instance_seed(global_seed, image_seed, i)`.
pub fn simulate_image_traced(
    width: usize,
    height: usize,
    instances: &[InstanceAnnotation],
    config: &SimulationConfig,
    image_seed: u64,
) -> Result<ImageScribbles> {
    config.validate()?;
    for inst in instances {
        if inst.mask.dims() != (width, height) {
            return Err(Error::DimensionMismatch { expected: (width, height), found: inst.mask.dims() });
        }
        if inst.class_id == IGNORE {
            return Err(Error::InvalidClass(u32::from(inst.class_id)));
        }
    }
    let mut label = LabelMask::unlabeled(width, height);
    let order = (0..instances.len())
        .filter(|&i| !instances[i].is_background())
        .chain((0..instances.len()).filter(|&i| instances[i].is_background()));
    let mut outcomes = vec![None; instances.len()];
    for i in order {
        let inst = &instances[i];
        let mut rng = SplitMix64::new(instance_seed(config.global_seed, image_seed, i as u64));
        let parts: Vec<InstanceAnnotation> = if inst.is_background() && config.background_horizontal_split {
            let mid = height / 2;
            vec![
                InstanceAnnotation::new(inst.class_id, inst.mask.restrict_rows(0..mid)),
                InstanceAnnotation::new(inst.class_id, inst.mask.restrict_rows(mid..height)),
            ]
        } else {
            vec![inst.clone()]
        };
        let mut styles = Vec::new();
        let mut scribble_pixels = 0;
        for part in &parts {
            match simulate_instance_traced(part, config, &mut rng) {
                Ok(s) => {
                    label.paint(&s.mask, inst.class_id);
                    scribble_pixels += s.mask.count();
                    styles.extend(s.components.iter().map(|c| c.style));
                }
                Err(Error::EmptyMask) => {}
                Err(e) => return Err(e),
            }
        }
        outcomes[i] = Some(InstanceOutcome { index: i, class_id: inst.class_id, styles, scribble_pixels });
    }
    Ok(ImageScribbles { label, instances: outcomes.into_iter().map(|o| o.expect("every instance visited")).collect() })
}
