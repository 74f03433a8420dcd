//! Distance-perception maps.
//!
//! Both maps store an 8-bit raw value per pixel,
//! `t = min(floor(sqrt(e^λ · d²)), 255)`, where `d` is the Euclidean distance
//! to the nearest source pixel. Scribble maps decode to `1 - t/255` (1 on the
//! scribble), pseudo-boundary maps to `t/255` (0 on the boundary).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::label::{is_foreground, LabelMask};
use crate::mask::{BinaryMask, NEIGHBOURS_4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DistanceKind {
    /// Distance from foreground scribble pixels.
    #[cfg_attr(feature = "serde", serde(rename = "scribble"))]
    Scribble,
    /// Distance from the pseudo-label foreground boundary.
    #[cfg_attr(feature = "serde", serde(rename = "pseudo"))]
    PseudoBoundary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMap {
    width: usize,
    height: usize,
    raw: Vec<u8>,
    kind: DistanceKind,
}

impl DistanceMap {
    pub fn from_raw(width: usize, height: usize, raw: Vec<u8>, kind: DistanceKind) -> Result<Self> {
        if width == 0 || height == 0 || raw.len() != width * height {
            return Err(Error::InvalidDimensions { width, height, len: raw.len() });
        }
        Ok(Self { width, height, raw, kind })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn raw(&self) -> &[u8] {
        &self.raw
    }

    /// Decoded confidence of pixel `i` (row-major), in `[0, 1]`.
    pub fn value_at(&self, i: usize) -> f64 {
        decode(self.raw[i], self.kind)
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.value_at(y * self.width + x)
    }

    pub fn decoded(&self) -> Vec<f64> {
        self.raw.iter().map(|&t| decode(t, self.kind)).collect()
    }

    /// Pixels whose raw value hit the 255 ceiling.
    pub fn saturated_count(&self) -> usize {
        self.raw.iter().filter(|&&t| t == 255).count()
    }
}

#[inline]
pub fn decode(raw: u8, kind: DistanceKind) -> f64 {
    let t = f64::from(raw) / 255.0;
    match kind {
        DistanceKind::Scribble => 1.0 - t,
        DistanceKind::PseudoBoundary => t,
    }
}

/// Value standing in for "no source in reach" in the 1-D passes.
const FAR: f64 = f64::INFINITY;

/// Exact squared Euclidean distance to the nearest set pixel of `sources`.
///
/// Two separable passes of the lower-envelope-of-parabolas transform. All
/// outputs are exact integers stored as `f64`.
pub fn squared_distance_field(sources: &BinaryMask) -> Result<Vec<f64>> {
    if sources.is_empty() {
        return Err(Error::NoSources);
    }
    let (w, h) = sources.dims();
    let mut field: Vec<f64> = sources.bits().iter().map(|&b| if b { 0.0 } else { FAR }).collect();
    let n = w.max(h);
    let mut scratch = Envelope::new(n);
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    for x in 0..w {
        for y in 0..h {
            line[y] = field[y * w + x];
        }
        scratch.transform(&line[..h], &mut out[..h]);
        for y in 0..h {
            field[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        line[..w].copy_from_slice(&field[y * w..(y + 1) * w]);
        scratch.transform(&line[..w], &mut out[..w]);
        field[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    Ok(field)
}

struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self { v: vec![0; n], z: vec![0.0; n + 1] }
    }

    /// `out[q] = min_p (q - p)² + f[p]` over finite `f[p]`.
    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        let mut k: isize = -1;
        for q in 0..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + (q * q) as f64;
            loop {
                if k < 0 {
                    k = 0;
                    self.v[0] = q;
                    self.z[0] = f64::NEG_INFINITY;
                    self.z[1] = f64::INFINITY;
                    break;
                }
                let p = self.v[k as usize];
                let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
                if s <= self.z[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                self.v[k as usize] = q;
                self.z[k as usize] = s;
                self.z[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            out.fill(FAR);
            return;
        }
        let mut j = 0usize;
        for (q, o) in out.iter_mut().enumerate() {
            while self.z[j + 1] < q as f64 {
                j += 1;
            }
            let p = self.v[j];
            let d = q as f64 - p as f64;
            *o = d * d + f[p];
        }
    }
}

/// Exact Euclidean distance from every pixel of a `width x height` grid to the
/// nearest of `sources`.
pub fn euclidean_distance_field(sources: &[(usize, usize)], width: usize, height: usize) -> Result<Vec<f64>> {
    let mut mask = BinaryMask::new(width, height);
    for &(x, y) in sources {
        mask.set(x, y, true);
    }
    Ok(squared_distance_field(&mask)?.into_iter().map(libm::sqrt).collect())
}

/// `min(floor(sqrt(scale · d²)), 255)` with `scale = e^λ`.
#[inline]
pub fn truncated_distance(squared: f64, scale: f64) -> u8 {
    let v = libm::floor(libm::sqrt(scale * squared));
    if v >= 255.0 {
        255
    } else {
        v as u8
    }
}

fn raw_field(sources: &BinaryMask, lambda: f64) -> Result<Vec<u8>> {
    let scale = libm::exp(lambda);
    Ok(squared_distance_field(sources)?
        .into_iter()
        .map(|d2| truncated_distance(d2, scale))
        .collect())
}

/// Which pixels of a label mask act as distance sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceScope {
    /// All foreground classes pooled.
    Pooled,
    /// Only pixels of one class.
    Class(u8),
}

/// Foreground pixels with at least one in-canvas 4-neighbour outside the
/// selected region.
pub fn boundary_sources(pseudo: &LabelMask, scope: SourceScope) -> BinaryMask {
    let (w, h) = pseudo.dims();
    let inside = |v: u8| match scope {
        SourceScope::Pooled => is_foreground(v),
        SourceScope::Class(c) => v == c,
    };
    BinaryMask::from_fn(w, h, |x, y| {
        inside(pseudo.get(x, y))
            && NEIGHBOURS_4.iter().any(|&(dx, dy)| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                nx >= 0
                    && ny >= 0
                    && (nx as usize) < w
                    && (ny as usize) < h
                    && !inside(pseudo.get(nx as usize, ny as usize))
            })
    })
}

pub fn scribble_sources(scribble: &LabelMask, scope: SourceScope) -> BinaryMask {
    match scope {
        SourceScope::Pooled => scribble.foreground(),
        SourceScope::Class(c) => scribble.select(|v| v == c && is_foreground(v)),
    }
}

/// Distance map from the pseudo-label foreground boundary (`d_c`).
pub fn pseudo_boundary_distance_map(pseudo: &LabelMask, lambda: f64) -> Result<DistanceMap> {
    pseudo_boundary_distance_map_scoped(pseudo, lambda, SourceScope::Pooled)
}

pub fn pseudo_boundary_distance_map_scoped(pseudo: &LabelMask, lambda: f64, scope: SourceScope) -> Result<DistanceMap> {
    let sources = boundary_sources(pseudo, scope);
    if sources.is_empty() {
        return Err(Error::NoForeground);
    }
    let raw = raw_field(&sources, lambda)?;
    DistanceMap::from_raw(pseudo.width(), pseudo.height(), raw, DistanceKind::PseudoBoundary)
}

/// Distance map from the foreground scribble pixels (`d_s`).
pub fn scribble_distance_map(scribble: &LabelMask, lambda: f64) -> Result<DistanceMap> {
    scribble_distance_map_scoped(scribble, lambda, SourceScope::Pooled)
}

pub fn scribble_distance_map_scoped(scribble: &LabelMask, lambda: f64, scope: SourceScope) -> Result<DistanceMap> {
    let sources = scribble_sources(scribble, scope);
    if sources.is_empty() {
        return Err(Error::NoForegroundScribble);
    }
    let raw = raw_field(&sources, lambda)?;
    DistanceMap::from_raw(scribble.width(), scribble.height(), raw, DistanceKind::Scribble)
}

/// Builds either kind of map from a label mask.
pub fn distance_map(labels: &LabelMask, lambda: f64, kind: DistanceKind) -> Result<DistanceMap> {
    match kind {
        DistanceKind::Scribble => scribble_distance_map(labels, lambda),
        DistanceKind::PseudoBoundary => pseudo_boundary_distance_map(labels, lambda),
    }
}
