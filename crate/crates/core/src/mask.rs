//! Binary masks and the geometric measurements the simulator needs:
//! square erosion, 8-connected components, Moore boundary tracing with
//! chain-code reduction, centroids and area ratios.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Sub-pixel point; `x` grows to the right, `y` grows downwards.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointF {
    pub x: f64,
    pub y: f64,
}

impl PointF {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: PointF) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(usize, usize)> for PointF {
    fn from((x, y): (usize, usize)) -> Self {
        PointF::new(x as f64, y as f64)
    }
}

/// Ordered point list (contours, polylines, skeleton paths).
pub type PointSequence = Vec<PointF>;

/// Eight neighbour offsets, clockwise on screen starting from west.
pub(crate) const NEIGHBOURS_8: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

pub(crate) const NEIGHBOURS_4: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

/// Row-major occupancy grid.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl core::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        writeln!(f, "BinaryMask {}x{}", self.width, self.height)?;
        for y in 0..self.height {
            for x in 0..self.width {
                f.write_str(if self.get(x, y) { "#" } else { "." })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl BinaryMask {
    /// All-unset mask. Panics on a zero dimension.
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be positive");
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn full(width: usize, height: usize) -> Self {
        let mut m = Self::new(width, height);
        m.bits.fill(true);
        m
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::InvalidDimensions { width, height, len: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = f(x, y);
            }
        }
        m
    }

    /// Parses rows of `#` (set) and anything else (unset). Handy in tests.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        Self::from_fn(width, height, |x, y| rows[y].as_bytes().get(x) == Some(&b'#'))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`get`](Self::get) but treats out-of-canvas coordinates as unset.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// Coordinates of set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn union_with(&mut self, other: &BinaryMask) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &BinaryMask) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= b;
        }
    }

    /// Number of set 8-neighbours of `(x, y)`.
    pub fn neighbour_count(&self, x: usize, y: usize) -> usize {
        NEIGHBOURS_8
            .iter()
            .filter(|(dx, dy)| self.get_signed(x as isize + dx, y as isize + dy))
            .count()
    }

    /// Keeps only the rows in `rows`; everything else is cleared.
    pub fn restrict_rows(&self, rows: core::ops::Range<usize>) -> BinaryMask {
        let mut out = self.clone();
        for y in 0..self.height {
            if !rows.contains(&y) {
                out.bits[y * self.width..(y + 1) * self.width].fill(false);
            }
        }
        out
    }
}

/// Erodes with a square element of side `2*ceil(k/2)+1`. Pixels outside the
/// canvas count as unset, so shapes touching the border shrink from it too.
pub fn erode(mask: &BinaryMask, k: usize) -> BinaryMask {
    let radius = k.div_ceil(2);
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let horizontal = erode_1d(&mask.bits, w, h, radius, true);
    let bits = erode_1d(&horizontal, w, h, radius, false);
    BinaryMask { width: w, height: h, bits }
}

/// 1-D erosion along rows (`along_x`) or columns via prefix counts.
fn erode_1d(bits: &[bool], w: usize, h: usize, radius: usize, along_x: bool) -> Vec<bool> {
    let (lines, len) = if along_x { (h, w) } else { (w, h) };
    let index = |line: usize, pos: usize| if along_x { line * w + pos } else { pos * w + line };
    let mut out = vec![false; w * h];
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for pos in 0..len {
            prefix[pos + 1] = prefix[pos] + usize::from(bits[index(line, pos)]);
        }
        for pos in 0..len {
            if pos < radius || pos + radius >= len {
                continue;
            }
            let lo = pos - radius;
            let hi = pos + radius + 1;
            out[index(line, pos)] = prefix[hi] - prefix[lo] == hi - lo;
        }
    }
    out
}

/// Labels 8-connected components. Returns the per-pixel label (0 = unset,
/// otherwise 1-based in discovery order) and each component's pixel list.
pub(crate) fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<Vec<usize>>) {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        let label = comps.len() as u32 + 1;
        let mut pixels = Vec::new();
        labels[start] = label;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            pixels.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBOURS_8 {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == 0 {
                        labels[j] = label;
                        queue.push_back(j);
                    }
                }
            }
        }
        comps.push(pixels);
    }
    (labels, comps)
}

/// 8-connected components as full-canvas masks, largest first; equal areas
/// are ordered by their topmost-leftmost pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<BinaryMask> {
    let (w, h) = mask.dims();
    let (_, mut comps) = label_components(mask);
    // Discovery order is already row-major by first pixel, so a stable sort
    // on area keeps the tie-break.
    comps.sort_by_key(|c| core::cmp::Reverse(c.len()));
    comps
        .into_iter()
        .map(|pixels| {
            let mut m = BinaryMask::new(w, h);
            for i in pixels {
                m.bits[i] = true;
            }
            m
        })
        .collect()
}

/// Arithmetic mean of the set-pixel coordinates.
pub fn centroid(mask: &BinaryMask) -> Result<PointF> {
    let (mut sx, mut sy, mut n) = (0.0f64, 0.0f64, 0usize);
    for (x, y) in mask.iter_set() {
        sx += x as f64;
        sy += y as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(PointF::new(sx / n as f64, sy / n as f64))
}

/// Fraction of the canvas covered by the mask; must be strictly inside (0, 1).
pub fn area_ratio(mask: &BinaryMask) -> Result<f64> {
    let n = mask.count();
    let total = mask.width * mask.height;
    if n == 0 || n == total {
        return Err(Error::DegenerateRatio);
    }
    Ok(n as f64 / total as f64)
}

/// Outer contour of the largest component, reduced to the pixels where the
/// chain-code direction changes. Tracing is clockwise on screen and starts
/// at the topmost-then-leftmost pixel.
pub fn extract_boundary(mask: &BinaryMask) -> Result<PointSequence> {
    let contour = trace_outer_contour(mask)?;
    Ok(inflection_points(&contour)
        .into_iter()
        .map(PointF::from)
        .collect())
}

/// Moore-neighbour trace of the largest component's outer contour.
pub fn trace_outer_contour(mask: &BinaryMask) -> Result<Vec<(usize, usize)>> {
    let (w, _) = mask.dims();
    let (labels, comps) = label_components(mask);
    let largest = comps
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
        .map(|(i, _)| i as u32 + 1)
        .ok_or(Error::EmptyMask)?;
    let inside = |x: isize, y: isize| {
        mask.get_signed(x, y) && labels[y as usize * w + x as usize] == largest
    };
    // Pixel lists are BFS-ordered; the row-major minimum is the start.
    let start_idx = *comps[largest as usize - 1].iter().min().expect("non-empty component");
    let start = ((start_idx % w) as isize, (start_idx / w) as isize);

    let mut contour = vec![(start.0 as usize, start.1 as usize)];
    let mut current = start;
    // The west neighbour of the start is known to be outside.
    let mut backtrack = 0usize;
    let limit = 4 * comps[largest as usize - 1].len() + 8;
    let mut second: Option<(isize, isize)> = None;
    for _ in 0..limit {
        let mut next = None;
        for i in 1..=8 {
            let d = (backtrack + i) % 8;
            let (dx, dy) = NEIGHBOURS_8[d];
            let cand = (current.0 + dx, current.1 + dy);
            if inside(cand.0, cand.1) {
                let (px, py) = NEIGHBOURS_8[(d + 7) % 8];
                let prev = (current.0 + px, current.1 + py);
                next = Some((cand, direction_index(prev.0 - cand.0, prev.1 - cand.1)));
                break;
            }
        }
        let Some((cand, new_backtrack)) = next else {
            // Isolated pixel.
            break;
        };
        if current == start {
            match second {
                None => second = Some(cand),
                Some(s) if s == cand => break,
                Some(_) => {}
            }
        }
        contour.push((cand.0 as usize, cand.1 as usize));
        current = cand;
        backtrack = new_backtrack;
    }
    // The loop pushes the start pixel once more right before closing.
    if contour.len() > 1 && contour.last() == contour.first() {
        contour.pop();
    }
    Ok(contour)
}

fn direction_index(dx: isize, dy: isize) -> usize {
    NEIGHBOURS_8
        .iter()
        .position(|&d| d == (dx, dy))
        .expect("offset must be a unit 8-neighbour step")
}

/// Pixels of a closed contour at which the step direction changes.
pub fn inflection_points(contour: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let n = contour.len();
    if n <= 1 {
        return contour.to_vec();
    }
    let step = |a: (usize, usize), b: (usize, usize)| {
        (b.0 as isize - a.0 as isize, b.1 as isize - a.1 as isize)
    };
    (0..n)
        .filter(|&i| {
            let prev = contour[(i + n - 1) % n];
            let next = contour[(i + 1) % n];
            step(prev, contour[i]) != step(contour[i], next)
        })
        .map(|i| contour[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_erode(mask: &BinaryMask, k: usize) -> BinaryMask {
        let r = k.div_ceil(2) as isize;
        BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
            (-r..=r).all(|dy| {
                (-r..=r).all(|dx| mask.get_signed(x as isize + dx, y as isize + dy))
            })
        })
    }

    #[test]
    fn erode_5x5_k2_keeps_centre_3x3() {
        let m = BinaryMask::full(5, 5);
        let e = erode(&m, 2);
        let expected = BinaryMask::from_fn(5, 5, |x, y| (1..=3).contains(&x) && (1..=3).contains(&y));
        assert_eq!(e, brute_erode(&m, 2));
        assert_eq!(e, expected);
    }

    #[test]
    fn erode_k0_is_identity() {
        let m = BinaryMask::from_ascii(&["#.#", ".##", "###"]);
        assert_eq!(erode(&m, 0), m);
    }

    #[test]
    fn erode_large_kernel_empties_small_mask() {
        let m = BinaryMask::full(3, 3);
        assert!(erode(&m, 20).is_empty());
        assert_eq!(brute_erode(&m, 20), erode(&m, 20));
    }

    #[test]
    fn erode_odd_k_rounds_radius_up() {
        // k = 1 gives a 3x3 element, same as k = 2.
        let m = BinaryMask::full(6, 4);
        assert_eq!(erode(&m, 1), erode(&m, 2));
    }

    #[test]
    fn centroid_examples() {
        let mut m = BinaryMask::new(10, 10);
        m.set(3, 7, true);
        assert_eq!(centroid(&m).unwrap(), PointF::new(3.0, 7.0));
        let sq = BinaryMask::from_fn(10, 10, |x, y| x < 3 && y < 3);
        assert_eq!(centroid(&sq).unwrap(), PointF::new(1.0, 1.0));
        let mut two = BinaryMask::new(5, 1);
        two.set(0, 0, true);
        two.set(4, 0, true);
        assert_eq!(centroid(&two).unwrap(), PointF::new(2.0, 0.0));
        assert_eq!(centroid(&BinaryMask::new(2, 2)), Err(Error::EmptyMask));
    }

    #[test]
    fn components_connectivity() {
        assert!(connected_components(&BinaryMask::new(4, 4)).is_empty());
        let diag = BinaryMask::from_ascii(&["#.", ".#"]);
        assert_eq!(connected_components(&diag).len(), 1);
        let gap = BinaryMask::from_ascii(&["#.#"]);
        let comps = connected_components(&gap);
        assert_eq!(comps.len(), 2);
        assert!(comps[0].get(0, 0));
        assert!(comps[1].get(2, 0));
    }

    #[test]
    fn components_sorted_by_area_desc() {
        let m = BinaryMask::from_ascii(&["#...##", "....##"]);
        let comps = connected_components(&m);
        assert_eq!(comps.iter().map(BinaryMask::count).collect::<Vec<_>>(), vec![4, 1]);
    }

    #[test]
    fn area_ratio_examples() {
        let mut m = BinaryMask::new(10, 10);
        m.set(0, 0, true);
        assert!((area_ratio(&m).unwrap() - 0.01).abs() < 1e-15);
        let half = BinaryMask::from_fn(10, 10, |_, y| y < 5);
        assert!((area_ratio(&half).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(area_ratio(&BinaryMask::full(10, 10)), Err(Error::DegenerateRatio));
        assert_eq!(area_ratio(&BinaryMask::new(10, 10)), Err(Error::DegenerateRatio));
    }

    #[test]
    fn boundary_single_pixel() {
        let mut m = BinaryMask::new(3, 3);
        m.set(1, 1, true);
        assert_eq!(extract_boundary(&m).unwrap(), vec![PointF::new(1.0, 1.0)]);
    }

    #[test]
    fn boundary_rectangle_has_four_corners() {
        let m = BinaryMask::from_fn(10, 10, |x, y| (2..6).contains(&x) && (1..7).contains(&y));
        let pts = extract_boundary(&m).unwrap();
        let expected: Vec<PointF> = [(2, 1), (5, 1), (5, 6), (2, 6)]
            .into_iter()
            .map(PointF::from)
            .collect();
        assert_eq!(pts, expected);
    }

    #[test]
    fn boundary_of_thin_l_tromino_traces_both_sides() {
        // Hand-traced: (0,0) SE (1,1) W (0,1) N back to the start.
        let m = BinaryMask::from_ascii(&["#.", "##"]);
        assert_eq!(trace_outer_contour(&m).unwrap(), vec![(0, 0), (1, 1), (0, 1)]);
        assert_eq!(extract_boundary(&m).unwrap().len(), 3);
    }

    #[test]
    fn boundary_of_l_hexomino() {
        // Hand trace: S, S, SE, E, W, W, N, N, N; direction changes at
        // (0,0), (0,2), (1,3), (2,3) and (0,3).
        let m = BinaryMask::from_ascii(&["#..", "#..", "#..", "###"]);
        assert_eq!(
            trace_outer_contour(&m).unwrap(),
            vec![(0, 0), (0, 1), (0, 2), (1, 3), (2, 3), (1, 3), (0, 3), (0, 2), (0, 1)]
        );
        let expected: Vec<PointF> = [(0, 0), (0, 2), (1, 3), (2, 3), (0, 3)]
            .into_iter()
            .map(PointF::from)
            .collect();
        assert_eq!(extract_boundary(&m).unwrap(), expected);
    }

    #[test]
    fn boundary_empty_mask_errors() {
        assert_eq!(extract_boundary(&BinaryMask::new(4, 4)), Err(Error::EmptyMask));
    }

    #[test]
    fn boundary_uses_largest_component() {
        let m = BinaryMask::from_ascii(&["#....", "...##", "...##"]);
        let pts = extract_boundary(&m).unwrap();
        assert_eq!(pts[0], PointF::new(3.0, 1.0));
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn restrict_rows_clears_outside() {
        let m = BinaryMask::full(3, 4).restrict_rows(1..3);
        assert_eq!(m.count(), 6);
        assert!(!m.get(0, 0) && !m.get(0, 3));
    }
}
