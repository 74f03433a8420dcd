//! Zhang–Suen thinning.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mask::{label_components, BinaryMask};

// P2..P9 in Zhang–Suen order: N, NE, E, SE, S, SW, W, NW.
const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// One-pixel-wide 8-connected skeleton of `mask`.
///
/// Runs the two-subiteration Zhang–Suen thinning to a fixed point. Thinning
/// deletes some tiny components outright (a 2x2 block vanishes in one pass);
/// any component left without a skeleton pixel gets back its pixel closest to
/// the component centroid, so the component count never drops.
pub fn medial_axis(mask: &BinaryMask) -> Result<BinaryMask> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut skel = zhang_suen(mask);
    restore_lost_components(mask, &mut skel);
    Ok(skel)
}

fn ring_bits(m: &[bool], w: usize, h: usize, i: usize) -> [bool; 8] {
    let (x, y) = ((i % w) as isize, (i / w) as isize);
    let mut p = [false; 8];
    for (k, (dx, dy)) in RING.iter().enumerate() {
        let (nx, ny) = (x + dx, y + dy);
        p[k] = nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && m[ny as usize * w + nx as usize];
    }
    p
}

/// Deletion test for one pixel given its ring `P2..P9`.
pub(crate) fn deletable(p: &[bool; 8], first_pass: bool) -> bool {
    let b = p.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&k| !p[k] && p[(k + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = *p;
    if first_pass {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// Plain Zhang–Suen without the component guard. Only pixels with an unset
/// 8-neighbour are ever examined; interior pixels fail `B <= 6` anyway.
fn zhang_suen(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut bits = mask.bits().to_vec();
    let mut in_border = vec![false; w * h];
    let mut border: Vec<usize> = Vec::new();
    for i in 0..w * h {
        if bits[i] && ring_bits(&bits, w, h, i).iter().any(|&v| !v) {
            in_border[i] = true;
            border.push(i);
        }
    }
    let mut doomed = Vec::new();
    loop {
        let mut changed = false;
        for first_pass in [true, false] {
            doomed.clear();
            doomed.extend(
                border
                    .iter()
                    .copied()
                    .filter(|&i| deletable(&ring_bits(&bits, w, h, i), first_pass)),
            );
            if doomed.is_empty() {
                continue;
            }
            changed = true;
            for &i in &doomed {
                bits[i] = false;
                in_border[i] = false;
            }
            border.retain(|&i| bits[i]);
            for &i in &doomed {
                let (x, y) = ((i % w) as isize, (i / w) as isize);
                for (dx, dy) in RING {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if bits[j] && !in_border[j] {
                        in_border[j] = true;
                        border.push(j);
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    BinaryMask::from_bits(w, h, bits).expect("same dimensions")
}

fn restore_lost_components(mask: &BinaryMask, skel: &mut BinaryMask) {
    let w = mask.width();
    let (_, comps) = label_components(mask);
    for pixels in comps {
        if pixels.iter().any(|&i| skel.bits()[i]) {
            continue;
        }
        let n = pixels.len() as f64;
        let cx = pixels.iter().map(|&i| (i % w) as f64).sum::<f64>() / n;
        let cy = pixels.iter().map(|&i| (i / w) as f64).sum::<f64>() / n;
        let best = pixels
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da = sq_dist(a, w, cx, cy);
                let db = sq_dist(b, w, cx, cy);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("component is non-empty");
        skel.set(best % w, best / w, true);
    }
}

fn sq_dist(i: usize, w: usize, cx: f64, cy: f64) -> f64 {
    let dx = (i % w) as f64 - cx;
    let dy = (i / w) as f64 - cy;
    dx * dx + dy * dy
}
