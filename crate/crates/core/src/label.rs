use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Pixel value marking unlabeled pixels; excluded from every loss.
pub const IGNORE: u8 = 255;

/// Background class id.
pub const BACKGROUND: u8 = 0;

/// Multi-class 8-bit label grid (scribbles, pseudo-labels).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl LabelMask {
    /// All-unlabeled canvas.
    pub fn unlabeled(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "label dimensions must be positive");
        Self { width, height, values: vec![IGNORE; width * height] }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidDimensions { width, height, len: values.len() });
        }
        Ok(Self { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut m = Self::unlabeled(width, height);
        for y in 0..height {
            for x in 0..width {
                m.values[y * width + x] = f(x, y);
            }
        }
        m
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

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.values[y * self.width + x] = value;
    }

    /// Writes `class` wherever `mask` is set.
    pub fn paint(&mut self, mask: &BinaryMask, class: u8) {
        debug_assert_eq!(mask.dims(), self.dims());
        for (v, &b) in self.values.iter_mut().zip(mask.bits()) {
            if b {
                *v = class;
            }
        }
    }

    pub fn labeled_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != IGNORE).count()
    }

    /// Mask of pixels whose value satisfies `pred`.
    pub fn select(&self, mut pred: impl FnMut(u8) -> bool) -> BinaryMask {
        BinaryMask::from_bits(self.width, self.height, self.values.iter().map(|&v| pred(v)).collect())
            .expect("dimensions already validated")
    }

    /// Labeled non-background pixels.
    pub fn foreground(&self) -> BinaryMask {
        self.select(is_foreground)
    }
}

#[inline]
pub fn is_foreground(v: u8) -> bool {
    v != BACKGROUND && v != IGNORE
}
