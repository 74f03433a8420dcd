use core::fmt;

/// Errors raised by the core geometry, synthesis and kernel routines.
#[derive(Debug, Clone, PartialEq, Eq)]
#[non_exhaustive]
pub enum Error {
    /// The mask has no set pixel.
    EmptyMask,
    /// Area ratio is 0 or 1; a style decision needs `0 < P < 1`.
    DegenerateRatio,
    /// Width or height of zero, or a buffer whose length disagrees with them.
    InvalidDimensions { width: usize, height: usize, len: usize },
    /// Two rasters that must share a canvas do not.
    DimensionMismatch { expected: (usize, usize), found: (usize, usize) },
    /// Path selection called with nothing to choose from.
    NoPaths,
    /// Bézier smoothing needs at least two control points.
    TooFewPoints,
    /// A distance field was requested with no source pixel.
    NoSources,
    /// The pseudo-label has no foreground boundary.
    NoForeground,
    /// The scribble has no labeled foreground pixel.
    NoForegroundScribble,
    /// A loss was asked to average over zero labeled pixels.
    NoLabeledPixels,
    /// Every decoded distance weight is zero.
    AllZeroDistanceMap,
    /// Tensor shapes do not line up.
    ShapeMismatch(&'static str),
    /// Gradient checking is only defined for the differentiable losses.
    UnsupportedLoss,
    /// A label value is out of range (class ids must be < 255).
    InvalidClass(u32),
    /// A configuration value violates its documented range.
    InvalidConfig(&'static str),
    /// A tensor entry is non-finite or outside its allowed set.
    InvalidValue(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyMask => f.write_str("mask has no foreground pixel"),
            Error::DegenerateRatio => f.write_str("area ratio must lie strictly between 0 and 1"),
            Error::InvalidDimensions { width, height, len } => {
                write!(f, "invalid dimensions {width}x{height} for buffer of length {len}")
            }
            Error::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::NoPaths => f.write_str("no paths to select from"),
            Error::TooFewPoints => f.write_str("at least two points are required"),
            Error::NoSources => f.write_str("distance field has no source pixel"),
            Error::NoForeground => f.write_str("pseudo-label has no foreground boundary"),
            Error::NoForegroundScribble => f.write_str("scribble has no labeled foreground pixel"),
            Error::NoLabeledPixels => f.write_str("no labeled pixel to average over"),
            Error::AllZeroDistanceMap => f.write_str("distance map has no nonzero weight"),
            Error::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
            Error::UnsupportedLoss => f.write_str("unsupported loss for gradient checking"),
            Error::InvalidClass(c) => write!(f, "invalid class id {c}"),
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
            Error::InvalidValue(what) => write!(f, "invalid value: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
