//! Grayscale raster and pixel coordinates.

use thiserror::Error;

/// Pixel coordinate: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: usize,
    pub y: usize,
}

impl Point {
    pub const fn new(x: usize, y: usize) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("expected {expected} pixel values for {width}x{height}, got {actual}")]
    LengthMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
}

/// An 8-bit grayscale image stored row-major.
///
/// Graylevels are `u8`, so the `[0, 255]` range invariant is carried by the
/// type. Width and height are always positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        let expected = width * height;
        if data.len() != expected {
            return Err(ImageError::LengthMismatch {
                width,
                height,
                expected,
                actual: data.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, level: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![level; width * height])
    }

    /// Builds an image from rows of equal length. Panics on ragged input;
    /// intended for fixtures.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(width * height);
        for row in rows {
            assert_eq!(row.as_ref().len(), width, "ragged rows");
            data.extend_from_slice(row.as_ref());
        }
        Self::new(width, height, data).expect("non-empty rows")
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn index_of(&self, p: Point) -> usize {
        p.y * self.width + p.x
    }

    #[inline]
    pub fn point_of(&self, index: usize) -> Point {
        Point::new(index % self.width, index / self.width)
    }

    #[inline]
    pub fn get(&self, p: Point) -> u8 {
        self.data[p.y * self.width + p.x]
    }

    #[inline]
    pub fn set(&mut self, p: Point, value: u8) {
        self.data[p.y * self.width + p.x] = value;
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x < self.width && p.y < self.height
    }

    /// True when all eight neighbors of `p` are inside the image.
    #[inline]
    pub fn is_interior(&self, p: Point) -> bool {
        p.x >= 1 && p.y >= 1 && p.x + 1 < self.width && p.y + 1 < self.height
    }

    /// Iterates interior points in row-major order.
    pub fn interior_points(&self) -> impl Iterator<Item = Point> + '_ {
        let (w, h) = (self.width, self.height);
        (1..h.saturating_sub(1)).flat_map(move |y| (1..w.saturating_sub(1)).map(move |x| Point::new(x, y)))
    }

    /// Number of pixels that differ between two images of equal shape.
    pub fn hamming_distance(&self, other: &GrayImage) -> Option<usize> {
        if self.width != other.width || self.height != other.height {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .filter(|(a, b)| a != b)
                .count(),
        )
    }

    pub fn sum(&self) -> u64 {
        self.data.iter().map(|&v| u64::from(v)).sum()
    }

    pub fn max_value(&self) -> u8 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Pointwise `self <= other`.
    pub fn le_pointwise(&self, other: &GrayImage) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.iter().zip(&other.data).all(|(a, b)| a <= b)
    }

    /// True when the one-pixel frame of both images is identical.
    pub fn same_border(&self, other: &GrayImage) -> bool {
        if self.width != other.width || self.height != other.height {
            return false;
        }
        (0..self.height).all(|y| {
            (0..self.width).all(|x| {
                let p = Point::new(x, y);
                self.is_interior(p) || self.get(p) == other.get(p)
            })
        })
    }
}
