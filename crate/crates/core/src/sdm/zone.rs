//! Row-band zones and worker search spaces.

use crate::image::{GrayImage, Point};
use crate::sdm::{EngineError, WorkerId};

/// A band of interior rows `[row_lo, row_hi)` owned by one worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Zone {
    pub row_lo: usize,
    pub row_hi: usize,
    pub owner: WorkerId,
}

impl Zone {
    pub fn rows(&self) -> usize {
        self.row_hi - self.row_lo
    }

    pub fn contains_row(&self, y: usize) -> bool {
        (self.row_lo..self.row_hi).contains(&y)
    }
}

/// Splits the interior rows of `img` into `n` contiguous bands whose sizes
/// differ by at most one. Larger bands come first.
pub fn split(img: &GrayImage, n: usize) -> Result<Vec<Zone>, EngineError> {
    split_rows(img.height(), n)
}

pub(crate) fn split_rows(height: usize, n: usize) -> Result<Vec<Zone>, EngineError> {
    let interior = height.saturating_sub(2);
    if n == 0 || n > interior {
        return Err(EngineError::TooManyZones {
            zones: n,
            interior_rows: interior,
        });
    }
    let (base, extra) = (interior / n, interior % n);
    let mut row = 1;
    Ok((0..n)
        .map(|i| {
            let size = base + usize::from(i < extra);
            let zone = Zone {
                row_lo: row,
                row_hi: row + size,
                owner: WorkerId(i),
            };
            row += size;
            zone
        })
        .collect())
}

/// Index of the zone holding row `y`, if any.
pub(crate) fn zone_of_row(zones: &[Zone], y: usize) -> Option<usize> {
    let i = zones.partition_point(|z| z.row_hi <= y);
    (i < zones.len() && zones[i].contains_row(y)).then_some(i)
}

/// Region a worker may lower: its zones plus any private rejects inherited
/// through merges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchSpace {
    pub zones: Vec<Zone>,
    pub rejects: Vec<Point>,
}

impl SearchSpace {
    pub fn from_zone(zone: Zone) -> Self {
        SearchSpace {
            zones: vec![zone],
            rejects: Vec::new(),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.zones.iter().any(|z| z.contains_row(p.y)) || self.rejects.contains(&p)
    }

    /// Union of two spaces, zones kept sorted by first row.
    pub fn union(mut self, mut other: SearchSpace) -> SearchSpace {
        self.zones.append(&mut other.zones);
        self.zones.sort_by_key(|z| z.row_lo);
        self.rejects.append(&mut other.rejects);
        self
    }

    pub fn rows(&self) -> usize {
        self.zones.iter().map(Zone::rows).sum()
    }
}
