//! Local topological characterization of grayscale points.
//!
//! Every quantity here depends only on the 3x3 patch around a point. The
//! foreground of a section uses 8-adjacency and its complement 4-adjacency;
//! the pair is fixed to (8, 4).
//!
//! # Ring bit order
//!
//! A [`NeighborMask`] stores one bit per ring neighbor, indexed by the
//! offset `(dx, dy)` from the center (`dy` grows downward):
//!
//! ```text
//!   bit0 (-1,-1)  bit1 (0,-1)  bit2 (1,-1)
//!   bit3 (-1, 0)     center    bit4 (1, 0)
//!   bit5 (-1, 1)  bit6 (0, 1)  bit7 (1, 1)
//! ```
//!
//! This is also the index convention of the connectivity lookup tables.

use std::sync::LazyLock;

use thiserror::Error;

use crate::image::{GrayImage, Point};

/// Ring offsets `(dx, dy)` in bit order.
pub const RING_OFFSETS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Bits of the four edge-sharing neighbors (1, 3, 4, 6).
pub const FOUR_NEIGHBOR_BITS: u8 = 0b0101_1010;

/// Foreground / background adjacency pair. Only (8, 4) is supported.
pub const ADJACENCY: (u8, u8) = (8, 4);

const fn ring_adjacency(eight: bool) -> [u8; 8] {
    let mut table = [0u8; 8];
    let mut i = 0;
    while i < 8 {
        let mut j = 0;
        while j < 8 {
            if i != j {
                let dx = (RING_OFFSETS[i].0 - RING_OFFSETS[j].0).abs();
                let dy = (RING_OFFSETS[i].1 - RING_OFFSETS[j].1).abs();
                let adjacent = if eight {
                    dx <= 1 && dy <= 1
                } else {
                    dx + dy <= 1
                };
                if adjacent {
                    table[i] |= 1 << j;
                }
            }
            j += 1;
        }
        i += 1;
    }
    table
}

const RING_ADJ8: [u8; 8] = ring_adjacency(true);
const RING_ADJ4: [u8; 8] = ring_adjacency(false);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("point ({x}, {y}) is not interior to a {width}x{height} image")]
    NotInterior {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

/// Contrast threshold for filtered thinning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Lambda(pub u32);

impl Lambda {
    #[inline]
    fn admits(self, contrast: u8) -> bool {
        u32::from(contrast) <= self.0
    }
}

impl From<u32> for Lambda {
    fn from(v: u32) -> Self {
        Lambda(v)
    }
}

/// Occupancy of the eight ring neighbors; see the module docs for bit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct NeighborMask(pub u8);

impl NeighborMask {
    pub const EMPTY: NeighborMask = NeighborMask(0);
    pub const FULL: NeighborMask = NeighborMask(0xff);

    #[inline]
    pub fn bits(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn contains(self, bit: usize) -> bool {
        self.0 & (1 << bit) != 0
    }

    #[inline]
    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    #[inline]
    pub fn complement(self) -> NeighborMask {
        NeighborMask(!self.0)
    }
}

/// Splits `set` into connected components under the given ring adjacency.
fn ring_components(set: u8, adjacency: &[u8; 8]) -> impl Iterator<Item = u8> + '_ {
    let mut remaining = set;
    std::iter::from_fn(move || {
        if remaining == 0 {
            return None;
        }
        let mut comp = remaining & remaining.wrapping_neg();
        loop {
            let mut grown = comp;
            let mut bits = comp;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                grown |= adjacency[i] & set;
                bits &= bits - 1;
            }
            if grown == comp {
                break;
            }
            comp = grown;
        }
        remaining &= !comp;
        Some(comp)
    })
}

/// 4-connected components of the ring set that touch a 4-neighbor of the center.
fn touching_four_components(set: u8) -> impl Iterator<Item = u8> {
    ring_components(set, &RING_ADJ4).filter(|c| c & FOUR_NEIGHBOR_BITS != 0)
}

/// Binary connectivity number T: 8-components of the set bits.
pub fn t_binary(m: NeighborMask) -> u8 {
    ring_components(m.0, &RING_ADJ8).count() as u8
}

/// Binary connectivity number T-bar: 4-components of the cleared bits that
/// contain one of bits 1, 3, 4, 6.
pub fn t_bar_binary(m: NeighborMask) -> u8 {
    touching_four_components(!m.0).count() as u8
}

/// Precomputed T and T-bar for all 256 masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityLuts {
    pub t: [u8; 256],
    pub t_bar: [u8; 256],
}

pub fn build_connectivity_luts() -> ConnectivityLuts {
    let mut t = [0u8; 256];
    let mut t_bar = [0u8; 256];
    for m in 0..=255u8 {
        t[m as usize] = t_binary(NeighborMask(m));
        t_bar[m as usize] = t_bar_binary(NeighborMask(m));
    }
    ConnectivityLuts { t, t_bar }
}

static LUTS: LazyLock<ConnectivityLuts> = LazyLock::new(build_connectivity_luts);

/// Shared read-only tables, built on first use.
pub fn luts() -> &'static ConnectivityLuts {
    &LUTS
}

#[inline]
fn lut_t(m: u8) -> u8 {
    LUTS.t[m as usize]
}

#[inline]
fn lut_t_bar(m: u8) -> u8 {
    LUTS.t_bar[m as usize]
}

/// Simple point test on the mask of foreground ring neighbors.
#[inline]
pub fn is_simple(m: NeighborMask) -> bool {
    lut_t(m.0) == 1 && lut_t_bar(m.0) == 1
}

/// A center graylevel with its eight ring values in bit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: u8,
    pub ring: [u8; 8],
}

impl Neighborhood {
    /// Reads the 3x3 patch around an interior point.
    pub fn of(img: &GrayImage, p: Point) -> Result<Self, TopologyError> {
        require_interior(img, p)?;
        Ok(Self::of_interior(img, p))
    }

    /// Caller guarantees `p` is interior.
    #[inline]
    pub(crate) fn of_interior(img: &GrayImage, p: Point) -> Self {
        let w = img.width();
        let data = img.as_slice();
        let c = p.y * w + p.x;
        let (up, down) = (c - w, c + w);
        Neighborhood {
            center: data[c],
            ring: [
                data[up - 1],
                data[up],
                data[up + 1],
                data[c - 1],
                data[c + 1],
                data[down - 1],
                data[down],
                data[down + 1],
            ],
        }
    }

    /// Builds a neighborhood from a row-major 3x3 patch.
    pub fn from_patch(patch: [[u8; 3]; 3]) -> Self {
        Neighborhood {
            center: patch[1][1],
            ring: [
                patch[0][0],
                patch[0][1],
                patch[0][2],
                patch[1][0],
                patch[1][2],
                patch[2][0],
                patch[2][1],
                patch[2][2],
            ],
        }
    }

    /// Mask of ring neighbors `y` with `pred(F(y), F(center))`.
    #[inline]
    pub fn mask_where(&self, pred: impl Fn(u8, u8) -> bool) -> NeighborMask {
        let mut bits = 0u8;
        for (i, &v) in self.ring.iter().enumerate() {
            if pred(v, self.center) {
                bits |= 1 << i;
            }
        }
        NeighborMask(bits)
    }

    /// Neighbors at or above the center level: the section through the center.
    #[inline]
    pub fn plus_mask(&self) -> NeighborMask {
        self.mask_where(|v, c| v >= c)
    }

    #[inline]
    pub fn plusplus_mask(&self) -> NeighborMask {
        self.mask_where(|v, c| v > c)
    }

    #[inline]
    pub fn minus_mask(&self) -> NeighborMask {
        self.mask_where(|v, c| v < c)
    }

    /// Highest strictly-lower neighbor value, or the center value if none.
    #[inline]
    pub fn alpha_minus(&self) -> u8 {
        self.ring
            .iter()
            .copied()
            .filter(|&v| v < self.center)
            .max()
            .unwrap_or(self.center)
    }

    /// (T+, T++, T-).
    pub fn connectivity(&self) -> (u8, u8, u8) {
        let plus = self.plus_mask();
        (
            lut_t(plus.0),
            lut_t(self.plusplus_mask().0),
            // the lower set is the background of the center's section
            lut_t_bar(plus.0),
        )
    }

    #[inline]
    pub fn is_destructible(&self) -> bool {
        is_simple(self.plus_mask())
    }

    #[inline]
    pub fn is_end_point(&self) -> bool {
        self.plus_mask().count() == 1
    }

    #[inline]
    pub fn is_peak(&self) -> bool {
        self.plus_mask().0 == 0
    }

    fn lambda_destructible_with(&self, plus: NeighborMask, lambda: Lambda) -> bool {
        if is_simple(plus) {
            return true;
        }
        let k = lut_t_bar(plus.0);
        if k <= 1 {
            return false;
        }
        let within = touching_four_components(!plus.0)
            .filter(|&comp| {
                let highest = (0..8)
                    .filter(|i| comp & (1 << i) != 0)
                    .map(|i| self.ring[i])
                    .max()
                    .unwrap_or(self.center);
                lambda.admits(self.center - highest)
            })
            .count();
        within >= usize::from(k - 1)
    }

    pub fn is_lambda_destructible(&self, lambda: Lambda) -> bool {
        self.lambda_destructible_with(self.plus_mask(), lambda)
    }

    pub fn is_lambda_end(&self, lambda: Lambda) -> bool {
        self.is_end_point() && !lambda.admits(self.center - self.alpha_minus())
    }

    pub fn is_lambda_deletable(&self, lambda: Lambda) -> bool {
        let plus = self.plus_mask();
        self.lambda_destructible_with(plus, lambda)
            || (plus.0 == 0 && lambda.admits(self.center - self.alpha_minus()))
    }

    /// λ-deletable and not λ-end: the points the λ-skeleton lowers.
    #[inline]
    pub fn is_skeleton_target(&self, lambda: Lambda) -> bool {
        let plus = self.plus_mask();
        let contrast = self.center - self.alpha_minus();
        let deletable = self.lambda_destructible_with(plus, lambda)
            || (plus.0 == 0 && lambda.admits(contrast));
        deletable && !(plus.count() == 1 && !lambda.admits(contrast))
    }

    pub fn classify(&self) -> PointClass {
        let plus = self.plus_mask();
        let (t_plus, t_plusplus, t_minus) = self.connectivity();
        PointClass {
            t: lut_t(plus.0),
            t_bar: lut_t_bar(plus.0),
            t_plus,
            t_plusplus,
            t_minus,
            alpha_minus: self.alpha_minus(),
            destructible: is_simple(plus),
            peak: t_plus == 0,
            divergence_k: t_minus,
            end_point: plus.count() == 1,
        }
    }
}

/// Full local characterization of a point.
///
/// `t` and `t_bar` are taken for the section at the point's own level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct PointClass {
    pub t: u8,
    pub t_bar: u8,
    pub t_plus: u8,
    pub t_plusplus: u8,
    pub t_minus: u8,
    pub alpha_minus: u8,
    pub destructible: bool,
    pub peak: bool,
    pub divergence_k: u8,
    pub end_point: bool,
}

impl PointClass {
    /// k-divergent with k > 1.
    pub fn is_divergent(&self) -> bool {
        self.divergence_k > 1
    }
}

fn require_interior(img: &GrayImage, p: Point) -> Result<(), TopologyError> {
    if img.is_interior(p) {
        Ok(())
    } else {
        Err(TopologyError::NotInterior {
            x: p.x,
            y: p.y,
            width: img.width(),
            height: img.height(),
        })
    }
}

/// Mask of ring neighbors `y` of `p` with `pred(F(y), F(p))`.
pub fn neighbor_mask(
    img: &GrayImage,
    p: Point,
    pred: impl Fn(u8, u8) -> bool,
) -> Result<NeighborMask, TopologyError> {
    Ok(Neighborhood::of(img, p)?.mask_where(pred))
}

pub fn alpha_minus(img: &GrayImage, p: Point) -> Result<u8, TopologyError> {
    Ok(Neighborhood::of(img, p)?.alpha_minus())
}

/// Returns `(t_plus, t_plusplus, t_minus)`.
pub fn grayscale_connectivity(img: &GrayImage, p: Point) -> Result<(u8, u8, u8), TopologyError> {
    Ok(Neighborhood::of(img, p)?.connectivity())
}

pub fn is_destructible(img: &GrayImage, p: Point) -> Result<bool, TopologyError> {
    Ok(Neighborhood::of(img, p)?.is_destructible())
}

pub fn classify(img: &GrayImage, p: Point) -> Result<PointClass, TopologyError> {
    Ok(Neighborhood::of(img, p)?.classify())
}

pub fn is_lambda_destructible(
    img: &GrayImage,
    p: Point,
    lambda: Lambda,
) -> Result<bool, TopologyError> {
    Ok(Neighborhood::of(img, p)?.is_lambda_destructible(lambda))
}

pub fn is_lambda_end(img: &GrayImage, p: Point, lambda: Lambda) -> Result<bool, TopologyError> {
    Ok(Neighborhood::of(img, p)?.is_lambda_end(lambda))
}

pub fn is_lambda_deletable(
    img: &GrayImage,
    p: Point,
    lambda: Lambda,
) -> Result<bool, TopologyError> {
    Ok(Neighborhood::of(img, p)?.is_lambda_deletable(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: Point = Point::new(1, 1);

    fn patch(rows: [[u8; 3]; 3]) -> GrayImage {
        GrayImage::from_rows(&rows)
    }

    fn peak() -> GrayImage {
        patch([[0, 0, 0], [0, 10, 0], [0, 0, 0]])
    }

    fn ridge_interior() -> GrayImage {
        patch([[0, 0, 0], [10, 10, 10], [0, 0, 0]])
    }

    fn ridge_end() -> GrayImage {
        patch([[0, 0, 0], [0, 10, 10], [0, 0, 0]])
    }

    fn mixed() -> GrayImage {
        // neighbors in row-major order: 3,4,7,5,5,2,9,1
        patch([[3, 4, 7], [5, 5, 5], [2, 9, 1]])
    }

    fn mask_of(bits: &[usize]) -> NeighborMask {
        NeighborMask(bits.iter().fold(0, |m, &b| m | (1 << b)))
    }

    #[test]
    fn ring_adjacency_tables() {
        // corner 0 touches 1 and 3 under 4-adjacency, plus nothing else
        assert_eq!(RING_ADJ4[0], mask_of(&[1, 3]).0);
        assert_eq!(RING_ADJ8[0], mask_of(&[1, 3]).0);
        assert_eq!(RING_ADJ8[1], mask_of(&[0, 2, 3, 4]).0);
        assert_eq!(RING_ADJ4[1], mask_of(&[0, 2]).0);
    }

    #[test]
    fn neighbor_mask_examples() {
        let flat = GrayImage::filled(3, 3, 4).unwrap();
        assert_eq!(neighbor_mask(&flat, C, |v, c| v < c).unwrap(), NeighborMask(0));
        assert_eq!(neighbor_mask(&peak(), C, |v, c| v < c).unwrap(), NeighborMask(255));
        assert_eq!(
            neighbor_mask(&mixed(), C, |v, c| v >= c).unwrap(),
            mask_of(&[2, 3, 4, 6])
        );
    }

    #[test]
    fn non_interior_is_rejected() {
        let img = GrayImage::filled(4, 4, 0).unwrap();
        for p in [Point::new(0, 1), Point::new(3, 2), Point::new(1, 3), Point::new(9, 9)] {
            assert!(matches!(
                classify(&img, p),
                Err(TopologyError::NotInterior { .. })
            ));
            assert!(alpha_minus(&img, p).is_err());
            assert!(is_lambda_deletable(&img, p, Lambda(0)).is_err());
        }
    }

    #[test]
    fn binary_numbers() {
        assert_eq!(t_binary(NeighborMask(0)), 0);
        assert_eq!(t_binary(NeighborMask(255)), 1);
        assert_eq!(t_binary(mask_of(&[0, 7])), 2);
        assert_eq!(t_bar_binary(NeighborMask(255)), 0);
        assert_eq!(t_bar_binary(NeighborMask(0)), 1);
        assert_eq!(t_bar_binary(mask_of(&[0, 2, 5, 7])), 4);
    }

    #[test]
    fn lut_spot_values() {
        let l = luts();
        assert_eq!(l.t[0], 0);
        assert_eq!(l.t[255], 1);
        assert_eq!(l.t_bar[255], 0);
        assert_eq!(*l, build_connectivity_luts());
    }

    #[test]
    fn simple_points() {
        assert!(is_simple(mask_of(&[4])));
        assert!(!is_simple(NeighborMask(0)));
        assert!(!is_simple(NeighborMask(255)));
    }

    #[test]
    fn alpha_minus_examples() {
        let flat = GrayImage::filled(3, 3, 4).unwrap();
        assert_eq!(alpha_minus(&flat, C).unwrap(), 4);
        assert_eq!(alpha_minus(&peak(), C).unwrap(), 0);
        assert_eq!(alpha_minus(&mixed(), C).unwrap(), 4);
    }

    #[test]
    fn grayscale_connectivity_examples() {
        let flat = GrayImage::filled(3, 3, 4).unwrap();
        assert_eq!(grayscale_connectivity(&flat, C).unwrap(), (1, 0, 0));
        assert_eq!(grayscale_connectivity(&peak(), C).unwrap(), (0, 0, 1));
        assert_eq!(grayscale_connectivity(&ridge_interior(), C).unwrap(), (2, 0, 2));
    }

    #[test]
    fn destructible_examples() {
        let flat = GrayImage::filled(3, 3, 4).unwrap();
        assert!(!is_destructible(&flat, C).unwrap());
        assert!(!is_destructible(&ridge_interior(), C).unwrap());
        assert!(is_destructible(&ridge_end(), C).unwrap());
    }

    #[test]
    fn classify_examples() {
        let c = classify(&peak(), C).unwrap();
        assert!(c.peak && !c.destructible && !c.end_point);
        assert_eq!(c.alpha_minus, 0);

        let c = classify(&ridge_end(), C).unwrap();
        assert!(c.end_point && c.destructible);

        let c = classify(&GrayImage::filled(3, 3, 4).unwrap(), C).unwrap();
        assert!(!c.peak && !c.end_point);
        assert_eq!(c.t_plus, 1);
        assert_eq!(c.alpha_minus, 4);

        let c = classify(&ridge_interior(), C).unwrap();
        assert!(c.is_divergent());
        assert_eq!(c.divergence_k, 2);
    }

    #[test]
    fn lambda_destructible_examples() {
        assert!(is_lambda_destructible(&ridge_end(), C, Lambda(0)).unwrap());
        assert!(is_lambda_destructible(&ridge_interior(), C, Lambda(10)).unwrap());
        assert!(!is_lambda_destructible(&ridge_interior(), C, Lambda(5)).unwrap());
    }

    #[test]
    fn lambda_destructible_counts_components_by_their_highest_level() {
        // two lower components: top row peaks at 8 (contrast 2), bottom at 0
        let img = patch([[0, 8, 0], [10, 10, 10], [0, 0, 0]]);
        assert!(is_lambda_destructible(&img, C, Lambda(2)).unwrap());
        assert!(!is_lambda_destructible(&img, C, Lambda(1)).unwrap());
    }

    #[test]
    fn three_divergent_needs_two_low_contrast_components() {
        // lower components {bit1: 9}, {bit4: 0}, {bit6: 5}; corners stay high
        let img = patch([[10, 9, 10], [10, 10, 0], [10, 5, 10]]);
        let class = classify(&img, C).unwrap();
        assert_eq!(class.divergence_k, 3);
        assert!(!class.destructible);
        assert!(!is_lambda_destructible(&img, C, Lambda(1)).unwrap());
        assert!(!is_lambda_destructible(&img, C, Lambda(4)).unwrap());
        assert!(is_lambda_destructible(&img, C, Lambda(5)).unwrap());
        assert!(is_lambda_destructible(&img, C, Lambda(10)).unwrap());
    }

    #[test]
    fn isolated_lower_corner_is_not_a_lower_component() {
        let img = patch([[9, 9, 9], [10, 10, 10], [0, 10, 0]]);
        assert_eq!(classify(&img, C).unwrap().t_minus, 1);
    }

    #[test]
    fn lambda_end_examples() {
        assert!(is_lambda_end(&ridge_end(), C, Lambda(5)).unwrap());
        assert!(!is_lambda_end(&ridge_end(), C, Lambda(10)).unwrap());
        assert!(!is_lambda_end(&ridge_interior(), C, Lambda(0)).unwrap());
        assert!(!is_lambda_end(&peak(), C, Lambda(0)).unwrap());
    }

    #[test]
    fn lambda_deletable_examples() {
        assert!(is_lambda_deletable(&peak(), C, Lambda(10)).unwrap());
        assert!(!is_lambda_deletable(&peak(), C, Lambda(9)).unwrap());
        assert!(is_lambda_deletable(&ridge_end(), C, Lambda(0)).unwrap());
    }

    #[test]
    fn skeleton_target_combines_deletable_and_not_end() {
        let nb = |img: &GrayImage| Neighborhood::of(img, C).unwrap();
        assert!(!nb(&ridge_end()).is_skeleton_target(Lambda(9)));
        assert!(nb(&ridge_end()).is_skeleton_target(Lambda(10)));
        assert!(nb(&peak()).is_skeleton_target(Lambda(10)));
        assert!(!nb(&peak()).is_skeleton_target(Lambda(9)));
        assert!(!nb(&GrayImage::filled(3, 3, 7).unwrap()).is_skeleton_target(Lambda(255)));
    }
}
