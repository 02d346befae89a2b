//! Sequential filtered thinning.
//!
//! Repeatedly lowers a target point of minimal value to its `alpha_minus`
//! until no target remains. Targets are found through a 256-level bucket
//! queue; each lowering re-examines the point and its eight neighbors.

use std::collections::VecDeque;

use crate::image::{GrayImage, Point};
use crate::topology::{Lambda, Neighborhood};

/// Decides which points a thinning pass lowers.
///
/// Implementations see only the 3x3 patch of the point, which keeps the
/// predicate local by construction.
pub trait TargetPredicate: Sync {
    fn is_target(&self, nb: &Neighborhood, lambda: Lambda) -> bool;
}

/// λ-deletable and not λ-end.
#[derive(Debug, Clone, Copy, Default)]
pub struct SkeletonTarget;

impl TargetPredicate for SkeletonTarget {
    #[inline]
    fn is_target(&self, nb: &Neighborhood, lambda: Lambda) -> bool {
        nb.is_skeleton_target(lambda)
    }
}

impl<F> TargetPredicate for F
where
    F: Fn(&Neighborhood, Lambda) -> bool + Sync,
{
    fn is_target(&self, nb: &Neighborhood, lambda: Lambda) -> bool {
        self(nb, lambda)
    }
}

/// One FIFO per graylevel plus a per-pixel "already queued" flag.
///
/// Keys only need to be nondecreasing between pushes at lower levels; a push
/// below the current cursor moves the cursor down.
#[derive(Debug, Clone)]
pub struct LevelBucketQueue {
    buckets: Vec<VecDeque<u32>>,
    queued: Vec<bool>,
    cursor: usize,
    len: usize,
}

impl LevelBucketQueue {
    pub fn new(pixels: usize) -> Self {
        LevelBucketQueue {
            buckets: (0..256).map(|_| VecDeque::new()).collect(),
            queued: vec![false; pixels],
            cursor: 256,
            len: 0,
        }
    }

    /// Returns false if the pixel is already queued.
    pub fn push(&mut self, index: usize, level: u8) -> bool {
        if self.queued[index] {
            return false;
        }
        self.queued[index] = true;
        self.buckets[level as usize].push_back(index as u32);
        self.cursor = self.cursor.min(level as usize);
        self.len += 1;
        true
    }

    /// Pops the oldest entry of the lowest non-empty level.
    pub fn pop(&mut self) -> Option<(usize, u8)> {
        while self.cursor < 256 {
            if let Some(index) = self.buckets[self.cursor].pop_front() {
                let index = index as usize;
                self.queued[index] = false;
                self.len -= 1;
                return Some((index, self.cursor as u8));
            }
            self.cursor += 1;
        }
        None
    }

    pub fn is_queued(&self, index: usize) -> bool {
        self.queued[index]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct SkeletonStats {
    pub lowerings: u64,
    pub pops: u64,
    /// Pops that were no longer targets when re-examined.
    pub stale: u64,
}

/// Filtered λ-skeleton of `img`. The input is not modified.
pub fn lambda_skeleton(img: &GrayImage, lambda: Lambda) -> GrayImage {
    lambda_skeleton_with(img, lambda, &SkeletonTarget).0
}

/// Runs the sequential thinning loop with an arbitrary local target predicate.
pub fn lambda_skeleton_with<P: TargetPredicate + ?Sized>(
    img: &GrayImage,
    lambda: Lambda,
    target: &P,
) -> (GrayImage, SkeletonStats) {
    let mut out = img.clone();
    let mut stats = SkeletonStats::default();
    let (w, h) = (out.width(), out.height());
    if w < 3 || h < 3 {
        return (out, stats);
    }
    let mut queue = LevelBucketQueue::new(out.len());
    for p in img.interior_points() {
        let nb = Neighborhood::of_interior(&out, p);
        if target.is_target(&nb, lambda) {
            queue.push(out.index_of(p), nb.center);
        }
    }

    while let Some((index, key)) = queue.pop() {
        stats.pops += 1;
        let p = out.point_of(index);
        let nb = Neighborhood::of_interior(&out, p);
        if !target.is_target(&nb, lambda) {
            stats.stale += 1;
            continue;
        }
        if nb.center != key {
            stats.stale += 1;
            queue.push(index, nb.center);
            continue;
        }
        let lowered = nb.alpha_minus();
        if lowered == nb.center {
            continue;
        }
        out.as_mut_slice()[index] = lowered;
        stats.lowerings += 1;

        for q in block_interior(p, w, h) {
            let qi = q.y * w + q.x;
            if queue.is_queued(qi) {
                continue;
            }
            let nb = Neighborhood::of_interior(&out, q);
            if target.is_target(&nb, lambda) {
                queue.push(qi, nb.center);
            }
        }
    }
    (out, stats)
}

/// Interior points of the 3x3 block centered on `p`, including `p`.
pub(crate) fn block_interior(p: Point, w: usize, h: usize) -> impl Iterator<Item = Point> {
    let ys = p.y.saturating_sub(1).max(1)..=(p.y + 1).min(h - 2);
    ys.flat_map(move |y| {
        let xs = p.x.saturating_sub(1).max(1)..=(p.x + 1).min(w - 2);
        xs.map(move |x| Point::new(x, y))
    })
}

/// True when no interior point is a skeleton target.
pub fn is_stable(img: &GrayImage, lambda: Lambda) -> bool {
    count_targets(img, lambda) == 0
}

/// Number of interior points that are skeleton targets.
pub fn count_targets(img: &GrayImage, lambda: Lambda) -> usize {
    count_targets_with(img, lambda, &SkeletonTarget)
}

pub fn count_targets_with<P: TargetPredicate + ?Sized>(
    img: &GrayImage,
    lambda: Lambda,
    target: &P,
) -> usize {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if img.width() < 3 || img.height() < 3 {
            return 0;
        }
        (1..img.height() - 1)
            .into_par_iter()
            .map(|y| count_row(img, y, lambda, target))
            .sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        count_targets_serial(img, lambda, target)
    }
}

/// Single-threaded rescan, available regardless of features.
pub fn count_targets_serial<P: TargetPredicate + ?Sized>(
    img: &GrayImage,
    lambda: Lambda,
    target: &P,
) -> usize {
    if img.width() < 3 || img.height() < 3 {
        return 0;
    }
    (1..img.height() - 1)
        .map(|y| count_row(img, y, lambda, target))
        .sum()
}

fn count_row<P: TargetPredicate + ?Sized>(
    img: &GrayImage,
    y: usize,
    lambda: Lambda,
    target: &P,
) -> usize {
    (1..img.width() - 1)
        .filter(|&x| target.is_target(&Neighborhood::of_interior(img, Point::new(x, y)), lambda))
        .count()
}

/// Interior points that are skeleton targets, in row-major order.
pub fn find_targets<P: TargetPredicate + ?Sized>(
    img: &GrayImage,
    lambda: Lambda,
    target: &P,
) -> Vec<Point> {
    img.interior_points()
        .filter(|&p| target.is_target(&Neighborhood::of_interior(img, p), lambda))
        .collect()
}

/// Like [`find_targets`], split over rows when the `parallel` feature is on.
pub fn scan_targets<P: TargetPredicate + ?Sized>(
    img: &GrayImage,
    lambda: Lambda,
    target: &P,
) -> Vec<Point> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if img.width() < 3 || img.height() < 3 {
            return Vec::new();
        }
        (1..img.height() - 1)
            .into_par_iter()
            .flat_map_iter(|y| {
                (1..img.width() - 1)
                    .map(move |x| Point::new(x, y))
                    .filter(|&p| target.is_target(&Neighborhood::of_interior(img, p), lambda))
            })
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        find_targets(img, lambda, target)
    }
}
