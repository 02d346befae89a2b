//! Concurrent image storage and the ordered 3x3 claim protocol.
//!
//! A lowering reads the 3x3 block around a point and writes its center.
//! Before committing, a worker claims all nine cells in increasing
//! row-major index, re-evaluates the target predicate on the claimed block,
//! writes, and releases. Two commits serialize exactly when their blocks
//! overlap, and the global acquisition order rules out deadlock.

use std::sync::atomic::{AtomicBool, AtomicU8, Ordering};

use crate::image::{GrayImage, Point};
use crate::sdm::schedule::{NoHook, SchedPoint, ScheduleHook};
use crate::sdm::WorkerId;
use crate::skeleton::{SkeletonTarget, TargetPredicate};
use crate::topology::{Lambda, Neighborhood};

/// Graylevel grid that workers read and lower concurrently.
pub struct SharedImage {
    width: usize,
    height: usize,
    cells: Vec<AtomicU8>,
}

impl SharedImage {
    pub fn from_image(img: &GrayImage) -> Self {
        SharedImage {
            width: img.width(),
            height: img.height(),
            cells: img.as_slice().iter().map(|&v| AtomicU8::new(v)).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, p: Point) -> u8 {
        self.cells[p.y * self.width + p.x].load(Ordering::Relaxed)
    }

    #[inline]
    fn load(&self, i: usize) -> u8 {
        self.cells[i].load(Ordering::Relaxed)
    }

    pub fn is_interior(&self, p: Point) -> bool {
        p.x >= 1 && p.y >= 1 && p.x + 1 < self.width && p.y + 1 < self.height
    }

    /// Reads the 3x3 patch of an interior point. Without a claim the values
    /// may be mid-update by other workers.
    #[inline]
    pub fn neighborhood(&self, p: Point) -> Neighborhood {
        let w = self.width;
        let c = p.y * w + p.x;
        let (up, down) = (c - w, c + w);
        Neighborhood {
            center: self.load(c),
            ring: [
                self.load(up - 1),
                self.load(up),
                self.load(up + 1),
                self.load(c - 1),
                self.load(c + 1),
                self.load(down - 1),
                self.load(down),
                self.load(down + 1),
            ],
        }
    }

    pub fn snapshot(&self) -> GrayImage {
        GrayImage::new(
            self.width,
            self.height,
            self.cells.iter().map(|c| c.load(Ordering::Relaxed)).collect(),
        )
        .expect("shape carried over from a valid image")
    }
}

/// One exclusive-claim flag per pixel.
pub struct PixelClaimTable {
    width: usize,
    flags: Vec<AtomicBool>,
}

impl PixelClaimTable {
    pub fn new(width: usize, height: usize) -> Self {
        PixelClaimTable {
            width,
            flags: (0..width * height).map(|_| AtomicBool::new(false)).collect(),
        }
    }

    pub fn is_claimed(&self, p: Point) -> bool {
        self.flags[p.y * self.width + p.x].load(Ordering::Acquire)
    }

    pub fn claimed_count(&self) -> usize {
        self.flags.iter().filter(|f| f.load(Ordering::Acquire)).count()
    }

    /// Claims the 3x3 block around interior `p`, lowest index first.
    fn claim_block<H: ScheduleHook + ?Sized>(
        &self,
        p: Point,
        worker: WorkerId,
        hook: &H,
        spins: &mut u64,
    ) -> BlockClaim<'_> {
        let mut cells = [0usize; 9];
        let mut k = 0;
        for y in p.y - 1..=p.y + 1 {
            for x in p.x - 1..=p.x + 1 {
                cells[k] = y * self.width + x;
                k += 1;
            }
        }
        for (held, &cell) in cells.iter().enumerate() {
            hook.at(worker, SchedPoint::Claim { center: p, cell: held });
            let flag = &self.flags[cell];
            let mut backoff = crate::sdm::queue::SpinBackoff::new();
            while flag
                .compare_exchange_weak(false, true, Ordering::Acquire, Ordering::Relaxed)
                .is_err()
            {
                hook.at(worker, SchedPoint::ClaimRetry { center: p, cell: held });
                backoff.snooze();
            }
            *spins += backoff.total();
        }
        BlockClaim { table: self, cells }
    }
}

struct BlockClaim<'a> {
    table: &'a PixelClaimTable,
    cells: [usize; 9],
}

impl Drop for BlockClaim<'_> {
    fn drop(&mut self) {
        for &cell in self.cells.iter().rev() {
            self.table.flags[cell].store(false, Ordering::Release);
        }
    }
}

/// Result of one commit attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CommitOutcome {
    pub lowered: bool,
    pub from: u8,
    pub to: u8,
    pub spins: u64,
}

/// Lowers `p` to its `alpha_minus` if it is a skeleton target under a claim.
pub fn commit_lower(
    image: &SharedImage,
    p: Point,
    lambda: Lambda,
    claims: &PixelClaimTable,
) -> bool {
    commit_lower_with(image, p, lambda, claims, &SkeletonTarget, WorkerId(0), &NoHook).lowered
}

/// Claim, re-check, write, release.
///
/// The predicate is evaluated on the claimed block, so a point invalidated
/// by a concurrent neighbor lowering is left untouched.
pub fn commit_lower_with<P, H>(
    image: &SharedImage,
    p: Point,
    lambda: Lambda,
    claims: &PixelClaimTable,
    target: &P,
    worker: WorkerId,
    hook: &H,
) -> CommitOutcome
where
    P: TargetPredicate + ?Sized,
    H: ScheduleHook + ?Sized,
{
    debug_assert!(image.is_interior(p));
    let mut outcome = CommitOutcome::default();
    let claim = claims.claim_block(p, worker, hook, &mut outcome.spins);
    let nb = image.neighborhood(p);
    outcome.from = nb.center;
    outcome.to = nb.center;
    if target.is_target(&nb, lambda) {
        let lowered = nb.alpha_minus();
        if lowered < nb.center {
            image.cells[p.y * image.width + p.x].store(lowered, Ordering::Relaxed);
            outcome.lowered = true;
            outcome.to = lowered;
            hook.at(
                worker,
                SchedPoint::Committed {
                    point: p,
                    from: nb.center,
                    to: lowered,
                },
            );
        }
    }
    if !outcome.lowered {
        hook.at(worker, SchedPoint::CommitRejected { point: p });
    }
    drop(claim);
    outcome
}
