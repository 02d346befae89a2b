//! Schedule injection points.
//!
//! Workers report to a [`ScheduleHook`] before every step that touches
//! shared state. Production runs use [`NoHook`]; tests install hooks that
//! block, reorder or record workers to force specific interleavings.

use crate::image::Point;
use crate::sdm::WorkerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedPoint {
    /// About to read the unclaimed neighborhood of a candidate.
    Characterize(Point),
    /// About to claim cell `cell` (0..9, row-major) of the block around `center`.
    Claim { center: Point, cell: usize },
    /// The claim attempt failed; the worker will retry.
    ClaimRetry { center: Point, cell: usize },
    /// A lowering was written while the block was still claimed.
    Committed { point: Point, from: u8, to: u8 },
    /// The claimed re-check found no target; nothing was written.
    CommitRejected { point: Point },
    /// About to push a neighbor into the shared queue.
    Push(Point),
    /// The worker finished its pass.
    PassDone,
}

pub trait ScheduleHook: Sync {
    fn at(&self, worker: WorkerId, point: SchedPoint);
}

/// Hook that does nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoHook;

impl ScheduleHook for NoHook {
    #[inline(always)]
    fn at(&self, _: WorkerId, _: SchedPoint) {}
}
