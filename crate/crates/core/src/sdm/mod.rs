//! Split-distribute-merge parallel thinning.
//!
//! Each round splits the interior rows into one zone per worker. Workers
//! characterize their candidates, lower targets under the claim protocol
//! and push the neighbors of every lowered point into a queue shared with
//! exactly one other worker. When both producers of a queue have finished,
//! a successor takes the drained queue as its candidates and the union of
//! both search spaces as its own. Successors pair up first-come,
//! first-served until one remains; its pushes seed the next round. A round
//! whose last worker lowered nothing ends with a full rescan, and the run
//! stops once that rescan finds no target.

pub mod claims;
pub mod engine;
pub mod ledger;
pub mod queue;
pub mod schedule;
pub mod zone;

use std::fmt;

use thiserror::Error;

use crate::topology::Lambda;

pub use claims::{commit_lower, commit_lower_with, CommitOutcome, PixelClaimTable, SharedImage};
pub use engine::{
    run_parallel, worker_pass, ParallelEngine, PassContext, PassStats, RoundTrace, RunStats, WorkSets,
};
pub use ledger::{CompletionLedger, Pairing, SchedulerError};
pub use queue::{QueueError, QueueVariant, SharedNeighborQueue, DEFAULT_QUEUE_CAPACITY};
pub use schedule::{NoHook, SchedPoint, ScheduleHook};
pub use zone::{split, SearchSpace, Zone};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct WorkerId(pub usize);

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("cannot split {interior_rows} interior rows into {zones} zones")]
    TooManyZones { zones: usize, interior_rows: usize },
    #[error("thread count must be at least 1")]
    NoThreads,
    #[error("queue capacity {0} is below the minimum of 8")]
    CapacityTooSmall(usize),
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

/// Parallel engine settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub threads: usize,
    pub lambda: Lambda,
    pub variant: QueueVariant,
    /// Lower bound on each shared queue's ring capacity.
    pub queue_capacity: usize,
}

impl EngineConfig {
    pub fn new(threads: usize, lambda: Lambda, variant: QueueVariant) -> Self {
        EngineConfig {
            threads,
            lambda,
            variant,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.threads == 0 {
            return Err(EngineError::NoThreads);
        }
        if self.queue_capacity < queue::MIN_QUEUE_CAPACITY {
            return Err(EngineError::CapacityTooSmall(self.queue_capacity));
        }
        Ok(())
    }
}
