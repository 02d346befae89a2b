//! Completion order and first-come, first-served pairing of workers.

use std::collections::HashSet;

use thiserror::Error;

use crate::sdm::WorkerId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedulerError {
    #[error("worker {0} has not finished")]
    Unfinished(WorkerId),
    #[error("worker {0} is already paired")]
    AlreadyPaired(WorkerId),
    #[error("worker {0} finished twice")]
    FinishedTwice(WorkerId),
    #[error("cannot pair worker {0} with itself")]
    SelfPair(WorkerId),
}

/// One merge: two finished workers (or one, for an unmatched worker) and
/// the successor that takes over their queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pairing {
    pub first: WorkerId,
    pub second: Option<WorkerId>,
    pub successor: WorkerId,
}

/// Records finish order and pairings for one round.
#[derive(Debug, Clone, Default)]
pub struct CompletionLedger {
    finished: Vec<WorkerId>,
    pairings: Vec<Pairing>,
    paired: HashSet<WorkerId>,
    next_id: usize,
}

impl CompletionLedger {
    /// `first_successor_id` is the id handed to the first successor; leaf
    /// workers use ids below it.
    pub fn new(first_successor_id: usize) -> Self {
        CompletionLedger {
            next_id: first_successor_id,
            ..Default::default()
        }
    }

    pub fn finish(&mut self, worker: WorkerId) -> Result<(), SchedulerError> {
        if self.finished.contains(&worker) {
            return Err(SchedulerError::FinishedTwice(worker));
        }
        self.finished.push(worker);
        Ok(())
    }

    pub fn finished(&self) -> &[WorkerId] {
        &self.finished
    }

    pub fn pairings(&self) -> &[Pairing] {
        &self.pairings
    }

    pub fn is_finished(&self, worker: WorkerId) -> bool {
        self.finished.contains(&worker)
    }

    fn check_ready(&self, w: WorkerId) -> Result<(), SchedulerError> {
        if !self.is_finished(w) {
            return Err(SchedulerError::Unfinished(w));
        }
        if self.paired.contains(&w) {
            return Err(SchedulerError::AlreadyPaired(w));
        }
        Ok(())
    }

    fn allocate(&mut self) -> WorkerId {
        let id = WorkerId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Pairs two finished, unpaired workers and returns their successor.
    /// The pair is recorded in the order the two workers finished.
    pub fn merge(&mut self, a: WorkerId, b: WorkerId) -> Result<WorkerId, SchedulerError> {
        if a == b {
            return Err(SchedulerError::SelfPair(a));
        }
        self.check_ready(a)?;
        self.check_ready(b)?;
        let pos = |w| self.finished.iter().position(|&f| f == w);
        let (first, second) = if pos(a) < pos(b) { (a, b) } else { (b, a) };
        let successor = self.allocate();
        self.paired.insert(a);
        self.paired.insert(b);
        self.pairings.push(Pairing {
            first,
            second: Some(second),
            successor,
        });
        Ok(successor)
    }

    /// Hands a lone finished worker's queue to a successor.
    pub fn promote(&mut self, a: WorkerId) -> Result<WorkerId, SchedulerError> {
        self.check_ready(a)?;
        let successor = self.allocate();
        self.paired.insert(a);
        self.pairings.push(Pairing {
            first: a,
            second: None,
            successor,
        });
        Ok(successor)
    }
}
