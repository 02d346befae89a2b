//! Bounded FIFO of pixels shared by two producers.
//!
//! Two synchronization variants are provided. `Guarded` serializes every
//! operation, including the duplicate check, behind one mutex and parks
//! waiters on a condition variable. `SpinWait` filters duplicates with an
//! atomic flag per pixel and protects the ring with a spin lock; contended
//! or full pushes busy-retry and only yield after [`SPIN_LIMIT`] failures.

use std::cell::UnsafeCell;
use std::collections::VecDeque;
use std::ops::{Deref, DerefMut};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex, MutexGuard};

use thiserror::Error;

use crate::image::Point;
use crate::sdm::WorkerId;

/// Failed spin attempts before a brief yield.
pub const SPIN_LIMIT: u32 = 64;

/// Default ring capacity in points.
pub const DEFAULT_QUEUE_CAPACITY: usize = 4096;

/// Smallest accepted ring capacity.
pub const MIN_QUEUE_CAPACITY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueVariant {
    Guarded,
    SpinWait,
}

impl QueueVariant {
    pub fn name(self) -> &'static str {
        match self {
            QueueVariant::Guarded => "guarded",
            QueueVariant::SpinWait => "spin_wait",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueueError {
    #[error("worker {0} is not a registered producer of this queue")]
    UnregisteredProducer(WorkerId),
    #[error("queue already has two producers; cannot register worker {0}")]
    TooManyProducers(WorkerId),
    #[error("queue capacity {0} is below the minimum of {MIN_QUEUE_CAPACITY}")]
    CapacityTooSmall(usize),
    #[error("point ({x}, {y}) is outside the {width}x{height} grid", x = .0.x, y = .0.y, width = .1, height = .2)]
    OutOfBounds(Point, usize, usize),
}

/// Spin with bounded busy retries, then yield and start over.
#[derive(Debug, Default)]
pub struct SpinBackoff {
    retries: u32,
    total: u64,
}

impl SpinBackoff {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn snooze(&mut self) {
        self.total += 1;
        if self.retries < SPIN_LIMIT {
            self.retries += 1;
            std::hint::spin_loop();
        } else {
            self.retries = 0;
            std::thread::yield_now();
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Test-and-test-and-set lock that never parks.
pub struct SpinLock<T> {
    locked: AtomicBool,
    value: UnsafeCell<T>,
}

// SAFETY: access to `value` is serialized by `locked`.
unsafe impl<T: Send> Sync for SpinLock<T> {}
unsafe impl<T: Send> Send for SpinLock<T> {}

pub struct SpinGuard<'a, T> {
    lock: &'a SpinLock<T>,
}

impl<T> SpinLock<T> {
    pub fn new(value: T) -> Self {
        SpinLock {
            locked: AtomicBool::new(false),
            value: UnsafeCell::new(value),
        }
    }

    /// Acquires the lock, adding failed attempts to `spins`.
    pub fn lock(&self, spins: &mut u64) -> SpinGuard<'_, T> {
        let mut backoff = SpinBackoff::new();
        loop {
            if !self.locked.load(Ordering::Relaxed)
                && self
                    .locked
                    .compare_exchange_weak(false, true, Ordering::Acquire, Ordering::Relaxed)
                    .is_ok()
            {
                *spins += backoff.total();
                return SpinGuard { lock: self };
            }
            backoff.snooze();
        }
    }
}

impl<T> Deref for SpinGuard<'_, T> {
    type Target = T;
    fn deref(&self) -> &T {
        // SAFETY: the guard holds the lock.
        unsafe { &*self.lock.value.get() }
    }
}

impl<T> DerefMut for SpinGuard<'_, T> {
    fn deref_mut(&mut self) -> &mut T {
        // SAFETY: the guard holds the lock exclusively.
        unsafe { &mut *self.lock.value.get() }
    }
}

impl<T> Drop for SpinGuard<'_, T> {
    fn drop(&mut self) {
        self.lock.locked.store(false, Ordering::Release);
    }
}

struct GuardedRing {
    items: VecDeque<u32>,
    flags: Vec<bool>,
}

enum Storage {
    Guarded {
        ring: Mutex<GuardedRing>,
        not_full: Condvar,
    },
    Spin {
        ring: SpinLock<VecDeque<u32>>,
        flags: Vec<AtomicBool>,
    },
}

const NO_PRODUCER: usize = usize::MAX;

/// Outcome counters, readable at any time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueCounters {
    pub accepted: u64,
    pub rejected: u64,
    pub popped: u64,
    pub spins: u64,
}

/// Bounded FIFO of grid points with per-pixel duplicate suppression.
///
/// A point is never held twice: pushing a point that is already queued is
/// rejected without side effects. Popping clears the point's flag so it may
/// be pushed again later.
pub struct SharedNeighborQueue {
    width: usize,
    height: usize,
    capacity: usize,
    variant: QueueVariant,
    producers: [AtomicUsize; 2],
    storage: Storage,
    accepted: AtomicU64,
    rejected: AtomicU64,
    popped: AtomicU64,
    spins: AtomicU64,
}

impl std::fmt::Debug for SharedNeighborQueue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SharedNeighborQueue")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("capacity", &self.capacity)
            .field("variant", &self.variant)
            .field("len", &self.len())
            .finish()
    }
}

impl SharedNeighborQueue {
    pub fn new(
        width: usize,
        height: usize,
        capacity: usize,
        variant: QueueVariant,
    ) -> Result<Self, QueueError> {
        if capacity < MIN_QUEUE_CAPACITY {
            return Err(QueueError::CapacityTooSmall(capacity));
        }
        let pixels = width * height;
        let storage = match variant {
            QueueVariant::Guarded => Storage::Guarded {
                ring: Mutex::new(GuardedRing {
                    items: VecDeque::new(),
                    flags: vec![false; pixels],
                }),
                not_full: Condvar::new(),
            },
            QueueVariant::SpinWait => Storage::Spin {
                ring: SpinLock::new(VecDeque::new()),
                flags: (0..pixels).map(|_| AtomicBool::new(false)).collect(),
            },
        };
        Ok(SharedNeighborQueue {
            width,
            height,
            capacity,
            variant,
            producers: [AtomicUsize::new(NO_PRODUCER), AtomicUsize::new(NO_PRODUCER)],
            storage,
            accepted: AtomicU64::new(0),
            rejected: AtomicU64::new(0),
            popped: AtomicU64::new(0),
            spins: AtomicU64::new(0),
        })
    }

    /// Registers a producer. At most two may be registered at once.
    pub fn register(&self, worker: WorkerId) -> Result<(), QueueError> {
        for slot in &self.producers {
            match slot.compare_exchange(NO_PRODUCER, worker.0, Ordering::AcqRel, Ordering::Acquire) {
                Ok(_) => return Ok(()),
                Err(current) if current == worker.0 => return Ok(()),
                Err(_) => {}
            }
        }
        Err(QueueError::TooManyProducers(worker))
    }

    /// Clears producer registrations so the queue can be reused.
    pub fn reset_producers(&self) {
        for slot in &self.producers {
            slot.store(NO_PRODUCER, Ordering::Release);
        }
    }

    pub fn producers(&self) -> Vec<WorkerId> {
        self.producers
            .iter()
            .map(|s| s.load(Ordering::Acquire))
            .filter(|&v| v != NO_PRODUCER)
            .map(WorkerId)
            .collect()
    }

    fn is_producer(&self, worker: WorkerId) -> bool {
        self.producers
            .iter()
            .any(|s| s.load(Ordering::Acquire) == worker.0)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn variant(&self) -> QueueVariant {
        self.variant
    }

    fn index(&self, p: Point) -> Result<usize, QueueError> {
        if p.x < self.width && p.y < self.height {
            Ok(p.y * self.width + p.x)
        } else {
            Err(QueueError::OutOfBounds(p, self.width, self.height))
        }
    }

    fn point(&self, index: u32) -> Point {
        let index = index as usize;
        Point::new(index % self.width, index / self.width)
    }

    /// Appends `p` unless it is already queued.
    ///
    /// Returns `Ok(true)` when accepted and `Ok(false)` when rejected as a
    /// duplicate. A full queue blocks the caller until a pop frees a slot.
    pub fn push(&self, producer: WorkerId, p: Point) -> Result<bool, QueueError> {
        if !self.is_producer(producer) {
            return Err(QueueError::UnregisteredProducer(producer));
        }
        let index = self.index(p)?;
        let accepted = match &self.storage {
            Storage::Guarded { ring, not_full } => {
                let mut guard = lock_unpoisoned(ring);
                loop {
                    if guard.flags[index] {
                        break false;
                    }
                    if guard.items.len() < self.capacity {
                        guard.flags[index] = true;
                        guard.items.push_back(index as u32);
                        break true;
                    }
                    guard = not_full.wait(guard).unwrap_or_else(|e| e.into_inner());
                }
            }
            Storage::Spin { ring, flags } => {
                if flags[index].swap(true, Ordering::AcqRel) {
                    false
                } else {
                    let mut spins = 0u64;
                    let mut backoff = SpinBackoff::new();
                    loop {
                        let mut items = ring.lock(&mut spins);
                        if items.len() < self.capacity {
                            items.push_back(index as u32);
                            break;
                        }
                        drop(items);
                        backoff.snooze();
                    }
                    spins += backoff.total();
                    if spins > 0 {
                        self.spins.fetch_add(spins, Ordering::Relaxed);
                    }
                    true
                }
            }
        };
        if accepted {
            self.accepted.fetch_add(1, Ordering::Relaxed);
        } else {
            self.rejected.fetch_add(1, Ordering::Relaxed);
        }
        Ok(accepted)
    }

    /// Removes the oldest point, if any.
    pub fn pop(&self) -> Option<Point> {
        let index = match &self.storage {
            Storage::Guarded { ring, not_full } => {
                let mut guard = lock_unpoisoned(ring);
                let index = guard.items.pop_front()?;
                guard.flags[index as usize] = false;
                drop(guard);
                not_full.notify_one();
                index
            }
            Storage::Spin { ring, flags } => {
                let mut spins = 0u64;
                let mut items = ring.lock(&mut spins);
                let index = items.pop_front();
                if let Some(i) = index {
                    flags[i as usize].store(false, Ordering::Release);
                }
                drop(items);
                if spins > 0 {
                    self.spins.fetch_add(spins, Ordering::Relaxed);
                }
                index?
            }
        };
        self.popped.fetch_add(1, Ordering::Relaxed);
        Some(self.point(index))
    }

    /// Pops everything currently queued, oldest first.
    pub fn drain(&self) -> Vec<Point> {
        let indices: Vec<u32> = match &self.storage {
            Storage::Guarded { ring, not_full } => {
                let mut guard = lock_unpoisoned(ring);
                let taken: Vec<u32> = guard.items.drain(..).collect();
                for &i in &taken {
                    guard.flags[i as usize] = false;
                }
                drop(guard);
                not_full.notify_all();
                taken
            }
            Storage::Spin { ring, flags } => {
                let mut spins = 0u64;
                let mut items = ring.lock(&mut spins);
                let taken: Vec<u32> = items.drain(..).collect();
                for &i in &taken {
                    flags[i as usize].store(false, Ordering::Release);
                }
                drop(items);
                taken
            }
        };
        self.popped
            .fetch_add(indices.len() as u64, Ordering::Relaxed);
        indices.into_iter().map(|i| self.point(i)).collect()
    }

    pub fn len(&self) -> usize {
        match &self.storage {
            Storage::Guarded { ring, .. } => lock_unpoisoned(ring).items.len(),
            Storage::Spin { ring, .. } => ring.lock(&mut 0).len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True if `p` is currently queued.
    pub fn contains(&self, p: Point) -> bool {
        let Ok(index) = self.index(p) else {
            return false;
        };
        match &self.storage {
            Storage::Guarded { ring, .. } => lock_unpoisoned(ring).flags[index],
            Storage::Spin { flags, .. } => flags[index].load(Ordering::Acquire),
        }
    }

    pub fn counters(&self) -> QueueCounters {
        QueueCounters {
            accepted: self.accepted.load(Ordering::Relaxed),
            rejected: self.rejected.load(Ordering::Relaxed),
            popped: self.popped.load(Ordering::Relaxed),
            spins: self.spins.load(Ordering::Relaxed),
        }
    }
}

fn lock_unpoisoned<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}
