use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Instant;

use crate::image::{GrayImage, Point};
use crate::sdm::claims::{commit_lower_with, PixelClaimTable, SharedImage};
use crate::sdm::ledger::{CompletionLedger, Pairing};
use crate::sdm::queue::SharedNeighborQueue;
use crate::sdm::schedule::{NoHook, SchedPoint, ScheduleHook};
use crate::sdm::zone::{split_rows, zone_of_row, SearchSpace, Zone};
use crate::sdm::{EngineConfig, EngineError, WorkerId};
use crate::skeleton::{self, SkeletonTarget, TargetPredicate};
use crate::topology::Lambda;

/// Candidate points and rejects of one worker.
#[derive(Debug, Clone, Default)]
pub struct WorkSets {
    pub candidates: Vec<Point>,
    pub private_rejects: Vec<Point>,
    pub space: SearchSpace,
}

impl WorkSets {
    pub fn new(space: SearchSpace, candidates: Vec<Point>) -> Self {
        WorkSets {
            candidates,
            private_rejects: Vec::new(),
            space,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct PassStats {
    pub examined: u64,
    pub lowered: u64,
    pub pushed: u64,
    pub dedupe_rejections: u64,
    /// Candidates outside the worker's search space, passed on unexamined.
    pub forwarded: u64,
    pub spins: u64,
}

impl PassStats {
    fn add(&mut self, o: &PassStats) {
        self.examined += o.examined;
        self.lowered += o.lowered;
        self.pushed += o.pushed;
        self.dedupe_rejections += o.dedupe_rejections;
        self.forwarded += o.forwarded;
        self.spins += o.spins;
    }
}

/// Shared state every worker of a run reads.
pub struct PassContext<'a, P: ?Sized, H: ?Sized> {
    pub image: &'a SharedImage,
    pub claims: &'a PixelClaimTable,
    pub lambda: Lambda,
    pub target: &'a P,
    pub hook: &'a H,
}

impl<P: ?Sized, H: ?Sized> Clone for PassContext<'_, P, H> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<P: ?Sized, H: ?Sized> Copy for PassContext<'_, P, H> {}

/// Characterizes every candidate once.
///
/// Targets are lowered (repeatedly, while the claimed re-check still
/// accepts them) and their interior neighbors pushed to `out`. Non-targets
/// and invalidated candidates go to `work.private_rejects`.
pub fn worker_pass<P, H>(
    ctx: PassContext<'_, P, H>,
    worker: WorkerId,
    work: &mut WorkSets,
    out: &SharedNeighborQueue,
) -> PassStats
where
    P: TargetPredicate + ?Sized,
    H: ScheduleHook + ?Sized,
{
    let mut stats = PassStats::default();
    let (w, h) = (ctx.image.width(), ctx.image.height());
    let candidates = std::mem::take(&mut work.candidates);
    for p in candidates {
        if !work.space.contains(p) {
            ctx.hook.at(worker, SchedPoint::Push(p));
            if out.push(worker, p).expect("worker is a registered producer") {
                stats.forwarded += 1;
            } else {
                stats.dedupe_rejections += 1;
            }
            continue;
        }
        stats.examined += 1;
        ctx.hook.at(worker, SchedPoint::Characterize(p));
        if !ctx.target.is_target(&ctx.image.neighborhood(p), ctx.lambda) {
            work.private_rejects.push(p);
            continue;
        }
        let mut lowered = 0;
        loop {
            let outcome =
                commit_lower_with(ctx.image, p, ctx.lambda, ctx.claims, ctx.target, worker, ctx.hook);
            stats.spins += outcome.spins;
            if !outcome.lowered {
                break;
            }
            lowered += 1;
        }
        if lowered == 0 {
            work.private_rejects.push(p);
            continue;
        }
        stats.lowered += lowered;
        for q in skeleton::block_interior(p, w, h) {
            if q == p {
                continue;
            }
            ctx.hook.at(worker, SchedPoint::Push(q));
            if out.push(worker, q).expect("worker is a registered producer") {
                stats.pushed += 1;
            } else {
                stats.dedupe_rejections += 1;
            }
        }
    }
    ctx.hook.at(worker, SchedPoint::PassDone);
    stats
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Output {
    Queue(usize),
    Collector,
}

struct Unit {
    id: WorkerId,
    work: WorkSets,
    output: Output,
}

struct QueueSlot {
    producers: Vec<WorkerId>,
    finished: usize,
}

/// Finish order, merges and root activity of one round.
#[derive(Debug, Clone, Default)]
pub struct RoundTrace {
    pub finished: Vec<WorkerId>,
    pub pairings: Vec<Pairing>,
    pub root: Option<WorkerId>,
    pub root_lowered: u64,
    pub stats: PassStats,
}

struct RoundState {
    ledger: CompletionLedger,
    outputs: HashMap<WorkerId, Output>,
    spaces: HashMap<WorkerId, SearchSpace>,
    slots: Vec<QueueSlot>,
    open: Option<usize>,
    live: usize,
    stats: PassStats,
    root: Option<WorkerId>,
    root_lowered: u64,
}

struct Round<'a, P: ?Sized, H: ?Sized> {
    ctx: PassContext<'a, P, H>,
    queues: &'a [SharedNeighborQueue],
    collector: &'a SharedNeighborQueue,
    state: Mutex<RoundState>,
}

impl RoundState {
    /// Chooses where a newly created unit pushes. `live` already counts it.
    fn attach(
        &mut self,
        id: WorkerId,
        queues: &[SharedNeighborQueue],
        collector: &SharedNeighborQueue,
    ) -> Output {
        let output = if self.live == 1 && self.open.is_none() {
            collector.register(id).expect("collector has a single producer");
            self.root = Some(id);
            Output::Collector
        } else if let Some(q) = self.open {
            let slot = &mut self.slots[q];
            slot.producers.push(id);
            queues[q].register(id).expect("open queue has a free producer slot");
            if slot.producers.len() == 2 {
                self.open = None;
            }
            Output::Queue(q)
        } else {
            let q = self.slots.len();
            assert!(q < queues.len(), "queue pool exhausted");
            self.slots.push(QueueSlot {
                producers: vec![id],
                finished: 0,
            });
            queues[q].register(id).expect("fresh queue");
            self.open = Some(q);
            Output::Queue(q)
        };
        self.outputs.insert(id, output);
        output
    }
}

impl<'a, P, H> Round<'a, P, H>
where
    P: TargetPredicate + ?Sized,
    H: ScheduleHook + ?Sized,
{
    fn new(
        ctx: PassContext<'a, P, H>,
        queues: &'a [SharedNeighborQueue],
        collector: &'a SharedNeighborQueue,
        leaves: usize,
    ) -> Self {
        for q in queues {
            q.reset_producers();
        }
        collector.reset_producers();
        Round {
            ctx,
            queues,
            collector,
            state: Mutex::new(RoundState {
                ledger: CompletionLedger::new(leaves),
                outputs: HashMap::new(),
                spaces: HashMap::new(),
                slots: Vec::new(),
                open: None,
                live: leaves,
                stats: PassStats::default(),
                root: None,
                root_lowered: 0,
            }),
        }
    }

    fn leaves(&self, zones: &[Zone], mut candidates: Vec<Vec<Point>>) -> Vec<Unit> {
        let mut st = self.state.lock().expect("round state");
        zones
            .iter()
            .zip(candidates.iter_mut())
            .map(|(zone, cands)| {
                let output = st.attach(zone.owner, self.queues, self.collector);
                Unit {
                    id: zone.owner,
                    work: WorkSets::new(SearchSpace::from_zone(*zone), std::mem::take(cands)),
                    output,
                }
            })
            .collect()
    }

    fn output(&self, o: Output) -> &SharedNeighborQueue {
        match o {
            Output::Queue(q) => &self.queues[q],
            Output::Collector => self.collector,
        }
    }

    /// Runs a unit and every successor this thread ends up owning.
    fn run_chain(&self, mut unit: Unit) {
        loop {
            let stats = worker_pass(self.ctx, unit.id, &mut unit.work, self.output(unit.output));
            match self.finish(unit, stats) {
                Some(next) => unit = next,
                None => return,
            }
        }
    }

    /// Records completion and, when this completes a queue, returns the successor.
    fn finish(&self, unit: Unit, stats: PassStats) -> Option<Unit> {
        let mut guard = self.state.lock().expect("round state");
        let st = &mut *guard;
        st.live -= 1;
        st.ledger.finish(unit.id).expect("units finish once");
        st.stats.add(&stats);
        let mut space = unit.work.space;
        space.rejects.extend(unit.work.private_rejects);
        st.spaces.insert(unit.id, space);

        let q = match unit.output {
            Output::Collector => {
                st.root_lowered = stats.lowered;
                return None;
            }
            Output::Queue(q) => q,
        };
        let slot = &mut st.slots[q];
        slot.finished += 1;
        let lone_and_final = st.live == 0 && st.open == Some(q);
        if slot.finished < slot.producers.len() || (slot.producers.len() < 2 && !lone_and_final) {
            return None;
        }
        if st.open == Some(q) {
            st.open = None;
        }
        let producers = slot.producers.clone();
        let successor = match producers[..] {
            [a, b] => st.ledger.merge(a, b),
            [a] => st.ledger.promote(a),
            _ => unreachable!("queues have one or two producers"),
        }
        .expect("both producers finished and unpaired");
        let space = producers
            .iter()
            .map(|w| st.spaces.remove(w).expect("finished producer recorded its space"))
            .reduce(SearchSpace::union)
            .expect("at least one producer");
        let candidates = self.queues[q].drain();
        st.live += 1;
        let output = st.attach(successor, self.queues, self.collector);
        Some(Unit {
            id: successor,
            work: WorkSets::new(space, candidates),
            output,
        })
    }

    fn into_trace(self) -> RoundTrace {
        let st = self.state.into_inner().expect("round state");
        RoundTrace {
            finished: st.ledger.finished().to_vec(),
            pairings: st.ledger.pairings().to_vec(),
            root: st.root,
            root_lowered: st.root_lowered,
            stats: st.stats,
        }
    }
}

/// Counters for one parallel run.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct RunStats {
    pub threads: usize,
    pub rounds: u64,
    pub lowerings: u64,
    pub examined: u64,
    pub pushes: u64,
    pub dedupe_rejections: u64,
    pub forwarded: u64,
    pub spin_retries: u64,
    pub merges: u64,
    pub rescans: u64,
    pub wall_ms: f64,
}

/// A configured parallel engine with its worker pool.
pub struct ParallelEngine {
    cfg: EngineConfig,
    #[cfg(feature = "parallel")]
    pool: rayon::ThreadPool,
}

impl std::fmt::Debug for ParallelEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParallelEngine").field("cfg", &self.cfg).finish()
    }
}

impl ParallelEngine {
    pub fn new(cfg: EngineConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        Ok(ParallelEngine {
            cfg,
            #[cfg(feature = "parallel")]
            pool: rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .thread_name(|i| format!("sdm-worker-{i}"))
                .build()
                .map_err(|e| EngineError::Pool(e.to_string()))?,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn run(&self, img: &GrayImage) -> (GrayImage, RunStats) {
        let (out, stats, _) = self.run_with(img, &SkeletonTarget, &NoHook, false);
        (out, stats)
    }

    /// Like [`run`](Self::run) but also returns each round's ledger trace.
    pub fn run_traced(&self, img: &GrayImage) -> (GrayImage, RunStats, Vec<RoundTrace>) {
        self.run_with(img, &SkeletonTarget, &NoHook, true)
    }

    pub fn run_with<P, H>(
        &self,
        img: &GrayImage,
        target: &P,
        hook: &H,
        trace: bool,
    ) -> (GrayImage, RunStats, Vec<RoundTrace>)
    where
        P: TargetPredicate + ?Sized,
        H: ScheduleHook + ?Sized,
    {
        let start = Instant::now();
        let (w, h) = (img.width(), img.height());
        let mut stats = RunStats::default();
        let mut traces = Vec::new();
        if w < 3 || h < 3 {
            stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            return (img.clone(), stats, traces);
        }
        let n = self.cfg.threads.min(h - 2);
        stats.threads = n;
        let zones = split_rows(h, n).expect("thread count clamped to interior rows");
        let image = SharedImage::from_image(img);
        let claims = PixelClaimTable::new(w, h);
        // consumers attach only after both producers finish, so a queue must
        // hold every distinct interior point it could receive
        let capacity = self.cfg.queue_capacity.max((w - 2) * (h - 2));
        let make_queue = || {
            SharedNeighborQueue::new(w, h, capacity, self.cfg.variant)
                .expect("capacity validated")
        };
        let queues: Vec<_> = (0..n).map(|_| make_queue()).collect();
        let collector = make_queue();
        let ctx = PassContext {
            image: &image,
            claims: &claims,
            lambda: self.cfg.lambda,
            target,
            hook,
        };

        let mut candidates: Vec<Vec<Point>> = zones
            .iter()
            .map(|z| {
                (z.row_lo..z.row_hi)
                    .flat_map(|y| (1..w - 1).map(move |x| Point::new(x, y)))
                    .collect()
            })
            .collect();

        loop {
            stats.rounds += 1;
            let round = Round::new(ctx, &queues, &collector, n);
            let leaves = round.leaves(&zones, candidates);
            self.execute(&round, leaves);
            let t = round.into_trace();
            stats.lowerings += t.stats.lowered;
            stats.examined += t.stats.examined;
            stats.pushes += t.stats.pushed;
            stats.dedupe_rejections += t.stats.dedupe_rejections;
            stats.forwarded += t.stats.forwarded;
            stats.spin_retries += t.stats.spins;
            stats.merges += t.pairings.len() as u64;
            if trace {
                traces.push(t);
            }

            let mut next = collector.drain();
            if next.is_empty() {
                stats.rescans += 1;
                next = self.rescan(&image.snapshot(), target);
                if next.is_empty() {
                    break;
                }
            }
            candidates = distribute(next, &zones, w);
        }

        stats.spin_retries += queues
            .iter()
            .chain(std::iter::once(&collector))
            .map(|q| q.counters().spins)
            .sum::<u64>();
        stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        (image.snapshot(), stats, traces)
    }

    #[cfg(feature = "parallel")]
    fn execute<P, H>(&self, round: &Round<'_, P, H>, leaves: Vec<Unit>)
    where
        P: TargetPredicate + ?Sized,
        H: ScheduleHook + ?Sized,
    {
        self.pool.scope(|s| {
            for unit in leaves {
                s.spawn(move |_| round.run_chain(unit));
            }
        });
    }

    #[cfg(not(feature = "parallel"))]
    fn execute<P, H>(&self, round: &Round<'_, P, H>, leaves: Vec<Unit>)
    where
        P: TargetPredicate + ?Sized,
        H: ScheduleHook + ?Sized,
    {
        for unit in leaves {
            round.run_chain(unit);
        }
    }

    fn rescan<P: TargetPredicate + ?Sized>(&self, img: &GrayImage, target: &P) -> Vec<Point> {
        #[cfg(feature = "parallel")]
        {
            self.pool
                .install(|| skeleton::scan_targets(img, self.cfg.lambda, target))
        }
        #[cfg(not(feature = "parallel"))]
        {
            skeleton::scan_targets(img, self.cfg.lambda, target)
        }
    }
}

/// Buckets points by zone, row-major within each zone.
fn distribute(mut points: Vec<Point>, zones: &[Zone], width: usize) -> Vec<Vec<Point>> {
    points.sort_unstable_by_key(|p| p.y * width + p.x);
    points.dedup();
    let mut out = vec![Vec::new(); zones.len()];
    for p in points {
        let z = zone_of_row(zones, p.y).expect("candidates are interior");
        out[z].push(p);
    }
    out
}

/// Builds an engine for `cfg` and thins `img` once.
pub fn run_parallel(img: &GrayImage, cfg: &EngineConfig) -> Result<(GrayImage, RunStats), EngineError> {
    Ok(ParallelEngine::new(*cfg)?.run(img))
}
