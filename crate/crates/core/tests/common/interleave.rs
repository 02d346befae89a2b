//! Stateless exploration of two-worker schedules.
//!
//! Each worker runs `worker_pass` on its own thread but may only move
//! between two hook points when the controller grants it. Schedules are
//! enumerated depth first with a bound on voluntary preemptions; a failed
//! claim always hands control to the other worker.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use lskel::sdm::{
    worker_pass, PassContext, PixelClaimTable, QueueVariant, SchedPoint, ScheduleHook, SearchSpace,
    SharedImage, SharedNeighborQueue, WorkSets, WorkerId,
};
use lskel::skeleton::SkeletonTarget;
use lskel::topology::Neighborhood;
use lskel::{GrayImage, Lambda, Point};

const WORKERS: usize = 2;
const STEP_LIMIT: usize = 5_000;
const QUIESCE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Default)]
struct Gate {
    parked: [Option<SchedPoint>; WORKERS],
    finished: [bool; WORKERS],
    grant: Option<usize>,
    log: Vec<(usize, SchedPoint)>,
}

struct Turnstile {
    gate: Mutex<Gate>,
    cv: Condvar,
}

impl ScheduleHook for Turnstile {
    fn at(&self, worker: WorkerId, point: SchedPoint) {
        let mut g = self.gate.lock().unwrap();
        g.parked[worker.0] = Some(point);
        g.log.push((worker.0, point));
        self.cv.notify_all();
        while g.grant != Some(worker.0) {
            g = self.cv.wait(g).unwrap();
        }
        g.grant = None;
    }
}

#[derive(Debug)]
pub enum Failure {
    Livelock { schedule: Vec<usize> },
    InvalidLowering { schedule: Vec<usize>, detail: String },
    Mismatch { schedule: Vec<usize>, detail: String },
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Exploration {
    pub schedules: usize,
    pub max_steps: usize,
    pub commits: usize,
    pub claim_conflicts: usize,
}

/// One decision: index chosen among `options` and whether index 1 costs a preemption.
#[derive(Clone, Copy)]
struct Decision {
    chosen: usize,
    options: usize,
    alt_is_preemption: bool,
}

struct Outcome {
    decisions: Vec<Decision>,
    log: Vec<(usize, SchedPoint)>,
    image: GrayImage,
    claimed_after: usize,
}

fn run_once(img: &GrayImage, lambda: Lambda, variant: QueueVariant, prefix: &[usize]) -> Result<Outcome, Failure> {
    let (w, h) = (img.width(), img.height());
    let zones = lskel::sdm::split(img, WORKERS).expect("image has two interior rows");
    let image = SharedImage::from_image(img);
    let claims = PixelClaimTable::new(w, h);
    let queue = SharedNeighborQueue::new(w, h, 8.max((w - 2) * (h - 2)), variant).unwrap();
    for z in &zones {
        queue.register(z.owner).unwrap();
    }
    let hook = Turnstile {
        gate: Mutex::new(Gate::default()),
        cv: Condvar::new(),
    };
    let ctx = PassContext {
        image: &image,
        claims: &claims,
        lambda,
        target: &SkeletonTarget,
        hook: &hook,
    };

    let mut decisions = Vec::new();
    let result = thread::scope(|s| {
        for z in &zones {
            let (ctx, queue, hook) = (ctx, &queue, &hook);
            let zone = *z;
            s.spawn(move || {
                let cands: Vec<Point> = (zone.row_lo..zone.row_hi)
                    .flat_map(|y| (1..w - 1).map(move |x| Point::new(x, y)))
                    .collect();
                let mut work = WorkSets::new(SearchSpace::from_zone(zone), cands);
                worker_pass(ctx, zone.owner, &mut work, queue);
                let mut g = hook.gate.lock().unwrap();
                g.finished[zone.owner.0] = true;
                hook.cv.notify_all();
            });
        }

        let mut last: Option<usize> = None;
        let mut step = 0;
        loop {
            let mut g = hook.gate.lock().unwrap();
            loop {
                if (0..WORKERS).all(|i| g.finished[i] || g.parked[i].is_some()) {
                    break;
                }
                let (ng, timeout) = hook.cv.wait_timeout(g, QUIESCE_TIMEOUT).unwrap();
                g = ng;
                if timeout.timed_out() {
                    let schedule: Vec<usize> = decisions.iter().map(|d: &Decision| d.chosen).collect();
                    stuck(&format!(
                        "deadlock: workers blocked outside hook points, parked {:?}, finished {:?}, schedule {schedule:?}",
                        g.parked, g.finished
                    ));
                }
            }
            let runnable: Vec<usize> = (0..WORKERS).filter(|&i| !g.finished[i]).collect();
            if runnable.is_empty() {
                break Ok(());
            }
            step += 1;
            if step > STEP_LIMIT {
                // let both finish freely to unwind the threads
                let schedule = decisions.iter().map(|d: &Decision| d.chosen).collect();
                return_free(&hook, g);
                break Err(Failure::Livelock { schedule });
            }
            let retrying = |i: usize| matches!(g.parked[i], Some(SchedPoint::ClaimRetry { .. }));
            let order: Vec<usize> = match last {
                Some(l) if runnable.contains(&l) && retrying(l) && runnable.len() > 1 => {
                    runnable.iter().copied().filter(|&i| i != l).collect()
                }
                Some(l) if runnable.contains(&l) => {
                    let mut o = vec![l];
                    o.extend(runnable.iter().copied().filter(|&i| i != l));
                    o
                }
                _ => runnable.clone(),
            };
            let alt_is_preemption = matches!(last, Some(l) if order[0] == l);
            let idx = prefix.get(decisions.len()).copied().unwrap_or(0);
            decisions.push(Decision {
                chosen: idx,
                options: order.len(),
                alt_is_preemption,
            });
            let w = order[idx];
            last = Some(w);
            g.parked[w] = None;
            g.grant = Some(w);
            hook.cv.notify_all();
        }
    });
    result?;

    let log = hook.gate.into_inner().unwrap().log;
    Ok(Outcome {
        decisions,
        log,
        image: image.snapshot(),
        claimed_after: claims.claimed_count(),
    })
}

/// Lets every parked worker run to completion without further control.
fn return_free(hook: &Turnstile, g: std::sync::MutexGuard<'_, Gate>) {
    drop(g);
    for _ in 0..1_000_000 {
        let mut g = hook.gate.lock().unwrap();
        if g.finished.iter().all(|&f| f) {
            return;
        }
        if let Some(i) = (0..WORKERS).find(|&i| g.parked[i].is_some()) {
            g.parked[i] = None;
            g.grant = Some(i);
            hook.cv.notify_all();
        }
        drop(g);
        thread::yield_now();
    }
    stuck("livelock: workers still running after the step limit");
}

/// Blocked threads cannot be joined, so the whole test process stops.
fn stuck(msg: &str) -> ! {
    eprintln!("{msg}");
    std::process::exit(101)
}

/// Replays the commit log serially and checks every lowering was legal.
fn validate(img: &GrayImage, lambda: Lambda, out: &Outcome) -> Result<usize, String> {
    let mut replay = img.clone();
    let mut commits = 0;
    for &(_, point) in &out.log {
        if let SchedPoint::Committed { point: p, from, to } = point {
            let nb = Neighborhood::of(&replay, p).map_err(|e| e.to_string())?;
            if nb.center != from {
                return Err(format!("{p:?} lowered from {from} but replay holds {}", nb.center));
            }
            if !nb.is_skeleton_target(lambda) {
                return Err(format!("{p:?} at {from} is not a target in the replayed image"));
            }
            if nb.alpha_minus() != to {
                return Err(format!("{p:?} lowered to {to}, expected {}", nb.alpha_minus()));
            }
            replay.set(p, to);
            commits += 1;
        }
    }
    if replay != out.image {
        return Err("final image differs from the serial replay".into());
    }
    if out.claimed_after != 0 {
        return Err(format!("{} claims still held", out.claimed_after));
    }
    Ok(commits)
}

/// Next schedule prefix in depth-first order, or `None` when exhausted.
fn next_prefix(decisions: &[Decision], bound: usize) -> Option<Vec<usize>> {
    for i in (0..decisions.len()).rev() {
        let d = decisions[i];
        if d.chosen + 1 >= d.options {
            continue;
        }
        let used: usize = decisions[..i]
            .iter()
            .filter(|d| d.chosen > 0 && d.alt_is_preemption)
            .count();
        if d.alt_is_preemption && used + 1 > bound {
            continue;
        }
        let mut prefix: Vec<usize> = decisions[..i].iter().map(|d| d.chosen).collect();
        prefix.push(d.chosen + 1);
        return Some(prefix);
    }
    None
}

/// Explores every schedule of the two leaf workers on `img` with at most
/// `bound` voluntary preemptions.
pub fn explore(img: &GrayImage, lambda: Lambda, variant: QueueVariant, bound: usize) -> Result<Exploration, Failure> {
    let mut stats = Exploration::default();
    let mut prefix = Vec::new();
    loop {
        let out = run_once(img, lambda, variant, &prefix)?;
        let schedule: Vec<usize> = out.decisions.iter().map(|d| d.chosen).collect();
        stats.schedules += 1;
        stats.max_steps = stats.max_steps.max(out.decisions.len());
        stats.claim_conflicts += out
            .log
            .iter()
            .filter(|(_, p)| matches!(p, SchedPoint::ClaimRetry { .. }))
            .count();
        match validate(img, lambda, &out) {
            Ok(c) => stats.commits += c,
            Err(detail) => return Err(Failure::InvalidLowering { schedule, detail }),
        }
        if out.log.iter().filter(|(_, p)| *p == SchedPoint::PassDone).count() != WORKERS {
            return Err(Failure::Mismatch {
                schedule,
                detail: "a worker did not report completion".into(),
            });
        }
        match next_prefix(&out.decisions, bound) {
            Some(p) => prefix = p,
            None => return Ok(stats),
        }
    }
}
