#![allow(dead_code)]

pub mod interleave;

use std::collections::VecDeque;

use lskel::bench::EngineKind;
use lskel::synth::{gen_synthetic, SyntheticKind, SyntheticSpec};
use lskel::{GrayImage, Lambda, Point};

const N8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
const N4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

/// Labels connected components of `cells` (true = member) on a `w x h` grid.
pub fn count_grid_components(cells: &[bool], w: usize, h: usize, eight: bool) -> usize {
    let steps: &[(isize, isize)] = if eight { &N8 } else { &N4 };
    let mut seen = vec![false; cells.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..cells.len() {
        if !cells[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in steps {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if cells[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    count
}

/// 3x3 grid (center excluded) of a ring mask, bit i at the i-th ring offset.
fn ring_grid(mask: u8) -> [bool; 9] {
    let mut g = [false; 9];
    for (bit, (dx, dy)) in N8.iter().enumerate() {
        g[((dy + 1) * 3 + dx + 1) as usize] = mask >> bit & 1 == 1;
    }
    g
}

/// T by flood fill: 8-components of the set neighbors.
pub fn oracle_t(mask: u8) -> u8 {
    count_grid_components(&ring_grid(mask), 3, 3, true) as u8
}

/// T-bar by flood fill: 4-components of the unset neighbors (center
/// excluded) that contain an edge neighbor of the center.
pub fn oracle_t_bar(mask: u8) -> u8 {
    let set = ring_grid(mask);
    let mut cells: [bool; 9] = std::array::from_fn(|i| i != 4 && !set[i]);
    let mut count = 0;
    for start in [1, 3, 5, 7] {
        if !cells[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        cells[start] = false;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % 3, i / 3);
            for (nx, ny) in [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)] {
                if nx < 3 && ny < 3 && cells[ny * 3 + nx] {
                    cells[ny * 3 + nx] = false;
                    stack.push(ny * 3 + nx);
                }
            }
        }
    }
    count
}

/// For each threshold level present in `img`, the 8-component count of
/// the section `v >= k` and the 4-component count of its complement.
pub fn section_topology(img: &GrayImage, levels: &[u8]) -> Vec<(u8, usize, usize)> {
    let (w, h) = (img.width(), img.height());
    levels
        .iter()
        .map(|&k| {
            let fg: Vec<bool> = img.as_slice().iter().map(|&v| v >= k).collect();
            let bg: Vec<bool> = fg.iter().map(|b| !b).collect();
            (k, count_grid_components(&fg, w, h, true), count_grid_components(&bg, w, h, false))
        })
        .collect()
}

/// Distinct nonzero levels of `img`, ascending.
pub fn levels_of(img: &GrayImage) -> Vec<u8> {
    let mut present = [false; 256];
    for &v in img.as_slice() {
        present[v as usize] = true;
    }
    (1..=255u8).filter(|&v| present[v as usize]).collect()
}

pub fn synth(spec: &str) -> GrayImage {
    gen_synthetic(&spec.parse::<SyntheticSpec>().unwrap()).unwrap()
}

/// Reference corpus: fixtures, generator kinds and seeded noise at several
/// sizes, one 512x512 image of each heavy kind.
pub fn corpus() -> Vec<(String, GrayImage)> {
    let mut specs: Vec<SyntheticSpec> = Vec::new();
    for &(w, h) in &[(3, 3), (5, 4), (16, 16), (33, 20), (64, 64)] {
        specs.push(SyntheticSpec::constant(w, h, 77));
        specs.push(SyntheticSpec::uniform_random(w, h, (w * h) as u64, 255));
    }
    for &(n, seed) in &[(1usize, 1u64), (5, 2), (20, 3), (40, 4)] {
        specs.push(SyntheticSpec::isolated_peaks(64, 64, 10, n, seed));
        specs.push(SyntheticSpec::isolated_peaks(64, 64, 3, n, seed + 10));
    }
    for &c in &[4u8, 5, 6, 8, 10, 20] {
        specs.push(SyntheticSpec::ridge(40, 9, c));
    }
    for &(w, h) in &[(9, 9), (32, 32), (100, 60)] {
        specs.push(SyntheticSpec::binary_cross(w, h));
    }
    for seed in 0..18u64 {
        let max = [3u8, 15, 255][seed as usize % 3];
        specs.push(SyntheticSpec {
            kind: SyntheticKind::UniformRandom { min: 0, max, seed },
            width: 24 + 8 * seed as usize,
            height: 48 - 2 * seed as usize,
        });
    }
    for seed in 0..4u64 {
        specs.push(SyntheticSpec::uniform_random(128, 128, 100 + seed, [7, 63, 255, 255][seed as usize]));
    }
    specs.push(SyntheticSpec::uniform_random(256, 256, 7, 255));
    specs.push(SyntheticSpec::binary_cross(256, 256));
    specs.push(SyntheticSpec::isolated_peaks(512, 512, 10, 200, 5));
    specs.push(SyntheticSpec::uniform_random(512, 512, 8, 255));
    let mut out: Vec<(String, GrayImage)> = specs.iter().map(|s| (s.to_string(), gen_synthetic(s).unwrap())).collect();
    let mut smooth = gen_synthetic(&SyntheticSpec::uniform_random(96, 96, 42, 255)).unwrap();
    smooth = blur(&smooth);
    out.push(("blurred noise 96x96".into(), smooth));
    let grad = lskel::gradient3x3(&gen_synthetic(&SyntheticSpec::binary_cross(64, 64)).unwrap());
    out.push(("gradient of cross 64x64".into(), grad));
    out
}

/// 3x3 box filter, borders copied.
pub fn blur(img: &GrayImage) -> GrayImage {
    let mut out = img.clone();
    for p in img.interior_points() {
        let mut s = 0u32;
        for dy in 0..3 {
            for dx in 0..3 {
                s += u32::from(img.get(Point::new(p.x + dx - 1, p.y + dy - 1)));
            }
        }
        out.set(p, (s / 9) as u8);
    }
    out
}

/// Every engine configuration exercised by the property checks.
pub fn engine_matrix() -> Vec<(EngineKind, usize)> {
    let mut v = vec![(EngineKind::Seq, 1)];
    for e in [EngineKind::Guarded, EngineKind::SpinWait] {
        for n in [1, 2, 4, 8] {
            v.push((e, n));
        }
    }
    v
}

pub fn lambdas() -> [Lambda; 3] {
    [Lambda(0), Lambda(5), Lambda(10)]
}

#[derive(Debug, Clone, Copy)]
pub struct StressReport {
    pub pushes: u64,
    pub accepted: u64,
    pub duplicates: u64,
    pub popped: u64,
}

/// Two producers each run `ops` random pushes and pops against one queue
/// while a third thread consumes. Every accepted point must come out
/// exactly once.
pub fn stress_queue(variant: lskel::QueueVariant, ops: usize, seed: u64) -> Result<StressReport, String> {
    use lskel::sdm::{SharedNeighborQueue, WorkerId};
    use rand::{Rng, SeedableRng};
    use std::sync::atomic::{AtomicBool, Ordering};

    let (w, h) = (34usize, 34usize);
    let interior = (w - 2) * (h - 2);
    let q = SharedNeighborQueue::new(w, h, interior, variant).map_err(|e| e.to_string())?;
    q.register(WorkerId(0)).unwrap();
    q.register(WorkerId(1)).unwrap();
    let done = AtomicBool::new(false);

    struct Tally {
        accepted: Vec<u32>,
        popped: Vec<u32>,
        pushes: u64,
        rejected: u64,
    }
    let idx = |p: Point| (p.y - 1) * (w - 2) + (p.x - 1);

    let (producers, consumer_pops) = std::thread::scope(|s| {
        let producers: Vec<_> = (0..2)
            .map(|t| {
                let q = &q;
                s.spawn(move || {
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed * 2 + t as u64);
                    let mut tally = Tally {
                        accepted: vec![0; interior],
                        popped: vec![0; interior],
                        pushes: 0,
                        rejected: 0,
                    };
                    for _ in 0..ops {
                        if rng.gen_bool(0.6) {
                            let p = Point::new(rng.gen_range(1..w - 1), rng.gen_range(1..h - 1));
                            tally.pushes += 1;
                            if q.push(WorkerId(t), p).unwrap() {
                                tally.accepted[idx(p)] += 1;
                            } else {
                                tally.rejected += 1;
                            }
                        } else if let Some(p) = q.pop() {
                            tally.popped[idx(p)] += 1;
                        }
                    }
                    tally
                })
            })
            .collect();
        let consumer = {
            let (q, done) = (&q, &done);
            s.spawn(move || {
                let mut popped = vec![0u32; interior];
                while !done.load(Ordering::Acquire) {
                    match q.pop() {
                        Some(p) => popped[idx(p)] += 1,
                        None => std::thread::yield_now(),
                    }
                }
                popped
            })
        };
        let tallies: Vec<Tally> = producers.into_iter().map(|j| j.join().unwrap()).collect();
        done.store(true, Ordering::Release);
        (tallies, consumer.join().unwrap())
    });

    let mut popped = consumer_pops;
    for p in q.drain() {
        popped[idx(p)] += 1;
    }
    let mut accepted = vec![0u32; interior];
    let (mut pushes, mut rejected) = (0, 0);
    for t in &producers {
        pushes += t.pushes;
        rejected += t.rejected;
        for i in 0..interior {
            accepted[i] += t.accepted[i];
            popped[i] += t.popped[i];
        }
    }
    if let Some(i) = (0..interior).find(|&i| accepted[i] != popped[i]) {
        return Err(format!(
            "point #{i}: accepted {} times, popped {} times",
            accepted[i], popped[i]
        ));
    }
    let c = q.counters();
    let total_accepted: u64 = accepted.iter().map(|&a| u64::from(a)).sum();
    if c.accepted != total_accepted || c.rejected != rejected || c.popped != total_accepted {
        return Err(format!("counters {c:?} disagree with tallies ({total_accepted} accepted, {rejected} rejected)"));
    }
    if !q.is_empty() {
        return Err("queue not empty after drain".into());
    }

    // both producers race to push every point with no pops in between
    let all: Vec<Point> = (1..h - 1).flat_map(|y| (1..w - 1).map(move |x| Point::new(x, y))).collect();
    let wins: Vec<Vec<Point>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..2)
            .map(|t| {
                let (q, all) = (&q, &all);
                s.spawn(move || {
                    let order: Box<dyn Iterator<Item = &Point>> =
                        if t == 0 { Box::new(all.iter()) } else { Box::new(all.iter().rev()) };
                    order.filter(|&&p| q.push(WorkerId(t), p).unwrap()).copied().collect()
                })
            })
            .collect();
        handles.into_iter().map(|j| j.join().unwrap()).collect()
    });
    let mut won = vec![0u32; interior];
    for p in wins.iter().flatten() {
        won[idx(*p)] += 1;
    }
    if won.iter().any(|&n| n != 1) {
        return Err("a point was accepted twice while queued".into());
    }
    let mut drained = q.drain();
    drained.sort_by_key(|&p| idx(p));
    if drained != all {
        return Err("racing pushes did not leave each point queued once".into());
    }
    Ok(StressReport {
        pushes,
        accepted: total_accepted,
        duplicates: rejected,
        popped: total_accepted,
    })
}
