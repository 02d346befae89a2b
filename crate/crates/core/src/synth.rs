//! Synthetic test images and a 3x3 morphological gradient.
//!
//! Specs parse from `kind:WxH[:key=value,...]`, for example
//! `isolated_peaks:64x64:contrast=10,count=3,seed=1`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::image::{GrayImage, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Constant { level: u8 },
    /// `count` single-pixel peaks of `contrast` above `background`, with
    /// pairwise disjoint 3x3 neighborhoods inside the frame.
    IsolatedPeaks {
        contrast: u8,
        count: usize,
        background: u8,
        seed: u64,
    },
    /// One-pixel-wide horizontal ridge of `contrast` on `background`,
    /// spanning the middle half of the middle row.
    Ridge { contrast: u8, background: u8 },
    /// Centered 0/255 cross with arms of the given thickness.
    BinaryCross { thickness: usize },
    /// Independent samples uniform on `min..=max`.
    UniformRandom { min: u8, max: u8, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("synthetic images must be at least 3x3, got {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("cannot place {count} isolated peaks in a {width}x{height} image")]
    TooManyPeaks { count: usize, width: usize, height: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid synthetic spec {spec:?}: {reason}")]
    Parse { spec: String, reason: String },
}

impl SyntheticSpec {
    pub fn constant(width: usize, height: usize, level: u8) -> Self {
        Self::of(SyntheticKind::Constant { level }, width, height)
    }

    pub fn isolated_peaks(width: usize, height: usize, contrast: u8, count: usize, seed: u64) -> Self {
        Self::of(
            SyntheticKind::IsolatedPeaks {
                contrast,
                count,
                background: 0,
                seed,
            },
            width,
            height,
        )
    }

    pub fn ridge(width: usize, height: usize, contrast: u8) -> Self {
        Self::of(SyntheticKind::Ridge { contrast, background: 0 }, width, height)
    }

    pub fn binary_cross(width: usize, height: usize) -> Self {
        let thickness = (width.min(height) / 8).max(1);
        Self::of(SyntheticKind::BinaryCross { thickness }, width, height)
    }

    pub fn uniform_random(width: usize, height: usize, seed: u64, max: u8) -> Self {
        Self::of(SyntheticKind::UniformRandom { min: 0, max, seed }, width, height)
    }

    fn of(kind: SyntheticKind, width: usize, height: usize) -> Self {
        SyntheticSpec { kind, width, height }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SyntheticKind::Constant { .. } => "constant",
            SyntheticKind::IsolatedPeaks { .. } => "isolated_peaks",
            SyntheticKind::Ridge { .. } => "ridge",
            SyntheticKind::BinaryCross { .. } => "binary_cross",
            SyntheticKind::UniformRandom { .. } => "uniform_random",
        }
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}x{}:", self.kind_name(), self.width, self.height)?;
        match self.kind {
            SyntheticKind::Constant { level } => write!(f, "level={level}"),
            SyntheticKind::IsolatedPeaks {
                contrast,
                count,
                background,
                seed,
            } => write!(f, "contrast={contrast},count={count},background={background},seed={seed}"),
            SyntheticKind::Ridge { contrast, background } => {
                write!(f, "contrast={contrast},background={background}")
            }
            SyntheticKind::BinaryCross { thickness } => write!(f, "thickness={thickness}"),
            SyntheticKind::UniformRandom { min, max, seed } => write!(f, "min={min},max={max},seed={seed}"),
        }
    }
}

impl FromStr for SyntheticSpec {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| SynthError::Parse {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let mut parts = s.splitn(3, ':');
        let kind = parts.next().unwrap_or_default();
        let dims = parts.next().ok_or_else(|| fail("missing WxH"))?;
        let (w, h) = dims.split_once(['x', 'X']).ok_or_else(|| fail("dimensions must be WxH"))?;
        let width: usize = w.parse().map_err(|_| fail("bad width"))?;
        let height: usize = h.parse().map_err(|_| fail("bad height"))?;

        let mut params = BTreeMap::new();
        for kv in parts.next().unwrap_or("").split(',').filter(|kv| !kv.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| fail("parameters must be key=value"))?;
            let v: u64 = v.parse().map_err(|_| fail(&format!("{k} must be a non-negative integer")))?;
            params.insert(k.to_string(), v);
        }
        let mut take = |key: &str, default: u64| params.remove(key).unwrap_or(default);
        let level = |v: u64, key: &str| u8::try_from(v).map_err(|_| fail(&format!("{key} must be at most 255")));

        let spec = match kind {
            "constant" => SyntheticSpec::constant(width, height, level(take("level", 128), "level")?),
            "isolated_peaks" => SyntheticSpec::of(
                SyntheticKind::IsolatedPeaks {
                    contrast: level(take("contrast", 10), "contrast")?,
                    count: take("count", 1) as usize,
                    background: level(take("background", 0), "background")?,
                    seed: take("seed", 0),
                },
                width,
                height,
            ),
            "ridge" => SyntheticSpec::of(
                SyntheticKind::Ridge {
                    contrast: level(take("contrast", 100), "contrast")?,
                    background: level(take("background", 0), "background")?,
                },
                width,
                height,
            ),
            "binary_cross" => {
                let default = SyntheticSpec::binary_cross(width, height);
                let SyntheticKind::BinaryCross { thickness } = default.kind else { unreachable!() };
                SyntheticSpec::of(
                    SyntheticKind::BinaryCross {
                        thickness: take("thickness", thickness as u64) as usize,
                    },
                    width,
                    height,
                )
            }
            "uniform_random" => SyntheticSpec::of(
                SyntheticKind::UniformRandom {
                    min: level(take("min", 0), "min")?,
                    max: level(take("max", 255), "max")?,
                    seed: take("seed", 0),
                },
                width,
                height,
            ),
            _ => return Err(fail("unknown kind")),
        };
        if let Some(k) = params.keys().next() {
            return Err(fail(&format!("unknown parameter {k}")));
        }
        Ok(spec)
    }
}

/// Renders `spec`. Deterministic for a given spec, seed included.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<GrayImage, SynthError> {
    let (w, h) = (spec.width, spec.height);
    if w < 3 || h < 3 {
        return Err(SynthError::InvalidDimensions { width: w, height: h });
    }
    let filled = |level| GrayImage::filled(w, h, level).expect("nonempty");
    match spec.kind {
        SyntheticKind::Constant { level } => Ok(filled(level)),
        SyntheticKind::IsolatedPeaks {
            contrast,
            count,
            background,
            seed,
        } => {
            let peak = background
                .checked_add(contrast)
                .ok_or_else(|| SynthError::InvalidParam("background + contrast exceeds 255".into()))?;
            let mut img = filled(background);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut placed: Vec<Point> = Vec::with_capacity(count);
            let attempts = 1000 * (count + 1);
            for _ in 0..attempts {
                if placed.len() == count {
                    break;
                }
                let p = Point::new(rng.gen_range(1..w - 1), rng.gen_range(1..h - 1));
                if placed.iter().all(|q| p.x.abs_diff(q.x) >= 3 || p.y.abs_diff(q.y) >= 3) {
                    placed.push(p);
                }
            }
            if placed.len() < count {
                return Err(SynthError::TooManyPeaks { count, width: w, height: h });
            }
            for p in placed {
                img.set(p, peak);
            }
            Ok(img)
        }
        SyntheticKind::Ridge { contrast, background } => {
            let top = background
                .checked_add(contrast)
                .ok_or_else(|| SynthError::InvalidParam("background + contrast exceeds 255".into()))?;
            let mut img = filled(background);
            let (lo, hi) = ((w / 4).max(1), (w - w / 4).min(w - 1));
            for x in lo..hi.max(lo + 1) {
                img.set(Point::new(x, h / 2), top);
            }
            Ok(img)
        }
        SyntheticKind::BinaryCross { thickness } => {
            if thickness == 0 {
                return Err(SynthError::InvalidParam("thickness must be positive".into()));
            }
            let mut img = filled(0);
            let band = |len: usize| {
                let lo = len.saturating_sub(thickness) / 2;
                lo..(lo + thickness).min(len)
            };
            let (cols, rows) = (band(w), band(h));
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    if cols.contains(&x) || rows.contains(&y) {
                        img.set(Point::new(x, y), 255);
                    }
                }
            }
            Ok(img)
        }
        SyntheticKind::UniformRandom { min, max, seed } => {
            if min > max {
                return Err(SynthError::InvalidParam(format!("min {min} exceeds max {max}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = (0..w * h).map(|_| rng.gen_range(min..=max)).collect();
            Ok(GrayImage::new(w, h, data).expect("dimensions checked"))
        }
    }
}

/// Max minus min over each interior pixel's 3x3 block; border pixels are 0.
pub fn gradient3x3(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut out = GrayImage::filled(w, h, 0).expect("same dimensions");
    if w < 3 || h < 3 {
        return out;
    }
    let src = img.as_slice();
    let row = |y: usize, dst: &mut [u8]| {
        for x in 1..w - 1 {
            let (mut lo, mut hi) = (u8::MAX, u8::MIN);
            for yy in y - 1..=y + 1 {
                for &v in &src[yy * w + x - 1..=yy * w + x + 1] {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            dst[x] = hi - lo;
        }
    };
    let interior = &mut out.as_mut_slice()[w..w * (h - 1)];
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        interior.par_chunks_mut(w).enumerate().for_each(|(i, dst)| row(i + 1, dst));
    }
    #[cfg(not(feature = "parallel"))]
    {
        interior.chunks_mut(w).enumerate().for_each(|(i, dst)| row(i + 1, dst));
    }
    out
}
