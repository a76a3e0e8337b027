//! The Borel-ball cover of the Julia set and the random backward-iteration
//! mesh built on top of it.
//!
//! The cover is anchored at the repelling fixed point `z0`: its centers are
//! the `2^m` points of `T^{-m}(z0)` and every ball has radius `2^{1-m}`.
//! A lattice row starts at a randomly chosen center and walks `depth` steps
//! backwards, picking the `+` or `-` inverse branch with probability 1/2 at
//! each step. Rows are stored in full, so a lattice occupies
//! `ell * (depth + 1) * 16` bytes.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{ensure_finite, ComplexPoint, QuadraticMap};
use crate::error::{Error, Result};
use crate::rng::substream;

/// Default cap on the number of cover centers, as a power of two.
pub const DEFAULT_COVER_CAP_LOG2: u32 = 24;

/// Root of `z^2 + c = z` with `|T'(z)| > 1`, taken in closed form.
///
/// When both roots are repelling the one with the larger multiplier is
/// returned.
pub fn find_repelling_fixed_point(map: &QuadraticMap) -> Result<ComplexPoint> {
    let disc = (ComplexPoint::new(1.0, 0.0) - 4.0 * map.c()).sqrt();
    let roots = [(1.0 + disc) / 2.0, (1.0 - disc) / 2.0];
    let multiplier = |z: &ComplexPoint| map.derivative(*z).norm();
    let best = if multiplier(&roots[0]) >= multiplier(&roots[1]) {
        roots[0]
    } else {
        roots[1]
    };
    if multiplier(&best) > 1.0 + 1e-12 {
        Ok(best)
    } else {
        Err(Error::Domain(format!(
            "c = {} has no repelling fixed point (largest multiplier {})",
            map.c(),
            multiplier(&best)
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BorelCover {
    #[serde(skip)]
    pub map: QuadraticMap,
    pub z0: ComplexPoint,
    pub m_cover: u32,
    /// Index `b` holds the preimage whose branch word is the binary
    /// expansion of `b`, most significant bit first, `0` meaning the `+`
    /// branch. Entries `2j` and `2j + 1` are negatives of each other.
    pub centers: Vec<ComplexPoint>,
    pub radius: f64,
}

impl BorelCover {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

pub fn borel_centers(map: &QuadraticMap, z0: ComplexPoint, m_cover: u32) -> Result<BorelCover> {
    borel_centers_with_cap(map, z0, m_cover, DEFAULT_COVER_CAP_LOG2)
}

pub fn borel_centers_with_cap(
    map: &QuadraticMap,
    z0: ComplexPoint,
    m_cover: u32,
    cap_log2: u32,
) -> Result<BorelCover> {
    if m_cover == 0 {
        return Err(Error::InvalidArgument("m_cover must be at least 1".into()));
    }
    if m_cover > cap_log2 {
        return Err(Error::Resource {
            what: "Borel cover",
            log2: m_cover,
            cap_log2,
        });
    }
    ensure_finite(z0, "anchor point")?;
    let mut level = vec![z0];
    for _ in 0..m_cover {
        let mut next = Vec::with_capacity(level.len() * 2);
        for &p in &level {
            let (plus, minus) = map.inverse_branches(p);
            next.push(plus);
            next.push(minus);
        }
        level = next;
    }
    Ok(BorelCover {
        map: *map,
        z0,
        m_cover,
        centers: level,
        radius: 2f64.powi(1 - m_cover as i32),
    })
}

/// Random mesh of `ell` backward orbits of length `depth`.
///
/// Row `i` is stored as `[row[0], ..., row[depth]]` where `row[0]` is a cover
/// center and `T(row[j]) = row[j - 1]`. Read in reverse, a row is the
/// forward orbit of its deepest point.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    ell: usize,
    depth: usize,
    points: Vec<ComplexPoint>,
    anchor_index: Vec<usize>,
    seed: u64,
}

impl Lattice {
    /// Lattice from explicit rows, e.g. externally generated meshes. All rows
    /// must have the same length.
    pub fn from_rows(rows: Vec<Vec<ComplexPoint>>, anchor_index: Vec<usize>, seed: u64) -> Result<Self> {
        let ell = rows.len();
        if ell == 0 {
            return Err(Error::InvalidArgument("lattice needs at least one row".into()));
        }
        if anchor_index.len() != ell {
            return Err(Error::DimensionMismatch(format!(
                "{} anchors for {ell} rows",
                anchor_index.len()
            )));
        }
        let stride = rows[0].len();
        if stride == 0 || rows.iter().any(|r| r.len() != stride) {
            return Err(Error::DimensionMismatch("rows must be nonempty and of equal length".into()));
        }
        let points: Vec<ComplexPoint> = rows.into_iter().flatten().collect();
        for (k, &z) in points.iter().enumerate() {
            ensure_finite(z, "lattice point").map_err(|e| Error::at("lattice row", k / stride, e))?;
        }
        Ok(Self {
            ell,
            depth: stride - 1,
            points,
            anchor_index,
            seed,
        })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn anchor_index(&self) -> &[usize] {
        &self.anchor_index
    }

    pub fn row(&self, i: usize) -> &[ComplexPoint] {
        let stride = self.depth + 1;
        &self.points[i * stride..(i + 1) * stride]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[ComplexPoint]> {
        self.points.chunks_exact(self.depth + 1)
    }

    /// First `len` points of the forward orbit of the deepest point of row `i`.
    pub fn forward_trajectory(&self, i: usize, len: usize) -> Vec<ComplexPoint> {
        self.row(i).iter().rev().take(len).copied().collect()
    }

    /// Sum over steps of `|T(row[j]) - row[j-1]|` for row `i`.
    ///
    /// Inverse branches contract on the Julia set, so this bounds how far the
    /// stored row can drift from the exact backward orbit of `row[0]` with the
    /// same branch word. Iterating `T` forward from `row[depth]` instead would
    /// amplify roundoff by `|T'| > 1` at every step.
    pub fn forward_recovery_drift(&self, map: &QuadraticMap, i: usize) -> f64 {
        self.row(i)
            .windows(2)
            .map(|w| (map.apply(w[1]) - w[0]).norm())
            .sum()
    }

    /// Largest single-step defect `|T(row[j]) - row[j-1]|` over the lattice.
    pub fn max_step_defect(&self, map: &QuadraticMap) -> f64 {
        self.rows()
            .flat_map(|row| row.windows(2).map(|w| (map.apply(w[1]) - w[0]).norm()))
            .fold(0.0, f64::max)
    }
}

pub fn make_lattice(cover: &BorelCover, ell: usize, depth: usize, seed: u64) -> Result<Lattice> {
    if ell == 0 {
        return Err(Error::InvalidArgument("lattice needs at least one row".into()));
    }
    if cover.is_empty() {
        return Err(Error::InvalidArgument("cover has no centers".into()));
    }
    let stride = depth + 1;
    let mut points = vec![ComplexPoint::new(0.0, 0.0); ell * stride];
    let map = cover.map;
    let anchor_index: Vec<usize> = points
        .par_chunks_mut(stride)
        .enumerate()
        .map(|(i, row)| {
            let mut rng = substream(seed, i as u64);
            let anchor = rng.random_range(0..cover.centers.len());
            row[0] = cover.centers[anchor];
            for j in 1..stride {
                let w = map.inverse_plus(row[j - 1]);
                row[j] = if rng.random::<bool>() { w } else { -w };
            }
            anchor
        })
        .collect();
    if let Some(bad) = points.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::at(
            "lattice row",
            bad / stride,
            Error::Range("non-finite preimage".into()),
        ));
    }
    Ok(Lattice {
        ell,
        depth,
        points,
        anchor_index,
        seed,
    })
}
