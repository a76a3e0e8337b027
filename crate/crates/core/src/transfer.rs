//! Perron-Frobenius density `f = lim P^n 1` and Hausdorff-dimension
//! estimation for quadratic maps.
//!
//! `P^n 1(z)` sums `|(T^n)'(y)|^{-h}` over the `2^n` preimages `y` of `z`.
//! With `T'(z) = 2z` each term is `2^{-hn} (prod_k |T^k(y)|)^{-h}`, and since
//! `y` and `-y` give the same product only the `+` child at the deepest
//! level is visited and the sum is doubled.
//!
//! All levels `1..=n` come out of a single depth-first walk of the preimage
//! tree. The walk is split into a fixed number of subtrees whose partial sums
//! are reduced in branch-word order, so results are bit-identical for any
//! thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{ensure_finite, ComplexPoint, QuadraticMap};
use crate::error::{Error, Result};
use crate::lattice::BorelCover;

/// Deepest level `transfer_iterate` will enumerate (2^25 halved branch words).
pub const DEFAULT_MAX_LEVEL: usize = 26;
/// Level cap for the density iteration.
pub const DEFAULT_LEVEL_CAP: usize = 25;
pub const DEFAULT_PROBE_DEPTH: usize = 18;
/// Depth at which the preimage tree is cut into independent subtrees.
const SPLIT_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy)]
struct Node {
    point: ComplexPoint,
    /// Product of `|y_1| ... |y_k|` along the path from the root.
    product: f64,
}

fn degenerate(z: ComplexPoint) -> Error {
    Error::Domain(format!(
        "preimage of {z} passes through the critical value; input not on a hyperbolic Julia set"
    ))
}

/// Adds `P^{-h}` for the `+` child of `node` at `level` (one-based) into
/// `sums[level - 1]`, then descends both children while `level < n`.
fn walk(
    map: &QuadraticMap,
    node: Node,
    level: usize,
    n: usize,
    h: f64,
    sums: &mut [f64],
) -> Result<()> {
    let w = map.inverse_plus(node.point);
    let modulus = w.norm();
    if modulus == 0.0 || !modulus.is_finite() {
        return Err(degenerate(node.point));
    }
    let product = node.product * modulus;
    sums[level - 1] += product.powf(-h);
    if level < n {
        walk(map, Node { point: w, product }, level + 1, n, h, sums)?;
        walk(map, Node { point: -w, product }, level + 1, n, h, sums)?;
    }
    Ok(())
}

/// `f_1(z), ..., f_n(z)`.
pub fn transfer_levels(map: &QuadraticMap, z: ComplexPoint, h: f64, n: usize) -> Result<Vec<f64>> {
    transfer_levels_capped(map, z, h, n, DEFAULT_MAX_LEVEL)
}

pub fn transfer_levels_capped(
    map: &QuadraticMap,
    z: ComplexPoint,
    h: f64,
    n: usize,
    max_level: usize,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("transfer level must be at least 1".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent h must be positive, got {h}")));
    }
    if n > max_level {
        return Err(Error::Resource {
            what: "transfer operator",
            log2: n as u32,
            cap_log2: max_level as u32,
        });
    }
    ensure_finite(z, "density point")?;

    let mut sums = vec![0.0; n];
    // Breadth-first down to the split depth, accumulating the shallow levels.
    let split = SPLIT_DEPTH.min(n - 1);
    let mut frontier = vec![Node { point: z, product: 1.0 }];
    for level in 1..=split {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for node in &frontier {
            let w = map.inverse_plus(node.point);
            let modulus = w.norm();
            if modulus == 0.0 || !modulus.is_finite() {
                return Err(degenerate(node.point));
            }
            let product = node.product * modulus;
            sums[level - 1] += product.powf(-h);
            next.push(Node { point: w, product });
            next.push(Node { point: -w, product });
        }
        frontier = next;
    }

    let partials: Vec<Vec<f64>> = frontier
        .par_iter()
        .map(|&node| {
            let mut local = vec![0.0; n];
            walk(map, node, split + 1, n, h, &mut local)?;
            Ok(local)
        })
        .collect::<Result<_>>()?;
    for local in partials {
        for (acc, v) in sums[split..].iter_mut().zip(&local[split..]) {
            *acc += v;
        }
    }

    Ok(sums
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let level = (k + 1) as f64;
            s * 2f64.powf(1.0 - h * level)
        })
        .collect())
}

/// `f_n(z) = P^n 1(z)`.
pub fn transfer_iterate(map: &QuadraticMap, z: ComplexPoint, h: f64, n: usize) -> Result<f64> {
    Ok(*transfer_levels(map, z, h, n)?.last().expect("n >= 1"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityLevel {
    pub n: usize,
    pub value: f64,
    /// `f_n / f_{n-1}`, with `f_0 = 1`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityResult {
    pub value: f64,
    pub levels: Vec<DensityLevel>,
    pub converged: bool,
}

impl DensityResult {
    pub fn require_converged(&self, z: ComplexPoint) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::NonConvergence {
                z: z.to_string(),
                levels: self.levels.len(),
                last_ratio: self.levels.last().map_or(f64::NAN, |l| l.ratio),
            })
        }
    }
}

fn trace(levels: &[f64]) -> Vec<DensityLevel> {
    let mut prev = 1.0;
    levels
        .iter()
        .enumerate()
        .map(|(k, &value)| {
            let level = DensityLevel {
                n: k + 1,
                value,
                ratio: value / prev,
            };
            prev = value;
            level
        })
        .collect()
}

pub fn density(map: &QuadraticMap, z: ComplexPoint, h: f64, tol: f64) -> Result<DensityResult> {
    density_capped(map, z, h, tol, DEFAULT_LEVEL_CAP)
}

/// Iterates `f_n` until `|f_n - f_{n-1}| <= tol` (with `f_0 = 1`) or the level
/// cap is reached.
///
/// The tree is walked to a growing depth (8, 12, 16, ...) and all levels of a
/// walk are checked, so the work is within a constant factor of walking only
/// to the level where convergence occurs.
pub fn density_capped(
    map: &QuadraticMap,
    z: ComplexPoint,
    h: f64,
    tol: f64,
    level_cap: usize,
) -> Result<DensityResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if level_cap == 0 {
        return Err(Error::InvalidArgument("level cap must be at least 1".into()));
    }
    let mut depth = 8.min(level_cap);
    loop {
        let levels = transfer_levels_capped(map, z, h, depth, level_cap)?;
        let mut prev = 1.0;
        for (k, &value) in levels.iter().enumerate() {
            if (value - prev).abs() <= tol {
                return Ok(DensityResult {
                    value,
                    levels: trace(&levels[..=k]),
                    converged: true,
                });
            }
            prev = value;
        }
        if depth == level_cap {
            return Ok(DensityResult {
                value: *levels.last().expect("depth >= 1"),
                levels: trace(&levels),
                converged: false,
            });
        }
        depth = (depth + 4).min(level_cap);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BisectionStep {
    pub h: f64,
    pub ratio: f64,
}

/// `f_n` traces for a handful of exponents, laid out like a convergence
/// table: one row per level, one `(f_n, ratio)` pair per exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub exponents: Vec<f64>,
    /// `columns[i][k]` is level `k + 1` for `exponents[i]`.
    pub columns: Vec<Vec<DensityLevel>>,
}

impl ConvergenceTable {
    pub fn build(map: &QuadraticMap, z: ComplexPoint, exponents: &[f64], depth: usize) -> Result<Self> {
        let columns = exponents
            .iter()
            .map(|&h| Ok(trace(&transfer_levels(map, z, h, depth)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            exponents: exponents.to_vec(),
            columns,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n");
        for h in &self.exponents {
            out.push_str(&format!(",f_n(h={h}),ratio(h={h})"));
        }
        out.push('\n');
        let depth = self.columns.first().map_or(0, Vec::len);
        for k in 0..depth {
            out.push_str(&(k + 1).to_string());
            for col in &self.columns {
                out.push_str(&format!(",{:.16e},{:.16e}", col[k].value, col[k].ratio));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub h: f64,
    pub bracket: (f64, f64),
    pub probe_depth: usize,
    pub steps: Vec<BisectionStep>,
}

/// `f_n / f_{n-1}` at the probe depth.
pub fn probe_ratio(map: &QuadraticMap, z: ComplexPoint, h: f64, probe_depth: usize) -> Result<f64> {
    let levels = transfer_levels(map, z, h, probe_depth)?;
    let n = levels.len();
    Ok(if n >= 2 {
        levels[n - 1] / levels[n - 2]
    } else {
        levels[0]
    })
}

pub fn estimate_dimension(
    map: &QuadraticMap,
    z0: ComplexPoint,
    h_lo: f64,
    h_hi: f64,
    tol_h: f64,
) -> Result<DimensionEstimate> {
    estimate_dimension_with_probe(map, z0, h_lo, h_hi, tol_h, DEFAULT_PROBE_DEPTH)
}

/// Bisection on the sign of `ratio - 1`: below the dimension the iterates
/// keep growing (ratio above one), above it they decay.
pub fn estimate_dimension_with_probe(
    map: &QuadraticMap,
    z0: ComplexPoint,
    h_lo: f64,
    h_hi: f64,
    tol_h: f64,
    probe_depth: usize,
) -> Result<DimensionEstimate> {
    if !(h_lo > 0.0 && h_lo < h_hi && h_hi.is_finite()) {
        return Err(Error::Bracket(format!(
            "need 0 < h_lo < h_hi, got [{h_lo}, {h_hi}]"
        )));
    }
    if !(tol_h > 0.0) {
        return Err(Error::InvalidArgument(format!("tol_h must be positive, got {tol_h}")));
    }
    if probe_depth < 2 {
        return Err(Error::InvalidArgument("probe depth must be at least 2".into()));
    }
    let mut steps = Vec::new();
    let mut eval = |h: f64| -> Result<f64> {
        let ratio = probe_ratio(map, z0, h, probe_depth)?;
        steps.push(BisectionStep { h, ratio });
        Ok(ratio)
    };
    let r_lo = eval(h_lo)?;
    let r_hi = eval(h_hi)?;
    if r_lo == 1.0 || r_hi == 1.0 {
        let h = if r_lo == 1.0 { h_lo } else { h_hi };
        return Ok(DimensionEstimate {
            h,
            bracket: (h, h),
            probe_depth,
            steps,
        });
    }
    if !(r_lo > 1.0 && r_hi < 1.0) {
        return Err(Error::Bracket(format!(
            "ratios at probe depth {probe_depth} do not straddle 1: {r_lo} at h={h_lo}, {r_hi} at h={h_hi}"
        )));
    }
    let (mut lo, mut hi) = (h_lo, h_hi);
    while hi - lo > tol_h {
        let mid = 0.5 * (lo + hi);
        let r = eval(mid)?;
        if r == 1.0 {
            lo = mid;
            hi = mid;
        } else if r > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DimensionEstimate {
        h: 0.5 * (lo + hi),
        bracket: (lo, hi),
        probe_depth,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CenterDensity {
    /// `f(z*)`
    pub at_center: f64,
    /// `f(T z*)`
    pub at_image: f64,
}

/// Densities at every cover center and at its forward image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCache {
    pub h: f64,
    pub entries: Vec<CenterDensity>,
}

impl DensityCache {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Same cache with every density multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            h: self.h,
            entries: self
                .entries
                .iter()
                .map(|e| CenterDensity {
                    at_center: e.at_center * factor,
                    at_image: e.at_image * factor,
                })
                .collect(),
        }
    }
}

/// Centers `2j` and `2j + 1` are negatives of each other and so share
/// `f(T z*)`, which is evaluated once per pair.
pub fn density_cache(cover: &BorelCover, h: f64, tol: f64) -> Result<DensityCache> {
    let map = &cover.map;
    let entries = cover
        .centers
        .par_chunks(2)
        .enumerate()
        .map(|(pair, chunk)| {
            let first = 2 * pair;
            let image = map.apply(chunk[0]);
            let at_image = density(map, image, h, tol)
                .and_then(|d| d.require_converged(image))
                .map_err(|e| Error::at("cover center", first, e))?;
            chunk
                .iter()
                .enumerate()
                .map(|(k, &z)| {
                    let at_center = density(map, z, h, tol)
                        .and_then(|d| d.require_converged(z))
                        .map_err(|e| Error::at("cover center", first + k, e))?;
                    Ok(CenterDensity { at_center, at_image })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(DensityCache { h, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{borel_centers, find_repelling_fixed_point};

    const H: f64 = 1.00735;

    fn z0() -> ComplexPoint {
        find_repelling_fixed_point(&QuadraticMap::eighth()).unwrap()
    }

    fn unit() -> QuadraticMap {
        QuadraticMap::new(ComplexPoint::new(0.0, 0.0)).unwrap()
    }

    /// Every preimage with its full chain of moduli, no halving.
    fn full_enumeration(map: &QuadraticMap, z: ComplexPoint, h: f64, n: usize) -> f64 {
        let mut paths = vec![(z, 1.0f64)];
        for _ in 0..n {
            paths = paths
                .into_iter()
                .flat_map(|(p, prod)| {
                    let (a, b) = map.inverse_branches(p);
                    [(a, prod * a.norm()), (b, prod * b.norm())]
                })
                .collect();
        }
        2f64.powf(-h * n as f64) * paths.iter().map(|(_, prod)| prod.powf(-h)).sum::<f64>()
    }

    #[test]
    fn halved_sum_matches_full_enumeration() {
        let t = QuadraticMap::eighth();
        for n in 1..=12 {
            let got = transfer_iterate(&t, z0(), H, n).unwrap();
            let want = full_enumeration(&t, z0(), H, n);
            assert!((got - want).abs() <= 1e-12 * want, "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn unit_circle_is_exactly_one() {
        let t = unit();
        for n in [1, 4, 9, 13] {
            for angle in [0.0, 0.3, 2.0] {
                let z = ComplexPoint::from_polar(1.0, angle);
                let v = transfer_iterate(&t, z, 1.0, n).unwrap();
                assert!((v - 1.0).abs() <= 1e-14, "{v}");
            }
        }
    }

    /// The published convergence table was computed at z = 0.8356, and its
    /// `n` counts one more than the number of backward levels.
    #[test]
    fn published_table_reproduced_at_printed_probe_point() {
        let t = QuadraticMap::eighth();
        let probe = ComplexPoint::new(0.8356, 0.0);
        let table = [
            (1.0, [1.3029, 1.4132, 1.4865, 1.5256, 1.5644]),
            (H, [1.2922, 1.3884, 1.4245, 1.4258, 1.4258]),
            (1.01, [1.2884, 1.3796, 1.4028, 1.3914, 1.3789]),
        ];
        for (h, column) in table {
            let levels = transfer_levels(&t, probe, h, 19).unwrap();
            for (n, want) in [3usize, 5, 10, 15, 20].into_iter().zip(column) {
                let got = levels[n - 2];
                assert!((got - want).abs() <= 6e-4, "h={h} n={n}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn fixed_point_levels_match_oracle() {
        let t = QuadraticMap::eighth();
        let levels = transfer_levels(&t, z0(), H, 14).unwrap();
        for n in [3usize, 5, 10, 14] {
            let want = full_enumeration(&t, z0(), H, n);
            assert!((levels[n - 1] - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn errors() {
        let t = QuadraticMap::eighth();
        assert!(matches!(
            transfer_iterate(&t, z0(), H, 40),
            Err(Error::Resource { .. })
        ));
        assert!(transfer_iterate(&t, z0(), H, 0).is_err());
        assert!(transfer_iterate(&t, z0(), -1.0, 3).is_err());
        assert!(density(&t, z0(), H, 0.0).is_err());
        // z = c has the double preimage 0.
        assert!(matches!(
            transfer_iterate(&t, ComplexPoint::new(0.125, 0.0), H, 3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bit_stable_across_thread_counts() {
        let t = QuadraticMap::eighth();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| transfer_levels(&t, z0(), H, 16).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn discriminator_is_monotone_in_h() {
        let t = QuadraticMap::eighth();
        let grid = [1.0, 1.004, H, 1.01, 1.02];
        let ratios: Vec<f64> = grid.iter().map(|&h| probe_ratio(&t, z0(), h, 15).unwrap()).collect();
        assert!(ratios.windows(2).all(|w| w[0] > w[1]), "{ratios:?}");
        assert!((ratios[0] - 1.0051).abs() < 2e-4);
        assert!((ratios[2] - 1.0000).abs() < 2e-4);
        assert!((ratios[3] - 0.9982).abs() < 2e-4);
    }

    #[test]
    fn dimension_examples() {
        let t = QuadraticMap::eighth();
        let est = estimate_dimension(&t, z0(), 1.0, 1.01, 1e-4).unwrap();
        assert!((est.h - H).abs() <= 5e-4, "{}", est.h);
        assert!(est.bracket.0 <= est.h && est.h <= est.bracket.1);
        assert!(est.bracket.1 - est.bracket.0 <= 1e-4);

        let est = estimate_dimension(&unit(), ComplexPoint::new(1.0, 0.0), 0.9, 1.1, 1e-5).unwrap();
        assert!((est.h - 1.0).abs() <= 1e-4);

        assert!(matches!(
            estimate_dimension(&t, z0(), 1.02, 1.05, 1e-4),
            Err(Error::Bracket(_))
        ));
        assert!(matches!(
            estimate_dimension(&t, z0(), 1.01, 1.0, 1e-4),
            Err(Error::Bracket(_))
        ));
    }

    #[test]
    fn cache_examples() {
        let t = QuadraticMap::eighth();
        let cover = borel_centers(&t, z0(), 1).unwrap();
        let cache = density_cache(&cover, H, 1e-4).unwrap();
        let at_z0 = density(&t, z0(), H, 1e-4).unwrap().value;
        assert_eq!(cache.entries[0].at_center, at_z0);
        assert_eq!(cache.entries[0].at_image, at_z0);
        assert_eq!(cache.entries[0].at_image, cache.entries[1].at_image);

        let cover = borel_centers(&t, z0(), 4).unwrap();
        let cache = density_cache(&cover, H, 1e-4).unwrap();
        assert_eq!(cache.len(), 16);
        for pair in cache.entries.chunks_exact(2) {
            assert_eq!(pair[0].at_image, pair[1].at_image);
        }

        let u = unit();
        let cover = borel_centers(&u, ComplexPoint::new(1.0, 0.0), 2).unwrap();
        let cache = density_cache(&cover, 1.0, 1e-4).unwrap();
        for e in &cache.entries {
            assert!((e.at_center - 1.0).abs() < 1e-14 && (e.at_image - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn convergence_table_csv_layout() {
        let table = ConvergenceTable::build(&QuadraticMap::eighth(), z0(), &[1.0, H], 4).unwrap();
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "n,f_n(h=1),ratio(h=1),f_n(h=1.00735),ratio(h=1.00735)");
        assert!(lines[3].starts_with("3,"));
    }
}
