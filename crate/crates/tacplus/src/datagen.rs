//! Synthetic multi-level AMR datasets with controllable per-level density.
//!
//! A scalar field is built as a sum of Gaussian bumps with seeded
//! pseudo-random placement, then refined: the coarsest level owns everything
//! by default, and any unit block whose field maximum exceeds a gap's
//! threshold is promoted to the next finer level. Lowering a threshold can
//! only promote more blocks, so per-level densities can be tuned by
//! bisection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::amr::{AmrDataset, AmrLevel, ValueKind};
use crate::error::{Error, Result};
use crate::grid::{Dims3, Grid3};

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Finest-level dims in cells.
    pub dims: Dims3,
    pub num_levels: usize,
    pub refinement_ratio: usize,
    pub unit_block_size: usize,
    pub num_blobs: usize,
    /// Blob amplitude range (min, max), both positive.
    pub amplitude: (f64, f64),
    /// Blob width (standard deviation) range in finest cells.
    pub width: (f64, f64),
    /// Refinement threshold per level gap, finest gap first; must be
    /// strictly decreasing (finer levels demand larger values).
    pub thresholds: Vec<f64>,
    pub seed: u64,
    pub value_kind: ValueKind,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_levels == 0 || self.num_levels > 8 {
            return Err(Error::invalid("level count must be in 1..=8"));
        }
        if self.refinement_ratio < 2 {
            return Err(Error::invalid("refinement ratio must be >= 2"));
        }
        let granularity =
            self.unit_block_size * self.refinement_ratio.pow(self.num_levels as u32 - 1);
        if !self.dims.divisible_by(granularity) {
            return Err(Error::invalid(format!(
                "dims {} must be divisible by block size x ratio^(levels-1) = {granularity}",
                self.dims
            )));
        }
        if self.thresholds.len() != self.num_levels - 1 {
            return Err(Error::invalid(format!(
                "{} levels need {} thresholds, got {}",
                self.num_levels,
                self.num_levels - 1,
                self.thresholds.len()
            )));
        }
        for w in self.thresholds.windows(2) {
            if !(w[0] > w[1]) {
                return Err(Error::invalid(
                    "thresholds must be strictly decreasing from the finest gap",
                ));
            }
        }
        if !(self.amplitude.0 > 0.0 && self.amplitude.1 >= self.amplitude.0) {
            return Err(Error::invalid("amplitude range must be positive"));
        }
        if !(self.width.0 > 0.0 && self.width.1 >= self.width.0) {
            return Err(Error::invalid("width range must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Blob {
    center: (f64, f64, f64),
    amplitude: f64,
    /// 1 / (2 sigma^2), precomputed.
    inv_two_sigma_sq: f64,
}

fn draw_blobs(cfg: &GenConfig) -> Vec<Blob> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.num_blobs)
        .map(|_| {
            let center = (
                rng.gen_range(0.0..cfg.dims.nx as f64),
                rng.gen_range(0.0..cfg.dims.ny as f64),
                rng.gen_range(0.0..cfg.dims.nz as f64),
            );
            let amplitude = rng.gen_range(cfg.amplitude.0..=cfg.amplitude.1);
            let sigma = rng.gen_range(cfg.width.0..=cfg.width.1);
            Blob {
                center,
                amplitude,
                inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
            }
        })
        .collect()
}

/// Sum of Gaussian bumps at finest resolution. Deterministic for a fixed
/// seed: blob parameters come from one seeded stream and every cell sums
/// the blobs in the same order.
pub fn gen_field(cfg: &GenConfig) -> Result<Grid3<f64>> {
    cfg.validate()?;
    let blobs = draw_blobs(cfg);
    let d = cfg.dims;
    let mut data = vec![0.0f64; d.len()];
    data.par_iter_mut().enumerate().for_each(|(i, out)| {
        let x = (i % d.nx) as f64;
        let y = ((i / d.nx) % d.ny) as f64;
        let z = (i / (d.nx * d.ny)) as f64;
        let mut v = 0.0;
        for b in &blobs {
            let dx = x - b.center.0;
            let dy = y - b.center.1;
            let dz = z - b.center.2;
            let r2 = dx * dx + dy * dy + dz * dz;
            v += b.amplitude * (-r2 * b.inv_two_sigma_sq).exp();
        }
        *out = cfg.value_kind.snap(v);
    });
    Ok(Grid3::from_vec(d, data))
}

/// Field maximum over the finest cells covered by the unit block at
/// block coords `(bx,by,bz)` of level `level`.
fn block_max(field: &Grid3<f64>, cfg: &GenConfig, level: usize, b: (usize, usize, usize)) -> f64 {
    let span = cfg.unit_block_size * cfg.refinement_ratio.pow(level as u32);
    let mut max = f64::NEG_INFINITY;
    for z in b.2 * span..(b.2 + 1) * span {
        for y in b.1 * span..(b.1 + 1) * span {
            for x in b.0 * span..(b.0 + 1) * span {
                max = max.max(*field.get(x, y, z));
            }
        }
    }
    max
}

/// Refine the field into a level hierarchy. The coarsest level owns
/// everything; a unit block moves to the next finer level when its field
/// maximum exceeds that gap's threshold.
pub fn build_amr(field: &Grid3<f64>, cfg: &GenConfig) -> Result<AmrDataset> {
    cfg.validate()?;
    if field.dims() != cfg.dims {
        return Err(Error::invalid(format!(
            "field dims {} != config dims {}",
            field.dims(),
            cfg.dims
        )));
    }
    let levels = cfg.num_levels;
    let r = cfg.refinement_ratio;
    let b = cfg.unit_block_size;
    // Block-granular masks, finest first.
    let mut masks: Vec<Grid3<bool>> = (0..levels)
        .map(|l| Grid3::zeros(cfg.dims.scaled_down(b * r.pow(l as u32))))
        .collect();

    // Candidates start as every block of the coarsest level and cascade
    // toward finer levels.
    let coarsest = levels - 1;
    let mut candidates: Vec<(usize, usize, usize)> = {
        let bd = masks[coarsest].dims();
        (0..bd.nz)
            .flat_map(|z| (0..bd.ny).flat_map(move |y| (0..bd.nx).map(move |x| (x, y, z))))
            .collect()
    };
    for level in (0..levels).rev() {
        let mut promoted = Vec::new();
        for block in candidates {
            if level > 0 && block_max(field, cfg, level, block) > cfg.thresholds[level - 1] {
                for dz in 0..r {
                    for dy in 0..r {
                        for dx in 0..r {
                            promoted.push((block.0 * r + dx, block.1 * r + dy, block.2 * r + dz));
                        }
                    }
                }
            } else {
                masks[level].set(block.0, block.1, block.2, true);
            }
        }
        candidates = promoted;
    }

    let mut out = Vec::with_capacity(levels);
    for (l, mask) in masks.iter().enumerate() {
        let scale = r.pow(l as u32);
        let ld = cfg.dims.scaled_down(scale);
        let mut values = Grid3::zeros(ld);
        let mut occupancy = Grid3::zeros(ld);
        for cz in 0..ld.nz {
            for cy in 0..ld.ny {
                for cx in 0..ld.nx {
                    if !mask.get(cx / b, cy / b, cz / b) {
                        continue;
                    }
                    occupancy.set(cx, cy, cz, true);
                    let v = if l == 0 {
                        *field.get(cx, cy, cz)
                    } else {
                        let mut sum = 0.0;
                        for z in cz * scale..(cz + 1) * scale {
                            for y in cy * scale..(cy + 1) * scale {
                                for x in cx * scale..(cx + 1) * scale {
                                    sum += field.get(x, y, z);
                                }
                            }
                        }
                        cfg.value_kind.snap(sum / (scale * scale * scale) as f64)
                    };
                    values.set(cx, cy, cz, v);
                }
            }
        }
        out.push(AmrLevel::new(l, values, occupancy, b)?);
    }
    AmrDataset::new(out, r, cfg.value_kind)
}

/// Bisect the finest gap's threshold until the finest level density lands
/// within `tol` of `target` (or as close as the block granularity allows).
pub fn tune_finest_threshold(
    field: &Grid3<f64>,
    cfg: &GenConfig,
    target: f64,
    tol: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::invalid("target density must be in [0, 1]"));
    }
    let field_max = field.as_slice().iter().cloned().fold(0.0, f64::max);
    // Stay above coarser thresholds to keep the config valid.
    let floor = cfg.thresholds.get(1).map_or(0.0, |t| t * (1.0 + 1e-9));
    let mut lo = floor;
    let mut hi = field_max * (1.0 + 1e-9);
    let density_at = |t: f64| -> Result<f64> {
        let mut c = cfg.clone();
        c.thresholds[0] = t;
        let ds = build_amr(field, &c)?;
        Ok(crate::amr::density(&ds.levels()[0]))
    };
    // Density is non-increasing in the threshold.
    let mut best = (lo, density_at(lo)?);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let d = density_at(mid)?;
        if (d - target).abs() < (best.1 - target).abs() {
            best = (mid, d);
        }
        if (d - target).abs() <= tol {
            return Ok(mid);
        }
        if d > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (best.1 - target).abs() <= tol {
        Ok(best.0)
    } else {
        Err(Error::invalid(format!(
            "cannot reach finest density {target} (best {:.4}); adjust blobs or thresholds",
            best.1
        )))
    }
}

/// A parsed `key=value` generator spec: either explicit thresholds or a
/// finest-density target resolved by bisection.
#[derive(Debug, Clone)]
pub struct GenSpec {
    pub config: GenConfig,
    pub target_finest_density: Option<f64>,
}

pub fn generate(spec: &GenSpec) -> Result<AmrDataset> {
    let mut cfg = spec.config.clone();
    let field = gen_field(&cfg)?;
    if let Some(target) = spec.target_finest_density {
        cfg.thresholds[0] = tune_finest_threshold(&field, &cfg, target, 0.03)?;
    }
    build_amr(&field, &cfg)
}

/// Parse a flat `key=value` config (one per line, `#` comments).
pub fn parse_gen_spec(text: &str) -> Result<GenSpec> {
    let mut dims = None;
    let mut levels = 2usize;
    let mut ratio = 2usize;
    let mut block_size = 16usize;
    let mut blobs = 32usize;
    let mut amplitude = (1.0, 100.0);
    let mut width = (4.0, 16.0);
    let mut thresholds: Vec<f64> = Vec::new();
    let mut seed = 0u64;
    let mut value_kind = ValueKind::F32;
    let mut target = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::invalid(format!("line {}: bad {what}: {value}", lineno + 1));
        match key {
            "dims" => {
                let parts: Vec<usize> = value
                    .split(',')
                    .map(|p| p.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("dims"))?;
                dims = Some(match parts.as_slice() {
                    [n] => Dims3::cube(*n),
                    [nx, ny, nz] => Dims3::new(*nx, *ny, *nz),
                    _ => return Err(bad("dims")),
                });
            }
            "levels" => levels = value.parse().map_err(|_| bad("levels"))?,
            "ratio" => ratio = value.parse().map_err(|_| bad("ratio"))?,
            "block_size" => block_size = value.parse().map_err(|_| bad("block_size"))?,
            "blobs" => blobs = value.parse().map_err(|_| bad("blobs"))?,
            "amp" => amplitude = parse_pair(value).ok_or_else(|| bad("amp"))?,
            "width" => width = parse_pair(value).ok_or_else(|| bad("width"))?,
            "thresholds" => {
                thresholds = value
                    .split(',')
                    .map(|p| p.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("thresholds"))?;
            }
            "seed" => seed = value.parse().map_err(|_| bad("seed"))?,
            "value_type" => {
                value_kind = match value {
                    "f32" => ValueKind::F32,
                    "f64" => ValueKind::F64,
                    _ => return Err(bad("value_type")),
                };
            }
            "target_finest_density" => {
                target = Some(value.parse().map_err(|_| bad("target_finest_density"))?)
            }
            other => {
                return Err(Error::invalid(format!(
                    "line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    let dims = dims.ok_or_else(|| Error::invalid("config is missing 'dims'"))?;
    if target.is_some() {
        if levels < 2 {
            return Err(Error::invalid("density target needs at least 2 levels"));
        }
        // Placeholder for the tuned gap; coarser gaps keep supplied values.
        if thresholds.len() == levels - 1 {
            // keep; thresholds[0] will be overwritten
        } else if thresholds.len() == levels.saturating_sub(2) {
            let top = thresholds.first().copied().unwrap_or(0.0);
            thresholds.insert(0, top + 1.0);
        } else {
            return Err(Error::invalid(
                "with target_finest_density, give thresholds for the coarser gaps only",
            ));
        }
    }
    let config = GenConfig {
        dims,
        num_levels: levels,
        refinement_ratio: ratio,
        unit_block_size: block_size,
        num_blobs: blobs,
        amplitude,
        width,
        thresholds,
        seed,
        value_kind,
    };
    config.validate()?;
    Ok(GenSpec {
        config,
        target_finest_density: target,
    })
}

fn parse_pair(value: &str) -> Option<(f64, f64)> {
    let (a, b) = value.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amr::density;

    fn small_cfg() -> GenConfig {
        GenConfig {
            dims: Dims3::cube(32),
            num_levels: 2,
            refinement_ratio: 2,
            unit_block_size: 4,
            num_blobs: 6,
            amplitude: (10.0, 50.0),
            width: (3.0, 8.0),
            thresholds: vec![20.0],
            seed: 11,
            value_kind: ValueKind::F64,
        }
    }

    #[test]
    fn zero_blobs_give_zero_field() {
        let mut cfg = small_cfg();
        cfg.num_blobs = 0;
        let field = gen_field(&cfg).unwrap();
        assert!(field.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = small_cfg();
        let a = gen_field(&cfg).unwrap();
        let b = gen_field(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seed_differs() {
        let mut cfg = small_cfg();
        let a = gen_field(&cfg).unwrap();
        cfg.seed += 1;
        let b = gen_field(&cfg).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn single_blob_peaks_near_center_and_below_amplitude() {
        let mut cfg = small_cfg();
        cfg.num_blobs = 1;
        cfg.amplitude = (40.0, 40.0);
        let blob = draw_blobs(&cfg)[0];
        let field = gen_field(&cfg).unwrap();
        let mut best = (0usize, 0usize, 0usize);
        let mut max = f64::NEG_INFINITY;
        for (x, y, z) in field.iter_coords() {
            if *field.get(x, y, z) > max {
                max = *field.get(x, y, z);
                best = (x, y, z);
            }
        }
        assert!(max <= 40.0);
        assert!((best.0 as f64 - blob.center.0).abs() <= 1.0);
        assert!((best.1 as f64 - blob.center.1).abs() <= 1.0);
        assert!((best.2 as f64 - blob.center.2).abs() <= 1.0);
    }

    #[test]
    fn field_is_non_negative() {
        let field = gen_field(&small_cfg()).unwrap();
        assert!(field.as_slice().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn thresholds_above_max_leave_one_level() {
        let mut cfg = small_cfg();
        cfg.thresholds = vec![1e9];
        let field = gen_field(&cfg).unwrap();
        let ds = build_amr(&field, &cfg).unwrap();
        assert_eq!(density(&ds.levels()[0]), 0.0);
        assert_eq!(density(&ds.levels()[1]), 1.0);
    }

    #[test]
    fn thresholds_below_min_refine_everything() {
        let mut cfg = small_cfg();
        cfg.thresholds = vec![-1.0]; // field is non-negative
        let field = gen_field(&cfg).unwrap();
        let ds = build_amr(&field, &cfg).unwrap();
        assert_eq!(density(&ds.levels()[0]), 1.0);
        assert_eq!(density(&ds.levels()[1]), 0.0);
    }

    #[test]
    fn output_passes_dataset_validation() {
        // AmrDataset::new runs the partition/alignment checks internally;
        // reaching here means they passed.
        for seed in 0..5 {
            let mut cfg = small_cfg();
            cfg.seed = seed;
            let field = gen_field(&cfg).unwrap();
            let ds = build_amr(&field, &cfg).unwrap();
            assert_eq!(ds.num_levels(), 2);
        }
    }

    #[test]
    fn three_level_hierarchy_partitions() {
        let mut cfg = small_cfg();
        cfg.num_levels = 3;
        cfg.dims = Dims3::cube(32);
        cfg.unit_block_size = 2;
        cfg.thresholds = vec![30.0, 10.0];
        let field = gen_field(&cfg).unwrap();
        let ds = build_amr(&field, &cfg).unwrap();
        assert_eq!(ds.num_levels(), 3);
    }

    #[test]
    fn lowering_threshold_never_decreases_fine_density() {
        let cfg = small_cfg();
        let field = gen_field(&cfg).unwrap();
        let mut last = -1.0;
        for t in [60.0, 40.0, 25.0, 10.0, 2.0] {
            let mut c = cfg.clone();
            c.thresholds = vec![t];
            let ds = build_amr(&field, &c).unwrap();
            let d = density(&ds.levels()[0]);
            assert!(d >= last, "threshold {t}: {d} < {last}");
            last = d;
        }
    }

    #[test]
    fn bisection_hits_density_target() {
        let mut cfg = small_cfg();
        cfg.dims = Dims3::cube(64);
        cfg.num_blobs = 24;
        cfg.seed = 3;
        let field = gen_field(&cfg).unwrap();
        let t = tune_finest_threshold(&field, &cfg, 0.23, 0.03).unwrap();
        let mut tuned = cfg.clone();
        tuned.thresholds = vec![t];
        let ds = build_amr(&field, &tuned).unwrap();
        let fine = density(&ds.levels()[0]);
        assert!((fine - 0.23).abs() <= 0.03, "got {fine}");
        // Two-level coarse density is the complement.
        let coarse = density(&ds.levels()[1]);
        assert!((fine + coarse - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parse_round_trip_and_defaults() {
        let spec = parse_gen_spec(
            "dims=32\nlevels=2\nblock_size=4\nblobs=5\nseed=9\nthresholds=12.5\n# comment\n",
        )
        .unwrap();
        assert_eq!(spec.config.dims, Dims3::cube(32));
        assert_eq!(spec.config.thresholds, vec![12.5]);
        assert_eq!(spec.config.seed, 9);
        assert!(spec.target_finest_density.is_none());
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.num_levels(), 2);
    }

    #[test]
    fn parse_rejects_unknown_keys_and_bad_lines() {
        assert!(parse_gen_spec("dims=32\nwhat=1\n").is_err());
        assert!(parse_gen_spec("dims\n").is_err());
        assert!(parse_gen_spec("levels=2\n").is_err()); // missing dims
    }

    #[test]
    fn parse_target_spec_generates_tuned_dataset() {
        let spec = parse_gen_spec(
            "dims=64\nlevels=2\nblock_size=4\nblobs=24\nseed=3\namp=10,50\nwidth=3,8\ntarget_finest_density=0.25\n",
        )
        .unwrap();
        let ds = generate(&spec).unwrap();
        let fine = density(&ds.levels()[0]);
        assert!((fine - 0.25).abs() <= 0.03, "got {fine}");
    }
}
