//! Data model for tree-based AMR datasets.
//!
//! A dataset is an ordered list of levels, finest first. Each level stores a
//! dense scalar grid plus a per-cell occupancy mask; cells not owned by the
//! level hold a sentinel zero and the mask is authoritative. Masks are
//! aligned to cubic unit blocks of `b` cells per side, and the per-level
//! masks, up-sampled to the finest resolution, tile the domain exactly once.

mod container;

pub use container::{read_amrc, read_amrc_file, write_amrc, write_amrc_file};

use crate::error::{Error, Result};
use crate::grid::{Dims3, Grid3};

/// Width of the stored scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    F32,
    F64,
}

impl ValueKind {
    pub fn bytes_per_value(self) -> usize {
        match self {
            ValueKind::F32 => 4,
            ValueKind::F64 => 8,
        }
    }

    pub fn bits_per_value(self) -> usize {
        self.bytes_per_value() * 8
    }

    /// Round `v` to the nearest representable value of this width.
    #[inline]
    pub fn snap(self, v: f64) -> f64 {
        match self {
            ValueKind::F32 => v as f32 as f64,
            ValueKind::F64 => v,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            ValueKind::F32 => 0,
            ValueKind::F64 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ValueKind::F32),
            1 => Ok(ValueKind::F64),
            t => Err(Error::data(format!("unknown value type tag {t}"))),
        }
    }
}

/// One resolution tier of an AMR dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct AmrLevel {
    level_index: usize,
    values: Grid3<f64>,
    occupancy: Grid3<bool>,
    unit_block_size: usize,
}

impl AmrLevel {
    /// Build a level and check its invariants: dims divisible by the unit
    /// block size, mask aligned to unit blocks, zeros outside the mask.
    pub fn new(
        level_index: usize,
        values: Grid3<f64>,
        occupancy: Grid3<bool>,
        unit_block_size: usize,
    ) -> Result<Self> {
        if values.dims() != occupancy.dims() {
            return Err(Error::structure(format!(
                "level {level_index}: value dims {} != mask dims {}",
                values.dims(),
                occupancy.dims()
            )));
        }
        let b = unit_block_size;
        if b == 0 || !values.dims().divisible_by(b) {
            return Err(Error::structure(format!(
                "level {level_index}: dims {} not divisible by unit block size {b}",
                values.dims()
            )));
        }
        let level = AmrLevel {
            level_index,
            values,
            occupancy,
            unit_block_size,
        };
        level.check_block_alignment()?;
        level.check_sentinel_zeros()?;
        Ok(level)
    }

    fn check_block_alignment(&self) -> Result<()> {
        let bd = self.block_dims();
        for bz in 0..bd.nz {
            for by in 0..bd.ny {
                for bx in 0..bd.nx {
                    let first = *self.block_cells(bx, by, bz).next().unwrap().1;
                    for (_, occ) in self.block_cells(bx, by, bz) {
                        if *occ != first {
                            return Err(Error::structure(format!(
                                "level {}: occupancy not block-aligned at unit block ({bx},{by},{bz})",
                                self.level_index
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_sentinel_zeros(&self) -> Result<()> {
        for (v, occ) in self.values.as_slice().iter().zip(self.occupancy.as_slice()) {
            if !occ && *v != 0.0 {
                return Err(Error::structure(format!(
                    "level {}: non-zero value in unoccupied cell",
                    self.level_index
                )));
            }
        }
        Ok(())
    }

    fn block_cells(&self, bx: usize, by: usize, bz: usize) -> impl Iterator<Item = (usize, &bool)> {
        let b = self.unit_block_size;
        let dims = self.occupancy.dims();
        let occ = self.occupancy.as_slice();
        (bz * b..(bz + 1) * b).flat_map(move |z| {
            (by * b..(by + 1) * b).flat_map(move |y| {
                (bx * b..(bx + 1) * b).map(move |x| {
                    let i = dims.index(x, y, z);
                    (i, &occ[i])
                })
            })
        })
    }

    pub fn level_index(&self) -> usize {
        self.level_index
    }

    pub fn dims(&self) -> Dims3 {
        self.values.dims()
    }

    pub fn values(&self) -> &Grid3<f64> {
        &self.values
    }

    pub fn occupancy(&self) -> &Grid3<bool> {
        &self.occupancy
    }

    pub fn unit_block_size(&self) -> usize {
        self.unit_block_size
    }

    /// Level dims in unit blocks.
    pub fn block_dims(&self) -> Dims3 {
        self.dims().scaled_down(self.unit_block_size)
    }

    /// Whether the unit block at block coords `(bx, by, bz)` is occupied.
    /// Masks are block-aligned, so one corner cell decides.
    pub fn block_occupied(&self, bx: usize, by: usize, bz: usize) -> bool {
        let b = self.unit_block_size;
        *self.occupancy.get(bx * b, by * b, bz * b)
    }

    pub fn occupied_block_count(&self) -> usize {
        let bd = self.block_dims();
        let mut n = 0;
        for bz in 0..bd.nz {
            for by in 0..bd.ny {
                for bx in 0..bd.nx {
                    if self.block_occupied(bx, by, bz) {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    pub fn occupied_cell_count(&self) -> usize {
        self.occupancy.as_slice().iter().filter(|o| **o).count()
    }

    /// Occupancy flags per unit block, x fastest.
    pub fn block_mask(&self) -> Grid3<bool> {
        let bd = self.block_dims();
        let mut mask = Grid3::zeros(bd);
        for bz in 0..bd.nz {
            for by in 0..bd.ny {
                for bx in 0..bd.nx {
                    mask.set(bx, by, bz, self.block_occupied(bx, by, bz));
                }
            }
        }
        mask
    }
}

/// Fraction of occupied unit blocks in a level.
pub fn density(level: &AmrLevel) -> f64 {
    let total = level.block_dims().len();
    if total == 0 {
        return 0.0;
    }
    level.occupied_block_count() as f64 / total as f64
}

/// A multi-level grid hierarchy, finest level first.
#[derive(Debug, Clone, PartialEq)]
pub struct AmrDataset {
    levels: Vec<AmrLevel>,
    refinement_ratio: usize,
    value_kind: ValueKind,
    global_range: f64,
}

impl AmrDataset {
    /// Build a dataset and check the cross-level invariants: dims scale by
    /// the refinement ratio, and the per-level masks partition the domain.
    pub fn new(levels: Vec<AmrLevel>, refinement_ratio: usize, value_kind: ValueKind) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::structure("dataset has no levels"));
        }
        if refinement_ratio == 0 {
            return Err(Error::invalid("refinement ratio must be >= 1"));
        }
        for (i, level) in levels.iter().enumerate() {
            if level.level_index() != i {
                return Err(Error::structure(format!(
                    "level at position {i} has index {}",
                    level.level_index()
                )));
            }
            if i + 1 < levels.len() {
                let fine = levels[i].dims();
                let coarse = levels[i + 1].dims();
                if coarse.scaled_up(refinement_ratio) != fine {
                    return Err(Error::structure(format!(
                        "level {} dims {} x ratio {} != level {} dims {}",
                        i + 1,
                        coarse,
                        refinement_ratio,
                        i,
                        fine
                    )));
                }
            }
        }
        check_partition(&levels, refinement_ratio)?;
        let global_range = value_range(&levels);
        Ok(AmrDataset {
            levels,
            refinement_ratio,
            value_kind,
            global_range,
        })
    }

    pub fn levels(&self) -> &[AmrLevel] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &AmrLevel {
        &self.levels[i]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn refinement_ratio(&self) -> usize {
        self.refinement_ratio
    }

    pub fn value_kind(&self) -> ValueKind {
        self.value_kind
    }

    /// Max minus min over occupied cells of all levels.
    pub fn global_range(&self) -> f64 {
        self.global_range
    }

    pub fn finest_dims(&self) -> Dims3 {
        self.levels[0].dims()
    }

    /// Total number of stored (occupied) values across levels.
    pub fn stored_value_count(&self) -> usize {
        self.levels.iter().map(|l| l.occupied_cell_count()).sum()
    }

    /// Stored size in bytes: one value per occupied cell.
    pub fn stored_bytes(&self) -> usize {
        self.stored_value_count() * self.value_kind.bytes_per_value()
    }

    /// Masks, block size, ratio and value width — everything needed to
    /// reassemble a dataset from a uniform grid.
    pub fn structure(&self) -> DatasetStructure {
        DatasetStructure {
            masks: self.levels.iter().map(|l| l.occupancy().clone()).collect(),
            unit_block_sizes: self.levels.iter().map(|l| l.unit_block_size()).collect(),
            refinement_ratio: self.refinement_ratio,
            value_kind: self.value_kind,
        }
    }
}

/// Per-level masks plus geometry, detached from the values.
#[derive(Debug, Clone)]
pub struct DatasetStructure {
    pub masks: Vec<Grid3<bool>>,
    pub unit_block_sizes: Vec<usize>,
    pub refinement_ratio: usize,
    pub value_kind: ValueKind,
}

fn value_range(levels: &[AmrLevel]) -> f64 {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for level in levels {
        for (v, occ) in level
            .values()
            .as_slice()
            .iter()
            .zip(level.occupancy().as_slice())
        {
            if *occ {
                min = min.min(*v);
                max = max.max(*v);
            }
        }
    }
    if min > max {
        0.0
    } else {
        max - min
    }
}

/// Every physical location must be owned by exactly one level. Datasets with
/// redundant coarse coverage (patch-based AMR) are rejected here. Works at
/// cell granularity so per-level unit block sizes may differ.
fn check_partition(levels: &[AmrLevel], ratio: usize) -> Result<()> {
    let finest = levels[0].dims();
    let mut coverage: Grid3<u8> = Grid3::zeros(finest);
    for (i, level) in levels.iter().enumerate() {
        let scale = ratio.pow(i as u32);
        let ld = level.dims();
        for cz in 0..ld.nz {
            for cy in 0..ld.ny {
                for cx in 0..ld.nx {
                    if !level.occupancy().get(cx, cy, cz) {
                        continue;
                    }
                    for fz in cz * scale..(cz + 1) * scale {
                        for fy in cy * scale..(cy + 1) * scale {
                            for fx in cx * scale..(cx + 1) * scale {
                                let c = coverage.get(fx, fy, fz) + 1;
                                if c > 1 {
                                    return Err(Error::structure(format!(
                                        "region ({fx},{fy},{fz}) owned by more than one level \
                                         (levels up to {i}); patch-based AMR data is not supported"
                                    )));
                                }
                                coverage.set(fx, fy, fz, c);
                            }
                        }
                    }
                }
            }
        }
    }
    if coverage.as_slice().iter().any(|c| *c == 0) {
        return Err(Error::structure(
            "some regions are not owned by any level (incomplete coverage)",
        ));
    }
    Ok(())
}

/// A single-resolution view of the whole domain at finest-level dims.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    pub values: Grid3<f64>,
    /// Source level index per cell.
    pub provenance: Grid3<u8>,
}

/// Nearest-neighbor replication: each cell becomes `rate`^3 cells.
pub fn upsample(level: &AmrLevel, rate: usize) -> Result<AmrLevel> {
    if rate == 0 {
        return Err(Error::invalid("up-sample rate must be >= 1"));
    }
    if rate == 1 {
        return Ok(level.clone());
    }
    let src = level.dims();
    let dst = src.scaled_up(rate);
    let mut values = Grid3::zeros(dst);
    let mut occupancy = Grid3::zeros(dst);
    for z in 0..dst.nz {
        for y in 0..dst.ny {
            for x in 0..dst.nx {
                let v = *level.values().get(x / rate, y / rate, z / rate);
                let o = *level.occupancy().get(x / rate, y / rate, z / rate);
                values.set(x, y, z, v);
                occupancy.set(x, y, z, o);
            }
        }
    }
    AmrLevel::new(level.level_index(), values, occupancy, level.unit_block_size())
}

/// Up-sample every coarse level to the finest resolution and combine: each
/// output cell takes the value from its owning level.
pub fn flatten_to_uniform(ds: &AmrDataset) -> Result<UniformGrid> {
    let dims = ds.finest_dims();
    let mut values = Grid3::zeros(dims);
    let mut provenance: Grid3<u8> = Grid3::filled(dims, u8::MAX);
    for (i, level) in ds.levels().iter().enumerate() {
        let scale = ds.refinement_ratio().pow(i as u32);
        let ld = level.dims();
        for cz in 0..ld.nz {
            for cy in 0..ld.ny {
                for cx in 0..ld.nx {
                    if !level.occupancy().get(cx, cy, cz) {
                        continue;
                    }
                    let v = *level.values().get(cx, cy, cz);
                    for z in cz * scale..(cz + 1) * scale {
                        for y in cy * scale..(cy + 1) * scale {
                            for x in cx * scale..(cx + 1) * scale {
                                if *provenance.get(x, y, z) != u8::MAX {
                                    return Err(Error::structure(format!(
                                        "cell ({x},{y},{z}) owned by more than one level"
                                    )));
                                }
                                values.set(x, y, z, v);
                                provenance.set(x, y, z, i as u8);
                            }
                        }
                    }
                }
            }
        }
    }
    if provenance.as_slice().iter().any(|p| *p == u8::MAX) {
        return Err(Error::structure("cell owned by no level"));
    }
    Ok(UniformGrid { values, provenance })
}

/// Inverse of [`flatten_to_uniform`]: rebuild the per-level hierarchy from a
/// uniform grid. Each coarse cell takes the mean of its replicas, clamped to
/// their hull so a bound that holds per replica also holds for the mean, and
/// so the round trip is bit-exact when the replicas agree.
pub fn split_uniform(g: &UniformGrid, st: &DatasetStructure) -> Result<AmrDataset> {
    let dims = g.values.dims();
    if st.masks.is_empty() {
        return Err(Error::structure("dataset structure has no levels"));
    }
    if st.masks[0].dims() != dims {
        return Err(Error::structure(format!(
            "uniform grid dims {} != finest mask dims {}",
            dims,
            st.masks[0].dims()
        )));
    }
    let mut levels = Vec::with_capacity(st.masks.len());
    for (i, mask) in st.masks.iter().enumerate() {
        let scale = st.refinement_ratio.pow(i as u32);
        let ld = mask.dims();
        if ld.scaled_up(scale) != dims {
            return Err(Error::structure(format!(
                "level {i} mask dims {ld} inconsistent with uniform dims {dims}"
            )));
        }
        let mut values = Grid3::zeros(ld);
        for cz in 0..ld.nz {
            for cy in 0..ld.ny {
                for cx in 0..ld.nx {
                    if !mask.get(cx, cy, cz) {
                        continue;
                    }
                    let mut sum = 0.0;
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for z in cz * scale..(cz + 1) * scale {
                        for y in cy * scale..(cy + 1) * scale {
                            for x in cx * scale..(cx + 1) * scale {
                                let v = *g.values.get(x, y, z);
                                sum += v;
                                lo = lo.min(v);
                                hi = hi.max(v);
                            }
                        }
                    }
                    let n = (scale * scale * scale) as f64;
                    let mean = (sum / n).clamp(lo, hi);
                    values.set(cx, cy, cz, st.value_kind.snap(mean));
                }
            }
        }
        levels.push(AmrLevel::new(
            i,
            values,
            mask.clone(),
            st.unit_block_sizes[i],
        )?);
    }
    AmrDataset::new(levels, st.refinement_ratio, st.value_kind)
}

#[cfg(test)]
pub(crate) mod tests;
