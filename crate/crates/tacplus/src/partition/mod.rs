//! Empty-region removal for one AMR level.
//!
//! A level is viewed as a grid of unit blocks, each fully occupied or fully
//! empty. Three strategies turn the occupied set into disjoint sub-blocks:
//! NaST emits one sub-block per occupied unit block, OpST extracts maximal
//! occupied cubes with a dynamic-programming size field, and AKDTree splits
//! the grid along the axis of maximal occupancy imbalance until every leaf
//! is empty or full. GSP keeps the full grid and pads empty blocks next to
//! data instead (see [`gsp`]).

mod akdtree;
mod gsp;
mod opst;

pub use akdtree::{akdtree_partition, Axis, KdNode, KdStats, NodeKind};
pub use gsp::{gsp_pad, gsp_unpad, GspPadded};
pub use opst::{opst_bs_init, opst_partition, opst_update_bs, BsField};

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::amr::AmrLevel;
use crate::bitmap::{pack_flags, packed_len, unpack_flags};
use crate::error::{Error, Result};
use crate::grid::{Dims3, Grid3};

/// Per-level pre-processing strategy, also the on-disk tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Nast,
    Opst,
    Akdtree,
    Gsp,
    ZeroFill,
    Flat1d,
}

impl Strategy {
    pub fn tag(self) -> u8 {
        match self {
            Strategy::Nast => 0,
            Strategy::Opst => 1,
            Strategy::Akdtree => 2,
            Strategy::Gsp => 3,
            Strategy::ZeroFill => 4,
            Strategy::Flat1d => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => Strategy::Nast,
            1 => Strategy::Opst,
            2 => Strategy::Akdtree,
            3 => Strategy::Gsp,
            4 => Strategy::ZeroFill,
            5 => Strategy::Flat1d,
            t => return Err(Error::corrupt(format!("unknown strategy tag {t}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Nast => "nast",
            Strategy::Opst => "opst",
            Strategy::Akdtree => "akdtree",
            Strategy::Gsp => "gsp",
            Strategy::ZeroFill => "zf",
            Strategy::Flat1d => "1d",
        }
    }
}

/// Occupancy flags of a level at unit-block granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitBlockGrid {
    flags: Grid3<bool>,
    unit_block_size: usize,
}

impl UnitBlockGrid {
    pub fn new(flags: Grid3<bool>, unit_block_size: usize) -> Self {
        UnitBlockGrid {
            flags,
            unit_block_size,
        }
    }

    pub fn from_level(level: &AmrLevel) -> Self {
        UnitBlockGrid {
            flags: level.block_mask(),
            unit_block_size: level.unit_block_size(),
        }
    }

    /// Dims in unit blocks.
    pub fn dims(&self) -> Dims3 {
        self.flags.dims()
    }

    pub fn unit_block_size(&self) -> usize {
        self.unit_block_size
    }

    pub fn flags(&self) -> &Grid3<bool> {
        &self.flags
    }

    pub fn occupied(&self, bx: usize, by: usize, bz: usize) -> bool {
        *self.flags.get(bx, by, bz)
    }

    pub fn occupied_count(&self) -> usize {
        self.flags.as_slice().iter().filter(|f| **f).count()
    }
}

/// A fully-occupied box of unit blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubBlock {
    /// Minimal corner, in unit-block coords.
    pub origin: (usize, usize, usize),
    /// Extent in unit blocks.
    pub shape: (usize, usize, usize),
}

impl SubBlock {
    pub fn unit(origin: (usize, usize, usize)) -> Self {
        SubBlock {
            origin,
            shape: (1, 1, 1),
        }
    }

    pub fn cube(origin: (usize, usize, usize), side: usize) -> Self {
        SubBlock {
            origin,
            shape: (side, side, side),
        }
    }

    pub fn block_volume(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    /// Extent in cells for unit block size `b`.
    pub fn cell_dims(&self, b: usize) -> Dims3 {
        Dims3::new(self.shape.0 * b, self.shape.1 * b, self.shape.2 * b)
    }

    /// Shape with sorted extents; blocks equal up to axis permutation share
    /// a canonical shape.
    pub fn canonical_shape(&self) -> (usize, usize, usize) {
        let mut s = [self.shape.0, self.shape.1, self.shape.2];
        s.sort_unstable();
        (s[0], s[1], s[2])
    }
}

/// Output of empty-region removal: either a list of disjoint sub-blocks that
/// covers the occupied set exactly, or (for whole-grid strategies) the
/// unit-block occupancy mask itself.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanKind {
    SubBlocks(Vec<SubBlock>),
    BlockMask(Grid3<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    pub strategy: Strategy,
    pub kind: PlanKind,
    /// Level dims in unit blocks.
    pub block_dims: Dims3,
    pub unit_block_size: usize,
}

impl PartitionPlan {
    pub fn sub_blocks(&self) -> &[SubBlock] {
        match &self.kind {
            PlanKind::SubBlocks(blocks) => blocks,
            PlanKind::BlockMask(_) => &[],
        }
    }

    /// Occupied unit blocks described by this plan.
    pub fn occupied_block_count(&self) -> usize {
        match &self.kind {
            PlanKind::SubBlocks(blocks) => blocks.iter().map(|s| s.block_volume()).sum(),
            PlanKind::BlockMask(mask) => mask.as_slice().iter().filter(|f| **f).count(),
        }
    }

    /// Check the plan invariants against the grid it was built from:
    /// sub-blocks in bounds, pairwise disjoint, fully occupied, and covering
    /// the occupied set exactly.
    pub fn validate_cover(&self, grid: &UnitBlockGrid) -> Result<()> {
        let blocks = match &self.kind {
            PlanKind::SubBlocks(blocks) => blocks,
            PlanKind::BlockMask(mask) => {
                if mask != grid.flags() {
                    return Err(Error::structure("plan mask differs from grid mask"));
                }
                return Ok(());
            }
        };
        let d = self.block_dims;
        let mut covered: Grid3<u8> = Grid3::zeros(d);
        for sb in blocks {
            let (ox, oy, oz) = sb.origin;
            let (sx, sy, sz) = sb.shape;
            if ox + sx > d.nx || oy + sy > d.ny || oz + sz > d.nz {
                return Err(Error::structure(format!("sub-block {sb:?} out of bounds")));
            }
            for z in oz..oz + sz {
                for y in oy..oy + sy {
                    for x in ox..ox + sx {
                        if !grid.occupied(x, y, z) {
                            return Err(Error::structure(format!(
                                "sub-block {sb:?} covers empty unit block ({x},{y},{z})"
                            )));
                        }
                        if *covered.get(x, y, z) != 0 {
                            return Err(Error::structure(format!(
                                "sub-blocks overlap at unit block ({x},{y},{z})"
                            )));
                        }
                        covered.set(x, y, z, 1);
                    }
                }
            }
        }
        for (i, flag) in grid.flags().as_slice().iter().enumerate() {
            if *flag && covered.as_slice()[i] == 0 {
                return Err(Error::structure(format!(
                    "occupied unit block at linear index {i} not covered"
                )));
            }
        }
        Ok(())
    }

    /// Plan descriptor size on disk, in bytes.
    pub fn serialized_len(&self) -> usize {
        1 + match &self.kind {
            PlanKind::SubBlocks(blocks) => 4 + blocks.len() * (3 * 4 + 3 * 2),
            PlanKind::BlockMask(mask) => 4 + packed_len(mask.len()),
        }
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_u8(self.strategy.tag())?;
        match &self.kind {
            PlanKind::SubBlocks(blocks) => {
                w.write_u32::<LittleEndian>(blocks.len() as u32)?;
                for sb in blocks {
                    w.write_u32::<LittleEndian>(sb.origin.0 as u32)?;
                    w.write_u32::<LittleEndian>(sb.origin.1 as u32)?;
                    w.write_u32::<LittleEndian>(sb.origin.2 as u32)?;
                    w.write_u16::<LittleEndian>(sb.shape.0 as u16)?;
                    w.write_u16::<LittleEndian>(sb.shape.1 as u16)?;
                    w.write_u16::<LittleEndian>(sb.shape.2 as u16)?;
                }
            }
            PlanKind::BlockMask(mask) => {
                w.write_u32::<LittleEndian>(mask.len() as u32)?;
                w.write_all(&pack_flags(mask.as_slice()))?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R, block_dims: Dims3, unit_block_size: usize) -> Result<Self> {
        let strategy = Strategy::from_tag(r.read_u8()?)?;
        let kind = match strategy {
            Strategy::Nast | Strategy::Opst | Strategy::Akdtree => {
                let n = r.read_u32::<LittleEndian>()? as usize;
                let mut blocks = Vec::with_capacity(n);
                for _ in 0..n {
                    let ox = r.read_u32::<LittleEndian>()? as usize;
                    let oy = r.read_u32::<LittleEndian>()? as usize;
                    let oz = r.read_u32::<LittleEndian>()? as usize;
                    let sx = r.read_u16::<LittleEndian>()? as usize;
                    let sy = r.read_u16::<LittleEndian>()? as usize;
                    let sz = r.read_u16::<LittleEndian>()? as usize;
                    blocks.push(SubBlock {
                        origin: (ox, oy, oz),
                        shape: (sx, sy, sz),
                    });
                }
                PlanKind::SubBlocks(blocks)
            }
            Strategy::Gsp | Strategy::ZeroFill | Strategy::Flat1d => {
                let n = r.read_u32::<LittleEndian>()? as usize;
                if n != block_dims.len() {
                    return Err(Error::corrupt(format!(
                        "plan mask length {n} != block grid size {}",
                        block_dims.len()
                    )));
                }
                let mut bytes = vec![0u8; packed_len(n)];
                r.read_exact(&mut bytes)?;
                PlanKind::BlockMask(Grid3::from_vec(block_dims, unpack_flags(&bytes, n)))
            }
        };
        Ok(PartitionPlan {
            strategy,
            kind,
            block_dims,
            unit_block_size,
        })
    }
}

/// One sub-block per occupied unit block, in x-fastest scan order.
pub fn nast_partition(grid: &UnitBlockGrid) -> PartitionPlan {
    let d = grid.dims();
    let mut blocks = Vec::new();
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                if grid.occupied(x, y, z) {
                    blocks.push(SubBlock::unit((x, y, z)));
                }
            }
        }
    }
    PartitionPlan {
        strategy: Strategy::Nast,
        kind: PlanKind::SubBlocks(blocks),
        block_dims: d,
        unit_block_size: grid.unit_block_size(),
    }
}

/// Copy each sub-block's cells out of the level, in plan order.
pub fn extract_values(level: &AmrLevel, plan: &PartitionPlan) -> Vec<Grid3<f64>> {
    let b = plan.unit_block_size;
    plan.sub_blocks()
        .iter()
        .map(|sb| {
            let dims = sb.cell_dims(b);
            let (ox, oy, oz) = (sb.origin.0 * b, sb.origin.1 * b, sb.origin.2 * b);
            let mut out = Grid3::zeros(dims);
            for z in 0..dims.nz {
                for y in 0..dims.ny {
                    for x in 0..dims.nx {
                        out.set(x, y, z, *level.values().get(ox + x, oy + y, oz + z));
                    }
                }
            }
            out
        })
        .collect()
}

/// Put sub-blocks back at their saved coordinates; everything else is empty.
pub fn reassemble(
    plan: &PartitionPlan,
    blocks: &[Grid3<f64>],
    level_index: usize,
) -> Result<AmrLevel> {
    let sub_blocks = match &plan.kind {
        PlanKind::SubBlocks(s) => s,
        PlanKind::BlockMask(_) => {
            return Err(Error::invalid("reassemble needs a sub-block plan"))
        }
    };
    if sub_blocks.len() != blocks.len() {
        return Err(Error::structure(format!(
            "plan has {} sub-blocks but {} value blocks were supplied",
            sub_blocks.len(),
            blocks.len()
        )));
    }
    let b = plan.unit_block_size;
    let dims = Dims3::new(
        plan.block_dims.nx * b,
        plan.block_dims.ny * b,
        plan.block_dims.nz * b,
    );
    let mut values = Grid3::zeros(dims);
    let mut occupancy: Grid3<bool> = Grid3::zeros(dims);
    for (sb, vals) in sub_blocks.iter().zip(blocks) {
        let bd = sb.cell_dims(b);
        if vals.dims() != bd {
            return Err(Error::structure(format!(
                "sub-block {sb:?} expects {} cells, got {}",
                bd,
                vals.dims()
            )));
        }
        let (ox, oy, oz) = (sb.origin.0 * b, sb.origin.1 * b, sb.origin.2 * b);
        if ox + bd.nx > dims.nx || oy + bd.ny > dims.ny || oz + bd.nz > dims.nz {
            return Err(Error::structure(format!("sub-block {sb:?} out of bounds")));
        }
        for z in 0..bd.nz {
            for y in 0..bd.ny {
                for x in 0..bd.nx {
                    if *occupancy.get(ox + x, oy + y, oz + z) {
                        return Err(Error::structure(format!(
                            "sub-blocks overlap at cell ({},{},{})",
                            ox + x,
                            oy + y,
                            oz + z
                        )));
                    }
                    occupancy.set(ox + x, oy + y, oz + z, true);
                    values.set(ox + x, oy + y, oz + z, *vals.get(x, y, z));
                }
            }
        }
    }
    AmrLevel::new(level_index, values, occupancy, b)
}
