//! Optimized sparse tensor extraction.
//!
//! `BS(x,y,z)` holds the side of the largest fully-occupied cube of unit
//! blocks whose maximal corner is `(x,y,z)`. Cubes are extracted greedily
//! from the high-index corner; after each extraction the field is repaired
//! over a bounded region instead of recomputed from scratch.

use super::{PartitionPlan, PlanKind, Strategy, SubBlock, UnitBlockGrid};
use crate::grid::Grid3;

/// Maximal-cube size field over unit blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BsField {
    sizes: Grid3<u32>,
    max_side: u32,
}

impl BsField {
    pub fn sizes(&self) -> &Grid3<u32> {
        &self.sizes
    }

    pub fn sizes_mut(&mut self) -> &mut Grid3<u32> {
        &mut self.sizes
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        *self.sizes.get(x, y, z)
    }

    /// Side of the largest cube anywhere in the field at init time.
    pub fn max_side(&self) -> u32 {
        self.max_side
    }
}

#[inline]
fn recurrence(sizes: &Grid3<u32>, flags: &Grid3<bool>, x: usize, y: usize, z: usize) -> u32 {
    if !*flags.get(x, y, z) {
        return 0;
    }
    if x == 0 || y == 0 || z == 0 {
        return 1;
    }
    let m = [
        *sizes.get(x - 1, y, z),
        *sizes.get(x, y - 1, z),
        *sizes.get(x, y, z - 1),
        *sizes.get(x - 1, y - 1, z),
        *sizes.get(x, y - 1, z - 1),
        *sizes.get(x - 1, y, z - 1),
        *sizes.get(x - 1, y - 1, z - 1),
    ];
    m.iter().copied().min().unwrap() + 1
}

/// Initialize the size field by the forward recurrence.
pub fn opst_bs_init(grid: &UnitBlockGrid) -> BsField {
    let d = grid.dims();
    let mut sizes: Grid3<u32> = Grid3::zeros(d);
    let mut max_side = 0;
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                let s = recurrence(&sizes, grid.flags(), x, y, z);
                sizes.set(x, y, z, s);
                max_side = max_side.max(s);
            }
        }
    }
    BsField { sizes, max_side }
}

/// Repair the size field after the cube with maximal corner `corner` and
/// side `side` was emptied. Only indices in the box reaching `max_side`
/// blocks past the cube in each positive direction can change, so the
/// recurrence is re-run over that box in ascending order.
pub fn opst_update_bs(
    bs: &mut BsField,
    flags: &Grid3<bool>,
    corner: (usize, usize, usize),
    side: usize,
    max_side: u32,
) {
    let d = flags.dims();
    let lo = (
        corner.0 + 1 - side,
        corner.1 + 1 - side,
        corner.2 + 1 - side,
    );
    let hi = (
        (corner.0 + max_side as usize).min(d.nx - 1),
        (corner.1 + max_side as usize).min(d.ny - 1),
        (corner.2 + max_side as usize).min(d.nz - 1),
    );
    for z in lo.2..=hi.2 {
        for y in lo.1..=hi.1 {
            for x in lo.0..=hi.0 {
                let s = recurrence(&bs.sizes, flags, x, y, z);
                bs.sizes.set(x, y, z, s);
            }
        }
    }
}

/// Extract maximal occupied cubes, scanning indices in descending
/// lexicographic order (z outermost). Returns sub-blocks in extraction
/// order.
pub fn opst_partition(grid: &UnitBlockGrid) -> PartitionPlan {
    let d = grid.dims();
    let mut flags = grid.flags().clone();
    let mut bs = opst_bs_init(grid);
    let max_side = bs.max_side();
    let mut blocks = Vec::new();
    for z in (0..d.nz).rev() {
        for y in (0..d.ny).rev() {
            for x in (0..d.nx).rev() {
                let side = bs.get(x, y, z) as usize;
                if side == 0 {
                    continue;
                }
                let origin = (x + 1 - side, y + 1 - side, z + 1 - side);
                blocks.push(SubBlock::cube(origin, side));
                for cz in origin.2..=z {
                    for cy in origin.1..=y {
                        for cx in origin.0..=x {
                            flags.set(cx, cy, cz, false);
                            bs.sizes.set(cx, cy, cz, 0);
                        }
                    }
                }
                opst_update_bs(&mut bs, &flags, (x, y, z), side, max_side);
            }
        }
    }
    PartitionPlan {
        strategy: Strategy::Opst,
        kind: PlanKind::SubBlocks(blocks),
        block_dims: d,
        unit_block_size: grid.unit_block_size(),
    }
}

/// Brute-force oracle: side of the largest fully-occupied cube whose
/// maximal corner is `(x,y,z)`. Used by tests against the recurrence.
pub fn max_cube_brute_force(flags: &Grid3<bool>, x: usize, y: usize, z: usize) -> u32 {
    let mut best = 0;
    let limit = (x + 1).min(y + 1).min(z + 1);
    'side: for s in 1..=limit {
        for cz in z + 1 - s..=z {
            for cy in y + 1 - s..=y {
                for cx in x + 1 - s..=x {
                    if !*flags.get(cx, cy, cz) {
                        break 'side;
                    }
                }
            }
        }
        best = s;
    }
    best as u32
}

/// Full recomputation oracle for the partial update.
pub fn full_recompute(flags: &Grid3<bool>, unit_block_size: usize) -> BsField {
    opst_bs_init(&UnitBlockGrid::new(flags.clone(), unit_block_size))
}
