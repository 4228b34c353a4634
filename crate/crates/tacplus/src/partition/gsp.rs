//! Ghost-shell padding.
//!
//! Empty unit blocks that touch occupied ones are partially filled before
//! compression so the predictor does not see hard zero walls at region
//! boundaries. For each occupied face neighbor, the mean of that neighbor's
//! boundary slices is written into the adjacent slab of the empty block;
//! where slabs from several neighbors overlap, their contributions are
//! averaged. Decompression zeroes everything outside the mask again.

use crate::amr::AmrLevel;
use crate::error::{Error, Result};
use crate::grid::Grid3;

/// A level's values after padding, plus which blocks were touched.
#[derive(Debug, Clone)]
pub struct GspPadded {
    pub values: Grid3<f64>,
    /// Block coords of empty blocks that received padding.
    pub padded_blocks: Vec<(usize, usize, usize)>,
}

const DIRECTIONS: [(isize, isize, isize); 6] = [
    (1, 0, 0),
    (-1, 0, 0),
    (0, 1, 0),
    (0, -1, 0),
    (0, 0, 1),
    (0, 0, -1),
];

/// Pad empty unit blocks adjacent to occupied ones. `x_layers` is the pad
/// slab depth, `y_slices` the number of neighbor boundary slices averaged.
pub fn gsp_pad(level: &AmrLevel, x_layers: usize, y_slices: usize) -> Result<GspPadded> {
    let b = level.unit_block_size();
    if x_layers == 0 || x_layers > b {
        return Err(Error::invalid(format!(
            "pad depth {x_layers} must be in 1..={b}"
        )));
    }
    if y_slices == 0 || y_slices > b {
        return Err(Error::invalid(format!(
            "boundary slice count {y_slices} must be in 1..={b}"
        )));
    }
    let bd = level.block_dims();
    let mut values = level.values().clone();
    let mut padded_blocks = Vec::new();
    // Per-cell accumulators within one unit block.
    let mut sum = vec![0.0f64; b * b * b];
    let mut hits = vec![0u32; b * b * b];
    for bz in 0..bd.nz {
        for by in 0..bd.ny {
            for bx in 0..bd.nx {
                if level.block_occupied(bx, by, bz) {
                    continue;
                }
                sum.fill(0.0);
                hits.fill(0);
                let mut any = false;
                for (dx, dy, dz) in DIRECTIONS {
                    let nb = (
                        bx as isize + dx,
                        by as isize + dy,
                        bz as isize + dz,
                    );
                    if nb.0 < 0
                        || nb.1 < 0
                        || nb.2 < 0
                        || nb.0 as usize >= bd.nx
                        || nb.1 as usize >= bd.ny
                        || nb.2 as usize >= bd.nz
                    {
                        continue;
                    }
                    let (nbx, nby, nbz) = (nb.0 as usize, nb.1 as usize, nb.2 as usize);
                    if !level.block_occupied(nbx, nby, nbz) {
                        continue;
                    }
                    any = true;
                    let mean = boundary_slice_mean(level, (nbx, nby, nbz), (-dx, -dy, -dz), y_slices);
                    // The slab of this empty block facing the neighbor.
                    accumulate_slab(&mut sum, &mut hits, b, (dx, dy, dz), x_layers, mean);
                }
                if !any {
                    continue;
                }
                padded_blocks.push((bx, by, bz));
                let (cx, cy, cz) = (bx * b, by * b, bz * b);
                for lz in 0..b {
                    for ly in 0..b {
                        for lx in 0..b {
                            let i = lx + b * (ly + b * lz);
                            if hits[i] > 0 {
                                values.set(cx + lx, cy + ly, cz + lz, sum[i] / hits[i] as f64);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(GspPadded {
        values,
        padded_blocks,
    })
}

/// Mean of the `y_slices` boundary slices of the occupied block at `block`,
/// on the face pointing in direction `face` (unit vector).
fn boundary_slice_mean(
    level: &AmrLevel,
    block: (usize, usize, usize),
    face: (isize, isize, isize),
    y_slices: usize,
) -> f64 {
    let b = level.unit_block_size();
    let (cx, cy, cz) = (block.0 * b, block.1 * b, block.2 * b);
    let mut total = 0.0;
    let mut n = 0usize;
    for lz in 0..b {
        for ly in 0..b {
            for lx in 0..b {
                let inside = match face {
                    (-1, 0, 0) => lx < y_slices,
                    (1, 0, 0) => lx >= b - y_slices,
                    (0, -1, 0) => ly < y_slices,
                    (0, 1, 0) => ly >= b - y_slices,
                    (0, 0, -1) => lz < y_slices,
                    (0, 0, 1) => lz >= b - y_slices,
                    _ => unreachable!(),
                };
                if inside {
                    total += *level.values().get(cx + lx, cy + ly, cz + lz);
                    n += 1;
                }
            }
        }
    }
    total / n as f64
}

/// Add `mean` into the `x_layers`-deep slab of an empty block on the face
/// pointing toward `dir` (the direction of the occupied neighbor).
fn accumulate_slab(
    sum: &mut [f64],
    hits: &mut [u32],
    b: usize,
    dir: (isize, isize, isize),
    x_layers: usize,
    mean: f64,
) {
    for lz in 0..b {
        for ly in 0..b {
            for lx in 0..b {
                let inside = match dir {
                    (1, 0, 0) => lx >= b - x_layers,
                    (-1, 0, 0) => lx < x_layers,
                    (0, 1, 0) => ly >= b - x_layers,
                    (0, -1, 0) => ly < x_layers,
                    (0, 0, 1) => lz >= b - x_layers,
                    (0, 0, -1) => lz < x_layers,
                    _ => unreachable!(),
                };
                if inside {
                    let i = lx + b * (ly + b * lz);
                    sum[i] += mean;
                    hits[i] += 1;
                }
            }
        }
    }
}

/// Drop all padded values: cells outside the mask become zero again and the
/// original level is restored bit-exactly.
pub fn gsp_unpad(
    values: &Grid3<f64>,
    block_mask: &Grid3<bool>,
    unit_block_size: usize,
    level_index: usize,
) -> Result<AmrLevel> {
    let b = unit_block_size;
    let bd = block_mask.dims();
    if values.dims() != bd.scaled_up(b) {
        return Err(Error::structure(format!(
            "padded values dims {} inconsistent with {} unit blocks of size {b}",
            values.dims(),
            bd
        )));
    }
    let dims = values.dims();
    let mut out = Grid3::zeros(dims);
    let mut occupancy = Grid3::zeros(dims);
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                if *block_mask.get(x / b, y / b, z / b) {
                    out.set(x, y, z, *values.get(x, y, z));
                    occupancy.set(x, y, z, true);
                }
            }
        }
    }
    AmrLevel::new(level_index, out, occupancy, b)
}
