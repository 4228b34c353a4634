//! Adaptive k-d tree extraction.
//!
//! The block grid is padded virtually to the smallest enclosing power-of-two
//! cube and split recursively in half, choosing at each step the axis that
//! maximizes the occupancy imbalance between the two halves. Splitting
//! cycles through cube, flat (2:2:1) and slim (2:1:1) shapes; octant counts
//! are computed once per cube node and reused by its flat and slim
//! descendants. A leaf is an entirely empty or entirely full box; full
//! leaves become the sub-blocks.

use super::{PartitionPlan, PlanKind, Strategy, SubBlock, UnitBlockGrid};
use crate::grid::Grid3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Cube,
    Flat,
    Slim,
}

/// A node of the built tree, kept for inspection.
#[derive(Debug)]
pub struct KdNode {
    /// Minimal corner in unit-block coords of the padded grid.
    pub origin: (usize, usize, usize),
    /// Extent in unit blocks (power-of-two halves of the padded cube).
    pub shape: (usize, usize, usize),
    pub kind: NodeKind,
    /// Occupied unit blocks inside the box (virtual padding counts as empty).
    pub count: u64,
    /// For internal cube nodes: the eight octant counts, indexed by
    /// `bx + 2*by + 4*bz` where `bx = 1` selects the upper x half.
    pub octant_counts: Option<[u64; 8]>,
    /// Split axis for internal nodes.
    pub split_axis: Option<Axis>,
    pub children: Option<Box<(KdNode, KdNode)>>,
}

impl KdNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn volume(&self) -> u64 {
        (self.shape.0 * self.shape.1 * self.shape.2) as u64
    }

    pub fn is_full(&self) -> bool {
        self.count == self.volume()
    }

    pub fn is_empty_box(&self) -> bool {
        self.count == 0
    }

    /// Walk the tree depth-first, lower child before upper.
    pub fn visit(&self, f: &mut impl FnMut(&KdNode)) {
        f(self);
        if let Some(children) = &self.children {
            children.0.visit(f);
            children.1.visit(f);
        }
    }
}

/// Build statistics used by the complexity checks.
#[derive(Debug, Clone, Copy, Default)]
pub struct KdStats {
    /// Times the eight octant counts were computed (once per internal cube).
    pub counting_passes: usize,
    pub total_nodes: usize,
    pub cube_nodes: usize,
}

/// Occupancy prefix sums for O(1) box counts, clipped to the real grid.
struct CountField {
    sums: Vec<i64>,
    nx: usize,
    ny: usize,
    nz: usize,
}

impl CountField {
    fn new(flags: &Grid3<bool>) -> Self {
        let d = flags.dims();
        let (nx, ny, nz) = (d.nx + 1, d.ny + 1, d.nz + 1);
        let mut sums = vec![0i64; nx * ny * nz];
        let at = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
        for z in 1..nz {
            for y in 1..ny {
                for x in 1..nx {
                    let occ = *flags.get(x - 1, y - 1, z - 1) as i64;
                    sums[at(x, y, z)] = occ
                        + sums[at(x - 1, y, z)]
                        + sums[at(x, y - 1, z)]
                        + sums[at(x, y, z - 1)]
                        - sums[at(x - 1, y - 1, z)]
                        - sums[at(x - 1, y, z - 1)]
                        - sums[at(x, y - 1, z - 1)]
                        + sums[at(x - 1, y - 1, z - 1)];
                }
            }
        }
        CountField { sums, nx, ny, nz }
    }

    /// Occupied blocks in `[origin, origin + shape)`, clipped to the grid.
    fn count(&self, origin: (usize, usize, usize), shape: (usize, usize, usize)) -> u64 {
        let x0 = origin.0.min(self.nx - 1);
        let y0 = origin.1.min(self.ny - 1);
        let z0 = origin.2.min(self.nz - 1);
        let x1 = (origin.0 + shape.0).min(self.nx - 1);
        let y1 = (origin.1 + shape.1).min(self.ny - 1);
        let z1 = (origin.2 + shape.2).min(self.nz - 1);
        let at = |x: usize, y: usize, z: usize| self.sums[x + self.nx * (y + self.ny * z)];
        let n = at(x1, y1, z1) - at(x0, y1, z1) - at(x1, y0, z1) - at(x1, y1, z0)
            + at(x0, y0, z1)
            + at(x0, y1, z0)
            + at(x1, y0, z0)
            - at(x0, y0, z0);
        n as u64
    }
}

/// Classify a box by its extents: 1:1:1, 2:2:1 or 2:1:1 up to permutation.
pub fn node_kind(shape: (usize, usize, usize)) -> NodeKind {
    let mut s = [shape.0, shape.1, shape.2];
    s.sort_unstable();
    if s[0] == s[2] {
        NodeKind::Cube
    } else if s[0] * 2 == s[1] && s[1] == s[2] {
        NodeKind::Flat
    } else if s[0] == s[1] && s[0] * 2 == s[2] {
        NodeKind::Slim
    } else {
        unreachable!("halving a power-of-two cube cannot produce shape {shape:?}")
    }
}

/// Imbalance of occupancy between the two halves along `axis`, computed
/// from sub-box counts.
fn half_diff(
    node_origin: (usize, usize, usize),
    node_shape: (usize, usize, usize),
    parts: &[((usize, usize, usize), u64)],
    axis: Axis,
) -> u64 {
    let a = axis.index();
    let origin = [node_origin.0, node_origin.1, node_origin.2];
    let shape = [node_shape.0, node_shape.1, node_shape.2];
    let mid = origin[a] + shape[a] / 2;
    let mut low: i128 = 0;
    let mut high: i128 = 0;
    for (part_origin, count) in parts {
        let po = [part_origin.0, part_origin.1, part_origin.2];
        if po[a] < mid {
            low += *count as i128;
        } else {
            high += *count as i128;
        }
    }
    (low - high).unsigned_abs() as u64
}

struct Builder<'a> {
    counts: &'a CountField,
    stats: KdStats,
    leaves: Vec<SubBlock>,
}

impl Builder<'_> {
    /// `parts` are sub-boxes with known counts tiling this node: eight
    /// octants for a cube (computed here), four quarters for a flat node,
    /// two halves for a slim node (both inherited from the cube ancestor).
    fn build(
        &mut self,
        origin: (usize, usize, usize),
        shape: (usize, usize, usize),
        count: u64,
        parts: Vec<((usize, usize, usize), u64)>,
    ) -> KdNode {
        let kind = node_kind(shape);
        self.stats.total_nodes += 1;
        if kind == NodeKind::Cube {
            self.stats.cube_nodes += 1;
        }
        let volume = (shape.0 * shape.1 * shape.2) as u64;
        let mut node = KdNode {
            origin,
            shape,
            kind,
            count,
            octant_counts: None,
            split_axis: None,
            children: None,
        };
        if count == 0 || count == volume {
            if count == volume {
                self.leaves.push(SubBlock {
                    origin,
                    shape,
                });
            }
            return node;
        }
        let (axis, parts) = match kind {
            NodeKind::Cube => {
                // Octant side; shape is a cube of even side here (side 1 is
                // always a leaf).
                let h = shape.0 / 2;
                let mut octants = Vec::with_capacity(8);
                let mut octant_counts = [0u64; 8];
                for bz in 0..2 {
                    for by in 0..2 {
                        for bx in 0..2 {
                            let o = (origin.0 + bx * h, origin.1 + by * h, origin.2 + bz * h);
                            let c = self.counts.count(o, (h, h, h));
                            octant_counts[bx + 2 * by + 4 * bz] = c;
                            octants.push((o, c));
                        }
                    }
                }
                self.stats.counting_passes += 1;
                node.octant_counts = Some(octant_counts);
                let diffs = [
                    half_diff(origin, shape, &octants, Axis::X),
                    half_diff(origin, shape, &octants, Axis::Y),
                    half_diff(origin, shape, &octants, Axis::Z),
                ];
                (pick_axis(&diffs, &[Axis::X, Axis::Y, Axis::Z]), octants)
            }
            NodeKind::Flat => {
                let long: Vec<Axis> = long_axes(shape);
                let diffs: Vec<u64> = long
                    .iter()
                    .map(|a| half_diff(origin, shape, &parts, *a))
                    .collect();
                (pick_axis(&diffs, &long), parts)
            }
            NodeKind::Slim => (long_axes(shape)[0], parts),
        };
        node.split_axis = Some(axis);
        let (lo_box, hi_box) = split_box(origin, shape, axis);
        let a = axis.index();
        let mid = [origin.0, origin.1, origin.2][a] + [shape.0, shape.1, shape.2][a] / 2;
        let (lo_parts, hi_parts): (Vec<_>, Vec<_>) = parts
            .into_iter()
            .partition(|(o, _)| [o.0, o.1, o.2][a] < mid);
        let lo_count = lo_parts.iter().map(|(_, c)| *c).sum();
        let hi_count = hi_parts.iter().map(|(_, c)| *c).sum();
        debug_assert_eq!(lo_count + hi_count, count);
        let lo = self.build(lo_box.0, lo_box.1, lo_count, lo_parts);
        let hi = self.build(hi_box.0, hi_box.1, hi_count, hi_parts);
        node.children = Some(Box::new((lo, hi)));
        node
    }
}

fn long_axes(shape: (usize, usize, usize)) -> Vec<Axis> {
    let s = [shape.0, shape.1, shape.2];
    let max = *s.iter().max().unwrap();
    [Axis::X, Axis::Y, Axis::Z]
        .into_iter()
        .filter(|a| s[a.index()] == max)
        .collect()
}

/// Largest diff wins; ties go to the earlier axis (x before y before z).
fn pick_axis(diffs: &[u64], axes: &[Axis]) -> Axis {
    let mut best = 0;
    for i in 1..diffs.len() {
        if diffs[i] > diffs[best] {
            best = i;
        }
    }
    axes[best]
}

fn split_box(
    origin: (usize, usize, usize),
    shape: (usize, usize, usize),
    axis: Axis,
) -> (
    ((usize, usize, usize), (usize, usize, usize)),
    ((usize, usize, usize), (usize, usize, usize)),
) {
    let mut lo_shape = shape;
    let mut hi_origin = origin;
    match axis {
        Axis::X => {
            lo_shape.0 /= 2;
            hi_origin.0 += lo_shape.0;
        }
        Axis::Y => {
            lo_shape.1 /= 2;
            hi_origin.1 += lo_shape.1;
        }
        Axis::Z => {
            lo_shape.2 /= 2;
            hi_origin.2 += lo_shape.2;
        }
    }
    ((origin, lo_shape), (hi_origin, lo_shape))
}

/// Partition by adaptive k-d tree. Returns the plan (full leaves in
/// depth-first order, lower child first), the tree root, and build stats.
pub fn akdtree_partition(grid: &UnitBlockGrid) -> (PartitionPlan, KdNode, KdStats) {
    let d = grid.dims();
    let side = d
        .nx
        .max(d.ny)
        .max(d.nz)
        .next_power_of_two()
        .max(1);
    let counts = CountField::new(grid.flags());
    let total = counts.count((0, 0, 0), (side, side, side));
    let mut builder = Builder {
        counts: &counts,
        stats: KdStats::default(),
        leaves: Vec::new(),
    };
    let root = builder.build((0, 0, 0), (side, side, side), total, Vec::new());
    let plan = PartitionPlan {
        strategy: Strategy::Akdtree,
        kind: PlanKind::SubBlocks(builder.leaves),
        block_dims: d,
        unit_block_size: grid.unit_block_size(),
    };
    (plan, root, builder.stats)
}
