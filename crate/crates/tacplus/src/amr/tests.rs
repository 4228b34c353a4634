use super::*;
use crate::error::Error;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Build a level from a block-granular mask: occupied blocks get values from
/// `f(x, y, z)`, unoccupied cells stay zero.
pub(crate) fn level_from_block_mask(
    index: usize,
    block_dims: Dims3,
    b: usize,
    occupied: impl Fn(usize, usize, usize) -> bool,
    f: impl Fn(usize, usize, usize) -> f64,
) -> AmrLevel {
    let dims = block_dims.scaled_up(b);
    let mut values = Grid3::zeros(dims);
    let mut occ = Grid3::zeros(dims);
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                if occupied(x / b, y / b, z / b) {
                    occ.set(x, y, z, true);
                    values.set(x, y, z, f(x, y, z));
                }
            }
        }
    }
    AmrLevel::new(index, values, occ, b).unwrap()
}

/// Random 2-level dataset: each coarse unit block is either kept coarse or
/// promoted wholesale to the fine level.
pub(crate) fn random_two_level(seed: u64, fine_dims: Dims3, b: usize, r: usize) -> AmrDataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let coarse_bd = fine_dims.scaled_down(r).scaled_down(b);
    let promoted: Vec<bool> = (0..coarse_bd.len()).map(|_| rng.gen_bool(0.5)).collect();
    let promoted = Grid3::from_vec(coarse_bd, promoted);
    let mut vals: Vec<f64> = Vec::new();
    for _ in 0..fine_dims.len() {
        vals.push((rng.gen::<f32>() * 100.0) as f64);
    }
    let fine = level_from_block_mask(
        0,
        fine_dims.scaled_down(b),
        b,
        |bx, by, bz| *promoted.get(bx / r, by / r, bz / r),
        |x, y, z| vals[fine_dims.index(x, y, z)],
    );
    let coarse = level_from_block_mask(
        1,
        coarse_bd,
        b,
        |bx, by, bz| !promoted.get(bx, by, bz),
        |x, y, z| ((x * 31 + y * 7 + z) % 97) as f64 * 0.5 + 1.0,
    );
    AmrDataset::new(vec![fine, coarse], r, ValueKind::F64).unwrap()
}

fn full_level(index: usize, dims: Dims3, b: usize, f: impl Fn(usize, usize, usize) -> f64) -> AmrLevel {
    level_from_block_mask(index, dims.scaled_down(b), b, |_, _, _| true, f)
}

#[test]
fn density_empty_is_zero() {
    let level = level_from_block_mask(0, Dims3::cube(2), 2, |_, _, _| false, |_, _, _| 0.0);
    assert_eq!(density(&level), 0.0);
}

#[test]
fn density_counts_occupied_blocks() {
    // 3 of 8 unit blocks occupied.
    let level = level_from_block_mask(
        0,
        Dims3::cube(2),
        2,
        |bx, by, bz| (bx, by, bz) == (0, 0, 0) || (bx, by, bz) == (1, 0, 0) || (bx, by, bz) == (0, 1, 1),
        |_, _, _| 1.0,
    );
    assert_eq!(density(&level), 0.375);
}

#[test]
fn density_ignores_value_scale() {
    let l1 = level_from_block_mask(0, Dims3::cube(4), 2, |bx, _, _| bx % 2 == 0, |_, _, _| 1.0);
    let l2 = level_from_block_mask(0, Dims3::cube(4), 2, |bx, _, _| bx % 2 == 0, |_, _, _| 1e9);
    assert_eq!(density(&l1), density(&l2));
}

#[test]
fn upsample_replicates_single_cell() {
    let level = full_level(0, Dims3::cube(1), 1, |_, _, _| 5.0);
    let up = upsample(&level, 2).unwrap();
    assert_eq!(up.dims(), Dims3::cube(2));
    assert!(up.values().as_slice().iter().all(|v| *v == 5.0));
    assert!(up.occupancy().as_slice().iter().all(|o| *o));
}

#[test]
fn upsample_rate_one_is_identity() {
    let level = full_level(0, Dims3::cube(2), 2, |x, y, z| (x + 10 * y + 100 * z) as f64);
    let up = upsample(&level, 1).unwrap();
    assert_eq!(up, level);
}

#[test]
fn upsample_rate_zero_rejected() {
    let level = full_level(0, Dims3::cube(2), 2, |_, _, _| 1.0);
    assert!(matches!(upsample(&level, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn upsample_matches_index_mapping_oracle() {
    let level = full_level(0, Dims3::cube(2), 2, |x, y, z| (x + 10 * y + 100 * z) as f64);
    let up = upsample(&level, 2).unwrap();
    assert_eq!(up.dims(), Dims3::cube(4));
    for z in 0..4 {
        for y in 0..4 {
            for x in 0..4 {
                assert_eq!(up.values().get(x, y, z), level.values().get(x / 2, y / 2, z / 2));
            }
        }
    }
}

#[test]
fn flatten_single_level_copies_values() {
    let level = full_level(0, Dims3::cube(4), 2, |x, y, z| (x + y + z) as f64);
    let ds = AmrDataset::new(vec![level.clone()], 2, ValueKind::F64).unwrap();
    let g = flatten_to_uniform(&ds).unwrap();
    assert_eq!(g.values, *level.values());
    assert!(g.provenance.as_slice().iter().all(|p| *p == 0));
}

#[test]
fn flatten_with_empty_fine_equals_upsampled_coarse() {
    let fine = level_from_block_mask(0, Dims3::cube(2), 2, |_, _, _| false, |_, _, _| 0.0);
    let coarse = full_level(1, Dims3::cube(2), 1, |x, y, z| (1 + x + 2 * y + 4 * z) as f64);
    let ds = AmrDataset::new(vec![fine, coarse.clone()], 2, ValueKind::F64).unwrap();
    let g = flatten_to_uniform(&ds).unwrap();
    let up = upsample(&coarse, 2).unwrap();
    assert_eq!(g.values, *up.values());
}

#[test]
fn flatten_matches_per_cell_ownership_oracle() {
    let ds = random_two_level(7, Dims3::cube(16), 2, 2);
    let g = flatten_to_uniform(&ds).unwrap();
    // Oracle: look up each finest cell in whichever level owns it.
    for z in 0..16 {
        for y in 0..16 {
            for x in 0..16 {
                let fine = ds.level(0);
                let (expect, level_idx) = if *fine.occupancy().get(x, y, z) {
                    (*fine.values().get(x, y, z), 0)
                } else {
                    (*ds.level(1).values().get(x / 2, y / 2, z / 2), 1)
                };
                assert_eq!(*g.values.get(x, y, z), expect);
                assert_eq!(*g.provenance.get(x, y, z), level_idx);
            }
        }
    }
}

#[test]
fn split_of_flatten_is_identity() {
    for seed in [1, 2, 3] {
        let ds = random_two_level(seed, Dims3::cube(16), 2, 2);
        let g = flatten_to_uniform(&ds).unwrap();
        let back = split_uniform(&g, &ds.structure()).unwrap();
        assert_eq!(back, ds);
    }
}

#[test]
fn split_averages_replicas() {
    // One coarse cell whose 8 fine replicas are {1,1,1,1,3,3,3,3}.
    let dims = Dims3::cube(2);
    let mut values = Grid3::zeros(dims);
    for z in 0..2 {
        for y in 0..2 {
            for x in 0..2 {
                values.set(x, y, z, if z == 0 { 1.0 } else { 3.0 });
            }
        }
    }
    let g = UniformGrid {
        values,
        provenance: Grid3::filled(dims, 1),
    };
    let st = DatasetStructure {
        masks: vec![Grid3::filled(dims, false), Grid3::filled(Dims3::cube(1), true)],
        unit_block_sizes: vec![1, 1],
        refinement_ratio: 2,
        value_kind: ValueKind::F64,
    };
    let ds = split_uniform(&g, &st).unwrap();
    assert_eq!(*ds.level(1).values().get(0, 0, 0), 2.0);
}

#[test]
fn split_rejects_mask_dim_mismatch() {
    let ds = random_two_level(1, Dims3::cube(16), 2, 2);
    let g = flatten_to_uniform(&ds).unwrap();
    let mut st = ds.structure();
    st.masks[0] = Grid3::filled(Dims3::cube(8), true);
    assert!(matches!(split_uniform(&g, &st), Err(Error::Structure(_))));
}

#[test]
fn overlapping_ownership_rejected() {
    // Coarse level fully occupied *and* a fine block occupied: redundant
    // coverage as in patch-based AMR.
    let fine = level_from_block_mask(0, Dims3::cube(2), 2, |bx, _, _| bx == 0, |_, _, _| 1.0);
    let coarse = full_level(1, Dims3::cube(2), 1, |_, _, _| 2.0);
    let err = AmrDataset::new(vec![fine, coarse], 2, ValueKind::F64).unwrap_err();
    assert!(matches!(err, Error::Structure(_)));
    assert!(err.to_string().contains("patch-based"));
}

#[test]
fn missing_coverage_rejected() {
    let fine = level_from_block_mask(0, Dims3::cube(2), 2, |_, _, _| false, |_, _, _| 0.0);
    let coarse = level_from_block_mask(1, Dims3::cube(2), 1, |_, _, _| false, |_, _, _| 0.0);
    assert!(matches!(
        AmrDataset::new(vec![fine, coarse], 2, ValueKind::F64),
        Err(Error::Structure(_))
    ));
}

#[test]
fn misaligned_mask_rejected() {
    let dims = Dims3::cube(2);
    let mut occ = Grid3::zeros(dims);
    occ.set(0, 0, 0, true); // half a unit block
    let values = Grid3::zeros(dims);
    assert!(matches!(
        AmrLevel::new(0, values, occ, 2),
        Err(Error::Structure(_))
    ));
}

#[test]
fn nonzero_sentinel_rejected() {
    let dims = Dims3::cube(2);
    let occ = Grid3::filled(dims, false);
    let mut values = Grid3::zeros(dims);
    values.set(1, 1, 1, 4.0);
    assert!(matches!(
        AmrLevel::new(0, values, occ, 2),
        Err(Error::Structure(_))
    ));
}

#[test]
fn global_range_spans_all_levels() {
    let fine = level_from_block_mask(0, Dims3::cube(2), 2, |bx, _, _| bx == 0, |_, _, _| 10.0);
    let coarse = level_from_block_mask(1, Dims3::cube(2), 1, |bx, _, _| bx == 1, |_, _, _| 2.0);
    let ds = AmrDataset::new(vec![fine, coarse], 2, ValueKind::F64).unwrap();
    assert_eq!(ds.global_range(), 8.0);
}

#[test]
fn container_round_trip_f64() {
    let ds = random_two_level(11, Dims3::cube(16), 2, 2);
    let mut buf = Vec::new();
    write_amrc(&mut buf, &ds).unwrap();
    let back = read_amrc(&mut &buf[..]).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn container_round_trip_f32() {
    // f32 datasets must hold f32-representable values for bit-exactness.
    let fine = level_from_block_mask(0, Dims3::cube(2), 2, |bx, _, _| bx == 0, |x, y, z| {
        ((x + 2 * y + 3 * z) as f32 * 0.25) as f64
    });
    let coarse = level_from_block_mask(1, Dims3::cube(2), 1, |bx, _, _| bx == 1, |_, _, _| 0.5);
    let ds = AmrDataset::new(vec![fine, coarse], 2, ValueKind::F32).unwrap();
    let mut buf = Vec::new();
    write_amrc(&mut buf, &ds).unwrap();
    let back = read_amrc(&mut &buf[..]).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn container_rejects_bad_magic() {
    let err = read_amrc(&mut &b"NOPE\x01\x00"[..]).unwrap_err();
    assert!(matches!(err, Error::Data(_)));
}
