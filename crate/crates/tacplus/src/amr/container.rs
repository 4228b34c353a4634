//! AMR container file (`.amr`), little-endian throughout.
//!
//! Layout: magic `AMRC`, u16 version, u8 value type (0 = f32, 1 = f64),
//! u8 level count, u16 refinement ratio, then one record per level (finest
//! first): u32 nx, ny, nz, u32 unit block size, occupancy bitmap with one
//! bit per unit block (x fastest, byte-padded), raw cell values x fastest
//! with zeros in unoccupied cells.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{AmrDataset, AmrLevel, ValueKind};
use crate::bitmap::{pack_flags, packed_len, unpack_flags};
use crate::error::{Error, Result};
use crate::grid::{Dims3, Grid3};

const MAGIC: &[u8; 4] = b"AMRC";
const VERSION: u16 = 1;

pub fn write_amrc<W: Write>(w: &mut W, ds: &AmrDataset) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u8(ds.value_kind().tag())?;
    w.write_u8(u8::try_from(ds.num_levels()).map_err(|_| Error::invalid("too many levels"))?)?;
    w.write_u16::<LittleEndian>(
        u16::try_from(ds.refinement_ratio()).map_err(|_| Error::invalid("ratio too large"))?,
    )?;
    for level in ds.levels() {
        let d = level.dims();
        w.write_u32::<LittleEndian>(d.nx as u32)?;
        w.write_u32::<LittleEndian>(d.ny as u32)?;
        w.write_u32::<LittleEndian>(d.nz as u32)?;
        w.write_u32::<LittleEndian>(level.unit_block_size() as u32)?;
        w.write_all(&pack_flags(level.block_mask().as_slice()))?;
        match ds.value_kind() {
            ValueKind::F32 => {
                for v in level.values().as_slice() {
                    w.write_f32::<LittleEndian>(*v as f32)?;
                }
            }
            ValueKind::F64 => {
                for v in level.values().as_slice() {
                    w.write_f64::<LittleEndian>(*v)?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_amrc<R: Read>(r: &mut R) -> Result<AmrDataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::data("not an AMR container (bad magic)"));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::data(format!("unsupported container version {version}")));
    }
    let value_kind = ValueKind::from_tag(r.read_u8()?)?;
    let num_levels = r.read_u8()? as usize;
    let ratio = r.read_u16::<LittleEndian>()? as usize;
    let mut levels = Vec::with_capacity(num_levels);
    for i in 0..num_levels {
        let nx = r.read_u32::<LittleEndian>()? as usize;
        let ny = r.read_u32::<LittleEndian>()? as usize;
        let nz = r.read_u32::<LittleEndian>()? as usize;
        let b = r.read_u32::<LittleEndian>()? as usize;
        let dims = Dims3::new(nx, ny, nz);
        if b == 0 || !dims.divisible_by(b) {
            return Err(Error::data(format!(
                "level {i}: dims {dims} not divisible by unit block size {b}"
            )));
        }
        let bd = dims.scaled_down(b);
        let mut bitmap = vec![0u8; packed_len(bd.len())];
        r.read_exact(&mut bitmap)?;
        let block_flags = unpack_flags(&bitmap, bd.len());
        let mut values = Vec::with_capacity(dims.len());
        match value_kind {
            ValueKind::F32 => {
                for _ in 0..dims.len() {
                    values.push(r.read_f32::<LittleEndian>()? as f64);
                }
            }
            ValueKind::F64 => {
                for _ in 0..dims.len() {
                    values.push(r.read_f64::<LittleEndian>()?);
                }
            }
        }
        let occupancy = expand_block_mask(&Grid3::from_vec(bd, block_flags), b, dims);
        levels.push(AmrLevel::new(i, Grid3::from_vec(dims, values), occupancy, b)?);
    }
    AmrDataset::new(levels, ratio, value_kind)
}

pub fn expand_block_mask(mask: &Grid3<bool>, b: usize, dims: Dims3) -> Grid3<bool> {
    let mut occ = Grid3::zeros(dims);
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            for x in 0..dims.nx {
                occ.set(x, y, z, *mask.get(x / b, y / b, z / b));
            }
        }
    }
    occ
}

pub fn write_amrc_file(path: &Path, ds: &AmrDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_amrc(&mut w, ds)?;
    w.flush()?;
    Ok(())
}

pub fn read_amrc_file(path: &Path) -> Result<AmrDataset> {
    read_amrc(&mut BufReader::new(File::open(path)?))
}
