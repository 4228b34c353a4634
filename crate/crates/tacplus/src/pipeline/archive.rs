//! Compressed archive container (`.tacp`), little-endian.
//!
//! Header: magic `TACP`, u16 version, u8 method, u8 value type, u8 level
//! count, u16 refinement ratio, per level u32 nx/ny/nz + u32 unit block
//! size. Per-level methods then store one record per level: partition plan
//! (strategy tag first), u8 deflate flag, u64 stream length, codec stream
//! bytes. The 3D baseline instead stores every level's block bitmap followed
//! by a single record for the up-sampled uniform grid.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use super::Method;
use crate::amr::ValueKind;
use crate::bitmap::{pack_flags, packed_len, unpack_flags};
use crate::codec::{shape_groups, merged_group_dims, CodecMode, CompressedBlockSet};
use crate::error::{Error, Result};
use crate::grid::{Dims3, Grid3};
use crate::partition::{PartitionPlan, PlanKind};

const MAGIC: &[u8; 4] = b"TACP";
const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelGeom {
    pub dims: Dims3,
    pub unit_block_size: usize,
}

impl LevelGeom {
    pub fn block_dims(&self) -> Dims3 {
        self.dims.scaled_down(self.unit_block_size)
    }
}

/// One compressed level: its plan and entropy-coded stream.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub plan: PartitionPlan,
    pub stream: CompressedBlockSet,
    pub deflate: bool,
    /// Bytes the stream section occupies on disk (after deflate).
    pub stream_disk_len: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArchiveBody {
    PerLevel(Vec<LevelRecord>),
    /// 3D baseline: per-level block masks plus one stream holding the
    /// up-sampled uniform grid as a single block.
    Uniform3d {
        masks: Vec<Grid3<bool>>,
        stream: CompressedBlockSet,
        deflate: bool,
        stream_disk_len: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub method: Method,
    pub value_kind: ValueKind,
    pub refinement_ratio: usize,
    pub levels: Vec<LevelGeom>,
    pub body: ArchiveBody,
}

impl Archive {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Total serialized size in bytes.
    pub fn serialized_len(&self) -> usize {
        let mut n = 4 + 2 + 1 + 1 + 1 + 2 + self.levels.len() * 16;
        match &self.body {
            ArchiveBody::PerLevel(records) => {
                for r in records {
                    n += r.plan.serialized_len() + 1 + 8 + r.stream_disk_len as usize;
                }
            }
            ArchiveBody::Uniform3d {
                masks,
                stream_disk_len,
                ..
            } => {
                n += masks.iter().map(|m| packed_len(m.len())).sum::<usize>();
                n += 1 + 8 + *stream_disk_len as usize;
            }
        }
        n
    }
}

fn write_stream_section<W: Write>(
    w: &mut W,
    stream: &CompressedBlockSet,
    deflate: bool,
) -> Result<u64> {
    let mut raw = Vec::with_capacity(stream.wire_len());
    stream.write(&mut raw)?;
    let bytes = if deflate {
        let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&raw)?;
        enc.finish()?
    } else {
        raw
    };
    w.write_u8(deflate as u8)?;
    w.write_u64::<LittleEndian>(bytes.len() as u64)?;
    w.write_all(&bytes)?;
    Ok(bytes.len() as u64)
}

fn read_stream_section<R: Read>(r: &mut R) -> Result<(Vec<u8>, bool, u64)> {
    let deflate = match r.read_u8()? {
        0 => false,
        1 => true,
        t => return Err(Error::corrupt(format!("bad deflate flag {t}"))),
    };
    let len = r.read_u64::<LittleEndian>()?;
    let mut bytes = vec![0u8; len as usize];
    r.read_exact(&mut bytes)?;
    let raw = if deflate {
        let mut dec = DeflateDecoder::new(&bytes[..]);
        let mut out = Vec::new();
        dec.read_to_end(&mut out)
            .map_err(|e| Error::corrupt(format!("deflate stream: {e}")))?;
        out
    } else {
        bytes
    };
    Ok((raw, deflate, len))
}

/// Cell dims of each encoded array in a level's stream, derived from the
/// plan and the stream's mode byte (independent/shared: one per sub-block;
/// merged: one per shape group; mask plans: a single whole-grid or 1D
/// block).
pub fn stream_block_dims(plan: &PartitionPlan, geom: &LevelGeom, mode: CodecMode) -> Vec<Dims3> {
    let b = geom.unit_block_size;
    match &plan.kind {
        PlanKind::SubBlocks(subs) => {
            if subs.is_empty() {
                return Vec::new();
            }
            let dims: Vec<Dims3> = subs.iter().map(|s| s.cell_dims(b)).collect();
            match mode {
                CodecMode::Merged => shape_groups(&dims)
                    .iter()
                    .map(|(_, members)| {
                        let member_dims: Vec<Dims3> =
                            members.iter().map(|i| dims[*i]).collect();
                        merged_group_dims(&member_dims)
                    })
                    .collect(),
                _ => dims,
            }
        }
        PlanKind::BlockMask(mask) => {
            use crate::partition::Strategy;
            match plan.strategy {
                Strategy::Flat1d => {
                    let occupied = mask.as_slice().iter().filter(|f| **f).count();
                    let cells = occupied * b * b * b;
                    if cells == 0 {
                        Vec::new()
                    } else {
                        vec![Dims3::new(cells, 1, 1)]
                    }
                }
                _ => vec![geom.dims],
            }
        }
    }
}

pub fn write_archive<W: Write>(w: &mut W, archive: &Archive) -> Result<u64> {
    let mut written = 0u64;
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u8(archive.method.tag())?;
    w.write_u8(archive.value_kind.tag())?;
    w.write_u8(
        u8::try_from(archive.levels.len()).map_err(|_| Error::invalid("too many levels"))?,
    )?;
    w.write_u16::<LittleEndian>(
        u16::try_from(archive.refinement_ratio).map_err(|_| Error::invalid("ratio too large"))?,
    )?;
    for g in &archive.levels {
        w.write_u32::<LittleEndian>(g.dims.nx as u32)?;
        w.write_u32::<LittleEndian>(g.dims.ny as u32)?;
        w.write_u32::<LittleEndian>(g.dims.nz as u32)?;
        w.write_u32::<LittleEndian>(g.unit_block_size as u32)?;
    }
    written += 4 + 2 + 1 + 1 + 1 + 2 + archive.levels.len() as u64 * 16;
    match &archive.body {
        ArchiveBody::PerLevel(records) => {
            for r in records {
                r.plan.write(w)?;
                written += r.plan.serialized_len() as u64;
                written += 1 + 8 + write_stream_section(w, &r.stream, r.deflate)?;
            }
        }
        ArchiveBody::Uniform3d {
            masks,
            stream,
            deflate,
            ..
        } => {
            for m in masks {
                w.write_all(&pack_flags(m.as_slice()))?;
                written += packed_len(m.len()) as u64;
            }
            written += 1 + 8 + write_stream_section(w, stream, *deflate)?;
        }
    }
    Ok(written)
}

pub fn read_archive<R: Read>(r: &mut R) -> Result<Archive> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::corrupt("not a compressed archive (bad magic)"));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::corrupt(format!("unsupported archive version {version}")));
    }
    let method = Method::from_tag(r.read_u8()?)?;
    let value_kind = ValueKind::from_tag(r.read_u8()?)
        .map_err(|_| Error::corrupt("bad value type in archive"))?;
    let num_levels = r.read_u8()? as usize;
    let ratio = r.read_u16::<LittleEndian>()? as usize;
    let mut levels = Vec::with_capacity(num_levels);
    for _ in 0..num_levels {
        let nx = r.read_u32::<LittleEndian>()? as usize;
        let ny = r.read_u32::<LittleEndian>()? as usize;
        let nz = r.read_u32::<LittleEndian>()? as usize;
        let b = r.read_u32::<LittleEndian>()? as usize;
        let dims = Dims3::new(nx, ny, nz);
        if b == 0 || !dims.divisible_by(b) {
            return Err(Error::corrupt(format!(
                "level dims {dims} not divisible by unit block size {b}"
            )));
        }
        levels.push(LevelGeom {
            dims,
            unit_block_size: b,
        });
    }
    let body = if method == Method::Baseline3d {
        let mut masks = Vec::with_capacity(num_levels);
        for g in &levels {
            let bd = g.block_dims();
            let mut bytes = vec![0u8; packed_len(bd.len())];
            r.read_exact(&mut bytes)?;
            masks.push(Grid3::from_vec(bd, unpack_flags(&bytes, bd.len())));
        }
        let (raw, deflate, disk_len) = read_stream_section(r)?;
        let dims = if levels.is_empty() {
            Vec::new()
        } else {
            vec![levels[0].dims]
        };
        let stream = CompressedBlockSet::read(&mut &raw[..], value_kind, &dims)?;
        ArchiveBody::Uniform3d {
            masks,
            stream,
            deflate,
            stream_disk_len: disk_len,
        }
    } else {
        let mut records = Vec::with_capacity(num_levels);
        for g in &levels {
            let plan = PartitionPlan::read(r, g.block_dims(), g.unit_block_size)?;
            let (raw, deflate, disk_len) = read_stream_section(r)?;
            if raw.is_empty() {
                return Err(Error::corrupt("empty codec stream"));
            }
            let mode = CodecMode::from_tag(raw[0])?;
            let dims = stream_block_dims(&plan, g, mode);
            let stream = CompressedBlockSet::read(&mut &raw[..], value_kind, &dims)?;
            records.push(LevelRecord {
                plan,
                stream,
                deflate,
                stream_disk_len: disk_len,
            });
        }
        ArchiveBody::PerLevel(records)
    };
    Ok(Archive {
        method,
        value_kind,
        refinement_ratio: ratio,
        levels,
        body,
    })
}

pub fn write_archive_file(path: &Path, archive: &Archive) -> Result<u64> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = write_archive(&mut w, archive)?;
    w.flush()?;
    Ok(n)
}

pub fn read_archive_file(path: &Path) -> Result<Archive> {
    read_archive(&mut BufReader::new(File::open(path)?))
}
