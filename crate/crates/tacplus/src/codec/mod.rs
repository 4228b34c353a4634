//! Error-bounded prediction/quantization/Huffman codec.
//!
//! Values are predicted by the first-order 3D Lorenzo predictor over already
//! reconstructed neighbors, the residual is quantized against the absolute
//! error bound, and the codes are entropy-coded. Three entropy modes exist:
//! one Huffman table per block, one per shape group over merged arrays, and
//! a single shared table for all blocks of a level (SHE). Prediction never
//! crosses block boundaries except in merged mode, where that is the point.

mod bitio;
mod huffman;

pub use bitio::{BitReader, BitWriter};
pub use huffman::HuffmanTable;

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use crate::amr::ValueKind;
use crate::error::{Error, Result};
use crate::grid::{Dims3, Grid3};

/// Quantization code range; codes are u16 with 0 reserved as the escape.
pub const CODE_RANGE: u32 = 65536;
const CODE_MID: i64 = (CODE_RANGE / 2) as i64; // 32768
const MAX_Q: i64 = CODE_MID - 2; // |q| < R/2 - 1

/// User-facing error bound: absolute, or relative to the global value range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorBound {
    Abs(f64),
    Rel(f64),
}

impl ErrorBound {
    pub fn magnitude(self) -> f64 {
        match self {
            ErrorBound::Abs(m) | ErrorBound::Rel(m) => m,
        }
    }

    pub fn mode_name(self) -> &'static str {
        match self {
            ErrorBound::Abs(_) => "abs",
            ErrorBound::Rel(_) => "rel",
        }
    }
}

/// Turn an error bound into the absolute bound used by the quantizer.
pub fn resolve_eb(eb: ErrorBound, global_range: f64) -> Result<f64> {
    let m = eb.magnitude();
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::invalid(format!("error bound must be positive, got {m}")));
    }
    match eb {
        ErrorBound::Abs(m) => Ok(m),
        ErrorBound::Rel(m) => {
            if !(global_range > 0.0) {
                return Err(Error::DegenerateRange(format!(
                    "relative bound {m} needs a positive value range, got {global_range}"
                )));
            }
            Ok(m * global_range)
        }
    }
}

/// Quantization codes for one block at a given absolute bound.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBlock {
    pub dims: Dims3,
    /// One code per cell; 0 marks an unpredictable cell.
    pub codes: Vec<u16>,
    /// Exact values of unpredictable cells, in traversal order.
    pub unpredictable: Vec<f64>,
    pub eb_abs: f64,
}

#[inline]
fn lorenzo_pred(recon: &[f64], d: Dims3, x: usize, y: usize, z: usize) -> f64 {
    // Inclusion-exclusion over the already-visited corner neighbors;
    // out-of-range terms are zero.
    let at = |xi: usize, yi: usize, zi: usize| recon[d.index(xi, yi, zi)];
    let mut p = 0.0;
    if x > 0 {
        p += at(x - 1, y, z);
    }
    if y > 0 {
        p += at(x, y - 1, z);
    }
    if z > 0 {
        p += at(x, y, z - 1);
    }
    if x > 0 && y > 0 {
        p -= at(x - 1, y - 1, z);
    }
    if x > 0 && z > 0 {
        p -= at(x - 1, y, z - 1);
    }
    if y > 0 && z > 0 {
        p -= at(x, y - 1, z - 1);
    }
    if x > 0 && y > 0 && z > 0 {
        p += at(x - 1, y - 1, z - 1);
    }
    p
}

/// Closed-loop quantization: predictions use reconstructed values, so the
/// decoder sees the same state and `|reconstructed - original| <= eb_abs`
/// holds at every cell. Reconstructions are snapped to the value width so
/// the bound still holds for what is actually stored.
pub fn quantize_block(values: &Grid3<f64>, eb_abs: f64, kind: ValueKind) -> Result<QuantizedBlock> {
    if !(eb_abs > 0.0) || !eb_abs.is_finite() {
        return Err(Error::invalid(format!("absolute bound must be positive, got {eb_abs}")));
    }
    let d = values.dims();
    let mut codes = Vec::with_capacity(d.len());
    let mut unpredictable = Vec::new();
    let mut recon = vec![0.0f64; d.len()];
    let twice_eb = 2.0 * eb_abs;
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                let i = d.index(x, y, z);
                let val = values.as_slice()[i];
                if !val.is_finite() {
                    return Err(Error::data(format!(
                        "non-finite value at ({x},{y},{z})"
                    )));
                }
                let pred = lorenzo_pred(&recon, d, x, y, z);
                let qf = ((val - pred) / twice_eb).round();
                let mut coded = false;
                if qf.is_finite() && qf.abs() <= MAX_Q as f64 {
                    let q = qf as i64;
                    let rec = kind.snap(pred + q as f64 * twice_eb);
                    if (rec - val).abs() <= eb_abs {
                        codes.push((q + CODE_MID) as u16);
                        recon[i] = rec;
                        coded = true;
                    }
                }
                if !coded {
                    codes.push(0);
                    unpredictable.push(val);
                    recon[i] = val;
                }
            }
        }
    }
    Ok(QuantizedBlock {
        dims: d,
        codes,
        unpredictable,
        eb_abs,
    })
}

/// Mirror of [`quantize_block`]: replays the closed loop.
pub fn dequantize_block(qb: &QuantizedBlock, kind: ValueKind) -> Result<Grid3<f64>> {
    let d = qb.dims;
    if qb.codes.len() != d.len() {
        return Err(Error::corrupt(format!(
            "code count {} != cell count {}",
            qb.codes.len(),
            d.len()
        )));
    }
    let twice_eb = 2.0 * qb.eb_abs;
    let mut recon = vec![0.0f64; d.len()];
    let mut next_exact = 0usize;
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                let i = d.index(x, y, z);
                let code = qb.codes[i];
                recon[i] = if code == 0 {
                    let v = *qb
                        .unpredictable
                        .get(next_exact)
                        .ok_or_else(|| Error::corrupt("unpredictable stream underrun"))?;
                    next_exact += 1;
                    v
                } else {
                    let q = code as i64 - CODE_MID;
                    let pred = lorenzo_pred(&recon, d, x, y, z);
                    kind.snap(pred + q as f64 * twice_eb)
                };
            }
        }
    }
    if next_exact != qb.unpredictable.len() {
        return Err(Error::corrupt("unpredictable stream overrun"));
    }
    Ok(Grid3::from_vec(d, recon))
}

/// Entropy-coding layout of a level's blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecMode {
    /// One Huffman table per block.
    Independent,
    /// Blocks of the same canonical shape merged into one array, one table
    /// per group; prediction runs across the concatenation boundaries.
    Merged,
    /// Shared Huffman Encoding: independent prediction per block, a single
    /// table for all of them.
    Shared,
}

impl CodecMode {
    pub fn tag(self) -> u8 {
        match self {
            CodecMode::Independent => 0,
            CodecMode::Merged => 1,
            CodecMode::Shared => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => CodecMode::Independent,
            1 => CodecMode::Merged,
            2 => CodecMode::Shared,
            t => return Err(Error::corrupt(format!("unknown codec mode {t}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            CodecMode::Independent => "independent",
            CodecMode::Merged => "merged",
            CodecMode::Shared => "she",
        }
    }
}

/// One entropy-coded block (or merged group) plus its escape values.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBlock {
    /// Cell dims of the encoded array. Not serialized; the reader derives
    /// dims from the partition plan.
    pub dims: Dims3,
    pub payload: Vec<u8>,
    pub payload_bits: u64,
    pub unpredictable: Vec<f64>,
}

/// A level's entropy-coded blocks: table(s), payloads, escape values, and
/// the (always empty) regression coefficient stream carried for layout
/// compatibility.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedBlockSet {
    pub mode: CodecMode,
    pub eb_abs: f64,
    pub value_kind: ValueKind,
    /// One table (Shared), one per group (Merged) or one per block
    /// (Independent).
    pub tables: Vec<HuffmanTable>,
    pub blocks: Vec<EncodedBlock>,
    pub regression_coeffs: Vec<f64>,
}

impl CompressedBlockSet {
    fn table_for_block(&self, block_index: usize) -> Result<&HuffmanTable> {
        let i = match self.mode {
            CodecMode::Shared => 0,
            CodecMode::Independent | CodecMode::Merged => block_index,
        };
        self.tables
            .get(i)
            .ok_or_else(|| Error::corrupt(format!("missing table for block {block_index}")))
    }

    /// Serialized size in bytes of the (undeflated) stream.
    pub fn wire_len(&self) -> usize {
        let tables: usize = self.tables.iter().map(|t| t.wire_len()).sum();
        let blocks: usize = self
            .blocks
            .iter()
            .map(|b| {
                4 + 8
                    + b.payload.len()
                    + 4
                    + b.unpredictable.len() * self.value_kind.bytes_per_value()
            })
            .sum();
        1 + 8 + 4 + tables + 4 + blocks
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        debug_assert!(self.regression_coeffs.is_empty());
        w.write_u8(self.mode.tag())?;
        w.write_f64::<LittleEndian>(self.eb_abs)?;
        w.write_u32::<LittleEndian>(self.tables.len() as u32)?;
        for t in &self.tables {
            t.write(w)?;
        }
        w.write_u32::<LittleEndian>(self.blocks.len() as u32)?;
        for b in &self.blocks {
            w.write_u32::<LittleEndian>(b.dims.len() as u32)?;
            w.write_u64::<LittleEndian>(b.payload_bits)?;
            w.write_all(&b.payload)?;
            w.write_u32::<LittleEndian>(b.unpredictable.len() as u32)?;
            for v in &b.unpredictable {
                match self.value_kind {
                    ValueKind::F32 => w.write_f32::<LittleEndian>(*v as f32)?,
                    ValueKind::F64 => w.write_f64::<LittleEndian>(*v)?,
                }
            }
        }
        Ok(())
    }

    /// `block_dims` gives each encoded array's dims (from the plan); the
    /// stored per-block code counts are checked against it.
    pub fn read<R: Read>(r: &mut R, value_kind: ValueKind, block_dims: &[Dims3]) -> Result<Self> {
        let mode = CodecMode::from_tag(r.read_u8()?)?;
        let eb_abs = r.read_f64::<LittleEndian>()?;
        let table_count = r.read_u32::<LittleEndian>()? as usize;
        let mut tables = Vec::with_capacity(table_count);
        for _ in 0..table_count {
            tables.push(HuffmanTable::read(r)?);
        }
        let block_count = r.read_u32::<LittleEndian>()? as usize;
        if block_count != block_dims.len() {
            return Err(Error::corrupt(format!(
                "stream has {block_count} blocks, plan describes {}",
                block_dims.len()
            )));
        }
        let mut blocks = Vec::with_capacity(block_count);
        for dims in block_dims {
            let code_count = r.read_u32::<LittleEndian>()? as usize;
            if code_count != dims.len() {
                return Err(Error::corrupt(format!(
                    "block code count {code_count} != plan cell count {}",
                    dims.len()
                )));
            }
            let payload_bits = r.read_u64::<LittleEndian>()?;
            let n_bytes = payload_bits.div_ceil(8) as usize;
            let mut payload = vec![0u8; n_bytes];
            r.read_exact(&mut payload)?;
            let n_exact = r.read_u32::<LittleEndian>()? as usize;
            let mut unpredictable = Vec::with_capacity(n_exact);
            for _ in 0..n_exact {
                unpredictable.push(match value_kind {
                    ValueKind::F32 => r.read_f32::<LittleEndian>()? as f64,
                    ValueKind::F64 => r.read_f64::<LittleEndian>()?,
                });
            }
            blocks.push(EncodedBlock {
                dims: *dims,
                payload,
                payload_bits,
                unpredictable,
            });
        }
        Ok(CompressedBlockSet {
            mode,
            eb_abs,
            value_kind,
            tables,
            blocks,
            regression_coeffs: Vec::new(),
        })
    }
}

fn quantize_all(blocks: &[Grid3<f64>], eb_abs: f64, kind: ValueKind) -> Result<Vec<QuantizedBlock>> {
    blocks
        .par_iter()
        .map(|b| quantize_block(b, eb_abs, kind))
        .collect()
}

fn histogram_of(blocks: &[&QuantizedBlock]) -> Vec<u64> {
    let mut h = vec![0u64; CODE_RANGE as usize];
    for qb in blocks {
        for c in &qb.codes {
            h[*c as usize] += 1;
        }
    }
    h
}

fn encode_one(qb: &QuantizedBlock, table: &HuffmanTable) -> Result<EncodedBlock> {
    let mut w = BitWriter::new();
    table.encode(&qb.codes, &mut w)?;
    let payload_bits = w.bit_len();
    Ok(EncodedBlock {
        dims: qb.dims,
        payload: w.into_bytes(),
        payload_bits,
        unpredictable: qb.unpredictable.clone(),
    })
}

fn decode_one(block: &EncodedBlock, table: &HuffmanTable, eb_abs: f64) -> Result<QuantizedBlock> {
    let mut r = BitReader::new(&block.payload, block.payload_bits);
    let codes = table.decode(&mut r, block.dims.len())?;
    Ok(QuantizedBlock {
        dims: block.dims,
        codes,
        unpredictable: block.unpredictable.clone(),
        eb_abs,
    })
}

/// Shared Huffman Encoding: quantize each block independently, build one
/// table over all codes, encode in plan order.
pub fn she_compress(
    blocks: &[Grid3<f64>],
    eb_abs: f64,
    kind: ValueKind,
) -> Result<CompressedBlockSet> {
    if blocks.is_empty() {
        return Err(Error::invalid("no blocks to compress"));
    }
    let quantized = quantize_all(blocks, eb_abs, kind)?;
    let table = HuffmanTable::build(&histogram_of(&quantized.iter().collect::<Vec<_>>()))?;
    let encoded = quantized
        .iter()
        .map(|qb| encode_one(qb, &table))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompressedBlockSet {
        mode: CodecMode::Shared,
        eb_abs,
        value_kind: kind,
        tables: vec![table],
        blocks: encoded,
        regression_coeffs: Vec::new(),
    })
}

pub fn she_decompress(set: &CompressedBlockSet) -> Result<Vec<Grid3<f64>>> {
    if set.blocks.is_empty() {
        return Err(Error::invalid("no blocks to decompress"));
    }
    set.blocks
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let qb = decode_one(b, set.table_for_block(i)?, set.eb_abs)?;
            dequantize_block(&qb, set.value_kind)
        })
        .collect()
}

/// One table per block; the historical per-block baseline.
pub fn independent_compress(
    blocks: &[Grid3<f64>],
    eb_abs: f64,
    kind: ValueKind,
) -> Result<CompressedBlockSet> {
    if blocks.is_empty() {
        return Err(Error::invalid("no blocks to compress"));
    }
    let quantized = quantize_all(blocks, eb_abs, kind)?;
    let mut tables = Vec::with_capacity(quantized.len());
    let mut encoded = Vec::with_capacity(quantized.len());
    for qb in &quantized {
        let table = HuffmanTable::build(&histogram_of(&[qb]))?;
        encoded.push(encode_one(qb, &table)?);
        tables.push(table);
    }
    Ok(CompressedBlockSet {
        mode: CodecMode::Independent,
        eb_abs,
        value_kind: kind,
        tables,
        blocks: encoded,
        regression_coeffs: Vec::new(),
    })
}

pub fn independent_decompress(set: &CompressedBlockSet) -> Result<Vec<Grid3<f64>>> {
    she_decompress(set)
}

/// Group blocks by canonical (sorted) shape: group keys ascending, members
/// in input order. Returns `(key, member indices)`.
pub fn shape_groups(dims: &[Dims3]) -> Vec<((usize, usize, usize), Vec<usize>)> {
    let mut groups: Vec<((usize, usize, usize), Vec<usize>)> = Vec::new();
    for (i, d) in dims.iter().enumerate() {
        let mut s = [d.nx, d.ny, d.nz];
        s.sort_unstable();
        let key = (s[0], s[1], s[2]);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    groups.sort_by_key(|(k, _)| *k);
    groups
}

/// Dims of a merged group array: the first member's dims with the z extent
/// scaled by the member count. Later members keep their native cell order,
/// whatever their orientation; the predictor runs over this nominal
/// geometry, which is exactly the locality loss merged mode is meant to
/// exhibit.
pub fn merged_group_dims(member_dims: &[Dims3]) -> Dims3 {
    let first = member_dims[0];
    Dims3::new(first.nx, first.ny, first.nz * member_dims.len())
}

/// Merge same-shape blocks into one array per group and compress each group
/// as a single block with its own table.
pub fn merged_compress(
    blocks: &[Grid3<f64>],
    eb_abs: f64,
    kind: ValueKind,
) -> Result<CompressedBlockSet> {
    if blocks.is_empty() {
        return Err(Error::invalid("no blocks to compress"));
    }
    let dims: Vec<Dims3> = blocks.iter().map(|b| b.dims()).collect();
    let groups = shape_groups(&dims);
    let mut merged = Vec::with_capacity(groups.len());
    for (_, members) in &groups {
        let member_dims: Vec<Dims3> = members.iter().map(|i| dims[*i]).collect();
        let gd = merged_group_dims(&member_dims);
        let mut data = Vec::with_capacity(gd.len());
        for i in members {
            data.extend_from_slice(blocks[*i].as_slice());
        }
        merged.push(Grid3::from_vec(gd, data));
    }
    let quantized = quantize_all(&merged, eb_abs, kind)?;
    let mut tables = Vec::with_capacity(quantized.len());
    let mut encoded = Vec::with_capacity(quantized.len());
    for qb in &quantized {
        let table = HuffmanTable::build(&histogram_of(&[qb]))?;
        encoded.push(encode_one(qb, &table)?);
        tables.push(table);
    }
    Ok(CompressedBlockSet {
        mode: CodecMode::Merged,
        eb_abs,
        value_kind: kind,
        tables,
        blocks: encoded,
        regression_coeffs: Vec::new(),
    })
}

/// Undo [`merged_compress`]: decode each group array and slice it back into
/// the original blocks (whose dims must be supplied, in input order).
pub fn merged_decompress(
    set: &CompressedBlockSet,
    original_dims: &[Dims3],
) -> Result<Vec<Grid3<f64>>> {
    let groups = shape_groups(original_dims);
    if groups.len() != set.blocks.len() {
        return Err(Error::corrupt(format!(
            "stream has {} groups, dims describe {}",
            set.blocks.len(),
            groups.len()
        )));
    }
    let mut out: Vec<Option<Grid3<f64>>> = vec![None; original_dims.len()];
    for (g, (_, members)) in groups.iter().enumerate() {
        let block = &set.blocks[g];
        let qb = decode_one(block, set.table_for_block(g)?, set.eb_abs)?;
        let grid = dequantize_block(&qb, set.value_kind)?;
        let member_dims: Vec<Dims3> = members.iter().map(|i| original_dims[*i]).collect();
        if merged_group_dims(&member_dims) != grid.dims() {
            return Err(Error::corrupt("merged group dims mismatch"));
        }
        let cells = member_dims[0].len();
        let data = grid.as_slice();
        for (j, i) in members.iter().enumerate() {
            let slice = data[j * cells..(j + 1) * cells].to_vec();
            out[*i] = Some(Grid3::from_vec(original_dims[*i], slice));
        }
    }
    Ok(out.into_iter().map(|g| g.unwrap()).collect())
}
