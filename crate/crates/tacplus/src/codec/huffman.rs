//! Canonical Huffman coding over u16 symbols.
//!
//! Code lengths come from the usual min-heap construction with fixed tie
//! breaking (equal weights: lower sequence number wins, leaves numbered by
//! symbol before internal nodes), then codes are assigned canonically in
//! (length, symbol) order. Only the lengths are serialized.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::bitio::{BitReader, BitWriter};
use crate::error::{Error, Result};

const MAX_CODE_LEN: u8 = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTable {
    /// `(symbol, code length)`, sorted by symbol.
    entries: Vec<(u16, u8)>,
    /// Symbols in canonical (length, symbol) order.
    canonical: Vec<u16>,
    /// Number of codes per length, index 0..=max_len.
    len_counts: Vec<u32>,
    max_len: u8,
    /// Encoder lookup: symbol -> (code, length).
    codes: std::collections::HashMap<u16, (u64, u8)>,
}

impl HuffmanTable {
    /// Build from a histogram indexed by symbol. At least one count must be
    /// non-zero. A single-symbol alphabet gets a degenerate 1-bit code.
    pub fn build(histogram: &[u64]) -> Result<Self> {
        let present: Vec<(u16, u64)> = histogram
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(s, c)| (s as u16, *c))
            .collect();
        if present.is_empty() {
            return Err(Error::internal("empty histogram"));
        }
        let lengths = if present.len() == 1 {
            vec![(present[0].0, 1u8)]
        } else {
            code_lengths(&present)?
        };
        Self::from_lengths(lengths)
    }

    /// Reconstruct a table from `(symbol, length)` pairs.
    pub fn from_lengths(mut entries: Vec<(u16, u8)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::corrupt("huffman table with no symbols"));
        }
        entries.sort_unstable();
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::corrupt("duplicate symbol in huffman table"));
            }
        }
        let max_len = entries.iter().map(|(_, l)| *l).max().unwrap();
        if max_len == 0 || max_len > MAX_CODE_LEN {
            return Err(Error::corrupt(format!("bad code length {max_len}")));
        }
        let mut canonical = entries.clone();
        canonical.sort_unstable_by_key(|(s, l)| (*l, *s));
        let mut len_counts = vec![0u32; max_len as usize + 1];
        for (_, l) in &canonical {
            len_counts[*l as usize] += 1;
        }
        // Canonical code assignment in (length, symbol) order.
        let mut codes = std::collections::HashMap::with_capacity(entries.len());
        let mut code: u64 = 0;
        let mut prev_len = canonical[0].1;
        for (i, (sym, len)) in canonical.iter().enumerate() {
            if i > 0 {
                code = (code + 1) << (len - prev_len);
            }
            codes.insert(*sym, (code, *len));
            prev_len = *len;
        }
        Ok(HuffmanTable {
            entries,
            canonical: canonical.iter().map(|(s, _)| *s).collect(),
            len_counts,
            max_len,
            codes,
        })
    }

    pub fn symbol_count(&self) -> usize {
        self.entries.len()
    }

    pub fn code_len(&self, symbol: u16) -> Option<u8> {
        self.codes.get(&symbol).map(|(_, l)| *l)
    }

    /// Sum of 2^-len over the alphabet, in units of 2^-max_len.
    pub fn kraft_sum_scaled(&self) -> u64 {
        self.entries
            .iter()
            .map(|(_, l)| 1u64 << (self.max_len - *l))
            .sum()
    }

    pub fn encode(&self, symbols: &[u16], w: &mut BitWriter) -> Result<()> {
        for s in symbols {
            let (code, len) = self
                .codes
                .get(s)
                .ok_or_else(|| Error::internal(format!("symbol {s} missing from table")))?;
            w.put(*code, *len);
        }
        Ok(())
    }

    /// Decode exactly `n` symbols with the canonical sequential decoder.
    pub fn decode(&self, r: &mut BitReader, n: usize) -> Result<Vec<u16>> {
        let mut out = Vec::with_capacity(n);
        // first_code[l]: canonical code value of the first code of length l;
        // first_index[l]: its rank in canonical order.
        let mut first_code = vec![0u64; self.max_len as usize + 1];
        let mut first_index = vec![0u32; self.max_len as usize + 1];
        let mut code: u64 = 0;
        let mut index: u32 = 0;
        for l in 1..=self.max_len as usize {
            code <<= 1;
            first_code[l] = code;
            first_index[l] = index;
            code += self.len_counts[l] as u64;
            index += self.len_counts[l];
        }
        for _ in 0..n {
            let mut acc: u64 = 0;
            let mut len = 0usize;
            loop {
                let bit = r
                    .next_bit()
                    .ok_or_else(|| Error::corrupt("huffman payload truncated"))?;
                acc = (acc << 1) | bit as u64;
                len += 1;
                if len > self.max_len as usize {
                    return Err(Error::corrupt("invalid huffman code in payload"));
                }
                let offset = acc.wrapping_sub(first_code[len]);
                if acc >= first_code[len] && offset < self.len_counts[len] as u64 {
                    out.push(self.canonical[(first_index[len] as u64 + offset) as usize]);
                    break;
                }
            }
        }
        Ok(out)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_u32::<LittleEndian>(self.entries.len() as u32)?;
        for (sym, len) in &self.entries {
            w.write_u32::<LittleEndian>(*sym as u32)?;
            w.write_u8(*len)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let n = r.read_u32::<LittleEndian>()? as usize;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let sym = r.read_u32::<LittleEndian>()?;
            let len = r.read_u8()?;
            let sym = u16::try_from(sym).map_err(|_| Error::corrupt("symbol out of range"))?;
            entries.push((sym, len));
        }
        Self::from_lengths(entries)
    }

    /// Serialized size in bytes.
    pub fn wire_len(&self) -> usize {
        4 + self.entries.len() * 5
    }
}

/// Huffman code lengths for symbols with positive weights (2+ symbols).
fn code_lengths(present: &[(u16, u64)]) -> Result<Vec<(u16, u8)>> {
    #[derive(Debug)]
    struct Node {
        weight: u64,
        children: Option<(usize, usize)>,
    }
    let mut nodes: Vec<Node> = present
        .iter()
        .map(|(_, w)| Node {
            weight: *w,
            children: None,
        })
        .collect();
    // (weight, seq) min-heap; leaves come first in symbol order, internal
    // nodes in creation order, which pins the tie-breaking.
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = (0..nodes.len())
        .map(|i| Reverse((nodes[i].weight, i)))
        .collect();
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().unwrap();
        let Reverse((wb, b)) = heap.pop().unwrap();
        let seq = nodes.len();
        nodes.push(Node {
            weight: wa + wb,
            children: Some((a, b)),
        });
        heap.push(Reverse((wa + wb, seq)));
    }
    let root = heap.pop().unwrap().0 .1;
    // Depths by iterative traversal.
    let mut lengths = vec![0u8; present.len()];
    let mut stack = vec![(root, 0u8)];
    while let Some((i, depth)) = stack.pop() {
        match nodes[i].children {
            Some((a, b)) => {
                if depth == MAX_CODE_LEN {
                    return Err(Error::internal("huffman code length overflow"));
                }
                stack.push((a, depth + 1));
                stack.push((b, depth + 1));
            }
            None => lengths[i] = depth,
        }
    }
    Ok(present
        .iter()
        .zip(&lengths)
        .map(|((s, _), l)| (*s, *l))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn hist(symbols: &[u16]) -> Vec<u64> {
        let max = *symbols.iter().max().unwrap() as usize;
        let mut h = vec![0u64; max + 1];
        for s in symbols {
            h[*s as usize] += 1;
        }
        h
    }

    fn round_trip(symbols: &[u16]) -> (HuffmanTable, u64) {
        let table = HuffmanTable::build(&hist(symbols)).unwrap();
        let mut w = BitWriter::new();
        table.encode(symbols, &mut w).unwrap();
        let bits = w.bit_len();
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes, bits);
        let decoded = table.decode(&mut r, symbols.len()).unwrap();
        assert_eq!(decoded, symbols);
        (table, bits)
    }

    #[test]
    fn two_symbol_alphabet_gets_one_bit_codes() {
        let (table, bits) = round_trip(&[7, 7, 9]);
        assert_eq!(table.code_len(7), Some(1));
        assert_eq!(table.code_len(9), Some(1));
        assert_eq!(bits, 3);
    }

    #[test]
    fn single_symbol_alphabet_uses_one_bit() {
        let (table, bits) = round_trip(&[42; 10]);
        assert_eq!(table.symbol_count(), 1);
        assert_eq!(table.code_len(42), Some(1));
        assert_eq!(bits, 10);
    }

    #[test]
    fn kraft_equality_holds_for_multi_symbol_alphabets() {
        let symbols: Vec<u16> = (0..100u16).flat_map(|s| vec![s; (s as usize % 7) + 1]).collect();
        let (table, _) = round_trip(&symbols);
        assert_eq!(table.kraft_sum_scaled(), 1u64 << table.max_len);
    }

    #[test]
    fn payload_never_beats_fixed_length_coding() {
        let mut rng = StdRng::seed_from_u64(100);
        for &alphabet in &[2usize, 3, 17, 256, 1000] {
            let symbols: Vec<u16> = (0..20_000).map(|_| rng.gen_range(0..alphabet) as u16).collect();
            let (_, bits) = round_trip(&symbols);
            let fixed = (alphabet as f64).log2().ceil() as u64;
            assert!(
                bits <= symbols.len() as u64 * fixed.max(1),
                "alphabet {alphabet}: {bits} bits"
            );
        }
    }

    #[test]
    fn skewed_distribution_round_trips() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut symbols = vec![32768u16; 50_000];
        for s in symbols.iter_mut() {
            if rng.gen_bool(0.05) {
                *s = rng.gen();
            }
        }
        round_trip(&symbols);
    }

    #[test]
    fn deterministic_for_equal_frequencies() {
        let h = hist(&[1, 2, 3, 4, 5, 1, 2, 3, 4, 5]);
        let a = HuffmanTable::build(&h).unwrap();
        let b = HuffmanTable::build(&h).unwrap();
        assert_eq!(a, b);
        let mut wa = Vec::new();
        a.write(&mut wa).unwrap();
        let mut wb = Vec::new();
        b.write(&mut wb).unwrap();
        assert_eq!(wa, wb);
    }

    #[test]
    fn encode_rejects_unknown_symbol() {
        let table = HuffmanTable::build(&hist(&[1, 2])).unwrap();
        let mut w = BitWriter::new();
        assert!(matches!(
            table.encode(&[3], &mut w),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn decode_rejects_truncated_payload() {
        let table = HuffmanTable::build(&hist(&[1, 2, 3, 3])).unwrap();
        let mut w = BitWriter::new();
        table.encode(&[1, 2, 3], &mut w).unwrap();
        let bits = w.bit_len();
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes, bits.saturating_sub(1));
        assert!(matches!(
            table.decode(&mut r, 3),
            Err(Error::CorruptStream(_))
        ));
    }

    #[test]
    fn table_serialization_round_trips() {
        let symbols: Vec<u16> = (0..500u16).flat_map(|s| vec![s; (s as usize % 11) + 1]).collect();
        let table = HuffmanTable::build(&hist(&symbols)).unwrap();
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        assert_eq!(buf.len(), table.wire_len());
        let back = HuffmanTable::read(&mut &buf[..]).unwrap();
        assert_eq!(back, table);
    }
}
