//! Bit-level writer/reader for Huffman payloads. Bits fill each byte most
//! significant first; streams are padded with zero bits to a whole byte.

#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append the `len` low bits of `code`, most significant first.
    #[inline]
    pub fn put(&mut self, code: u64, len: u8) {
        debug_assert!(len as u32 <= 64);
        for i in (0..len).rev() {
            let bit = (code >> i) & 1;
            let pos = (self.bit_len % 8) as u8;
            if pos == 0 {
                self.bytes.push(0);
            }
            if bit != 0 {
                *self.bytes.last_mut().unwrap() |= 1 << (7 - pos);
            }
            self.bit_len += 1;
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
    bit_len: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], bit_len: u64) -> Self {
        debug_assert!(bit_len <= bytes.len() as u64 * 8);
        BitReader {
            bytes,
            pos: 0,
            bit_len,
        }
    }

    /// Next bit, or `None` past the end of the stream.
    #[inline]
    pub fn next_bit(&mut self) -> Option<bool> {
        if self.pos >= self.bit_len {
            return None;
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = byte >> (7 - (self.pos % 8)) & 1;
        self.pos += 1;
        Some(bit != 0)
    }

    pub fn bits_read(&self) -> u64 {
        self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_msb_first_and_pads() {
        let mut w = BitWriter::new();
        w.put(0b101, 3);
        w.put(0b1, 1);
        w.put(0b0110, 4);
        w.put(0b11, 2);
        assert_eq!(w.bit_len(), 10);
        let bytes = w.into_bytes();
        assert_eq!(bytes, vec![0b1011_0110, 0b1100_0000]);
    }

    #[test]
    fn reader_round_trips() {
        let mut w = BitWriter::new();
        for i in 0..67u64 {
            w.put(i % 2, 1);
        }
        let n = w.bit_len();
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes, n);
        for i in 0..67u64 {
            assert_eq!(r.next_bit(), Some(i % 2 == 1));
        }
        assert_eq!(r.next_bit(), None);
    }
}
