//! Flag packing for on-disk occupancy bitmaps.
//!
//! Flags are stored in x-fastest order, eight per byte, least significant
//! bit first, padded with zero bits to a whole byte.

pub fn pack_flags(flags: &[bool]) -> Vec<u8> {
    let mut bytes = vec![0u8; flags.len().div_ceil(8)];
    for (i, flag) in flags.iter().enumerate() {
        if *flag {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    bytes
}

pub fn unpack_flags(bytes: &[u8], n: usize) -> Vec<bool> {
    assert!(bytes.len() >= n.div_ceil(8));
    (0..n).map(|i| bytes[i / 8] & (1 << (i % 8)) != 0).collect()
}

pub fn packed_len(n: usize) -> usize {
    n.div_ceil(8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_padding() {
        let flags = vec![true, false, true, true, false, false, false, true, true];
        let bytes = pack_flags(&flags);
        assert_eq!(bytes.len(), 2);
        assert_eq!(bytes[0], 0b1000_1101);
        assert_eq!(bytes[1], 0b0000_0001);
        assert_eq!(unpack_flags(&bytes, flags.len()), flags);
    }
}
