//! Bit conventions for purity-vector indexing.
//!
//! A basis state of the bipartition space is a string of n labels, one per
//! qubit, with "up" meaning the qubit belongs to subsystem A. The global
//! convention is:
//!
//! - up is encoded as bit 0, down as bit 1;
//! - qubit 1 occupies the most significant bit of the state index, so the
//!   two-site label ordering is (uu, ud, du, dd).

/// Bit position (0 = least significant) of 1-based qubit `q` in an n-qubit
/// state index.
#[inline]
pub fn bit_pos(n: usize, q: usize) -> usize {
    debug_assert!(q >= 1 && q <= n);
    n - q
}

/// Number of down labels in a state index.
#[inline]
pub fn weight(index: usize) -> u32 {
    index.count_ones()
}

/// True when the state index has an even number of down labels.
#[inline]
pub fn even_parity(index: usize) -> bool {
    index.count_ones() % 2 == 0
}

/// Insert a zero bit at position `pos`, shifting higher bits up.
#[inline]
pub fn insert_zero_bit(index: usize, pos: usize) -> usize {
    let low = index & ((1usize << pos) - 1);
    ((index >> pos) << (pos + 1)) | low
}

/// Expand a group index over n-2 untouched qubits into a full state index
/// with zero bits at the two given (distinct) positions.
#[inline]
pub fn expand_two(group: usize, pos_a: usize, pos_b: usize) -> usize {
    let (lo, hi) = if pos_a < pos_b { (pos_a, pos_b) } else { (pos_b, pos_a) };
    insert_zero_bit(insert_zero_bit(group, lo), hi)
}

/// Indices of the even-parity sector in ascending order.
pub fn even_sector_indices(n: usize) -> Vec<usize> {
    (0..1usize << n).filter(|&k| even_parity(k)).collect()
}
