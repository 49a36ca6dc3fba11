//! Structural byte accounting for live composition state. Every composer is
//! measured with the same schema so memory figures are comparable across
//! composers and independent of the allocator.

use crate::service::{Premise, PremiseSet};

/// Per-item overhead of a working-memory entry (strength, source, bookkeeping).
pub const WM_ITEM_OVERHEAD: usize = 16;
/// One stored access time.
pub const ACCESS_TIME_BYTES: usize = 8;
/// One activation value (behavior or slipnet node).
pub const ACTIVATION_BYTES: usize = 8;
/// Fixed part of an open request record.
pub const REQUEST_OVERHEAD: usize = 48;
/// An outstanding invocation record.
pub const INVOCATION_BYTES: usize = 48;
/// Fixed part of a plan fragment (resolver host, hop count, bookkeeping).
pub const FRAGMENT_OVERHEAD: usize = 32;
/// A duplicate-suppression entry kept by a node that saw a flooded query.
pub const SEEN_ENTRY_BYTES: usize = 24;
/// A blacklist entry, excluding the service id.
pub const BLACKLIST_OVERHEAD: usize = 8;

pub fn premise_bytes(p: &Premise) -> usize {
    p.text_len()
}

pub fn premise_set_bytes(set: &PremiseSet) -> usize {
    set.iter().map(premise_bytes).sum()
}

/// Declared footprint of one working-memory item.
pub fn wm_item_bytes(p: &Premise, accesses: usize) -> usize {
    premise_bytes(p) + accesses * ACCESS_TIME_BYTES + WM_ITEM_OVERHEAD
}

/// Bytes of one touched hard location: an `n`-bit address plus `n` counters.
pub fn sdm_location_bytes(word_bits: usize) -> usize {
    word_bits + word_bits / 8
}

/// Kilobytes, as reported in metrics.
pub fn kilobytes(bytes: usize) -> f64 {
    bytes as f64 / 1024.0
}
