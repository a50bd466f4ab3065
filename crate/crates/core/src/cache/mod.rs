//! Cache arrays: geometry, address slicing and the pair-organized data array.

mod array;
mod geometry;

pub use array::{
    AccessOutcome, ArrayChange, ArrayStats, CacheArray, EnergyBreakdown, EvictReason, Evicted,
    FillOutcome, InitialMode, LineState, PairMode, PairState, Role, RoleCounts, SetState, SetStats,
    Slot, SlotId,
};
pub use geometry::{AddressParts, CacheGeometry, Organization};
