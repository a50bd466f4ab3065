use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Cell organization of a cache data array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Organization {
    /// Single-level cells, one line per way.
    Slc,
    /// 2-bit cells, both bits of a cell belong to the same line.
    Stacked,
    /// 2-bit cells, hard domains form one line and soft domains another.
    Stripped,
}

/// Size and shape of a banked set-associative array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheGeometry {
    pub total_bytes: u64,
    pub line_bytes: u32,
    pub min_ways: u32,
    pub max_ways: u32,
    pub banks: u32,
}

/// Address fields, LSB upward: `offset | bank | set | tag`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressParts {
    pub bank: u32,
    pub set: u32,
    pub tag: u64,
    pub offset: u32,
}

impl CacheGeometry {
    pub fn new(total_bytes: u64, line_bytes: u32, min_ways: u32, max_ways: u32, banks: u32) -> Self {
        Self { total_bytes, line_bytes, min_ways, max_ways, banks }
    }

    /// Fixed-associativity geometry.
    pub fn fixed(total_bytes: u64, line_bytes: u32, ways: u32, banks: u32) -> Self {
        Self::new(total_bytes, line_bytes, ways, ways, banks)
    }

    pub fn sets_per_bank(&self) -> u64 {
        let denom = u64::from(self.line_bytes) * u64::from(self.max_ways) * u64::from(self.banks);
        if denom == 0 {
            0
        } else {
            self.total_bytes / denom
        }
    }

    pub fn total_sets(&self) -> usize {
        (self.sets_per_bank() * u64::from(self.banks)) as usize
    }

    pub fn offset_bits(&self) -> u32 {
        self.line_bytes.trailing_zeros()
    }

    pub fn bank_bits(&self) -> u32 {
        self.banks.trailing_zeros()
    }

    pub fn set_bits(&self) -> u32 {
        self.sets_per_bank().trailing_zeros()
    }

    pub fn line_bits(&self) -> u32 {
        self.line_bytes * 8
    }

    /// Physical rows per set: pairs for stripped arrays, ways otherwise.
    pub fn rows_per_set(&self, org: Organization) -> usize {
        match org {
            Organization::Stripped => (self.max_ways / 2) as usize,
            Organization::Slc | Organization::Stacked => self.max_ways as usize,
        }
    }

    pub fn validate(&self, org: Organization) -> Result<(), ConfigError> {
        if !self.line_bytes.is_power_of_two() {
            return Err(ConfigError::invalid("line_bytes", "must be a power of two"));
        }
        if !self.banks.is_power_of_two() {
            return Err(ConfigError::invalid("banks", "must be a power of two"));
        }
        if self.max_ways == 0 || self.min_ways == 0 || self.min_ways > self.max_ways {
            return Err(ConfigError::invalid("ways", "need 0 < min_ways <= max_ways"));
        }
        let sets = self.sets_per_bank();
        let exact =
            sets * u64::from(self.line_bytes) * u64::from(self.max_ways) * u64::from(self.banks);
        if sets == 0 || !sets.is_power_of_two() || exact != self.total_bytes {
            return Err(ConfigError::invalid(
                "total_bytes",
                format!(
                    "{} bytes does not give a power-of-two set count per bank \
                     ({} B lines, {} ways, {} banks)",
                    self.total_bytes, self.line_bytes, self.max_ways, self.banks
                ),
            ));
        }
        match org {
            Organization::Stripped => {
                if self.max_ways % 2 != 0 || self.min_ways * 2 != self.max_ways {
                    return Err(ConfigError::invalid(
                        "ways",
                        "stripped arrays need an even max_ways and min_ways = max_ways / 2",
                    ));
                }
            }
            Organization::Slc | Organization::Stacked => {
                if self.min_ways != self.max_ways {
                    return Err(ConfigError::invalid("ways", "fixed arrays need min_ways = max_ways"));
                }
            }
        }
        Ok(())
    }

    pub fn decompose(&self, addr: u64) -> AddressParts {
        let offset = (addr & (u64::from(self.line_bytes) - 1)) as u32;
        let line = addr >> self.offset_bits();
        let bank = (line & (u64::from(self.banks) - 1)) as u32;
        let above_bank = line >> self.bank_bits();
        let set = (above_bank & (self.sets_per_bank() - 1)) as u32;
        let tag = above_bank >> self.set_bits();
        AddressParts { bank, set, tag, offset }
    }

    /// Flat set index across banks; bank bits are the low bits.
    pub fn flat_set(&self, parts: &AddressParts) -> usize {
        ((parts.set as usize) << self.bank_bits()) | parts.bank as usize
    }

    pub fn bank_of_flat(&self, flat_set: usize) -> u32 {
        (flat_set & (self.banks as usize - 1)) as u32
    }

    /// Line address (byte address >> offset bits) of `tag` in `flat_set`.
    pub fn line_of(&self, flat_set: usize, tag: u64) -> u64 {
        (tag << (self.set_bits() + self.bank_bits())) | flat_set as u64
    }

    /// `(flat_set, tag)` of a line address.
    pub fn split_line(&self, line: u64) -> (usize, u64) {
        let parts = self.decompose(line << self.offset_bits());
        (self.flat_set(&parts), parts.tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> CacheGeometry {
        // 64 B lines, 8 banks, 64 sets per bank, 16 ways
        CacheGeometry::new(64 * 8 * 64 * 16, 64, 8, 16, 8)
    }

    #[test]
    fn zero_address() {
        assert_eq!(g().decompose(0), AddressParts { bank: 0, set: 0, tag: 0, offset: 0 });
    }

    #[test]
    fn bit_slice_matches_arithmetic() {
        let geo = g();
        assert_eq!(geo.sets_per_bank(), 64);
        let p = geo.decompose(0x0001_0040);
        // 0x10040 / 64 = 1025 lines; 1025 % 8 = 1; 1025 / 8 = 128; 128 % 64 = 0; 128 / 64 = 2
        assert_eq!(p, AddressParts { bank: 1, set: 0, tag: 2, offset: 0 });
        let a: u64 = 0x0001_0040;
        let line = a / 64;
        assert_eq!(u64::from(p.bank), line % 8);
        assert_eq!(u64::from(p.set), (line / 8) % 64);
        assert_eq!(p.tag, line / 8 / 64);
    }

    #[test]
    fn tag_bits_do_not_move_set() {
        let geo = g();
        let a = geo.decompose(0x1234);
        let b = geo.decompose(0x1234 + (7 << 15));
        assert_eq!((a.bank, a.set, a.offset), (b.bank, b.set, b.offset));
        assert_eq!(b.tag, a.tag + 7);
    }

    #[test]
    fn line_round_trip() {
        let geo = g();
        for line in [0u64, 1, 77, 1025, 123_456_789] {
            let (set, tag) = geo.split_line(line);
            assert_eq!(geo.line_of(set, tag), line);
        }
    }

    #[test]
    fn validation() {
        assert!(g().validate(Organization::Stripped).is_ok());
        assert!(g().validate(Organization::Slc).is_err());
        assert!(CacheGeometry::fixed(256 * 1024, 64, 8, 8).validate(Organization::Slc).is_ok());
        assert!(CacheGeometry::fixed(3 * 1024, 64, 8, 1).validate(Organization::Slc).is_err());
        assert!(CacheGeometry::new(512 * 1024, 64, 8, 16, 8).validate(Organization::Stripped).is_ok());
        assert!(CacheGeometry::new(512 * 1024, 48, 8, 16, 8).validate(Organization::Stripped).is_err());
    }
}
