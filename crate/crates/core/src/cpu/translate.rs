use std::collections::HashMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CpuError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationMode {
    /// Frames drawn from a seeded random permutation on first touch.
    #[default]
    Random,
    /// Frames handed out in first-touch order.
    Identity,
}

/// First-touch virtual-to-physical page mapping, shared by all cores and
/// keyed by address space.
#[derive(Debug, Clone)]
pub struct PageTable {
    page_bytes: u64,
    frames: u64,
    mode: TranslationMode,
    mapping: HashMap<(u32, u64), u64>,
    next_free_frame: u64,
    /// Displaced entries of a lazily materialized Fisher-Yates shuffle.
    swapped: HashMap<u64, u64>,
    rng: ChaCha8Rng,
}

impl PageTable {
    pub fn new(page_bytes: u64, capacity_bytes: u64, mode: TranslationMode, seed: u64) -> Self {
        assert!(page_bytes.is_power_of_two(), "page size must be a power of two");
        Self {
            page_bytes,
            frames: capacity_bytes / page_bytes,
            mode,
            mapping: HashMap::new(),
            next_free_frame: 0,
            swapped: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn page_bytes(&self) -> u64 {
        self.page_bytes
    }

    pub fn mapped_pages(&self) -> usize {
        self.mapping.len()
    }

    fn allocate(&mut self) -> Result<u64, CpuError> {
        let k = self.next_free_frame;
        if k >= self.frames {
            return Err(CpuError::OutOfMemory { frames: self.frames });
        }
        self.next_free_frame += 1;
        match self.mode {
            TranslationMode::Identity => Ok(k),
            TranslationMode::Random => {
                let j = self.rng.random_range(k..self.frames);
                let at = |m: &HashMap<u64, u64>, i: u64| m.get(&i).copied().unwrap_or(i);
                let (vk, vj) = (at(&self.swapped, k), at(&self.swapped, j));
                self.swapped.insert(j, vk);
                self.swapped.remove(&k);
                Ok(vj)
            }
        }
    }

    pub fn translate(&mut self, asid: u32, vaddr: u64) -> Result<u64, CpuError> {
        let vpage = vaddr / self.page_bytes;
        let offset = vaddr % self.page_bytes;
        let frame = match self.mapping.get(&(asid, vpage)) {
            Some(&f) => f,
            None => {
                let f = self.allocate()?;
                self.mapping.insert((asid, vpage), f);
                f
            }
        };
        Ok(frame * self.page_bytes + offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn identity_mode_preserves_offset() {
        let mut pt = PageTable::new(4096, 1 << 30, TranslationMode::Identity, 0);
        let p = pt.translate(0, 0x12345).unwrap();
        assert_eq!(p, 0x345);
        assert_eq!(pt.translate(0, 0x12FFF).unwrap(), 0xFFF);
        assert_eq!(pt.translate(0, 0x99000).unwrap(), 0x1000);
    }

    #[test]
    fn stable_and_injective() {
        let mut pt = PageTable::new(4096, 1 << 24, TranslationMode::Random, 5);
        let a = pt.translate(0, 0x5000).unwrap();
        assert_eq!(pt.translate(0, 0x5000).unwrap(), a);
        assert_eq!(a % 4096, 0);
        let b = pt.translate(0, 0x6000).unwrap();
        assert_ne!(a / 4096, b / 4096);
        // Separate address spaces get separate frames for one virtual page.
        let c = pt.translate(1, 0x5000).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn exhausts_physical_memory() {
        let mut pt = PageTable::new(4096, 4 * 4096, TranslationMode::Random, 1);
        let frames: HashSet<u64> = (0..4).map(|p| pt.translate(0, p * 4096).unwrap() / 4096).collect();
        assert_eq!(frames, (0..4).collect());
        assert!(matches!(pt.translate(0, 99 * 4096), Err(CpuError::OutOfMemory { frames: 4 })));
    }

    proptest! {
        #[test]
        fn random_frames_are_distinct_and_in_range(seed: u64, pages in 1usize..300) {
            let mut pt = PageTable::new(4096, 512 * 4096, TranslationMode::Random, seed);
            let mut seen = HashSet::new();
            for p in 0..pages as u64 {
                let f = pt.translate(0, p * 4096 + 17).unwrap();
                prop_assert_eq!(f % 4096, 17);
                prop_assert!(f / 4096 < 512);
                prop_assert!(seen.insert(f / 4096));
            }
        }
    }
}
