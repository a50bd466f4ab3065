use mlcsim_core::cache::{CacheArray, CacheGeometry, InitialMode, Organization};
use mlcsim_core::device::{ArrayCosts, DeviceProfile};
use mlcsim_core::endurance::EnduranceConfig;
use mlcsim_core::workload::Op;
use proptest::prelude::*;

/// Recency list per set, most recent last.
struct Reference {
    ways: usize,
    sets: Vec<Vec<u64>>,
}

impl Reference {
    fn touch(&mut self, set: usize, tag: u64) -> (bool, Option<u64>) {
        let list = &mut self.sets[set];
        if let Some(i) = list.iter().position(|&t| t == tag) {
            list.remove(i);
            list.push(tag);
            return (true, None);
        }
        let victim = (list.len() == self.ways).then(|| list.remove(0));
        list.push(tag);
        (false, victim)
    }
}

fn array(org: Organization, sets: u64, ways: u32) -> CacheArray {
    let geo = match org {
        Organization::Stripped => CacheGeometry::new(sets * u64::from(ways) * 64, 64, ways, ways, 1),
        _ => CacheGeometry::fixed(sets * u64::from(ways) * 64, 64, ways, 1),
    };
    let profile = DeviceProfile::default();
    let costs = ArrayCosts::new(&profile, 512, None, 1, 0.0);
    CacheArray::with_profile(org, geo, costs, &profile, EnduranceConfig::default(), InitialMode::MaxWays)
}

fn org_strategy() -> impl Strategy<Value = Organization> {
    prop_oneof![Just(Organization::Slc), Just(Organization::Stacked), Just(Organization::Stripped)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_reference_recency_list(
        org in org_strategy(),
        set_bits in 0u32..3,
        way_pairs in 1u32..5,
        ops in prop::collection::vec((0usize..8, 0u64..12, any::<bool>()), 1..600),
    ) {
        let sets = 1u64 << set_bits;
        let ways = way_pairs * 2;
        let mut a = array(org, sets, ways);
        let mut r = Reference { ways: ways as usize, sets: vec![Vec::new(); sets as usize] };
        for (set, tag, write) in ops {
            let set = set % sets as usize;
            let op = if write { Op::Write } else { Op::Read };
            let (hit, victim) = r.touch(set, tag);
            let got = a.access(set, tag, op);
            prop_assert_eq!(got.hit, hit);
            if !got.hit {
                let fill = a.fill(set, tag, write);
                prop_assert_eq!(fill.evicted.first().map(|e| e.tag), victim);
            }
        }
        prop_assert!(a.check_invariants().is_ok());
    }
}
