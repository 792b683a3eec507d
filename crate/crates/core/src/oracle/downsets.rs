//! Downward-closed subsets of a chronicle, as bitsets over the positions of a
//! [`CausalIndex`].

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;
use rand::Rng;

use crate::chronicle::CausalIndex;
use crate::ids::EventId;

fn direct_positions(index: &CausalIndex) -> Vec<Vec<usize>> {
    index
        .events()
        .iter()
        .map(|e| {
            e.direct_preds()
                .iter()
                .filter_map(|p| index.position(p))
                .collect()
        })
        .collect()
}

/// All downsets that include `required` (itself downward-closed), or `None`
/// if there are more than `limit` of them.
pub fn collect_downsets(
    index: &CausalIndex,
    required: &FixedBitSet,
    limit: usize,
) -> Option<Vec<FixedBitSet>> {
    let preds = direct_positions(index);
    let mut out = Vec::new();
    let mut current = FixedBitSet::with_capacity(index.len());
    let complete = walk(&preds, required, 0, &mut current, &mut out, limit);
    complete.then_some(out)
}

fn walk(
    preds: &[Vec<usize>],
    required: &FixedBitSet,
    i: usize,
    current: &mut FixedBitSet,
    out: &mut Vec<FixedBitSet>,
    limit: usize,
) -> bool {
    if i == preds.len() {
        if out.len() == limit {
            return false;
        }
        out.push(current.clone());
        return true;
    }
    let includable = preds[i].iter().all(|&p| current.contains(p));
    if includable {
        current.insert(i);
        let ok = walk(preds, required, i + 1, current, out, limit);
        current.set(i, false);
        if !ok {
            return false;
        }
    }
    if required.contains(i) {
        return true;
    }
    walk(preds, required, i + 1, current, out, limit)
}

/// A random downset including `required`: positions are visited in
/// topological order and each includable one is kept with probability 1/2.
pub fn sample_downset(
    index: &CausalIndex,
    required: &FixedBitSet,
    rng: &mut impl Rng,
) -> FixedBitSet {
    let preds = direct_positions(index);
    let mut set = FixedBitSet::with_capacity(index.len());
    for (i, ps) in preds.iter().enumerate() {
        if required.contains(i) || (ps.iter().all(|&p| set.contains(p)) && rng.gen_bool(0.5)) {
            set.insert(i);
        }
    }
    set
}

/// Maximal elements of a downset: the direct predecessors of an event logged
/// at that timestamp.
pub fn frontier_of(index: &CausalIndex, set: &FixedBitSet) -> BTreeSet<EventId> {
    set.ones()
        .filter(|&i| !set.ones().any(|j| index.precedes(i, j)))
        .map(|i| index.event(i).id())
        .collect()
}

/// The creation event together with its precursors.
pub fn creation_downset(index: &CausalIndex, creation: usize) -> FixedBitSet {
    let mut set = index.ancestors(creation).clone();
    set.insert(creation);
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn downsets_of_s1() {
        let g = fixtures::s1().chronicle;
        let index = CausalIndex::new(&g);
        let none = FixedBitSet::with_capacity(index.len());
        // Chain of three, then rv and a independently: 4 + 4 - 1 = 7.
        let all = collect_downsets(&index, &none, 4096).unwrap();
        assert_eq!(all.len(), 7);
        let c = index.position(&fixtures::s1().c.id()).unwrap();
        let after_c = collect_downsets(&index, &creation_downset(&index, c), 4096).unwrap();
        assert_eq!(after_c.len(), 4);
        assert!(collect_downsets(&index, &none, 6).is_none());
    }

    #[test]
    fn samples_are_downward_closed() {
        let g = fixtures::s2().chronicle;
        let index = CausalIndex::new(&g);
        let none = FixedBitSet::with_capacity(index.len());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = sample_downset(&index, &none, &mut rng);
            for i in s.ones() {
                assert!(index.ancestors(i).is_subset(&s));
            }
        }
    }

    #[test]
    fn frontier_of_full_set_is_heads() {
        let g = fixtures::s2().chronicle;
        let index = CausalIndex::new(&g);
        let mut all = FixedBitSet::with_capacity(index.len());
        all.insert_range(..);
        assert_eq!(frontier_of(&index, &all), g.heads());
    }
}
