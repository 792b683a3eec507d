//! Join-semilattice laws on serialized chronicles.

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chronicle::{CausalIndex, GroupChronicle};
use crate::codec::encode_chronicle;
use crate::ids::EntityId;
use crate::oracle::downsets::sample_downset;
use crate::oracle::generate::{gen_chronicle, GenConfig};
use crate::preset::{PolicyPreset, PresetKind};

/// The first law `a`, `b` and `c` break, if any: idempotence, commutativity
/// and associativity of join compared byte-for-byte, and `a` and `b` both
/// contained in `a ⊔ b`.
pub fn join_law_failure(
    a: &GroupChronicle,
    b: &GroupChronicle,
    c: &GroupChronicle,
) -> Option<&'static str> {
    let enc = encode_chronicle;
    let ab = a.join(b);
    if enc(&a.join(a)) != enc(a) {
        return Some("idempotence");
    }
    if enc(&ab) != enc(&b.join(a)) {
        return Some("commutativity");
    }
    if enc(&ab.join(c)) != enc(&a.join(&b.join(c))) {
        return Some("associativity");
    }
    if a.ids().chain(b.ids()).any(|id| !ab.contains(&id)) || ab.len() < a.len().max(b.len()) {
        return Some("append-only");
    }
    None
}

/// Three chronicles of one group derived from `seed`: each is a generated
/// chronicle (Byzantine generation on) or a random downward-closed prefix of
/// one, so pairs range from disjoint extensions to prefix-related ones.
pub fn sample_triple(seed: u64) -> [GroupChronicle; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = PresetKind::ALL[rng.gen_range(0..3)];
    let names = ["A", "B", "C", "D"];
    let n = rng.gen_range(2..=names.len());
    let entities: Vec<EntityId> = names[..n]
        .iter()
        .map(|s| EntityId::new(*s).expect("valid name"))
        .collect();
    let preset = PolicyPreset::new(kind, entities.clone()).expect("distinct names");
    let byz = entities[n - 1].clone();
    std::array::from_fn(|_| {
        let cfg = GenConfig::new(preset.clone(), rng.gen()).with_byzantine([byz.clone()]);
        let g = gen_chronicle(&cfg);
        if rng.gen_bool(0.3) {
            prefix(&g, &mut rng)
        } else {
            g
        }
    })
}

fn prefix(g: &GroupChronicle, rng: &mut impl Rng) -> GroupChronicle {
    let index = CausalIndex::new(g);
    let none = FixedBitSet::with_capacity(index.len());
    let keep = sample_downset(&index, &none, rng);
    keep.ones()
        .map(|i| index.event(i).clone())
        .collect::<Result<_, _>>()
        .expect("downsets are link-closed and listed in topological order")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laws_hold_on_a_few_triples() {
        for seed in 0..50 {
            let [a, b, c] = sample_triple(seed);
            assert_eq!(join_law_failure(&a, &b, &c), None, "seed {seed}");
        }
    }
}
