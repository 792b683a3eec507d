//! Inputs shared by the benchmarks.

use chronicap_core::fixtures::entity;
use chronicap_core::oracle::{gen_chronicle, GenConfig};
use chronicap_core::{GroupChronicle, PolicyPreset, PresetKind};

/// A generated chronicle over participants A, B, C with C Byzantine.
pub fn generated(kind: PresetKind, seed: u64) -> GroupChronicle {
    let preset = PolicyPreset::new(kind, vec![entity("A"), entity("B"), entity("C")])
        .expect("preset participants are distinct");
    gen_chronicle(&GenConfig::new(preset, seed).with_byzantine([entity("C")]))
}

/// Join of the chronicles generated from seeds `0..n`. They share the preset
/// setup, so the result has one creation and grows with `n`.
pub fn joined(kind: PresetKind, n: u64) -> GroupChronicle {
    (1..n).fold(generated(kind, 0), |g, seed| g.join(&generated(kind, seed)))
}
