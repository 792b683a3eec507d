//! Fixture event ids are pinned in `tests/golden/fixture_ids.txt`, one
//! `<label> <id> <canonical encoding>` line per event. Set
//! `CHRONICAP_BLESS=1` to rewrite the file after an intended format change.

use std::path::PathBuf;

use chronicap_core::encode_event;
use chronicap_core::fixtures::all_fixture_events;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/fixture_ids.txt")
}

fn render() -> String {
    let mut out = String::new();
    for (label, e) in all_fixture_events() {
        out.push_str(&format!(
            "{label} {} {}\n",
            e.id().to_hex(),
            hex::encode(encode_event(&e))
        ));
    }
    out
}

#[test]
fn fixture_ids_match_golden_file() {
    let now = render();
    if std::env::var_os("CHRONICAP_BLESS").is_some() {
        std::fs::write(golden_path(), &now).unwrap();
    }
    let pinned = std::fs::read_to_string(golden_path()).expect("golden file is present");
    for (want, got) in pinned.lines().zip(now.lines()) {
        assert_eq!(want, got);
    }
    assert_eq!(pinned.lines().count(), now.lines().count());
}
