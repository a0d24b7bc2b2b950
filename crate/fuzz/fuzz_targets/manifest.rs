#![no_main]

use foa_spatial::foa_signal::{SceneManifest, TruthFile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = SceneManifest::from_json(text) {
        // re-serialized output must parse again
        let again = serde_json::to_string(&m).unwrap();
        let back = SceneManifest::from_json(&again).unwrap();
        assert_eq!(back.sources.len(), m.sources.len());
        assert_eq!(back.seed, m.seed);
    }
    let _ = TruthFile::from_json(text);
});
