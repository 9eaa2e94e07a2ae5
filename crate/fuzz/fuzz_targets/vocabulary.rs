#![no_main]

use libfuzzer_sys::fuzz_target;
use psyling::featurize::Vocabulary;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(vocab) = Vocabulary::from_json(text) {
        let _ = vocab.vectorize("I love this, thank you!");
    }
});
