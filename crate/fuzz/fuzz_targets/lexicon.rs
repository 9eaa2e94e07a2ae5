#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lexicon) = psyling::adapt::Lexicon::parse(text) {
        let _ = lexicon.hits(text);
    }
});
