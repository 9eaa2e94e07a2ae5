#![no_main]

use libfuzzer_sys::fuzz_target;
use psyling::corpus::{Corpus, ImportOptions};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for allow_unannotated in [false, true] {
        if let Ok(corpus) = Corpus::parse_jsonl_with(text, ImportOptions { allow_unannotated }) {
            let again = Corpus::parse_jsonl_with(&corpus.to_jsonl(), ImportOptions { allow_unannotated }).unwrap();
            assert_eq!(corpus, again);
            let _ = psyling::agreement::perfect_agreement(&corpus);
        }
    }
});
